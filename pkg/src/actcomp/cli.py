"""Experiment driver: every capability behind one subcommand.

Reports are machine-readable (JSON or CSV with a schema comment), never
pretty tables, so runs can be diffed and plotted downstream. All commands
taking --seed are bit-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import blockwise, data, dist, gnn, quant, varopt
from .core import build_histogram, make_rng

SCHEMA_VERSION = 1
SWEEP_G_OVER_R = (2, 4, 8, 16, 32, 64)


def _write_json(obj: dict, out: str | None):
    text = json.dumps(obj, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_table_if(needed: bool):
    return varopt.default_table() if needed else None


def cmd_gen_synth(args) -> int:
    graph = data.generate_synth_graph(n=args.nodes, f_dim=args.features, seed=args.seed)
    data.save_graph_dir(graph, args.out)
    print(f"wrote {args.nodes}-node dataset to {args.out}", file=sys.stderr)
    return 0


def _run_train(args, g_over_r=None, capture=False):
    graph = data.resolve_dataset(args.dataset)
    spec = gnn.CompressionSpec(
        precision=args.precision,
        d_over_r=args.d_over_r,
        g_over_r=args.g_over_r if g_over_r is None else g_over_r,
        vm=args.vm,
    )
    table = _load_table_if(spec.vm)
    return gnn.train(graph, spec, epochs=args.epochs, lr=args.lr, seed=args.seed,
                     hidden=args.hidden, table=table, capture_activations=capture)


def cmd_train(args) -> int:
    report = _run_train(args, capture=args.save_activations is not None)
    if args.save_activations:
        np.savez(args.save_activations, **report.captured_activations)
    _write_json(report.as_dict(), args.out)
    return 0


def cmd_sweep(args) -> int:
    rows = []
    baseline_args = argparse.Namespace(**vars(args))
    baseline_args.precision = "fp32"
    baseline_args.d_over_r = 1
    baseline_args.vm = False
    base = _run_train(baseline_args)
    for g in SWEEP_G_OVER_R:
        rep = _run_train(args, g_over_r=g)
        rows.append({
            "g_over_r": g,
            "accuracy": rep.final_test_acc,
            "seconds_per_epoch": rep.seconds_per_epoch,
            "activation_bits": rep.activation_bits_total,
            "memory_ratio_vs_fp32": rep.activation_bits_total / base.activation_bits_total,
        })
    header = ["g_over_r", "accuracy", "seconds_per_epoch", "activation_bits",
              "memory_ratio_vs_fp32"]
    _write_csv(args.out, "actcomp-sweep", header, [[r[k] for k in header] for r in rows])
    return 0


def _write_csv(out, schema: str, header, rows):
    def emit(fh):
        fh.write(f"# schema: {schema}-v{SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)

    if out:
        with open(out, "w", newline="") as fh:
            emit(fh)
    else:
        emit(sys.stdout)


def cmd_fit_dist(args) -> int:
    stacked: dict[str, list[np.ndarray]] = {}
    for path in args.activations:
        with np.load(path) as npz:
            for key in npz.files:
                stacked.setdefault(key, []).append(npz[key])
    if not stacked:
        print("no activation arrays found", file=sys.stderr)
        return 1
    levels = (1 << args.bits) - 1
    edges = np.linspace(0.0, levels, args.bins + 1)
    rows = []
    for key in sorted(stacked):
        mats = stacked[key]
        r_dim = mats[0].shape[1]
        # mean of the per-run histogram densities defines the observed density
        dens = np.mean([build_histogram(m.ravel(), edges).density() for m in mats], axis=0)
        model = dist.ClippedNormal.from_bits_and_dim(args.bits, r_dim)
        jsd_u = dist.jsd_masses(dens, dist.uniform_bin_masses(edges, levels))
        jsd_cn = dist.jsd_masses(dens, dist.cn_bin_masses(model, edges))
        rows.append([key, r_dim, f"{jsd_u:.8f}", f"{jsd_cn:.8f}"])
    _write_csv(args.out, "actcomp-fit-dist",
               ["layer", "R", "jsd_uniform", "jsd_clipped_normal"], rows)
    return 0


def cmd_var_opt(args) -> int:
    if args.build_table:
        table = varopt.build_boundary_table()
        out = args.out or str(Path(varopt.__file__).parent / "data" / "boundary_table.csv")
        varopt.save_table(table, out)
        print(f"wrote {len(table)} entries to {out}", file=sys.stderr)
        return 0
    if args.grid:
        if args.d is None:
            print("--grid needs --d", file=sys.stderr)
            return 2
        model = dist.ClippedNormal.from_bits_and_dim(2, args.d)
        step = args.resolution
        alphas = np.arange(step, 1.5 + 1e-12, step)
        rows = []
        for a in alphas:
            for b in np.arange(a + step, 3.0 - 1e-12, step):
                rows.append([f"{a:.4f}", f"{b:.4f}",
                             f"{varopt.expected_variance([0.0, a, b, 3.0], model):.10e}"])
        _write_csv(args.out, "actcomp-varopt-grid",
                   ["alpha", "beta", "expected_variance"], rows)
        return 0
    if args.d is None:
        print("var-opt needs --d or --build-table", file=sys.stderr)
        return 2
    if not varopt.TABLE_D_MIN <= args.d <= varopt.TABLE_D_MAX:
        print(f"D={args.d} outside the feasible table range "
              f"[{varopt.TABLE_D_MIN}, {varopt.TABLE_D_MAX}]", file=sys.stderr)
        return 2
    a, b, ev = varopt.default_table().lookup(args.d)
    _write_csv(args.out, "actcomp-varopt",
               ["D", "alpha", "beta", "expected_variance"],
               [[args.d, f"{a:.9f}", f"{b:.9f}", f"{ev:.12e}"]])
    return 0


def _time_best(fn, repeats: int = 5) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cmd_bench_quant(args) -> int:
    rng = make_rng(args.seed)
    n_rows = args.elements // args.row_width
    h = rng.normal(size=(n_rows, args.row_width)).astype(np.float32)
    elems = h.size
    results = []
    for bits in (2, 4, 8):
        row_scheme = quant.QuantScheme(bits=bits)
        packed = quant.quantize_rows(h, row_scheme, rng)
        tq = _time_best(lambda: quant.quantize_rows(h, row_scheme, rng))
        td = _time_best(lambda: quant.dequantize_rows(packed))
        results.append({"mode": "per_row", "bits": bits, "block_size": None,
                        "quantize_eps": elems / tq, "dequantize_eps": elems / td})
        g = 2
        while g <= args.max_block:
            scheme = quant.QuantScheme(bits=bits, block_size=g)
            packed = blockwise.quantize_blockwise(h, scheme, rng)
            tq = _time_best(lambda: blockwise.quantize_blockwise(h, scheme, rng))
            td = _time_best(lambda: blockwise.dequantize_blockwise(packed))
            results.append({"mode": "block", "bits": bits, "block_size": g,
                            "quantize_eps": elems / tq, "dequantize_eps": elems / td})
            g *= 2
    _write_json({"schema_version": SCHEMA_VERSION, "elements": elems,
                 "row_width": args.row_width, "results": results}, args.out)
    return 0


def _add_train_flags(p):
    p.add_argument("--dataset", required=True,
                   help=f"dataset directory, or '{data.SYNTH_NAME}' for the built-in one")
    p.add_argument("--precision", choices=sorted(gnn.PRECISION_BITS), default="fp32")
    p.add_argument("--d-over-r", type=int, default=8, dest="d_over_r",
                   help="projection ratio; 1 disables projection")
    p.add_argument("--g-over-r", type=int, default=None, dest="g_over_r",
                   help="block size as a multiple of R; omit for per-row grouping")
    p.add_argument("--vm", action="store_true",
                   help="use variance-minimized bin boundaries (int2 only)")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None, help="report path (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="actcomp",
                                 description="activation-compression experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="write the synthetic dataset directory")
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", type=int, default=200)
    p.add_argument("--features", type=int, default=64)
    p.add_argument("--seed", type=int, default=data.SYNTH_SEED)
    p.set_defaults(fn=cmd_gen_synth)

    p = sub.add_parser("train", help="train once and write a JSON report")
    _add_train_flags(p)
    p.add_argument("--save-activations", default=None, dest="save_activations",
                   help="save best-epoch normalized projected activations (npz)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sweep", help="int2 block-size sweep vs fp32 baseline")
    _add_train_flags(p)
    p.set_defaults(fn=cmd_sweep, precision="int2")

    p = sub.add_parser("fit-dist", help="per-layer divergence of saved activations")
    p.add_argument("--activations", nargs="+", required=True,
                   help="npz file(s) from train --save-activations; several are averaged")
    p.add_argument("--bits", type=int, default=2)
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fit_dist)

    p = sub.add_parser("var-opt", help="optimal bin boundaries per dimensionality")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--build-table", action="store_true", dest="build_table",
                   help="re-optimize the full table and write the CSV artifact")
    p.add_argument("--grid", action="store_true",
                   help="emit the expected-variance surface over (alpha, beta)")
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_var_opt)

    p = sub.add_parser("bench-quant", help="quantize/dequantize throughput report")
    p.add_argument("--elements", type=int, default=1 << 20)
    p.add_argument("--row-width", type=int, default=64, dest="row_width")
    p.add_argument("--max-block", type=int, default=4096, dest="max_block")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_bench_quant)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (FileNotFoundError, ValueError, KeyError, gnn.TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
