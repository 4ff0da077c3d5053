"""Graph dataset container, CSV directory format, and a synthetic benchmark.

A dataset directory holds four files, all without headers:
  edges.csv     one undirected edge per line, two zero-indexed ints
  features.csv  N rows of F comma-separated reals
  labels.csv    one integer class per node
  splits.csv    one of train/val/test per node
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DTYPE, SparseAdjacency, make_rng

SPLIT_NAMES = ("train", "val", "test")
SYNTH_NAME = "synth200"
SYNTH_SEED = 42  # dataset generation is fixed; run seeds vary separately


@dataclass(frozen=True)
class GraphData:
    features: np.ndarray  # (N, F) float32
    labels: np.ndarray  # (N,) int64
    splits: np.ndarray  # (N,) int8 codes into SPLIT_NAMES
    adjacency: SparseAdjacency  # symmetric, unnormalized

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def split_mask(self, name: str) -> np.ndarray:
        return self.splits == SPLIT_NAMES.index(name)


def generate_synth_graph(n: int = 200, f_dim: int = 64, seed: int = SYNTH_SEED,
                         p_in: float = 0.08, p_out: float = 0.01,
                         mean_scale: float = 1.25) -> GraphData:
    """Two-community stochastic block model with community-informative features.

    Node features are an isotropic Gaussian around a per-community mean, so
    the task is separable by features alone and any reasonable model reaches
    high accuracy; the point is comparing training configurations, not the
    classifier.
    """
    rng = make_rng(seed)
    labels = np.zeros(n, dtype=np.int64)
    labels[n // 2:] = 1

    mu = rng.normal(0.0, 1.0, size=(2, f_dim))
    mu /= np.linalg.norm(mu, axis=1, keepdims=True)
    feats = (mean_scale * mu[labels] + rng.normal(0.0, 1.0, size=(n, f_dim))).astype(DTYPE)

    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    p = np.where(same, p_in, p_out)
    keep = rng.random(p.shape) < p
    src, dst = iu[keep], ju[keep]
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    adj = SparseAdjacency(n=n, rows=rows, cols=cols, values=np.ones(rows.size, dtype=DTYPE))

    splits = np.zeros(n, dtype=np.int8)
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        n_train = int(round(0.6 * idx.size))
        n_val = int(round(0.2 * idx.size))
        splits[idx[n_train:n_train + n_val]] = 1
        splits[idx[n_train + n_val:]] = 2
    return GraphData(features=feats, labels=labels, splits=splits, adjacency=adj)


def save_graph_dir(graph: GraphData, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    # store each undirected edge once (i < j); the loader symmetrizes
    mask = graph.adjacency.rows < graph.adjacency.cols
    edges = np.stack([graph.adjacency.rows[mask], graph.adjacency.cols[mask]], axis=1)
    np.savetxt(path / "edges.csv", edges, fmt="%d", delimiter=",")
    np.savetxt(path / "features.csv", graph.features, fmt="%.9g", delimiter=",")
    np.savetxt(path / "labels.csv", graph.labels, fmt="%d")
    with open(path / "splits.csv", "w") as fh:
        for code in graph.splits:
            fh.write(SPLIT_NAMES[code] + "\n")


def load_graph_dir(path) -> GraphData:
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {path}")
    for name in ("edges.csv", "features.csv", "labels.csv", "splits.csv"):
        if not (path / name).is_file():
            raise FileNotFoundError(f"dataset directory missing {name}: {path}")
    edges = np.loadtxt(path / "edges.csv", dtype=np.int64, delimiter=",", ndmin=2)
    feats = np.loadtxt(path / "features.csv", dtype=DTYPE, delimiter=",", ndmin=2)
    labels = np.loadtxt(path / "labels.csv", dtype=np.int64, ndmin=1)
    with open(path / "splits.csv") as fh:
        names = [line.strip() for line in fh if line.strip()]
    if not all(s in SPLIT_NAMES for s in names):
        bad = sorted({s for s in names if s not in SPLIT_NAMES})
        raise ValueError(f"splits.csv contains unknown labels {bad}")
    splits = np.array([SPLIT_NAMES.index(s) for s in names], dtype=np.int8)
    n = feats.shape[0]
    if not (labels.shape[0] == n and splits.shape[0] == n):
        raise ValueError("features, labels and splits disagree on node count")
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = SparseAdjacency(n=n, rows=rows, cols=cols, values=np.ones(rows.size, dtype=DTYPE))
    return GraphData(features=feats, labels=labels, splits=splits, adjacency=adj)


def resolve_dataset(spec: str) -> GraphData:
    """Load a dataset directory, or the built-in synth200 by name."""
    if spec == SYNTH_NAME:
        return generate_synth_graph()
    return load_graph_dir(spec)
