"""Block-wise sub-byte compression of activation maps, with a GNN testbed."""

from .blockwise import (
    BlockView,
    MemoryReport,
    dequantize_blockwise,
    memory_report,
    quantize_blockwise,
    reshape_blocks,
    unreshape_blocks,
)
from .core import (
    Histogram,
    SparseAdjacency,
    build_histogram,
    dense_matrix,
    derive_seed,
    make_rng,
    normalize_adjacency,
    spmm,
)
from .data import GraphData, generate_synth_graph, load_graph_dir, save_graph_dir
from .dist import (
    ClippedNormal,
    cn_cdf,
    cn_params,
    cn_pdf,
    cn_sample,
    fit_cn_to_activations,
    js_divergence,
    jsd_masses,
    std_normal_quantile,
)
from .gnn import CompressionSpec, GnnLayer, TrainingDiverged, backward, forward, train
from .projection import RademacherProjector, project, recover
from .quant import (
    PackedQuantTensor,
    QuantScheme,
    dequantize_row,
    dequantize_rows,
    deserialize,
    pack_codes,
    quantize_row,
    quantize_rows,
    serialize,
    sr_nonuniform,
    sr_uniform,
    unpack_codes,
)
from .varopt import (
    BoundaryTable,
    build_boundary_table,
    default_table,
    expected_variance,
    load_table,
    optimize_boundaries,
    save_table,
    sr_variance,
    variance_reduction,
    variance_reduction_profile,
)

__version__ = "0.1.0"
