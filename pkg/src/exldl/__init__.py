"""Exact LDL and LU factorization over GF(2), GF(p), and the rationals."""

from .dense import (
    DenseMatrix,
    Permutation,
    compose,
    hstack,
    matmul,
    permute,
    tri_invert,
    tri_solve,
    vstack,
)
from .factor import (
    DBlock,
    LDLResult,
    LUResult,
    base_ldl,
    edge_eliminate,
    fast_ldl,
    fast_lu,
    inertia_from_D,
    vertex_eliminate,
)
from .fields import FieldContext, OpCounter, op_count_snapshot
from .saddle import (
    PartialLDL,
    SaddleSystem,
    complete_saddle_ldl,
    gamma_eliminate_partial,
    residual_schur,
    schilders_partial_ldl,
    skeleton_to_ldl_columns,
)
from .sparse import (
    SparseSym,
    Transcript,
    apply_transcript,
    explicit_ldl_from_transcript,
    peel_vertex,
    sparse_ldl,
    sparse_lu,
    tree_ldl,
    tree_ldl_substep,
)
from .treedec import (
    NormalizedTD,
    TreeDecomposition,
    binarize,
    greedy_td,
    merge_bags,
    normalize_td,
    post_order,
    read_td,
    validate_td,
)

__all__ = [
    "DBlock",
    "DenseMatrix",
    "FieldContext",
    "LDLResult",
    "LUResult",
    "NormalizedTD",
    "OpCounter",
    "PartialLDL",
    "Permutation",
    "SaddleSystem",
    "SparseSym",
    "Transcript",
    "TreeDecomposition",
    "apply_transcript",
    "base_ldl",
    "binarize",
    "complete_saddle_ldl",
    "compose",
    "edge_eliminate",
    "explicit_ldl_from_transcript",
    "fast_ldl",
    "fast_lu",
    "gamma_eliminate_partial",
    "greedy_td",
    "hstack",
    "inertia_from_D",
    "matmul",
    "merge_bags",
    "normalize_td",
    "op_count_snapshot",
    "peel_vertex",
    "permute",
    "post_order",
    "read_td",
    "residual_schur",
    "schilders_partial_ldl",
    "skeleton_to_ldl_columns",
    "sparse_ldl",
    "sparse_lu",
    "tree_ldl",
    "tree_ldl_substep",
    "tri_invert",
    "tri_solve",
    "validate_td",
    "vertex_eliminate",
    "vstack",
]

__version__ = "0.1.0"
