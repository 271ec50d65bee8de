"""Path-based neural relation extraction: python bindings for the core scoring operations."""

from ._pathrex import (  # noqa: F401
    __version__,
    affine,
    aggregate_paths,
    global_score,
    grad_check,
    l1_distance,
    max_f1,
    path_relation_prob,
    pr_curve,
    softmax,
)

__all__ = [
    "__version__",
    "affine",
    "aggregate_paths",
    "global_score",
    "grad_check",
    "l1_distance",
    "max_f1",
    "path_relation_prob",
    "pr_curve",
    "softmax",
]
