"""Low-rank plus sparse regression for populations of networks."""

from ._netreg import (
    DivergedFit,
    IngestionError,
    detect_communities,
    ebic_value,
    f1_support,
    fit,
    load_dataset,
    neg_loglik,
    nmi,
    simulate,
    sparsity_budget,
    truncate,
    tune,
)

__all__ = [
    "DivergedFit",
    "IngestionError",
    "detect_communities",
    "ebic_value",
    "f1_support",
    "fit",
    "load_dataset",
    "neg_loglik",
    "nmi",
    "simulate",
    "sparsity_budget",
    "truncate",
    "tune",
]
