"""Mixture-of-recurrent-experts captioning toolkit."""

__version__ = "0.1.0"

from .config import Config
from .linalg import SvdResult, svd, truncated_reconstruct
from .svd_filter import ExpertSpec, apply_filter, diversity_factor, retained_rank

__all__ = [
    "Config",
    "SvdResult",
    "svd",
    "truncated_reconstruct",
    "ExpertSpec",
    "apply_filter",
    "diversity_factor",
    "retained_rank",
    "__version__",
]
