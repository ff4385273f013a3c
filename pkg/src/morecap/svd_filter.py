"""Epoch-boundary replacement of recurrent weights by truncated-SVD copies.

Each expert in the mixture carries a diversity factor k = i/R; at the end
of every training epoch its targeted weight matrices are decomposed and
rebuilt from the leading share of principal components, so experts with
smaller factors drift toward lower-rank, coarser term models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .linalg import svd, truncated_reconstruct
from .params import ParameterSet


def diversity_factor(i: int, r: int) -> float:
    """k = i / R for expert i of R."""
    if r < 1:
        raise ValueError(f"expert count must be >= 1, got {r}")
    if not 1 <= i <= r:
        raise ValueError(f"expert index {i} outside [1, {r}]")
    return i / r


def retained_rank(k: float, w) -> int:
    """Number of principal components kept: round-half-up of k * min(m, n).

    The proportion applies to min(m, n) rather than a numerical rank
    estimate; trained dense matrices are full-rank in practice and this
    keeps k = 1 lossless. Floored at 1 so tiny matrices survive.
    """
    if not 0.0 < k <= 1.0:
        raise ValueError(f"diversity factor must be in (0, 1], got {k}")
    r = min(w.shape)
    return max(1, math.floor(k * r + 0.5))


@dataclass
class ExpertSpec:
    """Identity and filter configuration of one expert in the mixture."""

    index: int
    expert_count: int
    target_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        # Validates the index range as a side effect.
        self.k = diversity_factor(self.index, self.expert_count)


def apply_filter(params: ParameterSet, spec: ExpertSpec) -> None:
    """Replace every targeted matrix by its rank-limited reconstruction.

    Mutates values in place; all other parameters (and any optimizer state)
    are left untouched. Requires exclusive access to params.
    """
    missing = [n for n in spec.target_names if n not in params]
    if missing:
        raise KeyError(f"filter targets not found in parameter set: {missing}")
    for name in spec.target_names:
        p = params[name]
        dec = svd(p.value)
        l = retained_rank(spec.k, p.value)
        p.value[...] = truncated_reconstruct(dec, l)
