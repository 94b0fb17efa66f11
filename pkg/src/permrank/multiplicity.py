"""Familywise-error adjustment of the ordered upper-triangular p-values.

The family is the m = C(C-1)/2 upper-triangle entries of the reordered
directional matrix.  Bonferroni-Holm is the default; Shaffer's procedure
exploits the logical relations among pairwise equality hypotheses: given
some rejections, only certain counts of true hypotheses remain possible,
so later step-down multipliers can shrink below Holm's.

Adjusted p-values are reported with step-down monotonicity enforced
(running maximum), the standard adjusted-p convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from sympy.utilities.iterables import partitions

from .errors import ConfigError

METHODS = ("none", "holm", "shaffer")
_MAX_C_FOR_PARTITIONS = 30


def holm_adjust(ps) -> np.ndarray:
    """Step-down Bonferroni-Holm adjusted p-values, in input order."""
    p = np.asarray(ps, dtype=float).ravel()
    _check_pvalues(p)
    m = p.size
    order = np.argsort(p, kind="stable")
    mult = np.arange(m, 0, -1)
    adj = np.minimum(1.0, np.maximum.accumulate(mult * p[order]))
    out = np.empty(m)
    out[order] = adj
    return out


@lru_cache(maxsize=None)
def shaffer_truth_counts(C: int) -> tuple:
    """Achievable numbers of true pairwise equality hypotheses, descending.

    Populations split into equality classes; a partition (c_1, c_2, ...)
    of C leaves sum_g C(c_g, 2) pairwise hypotheses true.  Enumerating all
    integer partitions of C yields every achievable count.
    """
    if C < 2:
        raise ConfigError("C >= 2 required")
    if C > _MAX_C_FOR_PARTITIONS:
        raise ConfigError(f"partition enumeration capped at C = {_MAX_C_FOR_PARTITIONS}")
    counts = set()
    for part in partitions(C):
        counts.add(sum(math.comb(size, 2) * mult for size, mult in part.items()))
    return tuple(sorted(counts, reverse=True))


def shaffer_multipliers(C: int) -> np.ndarray:
    """Step-down multipliers t_i for the sorted p-values.

    t_1 = m (no rejection yet), and after i-1 rejections t_i is the largest
    achievable true count not exceeding m - i + 1.
    """
    counts = shaffer_truth_counts(C)
    m = math.comb(C, 2)
    mult = np.empty(m, dtype=int)
    for i in range(1, m + 1):
        ceiling = m - i + 1
        mult[i - 1] = next(k for k in counts if k <= ceiling)
    return mult


def shaffer_adjust(ps, C: int) -> np.ndarray:
    """Shaffer's logically-constrained step-down adjustment."""
    p = np.asarray(ps, dtype=float).ravel()
    _check_pvalues(p)
    m = math.comb(C, 2)
    if p.size != m:
        raise ConfigError(f"expected m = C(C-1)/2 = {m} p-values, got {p.size}")
    order = np.argsort(p, kind="stable")
    mult = shaffer_multipliers(C)
    adj = np.minimum(1.0, np.maximum.accumulate(mult * p[order]))
    out = np.empty(m)
    out[order] = adj
    return out


def _check_pvalues(p: np.ndarray):
    if p.size == 0:
        raise ConfigError("empty p-value vector")
    if np.isnan(p).any() or (p <= 0).any() or (p > 1).any():
        raise ConfigError("p-values must lie in (0, 1]")


@dataclass(frozen=True)
class AdjustedUpperMatrix:
    """Raw and adjusted upper-triangular p-values over ordered populations."""

    labels: tuple
    raw: np.ndarray
    adjusted: np.ndarray
    method: str
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        for name in ("raw", "adjusted"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.method not in METHODS:
            raise ConfigError(f"unknown adjustment {self.method!r}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")


def adjust_upper(upper: np.ndarray, labels, method: str = "holm",
                 alpha: float = 0.05) -> AdjustedUpperMatrix:
    """Adjust the strict upper triangle of an ordered p-value matrix.

    Only the m upper entries form the family; the lower triangle was
    discarded as uninformative when the matrix was ordered.
    """
    upper = np.asarray(upper, dtype=float)
    c = upper.shape[0]
    if upper.shape != (c, c) or len(tuple(labels)) != c:
        raise ConfigError("square matrix and matching labels required")
    iu = np.triu_indices(c, k=1)
    flat = upper[iu]
    if method == "none":
        adj = flat.copy()
    elif method == "holm":
        adj = holm_adjust(flat)
    elif method == "shaffer":
        adj = shaffer_adjust(flat, c)
    else:
        raise ConfigError(f"unknown adjustment {method!r}")
    out = np.full_like(upper, math.nan)
    out[iu] = adj
    raw = np.full_like(upper, math.nan)
    raw[iu] = flat
    return AdjustedUpperMatrix(labels=tuple(labels), raw=raw, adjusted=out,
                               method=method, alpha=alpha)
