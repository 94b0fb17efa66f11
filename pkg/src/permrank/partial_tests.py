"""Directional two-sample partial test statistics.

Every statistic maps (sample from population j, sample from population h)
to a scalar T where large T supports "j dominates h" on oriented data.
Numeric statistics take value sequences and drop missing entries per group
(complete-pair policy); ordinal statistics take per-category frequency
vectors over the K ordered levels.

The module exposes scalar functions mirroring that contract, plus batched
evaluators used by the permutation engine to score many relabelings at once.
Both paths share one implementation: the scalar call is a one-row batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError

NUMERIC_KINDS = frozenset({"numeric", "binary"})
ORDINAL_KINDS = frozenset({"ordinal"})

# statistic name -> variable kinds it accepts
STATISTIC_KINDS = {
    "mean_diff": NUMERIC_KINDS,
    "median_diff": NUMERIC_KINDS,
    "quartile_diff": NUMERIC_KINDS,
    "sd_diff": NUMERIC_KINDS,
    "iqr_diff": NUMERIC_KINDS,
    "anderson_darling_dir": ORDINAL_KINDS,
    "midrank_diff": ORDINAL_KINDS,
    "ks_dir": ORDINAL_KINDS,
    "shannon_diff": ORDINAL_KINDS,
    "gini_diff": ORDINAL_KINDS,
}

_QUARTILES = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class PartialStatSpec:
    """A named directional statistic, with its parameter when required."""

    statistic: str
    q: Optional[float] = None

    def __post_init__(self):
        if self.statistic not in STATISTIC_KINDS:
            raise ConfigError(f"unknown statistic {self.statistic!r}")
        if self.statistic == "quartile_diff":
            if self.q not in _QUARTILES:
                raise ConfigError("quartile_diff needs q in {0.25, 0.5, 0.75}")
        elif self.q is not None:
            raise ConfigError(f"{self.statistic} takes no q parameter")

    @property
    def applicable_kinds(self) -> frozenset:
        return STATISTIC_KINDS[self.statistic]

    def accepts(self, kind: str) -> bool:
        return kind in self.applicable_kinds

    @property
    def label(self) -> str:
        if self.statistic == "quartile_diff":
            return f"quartile_diff(q={self.q})"
        return self.statistic


@dataclass(frozen=True)
class AspectBundle:
    """Several statistics probing different aspects of one variable."""

    specs: tuple

    def __post_init__(self):
        specs = tuple(self.specs)
        if not specs:
            raise ConfigError("empty aspect bundle")
        object.__setattr__(self, "specs", specs)

    def check_kind(self, kind: str, name: str = "?"):
        for s in self.specs:
            if not s.accepts(kind):
                raise ConfigError(
                    f"statistic {s.label} does not apply to {kind} variable {name!r}")


def default_spec(kind: str) -> PartialStatSpec:
    """Default statistic per variable kind."""
    if kind in NUMERIC_KINDS:
        return PartialStatSpec("mean_diff")
    return PartialStatSpec("anderson_darling_dir")


def parse_spec(obj) -> PartialStatSpec:
    """Parse a config entry: a statistic name or {statistic: ..., q: ...}."""
    if isinstance(obj, PartialStatSpec):
        return obj
    if isinstance(obj, str):
        if obj == "quartile_diff":
            raise ConfigError("quartile_diff needs an explicit q")
        return PartialStatSpec(obj)
    if isinstance(obj, dict):
        extra = set(obj) - {"statistic", "q"}
        if extra or "statistic" not in obj:
            raise ConfigError(f"bad statistic entry {obj!r}")
        return PartialStatSpec(obj["statistic"], q=obj.get("q"))
    raise ConfigError(f"bad statistic entry {obj!r}")


# ---------------------------------------------------------------------------
# Batched numeric evaluators: rows are relabelings, columns are units
# ---------------------------------------------------------------------------

def _clean_rows(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    return a


def _nan_aware(a: np.ndarray) -> bool:
    return bool(np.isnan(a).any())


def _row_quantile(a: np.ndarray, q: float) -> np.ndarray:
    # order-statistic interpolation at h = q*(m-1)+1, numpy's 'linear' rule
    if _nan_aware(a):
        return np.nanquantile(a, q, axis=1)
    return np.quantile(a, q, axis=1)


def batch_numeric(statistic: str, xj: np.ndarray, xh: np.ndarray,
                  q: Optional[float] = None) -> np.ndarray:
    """Evaluate a numeric statistic on each row pair of (xj, xh)."""
    xj, xh = _clean_rows(xj), _clean_rows(xh)
    if statistic == "mean_diff":
        if _nan_aware(xj) or _nan_aware(xh):
            return np.nanmean(xj, axis=1) - np.nanmean(xh, axis=1)
        return xj.mean(axis=1) - xh.mean(axis=1)
    if statistic == "median_diff":
        return _row_quantile(xj, 0.5) - _row_quantile(xh, 0.5)
    if statistic == "quartile_diff":
        return _row_quantile(xj, q) - _row_quantile(xh, q)
    if statistic == "sd_diff":
        if _nan_aware(xj) or _nan_aware(xh):
            return np.nanstd(xj, axis=1, ddof=1) - np.nanstd(xh, axis=1, ddof=1)
        return xj.std(axis=1, ddof=1) - xh.std(axis=1, ddof=1)
    if statistic == "iqr_diff":
        iqr_j = _row_quantile(xj, 0.75) - _row_quantile(xj, 0.25)
        iqr_h = _row_quantile(xh, 0.75) - _row_quantile(xh, 0.25)
        return iqr_j - iqr_h
    raise ConfigError(f"not a numeric statistic: {statistic!r}")


# ---------------------------------------------------------------------------
# Batched ordinal evaluators on (rows, K) frequency matrices
# ---------------------------------------------------------------------------

def counts_from_levels(levels: np.ndarray, n_levels: int) -> np.ndarray:
    """Per-row category counts from a (rows, units) matrix of level indices.

    Level indices are 1-based; NaN cells are dropped.
    """
    a = _clean_rows(levels)
    cats = np.arange(1, n_levels + 1, dtype=float)
    # NaN cells compare unequal to every category, so they drop out
    return (a[:, :, None] == cats[None, None, :]).sum(axis=1).astype(float)


def _edf(counts: np.ndarray) -> tuple:
    tot = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        edf = np.cumsum(counts, axis=1) / tot
    return edf, tot[:, 0]


def batch_ordinal(statistic: str, fj: np.ndarray, fh: np.ndarray) -> np.ndarray:
    """Evaluate an ordinal statistic on each row pair of frequency matrices."""
    fj, fh = _clean_rows(fj), _clean_rows(fh)
    if fj.shape[1] < 2:
        raise DataError("ordinal statistics need K >= 2 categories")
    if statistic == "anderson_darling_dir":
        edf_j, _ = _edf(fj)
        edf_h, _ = _edf(fh)
        pool, _ = _edf(fj + fh)
        num = edf_h[:, :-1] - edf_j[:, :-1]
        fbar = pool[:, :-1]
        w = fbar * (1.0 - fbar)
        # categories where the pooled EDF is 0 or 1 carry no information
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(w > 0.0, num / np.sqrt(w), 0.0)
        return terms.sum(axis=1)
    if statistic == "midrank_diff":
        pooled = fj + fh
        below = np.cumsum(pooled, axis=1) - pooled
        midrank = below + (pooled + 1.0) / 2.0
        tot_j = fj.sum(axis=1)
        tot_h = fh.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean_j = (fj * midrank).sum(axis=1) / tot_j
            mean_h = (fh * midrank).sum(axis=1) / tot_h
        return mean_j - mean_h
    if statistic == "ks_dir":
        edf_j, _ = _edf(fj)
        edf_h, _ = _edf(fh)
        return (edf_h[:, :-1] - edf_j[:, :-1]).max(axis=1)
    if statistic in ("shannon_diff", "gini_diff"):
        return _heterogeneity(statistic, fj) - _heterogeneity(statistic, fh)
    raise ConfigError(f"not an ordinal statistic: {statistic!r}")


def _heterogeneity(statistic: str, f: np.ndarray) -> np.ndarray:
    tot = f.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = f / tot
    if statistic == "shannon_diff":
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(pi > 0.0, pi * np.log(pi), 0.0)
        return -terms.sum(axis=1)
    return 1.0 - (pi ** 2).sum(axis=1)


def batch_statistic(spec: PartialStatSpec, xj: np.ndarray, xh: np.ndarray,
                    n_levels: int = 0) -> np.ndarray:
    """Dispatch a spec over row batches of raw values (numeric or ordinal)."""
    if spec.applicable_kinds is ORDINAL_KINDS:
        fj = counts_from_levels(xj, n_levels)
        fh = counts_from_levels(xh, n_levels)
        return batch_ordinal(spec.statistic, fj, fh)
    return batch_numeric(spec.statistic, xj, xh, q=spec.q)


# ---------------------------------------------------------------------------
# Scalar API
# ---------------------------------------------------------------------------

def _one_sample(x, min_size: int = 1) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    a = a[~np.isnan(a)]
    if a.size < min_size:
        raise DataError("degenerate sample: fewer than "
                        f"{min_size} non-missing value(s)")
    return a


def mean_diff(x_j, x_h) -> float:
    """mean(x_j) - mean(x_h), missing values dropped per group."""
    return float(np.mean(_one_sample(x_j)) - np.mean(_one_sample(x_h)))


def quantile_diff(x_j, x_h, q: float) -> float:
    """Empirical q-quantile difference (order-statistic interpolation)."""
    if q not in _QUARTILES:
        raise ConfigError("q must be one of 0.25, 0.5, 0.75")
    return float(np.quantile(_one_sample(x_j), q) - np.quantile(_one_sample(x_h), q))


def median_diff(x_j, x_h) -> float:
    return quantile_diff(x_j, x_h, 0.5)


def scale_diff(x_j, x_h, kind: str = "sd") -> float:
    """Dispersion difference: sample sd (divisor n-1) or interquartile range."""
    if kind == "sd":
        a, b = _one_sample(x_j, 2), _one_sample(x_h, 2)
        return float(np.std(a, ddof=1) - np.std(b, ddof=1))
    if kind == "iqr":
        a, b = _one_sample(x_j), _one_sample(x_h)
        return float((np.quantile(a, 0.75) - np.quantile(a, 0.25))
                     - (np.quantile(b, 0.75) - np.quantile(b, 0.25)))
    raise ConfigError("scale kind must be 'sd' or 'iqr'")


def _freq(f) -> np.ndarray:
    a = np.asarray(f, dtype=float).ravel()
    if a.size < 2:
        raise DataError("ordinal statistics need K >= 2 categories")
    if (a < 0).any():
        raise DataError("negative category frequency")
    if a.sum() < 1:
        raise DataError("degenerate sample: empty frequency vector")
    return a


def anderson_darling_dir(f_j, f_h) -> float:
    """Directional Anderson-Darling statistic on ordered category counts.

    T = sum over cut points c < K of (EDF_h(c) - EDF_j(c)) / sqrt(Fbar(c)
    (1 - Fbar(c))) with Fbar the pooled EDF; cut points with pooled mass 0
    or 1 contribute nothing.  Large T means j sits on higher categories.
    """
    a, b = _freq(f_j), _freq(f_h)
    if a.size != b.size:
        raise DataError("frequency vectors must share the K levels")
    return float(batch_ordinal("anderson_darling_dir", a, b)[0])


def midrank_diff(f_j, f_h) -> float:
    """Difference of group mean mid-ranks computed from pooled counts."""
    a, b = _freq(f_j), _freq(f_h)
    if a.size != b.size:
        raise DataError("frequency vectors must share the K levels")
    return float(batch_ordinal("midrank_diff", a, b)[0])


def ks_dir(f_j, f_h) -> float:
    """One-sided Kolmogorov-Smirnov: max_c (EDF_h(c) - EDF_j(c)), c < K."""
    a, b = _freq(f_j), _freq(f_h)
    if a.size != b.size:
        raise DataError("frequency vectors must share the K levels")
    return float(batch_ordinal("ks_dir", a, b)[0])


def heterogeneity_diff(f_j, f_h, index: str = "gini") -> float:
    """Shannon or Gini heterogeneity difference between frequency vectors."""
    if index not in ("shannon", "gini"):
        raise ConfigError("index must be 'shannon' or 'gini'")
    a, b = _freq(f_j), _freq(f_h)
    if a.size != b.size:
        raise DataError("frequency vectors must share the K levels")
    return float(batch_ordinal(f"{index}_diff", a, b)[0])


def evaluate_bundle(bundle: AspectBundle, x_j, x_h,
                    n_levels: Optional[int] = None) -> np.ndarray:
    """Evaluate each statistic of a bundle on one pair of samples.

    Numeric bundles take raw value sequences; ordinal bundles take level
    index sequences plus ``n_levels``.
    """
    out = []
    for spec in bundle.specs:
        if spec.applicable_kinds is ORDINAL_KINDS:
            if n_levels is None:
                raise ConfigError(f"{spec.label} needs n_levels for ordinal data")
            a = _one_sample(x_j)
            b = _one_sample(x_h)
            out.append(batch_statistic(spec, a, b, n_levels=n_levels)[0])
        else:
            a = _one_sample(x_j, 2 if spec.statistic == "sd_diff" else 1)
            b = _one_sample(x_h, 2 if spec.statistic == "sd_diff" else 1)
            out.append(batch_statistic(spec, a, b)[0])
    return np.asarray(out, dtype=float)
