"""Permutation generation, exhaustive enumeration, and the resampling loop.

Relabelings come from counter-based streams keyed by (master seed, pair),
so replication ``i`` of a plan is a pure function of ``(seed, pair, i)``:
results are identical for any worker count and any evaluation order.

Two sampling strategies are supported, plus exact enumeration:

* ``pip``  - pairwise independent permutations: each pair (j, h) pools only
  its own units and draws its own relabelings;
* ``npip`` - one shared set of C-sample relabelings; each pairwise statistic
  reads the relevant two relabeled groups off every relabeling;
* ``exhaustive`` - full enumeration of the pair's relabeling orbit (or of
  the C-sample orbit for global tests) when its size fits under the cap.

Stratum/block constraints confine relabelings to their cells throughout.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sympy.utilities.iterables import multiset_permutations

from ._rng import stream_id, uniform_rows
from .dataset import DatasetView
from .errors import ConfigError, DataError
from .partial_tests import (AspectBundle, PartialStatSpec, batch_statistic,
                            default_spec)

STRATEGIES = ("pip", "npip", "exhaustive")
DEFAULT_EXHAUSTIVE_CAP = 10 ** 6


@dataclass(frozen=True)
class PermutationPlan:
    """How the permutation orbit is sampled or enumerated.

    Args:
        strategy: ``pip``, ``npip`` or ``exhaustive``.
        B: replication count for the sampled strategies (>= 1).
        seed: 64-bit master seed; every derived stream is keyed off it.
        constraint: optional per-unit cell labels (stratum x block); units
            are only ever relabeled within their own cell.
        exhaustive_cap: refuse enumeration beyond this orbit size.
    """

    strategy: str = "pip"
    B: int = 2000
    seed: int = 0
    constraint: Optional[tuple] = None
    exhaustive_cap: int = DEFAULT_EXHAUSTIVE_CAP

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.B < 1:
            raise ConfigError("B >= 1 required")
        if self.constraint is not None:
            object.__setattr__(self, "constraint", tuple(self.constraint))


@dataclass(frozen=True)
class StatisticTableau:
    """Observed statistics plus their values on relabeled data.

    ``permuted`` holds one row per relabeling: B sampled rows, or the whole
    orbit (identity included) in exhaustive mode.  ``degenerate`` flags
    columns that are constant over the orbit (non-informative variables) or
    undefined on the observed data; they are excluded from combination.
    """

    observed: np.ndarray
    permuted: np.ndarray
    exhaustive: bool
    columns: tuple
    degenerate: np.ndarray
    pair: Optional[tuple] = None

    def __post_init__(self):
        for name in ("observed", "permuted", "degenerate"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n_rows(self) -> int:
        return self.permuted.shape[0]

    @property
    def n_columns(self) -> int:
        return self.permuted.shape[1]

    def transformed(self, fn) -> "StatisticTableau":
        """Apply a statistic transform columnwise (for equivalence checks)."""
        return StatisticTableau(
            observed=fn(np.array(self.observed)),
            permuted=fn(np.array(self.permuted)),
            exhaustive=self.exhaustive,
            columns=self.columns,
            degenerate=np.array(self.degenerate),
            pair=self.pair,
        )

    def negated(self) -> "StatisticTableau":
        """The same orbit scored for the reversed dominance direction."""
        return self.transformed(lambda a: -a)


# ---------------------------------------------------------------------------
# Cardinalities
# ---------------------------------------------------------------------------

def cardinality(strategy: str, sizes: Sequence[int],
                pair: Optional[tuple] = None) -> int:
    """Size of the relabeling orbit for a permutation strategy.

    ``pip`` needs ``pair`` (indices into ``sizes``); ``pcsp``/``pusp`` are
    defined for balanced designs only.
    """
    s = strategy.lower()
    sizes = [int(x) for x in sizes]
    if any(x <= 0 for x in sizes):
        raise ConfigError("group sizes must be positive")
    if s == "pip":
        if pair is None:
            raise ConfigError("pip cardinality needs a pair (j, h)")
        j, h = pair
        return math.comb(sizes[j] + sizes[h], sizes[j])
    if s == "npip":
        total = math.factorial(sum(sizes))
        for x in sizes:
            total //= math.factorial(x)
        return total
    if s in ("pcsp", "pusp"):
        if len(set(sizes)) != 1:
            raise ConfigError(f"{s} requires a balanced design")
        n = sizes[0]
        return math.factorial(2 * n) // (math.factorial(n) ** 2)
    raise ConfigError(f"unknown strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Relabeling generation
# ---------------------------------------------------------------------------

def _group_array(groups) -> np.ndarray:
    return np.asarray(list(groups), dtype=object)


def _cells_of(pool: np.ndarray, constraint: Optional[Sequence]) -> list:
    """Positions of each constraint cell within the pool (row order)."""
    if constraint is None:
        return [np.arange(len(pool))]
    labels = [constraint[i] for i in pool]
    cells = {}
    for pos, lab in enumerate(labels):
        cells.setdefault(lab, []).append(pos)
    return [np.asarray(v, dtype=int) for _, v in sorted(cells.items(), key=lambda kv: str(kv[0]))]


def _pair_stream(pair_ranks: tuple) -> int:
    return stream_id("pip-pair", *pair_ranks)


_NPIP_STREAM = stream_id("npip")


def _sampled_orders(seed: int, stream: int, pool: np.ndarray, cells: list,
                    n_rows: int, start: int) -> np.ndarray:
    """Rows [start, start+n_rows) of within-cell shuffles of the pool."""
    u = uniform_rows(seed, stream, n_rows, len(pool), start=start)
    orders = np.tile(pool, (n_rows, 1))
    for pos in cells:
        if len(pos) < 2:
            continue  # single-unit cell stays fixed
        ranks = np.argsort(u[:, pos], axis=1, kind="stable")
        orders[:, pos] = pool[pos][ranks]
    return orders


def generate_relabeling(plan: PermutationPlan, groups: Sequence,
                        pair: Optional[tuple] = None, index: int = 0) -> np.ndarray:
    """The unit order of replication ``index``, as absolute unit indices.

    Index 0 is the identity (the observed labeling).  For ``pip`` the order
    covers only the pooled pair units (in original row order); position ``t``
    of the output takes the group label that position ``t`` holds in the
    observed pool.  For ``npip`` the order covers all units.  The result
    depends only on (seed, pair, index); stratum/block cells never mix.
    """
    garr = _group_array(groups)
    labels = sorted(set(garr.tolist()))
    if plan.strategy == "pip" or (plan.strategy == "exhaustive" and pair is not None):
        if pair is None:
            raise ConfigError("pip relabelings are defined per pair")
        a, b = pair
        if a not in labels or b not in labels:
            raise DataError(f"unknown pair {pair!r}")
        pool = np.flatnonzero((garr == a) | (garr == b))
        stream = _pair_stream((labels.index(a), labels.index(b)))
    else:
        pool = np.arange(len(garr))
        stream = _NPIP_STREAM
    if index == 0:
        return pool.copy()
    if plan.strategy == "exhaustive":
        orders = enumerate_orders(plan, groups, pair=pair)
        return orders[index]
    cells = _cells_of(pool, plan.constraint)
    return _sampled_orders(plan.seed, stream, pool, cells, 1, index - 1)[0]


def _check_cap(size: int, cap: int):
    if size > cap:
        raise ConfigError(
            f"exhaustive orbit has {size} relabelings, over the cap {cap}")


def exhaustive_size(plan: PermutationPlan, groups: Sequence,
                    pair: Optional[tuple] = None) -> int:
    """Orbit size under the plan's constraint, without materialising it."""
    garr = _group_array(groups)
    if pair is not None:
        a, b = pair
        pool = np.flatnonzero((garr == a) | (garr == b))
        size = 1
        for pos in _cells_of(pool, plan.constraint):
            units = garr[pool[pos]]
            size *= math.comb(len(units), int((units == a).sum()))
        return size
    pool = np.arange(len(garr))
    size = 1
    for pos in _cells_of(pool, plan.constraint):
        counts = {}
        for g in garr[pool[pos]]:
            counts[g] = counts.get(g, 0) + 1
        cell = math.factorial(len(pos))
        for c in counts.values():
            cell //= math.factorial(c)
        size *= cell
    return size


def enumerate_orders(plan: PermutationPlan, groups: Sequence,
                     pair: Optional[tuple] = None) -> np.ndarray:
    """The full relabeling orbit as an array of unit orders.

    Pairwise (``pair`` given): every assignment of the pooled units to the
    two labels, respecting per-cell label counts under constraints.  Global
    (``pair`` None): every distinct C-sample label arrangement.  The
    identity labeling is placed first.
    """
    garr = _group_array(groups)
    labels = sorted(set(garr.tolist()))
    _check_cap(exhaustive_size(plan, groups, pair), plan.exhaustive_cap)
    if pair is not None:
        a, b = pair
        pool = np.flatnonzero((garr == a) | (garr == b))
        cells = _cells_of(pool, plan.constraint)
        per_cell = []
        for pos in cells:
            units = pool[pos]
            is_a = garr[units] == a
            cell_pos_a = pos[is_a]
            cell_pos_b = pos[~is_a]
            count_a = int(is_a.sum())
            choices = []
            for comb in itertools.combinations(range(len(units)), count_a):
                in_a = np.zeros(len(units), dtype=bool)
                in_a[list(comb)] = True
                choices.append((units[in_a], units[~in_a]))
            per_cell.append((cell_pos_a, cell_pos_b, choices))
        orders = []
        for combo in itertools.product(*[c for _, _, c in per_cell]):
            order = np.empty(len(pool), dtype=int)
            for (cpa, cpb, _), (first, second) in zip(per_cell, combo):
                order[cpa] = first
                order[cpb] = second
            orders.append(order)
        orders = np.asarray(orders, dtype=int)
    else:
        pool = np.arange(len(garr))
        cells = _cells_of(pool, plan.constraint)
        per_cell = []
        for pos in cells:
            units = pool[pos]
            seq = [labels.index(g) for g in garr[units]]
            arrangements = list(multiset_permutations(seq))
            # positions of each label within the cell, in observed order
            pos_by_label = {code: pos[np.asarray(seq) == code]
                            for code in set(seq)}
            per_cell.append((units, pos_by_label, arrangements))
        orders = []
        for combo in itertools.product(*[a for _, _, a in per_cell]):
            # units are re-dealt within each cell so that the observed
            # label pattern at each position is preserved
            order = np.empty(len(pool), dtype=int)
            for (units, pos_by_label, _), arrangement in zip(per_cell, combo):
                arrangement = np.asarray(arrangement)
                for code, positions in pos_by_label.items():
                    order[positions] = units[arrangement == code]
            orders.append(order)
        orders = np.asarray(orders, dtype=int)
    # identity first, for the index-0 convention
    identity = pool
    where = np.flatnonzero((orders == identity).all(axis=1))
    if where.size and where[0] != 0:
        k = where[0]
        orders[[0, k]] = orders[[k, 0]]
    return orders


# ---------------------------------------------------------------------------
# The conditional resampling loop
# ---------------------------------------------------------------------------

def build_column_plan(meta: Sequence, specs=None) -> list:
    """Flatten per-variable specs into tableau columns.

    ``specs`` may be None (defaults per kind) or a sequence aligned with the
    view's variables, each entry a PartialStatSpec, an AspectBundle, a list
    of specs, or None for the default.

    Returns a list of (variable position, PartialStatSpec, label).
    """
    p = len(meta)
    if specs is None:
        specs = [None] * p
    if len(specs) != p:
        raise ConfigError(f"{p} variables but {len(specs)} statistic specs")
    plan = []
    for k, (m, entry) in enumerate(zip(meta, specs)):
        if entry is None:
            entries = (default_spec(m.kind),)
        elif isinstance(entry, AspectBundle):
            entries = entry.specs
        elif isinstance(entry, PartialStatSpec):
            entries = (entry,)
        else:
            entries = tuple(entry)
            if not entries:
                raise ConfigError(f"variable {m.name!r}: empty statistic list")
        for s in entries:
            if not s.accepts(m.kind):
                raise ConfigError(
                    f"statistic {s.label} does not apply to {m.kind} "
                    f"variable {m.name!r}")
            plan.append((k, s, f"{m.name}:{s.label}"))
    return plan


def effective_constraint(plan: PermutationPlan, view: DatasetView):
    """Constraint cells for a view: plan override, else the dataset's own."""
    if plan.constraint is not None:
        if len(plan.constraint) != view.dataset.n:
            raise ConfigError("plan constraint must label every dataset unit")
        return tuple(plan.constraint[i] for i in view.rows)
    return view.constraint_labels()


def _pair_orders(view: DatasetView, plan: PermutationPlan, pair: tuple) -> tuple:
    """(orders, pos_j, pos_h, exhaustive): orders rows relabel the pool.

    Row 0 of the sampled path is the identity; exhaustive orders carry the
    whole orbit with the identity first.
    """
    groups = _group_array(view.groups)
    labels = sorted(set(groups.tolist()))
    a, b = pair
    if a not in labels or b not in labels:
        raise DataError(f"pair {pair!r} not among groups {labels}")
    constraint = effective_constraint(plan, view)
    local_plan = PermutationPlan(plan.strategy, plan.B, plan.seed,
                                 constraint, plan.exhaustive_cap)
    if plan.strategy == "npip":
        pool = np.arange(len(groups))
        cells = _cells_of(pool, constraint)
        orders = np.vstack([
            pool,
            _sampled_orders(plan.seed, _NPIP_STREAM, pool, cells, plan.B, 0),
        ])
        exhaustive = False
    elif plan.strategy == "pip":
        pool = np.flatnonzero((groups == a) | (groups == b))
        cells = _cells_of(pool, constraint)
        stream = _pair_stream((labels.index(a), labels.index(b)))
        orders = np.vstack([
            pool,
            _sampled_orders(plan.seed, stream, pool, cells, plan.B, 0),
        ])
        exhaustive = False
    else:
        orders = enumerate_orders(local_plan, groups, pair=pair)
        pool = orders[0]
        exhaustive = True
    pos_j = np.flatnonzero(groups[pool] == a)
    pos_h = np.flatnonzero(groups[pool] == b)
    return orders, pos_j, pos_h, exhaustive


def cmc_run(view: DatasetView, plan: PermutationPlan, pair: tuple,
            specs=None) -> StatisticTableau:
    """Observed and relabeled statistics for one ordered pair (j, h).

    Every tableau column is one (variable, statistic) partial test; all
    columns of a pair share the same relabelings, preserving the dependence
    among variables.  Relabelings where a statistic is undefined (all
    non-missing values swept into one group) score as non-extreme.
    """
    col_plan = build_column_plan(view.meta, specs)
    if not col_plan:
        raise ConfigError("no partial tests configured")
    orders, pos_j, pos_h, exhaustive = _pair_orders(view, plan, pair)
    values = view.values
    # canonical within-group order: relabelings assigning the same unit set
    # produce bit-identical statistics regardless of draw order
    idx_j = np.sort(orders[:, pos_j], axis=1)
    idx_h = np.sort(orders[:, pos_h], axis=1)

    q = len(col_plan)
    rows = np.empty((orders.shape[0], q), dtype=float)
    for c, (k, spec, _) in enumerate(col_plan):
        col = values[:, k]
        meta = view.meta[k]
        with np.errstate(invalid="ignore", divide="ignore"), \
                warnings.catch_warnings():
            # relabelings can sweep all non-missing values into one group;
            # those rows become NaN and score as non-extreme
            warnings.simplefilter("ignore", RuntimeWarning)
            rows[:, c] = batch_statistic(spec, col[idx_j], col[idx_h],
                                         n_levels=meta.n_levels)

    observed = rows[0]
    permuted = rows if exhaustive else rows[1:]
    with np.errstate(invalid="ignore"):
        span = np.nanmax(rows, axis=0) - np.nanmin(rows, axis=0)
    degenerate = np.isnan(observed) | ~(span > 0.0)
    return StatisticTableau(
        observed=observed,
        permuted=permuted,
        exhaustive=exhaustive,
        columns=tuple(label for _, _, label in col_plan),
        degenerate=degenerate,
        pair=(pair[0], pair[1]),
    )


def cmc_run_csample(values: np.ndarray, groups: Sequence, plan: PermutationPlan,
                    constraint: Optional[Sequence] = None,
                    standardized: bool = False) -> StatisticTableau:
    """C-sample tableau: one anova-type column per response column.

    The statistic per column is sum_j n_j * mean_j^2 on relabeled groups
    (or its standardized between/within form).  Used by the global equality
    pre-test and by profile (time-to-time) comparisons, where the response
    columns are time points.
    """
    values = np.asarray(values, dtype=float)
    garr = _group_array(groups)
    labels = sorted(set(garr.tolist()))
    n = len(garr)
    pool = np.arange(n)
    if plan.strategy == "exhaustive":
        local_plan = PermutationPlan(plan.strategy, plan.B, plan.seed,
                                     constraint, plan.exhaustive_cap)
        orders = enumerate_orders(local_plan, garr, pair=None)
        exhaustive = True
    else:
        cells = _cells_of(pool, tuple(constraint) if constraint is not None else None)
        orders = np.vstack([
            pool,
            _sampled_orders(plan.seed, _NPIP_STREAM, pool, cells, plan.B, 0),
        ])
        exhaustive = False

    n_cols = values.shape[1]
    rows = np.zeros((orders.shape[0], n_cols), dtype=float)
    has_nan = bool(np.isnan(values).any())
    if standardized:
        between = np.zeros_like(rows)
        within = np.zeros_like(rows)
        with np.errstate(invalid="ignore"):
            grand = np.nanmean(values, axis=0)  # relabeling-invariant
    for lab in labels:
        pos = np.flatnonzero(garr == lab)
        idx = np.sort(orders[:, pos], axis=1)      # canonical member order
        taken = values[idx, :]                     # (rows, n_lab, n_cols)
        if has_nan:
            # group size per relabeling = its non-missing count
            count = (~np.isnan(taken)).sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = np.nansum(taken, axis=1) / count
            weight = count
        else:
            mean = taken.mean(axis=1)
            weight = len(pos)
        if standardized:
            between += weight * (mean - grand) ** 2
            with np.errstate(invalid="ignore"):
                within += np.nansum((taken - mean[:, None, :]) ** 2, axis=1)
        else:
            rows += weight * mean ** 2
    if standardized:
        with np.errstate(invalid="ignore", divide="ignore"):
            rows = np.where(within > 0.0, between / within, np.nan)

    observed = rows[0]
    permuted = rows if exhaustive else rows[1:]
    with np.errstate(invalid="ignore"):
        span = np.nanmax(rows, axis=0) - np.nanmin(rows, axis=0)
    degenerate = np.isnan(observed) | ~(span > 0.0)
    return StatisticTableau(
        observed=observed,
        permuted=permuted,
        exhaustive=exhaustive,
        columns=tuple(f"col{t}" for t in range(n_cols)),
        degenerate=degenerate,
        pair=None,
    )


# ---------------------------------------------------------------------------
# Significance-level estimation
# ---------------------------------------------------------------------------

def significance_level(tableau: StatisticTableau, column: int) -> float:
    """Directional significance level of one partial test.

    Sampled mode uses the half-corrected estimator
    ``(1/2 + #{T*_b >= T_obs}) / (B + 1)``, which stays inside (0, 1);
    exhaustive mode returns the exact orbit proportion ``#{T* >= T_obs}/S``.
    NaN for a column whose observed statistic is undefined.
    """
    col = tableau.permuted[:, column]
    obs = tableau.observed[column]
    if np.isnan(obs):
        return math.nan
    count = int(np.count_nonzero(col >= obs))
    if tableau.exhaustive:
        return count / col.shape[0]
    return (0.5 + count) / (col.shape[0] + 1.0)


def significance_levels(tableau: StatisticTableau) -> np.ndarray:
    """Vector of per-column significance levels."""
    return np.array([significance_level(tableau, k)
                     for k in range(tableau.n_columns)])
