"""Nonparametric combination of dependent partial permutation tests.

Partial tests live in a :class:`~permrank.perm_engine.StatisticTableau`.
Every row (observed and relabeled alike) is rank-calibrated against the
relabeled rows into permutation-wise significance levels, combined rowwise
by a combining function, and the combined observed value is ranked against
the combined relabeled values.  Because every step is computed on the same
relabelings, the unknown dependence among partial tests is carried through
untouched.

The module also builds the pairwise directional p-value-like matrices (per
variable, per domain, global), the row-combined dominance scores used to
pre-order populations, and the iterated combination strategy.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from ._rng import stream_id, uniform_rows
from .dataset import DatasetView
from .errors import ConfigError, DataError, DegenerateAnalysisError
from .perm_engine import (PermutationPlan, StatisticTableau, build_column_plan,
                          cmc_run, cmc_run_csample, effective_constraint,
                          exhaustive_size, significance_level)

COMBINER_KINDS = ("fisher", "tippett", "liptak", "direct", "iterated")
PVALUE_COMBINERS = ("fisher", "tippett", "liptak")
DEFAULT_MEMBERS = ("fisher", "liptak", "tippett")

# clamp width for unbounded transforms, matching the sampled estimator's
# resolution at the default replication count
DEFAULT_EPS = 1.0 / (2.0 * (2000 + 1))


@dataclass(frozen=True)
class Combiner:
    """A combining function choice, including the iterated strategy."""

    kind: str = "fisher"
    members: tuple = DEFAULT_MEMBERS
    tolerance: float = 1e-3
    max_iter: int = 20

    def __post_init__(self):
        if self.kind not in COMBINER_KINDS:
            raise ConfigError(f"unknown combiner {self.kind!r}")
        object.__setattr__(self, "members", tuple(self.members))
        for m in self.members:
            if m not in PVALUE_COMBINERS:
                raise ConfigError(f"iterated member must be one of "
                                  f"{PVALUE_COMBINERS}, got {m!r}")
        if self.kind == "iterated" and len(self.members) < 3:
            raise ConfigError("iterated combination needs >= 3 members")
        if self.tolerance <= 0 or self.max_iter < 1:
            raise ConfigError("tolerance > 0 and max_iter >= 1 required")


def as_combiner(c) -> Combiner:
    if isinstance(c, Combiner):
        return c
    return Combiner(kind=str(c))


# ---------------------------------------------------------------------------
# Combining functions
# ---------------------------------------------------------------------------

def _combine_rows(kind: str, lam: np.ndarray, eps: float) -> np.ndarray:
    """Apply a p-value combining function to each row of ``lam``.

    Sum-based combiners add their terms in sorted order so that the column
    ordering cannot perturb floating-point rounding.
    """
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    if kind == "fisher":
        terms = np.log(np.maximum(lam, eps))
        return -2.0 * np.sort(terms, axis=1).sum(axis=1)
    if kind == "tippett":
        return (1.0 - lam).max(axis=1)
    if kind == "liptak":
        terms = ndtri(1.0 - np.clip(lam, eps, 1.0 - eps))
        return np.sort(terms, axis=1).sum(axis=1)
    raise ConfigError(f"not a p-value combiner: {kind!r}")


def apply_combiner(c, lambdas, eps: Optional[float] = None) -> float:
    """Combine a vector of significance levels into one statistic.

    Accepts ``fisher``, ``tippett`` or ``liptak`` (``direct`` works on raw
    statistics and ``iterated`` is a strategy, not a function).  Values
    where the transform would be unbounded are clamped to ``eps`` away from
    the boundary, with a warning.
    """
    comb = as_combiner(c)
    if comb.kind not in PVALUE_COMBINERS:
        raise ConfigError(f"apply_combiner works on {PVALUE_COMBINERS}")
    lam = np.asarray(lambdas, dtype=float).ravel()
    if lam.size == 0:
        raise ConfigError("empty significance-level vector")
    if eps is None:
        eps = DEFAULT_EPS
    clamp_low = comb.kind in ("fisher", "liptak")
    clamp_high = comb.kind == "liptak"
    if (clamp_low and (lam < eps).any()) or (clamp_high and (lam > 1 - eps).any()):
        warnings.warn("significance levels clamped away from {0, 1} before "
                      "combining", RuntimeWarning, stacklevel=2)
    if (lam < 0).any() or (lam > 1).any():
        warnings.warn("significance levels outside [0, 1] clamped",
                      RuntimeWarning, stacklevel=2)
        lam = np.clip(lam, 0.0, 1.0)
    return float(_combine_rows(comb.kind, lam, eps)[0])


# ---------------------------------------------------------------------------
# Rank calibration
# ---------------------------------------------------------------------------

def rank_lambdas(perm: np.ndarray, scored: np.ndarray,
                 exhaustive: bool) -> np.ndarray:
    """Permutation-wise significance levels of ``scored`` rows.

    Column by column, each scored value t gets the count of relabeled values
    >= t; ties share counts ("">="" counting).  Sampled mode applies the
    half-corrected estimator over B rows, exhaustive mode the exact orbit
    proportion.  NaN relabeled values never count as extreme.
    """
    perm = np.atleast_2d(perm)
    scored = np.atleast_2d(scored)
    n_rows = perm.shape[0]
    out = np.empty_like(scored, dtype=float)
    for k in range(perm.shape[1]):
        col = perm[:, k]
        finite = col[~np.isnan(col)]
        finite.sort()
        counts = finite.size - np.searchsorted(finite, scored[:, k], side="left")
        if exhaustive:
            out[:, k] = counts / n_rows
        else:
            out[:, k] = (0.5 + counts) / (n_rows + 1.0)
        out[np.isnan(scored[:, k]), k] = math.nan
    return out


@dataclass(frozen=True)
class NpcResult:
    """Outcome of one nonparametric combination."""

    global_p: float
    partial: np.ndarray
    columns: tuple
    excluded: tuple
    combiner: str
    exhaustive: bool
    iterations: Optional[int] = None
    converged: Optional[bool] = None
    spread: Optional[float] = None


def _rank_of_observed(obs: float, perm: np.ndarray, exhaustive: bool) -> float:
    count = int(np.count_nonzero(perm >= obs))
    if exhaustive:
        return count / perm.shape[0]
    return (0.5 + count) / (perm.shape[0] + 1.0)


def npc_pvalue(tableau: StatisticTableau, columns: Optional[Sequence[int]] = None,
               combiner="fisher") -> NpcResult:
    """Combine a subset of tableau columns into one global p-value.

    Degenerate columns are excluded from the combination (their partial
    significance levels are still reported).  With a single informative
    column the global p equals that column's partial significance level.
    """
    comb = as_combiner(combiner)
    q = tableau.n_columns
    requested = list(range(q)) if columns is None else [int(c) for c in columns]
    for c in requested:
        if not 0 <= c < q:
            raise ConfigError(f"column {c} out of range")
    active = [c for c in requested if not tableau.degenerate[c]]
    excluded = tuple(c for c in requested if tableau.degenerate[c])
    if not active:
        raise DegenerateAnalysisError(
            "all selected partial tests are degenerate: " +
            ", ".join(tableau.columns[c] for c in excluded))

    partial = np.array([significance_level(tableau, c) for c in requested])
    perm = tableau.permuted[:, active]
    obs = tableau.observed[active][None, :]
    eps = 1.0 / (2.0 * (tableau.n_rows + 1.0))

    if comb.kind == "direct":
        mu = perm.mean(axis=0, keepdims=True)
        sd = perm.std(axis=0, keepdims=True)
        z_perm = np.sort((perm - mu) / sd, axis=1).sum(axis=1)
        z_obs = float(np.sort((obs - mu) / sd, axis=1).sum(axis=1)[0])
        return NpcResult(
            global_p=_rank_of_observed(z_obs, z_perm, tableau.exhaustive),
            partial=partial, columns=tuple(tableau.columns[c] for c in requested),
            excluded=excluded, combiner="direct", exhaustive=tableau.exhaustive)

    lam = rank_lambdas(perm, np.vstack([obs, perm]), tableau.exhaustive)
    lam_obs, lam_perm = lam[0], lam[1:]

    if comb.kind == "iterated":
        values, converged, iters, spread = _iterated_loop(
            lam_obs, lam_perm, comb, tableau.exhaustive)
        return NpcResult(
            global_p=float(values.mean()),
            partial=partial, columns=tuple(tableau.columns[c] for c in requested),
            excluded=excluded, combiner="iterated", exhaustive=tableau.exhaustive,
            iterations=iters, converged=converged, spread=spread)

    stats = _combine_rows(comb.kind, lam, eps)
    return NpcResult(
        global_p=_rank_of_observed(stats[0], stats[1:], tableau.exhaustive),
        partial=partial, columns=tuple(tableau.columns[c] for c in requested),
        excluded=excluded, combiner=comb.kind, exhaustive=tableau.exhaustive)


# ---------------------------------------------------------------------------
# Iterated combination
# ---------------------------------------------------------------------------

def _iterated_loop(obs: np.ndarray, ref: np.ndarray, comb: Combiner,
                   exhaustive: bool) -> tuple:
    """Iterate the member combiners until they agree.

    Each pass maps the current vector (observed and every reference row
    alike) through all member combiners, then rank-calibrates each member
    column against the reference rows.  Because reference rows are carried
    through the same transform, the dependence between members is respected;
    once the member columns order the rows identically, the spread drops to
    zero and the iteration has converged.
    """
    obs = np.asarray(obs, dtype=float)
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    eps = 1.0 / (2.0 * (ref.shape[0] + 1.0))
    spread = math.inf
    for it in range(1, comb.max_iter + 1):
        both = np.vstack([obs[None, :], ref])
        stats = np.column_stack(
            [_combine_rows(kind, both, eps) for kind in comb.members])
        lam = rank_lambdas(stats[1:], stats, exhaustive)
        obs, ref = lam[0], lam[1:]
        spread = float(obs.max() - obs.min())
        if spread < comb.tolerance:
            return obs, True, it, spread
    return obs, False, comb.max_iter, spread


@dataclass(frozen=True)
class IteratedResult:
    """Common limit of the member combiners, or the flagged final iterate."""

    pvalue: float
    member_values: tuple
    converged: bool
    iterations: int
    spread: float


def iterated_combination(partial_ps, members=DEFAULT_MEMBERS,
                         tolerance: float = 1e-3, max_iter: int = 20,
                         reference_size: int = 2000,
                         seed: int = 0) -> IteratedResult:
    """Iterated combination of a vector of partial p-values.

    The member combiners are rank-calibrated against a shared synthetic
    reference of independent uniform vectors, carried through every
    iteration.  Non-convergence within ``max_iter`` is flagged, never
    raised; the mean of the final iterate is returned either way.
    """
    ps = np.asarray(partial_ps, dtype=float).ravel()
    if ps.size == 0:
        raise ConfigError("empty partial p-value vector")
    if (ps <= 0).any() or (ps >= 1).any():
        raise ConfigError("partial p-values must lie strictly inside (0, 1)")
    comb = Combiner(kind="iterated", members=tuple(members),
                    tolerance=tolerance, max_iter=max_iter)
    ref = uniform_rows(seed, stream_id("iterated-reference", ps.size),
                       reference_size, ps.size)
    values, converged, iters, spread = _iterated_loop(ps, ref, comb,
                                                      exhaustive=False)
    return IteratedResult(
        pvalue=float(values.mean()),
        member_values=tuple(float(v) for v in values),
        converged=converged, iterations=iters, spread=spread)


# ---------------------------------------------------------------------------
# Directional matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionalPMatrix:
    """C x C matrix of directional p-value-like statistics.

    Entry (j, h) supports "population j dominates population h".  Marginal
    matrices satisfy the complement identity v[j, h] + v[h, j] = 1 exactly;
    global and domain matrices carry no such constraint.
    """

    labels: tuple
    values: np.ndarray
    level: str  # "marginal" | "domain" | "global"
    tag: Optional[str] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        c = len(self.labels)
        if values.shape != (c, c):
            raise DataError("matrix shape does not match labels")
        off = ~np.eye(c, dtype=bool)
        vals = values[off]
        vals = vals[~np.isnan(vals)]
        # sampled estimates live strictly inside (0, 1); exact orbit
        # proportions can reach 1, and the enforced marginal complement
        # 1 - p can then reach 0
        low = 0.0 if self.level == "marginal" else None
        bad = (vals > 1) | ((vals < low) if low is not None else (vals <= 0))
        if bad.any():
            raise DataError("directional p-values outside the unit interval")

    def entry(self, j, h) -> float:
        return float(self.values[self.labels.index(j), self.labels.index(h)])


@dataclass(frozen=True)
class PairDirectional:
    """All directional results for one unordered pair of populations."""

    pair: tuple
    marginal_forward: Mapping  # variable name -> p+ (j over h)
    domain_forward: Mapping
    domain_backward: Mapping
    global_forward: float
    global_backward: float
    notes: tuple = ()


def _variable_columns(meta, specs) -> dict:
    plan = build_column_plan(meta, specs)
    groups = {}
    for col, (k, _, _) in enumerate(plan):
        groups.setdefault(k, []).append(col)
    return groups


def _domain_of(meta, hierarchy) -> Optional[dict]:
    """Variable position -> domain label, or None for a flat combination."""
    if hierarchy is None:
        tags = {k: m.domain for k, m in enumerate(meta)}
        if all(v is None for v in tags.values()):
            return None
        return {k: (v if v is not None else "__none__") for k, v in tags.items()}
    by_name = {m.name: k for k, m in enumerate(meta)}
    out = {}
    for name, dom in hierarchy.items():
        if name not in by_name:
            raise ConfigError(f"hierarchy names unknown variable {name!r}")
        out[by_name[name]] = dom
    for k, m in enumerate(meta):
        out.setdefault(k, "__none__")
    return out


def _directional_from_tableau(tableau: StatisticTableau, meta, specs,
                              comb: Combiner, domain_map) -> tuple:
    """(per-variable marginal p, per-domain p, global p) for one direction."""
    var_cols = _variable_columns(meta, specs)
    eps = 1.0 / (2.0 * (tableau.n_rows + 1.0))

    marginal = {}
    for k, cols in var_cols.items():
        name = meta[k].name
        live = [c for c in cols if not tableau.degenerate[c]]
        if not live:
            marginal[name] = math.nan
        elif len(live) == 1:
            marginal[name] = significance_level(tableau, live[0])
        else:
            marginal[name] = npc_pvalue(tableau, live, comb).global_p

    active = [c for c in range(tableau.n_columns) if not tableau.degenerate[c]]
    if not active:
        raise DegenerateAnalysisError(
            "every partial test is degenerate for pair "
            f"{tableau.pair}: nothing to combine")

    if domain_map is None:
        return marginal, {}, npc_pvalue(tableau, active, comb).global_p

    # two-stage combination over one shared set of relabelings: variables
    # combine into domain statistics rowwise, domains combine into the
    # global statistic on the same rows
    col_domain = {}
    for k, cols in var_cols.items():
        for c in cols:
            col_domain[c] = domain_map[k]
    perm = tableau.permuted
    obs = tableau.observed[None, :]
    lam = rank_lambdas(perm, np.vstack([obs, perm]), tableau.exhaustive)

    domain_p = {}
    stage2 = []
    kind = comb.kind if comb.kind in PVALUE_COMBINERS else "fisher"
    for dom in sorted({col_domain[c] for c in active}, key=str):
        cols = [c for c in active if col_domain[c] == dom]
        stats = _combine_rows(kind, lam[:, cols], eps)
        domain_p[dom] = _rank_of_observed(stats[0], stats[1:],
                                          tableau.exhaustive)
        stage2.append(stats)
    stage2 = np.column_stack(stage2)
    lam2 = rank_lambdas(stage2[1:], stage2, tableau.exhaustive)
    stats2 = _combine_rows(kind, lam2, eps)
    global_p = _rank_of_observed(stats2[0], stats2[1:], tableau.exhaustive)
    return marginal, domain_p, global_p


def pairwise_directional(view: DatasetView, plan: PermutationPlan, pair: tuple,
                         specs=None, combiner="fisher",
                         hierarchy=None) -> PairDirectional:
    """Directional p-value-like statistics for one pair, both directions.

    One set of relabelings serves the forward direction; the backward
    direction scores the same relabelings with negated statistics.  The
    marginal backward values are 1 - forward by construction.  When a
    domain hierarchy is active, the two-stage combination runs with the
    chosen p-value combiner (direct/iterated fall back to fisher there).
    """
    comb = as_combiner(combiner)
    domain_map = _domain_of(view.meta, hierarchy)
    tableau = cmc_run(view, plan, pair, specs)
    notes = tuple(f"non-informative partial test excluded: {tableau.columns[c]}"
                  for c in range(tableau.n_columns) if tableau.degenerate[c])
    marg_f, dom_f, glob_f = _directional_from_tableau(
        tableau, view.meta, specs, comb, domain_map)
    _, dom_b, glob_b = _directional_from_tableau(
        tableau.negated(), view.meta, specs, comb, domain_map)
    return PairDirectional(
        pair=(pair[0], pair[1]),
        marginal_forward=marg_f,
        domain_forward=dom_f,
        domain_backward=dom_b,
        global_forward=glob_f,
        global_backward=glob_b,
        notes=notes,
    )


@dataclass(frozen=True)
class DirectionalResults:
    """Matrices assembled from every pairwise comparison."""

    labels: tuple
    marginal: Mapping  # variable name -> DirectionalPMatrix
    domain: Mapping    # domain label -> DirectionalPMatrix
    global_matrix: DirectionalPMatrix
    notes: tuple


def _pair_task(args):
    view, plan, pair, specs, combiner, hierarchy = args
    return pairwise_directional(view, plan, pair, specs, combiner, hierarchy)


def directional_matrices(view: DatasetView, plan: PermutationPlan, specs=None,
                         combiner="fisher", hierarchy=None,
                         workers: int = 1) -> DirectionalResults:
    """Marginal, domain, and global directional matrices over all pairs.

    Pairs are independent work items; with ``workers > 1`` they are computed
    in separate processes and reassembled by pair key, so the result never
    depends on scheduling.
    """
    labels = view.group_labels
    if len(labels) < 2:
        raise DataError("need at least two populations")
    pairs = [(labels[i], labels[j])
             for i in range(len(labels)) for j in range(i + 1, len(labels))]
    tasks = [(view, plan, pair, specs, combiner, hierarchy) for pair in pairs]
    if workers > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_pair_task, tasks))
    else:
        results = [_pair_task(t) for t in tasks]

    c = len(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    glob = np.full((c, c), math.nan)
    var_names = [m.name for m in view.meta]
    marg = {name: np.full((c, c), math.nan) for name in var_names}
    domain_names = sorted({d for r in results for d in r.domain_forward},
                          key=str)
    doms = {d: np.full((c, c), math.nan) for d in domain_names}
    notes = []
    for res in results:
        a, b = res.pair
        ia, ib = index[a], index[b]
        glob[ia, ib] = res.global_forward
        glob[ib, ia] = res.global_backward
        for name, p in res.marginal_forward.items():
            marg[name][ia, ib] = p
            marg[name][ib, ia] = 1.0 - p
        for d in domain_names:
            doms[d][ia, ib] = res.domain_forward.get(d, math.nan)
            doms[d][ib, ia] = res.domain_backward.get(d, math.nan)
        notes.extend(f"pair {a} vs {b}: {note}" for note in res.notes)

    return DirectionalResults(
        labels=labels,
        marginal={name: DirectionalPMatrix(labels, m, "marginal", tag=name)
                  for name, m in marg.items()},
        domain={d: DirectionalPMatrix(labels, m, "domain", tag=str(d))
                for d, m in doms.items()},
        global_matrix=DirectionalPMatrix(labels, glob, "global"),
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# Dominance scores and the global equality pre-test
# ---------------------------------------------------------------------------

def dominance_scores(pmatrix: DirectionalPMatrix, combiner="fisher") -> np.ndarray:
    """Row-combined evidence of each population dominating all others.

    Row j's C-1 directional p-values are combined; the combined statistics
    are mapped back to (0, 1) by their rank across rows, so a smaller score
    means stronger evidence of global dominance.  Only the ordering of the
    scores is consumed downstream.  With C = 2 the scores are the two
    pairwise p-values themselves.
    """
    comb = as_combiner(combiner)
    if comb.kind not in PVALUE_COMBINERS:
        raise ConfigError("dominance scores need a p-value combiner")
    values = pmatrix.values
    c = values.shape[0]
    off = ~np.eye(c, dtype=bool)
    if np.isnan(values[off]).any():
        raise DataError("global matrix has missing entries")
    if c == 2:
        return np.array([values[0, 1], values[1, 0]])
    rows = np.array([values[j][off[j]] for j in range(c)])
    phi = _combine_rows(comb.kind, rows, DEFAULT_EPS)
    counts = (phi[None, :] >= phi[:, None]).sum(axis=1)
    return (counts - 0.5) / c


def csample_equality_test(view: DatasetView, plan: PermutationPlan,
                          combiner="fisher", standardized: bool = False):
    """Global test of distributional equality of all C populations.

    C-sample relabelings score an anova-type statistic per variable
    (ordinal variables enter through their level indices); the partial
    tests are NPC-combined.  If an exhaustive plan's C-sample orbit
    exceeds the cap, sampling with the plan's B is used instead.
    """
    constraint = effective_constraint(plan, view)
    plan_used = plan
    if plan.strategy == "exhaustive":
        local = PermutationPlan("exhaustive", plan.B, plan.seed, constraint,
                                plan.exhaustive_cap)
        if exhaustive_size(local, view.groups, pair=None) > plan.exhaustive_cap:
            plan_used = PermutationPlan("npip", plan.B, plan.seed,
                                        plan.constraint, plan.exhaustive_cap)
    tableau = cmc_run_csample(view.values, view.groups, plan_used,
                              constraint=constraint,
                              standardized=standardized)
    return npc_pvalue(tableau, combiner=combiner)
