"""C-sample comparison and ranking of response profiles.

Profiles (repeated measures, discretised curves) are rows of a units x
time-points table.  Units permute as whole vectors, so the within-unit
time dependence survives relabeling untouched; each time point contributes
an anova-type partial test and the partial tests are NPC-combined.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, VariableMeta
from .errors import ConfigError, DataError
from .npc import NpcResult, npc_pvalue
from .perm_engine import PermutationPlan, cmc_run_csample


@dataclass(frozen=True)
class ProfileDataset:
    """n unit trajectories observed at the same N ordered occasions."""

    trajectories: np.ndarray
    groups: tuple
    times: Optional[tuple] = None

    def __post_init__(self):
        traj = np.asarray(self.trajectories, dtype=float)
        if traj.ndim != 2 or traj.shape[1] < 1:
            raise DataError("trajectories must be a units x times table, N >= 1")
        if np.isnan(traj).any():
            raise DataError("ragged or missing profiles are not supported")
        traj.setflags(write=False)
        object.__setattr__(self, "trajectories", traj)
        object.__setattr__(self, "groups", tuple(str(g) for g in self.groups))
        if len(self.groups) != traj.shape[0]:
            raise DataError("group label vector length mismatch")
        if len(set(self.groups)) < 2:
            raise DataError("C >= 2 required")
        times = self.times
        if times is None:
            times = tuple(f"t{t + 1}" for t in range(traj.shape[1]))
        if len(times) != traj.shape[1]:
            raise DataError("time label vector length mismatch")
        object.__setattr__(self, "times", tuple(str(t) for t in times))

    @property
    def n(self) -> int:
        return self.trajectories.shape[0]

    @property
    def n_times(self) -> int:
        return self.trajectories.shape[1]

    @property
    def group_labels(self) -> tuple:
        return tuple(sorted(set(self.groups)))


def time_partial_stat(values_at_t, groups, order=None,
                      standardized: bool = False) -> float:
    """Anova-type statistic at one occasion, optionally on relabeled units.

    Raw form: sum_j n_j * mean_j^2.  Standardised form: between-group sum
    of squares over within-group sum of squares, which is invariant to a
    common constant added to every unit at that occasion.

    ``order`` is a unit-index permutation; position t of the observed
    grouping receives the unit ``order[t]``.
    """
    x = np.asarray(values_at_t, dtype=float).ravel()
    garr = np.asarray(list(groups), dtype=object)
    if x.size != garr.size:
        raise DataError("values and groups must align")
    if order is not None:
        x = x[np.asarray(order, dtype=int)]
    labels = sorted(set(garr.tolist()))
    if standardized:
        grand = x.mean()
        between = 0.0
        within = 0.0
        for lab in labels:
            vals = x[garr == lab]
            between += vals.size * (vals.mean() - grand) ** 2
            within += ((vals - vals.mean()) ** 2).sum()
        if within <= 0.0:
            raise DataError("zero within-group variance: partial test degenerate")
        return float(between / within)
    return float(sum(x[garr == lab].size * x[garr == lab].mean() ** 2
                     for lab in labels))


def profile_global_test(ds: ProfileDataset, plan: PermutationPlan,
                        combiner="fisher", standardized: bool = False) -> NpcResult:
    """NPC of the N time-wise partial tests over whole-profile relabelings.

    Rejection signals a distributional difference at some occasion.
    Occasions degenerate in standardised form (zero within-group variance)
    are flagged and excluded from the combination.
    """
    tableau = cmc_run_csample(ds.trajectories, ds.groups, plan,
                              standardized=standardized)
    return npc_pvalue(tableau, combiner=combiner)


def as_dataset(ds: ProfileDataset) -> Dataset:
    """Recast the N occasions as N oriented numeric variables."""
    meta = tuple(VariableMeta(name=t, kind="numeric", direction="higher_better")
                 for t in ds.times)
    return Dataset(values=np.array(ds.trajectories), groups=ds.groups, meta=meta)


def rank_curve_populations(ds: ProfileDataset, plan: PermutationPlan,
                           combiner="fisher", alpha: float = 0.05,
                           method: str = "holm", workers: int = 1):
    """Global ranking of curve populations via the standard pipeline.

    Each occasion becomes a mean-difference partial test; units permute as
    whole profiles, so pairwise comparisons respect the time dependence.
    The directional criterion must already read higher-is-better.
    """
    from .ranking import global_ranking  # deferred: ranking builds on this module's siblings

    return global_ranking(as_dataset(ds), plan, combiner=combiner,
                          alpha=alpha, method=method, workers=workers)
