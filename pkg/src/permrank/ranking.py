"""From the global directional matrix to the final population ranking.

The algorithm formalises Tukey-style underlining for multivariate
dominance evidence: pre-order populations by their dominance scores, keep
the upper triangle of the reordered matrix, adjust for multiplicity,
binarise into S (1 = "not separable"), drop rows whose non-separability
support is contained in an earlier row's, average the surviving row
values down each column, and rank the averages competition-style.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .dataset import Dataset, DatasetView
from .errors import ConfigError, DataError
from .multiplicity import AdjustedUpperMatrix, adjust_upper
from .npc import (Combiner, DirectionalPMatrix, DirectionalResults,
                  as_combiner, csample_equality_test, directional_matrices,
                  dominance_scores)
from .perm_engine import PermutationPlan


def order_populations(scores) -> np.ndarray:
    """Indices sorted by ascending dominance score, ties by original index."""
    s = np.asarray(scores, dtype=float)
    if np.isnan(s).any():
        raise DataError("dominance scores contain NaN")
    return np.argsort(s, kind="stable")


def build_upper(pmatrix, ordering) -> np.ndarray:
    """Reorder rows/columns by ``ordering`` and keep the strict upper triangle."""
    values = pmatrix.values if isinstance(pmatrix, DirectionalPMatrix) else np.asarray(pmatrix, dtype=float)
    ordering = np.asarray(ordering, dtype=int)
    c = values.shape[0]
    if sorted(ordering.tolist()) != list(range(c)):
        raise ConfigError("ordering must be a permutation of 0..C-1")
    re = values[np.ix_(ordering, ordering)]
    out = np.full((c, c), math.nan)
    iu = np.triu_indices(c, k=1)
    out[iu] = re[iu]
    return out


def threshold_S(adjusted, alpha: Optional[float] = None) -> np.ndarray:
    """0/1 separability matrix: 1 where adjusted p > alpha, diagonal fixed at 1."""
    if isinstance(adjusted, AdjustedUpperMatrix):
        values = adjusted.adjusted
        alpha = adjusted.alpha if alpha is None else alpha
    else:
        values = np.asarray(adjusted, dtype=float)
        if alpha is None:
            raise ConfigError("alpha required with a bare matrix")
    c = values.shape[0]
    s = np.zeros((c, c), dtype=int)
    iu = np.triu_indices(c, k=1)
    s[iu] = (values[iu] > alpha).astype(int)
    np.fill_diagonal(s, 1)
    return s


def eliminate_subset_rows(S: np.ndarray) -> tuple:
    """Rows whose support is not contained in an earlier kept row's support.

    Row j's support is its 1-columns including the diagonal.  A later row
    contained in an earlier kept row repeats part of the same underlining
    segment and is dropped.  Earlier rows are never subsets of later ones
    because row j's support contains column j.
    """
    S = np.asarray(S)
    c = S.shape[0]
    kept = []
    supports = []
    for j in range(c):
        support = {j} | {h for h in range(j + 1, c) if S[j, h]}
        if any(support <= earlier for earlier in supports):
            continue
        kept.append(j)
        supports.append(support)
    return tuple(kept)


def rank_scores(S: np.ndarray, kept: Sequence[int]) -> np.ndarray:
    """Column means of the rank values assigned by the kept rows.

    Kept row j assigns value j+1 (its 1-based position in the pre-order) to
    every column of its support; each column averages over the assignments
    it actually received.
    """
    S = np.asarray(S)
    c = S.shape[0]
    total = np.zeros(c)
    count = np.zeros(c)
    for j in kept:
        cols = [j] + [h for h in range(j + 1, c) if S[j, h]]
        for h in cols:
            total[h] += j + 1
            count[h] += 1
    if (count == 0).any():
        raise DataError("a column received no rank assignment")
    return total / count


def competition_ranks(scores) -> np.ndarray:
    """Minimum-rank competition ranking: ties share the smallest rank."""
    s = np.asarray(scores, dtype=float)
    return 1 + (s[None, :] < s[:, None]).sum(axis=1)


@dataclass(frozen=True)
class GlobalRanking:
    """Full evidence chain from pairwise dominance to final ranks."""

    labels: tuple                      # original population labels
    order: tuple                       # labels in step-1 pre-order
    dominance: Mapping                 # label -> dominance score
    upper: AdjustedUpperMatrix         # ordered raw + adjusted upper matrix
    S: np.ndarray
    kept_rows: tuple
    scores: np.ndarray                 # rank scores along the pre-order
    ranks: Mapping                     # label -> competition rank
    global_test_p: Optional[float] = None
    all_tied_emphasis: bool = False
    matrices: Optional[DirectionalResults] = None
    notes: tuple = ()

    def rank_vector(self) -> np.ndarray:
        """Ranks aligned with the pre-order (ascending rank positions)."""
        return np.array([self.ranks[lab] for lab in self.order])

    def effective_ranks(self) -> Mapping:
        """Ranks with the equality pre-test respected.

        Pairwise pseudo-inference is meaningful only once the global
        equality hypothesis is rejected; when it is not, every true ranking
        is all-tied, so the effective output assigns rank 1 throughout.
        """
        if self.all_tied_emphasis:
            return {lab: 1 for lab in self.labels}
        return dict(self.ranks)


def rank_from_matrix(pmatrix: DirectionalPMatrix, alpha: float = 0.05,
                     method: str = "holm", dominance_combiner="fisher",
                     scores: Optional[Sequence[float]] = None) -> GlobalRanking:
    """Run the ranking algorithm on an existing global directional matrix.

    ``scores`` overrides the dominance scores (e.g. when replaying published
    matrices whose scores are reported alongside).
    """
    labels = pmatrix.labels
    dom = np.asarray(scores, dtype=float) if scores is not None \
        else dominance_scores(pmatrix, dominance_combiner)
    if dom.shape != (len(labels),):
        raise ConfigError("dominance scores must give one value per population")
    ordering = order_populations(dom)
    ordered_labels = tuple(labels[i] for i in ordering)
    upper_raw = build_upper(pmatrix, ordering)
    adjusted = adjust_upper(upper_raw, ordered_labels, method=method, alpha=alpha)
    S = threshold_S(adjusted)
    kept = eliminate_subset_rows(S)
    scores_vec = rank_scores(S, kept)
    ranks_vec = competition_ranks(scores_vec)
    ranks = {lab: int(r) for lab, r in zip(ordered_labels, ranks_vec)}
    return GlobalRanking(
        labels=labels,
        order=ordered_labels,
        dominance={lab: float(d) for lab, d in zip(labels, dom)},
        upper=adjusted,
        S=S,
        kept_rows=kept,
        scores=scores_vec,
        ranks=ranks,
    )


def global_ranking(data, plan: PermutationPlan, specs=None, combiner="fisher",
                   method: str = "holm", alpha: float = 0.05, hierarchy=None,
                   dominance_combiner=None, workers: int = 1,
                   with_global_test: bool = True) -> GlobalRanking:
    """End-to-end ranking of the populations in an oriented dataset.

    Composes the pairwise directional matrices, dominance scores, matrix
    reordering, multiplicity adjustment, thresholding, subset elimination,
    rank scores, and competition ranks.  The C-sample equality pre-test is
    reported alongside; when it is not significant at ``alpha`` the all-tied
    reading of the ranking is emphasised in the result.
    """
    view = data.full_view() if isinstance(data, Dataset) else data
    if not isinstance(view, DatasetView):
        raise ConfigError("data must be a Dataset or DatasetView")
    comb = as_combiner(combiner)
    dom_comb = dominance_combiner
    if dom_comb is None:
        dom_comb = comb if comb.kind in ("fisher", "tippett", "liptak") else Combiner("fisher")
    results = directional_matrices(view, plan, specs=specs, combiner=comb,
                                   hierarchy=hierarchy, workers=workers)
    ranking = rank_from_matrix(results.global_matrix, alpha=alpha,
                               method=method, dominance_combiner=dom_comb)
    global_p = None
    all_tied = False
    notes = list(results.notes)
    if with_global_test:
        global_p = csample_equality_test(view, plan, combiner=comb).global_p
        if global_p > alpha:
            all_tied = True
            notes.append(
                "global equality test not significant at "
                f"alpha={alpha:g} (p={global_p:.4g}): under equality every "
                "true ranking is all-tied; read the ranking descriptively")
    return GlobalRanking(
        labels=ranking.labels,
        order=ranking.order,
        dominance=ranking.dominance,
        upper=ranking.upper,
        S=ranking.S,
        kept_rows=ranking.kept_rows,
        scores=ranking.scores,
        ranks=ranking.ranks,
        global_test_p=global_p,
        all_tied_emphasis=all_tied,
        matrices=results,
        notes=tuple(notes),
    )
