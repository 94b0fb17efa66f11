"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from permrank import Dataset, VariableMeta


def make_numeric_dataset(rng, sizes, p=1, shift=None, labels=None) -> Dataset:
    """Random normal dataset with optional per-group location shifts."""
    sizes = list(sizes)
    labels = labels or [chr(ord("A") + j) for j in range(len(sizes))]
    shift = shift if shift is not None else [0.0] * len(sizes)
    values = rng.standard_normal((sum(sizes), p))
    groups = []
    row = 0
    for j, (lab, nj) in enumerate(zip(labels, sizes)):
        values[row:row + nj] += np.atleast_1d(shift[j])
        groups += [lab] * nj
        row += nj
    meta = tuple(VariableMeta(f"v{k + 1}") for k in range(p))
    return Dataset(values=values, groups=tuple(groups), meta=meta)


def make_ordinal_dataset(rng, sizes, n_levels=5, p=1, tilt=None,
                         labels=None) -> Dataset:
    """Random ordinal dataset; positive tilt favours high categories."""
    sizes = list(sizes)
    labels = labels or [chr(ord("A") + j) for j in range(len(sizes))]
    tilt = tilt if tilt is not None else [0.0] * len(sizes)
    cats = np.arange(1, n_levels + 1)
    cols = []
    for _ in range(p):
        col = []
        for j, nj in enumerate(sizes):
            w = np.exp(tilt[j] * (cats - cats.mean()) / n_levels)
            col += list(rng.choice(cats, size=nj, p=w / w.sum()))
        cols.append(col)
    values = np.array(cols, dtype=float).T
    groups = []
    for lab, nj in zip(labels, sizes):
        groups += [lab] * nj
    meta = tuple(
        VariableMeta(f"o{k + 1}", kind="ordinal",
                     levels=tuple(str(c) for c in cats))
        for k in range(p))
    return Dataset(values=values, groups=tuple(groups), meta=meta)


# ---------------------------------------------------------------------------
# Independent oracles
# ---------------------------------------------------------------------------

def brute_force_pair_pvalue(xj, xh, stat=None) -> float:
    """Exact directional p-value by enumerating every re-assignment."""
    stat = stat or (lambda a, b: np.mean(a) - np.mean(b))
    pool = np.concatenate([xj, xh])
    nj = len(xj)
    observed = stat(np.asarray(xj, dtype=float), np.asarray(xh, dtype=float))
    count = 0
    total = 0
    for comb in itertools.combinations(range(len(pool)), nj):
        mask = np.zeros(len(pool), dtype=bool)
        mask[list(comb)] = True
        t = stat(pool[mask], pool[~mask])
        count += t >= observed
        total += 1
    return count / total


def quadratic_rank_lambdas(perm, scored, exhaustive):
    """Rank calibration by direct O(B^2) counting."""
    perm = np.atleast_2d(perm)
    scored = np.atleast_2d(scored)
    out = np.empty_like(scored, dtype=float)
    for i in range(scored.shape[0]):
        for k in range(scored.shape[1]):
            count = sum(1 for b in range(perm.shape[0])
                        if perm[b, k] >= scored[i, k])
            if exhaustive:
                out[i, k] = count / perm.shape[0]
            else:
                out[i, k] = (0.5 + count) / (perm.shape[0] + 1.0)
    return out


def holm_by_definition(ps):
    """Step-down Holm via the explicit running maximum, no vectorisation."""
    ps = list(map(float, ps))
    m = len(ps)
    order = sorted(range(m), key=lambda i: ps[i])
    adj = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, (m - rank) * ps[i])
        adj[i] = min(1.0, running)
    return adj


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
