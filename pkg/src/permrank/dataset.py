"""Data model and ingestion for the one-way multivariate layout.

A :class:`Dataset` holds an ``n x p`` response table with a group label per
unit, optional stratum and block labels, and per-variable metadata.  Ordinal
cells are stored as 1-based level indices, missing cells as NaN.  After
:func:`orient`, every variable reads "the larger the better", which is the
convention all downstream statistics assume.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import yaml

from .errors import ConfigError, DataError

KINDS = ("numeric", "binary", "ordinal")
DIRECTIONS = ("higher_better", "lower_better")


@dataclass(frozen=True)
class VariableMeta:
    """Metadata for one response variable.

    Args:
        name: column identifier.
        kind: one of ``numeric``, ``binary``, ``ordinal``.
        direction: preference direction before orientation.
        domain: optional domain tag for hierarchical combination.
        levels: ordered category labels, ordinal variables only (K >= 2).
    """

    name: str
    kind: str = "numeric"
    direction: str = "higher_better"
    domain: Optional[str] = None
    levels: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(
                f"variable {self.name!r}: unknown direction {self.direction!r}")
        if self.kind == "ordinal":
            if self.levels is None or len(self.levels) < 2:
                raise ConfigError(
                    f"variable {self.name!r}: ordinal needs >= 2 levels")
            object.__setattr__(self, "levels", tuple(self.levels))
            if len(set(self.levels)) != len(self.levels):
                raise ConfigError(
                    f"variable {self.name!r}: duplicate ordinal levels")
        elif self.levels is not None:
            raise ConfigError(
                f"variable {self.name!r}: levels only apply to ordinal variables")

    @property
    def n_levels(self) -> int:
        return len(self.levels) if self.levels else 0


@dataclass(frozen=True)
class Dataset:
    """Immutable units x variables response table.

    ``values[i, k]`` is a float: the numeric response, the 1-based ordinal
    level index, or NaN for a missing cell.  A dataset is safe to share
    read-only across workers.
    """

    values: np.ndarray
    groups: tuple
    meta: tuple
    stratum: Optional[tuple] = None
    block: Optional[tuple] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "groups", tuple(str(g) for g in self.groups))
        object.__setattr__(self, "meta", tuple(self.meta))
        for name in ("stratum", "block"):
            lab = getattr(self, name)
            if lab is not None:
                object.__setattr__(self, name, tuple(str(x) for x in lab))
        self._validate()

    def _validate(self):
        n, p = self.values.shape if self.values.ndim == 2 else (len(self.values), 0)
        if n == 0:
            raise DataError("no units")
        if p == 0 or not self.meta:
            raise DataError("no response variables")
        if len(self.meta) != p:
            raise DataError(f"{p} columns but {len(self.meta)} variable metadata entries")
        if len(self.groups) != n:
            raise DataError("group label vector length mismatch")
        counts = Counter(self.groups)
        if len(counts) < 2:
            raise DataError("C >= 2 required: found a single group label")
        small = [g for g, c in counts.items() if c < 2]
        if small:
            raise DataError(f"groups need n_j >= 2 units, violated by {small}")
        for name in ("stratum", "block"):
            lab = getattr(self, name)
            if lab is not None and len(lab) != n:
                raise DataError(f"{name} label vector length mismatch")
        for k, m in enumerate(self.meta):
            col = self.values[:, k]
            finite = col[~np.isnan(col)]
            if m.kind == "ordinal":
                bad = (finite != np.round(finite)) | (finite < 1) | (finite > m.n_levels)
                if bad.any():
                    raise DataError(
                        f"variable {m.name!r}: ordinal index outside 1..{m.n_levels}")
            elif m.kind == "binary":
                # {0,1} at ingestion; orientation may negate to {-1,0}
                if not np.isin(finite, (-1.0, 0.0, 1.0)).all():
                    raise DataError(f"variable {m.name!r}: binary values must be 0/1")
        if self.block is not None:
            group_set = set(self.groups)
            seen = {}
            for g, b in zip(self.groups, self.block):
                seen.setdefault(b, set()).add(g)
            broken = [b for b, gs in seen.items() if gs != group_set]
            if broken:
                raise DataError(
                    f"blocks must intersect every group; violated by {sorted(broken)}")

    # -- basic accessors ------------------------------------------------

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def group_labels(self) -> tuple:
        return tuple(sorted(set(self.groups)))

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    def group_sizes(self) -> dict:
        return dict(Counter(self.groups))

    def group_indices(self, label: str) -> np.ndarray:
        return np.flatnonzero(np.array(self.groups, dtype=object) == label)

    def constraint_labels(self) -> Optional[tuple]:
        """Per-unit exchangeability cell: stratum x block, or None."""
        if self.stratum is None and self.block is None:
            return None
        s = self.stratum or ("",) * self.n
        b = self.block or ("",) * self.n
        return tuple(f"{x}\x1f{y}" for x, y in zip(s, b))

    def full_view(self) -> "DatasetView":
        return DatasetView(self, np.arange(self.n), np.arange(self.p))


@dataclass(frozen=True)
class DatasetView:
    """A (stratum, domain) window onto a dataset.

    Holds row/column index vectors and a reference to the parent; the
    underlying table is never copied at construction.
    """

    dataset: Dataset
    rows: np.ndarray
    cols: np.ndarray
    stratum_label: Optional[str] = None
    domain_label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=int))
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=int))

    @property
    def values(self) -> np.ndarray:
        return self.dataset.values[np.ix_(self.rows, self.cols)]

    @property
    def groups(self) -> tuple:
        g = self.dataset.groups
        return tuple(g[i] for i in self.rows)

    @property
    def meta(self) -> tuple:
        return tuple(self.dataset.meta[k] for k in self.cols)

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def p(self) -> int:
        return len(self.cols)

    @property
    def group_labels(self) -> tuple:
        return tuple(sorted(set(self.groups)))

    def constraint_labels(self) -> Optional[tuple]:
        full = self.dataset.constraint_labels()
        if full is None:
            return None
        return tuple(full[i] for i in self.rows)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def _read_config(config) -> Mapping:
    if isinstance(config, Mapping):
        return config
    path = Path(config)
    try:
        with path.open("r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config {path} must be a mapping")
    return doc


def _variable_meta(entry, index: int) -> tuple:
    """Parse one config variable entry -> (VariableMeta, target or None)."""
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, Mapping) or "name" not in entry:
        raise ConfigError(f"variables[{index}]: need a name")
    known = {"name", "kind", "direction", "domain", "levels", "target", "statistics"}
    unknown = set(entry) - known
    if unknown:
        raise ConfigError(f"variables[{index}]: unknown keys {sorted(unknown)}")
    kind = entry.get("kind", "numeric")
    direction = entry.get("direction", "higher_better")
    target = entry.get("target")
    if target is not None:
        if kind != "numeric":
            raise ConfigError(
                f"variables[{index}]: target transform applies to numeric only")
        # closer-to-target criteria become higher_better through -|y - target|
        direction = "higher_better"
    levels = entry.get("levels")
    meta = VariableMeta(
        name=str(entry["name"]),
        kind=kind,
        direction=direction,
        domain=entry.get("domain"),
        levels=tuple(levels) if levels is not None else None,
    )
    return meta, target


def load_dataset(table, config) -> Dataset:
    """Load a delimiter-separated table into a validated :class:`Dataset`.

    Args:
        table: path or text stream with a header row.
        config: mapping or path to a YAML/JSON document naming the group
            column, optional ``stratum``/``block``/``frequency`` columns,
            the ``delimiter`` and ``missing_token``, and the per-variable
            metadata under ``variables``.

    Raises:
        ConfigError: malformed configuration.
        DataError: malformed table (unknown ordinal level, undersized
            group, missing column, ...), reported with row/column location.
    """
    cfg = _read_config(config)
    if "group" not in cfg:
        raise ConfigError("config must name the group column")
    var_entries = cfg.get("variables")
    if not var_entries:
        raise ConfigError("config must declare a non-empty variables list")
    metas, targets = [], []
    for i, entry in enumerate(var_entries):
        meta, target = _variable_meta(entry, i)
        metas.append(meta)
        targets.append(target)

    delimiter = cfg.get("delimiter", ",")
    missing = {""}
    token = cfg.get("missing_token")
    if token is not None:
        missing.add(str(token))

    if isinstance(table, (str, Path)):
        with open(table, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    else:
        rows = list(csv.reader(table, delimiter=delimiter))
    if not rows:
        raise DataError("no units")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if not body:
        raise DataError("no units")

    col_of = {name: i for i, name in enumerate(header)}

    def column_index(name, role):
        if name not in col_of:
            raise DataError(f"{role} column {name!r} not in header {header}")
        return col_of[name]

    group_col = column_index(str(cfg["group"]), "group")
    stratum_col = column_index(str(cfg["stratum"]), "stratum") if cfg.get("stratum") else None
    block_col = column_index(str(cfg["block"]), "block") if cfg.get("block") else None
    freq_col = column_index(str(cfg["frequency"]), "frequency") if cfg.get("frequency") else None
    var_cols = [column_index(m.name, "variable") for m in metas]

    level_index = [
        {str(lv): i + 1 for i, lv in enumerate(m.levels)} if m.kind == "ordinal" else None
        for m in metas
    ]

    values, groups, strata, blocks = [], [], [], []
    for r, row in enumerate(body, start=2):  # 1-based with header = row 1
        if len(row) < len(header):
            raise DataError(f"row {r}: expected {len(header)} cells, got {len(row)}")
        reps = 1
        if freq_col is not None:
            cell = row[freq_col].strip()
            try:
                reps = int(cell)
            except ValueError:
                raise DataError(f"row {r}: frequency {cell!r} is not an integer")
            if reps < 0:
                raise DataError(f"row {r}: negative frequency")
            if reps == 0:
                continue
        parsed = []
        for k, m in enumerate(metas):
            cell = row[var_cols[k]].strip()
            if cell in missing:
                parsed.append(math.nan)
                continue
            if m.kind == "ordinal":
                idx = level_index[k].get(cell)
                if idx is None:
                    raise DataError(
                        f"row {r}, column {m.name!r}: unknown ordinal level {cell!r}")
                parsed.append(float(idx))
            else:
                try:
                    x = float(cell)
                except ValueError:
                    raise DataError(
                        f"row {r}, column {m.name!r}: not a number: {cell!r}")
                if m.kind == "binary" and x not in (0.0, 1.0):
                    raise DataError(
                        f"row {r}, column {m.name!r}: binary cell must be 0/1")
                if targets[k] is not None:
                    x = -abs(x - float(targets[k]))
                parsed.append(x)
        for _ in range(reps):
            values.append(parsed)
            groups.append(row[group_col].strip())
            if stratum_col is not None:
                strata.append(row[stratum_col].strip())
            if block_col is not None:
                blocks.append(row[block_col].strip())

    if not values:
        raise DataError("no units")
    return Dataset(
        values=np.array(values, dtype=float),
        groups=tuple(groups),
        meta=tuple(metas),
        stratum=tuple(strata) if stratum_col is not None else None,
        block=tuple(blocks) if block_col is not None else None,
    )


# ---------------------------------------------------------------------------
# Orientation and partitioning
# ---------------------------------------------------------------------------

def orient(ds: Dataset) -> Dataset:
    """Rewrite every variable so that larger values mean better performance.

    ``lower_better`` numeric/binary columns are negated; ordinal level index
    c becomes K+1-c (and the level list is reversed to match).  Metadata
    directions become ``higher_better``.  Involution: re-flipping directions
    and orienting again restores the original values bit for bit.
    """
    values = np.array(ds.values, dtype=float)
    new_meta = []
    for k, m in enumerate(ds.meta):
        if m.direction == "lower_better":
            if m.kind == "ordinal":
                values[:, k] = (m.n_levels + 1) - values[:, k]
                m = replace(m, direction="higher_better",
                            levels=tuple(reversed(m.levels)))
            else:
                values[:, k] = -values[:, k]
                m = replace(m, direction="higher_better")
        new_meta.append(m)
    return replace(ds, values=values, meta=tuple(new_meta))


def partition_views(ds: Dataset) -> list:
    """One view per (stratum level x domain) cell.

    Views reference the parent table.  Variables without a domain tag form
    the ``None`` domain; the domain views partition the columns exactly.

    Raises:
        DataError: a stratum level lacks some group, making within-stratum
            pairwise comparison impossible.
    """
    if ds.stratum is not None:
        levels = sorted(set(ds.stratum))
        strat = np.array(ds.stratum, dtype=object)
        group_set = set(ds.groups)
        for lv in levels:
            rows = np.flatnonzero(strat == lv)
            present = {ds.groups[i] for i in rows}
            if present != group_set:
                raise DataError(
                    f"stratum {lv!r} lacks groups {sorted(group_set - present)}")
        strata = [(lv, np.flatnonzero(strat == lv)) for lv in levels]
    else:
        strata = [(None, np.arange(ds.n))]

    domains = []
    seen = []
    for k, m in enumerate(ds.meta):
        if m.domain not in seen:
            seen.append(m.domain)
    for d in seen:
        cols = np.array([k for k, m in enumerate(ds.meta) if m.domain == d], dtype=int)
        domains.append((d, cols))

    views = []
    for lv, rows in strata:
        for d, cols in domains:
            views.append(DatasetView(ds, rows, cols, stratum_label=lv, domain_label=d))
    return views
