"""Analysis configuration and the end-to-end analyze pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .dataset import Dataset, DatasetView, load_dataset, orient, partition_views
from .errors import ConfigError
from .npc import COMBINER_KINDS, Combiner, as_combiner
from .partial_tests import AspectBundle, parse_spec
from .perm_engine import (DEFAULT_EXHAUSTIVE_CAP, STRATEGIES, PermutationPlan)
from .ranking import global_ranking
from .report import build_report

from .multiplicity import METHODS

OUTPUT_FORMATS = ("text", "structured")


@dataclass(frozen=True)
class AnalysisConfig:
    """Validated knobs for one analyze invocation."""

    data: str
    config: str
    alpha: float = 0.05
    B: int = 2000
    seed: int = 0
    strategy: str = "pip"
    combiner: Combiner = field(default_factory=Combiner)
    adjust: str = "holm"
    workers: int = 1
    output: str = "structured"
    expand_frequencies: Optional[str] = None
    exhaustive_cap: int = DEFAULT_EXHAUSTIVE_CAP

    def __post_init__(self):
        object.__setattr__(self, "combiner", as_combiner(self.combiner))
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.B < 1:
            raise ConfigError("B >= 1 required")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.adjust not in METHODS:
            raise ConfigError(f"adjust must be one of {METHODS}")
        if self.combiner.kind not in COMBINER_KINDS:
            raise ConfigError(f"combiner must be one of {COMBINER_KINDS}")
        if self.output not in OUTPUT_FORMATS:
            raise ConfigError(f"output must be one of {OUTPUT_FORMATS}")
        if self.workers < 1:
            raise ConfigError("workers >= 1 required")


def specs_from_config(doc: Mapping, meta) -> Optional[list]:
    """Per-variable statistic specs from config 'statistics' entries."""
    entries = {e["name"]: e.get("statistics") for e in doc.get("variables", [])
               if isinstance(e, Mapping)}
    out = []
    any_set = False
    for m in meta:
        chosen = entries.get(m.name)
        if not chosen:
            out.append(None)
            continue
        any_set = True
        if isinstance(chosen, (str, Mapping)):
            chosen = [chosen]
        bundle = AspectBundle(tuple(parse_spec(c) for c in chosen))
        bundle.check_kind(m.kind, m.name)
        out.append(bundle)
    return out if any_set else None


def _dataset_summary(ds: Dataset) -> dict:
    return {
        "n": ds.n,
        "p": ds.p,
        "C": ds.n_groups,
        "groups": {k: int(v) for k, v in sorted(ds.group_sizes().items())},
        "variables": [
            {"name": m.name, "kind": m.kind, "direction": m.direction,
             **({"domain": m.domain} if m.domain else {})}
            for m in ds.meta
        ],
        **({"strata": sorted(set(ds.stratum))} if ds.stratum else {}),
        **({"blocks": sorted(set(ds.block))} if ds.block else {}),
    }


def run_analyze(cfg: AnalysisConfig) -> dict:
    """Load, orient, and rank; return the structured report document."""
    from .dataset import _read_config  # shared parser, including Mapping passthrough

    doc = dict(_read_config(cfg.config))
    if cfg.expand_frequencies:
        doc["frequency"] = cfg.expand_frequencies
    ds = orient(load_dataset(cfg.data, doc))
    specs = specs_from_config(doc, ds.meta)
    plan = PermutationPlan(cfg.strategy, cfg.B, cfg.seed,
                           exhaustive_cap=cfg.exhaustive_cap)

    strata_results = None
    if ds.stratum is not None:
        # per-stratum intermediate results, then the final constrained run
        partition_views(ds)  # validates stratum x group coverage
        strat = np.array(ds.stratum, dtype=object)
        strata_results = {}
        for level in sorted(set(ds.stratum)):
            rows = np.flatnonzero(strat == level)
            view = DatasetView(ds, rows, np.arange(ds.p), stratum_label=level)
            strata_results[level] = global_ranking(
                view, plan, specs=specs, combiner=cfg.combiner,
                method=cfg.adjust, alpha=cfg.alpha, workers=cfg.workers)

    final = global_ranking(ds, plan, specs=specs, combiner=cfg.combiner,
                           method=cfg.adjust, alpha=cfg.alpha,
                           workers=cfg.workers)

    provenance = {
        "data": str(cfg.data),
        "config": str(cfg.config) if isinstance(cfg.config, (str, Path)) else "<inline>",
        "alpha": cfg.alpha,
        "B": cfg.B,
        "seed": cfg.seed,
        "strategy": cfg.strategy,
        "combiner": cfg.combiner.kind,
        "adjust": cfg.adjust,
        "package": "permrank",
    }
    return build_report(provenance, _dataset_summary(ds), final,
                        strata=strata_results)
