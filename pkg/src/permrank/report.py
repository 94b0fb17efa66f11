"""Structured report document and its text rendering.

One self-describing document carries the full evidence chain: the global
equality test, per-variable and per-domain directional matrices, the global
matrix, dominance scores, the ordered adjusted upper matrix, S, and the
final ranking, under a provenance block.  The text rendering is generated
from the same document with one number formatter, so both carry identical
numbers.
"""

from __future__ import annotations

import json
import math
from typing import Mapping, Optional

import numpy as np
from jsonschema import validate as _js_validate

from .multiplicity import AdjustedUpperMatrix
from .npc import DirectionalPMatrix
from .ranking import GlobalRanking

SCHEMA_ID = "permrank-report/1"


def _cell(x) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _matrix_doc(m: DirectionalPMatrix) -> dict:
    return {
        "labels": list(m.labels),
        "values": [[_cell(v) for v in row] for row in np.asarray(m.values)],
    }


def _upper_doc(u: AdjustedUpperMatrix) -> dict:
    return {
        "labels": list(u.labels),
        "raw": [[_cell(v) for v in row] for row in np.asarray(u.raw)],
        "adjusted": [[_cell(v) for v in row] for row in np.asarray(u.adjusted)],
        "method": u.method,
        "alpha": u.alpha,
    }


def ranking_doc(gr: GlobalRanking) -> dict:
    doc = {
        "order": list(gr.order),
        "dominance_scores": {k: _cell(v) for k, v in gr.dominance.items()},
        "upper": _upper_doc(gr.upper),
        "S": [[int(v) for v in row] for row in np.asarray(gr.S)],
        "kept_rows": [int(r) for r in gr.kept_rows],
        "rank_scores": [_cell(v) for v in np.asarray(gr.scores)],
        "ranking": {k: int(v) for k, v in gr.ranks.items()},
        "all_tied_emphasis": bool(gr.all_tied_emphasis),
        "notes": list(gr.notes),
    }
    if gr.global_test_p is not None:
        doc["global_test_p"] = _cell(gr.global_test_p)
    if gr.matrices is not None:
        doc["marginal_matrices"] = {
            name: _matrix_doc(m) for name, m in gr.matrices.marginal.items()}
        if gr.matrices.domain:
            doc["domain_matrices"] = {
                str(d): _matrix_doc(m) for d, m in gr.matrices.domain.items()}
        doc["global_matrix"] = _matrix_doc(gr.matrices.global_matrix)
    return doc


def build_report(provenance: Mapping, dataset_summary: Mapping,
                 final: GlobalRanking,
                 strata: Optional[Mapping] = None) -> dict:
    report = {
        "schema": SCHEMA_ID,
        "provenance": dict(provenance),
        "dataset": dict(dataset_summary),
        "result": ranking_doc(final),
    }
    if strata:
        report["strata"] = {str(k): ranking_doc(v) for k, v in strata.items()}
    return report


def dumps(report: Mapping) -> str:
    """Canonical byte-stable JSON rendering."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False)


# ---------------------------------------------------------------------------
# Text rendering
# ---------------------------------------------------------------------------

def fmt_number(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, int):
        return str(x)
    return f"{x:.6g}"


def _render_matrix(doc: dict, key: str = "values") -> list:
    labels = doc["labels"]
    width = max(8, max(len(str(l)) for l in labels) + 1)
    head = " " * width + "".join(f"{str(l):>{width}}" for l in labels)
    lines = [head]
    for lab, row in zip(labels, doc[key]):
        cells = "".join(f"{fmt_number(v):>{width}}" for v in row)
        lines.append(f"{str(lab):<{width}}{cells}")
    return lines


def _render_ranking(doc: dict, indent: str = "") -> list:
    lines = []
    if "global_test_p" in doc:
        lines.append(f"{indent}global equality test p = "
                     f"{fmt_number(doc['global_test_p'])}")
    if "marginal_matrices" in doc:
        for name in sorted(doc["marginal_matrices"]):
            lines.append(f"{indent}marginal directional matrix [{name}]:")
            lines += [indent + "  " + l
                      for l in _render_matrix(doc["marginal_matrices"][name])]
    if "domain_matrices" in doc:
        for name in sorted(doc["domain_matrices"]):
            lines.append(f"{indent}domain directional matrix [{name}]:")
            lines += [indent + "  " + l
                      for l in _render_matrix(doc["domain_matrices"][name])]
    if "global_matrix" in doc:
        lines.append(f"{indent}global directional matrix:")
        lines += [indent + "  " + l for l in _render_matrix(doc["global_matrix"])]
    lines.append(f"{indent}dominance scores: " + ", ".join(
        f"{k}={fmt_number(v)}" for k, v in sorted(doc["dominance_scores"].items())))
    lines.append(f"{indent}pre-order: " + " > ".join(doc["order"]))
    lines.append(f"{indent}ordered upper matrix, raw:")
    lines += [indent + "  " + l for l in _render_matrix(doc["upper"], "raw")]
    lines.append(f"{indent}ordered upper matrix, adjusted "
                 f"({doc['upper']['method']}, alpha={fmt_number(doc['upper']['alpha'])}):")
    lines += [indent + "  " + l for l in _render_matrix(doc["upper"], "adjusted")]
    lines.append(f"{indent}S matrix rows: " +
                 "; ".join(" ".join(str(v) for v in row) for row in doc["S"]))
    lines.append(f"{indent}kept rows: " +
                 ", ".join(str(r + 1) for r in doc["kept_rows"]))
    lines.append(f"{indent}rank scores: " +
                 ", ".join(fmt_number(v) for v in doc["rank_scores"]))
    lines.append(f"{indent}final ranking: " + ", ".join(
        f"{k}={v}" for k, v in sorted(doc["ranking"].items())))
    if doc.get("all_tied_emphasis"):
        lines.append(f"{indent}NOTE: global equality not rejected; the all-tied"
                     " ranking (everything rank 1) is the supported reading")
    for note in doc.get("notes", []):
        lines.append(f"{indent}note: {note}")
    return lines


def render_text(report: Mapping) -> str:
    lines = ["permrank analysis report", "=" * 24]
    prov = report["provenance"]
    lines.append("provenance: " + ", ".join(
        f"{k}={fmt_number(v) if isinstance(v, float) else v}"
        for k, v in sorted(prov.items())))
    ds = report["dataset"]
    lines.append(
        f"dataset: n={ds['n']}, p={ds['p']}, C={ds['C']}, groups=" +
        ", ".join(f"{k}({v})" for k, v in sorted(ds["groups"].items())))
    for name, stratum_doc in sorted(report.get("strata", {}).items()):
        lines.append("")
        lines.append(f"stratum [{name}]")
        lines.append("-" * (10 + len(str(name))))
        lines += _render_ranking(stratum_doc, indent="  ")
    lines.append("")
    lines.append("final analysis")
    lines.append("-" * 14)
    lines += _render_ranking(report["result"], indent="  ")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

_NUMBER_OR_NULL = {"type": ["number", "null"]}
_MATRIX = {
    "type": "object",
    "required": ["labels", "values"],
    "properties": {
        "labels": {"type": "array", "items": {"type": "string"}},
        "values": {"type": "array",
                   "items": {"type": "array", "items": _NUMBER_OR_NULL}},
    },
}
_RANKING_DOC = {
    "type": "object",
    "required": ["order", "dominance_scores", "upper", "S", "kept_rows",
                 "rank_scores", "ranking"],
    "properties": {
        "order": {"type": "array", "items": {"type": "string"}},
        "dominance_scores": {"type": "object",
                             "additionalProperties": _NUMBER_OR_NULL},
        "upper": {
            "type": "object",
            "required": ["labels", "raw", "adjusted", "method", "alpha"],
            "properties": {
                "labels": {"type": "array", "items": {"type": "string"}},
                "raw": {"type": "array",
                        "items": {"type": "array", "items": _NUMBER_OR_NULL}},
                "adjusted": {"type": "array",
                             "items": {"type": "array", "items": _NUMBER_OR_NULL}},
                "method": {"enum": ["none", "holm", "shaffer"]},
                "alpha": {"type": "number"},
            },
        },
        "S": {"type": "array",
              "items": {"type": "array", "items": {"enum": [0, 1]}}},
        "kept_rows": {"type": "array", "items": {"type": "integer"}},
        "rank_scores": {"type": "array", "items": _NUMBER_OR_NULL},
        "ranking": {"type": "object",
                    "additionalProperties": {"type": "integer", "minimum": 1}},
        "global_test_p": _NUMBER_OR_NULL,
        "all_tied_emphasis": {"type": "boolean"},
        "marginal_matrices": {"type": "object", "additionalProperties": _MATRIX},
        "domain_matrices": {"type": "object", "additionalProperties": _MATRIX},
        "global_matrix": _MATRIX,
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": SCHEMA_ID,
    "type": "object",
    "required": ["schema", "provenance", "dataset", "result"],
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "provenance": {"type": "object"},
        "dataset": {
            "type": "object",
            "required": ["n", "p", "C", "groups"],
            "properties": {
                "n": {"type": "integer"},
                "p": {"type": "integer"},
                "C": {"type": "integer"},
                "groups": {"type": "object",
                           "additionalProperties": {"type": "integer"}},
            },
        },
        "result": _RANKING_DOC,
        "strata": {"type": "object", "additionalProperties": _RANKING_DOC},
    },
}


def validate_report(report: Mapping):
    """Raise jsonschema.ValidationError when the document is malformed."""
    _js_validate(instance=report, schema=REPORT_SCHEMA)
