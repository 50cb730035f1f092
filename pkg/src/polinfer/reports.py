"""Delimited and graphical reports for scenario runs and sensitivity tables.

Builders return finished content (CSV text, PNG bytes) rather than writing
files, so callers can assemble a full report and only then touch the
filesystem; a failed run leaves nothing half-written.
"""
from __future__ import annotations

import csv
import io
import re

from .analytics import LinearUtility, SensitivityReport
from .temporal import UtilityTimeline

__all__ = [
    "column_slug", "timeline_columns", "timeline_csv", "contributions",
    "contributions_csv", "sensitivity_csv",
    "timeline_png", "contributions_png", "sensitivity_png",
]

_NUM = "%.6f"


def column_slug(variable: str) -> str:
    s = re.sub(r"[^0-9a-z]", "", variable.lower())
    return s.removesuffix("abundance") or s


def timeline_columns(spec: LinearUtility) -> list[str]:
    return [
        f"p_{column_slug(t.variable)}_{t.good_state.lower()}" for t in spec.targets
    ]


def _write_rows(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def timeline_csv(timeline: UtilityTimeline, spec: LinearUtility) -> str:
    header = ["slice", *timeline_columns(spec), "utility"]
    rows = []
    for pt in timeline.points:
        probs = [pt.marginals[t.variable][t.good_state] for t in spec.targets]
        rows.append([
            pt.slice_index,
            *(_NUM % p for p in probs),
            _NUM % pt.utility,
        ])
    return _write_rows(header, rows)


def contributions(timeline: UtilityTimeline, spec: LinearUtility) -> list[dict]:
    """Per-slice additive utility shares, one weighted term per target."""
    out = []
    for pt in timeline.points:
        parts = {
            t.variable: t.weight * pt.marginals[t.variable][t.good_state] * spec.scale
            for t in spec.targets
        }
        out.append({
            "slice": pt.slice_index,
            "parts": parts,
            "total": sum(parts.values()),
        })
    return out


def contributions_csv(timeline: UtilityTimeline, spec: LinearUtility) -> str:
    header = [
        "slice",
        *(f"contrib_{column_slug(t.variable)}" for t in spec.targets),
        "total",
    ]
    rows = []
    for entry in contributions(timeline, spec):
        rows.append([
            entry["slice"],
            *(_NUM % entry["parts"][t.variable] for t in spec.targets),
            _NUM % entry["total"],
        ])
    return _write_rows(header, rows)


def sensitivity_csv(report: SensitivityReport) -> str:
    header = [
        "source", "mutual_information_bits", "percent_of_entropy",
        "variance_of_belief",
    ]
    rows = [
        [
            row.source,
            _NUM % row.mutual_information,
            "%.3f" % row.percent_of_entropy,
            _NUM % row.variance_of_belief,
        ]
        for row in report.rows
    ]
    return _write_rows(header, rows)


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, bbox_inches="tight")
    out = buf.getvalue()
    _pyplot().close(fig)
    return out


def timeline_png(timelines: dict[str, UtilityTimeline]) -> bytes:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, tl in timelines.items():
        xs = [pt.slice_index for pt in tl.points]
        ax.plot(xs, list(tl.utilities()), marker="o", markersize=3, label=name)
    ax.set_xlabel("year")
    ax.set_ylabel("utility (0-100)")
    ax.set_title("Expected utility by year")
    ax.grid(True, alpha=0.3)
    if len(timelines) > 1 or any(timelines):
        ax.legend(loc="best", fontsize=8)
    return _png(fig)


def contributions_png(timeline: UtilityTimeline, spec: LinearUtility) -> bytes:
    plt = _pyplot()
    entries = contributions(timeline, spec)
    xs = [e["slice"] for e in entries]
    fig, ax = plt.subplots(figsize=(7, 4))
    bottom = [0.0] * len(entries)
    for t in spec.targets:
        vals = [e["parts"][t.variable] for e in entries]
        ax.bar(xs, vals, bottom=bottom, label=t.variable, width=0.7)
        bottom = [b + v for b, v in zip(bottom, vals)]
    ax.set_xlabel("year")
    ax.set_ylabel("utility contribution")
    ax.set_title(f"Utility contributions: {timeline.scenario}")
    ax.legend(loc="best", fontsize=8)
    return _png(fig)


def sensitivity_png(report: SensitivityReport) -> bytes:
    plt = _pyplot()
    rows = list(report.rows)
    fig, ax = plt.subplots(figsize=(7, 0.45 * max(len(rows), 4) + 1.2))
    names = [r.source for r in rows][::-1]
    vals = [r.mutual_information for r in rows][::-1]
    ax.barh(names, vals)
    ax.set_xlabel("mutual information (bits)")
    ax.set_title(f"Sensitivity of {report.target}")
    fig.subplots_adjust(left=0.35)
    return _png(fig)
