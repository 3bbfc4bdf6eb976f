"""Delimited results and figure rendering.

One row per (sweep point, metric). The analytic and simulated columns
are both optional so a file can carry either route or the side-by-side
comparison; stderr and trials qualify the simulated column. Files open
with '#'-prefixed key=value metadata lines (seed, parameter digest,
package version) chosen so that a rerun with the same configuration
reproduces the bytes exactly; nothing time- or host-dependent goes in.

Floats are written with repr, which round-trips exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .model import SystemParams
from .optimize import PolicyHistogram

__all__ = [
    "CSV_FIELDS",
    "ResultRow",
    "params_digest",
    "write_rows",
    "read_rows",
    "render_rows",
    "render_histogram",
    "render_parametric",
]

CSV_FIELDS = (
    "sweep_param",
    "sweep_value",
    "metric",
    "analytic",
    "simulated",
    "stderr",
    "trials",
)


@dataclass(frozen=True)
class ResultRow:
    sweep_param: str
    sweep_value: float
    metric: str
    analytic: float | None = None
    simulated: float | None = None
    stderr: float | None = None
    trials: int | None = None


def params_digest(params: SystemParams) -> str:
    """Short stable digest of an operating point, for output preambles."""
    payload = repr(sorted(dataclasses.asdict(params).items())).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_rows(path, rows: Sequence[ResultRow], metadata: Dict[str, str]) -> None:
    with open(path, "w", newline="") as fh:
        for key, value in metadata.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for row in rows:
            writer.writerow(
                (
                    row.sweep_param,
                    _format(row.sweep_value),
                    row.metric,
                    _format(row.analytic),
                    _format(row.simulated),
                    _format(row.stderr),
                    _format(row.trials),
                )
            )


def read_rows(path) -> Tuple[Dict[str, str], List[ResultRow]]:
    metadata: Dict[str, str] = {}
    rows: List[ResultRow] = []
    with open(path, newline="") as fh:
        data_lines = []
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key.strip()] = value.strip()
                continue
            data_lines.append(line)
    reader = csv.reader(data_lines)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_FIELDS:
        raise ValueError(f"unexpected header in {path}: {header}")
    for record in reader:
        if not record:
            continue
        sweep_param, sweep_value, metric, analytic, simulated, stderr, trials = record
        rows.append(
            ResultRow(
                sweep_param,
                float(sweep_value),
                metric,
                float(analytic) if analytic else None,
                float(simulated) if simulated else None,
                float(stderr) if stderr else None,
                int(trials) if trials else None,
            )
        )
    return metadata, rows


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _grouped(rows: Sequence[ResultRow]) -> Dict[str, List[ResultRow]]:
    groups: Dict[str, List[ResultRow]] = {}
    for row in rows:
        groups.setdefault(row.metric, []).append(row)
    return groups


def render_rows(
    path,
    rows: Sequence[ResultRow],
    xlabel: str,
    ylabel: str,
    title: str | None = None,
    logy: bool = False,
) -> None:
    """One line per metric from the analytic column, plus error-bar markers
    from the simulated column where present."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for metric, series in sorted(_grouped(rows).items()):
        series = sorted(series, key=lambda r: r.sweep_value)
        xs = [r.sweep_value for r in series]
        analytic = [r.analytic for r in series]
        color = None
        if any(a is not None for a in analytic):
            xs_a = [x for x, a in zip(xs, analytic) if a is not None]
            ys_a = [a for a in analytic if a is not None]
            (line,) = ax.plot(xs_a, ys_a, label=metric)
            color = line.get_color()
        sim_pts = [
            (r.sweep_value, r.simulated, r.stderr or 0.0)
            for r in series
            if r.simulated is not None and not math.isnan(r.simulated)
        ]
        if sim_pts:
            xs_s, ys_s, errs = zip(*sim_pts)
            ax.errorbar(
                xs_s,
                ys_s,
                yerr=[1.96 * e for e in errs],
                fmt="o",
                markersize=4,
                capsize=2,
                linestyle="none",
                color=color,
                label=None if color else metric,
            )
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_histogram(
    path,
    policy: PolicyHistogram,
    xlabel: str = "serving BS distance (m)",
    ylabel: str = "assisted fraction",
    title: str | None = None,
) -> None:
    """Bar chart of a distance-binned assistance policy; unobserved bins
    are omitted, infinite edges clipped."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    lefts, widths, heights = [], [], []
    for i, freq in enumerate(policy.frequencies):
        lo, hi = policy.edges[i], policy.edges[i + 1]
        if math.isnan(freq) or math.isinf(hi):
            continue
        lefts.append(lo)
        widths.append(hi - lo)
        heights.append(freq)
    ax.bar(lefts, heights, width=widths, align="edge", edgecolor="white")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_ylim(0.0, 1.05)
    if title:
        ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_parametric(
    path,
    curves: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str | None = None,
) -> None:
    """Plain multi-line plot from precomputed (x, y) pairs, for curves that
    are parametric rather than functions of the sweep axis."""
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for label, (xs, ys) in sorted(curves.items()):
        ax.plot(np.asarray(xs), np.asarray(ys), label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
