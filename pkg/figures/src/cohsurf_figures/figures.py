"""Figure assembly from metrics CSV files.

Five panel types cover the standard views of a (d, p, gamma) sweep:

* curves_vs_p:   one metric versus p, one curve per code distance, fixed gamma
* vs_distance:   one metric versus d, one curve per (p, gamma) pair
* vs_gamma:      one metric versus -log10(1 - gamma) at fixed p (gamma = 1
                 rows cannot be placed on this axis and are dropped)
* entanglement:  mean final-state entropy and its sample standard deviation
                 versus p, per code distance, fixed gamma
* phase_diagram: the (p, gamma) grid as a scatter, optionally overlaid with
                 threshold estimates given inline in the figure spec

Rendering is read-only over the CSVs: no physics is recomputed here.  Panels
showing the coherent information draw the ln 2 perfect-recoverability guide.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import tomli

CSV_SCHEMA_VERSION = "cohsurf-metrics-1"

PANEL_TYPES = ("curves_vs_p", "vs_distance", "vs_gamma", "entanglement", "phase_diagram")

METRIC_LABELS = {
    "p_logical": "logical error rate",
    "p_mwpm": "matching error rate",
    "relative_entropy": "relative entropy",
    "coherent_information": "coherent information",
    "logical_coherence": "logical coherence",
    "entropy_mean": "entanglement entropy",
    "entropy_std": "entropy std dev",
}

LN2_METRICS = {"coherent_information"}


class SchemaError(ValueError):
    """The CSV does not carry the columns or schema version a panel needs."""


@dataclass(frozen=True)
class FigureSpec:
    panel: str
    csv_paths: tuple[str, ...]
    output: str
    metric: str = "p_logical"
    gamma: float | None = None
    p: float | None = None
    d_values: tuple[int, ...] | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    logy: bool = False
    title: str | None = None
    thresholds: tuple[dict, ...] = field(default_factory=tuple)

    @classmethod
    def from_toml(cls, path) -> "FigureSpec":
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
        fig = doc.get("figure", {})
        data = doc.get("data", {})
        filters = doc.get("filters", {})
        axes = doc.get("axes", {})
        panel = fig.get("panel")
        if panel not in PANEL_TYPES:
            raise SchemaError(f"panel must be one of {PANEL_TYPES}, got {panel!r}")
        base = Path(path).resolve().parent
        csv_paths = tuple(str((base / p)) for p in data.get("csv", []))
        d_values = filters.get("d")
        return cls(
            panel=panel,
            csv_paths=csv_paths,
            output=str(base / fig.get("output", "figure.png")),
            metric=filters.get("metric", "p_logical"),
            gamma=filters.get("gamma"),
            p=filters.get("p"),
            d_values=tuple(int(d) for d in d_values) if d_values else None,
            xlim=tuple(axes["xlim"]) if "xlim" in axes else None,
            ylim=tuple(axes["ylim"]) if "ylim" in axes else None,
            logy=bool(axes.get("logy", False)),
            title=fig.get("title"),
            thresholds=tuple(doc.get("thresholds", [])),
        )


def load_rows(csv_paths) -> list[dict]:
    rows: list[dict] = []
    for path in csv_paths:
        with open(path) as fh:
            for row in csv.DictReader(fh):
                if row.get("schema") != CSV_SCHEMA_VERSION:
                    raise SchemaError(
                        f"{path}: schema {row.get('schema')!r}, expected {CSV_SCHEMA_VERSION!r}"
                    )
                rows.append(row)
    return rows


def _require_columns(rows, columns):
    if not rows:
        return
    missing = [c for c in columns if c not in rows[0]]
    if missing:
        raise SchemaError(
            f"CSV lacks columns {missing}; this panel expects {sorted(columns)}"
        )


def _annotate_empty(ax):
    ax.text(
        0.5,
        0.5,
        "no data: empty CSV selection",
        transform=ax.transAxes,
        ha="center",
        va="center",
        color="crimson",
    )


def _maybe_ln2_guide(ax, metric):
    if metric in LN2_METRICS:
        ax.axhline(math.log(2), linestyle="--", color="gray", linewidth=1, label="ln 2")


def _select(rows, **conditions):
    out = []
    for row in rows:
        ok = True
        for key, want in conditions.items():
            if want is None:
                continue
            if key == "d_values":
                if int(row["d"]) not in want:
                    ok = False
            elif not math.isclose(float(row[key]), float(want), rel_tol=0, abs_tol=1e-12):
                ok = False
        if ok:
            out.append(row)
    return out


def _panel_curves_vs_p(ax, rows, spec):
    metric = spec.metric
    _require_columns(rows, ["d", "p", "gamma", metric, f"{metric}_sem"])
    rows = _select(rows, gamma=spec.gamma, d_values=spec.d_values)
    if not rows:
        _annotate_empty(ax)
        return
    for d in sorted({int(r["d"]) for r in rows}):
        pts = sorted((float(r["p"]), float(r[metric]), float(r[f"{metric}_sem"]))
                     for r in rows if int(r["d"]) == d)
        x, y, err = (np.array([q[i] for q in pts]) for i in range(3))
        ax.errorbar(x, y, yerr=err, marker="o", markersize=3, capsize=2, label=f"d={d}")
    _maybe_ln2_guide(ax, metric)
    ax.set_xlabel("p")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    if spec.logy:
        ax.set_yscale("log")
    ax.legend()


def _panel_vs_distance(ax, rows, spec):
    metric = spec.metric
    _require_columns(rows, ["d", "p", "gamma", metric, f"{metric}_sem"])
    rows = _select(rows, gamma=spec.gamma, p=spec.p, d_values=spec.d_values)
    if not rows:
        _annotate_empty(ax)
        return
    groups = sorted({(float(r["p"]), float(r["gamma"])) for r in rows})
    for p, gamma in groups:
        pts = sorted(
            (int(r["d"]), float(r[metric]), float(r[f"{metric}_sem"]))
            for r in rows
            if math.isclose(float(r["p"]), p) and math.isclose(float(r["gamma"]), gamma)
        )
        x, y, err = (np.array([q[i] for q in pts]) for i in range(3))
        ax.errorbar(x, y, yerr=err, marker="s", markersize=4, capsize=2,
                    label=f"p={p:g}, $\\gamma$={gamma:g}")
    _maybe_ln2_guide(ax, metric)
    ax.set_xlabel("code distance d")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xticks(sorted({int(r["d"]) for r in rows}))
    ax.legend()


def _panel_vs_gamma(ax, rows, spec):
    metric = spec.metric
    _require_columns(rows, ["d", "p", "gamma", metric, f"{metric}_sem"])
    rows = _select(rows, p=spec.p, d_values=spec.d_values)
    rows = [r for r in rows if float(r["gamma"]) < 1.0]
    if not rows:
        _annotate_empty(ax)
        return
    for d in sorted({int(r["d"]) for r in rows}):
        pts = sorted(
            (-math.log10(1 - float(r["gamma"])), float(r[metric]), float(r[f"{metric}_sem"]))
            for r in rows if int(r["d"]) == d
        )
        x, y, err = (np.array([q[i] for q in pts]) for i in range(3))
        ax.errorbar(x, y, yerr=err, marker="o", markersize=3, capsize=2, label=f"d={d}")
    _maybe_ln2_guide(ax, metric)
    ax.set_xlabel(r"$-\log_{10}(1-\gamma)$")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    # second axis on top showing gamma itself
    top = ax.secondary_xaxis("top", functions=(lambda x: x, lambda x: x))
    xt = ax.get_xticks()
    top.set_xticks(xt)
    top.set_xticklabels([f"{1 - 10**(-t):.3g}" for t in xt])
    top.set_xlabel(r"$\gamma$")
    ax.legend()


def _panel_entanglement(fig, rows, spec):
    _require_columns(rows, ["d", "p", "gamma", "entropy_mean", "entropy_sem", "entropy_std"])
    rows = _select(rows, gamma=spec.gamma, d_values=spec.d_values)
    ax_s, ax_sigma = fig.subplots(2, 1, sharex=True)
    if not rows:
        _annotate_empty(ax_s)
        return [ax_s, ax_sigma]
    for d in sorted({int(r["d"]) for r in rows}):
        pts = sorted(
            (float(r["p"]), float(r["entropy_mean"]), float(r["entropy_sem"]),
             float(r["entropy_std"]))
            for r in rows if int(r["d"]) == d
        )
        x = np.array([q[0] for q in pts])
        ax_s.errorbar(x, [q[1] for q in pts], yerr=[q[2] for q in pts],
                      marker="o", markersize=3, capsize=2, label=f"d={d}")
        ax_sigma.plot(x, [q[3] for q in pts], marker="s", markersize=4, label=f"d={d}")
    ax_s.set_ylabel("entanglement entropy S")
    ax_sigma.set_ylabel(r"$\sigma_S$")
    ax_sigma.set_xlabel("p")
    ax_s.legend()
    return [ax_s, ax_sigma]


def _panel_phase_diagram(ax, rows, spec):
    _require_columns(rows, ["p", "gamma"])
    if not rows:
        _annotate_empty(ax)
        return
    pts = sorted({(float(r["p"]), float(r["gamma"])) for r in rows})
    ax.scatter([q[0] for q in pts], [q[1] for q in pts], s=12, color="steelblue",
               marker="o", label="simulated points")
    if spec.thresholds:
        th = sorted(spec.thresholds, key=lambda t: t["gamma"])
        ax.errorbar(
            [t["p"] for t in th],
            [t["gamma"] for t in th],
            xerr=[t.get("err", 0.0) for t in th],
            color="black",
            marker="D",
            markersize=5,
            linestyle=":",
            capsize=3,
            label="threshold estimate",
        )
    ax.set_xlabel("p")
    ax.set_ylabel(r"$\gamma$")
    ax.legend()


def build_figure(spec: FigureSpec):
    """Assemble the figure in memory; returns (figure, axes list)."""
    rows = load_rows(spec.csv_paths)
    fig = plt.figure(figsize=(5.2, 4.0), dpi=160)
    if spec.panel == "entanglement":
        axes = _panel_entanglement(fig, rows, spec)
        ax0 = axes[0]
    else:
        ax0 = fig.subplots()
        axes = [ax0]
        if spec.panel == "curves_vs_p":
            _panel_curves_vs_p(ax0, rows, spec)
        elif spec.panel == "vs_distance":
            _panel_vs_distance(ax0, rows, spec)
        elif spec.panel == "vs_gamma":
            _panel_vs_gamma(ax0, rows, spec)
        elif spec.panel == "phase_diagram":
            _panel_phase_diagram(ax0, rows, spec)
        else:
            raise SchemaError(f"unknown panel {spec.panel!r}")
    if spec.xlim:
        ax0.set_xlim(*spec.xlim)
    if spec.ylim:
        ax0.set_ylim(*spec.ylim)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return fig, axes


def render(spec: FigureSpec) -> str:
    """Render the spec to its output file (png or pdf) and return the path."""
    fig, _ = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_stable_metadata(out.suffix))
    plt.close(fig)
    return str(out)


def _stable_metadata(suffix):
    # strip timestamps so identical inputs give identical bytes
    if suffix == ".png":
        return {"Software": "cohsurf-figures"}
    if suffix == ".pdf":
        return {"Creator": "cohsurf-figures", "Producer": "cohsurf-figures", "CreationDate": None}
    return None
