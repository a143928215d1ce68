"""Render gossip-experiment outputs into the four standard figure kinds.

Consumes only the documented harness file schemas: a summary.csv with
per-cell aggregates, and runs/<name>.csv traces (t,psi,bits_cumulative)
with JSON metadata sidecars. Rendering is read-only over inputs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm
from matplotlib.patches import Rectangle

FIGURE_KINDS = ("iterations-vs-n", "psi-vs-rounds", "psi-vs-bits", "feasibility-map")

SUMMARY_REQUIRED = {
    "cell_id",
    "variant",
    "n",
    "gamma",
    "trials",
    "mean_rounds",
    "diverged_count",
}

VARIANT_ORDER = ("EG", "SEG", "CG", "SCG")


class PlotInputError(ValueError):
    """Missing or malformed experiment outputs."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_dir: Path
    out_path: Path
    log_x: bool | None = None  # None: per-kind default
    log_y: bool | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise PlotInputError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")


def read_summary(input_dir: Path) -> list[dict]:
    path = Path(input_dir) / "summary.csv"
    if not path.exists():
        raise PlotInputError(f"no summary.csv in {input_dir}")
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not SUMMARY_REQUIRED.issubset(reader.fieldnames):
            missing = SUMMARY_REQUIRED - set(reader.fieldnames or [])
            raise PlotInputError(f"summary.csv missing columns: {sorted(missing)}")
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in ("n", "d", "k", "trials", "diverged_count"):
                if key in row and row[key] != "":
                    row[key] = int(row[key])
            for key in ("gamma", "sigma", "epsilon", "mean_rounds", "std_rounds",
                        "mean_bits", "std_bits", "rho_mean"):
                if key in row:
                    row[key] = float(row[key]) if row[key] != "" else None
            rows.append(row)
    if not rows:
        raise PlotInputError(f"summary.csv in {input_dir} has no data rows")
    return rows


def read_runs(input_dir: Path) -> list[dict]:
    """Load every trace with its sidecar; sorted by (cell_id, trial)."""
    runs_dir = Path(input_dir) / "runs"
    if not runs_dir.is_dir():
        raise PlotInputError(f"no runs/ directory in {input_dir}")
    out = []
    for trace_path in sorted(runs_dir.glob("*.csv")):
        sidecar = trace_path.with_suffix(".json")
        meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
        data = np.genfromtxt(trace_path, delimiter=",", names=True)
        if data.size == 0 or data.dtype.names != ("t", "psi", "bits_cumulative"):
            raise PlotInputError(f"malformed trace {trace_path}")
        data = np.atleast_1d(data)
        out.append(
            {
                "meta": meta,
                "t": data["t"].astype(int),
                "psi": data["psi"],
                "bits": data["bits_cumulative"],
                "name": trace_path.stem,
            }
        )
    if not out:
        raise PlotInputError(f"no trace files under {runs_dir}")
    return out


def pick_one_per_variant(runs: list[dict]) -> list[dict]:
    """First (cell_id, trial) per variant, in canonical variant order."""
    chosen: dict[str, dict] = {}
    for run in runs:
        variant = run["meta"].get("variant", run["name"].split("-")[0])
        chosen.setdefault(variant, run)
    order = {v: i for i, v in enumerate(VARIANT_ORDER)}
    return sorted(chosen.values(), key=lambda r: order.get(r["meta"].get("variant", ""), 99))


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if window <= 1 or x.size <= 1:
        return x.copy()
    window = min(window, x.size)
    kernel = np.ones(window) / window
    return np.convolve(x, kernel, mode="valid")


def smoothed_nonincreasing(psi: np.ndarray, window: int = 20, rel_tol: float = 1e-6) -> bool:
    s = moving_average(psi, window)
    return bool(np.all(s[1:] <= s[:-1] * (1.0 + rel_tol)))


def render(spec: FigureSpec) -> Path:
    if spec.kind == "iterations-vs-n":
        fig = _iterations_vs_n(spec)
    elif spec.kind == "psi-vs-rounds":
        fig = _psi_vs_trace(spec, x_field="t", x_label="communication rounds")
    elif spec.kind == "psi-vs-bits":
        fig = _psi_vs_trace(spec, x_field="bits", x_label="cumulative transmitted bits")
    else:
        fig = _feasibility_map(spec)
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out


def _iterations_vs_n(spec: FigureSpec) -> plt.Figure:
    rows = read_summary(spec.input_dir)
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    variants = sorted({r["variant"] for r in rows}, key=lambda v: VARIANT_ORDER.index(v) if v in VARIANT_ORDER else 99)
    plotted = 0
    for variant in variants:
        pts = sorted(
            (r["n"], r["mean_rounds"])
            for r in rows
            if r["variant"] == variant and r["mean_rounds"] is not None
        )
        if not pts:
            continue
        ns, rounds = zip(*pts)
        ax.plot(ns, rounds, marker="o", label=variant)
        plotted += 1
    if plotted == 0:
        raise PlotInputError("summary.csv has no converged cells to plot")
    if spec.log_x is None or spec.log_x:
        ax.set_xscale("log")
    if spec.log_y is None or spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("network size n")
    ax.set_ylabel("rounds to reach epsilon")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return fig


def _psi_vs_trace(spec: FigureSpec, x_field: str, x_label: str) -> plt.Figure:
    runs = pick_one_per_variant(read_runs(spec.input_dir))
    fig, ax = plt.subplots(figsize=(5.2, 3.9))
    for run in runs:
        label = run["meta"].get("variant", run["name"])
        ax.plot(run[x_field], run["psi"], label=label)
    if spec.log_y is None or spec.log_y:
        ax.set_yscale("log")
    if spec.log_x:
        ax.set_xscale("log")
    ax.set_xlabel(x_label)
    ax.set_ylabel("consensus error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return fig


def _feasibility_map(spec: FigureSpec) -> plt.Figure:
    rows = read_summary(spec.input_dir)
    gammas = sorted({r["gamma"] for r in rows})
    ns = sorted({r["n"] for r in rows})
    if len(gammas) < 1 or len(ns) < 1:
        raise PlotInputError("feasibility map needs gamma and n axes")
    grid = np.full((len(gammas), len(ns)), np.nan)
    diverged = np.zeros_like(grid, dtype=bool)
    for r in rows:
        gi, ni = gammas.index(r["gamma"]), ns.index(r["n"])
        converged = r["diverged_count"] == 0 and r["mean_rounds"] is not None
        if converged:
            grid[gi, ni] = r["mean_rounds"]
        else:
            diverged[gi, ni] = True
    fig, ax = plt.subplots(figsize=(5.6, 3.9))
    masked = np.ma.masked_invalid(grid)
    norm = LogNorm() if masked.count() else None
    mesh = ax.pcolormesh(
        np.arange(len(ns) + 1), np.arange(len(gammas) + 1), masked, norm=norm, cmap="viridis"
    )
    if masked.count():
        fig.colorbar(mesh, ax=ax, label="rounds to reach epsilon")
    # hatch the cells whose runs diverged
    for gi in range(len(gammas)):
        for ni in range(len(ns)):
            if diverged[gi, ni]:
                ax.add_patch(
                    Rectangle((ni, gi), 1, 1, fill=False, hatch="///", edgecolor="red", lw=0.5)
                )
    ax.set_xticks(np.arange(len(ns)) + 0.5, [str(n) for n in ns])
    ax.set_yticks(np.arange(len(gammas)) + 0.5, [format(g, "g") for g in gammas])
    ax.set_xlabel("network size n")
    ax.set_ylabel("step-size")
    return fig
