"""Render figure analogs from magsqueeze CSV outputs.

Five figure kinds, one per output family of the simulator:

    timeseries  trajectory CSV(s) -> two panels, V_min(t) and S(t), one
                curve per input branch
    family      sweep_kappa.csv / sweep_temperature.csv -> S(t) curve per
                sweep value
    heatmap     grid_maxS.csv -> S_max over the kappa x gamma grid
    wigner      wigner.csv -> filled contour of W(alpha), equal aspect
    phase       phase_sweep.csv -> S over (t, relative drive phase) with the
                S <= 0 region shaded gray

Inputs are never mutated; rendering is deterministic for fixed inputs and
options (Agg backend, fixed figure geometry, pinned SVG hash salt, no date
metadata), so image bytes can be regression-hashed within one environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["PlotError", "PlotSpec", "KINDS", "load_csv", "build_figure", "render"]

KINDS = ("timeseries", "family", "heatmap", "wigner", "phase")

GRAY = (0.55, 0.55, 0.55)
_RC = {
    "svg.hashsalt": "magsqueeze",
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 10,
}


class PlotError(ValueError):
    """Malformed input or plot specification."""


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple[Path, ...]
    output: Path
    title: str = ""
    colormap: str = "viridis"
    also_svg: bool = False
    labels: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "timeseries":
            if len(self.inputs) not in (1, 2):
                raise PlotError("timeseries takes one or two trajectory CSVs")
        elif len(self.inputs) != 1:
            raise PlotError(f"{self.kind} takes exactly one input CSV")


def load_csv(path: Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise PlotError(f"input CSV not found: {path}")
    text = path.read_text().strip()
    if not text:
        raise PlotError(f"input CSV is empty: {path}")
    lines = text.split("\n")
    header = [h.strip() for h in lines[0].split(",")]
    if len(lines) < 2:
        raise PlotError(f"input CSV has no data rows: {path}")
    try:
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise PlotError(f"non-numeric cell in {path}: {exc}") from None
    if rows.shape[1] != len(header):
        raise PlotError(f"ragged CSV {path}: {rows.shape[1]} columns vs {len(header)} headers")
    return header, rows


def _require_columns(header: list[str], needed: tuple[str, ...], path) -> dict[str, int]:
    missing = [c for c in needed if c not in header]
    if missing:
        raise PlotError(f"{path} is missing required column(s): {missing}")
    return {c: header.index(c) for c in needed}


def _sweep_columns(header: list[str], path) -> list[tuple[str, int]]:
    if header[0] != "t_ns":
        raise PlotError(f"{path} must start with a t_ns column, got {header[0]!r}")
    cols = [(h, i) for i, h in enumerate(header) if i > 0 and h.startswith("S_dB_")]
    if not cols:
        raise PlotError(f"{path} has no S_dB_* sweep columns")
    return cols


def build_figure(spec: PlotSpec):
    """Create the matplotlib Figure for a spec (not yet saved)."""
    with plt.rc_context(_RC):
        builder = {
            "timeseries": _fig_timeseries,
            "family": _fig_family,
            "heatmap": _fig_heatmap,
            "wigner": _fig_wigner,
            "phase": _fig_phase,
        }[spec.kind]
        fig = builder(spec)
        if spec.title:
            fig.suptitle(spec.title)
        return fig


def render(spec: PlotSpec) -> list[Path]:
    """Render the figure to ``spec.output`` (and a sibling .svg if asked).

    All inputs are validated before any file is written.
    """
    fig = build_figure(spec)
    try:
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        written = []
        with plt.rc_context(_RC):
            fig.savefig(spec.output, metadata=_clean_metadata(spec.output))
            written.append(spec.output)
            if spec.also_svg:
                sibling = spec.output.with_suffix(".svg")
                fig.savefig(sibling, metadata=_clean_metadata(sibling))
                written.append(sibling)
        return written
    finally:
        plt.close(fig)


def _clean_metadata(path: Path) -> dict | None:
    # strip volatile metadata so identical inputs give identical bytes
    if path.suffix.lower() == ".svg":
        return {"Date": None}
    if path.suffix.lower() == ".png":
        return {"Software": None}
    return None


def _branch_labels(spec: PlotSpec) -> list[str]:
    if spec.labels:
        return list(spec.labels)
    return [Path(p).stem.replace("timeseries_", "").replace("trajectory_", "")
            for p in spec.inputs]


def _fig_timeseries(spec: PlotSpec):
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    ax_v, ax_s = axes
    labels = _branch_labels(spec)
    for path, label, color in zip(spec.inputs, labels, ("black", "tab:red")):
        header, rows = load_csv(path)
        cols = _require_columns(header, ("t_ns", "V_min", "S_dB"), path)
        t_us = rows[:, cols["t_ns"]] * 1e-3
        lw = 1.6 if color == "black" else 1.0
        ax_v.plot(t_us, rows[:, cols["V_min"]], color=color, lw=lw, label=label)
        ax_s.plot(t_us, rows[:, cols["S_dB"]], color=color, lw=lw, label=label)
    ax_v.axhline(0.5, color=GRAY, lw=0.8, ls="--")
    ax_v.set_ylabel(r"$V_\mathrm{min}(X_\theta)$")
    ax_s.axhline(0.0, color=GRAY, lw=0.8, ls="--")
    ax_s.set_ylabel(r"$S$ (dB)")
    ax_s.set_xlabel(r"$t$ ($\mu$s)")
    ax_v.legend(frameon=False)
    fig.align_ylabels(axes)
    return fig


def _fig_family(spec: PlotSpec):
    path = spec.inputs[0]
    header, rows = load_csv(path)
    cols = _sweep_columns(header, path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    t_us = rows[:, 0] * 1e-3
    cmap = plt.get_cmap(spec.colormap)
    for i, (name, idx) in enumerate(cols):
        frac = i / max(1, len(cols) - 1)
        label = name.removeprefix("S_dB_").replace("_", " = ")
        ax.plot(t_us, rows[:, idx], color=cmap(0.15 + 0.7 * frac), label=label)
    ax.axhline(0.0, color=GRAY, lw=0.8, ls="--")
    ax.set_xlabel(r"$t$ ($\mu$s)")
    ax.set_ylabel(r"$S$ (dB)")
    ax.legend(frameon=False, fontsize=8)
    return fig


def _fig_heatmap(spec: PlotSpec):
    path = spec.inputs[0]
    header, rows = load_csv(path)
    cols = _require_columns(header, ("kappa", "gamma", "S_max"), path)
    kappas = np.unique(rows[:, cols["kappa"]])
    gammas = np.unique(rows[:, cols["gamma"]])
    grid = np.full((len(gammas), len(kappas)), np.nan)
    for row in rows:
        i = np.searchsorted(gammas, row[cols["gamma"]])
        j = np.searchsorted(kappas, row[cols["kappa"]])
        grid[i, j] = row[cols["S_max"]]
    if np.isnan(grid).any():
        raise PlotError(f"{path} does not contain a complete kappa x gamma grid")
    fig, ax = plt.subplots(figsize=(5.6, 4.4))
    mesh = ax.imshow(grid, origin="lower", aspect="auto", cmap=spec.colormap)
    ax.set_xticks(range(len(kappas)), [f"{v:g}" for v in kappas])
    ax.set_yticks(range(len(gammas)), [f"{v:g}" for v in gammas])
    ax.set_xlabel(r"$\kappa/2\pi$ (MHz)")
    ax.set_ylabel(r"$\gamma/2\pi$ (MHz)")
    fig.colorbar(mesh, ax=ax, label=r"$S_\mathrm{max}$ (dB)")
    return fig


def _fig_wigner(spec: PlotSpec):
    path = spec.inputs[0]
    header, rows = load_csv(path)
    cols = _require_columns(header, ("re_alpha", "im_alpha", "W"), path)
    re = np.unique(rows[:, cols["re_alpha"]])
    im = np.unique(rows[:, cols["im_alpha"]])
    w = np.full((len(im), len(re)), np.nan)
    for row in rows:
        i = np.searchsorted(im, row[cols["im_alpha"]])
        j = np.searchsorted(re, row[cols["re_alpha"]])
        w[i, j] = row[cols["W"]]
    if np.isnan(w).any():
        raise PlotError(f"{path} does not contain a complete phase-space grid")
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    bound = max(abs(w.min()), abs(w.max())) or 1.0
    mesh = ax.contourf(re, im, w, levels=41, cmap="RdBu_r", vmin=-bound, vmax=bound)
    ax.set_aspect("equal")
    ax.set_xlabel(r"Re $\alpha$")
    ax.set_ylabel(r"Im $\alpha$")
    fig.colorbar(mesh, ax=ax, label=r"$W(\alpha)$")
    return fig


def _fig_phase(spec: PlotSpec):
    path = spec.inputs[0]
    header, rows = load_csv(path)
    cols = _sweep_columns(header, path)
    if not all(name.startswith("S_dB_dphi_") for name, _ in cols):
        raise PlotError(f"{path} does not look like a phase sweep (S_dB_dphi_* columns)")
    phis = np.array([float(name.rsplit("_", 1)[1]) for name, _ in cols])
    t_us = rows[:, 0] * 1e-3
    s = rows[:, [idx for _, idx in cols]]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    positive = np.ma.masked_less_equal(s.T, 0.0)
    cmap = plt.get_cmap(spec.colormap).copy()
    cmap.set_bad(GRAY)  # gray area marks S <= 0
    mesh = ax.pcolormesh(t_us, phis, positive, cmap=cmap, shading="nearest")
    ax.set_xlabel(r"$t$ ($\mu$s)")
    ax.set_ylabel(r"$\delta\phi$ (rad)")
    ax.set_yticks([0, np.pi, 2 * np.pi], ["0", r"$\pi$", r"$2\pi$"])
    fig.colorbar(mesh, ax=ax, label=r"$S$ (dB), gray: $S \leq 0$")
    return fig
