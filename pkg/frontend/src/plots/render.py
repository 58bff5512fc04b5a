"""Deterministic figure rendering from CSV artifacts.

The CSV is the single source of numeric truth: this module only reads
columns, optionally applies the spec's declared presentation rescaling, and
draws.  Output bytes are a pure function of (spec, CSV): the Agg backend is
forced and no timestamps are embedded in the image data.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from plots.figspec import FigureSpec  # noqa: E402


class SchemaError(ValueError):
    """Input CSV columns do not match the figure spec's bindings."""

    def __init__(self, missing, present):
        self.missing = sorted(missing)
        self.present = sorted(present)
        super().__init__(
            f"missing columns: {self.missing}; columns present: {self.present}"
        )


def read_columns(path: Path, required) -> dict:
    """Load the required columns as float arrays; hard error on a mismatch."""
    if not path.is_file():
        raise FileNotFoundError(f"input CSV not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(required, []) from None
        rows = list(reader)
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(missing, header)
    idx = {c: header.index(c) for c in required}
    out = {}
    for c in required:
        vals = []
        for row in rows:
            try:
                vals.append(float(row[idx[c]]))
            except (ValueError, IndexError):
                vals.append(math.nan)
        out[c] = np.asarray(vals)
    return out


def _apply_scale(spec: FigureSpec, x, y, se):
    if spec.scale == "x":
        f = x
    elif spec.scale == "x_over_logx":
        f = x / np.log(np.maximum(x, np.e))
    else:
        return y, se
    return y * f, (se * f if se is not None else None)


def _finite_rows(x, y, se):
    keep = np.isfinite(x) & np.isfinite(y)
    if se is not None:
        se = np.where(np.isfinite(se), se, 0.0)[keep]
    return x[keep], y[keep], se


def _draw_reference(ax, spec: FigureSpec):
    if spec.reference is not None:
        ax.axhline(
            spec.reference, color="crimson", linestyle="--", linewidth=1.2,
            label=f"reference = {spec.reference:g}",
        )


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path."""
    cols = read_columns(spec.input, spec.required_columns)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=150)
    try:
        if spec.kind == "histogram-vs-exponential":
            _render_histogram(ax, spec, cols)
        else:
            _render_curve(ax, spec, cols)
        ax.set_title(spec.title)
        ax.set_xlabel(spec.xlabel or (spec.x if spec.kind != "histogram-vs-exponential" else spec.y))
        ax.set_ylabel(spec.ylabel or spec.y)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(frameon=False, fontsize=9)
        fig.tight_layout()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        # strip volatile metadata so output bytes depend only on the inputs
        metadata = {"Date": None} if spec.output.suffix == ".svg" else {}
        fig.savefig(spec.output, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.output


def _render_curve(ax, spec: FigureSpec, cols):
    x = cols[spec.x]
    y = cols[spec.y]
    se = cols[spec.se] if spec.se else None
    x, y, se = _finite_rows(x, y, se)
    y, se = _apply_scale(spec, x, y, se)
    if x.size:
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        se = se[order] if se is not None else None
        if spec.kind == "ratio-band" and se is not None:
            ax.fill_between(
                x, y - spec.band * se, y + spec.band * se,
                alpha=0.25, color="steelblue",
                label=f"±{spec.band:g} SE",
            )
            ax.plot(x, y, "o-", color="steelblue")
        elif se is not None:
            ax.errorbar(x, y, yerr=spec.band * se, fmt="o-", capsize=3,
                        color="steelblue", label=f"±{spec.band:g} SE")
        else:
            ax.plot(x, y, "o-", color="steelblue")
        if spec.kind in ("ladder", "plateau") and x.min() > 0 and x.max() / x.min() > 50:
            ax.set_xscale("log")
    _draw_reference(ax, spec)


def _render_histogram(ax, spec: FigureSpec, cols):
    vals = cols[spec.y]
    vals = vals[np.isfinite(vals)]
    if vals.size:
        ax.hist(
            vals, bins=spec.bins, density=True, color="steelblue", alpha=0.6,
            label=f"samples (n={vals.size})",
        )
        grid = np.linspace(0.0, max(float(vals.max()), 1.0), 400)
        ax.plot(grid, np.exp(-grid), color="crimson", linewidth=1.5,
                label="unit exponential density")
    _draw_reference(ax, spec)
