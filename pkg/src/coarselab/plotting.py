"""Figure output for spectra, gap profiles, and net overlays.

Everything renders through the Agg backend and is written atomically with
timestamps stripped, so a rerun with the same inputs reproduces the same
bytes (SVG element ids are salted with a fixed string for the same reason).
"""

from __future__ import annotations

import os
import tempfile
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "coarselab"

import matplotlib.pyplot as plt
import numpy as np

from .spaces import FiniteCoarseSpace

__all__ = ["spectrum_strip", "gap_profile", "net_overlay"]


def _save(fig, path: str) -> None:
    # Date=None drops the creation timestamp SVG would otherwise embed.
    ext = os.path.splitext(path)[1].lstrip(".").lower() or "svg"
    meta = {"Date": None} if ext == "svg" else None
    out_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix="." + ext)
    try:
        with os.fdopen(fd, "wb") as fh:
            fig.savefig(fh, format=ext, metadata=meta)
        os.replace(tmp, path)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def spectrum_strip(eigenvalues: Sequence[float], path: str,
                   title: Optional[str] = None) -> None:
    """One tick per eigenvalue on a horizontal strip."""
    vals = np.sort(np.asarray(eigenvalues, dtype=float))
    fig, ax = plt.subplots(figsize=(6.4, 1.5))
    if vals.size:
        ax.eventplot(vals, orientation="horizontal", colors="k",
                     linewidths=0.8, linelengths=0.8)
        lo, hi = float(vals[0]), float(vals[-1])
        pad = 0.05 * max(hi - lo, 1e-12)
        ax.set_xlim(lo - pad, hi + pad)
    ax.set_yticks([])
    ax.set_xlabel("eigenvalue")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def gap_profile(levels: Sequence[float], gaps: Sequence[float], path: str,
                threshold: Optional[float] = None) -> None:
    """Spectral gap against warp level, log-2 horizontal axis."""
    ts = np.asarray(levels, dtype=float)
    gs = np.asarray(gaps, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(ts, gs, marker="o", markersize=4, color="k", linewidth=1.0)
    if threshold is not None:
        ax.axhline(threshold, color="0.55", linestyle="--", linewidth=0.8)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("t")
    ax.set_ylabel("gap")
    ax.grid(True, which="both", linewidth=0.3, alpha=0.4)
    fig.tight_layout()
    _save(fig, path)


def net_overlay(space: FiniteCoarseSpace, net_points: Sequence, path: str) -> None:
    """Net members picked out against the ambient space.

    With 1- or 2-d coordinates this is a scatter overlay; spaces carrying
    only a distance table fall back to a weight bar chart.
    """
    mask = np.zeros(space.n, dtype=bool)
    for p in net_points:
        mask[space.index_of(p)] = True
    coords = space.coords
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    if coords is not None and coords.shape[1] <= 2:
        x = coords[:, 0]
        y = coords[:, 1] if coords.shape[1] == 2 else np.zeros(space.n)
        ax.scatter(x[~mask], y[~mask], s=12, c="0.75", linewidths=0)
        ax.scatter(x[mask], y[mask], s=30, c="k", linewidths=0)
        ax.set_aspect("equal", adjustable="datalim")
        if coords.shape[1] == 1:
            ax.set_yticks([])
    else:
        idx = np.arange(space.n)
        ax.bar(idx[~mask], space.mu[~mask], color="0.75", width=0.9)
        ax.bar(idx[mask], space.mu[mask], color="k", width=0.9)
        ax.set_xlabel("point index")
        ax.set_ylabel("weight")
    ax.set_title(f"net: {int(mask.sum())} of {space.n} points", fontsize=10)
    fig.tight_layout()
    _save(fig, path)
