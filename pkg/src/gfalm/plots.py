"""Headless figure rendering for run reports.

Every function takes already-computed data plus an output path, writes one
PNG, closes the figure, and returns the path.  Nothing here feeds back into
the numerics; the CLI report commands call these next to the CSV/JSON
emission (pass ``--no-figures`` there to skip rendering entirely).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

_DPI = 140


def convergence_figure(records, out_path: str | Path, title: str = "") -> Path:
    """Residual/error history (semilog) and energy trace of one solve."""
    out_path = Path(out_path)
    n = np.array([r.n for r in records])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 3.8))

    ax1.semilogy(n, [r.residual_linf for r in records], label=r"max residual")
    ax1.semilogy(n, [r.residual_hm1 for r in records], label=r"dual-norm residual")
    errs = [r.err_h1 for r in records]
    if all(e is not None for e in errs):
        ax1.semilogy(n, errs, label=r"$H^1$ error vs reference")
    ax1.set_xlabel("iteration $n$")
    ax1.legend(fontsize=8)
    ax1.grid(True, which="both", alpha=0.3)

    q = np.array([r.Q for r in records])
    ax2.plot(n, q)
    ax2.set_xlabel("iteration $n$")
    ax2.set_ylabel("$Q(u^n)$")
    ax2.grid(True, alpha=0.3)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def state_figure(field, out_path: str | Path, title: str = "") -> Path:
    """Final state: |u| and Re u over x in 1D, |u| heat map in 2D."""
    out_path = Path(out_path)
    grid = field.grid
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    if grid.dims == 1:
        x = grid.axis_points(0)
        ax.plot(x, np.abs(field.values), label="|u|")
        ax.plot(x, field.values.real, "--", label="Re u", alpha=0.7)
        ax.set_xlabel("x")
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
    else:
        x, y = grid.axis_points(0), grid.axis_points(1)
        im = ax.pcolormesh(x, y, np.abs(field.values).T, shading="nearest")
        ax.set_xlabel("$x_1$")
        ax.set_ylabel("$x_2$")
        ax.set_aspect("equal")
        fig.colorbar(im, ax=ax, label="|u|")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def rate_figure(series: dict, out_path: str | Path, quantity: str = "error") -> Path:
    """Per-tau decay histories with their fitted exponential trends.

    ``series`` maps tau -> (n, values, fit-or-None); fits are drawn dashed
    over the iteration range they were computed on.
    """
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for tau in sorted(series, reverse=True):
        n, vals, fit = series[tau]
        n = np.asarray(n, dtype=float)
        vals = np.asarray(vals, dtype=float)
        (line,) = ax.semilogy(n, vals, label=rf"$\tau = {tau:g}$")
        if fit is not None:
            trend = np.exp(fit.intercept + fit.slope * n)
            keep = (trend >= np.min(vals[vals > 0])) & (trend <= np.max(vals))
            ax.semilogy(n[keep], trend[keep], "--", color=line.get_color(), alpha=0.6)
    ax.set_xlabel("iteration $n$")
    ax.set_ylabel(quantity)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def flow_figure(records, out_path: str | Path, q_limit: float | None = None) -> Path:
    """Continuous-flow history: energy gap / error decay and constraint drift."""
    out_path = Path(out_path)
    t = np.array([r.t for r in records])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.6, 3.8))

    if q_limit is not None:
        gap = np.array([r.Q for r in records]) - q_limit
        pos = gap > 0
        if np.any(pos):
            ax1.semilogy(t[pos], gap[pos], label=r"$Q(u(t)) - Q_\infty$")
    errs = [r.err_h1 for r in records]
    if all(e is not None for e in errs):
        e = np.array(errs)
        pos = e > 0
        ax1.semilogy(t[pos], e[pos], label=r"$H^1$ error vs reference")
    ax1.set_xlabel("t")
    ax1.legend(fontsize=8)
    ax1.grid(True, which="both", alpha=0.3)

    drift = np.array([r.constraint_drift for r in records])
    ax2.plot(t, drift)
    ax2.set_xlabel("t")
    ax2.set_ylabel("constraint drift")
    ax2.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path


def probe_figure(probe_dict: dict, eigenvalues, out_path: str | Path) -> Path:
    """Geometry probe report: growth ratios by scale and lowest eigenvalues."""
    out_path = Path(out_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 3.8))

    scales = [s["scale"] for s in probe_dict["samples"]]
    ratios = [s["ratio"] for s in probe_dict["samples"]]
    ax1.scatter(scales, ratios, s=18, alpha=0.8)
    ax1.set_xscale("log")
    ax1.set_xlabel(r"tangent scale $\|\xi\|_{1,h}$")
    ax1.set_ylabel(r"$(Q(u) - Q_g)/\|u - u_g\|_{1,h}^2$")
    ax1.grid(True, which="both", alpha=0.3)

    ev = np.asarray(eigenvalues, dtype=float)
    ax2.bar(np.arange(ev.size), ev, width=0.6)
    ax2.axhline(0.0, color="k", lw=0.8)
    ax2.set_xlabel("eigenvalue index")
    ax2.set_ylabel("tangent-space eigenvalues")
    ax2.grid(True, axis="y", alpha=0.3)

    fig.tight_layout()
    fig.savefig(out_path, dpi=_DPI)
    plt.close(fig)
    return out_path
