"""Figure rendering.

Every figure is written as a self-contained SVG.  Text stays as SVG text
and the file carries no timestamp, so identical inputs give identical bytes.
"""

from __future__ import annotations

from contextlib import contextmanager

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.stats import gaussian_kde, norm  # noqa: E402

GREEN = "#2ca02c"
BLUE = "#1f77b4"
GRAY = "#7f7f7f"
RED = "#d62728"

STYLE = {
    "svg.fonttype": "none",
    "svg.hashsalt": "progadjust",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "figure.dpi": 100,
}


@contextmanager
def figure(path, nrows=1, ncols=1, figsize=(6, 4.5), **kw):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(nrows, ncols, figsize=figsize, **kw)
        try:
            yield fig, axes
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)


def plot_fraction_grid(grid, path, annotate=None):
    """Heatmap of ``1 - R^2 rho^2``; R^2 on the horizontal axis, rho vertical."""
    r2, rho, fr = grid.r2_values, grid.rho_values, grid.fractions
    if annotate is None:
        annotate = fr.size <= 400
    with figure(path, figsize=(6.5, 5.5)) as (fig, ax):
        mesh = ax.pcolormesh(_edges(r2), _edges(rho), fr, cmap="viridis", vmin=0, vmax=1,
                             shading="flat")
        cbar = fig.colorbar(mesh, ax=ax, label="adjusted / unadjusted residual variance")
        cbar.solids.set_rasterized(False)  # keep the file purely vector
        if annotate:
            for i, rv in enumerate(rho):
                for j, xv in enumerate(r2):
                    ax.text(xv, rv, f"{fr[i, j]:.2f}", ha="center", va="center", fontsize=5,
                            color="white" if fr[i, j] < 0.6 else "black")
        ax.set_xlabel(r"$R^2$")
        ax.set_ylabel(r"$\rho$")
        ax.set_title("Fraction of residual variance (= sample size fraction)")


def _edges(centers):
    c = np.asarray(centers, dtype=float)
    if c.size == 1:
        return np.array([c[0] - 0.5, c[0] + 0.5])
    mid = (c[1:] + c[:-1]) / 2
    return np.concatenate([[2 * c[0] - mid[0]], mid, [2 * c[-1] - mid[-1]]])


def score_density(samples, points=512):
    """Gaussian-kernel density (Silverman bandwidth) on an even grid."""
    s = np.asarray(samples, dtype=float)
    kde = gaussian_kde(s, bw_method="silverman")
    lo, hi = s.min(), s.max()
    grid = np.linspace(lo, hi, points)
    return grid, kde(grid)


def plot_score_density(samples, path):
    grid, dens = score_density(samples)
    with figure(path, figsize=(5.5, 4)) as (fig, ax):
        ax.plot(grid, dens, color="black", label="kernel density")
        ax.plot(grid, norm.pdf(grid), color=RED, linestyle="--", label="N(0, 1)")
        ax.set_xlabel("standardized prognostic score s(X)")
        ax.set_ylabel("density")
        ax.legend()


def _cells(results):
    r2s = sorted({s.r2 for s in results.summaries})
    nhs = sorted({s.n_hist for s in results.summaries})
    return r2s, nhs


def _grouped_boxplots(ax, results, column, r2s, nhs, transform=lambda v: v):
    """One box per (n_hist, R^2) cell; returns box x positions keyed by cell."""
    width = 0.8 / len(nhs)
    positions = {}
    colors = plt.get_cmap("Greys")(np.linspace(0.3, 0.8, len(nhs)))
    for b, nh in enumerate(nhs):
        data, pos = [], []
        for a, r2 in enumerate(r2s):
            vals = results.column(column, r2=r2, n_hist=nh)
            if vals.size == 0:
                continue
            data.append(transform(vals))
            pos.append(a + (b - (len(nhs) - 1) / 2) * width)
            positions[(r2, nh)] = pos[-1]
        if data:
            bp = ax.boxplot(data, positions=pos, widths=width * 0.85, patch_artist=True,
                            showfliers=False, manage_ticks=False)
            for patch in bp["boxes"]:
                patch.set_facecolor(colors[b])
            ax.plot([], [], marker="s", linestyle="", color=colors[b], label=f"n_hist = {nh}")
    ax.set_xticks(range(len(r2s)))
    ax.set_xticklabels([f"{r:g}" for r in r2s])
    ax.set_xlabel(r"$R^2$")
    return positions, width


def plot_variance_fractions(results, path):
    """Residual-variance fractions without and with score adjustment.

    Each adjusted box carries two short lines: the theoretical fraction at
    the cell's median rho_hat (green) and the design factor 1 - R2_oos
    (blue, dashed).
    """
    r2s, nhs = _cells(results)
    sigma2 = results.config.sigma2
    with figure(path, 1, 2, figsize=(10, 4.5), sharey=True) as (fig, (left, right)):
        _grouped_boxplots(left, results, "var_unadj", r2s, nhs, lambda v: v / sigma2)
        left.set_title("E(Y | z)")
        left.set_ylabel("residual variance / sigma^2")
        pos, width = _grouped_boxplots(right, results, "var_adj", r2s, nhs, lambda v: v / sigma2)
        right.set_title("E(Y | z, estimated score)")
        for s in results.summaries:
            x = pos.get((s.r2, s.n_hist))
            if x is None:
                continue
            half = width * 0.45
            right.plot([x - half, x + half], [s.overlay_theory] * 2, color=GREEN, lw=2)
            right.plot([x - half, x + half], [s.overlay_design] * 2, color=BLUE, lw=2,
                       linestyle="--")
        right.plot([], [], color=GREEN, lw=2, label=r"theory $1 - R^2\hat\rho^2$")
        right.plot([], [], color=BLUE, lw=2, linestyle="--",
                   label=r"design factor $1 - \hat R^2_{OOS}$")
        right.legend(fontsize=7, loc="lower left")
        left.legend(fontsize=7, loc="lower left")


def plot_treatment_effects(results, path):
    """Treatment-effect estimates without and with adjustment, true effect as a line."""
    r2s, nhs = _cells(results)
    beta = results.config.beta
    with figure(path, 1, 2, figsize=(10, 4.5), sharey=True) as (fig, (left, right)):
        for ax, col, title in ((left, "beta_unadj", "E(Y | z)"),
                               (right, "beta_adj", "E(Y | z, estimated score)")):
            _grouped_boxplots(ax, results, col, r2s, nhs)
            ax.axhline(beta, color=RED, lw=1.2, label=f"beta = {beta:g}")
            ax.set_title(title)
        left.set_ylabel("treatment effect estimate")
        right.legend(fontsize=7, loc="lower left")
