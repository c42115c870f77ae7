"""Matplotlib rendering for the report path.

Every CLI command that writes delimited output can also render a figure next
to it.  All rendering targets files (Agg backend); nothing here affects the
numerics.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_table",
    "render_trajectories",
    "render_eps_sweep",
    "render_classical_drift",
    "render_cdf",
]

_RC = {
    "figure.figsize": (7.0, 4.4),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _styled():
    return plt.rc_context(_RC)


def render_table(table, path, title: str) -> None:
    with _styled():
        fig, ax = plt.subplots()
        im = ax.imshow(table.values, cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(table.cols)),
                      [f"{table.col_label}={c:g}" for c in table.cols])
        ax.set_yticks(range(len(table.rows)),
                      [f"{table.row_label}={r:g}" for r in table.rows])
        for i in range(len(table.rows)):
            for j in range(len(table.cols)):
                ax.text(j, i, f"{table.values[i, j]:.3f}", ha="center",
                        va="center", color="w")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, label="value at (0, x0)")
        fig.savefig(path)
        plt.close(fig)


def render_trajectories(result, path, title: str) -> None:
    with _styled():
        fig, axes = plt.subplots(1, 2, figsize=(9.5, 4.0), sharex=True)
        for pid in sorted(result.dump):
            _, _, x, _, m = result.dump[pid]
            axes[0].plot(result.times, x, lw=0.7, alpha=0.7)
            axes[1].plot(result.times, m, lw=0.7, alpha=0.7)
        axes[0].set_xlabel("t")
        axes[0].set_ylabel("state")
        axes[1].set_xlabel("t")
        axes[1].set_ylabel("discounted stopped value")
        axes[1].plot(result.times, result.mean_m_by_time, "k--", lw=1.6,
                     label="sample mean")
        axes[1].legend()
        fig.suptitle(title)
        fig.savefig(path)
        plt.close(fig)


def render_eps_sweep(sweep, path, title: str) -> None:
    with _styled():
        fig, ax = plt.subplots()
        ax.semilogx(sweep.eps_values, sweep.values, "o-", label="value at (0, x0)")
        ax.set_xlabel("cutoff width")
        ax.set_ylabel("value")
        ax.legend()
        ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)


def render_classical_drift(check, path, title: str) -> None:
    with _styled():
        fig, ax = plt.subplots()
        ax.plot(check.times, check.mean_m_by_time, "o-")
        ax.axhline(check.mean_m_by_time[0], color="k", ls="--", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("mean discounted stopped value")
        ax.set_title(f"{title} (drift statistic {check.drift_statistic:.2%})")
        fig.savefig(path)
        plt.close(fig)


def render_cdf(law, path, title: str) -> None:
    with _styled():
        fig, ax = plt.subplots()
        ax.plot(law.a_grid, law.cdf, label="increment law")
        from .gheat import _scaled_normal_cdf

        ax.plot(law.a_grid, _scaled_normal_cdf(law.a_grid, law.gf.sigma_hi_sq),
                "--", lw=0.9, label="upper constant volatility")
        ax.plot(law.a_grid, _scaled_normal_cdf(law.a_grid, law.gf.sigma_lo_sq),
                ":", lw=0.9, label="lower constant volatility")
        ax.set_xlabel("level")
        ax.set_ylabel("upper distribution function")
        ax.legend()
        ax.set_title(title)
        fig.savefig(path)
        plt.close(fig)
