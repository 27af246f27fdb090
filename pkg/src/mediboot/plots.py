"""Figure rendering for the report paths of the command-line tool.

Every function writes a PNG next to the delimited output it illustrates.
Rendering always uses the Agg backend so it works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import InputError
from .mc_harness import NcrfTable


def render_exact_curves(grid: np.ndarray, pdf: np.ndarray, cdf: np.ndarray, path: str) -> str:
    """Density and distribution function of the product estimator on a grid."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    finite = np.isfinite(pdf)
    ax1.plot(grid[finite], pdf[finite], lw=1.2)
    ax1.set_title("density")
    ax1.set_xlabel("g")
    ax2.plot(grid, cdf, lw=1.2)
    ax2.set_title("distribution function")
    ax2.set_xlabel("g")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_calibration_curve(curve: list[tuple[float, float]], path: str) -> str:
    """Estimated coverage against nominal level, with the 45-degree line."""
    if not curve:
        raise InputError("empty calibration curve")
    nom, cov = zip(*curve)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.plot([0, 1], [0, 1], color="grey", lw=0.8, ls="--")
    ax.plot(nom, cov, marker="o", ms=3, lw=1.0)
    ax.set_xlabel("nominal level")
    ax.set_ylabel("estimated coverage")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_ncrf_chart(table: NcrfTable, path: str) -> str:
    """Left/right non-coverage per (scheme, method) cell as paired bars."""
    keys = sorted(table.rows)
    labels = [f"{k[0]}\n{k[1]}" for k in keys]
    left = [table.left_pct(k) for k in keys]
    right = [table.right_pct(k) for k in keys]
    pos = np.arange(len(keys))
    fig, ax = plt.subplots(figsize=(max(6, 0.8 * len(keys)), 4))
    ax.bar(pos - 0.18, left, width=0.36, label="left")
    ax.bar(pos + 0.18, right, width=0.36, label="right")
    alpha = 1.0 - table.level
    ax.axhline(100 * alpha / 2, color="grey", lw=0.8, ls="--")
    ax.set_xticks(pos, labels, fontsize=7)
    ax.set_ylabel("non-coverage %")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_scatter(table: NcrfTable, method_key: tuple[str, str], path: str) -> str:
    """Per-replication (theta_hat, beta_m_hat) points, colored by coverage."""
    if not table.scatter:
        raise InputError("table carries no scatter records; rerun with collect_scatter")
    th = np.array([row[1] for row in table.scatter])
    bm = np.array([row[2] for row in table.scatter])
    cov = np.array([row[3].get(method_key, False) for row in table.scatter])
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.scatter(th[cov], bm[cov], s=4, color="tab:blue", label="covered")
    ax.scatter(th[~cov], bm[~cov], s=6, color="tab:red", label="missed")
    ax.set_xlabel("theta_x estimate")
    ax.set_ylabel("beta_m estimate")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
