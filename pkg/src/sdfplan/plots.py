"""Report figures rendered alongside the delimited outputs.

All functions write PNG files; the Agg backend keeps them headless-safe.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sdfplan.planner import PlanResult
from sdfplan.scenes import Box2D, Circle, Polygon, Scene2D
from sdfplan.timeparam import TimedTrajectory


def _draw_scene2d(ax, scene: Scene2D) -> None:
    for prim in scene.obstacles:
        if isinstance(prim, Circle):
            ax.add_patch(plt.Circle(prim.center, prim.radius, color="0.3"))
        elif isinstance(prim, Box2D):
            lo = prim.center - prim.half_extents
            ax.add_patch(plt.Rectangle(lo, *(2 * prim.half_extents), color="0.3"))
        elif isinstance(prim, Polygon):
            ax.add_patch(plt.Polygon(prim.vertices, closed=True, color="0.3"))
    ax.plot(*scene.start, "g^", markersize=9, label="start")
    ax.plot(*scene.goal, "r*", markersize=12, label="goal")
    ax.set_xlim(scene.bounds_min[0], scene.bounds_max[0])
    ax.set_ylim(scene.bounds_min[1], scene.bounds_max[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")


def plot_plan2d(
    scene: Scene2D,
    result: PlanResult,
    path: str | Path,
    first_samples: np.ndarray | None = None,
    last_samples: np.ndarray | None = None,
) -> None:
    """Scene map with initial/final means and optional sample bundles."""
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_scene2d(ax, scene)
    if first_samples is not None:
        for row in first_samples[:30]:
            ax.plot(row[:, 0], row[:, 1], color="tab:red", alpha=0.15, lw=0.7)
    if last_samples is not None:
        for row in last_samples[:30]:
            ax.plot(row[:, 0], row[:, 1], color="tab:blue", alpha=0.2, lw=0.7)
    if result.means:
        first = result.means[0]
        ax.plot(first[:, 0], first[:, 1], "r--", lw=1.2, label="first-iteration mean")
    final = result.final.states
    ax.plot(final[:, 0], final[:, 1], "b-o", lw=1.8, markersize=3, label="final")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def plot_iteration_curves(result: PlanResult, path: str | Path) -> None:
    """Obstacle cost of the mean and the sigma_f schedule per iteration."""
    it = np.arange(result.iterations)
    fig, ax1 = plt.subplots(figsize=(6.5, 4))
    ax1.plot(it, result.obs_cost, "k-", lw=1.6, label="obstacle cost of mean")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("obstacle cost")
    ax2 = ax1.twinx()
    ax2.plot(it, result.sigma_f, color="purple", lw=1.6, label="sigma_f")
    ax2.set_ylabel("sigma_f")
    lines = ax1.get_lines() + ax2.get_lines()
    ax1.legend(lines, [ln.get_label() for ln in lines], loc="center right", fontsize=8)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def plot_timed_profile(
    tt: TimedTrajectory,
    path: str | Path,
    vel_limits: np.ndarray | None = None,
    acc_limits: np.ndarray | None = None,
) -> None:
    fig, axes = plt.subplots(3, 1, figsize=(6.5, 8), sharex=True)
    for j in range(tt.positions.shape[1]):
        axes[0].plot(tt.times, tt.positions[:, j], lw=1.1)
        axes[1].plot(tt.times, tt.velocities[:, j], lw=1.1)
        axes[2].plot(tt.times, tt.accelerations[:, j], lw=1.1)
    if vel_limits is not None:
        lim = float(np.max(vel_limits))
        axes[1].axhline(lim, color="r", ls=":", lw=1)
        axes[1].axhline(-lim, color="r", ls=":", lw=1)
    if acc_limits is not None:
        lim = float(np.max(acc_limits))
        axes[2].axhline(lim, color="r", ls=":", lw=1)
        axes[2].axhline(-lim, color="r", ls=":", lw=1)
    axes[0].set_ylabel("position")
    axes[1].set_ylabel("velocity")
    axes[2].set_ylabel("acceleration")
    axes[2].set_xlabel("time [s]")
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)


def plot_rmsd_bands(rows: list[dict], path: str | Path) -> None:
    """Bar chart of per-band distance and alignment RMSD from eval reports."""
    labels = [f"[{r['lo']:g},{r['hi']:g}]" for r in rows]
    d_vals = [100.0 * r["rmsd_d"] for r in rows]
    n_vals = [r["rmsd_align"] for r in rows]
    x = np.arange(len(rows))
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.bar(x - 0.18, d_vals, width=0.36, color="tab:blue", label="distance RMSD [cm]")
    ax1.set_ylabel("distance RMSD [cm]")
    ax1.set_xticks(x, labels)
    ax1.set_xlabel("distance band [m]")
    ax2 = ax1.twinx()
    ax2.bar(x + 0.18, n_vals, width=0.36, color="tab:orange", label="alignment RMSD")
    ax2.set_ylabel("alignment RMSD")
    lines = [plt.Rectangle((0, 0), 1, 1, color=c) for c in ("tab:blue", "tab:orange")]
    ax1.legend(lines, ["distance RMSD [cm]", "alignment RMSD"], fontsize=8)
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
