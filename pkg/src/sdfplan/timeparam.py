"""Time-optimal path parameterization under velocity/acceleration limits.

Waypoints are fitted with a natural cubic spline over a chord-length arc
parameter, then the maximum feasible squared path velocity is integrated
backward from rest at the end and forward from rest at the start. Timestamps
follow from trapezoidal integration of dt = ds / v.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from sdfplan.gp_prior import Trajectory

DEFAULT_GRID = 512


@dataclass
class SplinePath:
    """C2 interpolating spline per dimension over s in [0, 1]."""

    splines: list[CubicSpline]
    knots: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.splines)

    def position(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        return np.stack([sp(s) for sp in self.splines], axis=-1)

    def velocity(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        return np.stack([sp(s, 1) for sp in self.splines], axis=-1)

    def acceleration(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        return np.stack([sp(s, 2) for sp in self.splines], axis=-1)


@dataclass
class TimedTrajectory:
    """Dense samples along the timed path; t strictly increasing from 0."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    arc_params: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0


def fit_spline(traj: Trajectory | np.ndarray) -> SplinePath:
    """Natural cubic spline through the waypoints, chord-length parameterized.

    Repeated consecutive waypoints collapse into a single knot (with a
    warning); an all-equal trajectory yields a zero-measure path.
    """
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    if states.ndim == 1:
        states = states[:, None]
    seg = np.linalg.norm(np.diff(states, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 0.0])
    if not keep.all():
        warnings.warn(f"collapsing {int((~keep).sum())} repeated waypoints into single knots")
        states = states[keep]
        seg = np.linalg.norm(np.diff(states, axis=0), axis=1)
    if states.shape[0] < 2:
        # zero-measure path: constant splines over a degenerate knot vector
        states = np.repeat(states[:1], 2, axis=0)
        seg = np.array([1.0])
        knots = np.array([0.0, 1.0])
    else:
        knots = np.concatenate([[0.0], np.cumsum(seg)])
        knots /= knots[-1]
    if states.shape[0] == 2:
        # CubicSpline needs >= 3 points; insert the midpoint (exactly collinear)
        states = np.vstack([states[0], 0.5 * (states[0] + states[1]), states[1]])
        knots = np.array([0.0, 0.5, 1.0])
    splines = [CubicSpline(knots, states[:, j], bc_type="natural") for j in range(states.shape[1])]
    return SplinePath(splines=splines, knots=knots)


def _acc_bounds(qd: np.ndarray, qdd: np.ndarray, b: float, acc_limits: np.ndarray) -> tuple[float, float]:
    """Feasible path-acceleration interval [lo, hi] at one grid point.

    Per dimension: |qdd * b + qd * sdd| <= a_max, solved for sdd.
    """
    lo, hi = -np.inf, np.inf
    for d in range(qd.shape[0]):
        c = qdd[d] * b
        if qd[d] > 1e-12:
            hi = min(hi, (acc_limits[d] - c) / qd[d])
            lo = max(lo, (-acc_limits[d] - c) / qd[d])
        elif qd[d] < -1e-12:
            hi = min(hi, (-acc_limits[d] - c) / qd[d])
            lo = max(lo, (acc_limits[d] - c) / qd[d])
    return lo, hi


def _feasible(qd: np.ndarray, qdd: np.ndarray, b: float, acc_limits: np.ndarray) -> bool:
    lo, hi = _acc_bounds(qd, qdd, b, acc_limits)
    if lo > hi:
        return False
    # dims with (near) zero path velocity leave no freedom in sdd
    for d in range(qd.shape[0]):
        if abs(qd[d]) <= 1e-12 and abs(qdd[d]) * b > acc_limits[d]:
            return False
    return True


def _feasibility_cap(qd: np.ndarray, qdd: np.ndarray, b_hi: float, acc_limits: np.ndarray) -> float:
    """Largest b in [0, b_hi] whose acceleration interval is nonempty.

    High curvature can make the box constraints unsatisfiable at the raw
    velocity cap; b = 0 is always feasible, so bisection is well-posed.
    """
    if not np.isfinite(b_hi):
        b_hi = 1e18
    if _feasible(qd, qdd, b_hi, acc_limits):
        return b_hi
    lo_b, hi_b = 0.0, b_hi
    for _ in range(60):
        mid = 0.5 * (lo_b + hi_b)
        if _feasible(qd, qdd, mid, acc_limits):
            lo_b = mid
        else:
            hi_b = mid
    return lo_b


def time_parameterize(
    path: SplinePath,
    vel_limits: np.ndarray,
    acc_limits: np.ndarray,
    grid: int = DEFAULT_GRID,
) -> TimedTrajectory:
    """Backward-then-forward maximum squared-path-velocity integration.

    The profile starts and ends at rest; duration is minimal for the
    discretization to first order.
    """
    vel_limits = np.asarray(vel_limits, dtype=np.float64).reshape(-1)
    acc_limits = np.asarray(acc_limits, dtype=np.float64).reshape(-1)
    if np.any(vel_limits <= 0) or np.any(acc_limits <= 0):
        raise ValueError("velocity and acceleration limits must be positive")
    s = np.linspace(0.0, 1.0, grid)
    qd = path.velocity(s)  # (grid, d)
    qdd = path.acceleration(s)
    if vel_limits.shape[0] != qd.shape[1] or acc_limits.shape[0] != qd.shape[1]:
        raise ValueError("limit vectors must match the path dimension")

    speed = np.linalg.norm(qd, axis=1)
    if np.max(speed) <= 1e-15:
        # zero-measure path
        pos = path.position(np.array([0.0]))
        zeros = np.zeros_like(pos)
        return TimedTrajectory(
            times=np.array([0.0]), positions=pos, velocities=zeros, accelerations=zeros,
            arc_params=np.array([0.0]),
        )

    # velocity-limit curve on b = sdot^2, tightened to acceleration feasibility
    with np.errstate(divide="ignore"):
        caps = np.where(np.abs(qd) > 1e-12, vel_limits[None, :] / np.abs(qd), np.inf)
    b_vel = np.min(caps, axis=1) ** 2
    for j in range(grid):
        b_vel[j] = _feasibility_cap(qd[j], qdd[j], b_vel[j], acc_limits)

    ds = s[1] - s[0]
    # backward pass: rest at the end, maximum deceleration; clamping to
    # [0, b_vel] keeps singular points (empty acceleration interval on the
    # velocity-limit curve) from driving the recursion negative
    b_back = np.empty(grid)
    b_back[-1] = 0.0
    for j in range(grid - 2, -1, -1):
        lo, _ = _acc_bounds(qd[j + 1], qdd[j + 1], b_back[j + 1], acc_limits)
        step = b_back[j + 1] - 2.0 * ds * lo if np.isfinite(lo) else np.inf
        b_back[j] = min(b_vel[j], max(step, 0.0))
    # forward pass: rest at the start, maximum acceleration, capped by backward
    b_fwd = np.empty(grid)
    b_fwd[0] = 0.0
    for j in range(grid - 1):
        _, hi = _acc_bounds(qd[j], qdd[j], b_fwd[j], acc_limits)
        step = b_fwd[j] + 2.0 * ds * hi if np.isfinite(hi) else np.inf
        b_fwd[j + 1] = min(b_back[j + 1], b_vel[j + 1], max(step, 0.0))
    b = np.maximum(b_fwd, 0.0)

    v = np.sqrt(b)
    # dt = 2 ds / (v_j + v_{j+1}); trapezoid on 1/v, well-defined at single rest points
    pair = v[:-1] + v[1:]
    pair = np.where(pair <= 1e-15, np.inf, pair)
    dt = 2.0 * ds / pair
    times = np.concatenate([[0.0], np.cumsum(dt)])

    sdd = np.empty(grid)
    sdd[:-1] = np.diff(b) / (2.0 * ds)
    sdd[-1] = sdd[-2]
    positions = path.position(s)
    velocities = qd * v[:, None]
    accelerations = qdd * b[:, None] + qd * sdd[:, None]
    return TimedTrajectory(
        times=times, positions=positions, velocities=velocities,
        accelerations=accelerations, arc_params=s,
    )


def save_timed_trajectory(tt: TimedTrajectory, path) -> None:
    """Columnar text: t, then q, qdot, qddot per dimension."""
    d = tt.positions.shape[1]
    header = "t " + " ".join(f"q{j}" for j in range(d))
    header += " " + " ".join(f"qd{j}" for j in range(d))
    header += " " + " ".join(f"qdd{j}" for j in range(d))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# sdfplan-timed-trajectory-v1\n# columns: {header}\n")
        for i in range(len(tt.times)):
            row = [tt.times[i], *tt.positions[i], *tt.velocities[i], *tt.accelerations[i]]
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
