"""Time-normalized Gaussian-process prior over trajectories.

A squared-exponential kernel over timestamps normalized to [0, 1], conditioned
exactly on the start and goal states, so every sample passes through both
endpoints. One scalar time kernel is shared across all state dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from sdfplan.rngstreams import stream

ENDPOINT_NOISE = 1e-12
JITTER_START = 1e-10
JITTER_MAX = 1e-6


@dataclass(frozen=True)
class GpHyper:
    sigma_f: float  # signal std, units of the state (rad or m)
    h: float  # time length-scale on the normalized [0, 1] axis

    def __post_init__(self):
        if self.sigma_f <= 0 or self.h <= 0:
            raise ValueError(f"hyperparameters must be positive, got sigma_f={self.sigma_f}, h={self.h}")


@dataclass
class Trajectory:
    """Ordered waypoints (H+1, d); timestamps appear after time parameterization."""

    states: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.states.shape[0] < 3:
            raise ValueError("a trajectory needs at least H >= 2 segments (3 waypoints)")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory states must be finite")

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def se_kernel(t_i: np.ndarray | float, t_j: np.ndarray | float, hyper: GpHyper) -> np.ndarray | float:
    """Squared-exponential kernel sigma_f^2 * exp(-(t_i - t_j)^2 / (2 h^2))."""
    dt = np.asarray(t_i, dtype=np.float64) - np.asarray(t_j, dtype=np.float64)
    out = hyper.sigma_f**2 * np.exp(-(dt**2) / (2.0 * hyper.h**2))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GpPrior:
    """Endpoint-conditioned GP over H+1 timestamps; sampleable.

    ``kernel_chol`` is the lower Cholesky factor of the conditioned kernel on
    the H-1 interior timestamps, shared across the d state dimensions.
    """

    times: np.ndarray
    mean: np.ndarray  # (H+1, d)
    kernel_chol: np.ndarray  # (H-1, H-1)
    hyper: GpHyper
    cond_cov: np.ndarray = field(repr=False, default=None)

    @property
    def horizon(self) -> int:
        return self.times.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.mean.shape[1]

    def with_mean(self, mean: np.ndarray) -> "GpPrior":
        """Same kernel, different mean; endpoints must stay at the observed states."""
        mean = np.asarray(mean, dtype=np.float64)
        if mean.shape != self.mean.shape:
            raise ValueError(f"mean shape {mean.shape} != {self.mean.shape}")
        if not (np.array_equal(mean[0], self.mean[0]) and np.array_equal(mean[-1], self.mean[-1])):
            raise ValueError("replacement mean must keep the observed endpoints")
        return GpPrior(times=self.times, mean=mean, kernel_chol=self.kernel_chol, hyper=self.hyper, cond_cov=self.cond_cov)


def _chol_with_jitter(mat: np.ndarray) -> np.ndarray:
    jitter = JITTER_START
    while True:
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX:
                raise np.linalg.LinAlgError(
                    f"conditioned kernel not factorizable even with jitter {jitter:g}"
                ) from None
            jitter *= 10.0


def condition_on_endpoints(
    times: np.ndarray,
    start: np.ndarray,
    goal: np.ndarray,
    hyper: GpHyper,
    mean: np.ndarray | None = None,
) -> GpPrior:
    """GP prior over ``times`` conditioned on exact start/goal observations.

    ``times`` must be strictly increasing with t_0 = 0 and t_H = 1. The default
    mean is the straight line between start and goal; a custom mean may be
    supplied as long as it keeps the endpoints.
    """
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.shape[0] < 3:
        raise ValueError("need H >= 2 (at least 3 timestamps)")
    if times[0] != 0.0 or times[-1] != 1.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must strictly increase from 0 to 1")
    start = np.atleast_1d(np.asarray(start, dtype=np.float64))
    goal = np.atleast_1d(np.asarray(goal, dtype=np.float64))
    if start.shape != goal.shape:
        raise ValueError("start and goal must have the same dimension")

    t_obs = times[[0, -1]]
    t_int = times[1:-1]
    k_test = se_kernel(t_obs[:, None], t_obs[None, :], hyper) + ENDPOINT_NOISE * np.eye(2)
    k_star = se_kernel(t_obs[:, None], t_int[None, :], hyper)  # (2, H-1)
    k_ss = se_kernel(t_int[:, None], t_int[None, :], hyper)  # (H-1, H-1)
    solve = np.linalg.solve(k_test, k_star)  # K_test^-1 K_*
    cond = k_ss - k_star.T @ solve
    cond = 0.5 * (cond + cond.T)
    chol = _chol_with_jitter(cond)

    if mean is None:
        mean = start[None, :] + times[:, None] * (goal - start)[None, :]
    else:
        mean = np.asarray(mean, dtype=np.float64)
        if mean.ndim == 1:
            mean = mean[:, None]
        if mean.shape != (times.shape[0], start.shape[0]):
            raise ValueError("mean must be (H+1, d)")
        if not (np.allclose(mean[0], start) and np.allclose(mean[-1], goal)):
            raise ValueError("mean must pass through start and goal")
    mean = mean.copy()
    mean[0] = start
    mean[-1] = goal
    return GpPrior(times=times, mean=mean, kernel_chol=chol, hyper=hyper, cond_cov=cond)


def sample_states(prior: GpPrior, n: int, seed: int) -> np.ndarray:
    """(n, H+1, d) array of samples mu + L z; every row shares the endpoints."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = stream(seed, "gp-sample")
    h_int = prior.kernel_chol.shape[0]
    z = rng.standard_normal((n, h_int, prior.dim))
    states = np.broadcast_to(prior.mean, (n,) + prior.mean.shape).copy()
    for i in range(n):
        states[i, 1:-1] += prior.kernel_chol @ z[i]
    return states


def sample_trajectories(prior: GpPrior, n: int, seed: int) -> list[Trajectory]:
    """Draw n trajectories; deterministic given (prior, seed)."""
    arr = sample_states(prior, n, seed)
    return [Trajectory(states=arr[i]) for i in range(n)]
