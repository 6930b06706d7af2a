"""Stochastic trajectory optimizer: cost-likelihoods, MPPI mean updates, and
the kernel-updating strategy that keeps the sampling variance wide until the
mean trajectory is collision-free, then decays it geometrically.

A ``checker`` is any callable mapping a batch of states (M, d) to signed
clearances (M,): 2D planar positions against a map, or joint vectors against
scene obstacles through the composite SDF.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from sdfplan.gp_prior import GpHyper, Trajectory, condition_on_endpoints, sample_states
from sdfplan.robot import RobotModel, batch_forward_kinematics

Checker = Callable[[np.ndarray], np.ndarray]

EARLY_STOP_PATIENCE = 20
EARLY_STOP_REL_TOL = 1e-4
FALLBACK_QUANTILE = 0.1


class PlannerDiverged(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"mean trajectory became non-finite at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class CostSpec:
    """Task costs; the weight of each cost realizes its diagonal weight matrix."""

    epsilon: float = 0.08  # clearance threshold, meters
    interp_points: int = 2  # linear interpolants per segment for the obstacle cost
    obstacle_weight: float = 1.0
    length_weight: float = 0.05
    z_floor: float = 0.02
    boundary_weight: float = 1.0
    boundary_enabled: bool = False

    def __post_init__(self):
        if self.epsilon < 0 or self.interp_points < 0:
            raise ValueError("epsilon and interp_points must be nonnegative")
        if min(self.obstacle_weight, self.length_weight, self.boundary_weight) < 0:
            raise ValueError("cost weights must be nonnegative")


@dataclass(frozen=True)
class PlannerConfig:
    horizon: int = 20  # segments H; trajectories have H+1 waypoints
    n_samples: int = 200
    iters: int = 200
    gamma: float = 0.5
    sigma_f_init: float = 0.02
    sigma_min: float = 0.0005
    eta: float = 0.9
    h: float = 0.01
    seed: int = 0
    use_kus: bool = True  # fixed sigma_f when disabled (ablation mode)

    def __post_init__(self):
        if min(self.horizon, self.n_samples, self.iters) <= 0:
            raise ValueError("horizon, n_samples, iters must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        if min(self.sigma_f_init, self.sigma_min, self.h) <= 0:
            raise ValueError("sigma_f_init, sigma_min, h must be positive")


@dataclass
class PlanResult:
    means: list[np.ndarray]  # mean trajectory after each iteration
    final: Trajectory
    obs_cost: np.ndarray  # per-iteration obstacle cost of the mean
    total_cost: np.ndarray
    sigma_f: np.ndarray  # sigma used for sampling at each iteration
    weight_entropy: np.ndarray
    success: bool
    iterations: int


def densify(states: np.ndarray, interp_points: int) -> np.ndarray:
    """Insert linear interpolants between adjacent waypoints.

    (H+1, d) -> (H*(interp_points+1)+1, d); interp_points = 0 returns the
    waypoints unchanged.
    """
    states = np.asarray(states, dtype=np.float64)
    if interp_points == 0:
        return states
    h = states.shape[0] - 1
    step = interp_points + 1
    alphas = np.arange(step) / step  # 0, 1/(m+1), ..., m/(m+1)
    seg = states[:-1, None, :] + alphas[None, :, None] * (states[1:, None, :] - states[:-1, None, :])
    dense = np.empty((h * step + 1, states.shape[1]))
    dense[:-1] = seg.reshape(h * step, states.shape[1])
    dense[-1] = states[-1]
    return dense


def obstacle_cost(traj: Trajectory | np.ndarray, checker: Checker, spec: CostSpec) -> float:
    """Count of densified states with clearance <= epsilon (indicator sum)."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    dense = densify(states, spec.interp_points)
    d = np.asarray(checker(dense), dtype=np.float64)
    return float(np.count_nonzero(d <= spec.epsilon))


def length_cost(traj: Trajectory | np.ndarray) -> float:
    """Total state-space path length (sum of segment norms)."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    return float(np.sum(np.linalg.norm(np.diff(states, axis=0), axis=1)))


def boundary_cost(traj: Trajectory | np.ndarray, model: RobotModel, z_floor: float) -> float:
    """Count of (waypoint, link) pairs whose link-frame origin sits below z_floor."""
    states = traj.states if isinstance(traj, Trajectory) else np.asarray(traj, dtype=np.float64)
    _, trans = batch_forward_kinematics(model, states)
    return float(np.count_nonzero(trans[:, :, 2] < z_floor))


def cost_likelihood(
    traj: Trajectory | np.ndarray,
    spec: CostSpec,
    checker: Checker | None = None,
    model: RobotModel | None = None,
) -> tuple[float, float]:
    """Weighted total cost and its exponential-utility likelihood exp(-total/2)."""
    total = spec.length_weight * length_cost(traj)
    if checker is not None:
        total += spec.obstacle_weight * obstacle_cost(traj, checker, spec)
    if spec.boundary_enabled:
        if model is None:
            raise ValueError("boundary cost enabled but no robot model given")
        total += spec.boundary_weight * boundary_cost(traj, model, spec.z_floor)
    return total, float(np.exp(-0.5 * total))


def mppi_update(
    prior,
    samples: np.ndarray | list[Trajectory],
    likelihoods: np.ndarray,
    gamma: float,
    total_costs: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Probabilistic-weighted mean update; returns (new_mean, weights).

    When every likelihood underflows to zero, weights fall back to uniform
    over the lowest-cost decile (or uniform over all samples if costs are
    unavailable) so the iteration still makes progress.
    """
    arr = samples if isinstance(samples, np.ndarray) else np.stack([t.states for t in samples])
    like = np.asarray(likelihoods, dtype=np.float64)
    if arr.shape[0] != like.shape[0] or like.shape[0] < 1:
        raise ValueError("need one likelihood per sample")
    total = like.sum()
    if total > 0.0:
        weights = like / total
    else:
        warnings.warn("all likelihoods are zero; falling back to rank-based uniform weights")
        weights = np.zeros_like(like)
        if total_costs is not None:
            k = max(1, int(np.ceil(FALLBACK_QUANTILE * like.shape[0])))
            best = np.argsort(np.asarray(total_costs, dtype=np.float64), kind="stable")[:k]
            weights[best] = 1.0 / k
        else:
            weights[:] = 1.0 / like.shape[0]
    mu = prior.mean
    delta = np.tensordot(weights, arr - mu[None, :, :], axes=1)
    return mu + gamma * delta, weights


def update_sigma_f(sigma_f_t: float, obs_cost_of_mean: float, eta: float, sigma_min: float) -> float:
    """Kernel-updating rule: hold while the mean collides, then decay to the floor."""
    if sigma_f_t <= 0:
        raise ValueError("sigma_f must be positive")
    if obs_cost_of_mean > 0:
        return sigma_f_t
    if sigma_f_t > sigma_min:
        return max(eta * sigma_f_t, sigma_min)
    return sigma_min


def _weight_entropy(weights: np.ndarray) -> float:
    w = weights[weights > 0]
    return float(-np.sum(w * np.log(w)))


def _batch_costs(
    batch: np.ndarray,
    checker: Checker,
    spec: CostSpec,
    model: RobotModel | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Total cost and obstacle cost for (N, H+1, d) trajectories at once.

    Equivalent to looping cost_likelihood over the rows: the dense states are
    evaluated through the same checker, flattened in row order.
    """
    n, _, dim = batch.shape
    dense = np.stack([densify(batch[i], spec.interp_points) for i in range(n)])
    flat = dense.reshape(-1, dim)
    d = np.asarray(checker(flat), dtype=np.float64).reshape(n, -1)
    obs = np.count_nonzero(d <= spec.epsilon, axis=1).astype(np.float64)
    seg = np.linalg.norm(np.diff(batch, axis=1), axis=2)
    lengths = seg.sum(axis=1)
    total = spec.obstacle_weight * obs + spec.length_weight * lengths
    if spec.boundary_enabled:
        if model is None:
            raise ValueError("boundary cost enabled but no robot model given")
        _, trans = batch_forward_kinematics(model, batch.reshape(-1, dim))
        below = (trans[:, :, 2] < spec.z_floor).reshape(n, batch.shape[1], -1)
        total += spec.boundary_weight * below.sum(axis=(1, 2)).astype(np.float64)
    return total, obs


def plan(
    start: np.ndarray,
    goal: np.ndarray,
    checker: Checker,
    cfg: PlannerConfig,
    spec: CostSpec,
    model: RobotModel | None = None,
) -> PlanResult:
    """Iterate sample -> weight -> mean update -> sigma_f update.

    Stops after cfg.iters iterations, or earlier once the mean is
    collision-free and its length has stalled for EARLY_STOP_PATIENCE
    iterations. The returned log has one entry per executed iteration.
    """
    start = np.atleast_1d(np.asarray(start, dtype=np.float64))
    goal = np.atleast_1d(np.asarray(goal, dtype=np.float64))
    times = np.linspace(0.0, 1.0, cfg.horizon + 1)

    if np.array_equal(start, goal):
        states = np.tile(start, (cfg.horizon + 1, 1))
        traj = Trajectory(states=states)
        obs = obstacle_cost(traj, checker, spec)
        return PlanResult(
            means=[states], final=traj, obs_cost=np.array([obs]),
            total_cost=np.array([spec.obstacle_weight * obs]), sigma_f=np.array([cfg.sigma_f_init]),
            weight_entropy=np.array([0.0]), success=obs == 0, iterations=0,
        )

    sigma = cfg.sigma_f_init
    mean = None
    means: list[np.ndarray] = []
    log_obs, log_total, log_sigma, log_entropy = [], [], [], []
    stall = 0
    prev_length = None

    for it in range(cfg.iters):
        prior = condition_on_endpoints(times, start, goal, GpHyper(sigma_f=sigma, h=cfg.h), mean=mean)
        samples = sample_states(prior, cfg.n_samples, seed=_iter_seed(cfg.seed, it))
        totals, _ = _batch_costs(samples, checker, spec, model)
        likelihoods = np.exp(-0.5 * totals)
        new_mean, weights = mppi_update(prior, samples, likelihoods, cfg.gamma, total_costs=totals)
        if not np.all(np.isfinite(new_mean)):
            raise PlannerDiverged(it)
        mean = new_mean

        mean_total, mean_obs = _batch_costs(mean[None], checker, spec, model)
        obs_mean = float(mean_obs[0])
        log_obs.append(obs_mean)
        log_total.append(float(mean_total[0]))
        log_sigma.append(sigma)
        log_entropy.append(_weight_entropy(weights))
        means.append(mean.copy())

        if cfg.use_kus:
            sigma = update_sigma_f(sigma, obs_mean, cfg.eta, cfg.sigma_min)

        length = float(np.sum(np.linalg.norm(np.diff(mean, axis=0), axis=1)))
        if obs_mean == 0 and prev_length is not None and abs(prev_length - length) <= EARLY_STOP_REL_TOL * max(prev_length, 1e-12):
            stall += 1
        else:
            stall = 0
        prev_length = length
        if stall >= EARLY_STOP_PATIENCE:
            break

    final = Trajectory(states=mean)
    return PlanResult(
        means=means,
        final=final,
        obs_cost=np.asarray(log_obs),
        total_cost=np.asarray(log_total),
        sigma_f=np.asarray(log_sigma),
        weight_entropy=np.asarray(log_entropy),
        success=log_obs[-1] == 0,
        iterations=len(log_obs),
    )


def _iter_seed(seed: int, iteration: int) -> int:
    # distinct, deterministic sampling stream per iteration
    return (int(seed) * 1000003 + iteration) & 0x7FFFFFFF


def save_trajectory(states: np.ndarray, path, manifest_id: str = "") -> None:
    """Waypoint file: one row per waypoint, one column per state dimension."""
    states = np.asarray(states, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# sdfplan-trajectory-v1\n")
        if manifest_id:
            fh.write(f"# manifest: {manifest_id}\n")
        fh.write(f"# shape: {states.shape[0]} {states.shape[1]}\n")
        for row in states:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_trajectory(path) -> Trajectory:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != "# sdfplan-trajectory-v1":
            raise ValueError(f"{path}: not a sdfplan trajectory file")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(x) for x in line.split()])
    return Trajectory(states=np.asarray(rows, dtype=np.float64))


def save_plan_log(result: PlanResult, path, manifest_id: str = "") -> None:
    """Per-iteration columns: iter, obstacle cost, total cost, sigma_f, entropy."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# sdfplan-plan-log-v1\n")
        if manifest_id:
            fh.write(f"# manifest: {manifest_id}\n")
        fh.write(f"# success: {int(result.success)}\n")
        fh.write("# columns: iter obs_cost total_cost sigma_f weight_entropy\n")
        for i in range(result.iterations):
            fh.write(
                f"{i} {result.obs_cost[i]:.17g} {result.total_cost[i]:.17g} "
                f"{result.sigma_f[i]:.17g} {result.weight_entropy[i]:.17g}\n"
            )
