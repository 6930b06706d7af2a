"""Per-link MLP signed-distance networks and the whole-robot composite query.

The network is a fixed 5-layer ReLU perceptron [3, 64, 64, 64, 64, 1] mapping
a point in the link's canonical frame to signed distance. Inference kernels
are row-local with fixed accumulation order, so batched evaluation is
bit-identical to single-point calls under any batch split or thread count.

Training minimizes squared distance error plus a normal-alignment penalty
||ghat/|ghat| x n||^2, whose parameter gradient is obtained by mixed-mode
differentiation with the rectifier gates held fixed (they are piecewise
constant in the inputs).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange

from sdfplan.mesh import TriMesh, LinkDataset, exact_signed_distance
from sdfplan.robot import RobotModel, batch_forward_kinematics, forward_kinematics
from sdfplan.rngstreams import stream

LAYER_SIZES = (3, 64, 64, 64, 64, 1)
HIDDEN = 64
WEIGHTS_FORMAT_VERSION = 1
TRUST_RADIUS = 1.2  # outer edge of the sampled training band, meters
LINK_BOUND_RADIUS = 0.4  # links are assumed to fit a ball of this radius


class TrainingDiverged(RuntimeError):
    def __init__(self, batch_id: int):
        super().__init__(f"training loss became non-finite at batch {batch_id}")
        self.batch_id = batch_id


@dataclass
class MlpSdf:
    """Fixed-architecture ReLU MLP over meters; immutable after training."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    trust_radius: float = TRUST_RADIUS
    link_bound_radius: float = LINK_BOUND_RADIUS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = [(LAYER_SIZES[i], LAYER_SIZES[i + 1]) for i in range(5)]
        if len(self.weights) != 5 or len(self.biases) != 5:
            raise ValueError("network must have exactly 5 weight layers")
        for w, b, (si, so) in zip(self.weights, self.biases, shapes):
            if w.shape != (si, so) or b.shape != (so,):
                raise ValueError(f"layer shape {w.shape} does not match architecture {shapes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("network parameters must be finite")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]


def init_mlp(seed: int = 0) -> MlpSdf:
    """Uniform fan-in initialization, reproducible from the seed."""
    rng = stream(seed, "mlp-init")
    weights, biases = [], []
    for si, so in zip(LAYER_SIZES[:-1], LAYER_SIZES[1:]):
        bound = 1.0 / np.sqrt(si)
        weights.append(rng.uniform(-bound, bound, size=(si, so)))
        biases.append(rng.uniform(-bound, bound, size=so))
    return MlpSdf(weights=weights, biases=biases)


@njit(cache=True, parallel=True)
def _mlp_kernel(pts, w1, b1, w2, b2, w3, b3, w4, b4, w5, b5, out_d, out_g, want_grad):
    n = pts.shape[0]
    for i in prange(n):
        h1 = np.empty(HIDDEN)
        h2 = np.empty(HIDDEN)
        h3 = np.empty(HIDDEN)
        h4 = np.empty(HIDDEN)
        g1 = np.empty(HIDDEN)
        g2 = np.empty(HIDDEN)
        g3 = np.empty(HIDDEN)
        g4 = np.empty(HIDDEN)
        for o in range(HIDDEN):
            h1[o] = b1[o]
        for k in range(3):
            x = pts[i, k]
            for o in range(HIDDEN):
                h1[o] += x * w1[k, o]
        for o in range(HIDDEN):
            g1[o] = 1.0 if h1[o] > 0.0 else 0.0
            h1[o] = h1[o] if h1[o] > 0.0 else 0.0
        for o in range(HIDDEN):
            h2[o] = b2[o]
        for k in range(HIDDEN):
            x = h1[k]
            if x != 0.0:
                for o in range(HIDDEN):
                    h2[o] += x * w2[k, o]
        for o in range(HIDDEN):
            g2[o] = 1.0 if h2[o] > 0.0 else 0.0
            h2[o] = h2[o] if h2[o] > 0.0 else 0.0
        for o in range(HIDDEN):
            h3[o] = b3[o]
        for k in range(HIDDEN):
            x = h2[k]
            if x != 0.0:
                for o in range(HIDDEN):
                    h3[o] += x * w3[k, o]
        for o in range(HIDDEN):
            g3[o] = 1.0 if h3[o] > 0.0 else 0.0
            h3[o] = h3[o] if h3[o] > 0.0 else 0.0
        for o in range(HIDDEN):
            h4[o] = b4[o]
        for k in range(HIDDEN):
            x = h3[k]
            if x != 0.0:
                for o in range(HIDDEN):
                    h4[o] += x * w4[k, o]
        for o in range(HIDDEN):
            g4[o] = 1.0 if h4[o] > 0.0 else 0.0
            h4[o] = h4[o] if h4[o] > 0.0 else 0.0
        acc = b5[0]
        for k in range(HIDDEN):
            acc += h4[k] * w5[k, 0]
        out_d[i] = acc
        if want_grad:
            # backward pass through frozen gates
            r4 = np.empty(HIDDEN)
            r3 = np.zeros(HIDDEN)
            r2 = np.zeros(HIDDEN)
            r1 = np.zeros(HIDDEN)
            for o in range(HIDDEN):
                r4[o] = w5[o, 0] * g4[o]
            for o in range(HIDDEN):
                x = r4[o]
                if x != 0.0:
                    for k in range(HIDDEN):
                        r3[k] += w4[k, o] * x
            for k in range(HIDDEN):
                r3[k] *= g3[k]
            for o in range(HIDDEN):
                x = r3[o]
                if x != 0.0:
                    for k in range(HIDDEN):
                        r2[k] += w3[k, o] * x
            for k in range(HIDDEN):
                r2[k] *= g2[k]
            for o in range(HIDDEN):
                x = r2[o]
                if x != 0.0:
                    for k in range(HIDDEN):
                        r1[k] += w2[k, o] * x
            for k in range(HIDDEN):
                r1[k] *= g1[k]
            for j in range(3):
                acc = 0.0
                for k in range(HIDDEN):
                    acc += w1[j, k] * r1[k]
                out_g[i, j] = acc


_EMPTY_GRAD = np.zeros((0, 3))


def mlp_forward(net: MlpSdf, points: np.ndarray, want_grad: bool = False):
    """Evaluate the network, optionally with its exact input gradient.

    Returns d_hat (N,) or (d_hat, n_hat) with n_hat (N, 3). The gradient is
    the analytic network gradient (piecewise constant through rectifier
    gates); at a gate boundary the active-side subgradient is returned.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    if not np.all(np.isfinite(pts)):
        raise ValueError("query points must be finite")
    n = pts.shape[0]
    out_d = np.empty(n)
    out_g = np.empty((n, 3)) if want_grad else _EMPTY_GRAD[:0]
    w = net.weights
    b = net.biases
    _mlp_kernel(pts, w[0], b[0], w[1], b[1], w[2], b[2], w[3], b[3], w[4], b[4], out_d,
                out_g if want_grad else np.empty((n, 3)), want_grad)
    if want_grad:
        return out_d, out_g
    return out_d


def finite_difference_gradient(net: MlpSdf, points: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference input gradient; cross-check path for the analytic one."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    grad = np.empty_like(pts)
    for j in range(3):
        hi = pts.copy()
        lo = pts.copy()
        hi[:, j] += step
        lo[:, j] -= step
        grad[:, j] = (mlp_forward(net, hi) - mlp_forward(net, lo)) / (2.0 * step)
    return grad


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 1024
    learning_rate: float = 1e-3
    lr_decay: float = 0.5
    lr_step_epochs: int = 100
    lambda_d: float = 1.0
    lambda_n: float = 0.1
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size) <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size, learning_rate must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.lambda_d < 0 or self.lambda_n < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_rmsd_d: list[float] = field(default_factory=list)
    val_rmsd_align: list[float] = field(default_factory=list)

    @property
    def final_val_rmsd_d(self) -> float:
        return self.val_rmsd_d[-1] if self.val_rmsd_d else float("nan")

    @property
    def final_val_rmsd_align(self) -> float:
        return self.val_rmsd_align[-1] if self.val_rmsd_align else float("nan")


def _np_forward(params, x):
    """Vectorized training-path forward; returns activations and gates."""
    w1, b1, w2, b2, w3, b3, w4, b4, w5, b5 = params
    a1 = x @ w1 + b1
    g1 = a1 > 0
    h1 = np.where(g1, a1, 0.0)
    a2 = h1 @ w2 + b2
    g2 = a2 > 0
    h2 = np.where(g2, a2, 0.0)
    a3 = h2 @ w3 + b3
    g3 = a3 > 0
    h3 = np.where(g3, a3, 0.0)
    a4 = h3 @ w4 + b4
    g4 = a4 > 0
    h4 = np.where(g4, a4, 0.0)
    y = (h4 @ w5 + b5)[:, 0]
    return y, (h1, h2, h3, h4), (g1, g2, g3, g4)


def _input_gradients(params, gates):
    """Analytic d y / d x for the whole batch, with the suffix products."""
    _, _, w2, _, w3, _, w4, _, w5, _ = params
    g1, g2, g3, g4 = gates
    s4 = g4 * w5[:, 0][None, :]
    s3 = g3 * (s4 @ w4.T)
    s2 = g2 * (s3 @ w3.T)
    s1 = g1 * (s2 @ w2.T)
    ghat = s1 @ params[0].T
    return ghat, (s1, s2, s3, s4)


def loss_and_grads(params, x, d, n, lambda_d: float, lambda_n: float):
    """Mean loss over the batch and gradients for every parameter.

    Distance term: lambda_d * (y - d)^2. Alignment term: lambda_n *
    ||ghat/|ghat| x n||^2 = lambda_n * (1 - cos^2), differentiated with the
    rectifier gates frozen (mixed-mode: a forward tangent pass against the
    stored backward suffixes).
    """
    w1, b1, w2, b2, w3, b3, w4, b4, w5, b5 = params
    bsz = x.shape[0]
    y, (h1, h2, h3, h4), gates = _np_forward(params, x)
    g1, g2, g3, g4 = gates

    resid = y - d
    loss_d = lambda_d * float(np.mean(resid**2))

    ghat, (s1, s2, s3, s4) = _input_gradients(params, gates)
    gnorm = np.linalg.norm(ghat, axis=1)
    safe = np.maximum(gnorm, 1e-12)
    u = ghat / safe[:, None]
    cosn = np.sum(u * n, axis=1)
    loss_n = lambda_n * float(np.mean(1.0 - cosn**2))

    # distance-term backprop
    dy = (2.0 * lambda_d / bsz) * resid
    grads = {}
    grads["w5"] = h4.T @ dy[:, None]
    grads["b5"] = np.array([dy.sum()])
    dh4 = dy[:, None] * w5[:, 0][None, :]
    da4 = dh4 * g4
    grads["w4"] = h3.T @ da4
    grads["b4"] = da4.sum(axis=0)
    da3 = (da4 @ w4.T) * g3
    grads["w3"] = h2.T @ da3
    grads["b3"] = da3.sum(axis=0)
    da2 = (da3 @ w3.T) * g2
    grads["w2"] = h1.T @ da2
    grads["b2"] = da2.sum(axis=0)
    da1 = (da2 @ w2.T) * g1
    grads["w1"] = x.T @ da1
    grads["b1"] = da1.sum(axis=0)

    # alignment-term contribution: dL/dghat, then tangent pass with frozen gates
    v = (-2.0 * lambda_n / bsz) * cosn[:, None] * (n - cosn[:, None] * u) / safe[:, None]
    p1 = (v @ w1) * g1
    p2 = (p1 @ w2) * g2
    p3 = (p2 @ w3) * g3
    p4 = (p3 @ w4) * g4
    grads["w1"] += v.T @ s1
    grads["w2"] += p1.T @ s2
    grads["w3"] += p2.T @ s3
    grads["w4"] += p3.T @ s4
    grads["w5"] += p4.sum(axis=0)[:, None]

    return loss_d + loss_n, loss_d, loss_n, grads


def _rmsd_eval(params, x, d, n):
    y, _, gates = _np_forward(params, x)
    ghat, _ = _input_gradients(params, gates)
    gnorm = np.maximum(np.linalg.norm(ghat, axis=1), 1e-12)
    u = ghat / gnorm[:, None]
    cross = np.cross(u, n)
    rmsd_d = float(np.sqrt(np.mean((y - d) ** 2))) if len(d) else float("nan")
    rmsd_align = float(np.sqrt(np.mean(np.sum(cross**2, axis=1)))) if len(d) else float("nan")
    return rmsd_d, rmsd_align


def train_link_sdf(dataset: LinkDataset, cfg: TrainConfig = TrainConfig()) -> tuple[MlpSdf, TrainReport]:
    """Fit one link network by Adam-driven mini-batch gradient descent."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    x_all = np.asarray(dataset.points, dtype=np.float64)
    d_all = np.asarray(dataset.distances, dtype=np.float64)
    n_all = np.asarray(dataset.normals, dtype=np.float64)

    n_total = len(dataset)
    order = stream(cfg.seed, "train-split").permutation(n_total)
    n_val = max(1, int(round(cfg.val_fraction * n_total))) if n_total > 1 else 0
    val_idx, train_idx = order[:n_val], order[n_val:]
    if train_idx.size == 0:
        train_idx = val_idx
    xt, dt, nt = x_all[train_idx], d_all[train_idx], n_all[train_idx]
    xv, dv, nv = x_all[val_idx], d_all[val_idx], n_all[val_idx]

    net = init_mlp(cfg.seed)
    params = [net.weights[0], net.biases[0], net.weights[1], net.biases[1], net.weights[2], net.biases[2],
              net.weights[3], net.biases[3], net.weights[4], net.biases[4]]
    names = ["w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4", "w5", "b5"]
    m_buf = [np.zeros_like(p) for p in params]
    v_buf = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    shuffle_rng = stream(cfg.seed, "train-shuffle")
    report = TrainReport()
    n_train = xt.shape[0]
    batch_id = 0
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * (cfg.lr_decay ** (epoch // cfg.lr_step_epochs))
        perm = shuffle_rng.permutation(n_train)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_train, cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            loss, _, _, grads = loss_and_grads(params, xt[sel], dt[sel], nt[sel], cfg.lambda_d, cfg.lambda_n)
            if not np.isfinite(loss):
                raise TrainingDiverged(batch_id)
            step += 1
            for i, name in enumerate(names):
                g = grads[name]
                m_buf[i] = beta1 * m_buf[i] + (1 - beta1) * g
                v_buf[i] = beta2 * v_buf[i] + (1 - beta2) * g * g
                mh = m_buf[i] / (1 - beta1**step)
                vh = v_buf[i] / (1 - beta2**step)
                params[i] = params[i] - lr * mh / (np.sqrt(vh) + eps)
            epoch_loss += loss
            n_batches += 1
            batch_id += 1
        report.train_loss.append(epoch_loss / max(n_batches, 1))
        rd, ra = _rmsd_eval(params, xv, dv, nv)
        report.val_rmsd_d.append(rd)
        report.val_rmsd_align.append(ra)

    meta = {
        "train_config": {k: getattr(cfg, k) for k in (
            "epochs", "batch_size", "learning_rate", "lr_decay", "lr_step_epochs",
            "lambda_d", "lambda_n", "val_fraction", "seed")},
        "dataset_provenance": dataset.provenance,
        "final_val_rmsd_d": report.final_val_rmsd_d,
        "final_val_rmsd_align": report.final_val_rmsd_align,
    }
    trained = MlpSdf(
        weights=[params[0], params[2], params[4], params[6], params[8]],
        biases=[params[1], params[3], params[5], params[7], params[9]],
        meta=meta,
    )
    return trained, report


def save_net(net: MlpSdf, path: str | Path) -> None:
    """Versioned binary container: architecture header + provenance + arrays."""
    header = {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "layer_sizes": list(LAYER_SIZES),
        "trust_radius": net.trust_radius,
        "link_bound_radius": net.link_bound_radius,
        "meta": net.meta,
    }
    arrays = {f"w{i+1}": w for i, w in enumerate(net.weights)}
    arrays.update({f"b{i+1}": b for i, b in enumerate(net.biases)})
    np.savez(path, header=json.dumps(header, sort_keys=True), **arrays)


def load_net(path: str | Path) -> MlpSdf:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != WEIGHTS_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported weights format {header.get('format_version')!r}")
        if tuple(header["layer_sizes"]) != LAYER_SIZES:
            raise ValueError(f"{path}: architecture {header['layer_sizes']} not supported")
        weights = [data[f"w{i+1}"] for i in range(5)]
        biases = [data[f"b{i+1}"] for i in range(5)]
    return MlpSdf(
        weights=weights,
        biases=biases,
        trust_radius=float(header["trust_radius"]),
        link_bound_radius=float(header["link_bound_radius"]),
        meta=header.get("meta", {}),
    )


def sample_band_points(mesh: TriMesh, lo: float, hi: float, n: int, seed: int = 0) -> np.ndarray:
    """n points whose exact signed distance to the mesh falls in [lo, hi).

    Rejection sampling in a box enclosing the band; raises if the band is
    empty after a bounded number of rounds.
    """
    rng = stream(seed, "band-points", int(round(lo * 1e6)), int(round(hi * 1e6)))
    center = 0.5 * (mesh.vertices.min(axis=0) + mesh.vertices.max(axis=0))
    reach = mesh.bounding_radius() + max(hi, 0.0) + 0.05
    pts: list[list[float]] = []
    for _ in range(200):
        cand = center + rng.uniform(-1.0, 1.0, size=(max(4 * n, 1000), 3)) * reach
        d, _ = exact_signed_distance(mesh, cand)
        sel = cand[(d >= lo) & (d < hi)]
        if sel.size:
            pts.extend(sel.tolist())
        if len(pts) >= n:
            return np.asarray(pts[:n])
    raise RuntimeError(f"could not sample {n} points with distance in [{lo}, {hi})")


def eval_sdf_bands(
    net: MlpSdf,
    mesh: TriMesh,
    bands: list[tuple[float, float]],
    n_points: int = 2000,
    seed: int = 0,
) -> list[dict]:
    """Distance and normal-alignment RMSD per distance band vs the exact oracle.

    Empty bands are reported with n=0 rather than raising.
    """
    rows = []
    for lo, hi in bands:
        try:
            pts = sample_band_points(mesh, lo, hi, n_points, seed)
        except RuntimeError:
            rows.append({"lo": lo, "hi": hi, "n": 0, "rmsd_d": float("nan"), "rmsd_align": float("nan")})
            continue
        d_true, n_true = exact_signed_distance(mesh, pts)
        d_hat, g_hat = mlp_forward(net, pts, want_grad=True)
        gnorm = np.maximum(np.linalg.norm(g_hat, axis=1), 1e-12)
        u = g_hat / gnorm[:, None]
        cross = np.cross(u, n_true)
        rows.append(
            {
                "lo": lo,
                "hi": hi,
                "n": int(len(pts)),
                "rmsd_d": float(np.sqrt(np.mean((d_hat - d_true) ** 2))),
                "rmsd_align": float(np.sqrt(np.mean(np.sum(cross**2, axis=1)))),
            }
        )
    return rows


@dataclass(frozen=True)
class CompositeSdf:
    """One trained net per link, composed through forward kinematics."""

    nets: tuple[MlpSdf, ...]
    model: RobotModel

    def __post_init__(self):
        if len(self.nets) != self.model.n_links:
            raise ValueError(f"{len(self.nets)} nets for {self.model.n_links} links")


def _transform_points_batch(rot: np.ndarray, trans: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Inverse-transform world points into link frames for M configs at once.

    rot (M, 3, 3), trans (M, 3), points (N, 3) -> (M, N, 3); mirrors
    RigidTransform.apply_inverse termwise.
    """
    q = points[None, :, :] - trans[:, None, :]
    out = np.empty((rot.shape[0], points.shape[0], 3))
    for j in range(3):
        out[:, :, j] = (
            rot[:, None, 0, j] * q[:, :, 0] + rot[:, None, 1, j] * q[:, :, 1] + rot[:, None, 2, j] * q[:, :, 2]
        )
    return out


def _clamped_link_distance(net: MlpSdf, pts_link: np.ndarray) -> np.ndarray:
    """Net evaluation with the far-field lower-bound clamp outside the trusted band."""
    d = mlp_forward(net, pts_link)
    r = np.sqrt(pts_link[:, 0] ** 2 + pts_link[:, 1] ** 2 + pts_link[:, 2] ** 2)
    far = r > net.trust_radius
    if far.any():
        d = np.where(far, r - net.link_bound_radius, d)
    return d


def composite_min_distance(sdf: CompositeSdf, q: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum learned distance over links per world point, plus argmin link.

    One forward-kinematics call per query regardless of batch size. Queries
    farther than the trusted band from a link origin return the clamped
    lower bound instead of extrapolating that link's net.
    """
    poses = forward_kinematics(sdf.model, q)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    per_link = np.empty((len(sdf.nets), pts.shape[0]))
    for k, net in enumerate(sdf.nets):
        local = poses.poses[k].apply_inverse(pts)
        per_link[k] = _clamped_link_distance(net, local)
    amin = np.argmin(per_link, axis=0)
    return per_link[amin, np.arange(pts.shape[0])], amin


def composite_min_distance_many(sdf: CompositeSdf, configs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """(M, N) learned minimum distances for M configs and N world points."""
    rots, trans = batch_forward_kinematics(sdf.model, configs)
    m, n = configs.shape[0], np.asarray(points).reshape(-1, 3).shape[0]
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    best = np.full((m, n), np.inf)
    for k, net in enumerate(sdf.nets):
        local = _transform_points_batch(rots[:, k], trans[:, k], pts).reshape(m * n, 3)
        d = _clamped_link_distance(net, local).reshape(m, n)
        np.minimum(best, d, out=best)
    return best


def exact_composite_min_distance(
    model: RobotModel,
    meshes: dict[int, TriMesh] | list[TriMesh],
    q: np.ndarray,
    points: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth composite distance via the mesh oracle (no clamp)."""
    mesh_map = dict(enumerate(meshes)) if isinstance(meshes, (list, tuple)) else dict(meshes)
    for k in range(model.n_links):
        if k not in mesh_map or mesh_map[k] is None:
            raise ValueError(f"missing mesh for link {k}")
    poses = forward_kinematics(model, q)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    per_link = np.empty((model.n_links, pts.shape[0]))
    for k in range(model.n_links):
        local = poses.poses[k].apply_inverse(pts)
        per_link[k], _ = exact_signed_distance(mesh_map[k], local)
    amin = np.argmin(per_link, axis=0)
    return per_link[amin, np.arange(pts.shape[0])], amin


def exact_composite_min_distance_many(
    model: RobotModel,
    meshes: dict[int, TriMesh] | list[TriMesh],
    configs: np.ndarray,
    points: np.ndarray,
) -> np.ndarray:
    """(M, N) exact minimum distances for M configs and N world points."""
    mesh_map = dict(enumerate(meshes)) if isinstance(meshes, (list, tuple)) else dict(meshes)
    rots, trans = batch_forward_kinematics(model, configs)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    m, n = configs.shape[0], pts.shape[0]
    best = np.full((m, n), np.inf)
    for k in range(model.n_links):
        local = _transform_points_batch(rots[:, k], trans[:, k], pts).reshape(m * n, 3)
        d, _ = exact_signed_distance(mesh_map[k], local)
        np.minimum(best, d.reshape(m, n), out=best)
    return best
