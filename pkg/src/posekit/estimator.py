"""Residual MLP lifting 2D keypoints to root-relative 3D, trained with
the counterfactually reweighted objective.

The network maps a flattened normalized 2D pose (2J inputs) through a
linear layer into a hidden width, R residual blocks of two affine maps
with an elementwise nonlinearity between them, and a linear output of
3J coordinates in mm. All forward/backward math is written out by hand
on float64 numpy arrays; gradients never flow through the propensity
weights, which enter the loss as constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraIntrinsics
from .crm import CrmConfig, cips_weights, resolve_weights
from .errors import ConfigError, NumericalError, TrainingDivergedError

ACTIVATIONS = ("relu", "tanh")
OPTIMIZERS = ("adam", "sgd")


@dataclass
class EstimatorModel:
    joint_count: int
    hidden: int
    blocks: int
    activation: str
    params: dict[str, np.ndarray]

    @property
    def param_order(self) -> list[str]:
        return param_order(self.blocks)

    def copy(self) -> "EstimatorModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()})


def param_order(blocks: int) -> list[str]:
    """Documented flat ordering used by checkpoints."""
    names = ["in.w", "in.b"]
    for r in range(blocks):
        names += [f"block{r}.w1", f"block{r}.b1", f"block{r}.w2", f"block{r}.b2"]
    names += ["out.w", "out.b"]
    return names


def init_model(
    joint_count: int,
    hidden: int = 256,
    blocks: int = 2,
    activation: str = "relu",
    seed: int = 0,
) -> EstimatorModel:
    """Seeded init; every tensor is uniform in +-1/sqrt(fan_in)."""
    if joint_count < 2:
        raise ConfigError(f"joint_count must be >= 2, got {joint_count}")
    if hidden < 1 or blocks < 0:
        raise ConfigError(f"invalid architecture: hidden={hidden}, blocks={blocks}")
    if activation not in ACTIVATIONS:
        raise ConfigError(
            f"unknown nonlinearity {activation!r}, expected one of {ACTIVATIONS}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))

    def affine(n_in, n_out):
        bound = 1.0 / math.sqrt(n_in)
        w = rng.uniform(-bound, bound, size=(n_in, n_out))
        b = rng.uniform(-bound, bound, size=(n_out,))
        return w, b

    params: dict[str, np.ndarray] = {}
    params["in.w"], params["in.b"] = affine(2 * joint_count, hidden)
    for r in range(blocks):
        params[f"block{r}.w1"], params[f"block{r}.b1"] = affine(hidden, hidden)
        params[f"block{r}.w2"], params[f"block{r}.b2"] = affine(hidden, hidden)
    params["out.w"], params["out.b"] = affine(hidden, 3 * joint_count)
    return EstimatorModel(joint_count, hidden, blocks, activation, params)


def _act(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    return np.tanh(x)


def _act_grad(pre: np.ndarray, post: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (pre > 0.0).astype(np.float64)
    return 1.0 - post * post


def _forward_cached(model: EstimatorModel, x: np.ndarray):
    """x: (B, 2J). Returns (y, cache) with y: (B, 3J)."""
    p = model.params
    pre_in = x @ p["in.w"] + p["in.b"]
    h = _act(pre_in, model.activation)
    cache = {"x": x, "pre_in": pre_in, "h0": h}
    for r in range(model.blocks):
        pre1 = h @ p[f"block{r}.w1"] + p[f"block{r}.b1"]
        mid = _act(pre1, model.activation)
        h_next = h + mid @ p[f"block{r}.w2"] + p[f"block{r}.b2"]
        cache[f"b{r}.in"] = h
        cache[f"b{r}.pre1"] = pre1
        cache[f"b{r}.mid"] = mid
        h = h_next
    cache["top"] = h
    y = h @ p["out.w"] + p["out.b"]
    return y, cache


def _backward_from_dy(model: EstimatorModel, cache: dict, dy: np.ndarray) -> dict:
    """Gradients of every parameter given dL/dy. dy: (B, 3J)."""
    p = model.params
    grads: dict[str, np.ndarray] = {}
    top = cache["top"]
    grads["out.w"] = top.T @ dy
    grads["out.b"] = dy.sum(axis=0)
    dh = dy @ p["out.w"].T
    for r in range(model.blocks - 1, -1, -1):
        mid = cache[f"b{r}.mid"]
        pre1 = cache[f"b{r}.pre1"]
        h_in = cache[f"b{r}.in"]
        grads[f"block{r}.w2"] = mid.T @ dh
        grads[f"block{r}.b2"] = dh.sum(axis=0)
        dmid = dh @ p[f"block{r}.w2"].T
        dpre1 = dmid * _act_grad(pre1, mid, model.activation)
        grads[f"block{r}.w1"] = h_in.T @ dpre1
        grads[f"block{r}.b1"] = dpre1.sum(axis=0)
        dh = dh + dpre1 @ p[f"block{r}.w1"].T  # residual skip adds through
    dpre_in = dh * _act_grad(cache["pre_in"], cache["h0"], model.activation)
    grads["in.w"] = cache["x"].T @ dpre_in
    grads["in.b"] = dpre_in.sum(axis=0)
    return grads


def forward(model: EstimatorModel, inputs: np.ndarray) -> np.ndarray:
    """Predict (B, 3J) from normalized flattened inputs (B, 2J)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != 2 * model.joint_count:
        raise ValueError(
            f"inputs shape {inputs.shape}, expected (B, {2 * model.joint_count})"
        )
    y, _ = _forward_cached(model, inputs)
    if not np.isfinite(y).all():
        raise NumericalError("forward pass produced non-finite activations")
    return y


def backward(
    model: EstimatorModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[float, dict]:
    """Loss and parameter gradients of the (optionally weighted) batch
    pose loss: mean_i w_i * mean_coords (y_i - t_i)^2.

    weights default to 1 and are treated as constants.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    y, cache = _forward_cached(model, inputs)
    diff = y - targets
    b, d = diff.shape
    per_sample = np.mean(diff * diff, axis=1)
    if weights is None:
        loss = float(np.mean(per_sample))
        dy = (2.0 / (b * d)) * diff
    else:
        weights = np.asarray(weights, dtype=np.float64)
        loss = float(np.mean(weights * per_sample))
        dy = (2.0 / (b * d)) * (weights[:, None] * diff)
    return loss, _backward_from_dy(model, cache, dy)


def normalization_scale(cam: CameraIntrinsics, k: float | None = None) -> float:
    """Resolved k; by default image corners land near +-1."""
    if k is None:
        k = max(cam.width / (2.0 * cam.fx), cam.height / (2.0 * cam.fy))
    if k <= 0:
        raise ConfigError(f"normalization scale k must be positive, got {k}")
    return float(k)


def normalize_input(
    poses2d: np.ndarray, cam: CameraIntrinsics, k: float | None = None
) -> np.ndarray:
    """Map pixel coordinates to roughly [-1, 1]: (p - c) / (f * k)."""
    k = normalization_scale(cam, k)
    poses2d = np.asarray(poses2d, dtype=np.float64)
    out = np.empty_like(poses2d)
    out[..., 0] = (poses2d[..., 0] - cam.cx) / (cam.fx * k)
    out[..., 1] = (poses2d[..., 1] - cam.cy) / (cam.fy * k)
    return out


def denormalize_input(
    normalized: np.ndarray, cam: CameraIntrinsics, k: float | None = None
) -> np.ndarray:
    """Exact inverse of :func:`normalize_input`."""
    k = normalization_scale(cam, k)
    normalized = np.asarray(normalized, dtype=np.float64)
    out = np.empty_like(normalized)
    out[..., 0] = normalized[..., 0] * (cam.fx * k) + cam.cx
    out[..., 1] = normalized[..., 1] * (cam.fy * k) + cam.cy
    return out


def predict_batch(
    model: EstimatorModel,
    poses2d: np.ndarray,
    cam: CameraIntrinsics,
    k: float | None = None,
) -> np.ndarray:
    """Pixel poses (B, J, 2) -> root-relative mm predictions (B, J, 3)."""
    poses2d = np.asarray(poses2d, dtype=np.float64)
    flat = normalize_input(poses2d, cam, k).reshape(poses2d.shape[0], -1)
    y = forward(model, flat)
    return y.reshape(poses2d.shape[0], model.joint_count, 3)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    epochs: int = 30
    optimizer: str = "adam"
    rng_seed: int = 0
    gt_fraction: float = 0.25
    lambda_co: float = 1.0

    def __post_init__(self):
        # 0 is allowed so a frozen-parameter control run stays expressible
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(
                f"unknown optimizer {self.optimizer!r}, expected one of {OPTIMIZERS}"
            )
        if not (0.0 < self.gt_fraction <= 1.0):
            raise ConfigError(
                f"gt_fraction must be in (0, 1], got {self.gt_fraction}"
            )
        if self.lambda_co < 0:
            raise ConfigError(f"lambda_co must be >= 0, got {self.lambda_co}")


class _Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * (g * g)
            mhat = self.m[k] / b1t
            vhat = self.v[k] / b2t
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class _Sgd:
    def __init__(self, params, lr):
        self.lr = lr

    def step(self, params, grads):
        for k in params:
            params[k] -= self.lr * grads[k]


@dataclass
class TrainResult:
    model: EstimatorModel
    trace: list[dict] = field(default_factory=list)
    gt_weights: np.ndarray | None = None


def train(
    model: EstimatorModel,
    gen2d: np.ndarray,
    gen3d: np.ndarray,
    gt2d: np.ndarray | None,
    gt3d: np.ndarray | None,
    hist_gt,
    hist_gen,
    cam: CameraIntrinsics,
    cfg: TrainConfig,
    crm_cfg: CrmConfig,
    input_scale: float | None = None,
) -> TrainResult:
    """Optimize the composed objective.

    Each step consumes one generated batch (plain pose loss) and one
    ground-truth batch (counterfactually weighted pose loss); gradients
    are summed as L_P + lambda_co * L_co. The ground-truth pool is the
    gt_fraction subsample of the provided arrays; it cycles with an
    independent reshuffle whenever exhausted. With lambda_co = 0 or no
    ground-truth data the co term is skipped entirely, so updates match
    generated-only training. Three independent RNG streams (init is the
    model's own, one for generated batch order, one for ground-truth
    sampling) keep that equivalence exact.

    2D inputs are raw pixels; normalization happens here and weights
    are evaluated on the raw pixels.
    """
    k = normalization_scale(cam, input_scale)
    gen2d = np.asarray(gen2d, dtype=np.float64)
    gen3d = np.asarray(gen3d, dtype=np.float64)
    n_gen = gen2d.shape[0]
    if n_gen == 0:
        raise ConfigError("generated dataset is empty")
    xs_gen = normalize_input(gen2d, cam, k).reshape(n_gen, -1)
    ys_gen = gen3d.reshape(n_gen, -1)

    use_co = (
        cfg.lambda_co > 0.0
        and gt2d is not None
        and gt3d is not None
        and np.asarray(gt2d).shape[0] > 0
    )

    rng_gen = np.random.default_rng(np.random.SeedSequence((cfg.rng_seed, 1)))
    rng_gt = np.random.default_rng(np.random.SeedSequence((cfg.rng_seed, 2)))

    gt_weights = None
    if use_co:
        gt2d = np.asarray(gt2d, dtype=np.float64)
        gt3d = np.asarray(gt3d, dtype=np.float64)
        n_pool = gt2d.shape[0]
        take = max(1, int(np.ceil(cfg.gt_fraction * n_pool)))
        sel = np.sort(rng_gt.choice(n_pool, size=min(take, n_pool), replace=False))
        gt2d, gt3d = gt2d[sel], gt3d[sel]
        n_gt = gt2d.shape[0]
        xs_gt = normalize_input(gt2d, cam, k).reshape(n_gt, -1)
        ys_gt = gt3d.reshape(n_gt, -1)
        if crm_cfg.weight_source == "gt_batch" or crm_cfg.force_unit_weight:
            gt_weights = resolve_weights(gt2d, hist_gt, hist_gen, crm_cfg)

    bs = min(cfg.batch_size, n_gen)
    steps = n_gen // bs

    opt = (
        _Adam(model.params, cfg.learning_rate)
        if cfg.optimizer == "adam"
        else _Sgd(model.params, cfg.learning_rate)
    )

    trace: list[dict] = []
    gt_order = None
    gt_pos = 0
    for epoch in range(cfg.epochs):
        order = rng_gen.permutation(n_gen)
        sum_p = sum_co = 0.0
        for step in range(steps):
            idx = order[step * bs : (step + 1) * bs]
            loss_p, grads = backward(model, xs_gen[idx], ys_gen[idx])

            loss_co = 0.0
            if use_co:
                if gt_order is None or gt_pos + bs > len(gt_order):
                    gt_order = rng_gt.permutation(n_gt)
                    while len(gt_order) < bs:  # tiny pools just repeat
                        gt_order = np.concatenate([gt_order, rng_gt.permutation(n_gt)])
                    gt_pos = 0
                gidx = gt_order[gt_pos : gt_pos + bs]
                gt_pos += bs
                if gt_weights is not None:
                    w = gt_weights[gidx]
                else:
                    # literal pairing: weights come from this step's
                    # generated batch, matched by position
                    w = cips_weights(gen2d[idx], hist_gt, hist_gen, crm_cfg)
                loss_co, co_grads = backward(model, xs_gt[gidx], ys_gt[gidx], w)
                for key in grads:
                    grads[key] += cfg.lambda_co * co_grads[key]

            loss_total = loss_p + cfg.lambda_co * loss_co
            if not np.isfinite(loss_total):
                raise TrainingDivergedError(epoch, step, loss_total)
            opt.step(model.params, grads)
            sum_p += loss_p
            sum_co += loss_co
        if steps:
            trace.append(
                {
                    "epoch": epoch,
                    "loss_pose": sum_p / steps,
                    "loss_co": sum_co / steps,
                    "loss_total": (sum_p + cfg.lambda_co * sum_co) / steps,
                }
            )
    full_weights = None
    if use_co and gt_weights is not None:
        full_weights = gt_weights
    return TrainResult(model=model, trace=trace, gt_weights=full_weights)
