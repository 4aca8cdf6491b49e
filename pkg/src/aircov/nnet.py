"""Small feed-forward network engine on numpy.

Everything the predictor needs and nothing more: rectifier MLPs with a
linear output layer, masked mean-squared-error loss, exact reverse-mode
gradients, Adam updates, a seeded training loop with plateau-based early
stopping, and a finite-difference gradient checker. Batches are plain
float64 arrays; training is single-threaded and bit-reproducible for a
fixed seed.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from . import serio
from .errors import InvalidInputError, ShapeError

ACTIVATIONS = ("relu",)


@dataclass
class MlpSpec:
    input_dim: int
    hidden_layers: int
    hidden_width: int
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        for name in ("input_dim", "hidden_layers", "hidden_width", "output_dim"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")

    def layer_dims(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def mlp_init(spec: MlpSpec, seed: int) -> Mlp:
    """Fan-in scaled uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    dims = spec.layer_dims()
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec, weights, biases)


def param_count(m: Mlp) -> int:
    return sum(w.size for w in m.weights) + sum(b.size for b in m.biases)


def _gemm(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # BLAS dispatches a 1-row product to a different kernel than larger
    # batches; evaluating it as a 2-row product keeps single-sample outputs
    # bit-identical to batched ones.
    if a.shape[0] == 1:
        return (np.concatenate([a, a], axis=0) @ w)[:1]
    return a @ w


def _as_batch(x, dim: int, what: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ShapeError(f"{what} must have {dim} columns, got shape {arr.shape}")
    return arr, single


def forward_cached(m: Mlp, x2d: np.ndarray):
    """Forward pass keeping layer inputs and pre-activations for backprop."""
    acts = [x2d]
    zs = []
    a = x2d
    last = len(m.weights) - 1
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = _gemm(a, w) + b
        zs.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return a, (acts, zs)


def forward(m: Mlp, x):
    """Evaluate the network; accepts a single vector or an (n, d) batch."""
    arr, single = _as_batch(x, m.spec.input_dim, "input")
    out, _ = forward_cached(m, arr)
    return out[0] if single else out


def masked_mse(y, yhat, mask=None) -> float:
    """Mean squared error over the masked-in entries (pooled over the batch)."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ShapeError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    if mask is None:
        mask = np.ones(y.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != y.shape:
            raise ShapeError(f"mask shape {mask.shape} does not match {y.shape}")
    count = int(mask.sum())
    if count == 0:
        raise InvalidInputError("mask selects no entries")
    diff = (yhat - y)[mask]
    return float(diff @ diff / count)


def loss_output_grad(y, yhat, mask):
    """Loss and its gradient with respect to the prediction."""
    count = int(mask.sum())
    if count == 0:
        raise InvalidInputError("mask selects no entries")
    diff = np.where(mask, yhat - y, 0.0)
    loss = float((diff * diff).sum() / count)
    return loss, (2.0 / count) * diff


def backward_from_output(m: Mlp, cache, dout: np.ndarray):
    """Backpropagate an output gradient; returns (weight grads, bias grads)."""
    acts, zs = cache
    grads_w = [None] * len(m.weights)
    grads_b = [None] * len(m.biases)
    delta = dout
    for i in range(len(m.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ m.weights[i].T) * (zs[i - 1] > 0.0)
    return grads_w, grads_b


def backward(m: Mlp, x, y, mask=None):
    """Exact gradients of masked_mse(forward(m, x), y) w.r.t. all parameters."""
    x2d, _ = _as_batch(x, m.spec.input_dim, "input")
    y2d, _ = _as_batch(y, m.spec.output_dim, "target")
    if mask is None:
        mask2d = np.ones(y2d.shape, dtype=bool)
    else:
        mask2d, _ = _as_batch(np.asarray(mask, dtype=float), m.spec.output_dim, "mask")
        mask2d = mask2d.astype(bool)
    out, cache = forward_cached(m, x2d)
    _, dout = loss_output_grad(y2d, out, mask2d)
    return backward_from_output(m, cache, dout)


@dataclass
class AdamState:
    step: int
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]


def adam_init(m: Mlp) -> AdamState:
    return AdamState(
        step=0,
        m_w=[np.zeros_like(w) for w in m.weights],
        v_w=[np.zeros_like(w) for w in m.weights],
        m_b=[np.zeros_like(b) for b in m.biases],
        v_b=[np.zeros_like(b) for b in m.biases],
    )


def optimizer_step(m: Mlp, grads, state: AdamState, lr: float,
                   beta1=0.9, beta2=0.999, eps=1e-8) -> Mlp:
    """One Adam update, in place; returns the model for convenience."""
    grads_w, grads_b = grads
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for params, gs, ms, vs in (
        (m.weights, grads_w, state.m_w, state.v_w),
        (m.biases, grads_b, state.m_b, state.v_b),
    ):
        for p, g, mm, vv in zip(params, gs, ms, vs):
            mm *= beta1
            mm += (1.0 - beta1) * g
            vv *= beta2
            vv += (1.0 - beta2) * (g * g)
            p -= lr * (mm / bc1) / (np.sqrt(vv / bc2) + eps)
    return m


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    max_epochs: int = 100
    early_stop_window: int = 10
    early_stop_rel_improvement: float = 0.01
    batch_size: int = 256
    seed: int = 0
    # Stop only when BOTH curves have stalled (the stricter reading of the
    # plateau rule); set False to stop when either one stalls.
    early_stop_both: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be > 0")
        if self.early_stop_window < 1:
            raise InvalidInputError("early_stop_window must be >= 1")
        if not 0 < self.early_stop_rel_improvement < 1:
            raise InvalidInputError("early_stop_rel_improvement must be in (0, 1)")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise InvalidInputError("max_epochs must be >= 1")


@dataclass
class TrainHistory:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def _rel_improvement(prev: float, cur: float) -> float:
    if prev <= 0.0:
        return 0.0
    return (prev - cur) / prev


def early_stop_epoch(train_losses, val_losses, window: int, threshold: float,
                     require_both: bool = True):
    """First epoch index (0-based) at which the plateau rule fires, or None.

    An epoch stalls when its loss improved by no more than ``threshold``
    relative to the previous epoch; the rule fires once ``window``
    consecutive epochs have stalled on both curves (or on either one when
    ``require_both`` is False).
    """
    run = 0
    for e in range(1, len(train_losses)):
        stall_t = _rel_improvement(train_losses[e - 1], train_losses[e]) <= threshold
        stall_v = _rel_improvement(val_losses[e - 1], val_losses[e]) <= threshold
        stalled = (stall_t and stall_v) if require_both else (stall_t or stall_v)
        run = run + 1 if stalled else 0
        if run >= window:
            return e
    return None


def fused_forward(nets: list[Mlp], xs: list[np.ndarray]) -> np.ndarray:
    """Sum of the subnet outputs; the one-net case is a plain forward."""
    out = forward(nets[0], xs[0])
    for net, x in zip(nets[1:], xs[1:]):
        out = out + forward(net, x)
    return out


def train_ensemble(nets: list[Mlp], train_set, val_set, cfg: TrainConfig):
    """Train additive subnets against a shared masked-MSE objective.

    ``train_set``/``val_set`` are (list of per-subnet input matrices, target
    matrix, bool mask). Returns the nets loaded with the best-validation
    weights plus the loss history.
    """
    xs_tr, y_tr, mask_tr = train_set
    xs_va, y_va, mask_va = val_set
    n = y_tr.shape[0]
    if n == 0 or y_va.shape[0] == 0:
        raise InvalidInputError("training and validation sets must be nonempty")
    if len(xs_tr) != len(nets) or len(xs_va) != len(nets):
        raise ShapeError("one input matrix required per subnet")

    rng = np.random.default_rng(cfg.seed)
    states = [adam_init(net) for net in nets]
    history = TrainHistory()
    best_val = np.inf
    best_weights = None

    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            outs, caches = [], []
            for net, x in zip(nets, xs_tr):
                out, cache = forward_cached(net, x[idx])
                outs.append(out)
                caches.append(cache)
            yhat = outs[0]
            for o in outs[1:]:
                yhat = yhat + o
            _, dout = loss_output_grad(y_tr[idx], yhat, mask_tr[idx])
            for net, cache, state in zip(nets, caches, states):
                grads = backward_from_output(net, cache, dout)
                optimizer_step(net, grads, state, cfg.learning_rate)

        train_loss = masked_mse(y_tr, fused_forward(nets, xs_tr), mask_tr)
        val_loss = masked_mse(y_va, fused_forward(nets, xs_va), mask_va)
        history.train_losses.append(train_loss)
        history.val_losses.append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            history.best_epoch = epoch
            best_weights = [(copy.deepcopy(net.weights), copy.deepcopy(net.biases))
                            for net in nets]

        if early_stop_epoch(history.train_losses, history.val_losses,
                            cfg.early_stop_window,
                            cfg.early_stop_rel_improvement,
                            cfg.early_stop_both) is not None:
            history.stopped_early = True
            break

    if best_weights is not None:
        for net, (w, b) in zip(nets, best_weights):
            net.weights = w
            net.biases = b
    return nets, history


def train(model: Mlp, train_set, val_set, cfg: TrainConfig):
    """Train a single MLP; ``train_set``/``val_set`` are (X, Y, mask)."""
    x_tr, y_tr, m_tr = train_set
    x_va, y_va, m_va = val_set
    nets, history = train_ensemble(
        [model], ([x_tr], y_tr, m_tr), ([x_va], y_va, m_va), cfg)
    return nets[0], history


def gradient_check(nets: list[Mlp], xs: list[np.ndarray], y: np.ndarray,
                   mask: np.ndarray, h: float = 1e-5) -> float:
    """Max relative disagreement between analytic and central-difference grads."""
    def loss_at():
        yhat = fused_forward(nets, xs)
        return masked_mse(y, yhat, mask)

    worst = 0.0
    for net, x in zip(nets, xs):
        out, cache = forward_cached(net, x)
        # gradient of the FUSED loss w.r.t. this subnet's output equals the
        # gradient w.r.t. the sum
        yhat = fused_forward(nets, xs)
        _, dout = loss_output_grad(y, yhat, mask)
        grads_w, grads_b = backward_from_output(net, cache, dout)
        for params, grads in ((net.weights, grads_w), (net.biases, grads_b)):
            for p, g in zip(params, grads):
                flat = p.reshape(-1)
                gflat = g.reshape(-1)
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + h
                    lp = loss_at()
                    flat[i] = orig - h
                    lm = loss_at()
                    flat[i] = orig
                    fd = (lp - lm) / (2.0 * h)
                    denom = max(abs(fd), abs(gflat[i]), 1e-8)
                    worst = max(worst, abs(fd - gflat[i]) / denom)
    return worst


def save_mlp(m: Mlp, path) -> None:
    """Serialize spec and parameters; bit-exact round trip."""
    meta = {
        "kind": "mlp",
        "version": 1,
        "spec": {
            "input_dim": m.spec.input_dim,
            "hidden_layers": m.spec.hidden_layers,
            "hidden_width": m.spec.hidden_width,
            "output_dim": m.spec.output_dim,
            "activation": m.spec.activation,
        },
    }
    arrays = []
    for i, (w, b) in enumerate(zip(m.weights, m.biases)):
        arrays.append((f"w{i}", w))
        arrays.append((f"b{i}", b))
    serio.write_blob(path, meta, arrays)


def load_mlp(path) -> Mlp:
    meta, arrays = serio.read_blob(path)
    if meta.get("kind") != "mlp":
        raise InvalidInputError(f"{path}: not an MLP weight file")
    spec = MlpSpec(**meta["spec"])
    n_layers = spec.hidden_layers + 1
    weights = [arrays[f"w{i}"] for i in range(n_layers)]
    biases = [arrays[f"b{i}"] for i in range(n_layers)]
    return Mlp(spec, weights, biases)
