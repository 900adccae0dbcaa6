"""From-scratch dense MLP: forward pass, backprop, weighted cross-entropy,
Adam, the training loop, and JSON model serialization.

All math is float64 numpy. Layer l stores weights of shape (out, in); the
classifier head is a 2-way softmax with index 0 = Closed, 1 = Open.
"""

import csv
import json
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Scaler, SplitDataset

MODEL_FORMAT_VERSION = 1

# 10 hidden layers wide-to-narrow, 5 inputs, 2-way softmax head
DEFAULT_LAYER_DIMS = [5, 2048, 1024, 512, 256, 128, 64, 32, 16, 8, 4, 2]

LOG_CLAMP = 1e-12


class ModelFileError(ValueError):
    pass


class VersionMismatchError(ModelFileError):
    pass


class ShapeMismatchError(ModelFileError):
    pass


class CorruptModelError(ModelFileError):
    pass


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int, what: str):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite {what} at epoch {epoch}, batch {batch}")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 0.0003
    beta1: float = 0.87
    beta2: float = 0.999
    epsilon_adam: float = 1e-8
    w_closed: float = 0.90
    w_open: float = 0.05
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (self.learning_rate >= 0):
            raise ValueError("learning_rate must be >= 0")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not (0 <= b < 1):
                raise ValueError(f"{name} must be in [0, 1)")
        if not (self.w_closed > 0 and self.w_open > 0):
            raise ValueError("class weights must be > 0")

    def class_weights(self) -> np.ndarray:
        return np.array([self.w_closed, self.w_open])


@dataclass
class Mlp:
    layer_dims: List[int]
    weights: List[np.ndarray]  # (out, in) per layer
    biases: List[np.ndarray]
    scaler: Optional[Scaler] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ShapeMismatchError("layer count does not match layer_dims")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[l + 1], self.layer_dims[l])
            if w.shape != want:
                raise ShapeMismatchError(f"weight {l} has shape {w.shape}, expected {want}")
            if b.shape != (self.layer_dims[l + 1],):
                raise ShapeMismatchError(f"bias {l} has shape {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite parameter in layer {l}")

    def copy(self) -> "Mlp":
        return Mlp(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            scaler=self.scaler,
            meta=dict(self.meta),
        )


@dataclass
class AdamState:
    m_w: List[np.ndarray]
    v_w: List[np.ndarray]
    m_b: List[np.ndarray]
    v_b: List[np.ndarray]
    t: int = 0
    # scratch buffers so the hot update loop does no allocation
    scratch_w: List[np.ndarray] = field(default_factory=list)
    scratch_b: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, mlp: Mlp) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in mlp.weights],
            v_w=[np.zeros_like(w) for w in mlp.weights],
            m_b=[np.zeros_like(b) for b in mlp.biases],
            v_b=[np.zeros_like(b) for b in mlp.biases],
            scratch_w=[np.zeros_like(w) for w in mlp.weights],
            scratch_b=[np.zeros_like(b) for b in mlp.biases],
        )


def init_mlp(
    seed: int,
    layer_dims: Optional[Sequence[int]] = None,
    scaler: Optional[Scaler] = None,
) -> Mlp:
    """He initialization: W ~ N(0, 2/fan_in), biases zero."""
    dims = list(layer_dims if layer_dims is not None else DEFAULT_LAYER_DIMS)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_dims=dims, weights=weights, biases=biases, scaler=scaler,
               meta={"seed": seed})


def _softmax(z: np.ndarray) -> np.ndarray:
    zmax = np.max(z, axis=-1, keepdims=True)
    e = np.exp(z - zmax)
    return e / np.sum(e, axis=-1, keepdims=True)


def _forward_scaled(mlp: Mlp, x: np.ndarray, keep_cache: bool = False):
    """Forward over already-scaled inputs; x is (B, in). Returns probs and,
    optionally, the per-layer post-activation cache for backprop."""
    a = x
    cache = [a] if keep_cache else None
    last = len(mlp.weights) - 1
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        a = _softmax(z) if l == last else np.maximum(z, 0.0)
        if keep_cache:
            cache.append(a)
    return (a, cache) if keep_cache else a


def forward(mlp: Mlp, features: np.ndarray) -> np.ndarray:
    """Class probabilities for raw features (the model's scaler is applied
    internally when present). Accepts (5,) or (B, 5)."""
    x = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input feature")
    single = x.ndim == 1
    x = x.reshape(-1, mlp.layer_dims[0])
    if mlp.scaler is not None:
        x = mlp.scaler.transform(x)
    p = _forward_scaled(mlp, x)
    return p[0] if single else p


def predict(mlp: Mlp, features: np.ndarray) -> np.ndarray:
    """Hard labels; an exact tie goes to Closed (0), the safe state."""
    p = forward(mlp, features)
    if p.ndim == 1:
        return int(p[1] > p[0])
    return (p[:, 1] > p[:, 0]).astype(np.int64)


def weighted_ce_loss(
    probabilities: np.ndarray, labels: np.ndarray, class_weights: np.ndarray
) -> float:
    """Mean over the batch of w_label * (-ln p_label); p clamped at 1e-12."""
    p = np.asarray(probabilities, dtype=np.float64).reshape(-1, 2)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    p_true = np.maximum(p[np.arange(len(y)), y], LOG_CLAMP)
    w = np.asarray(class_weights)[y]
    return float(np.mean(w * -np.log(p_true)))


def backward(
    mlp: Mlp,
    features: np.ndarray,
    labels: np.ndarray,
    class_weights: np.ndarray,
) -> Tuple[List[np.ndarray], List[np.ndarray], float]:
    """Exact gradients of the mean weighted CE loss over the batch.

    Inputs are raw features (scaler applied internally). Softmax and CE are
    fused: the output pre-activation gradient is w_label*(p - onehot)/B.
    Returns (weight grads, bias grads, batch loss).
    """
    x = np.asarray(features, dtype=np.float64).reshape(-1, mlp.layer_dims[0])
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if mlp.scaler is not None:
        x = mlp.scaler.transform(x)
    probs, cache = _forward_scaled(mlp, x, keep_cache=True)
    loss = weighted_ce_loss(probs, y, class_weights)

    batch = x.shape[0]
    w_sample = np.asarray(class_weights)[y]
    delta = probs.copy()
    delta[np.arange(batch), y] -= 1.0
    delta *= (w_sample / batch)[:, None]

    grads_w: List[np.ndarray] = [None] * len(mlp.weights)
    grads_b: List[np.ndarray] = [None] * len(mlp.biases)
    for l in range(len(mlp.weights) - 1, -1, -1):
        a_prev = cache[l]
        grads_w[l] = delta.T @ a_prev
        grads_b[l] = delta.sum(axis=0)
        if not (np.all(np.isfinite(grads_w[l])) and np.all(np.isfinite(grads_b[l]))):
            raise TrainingDivergedError(-1, -1, f"gradient in layer {l}")
        if l > 0:
            delta = (delta @ mlp.weights[l]) * (cache[l] > 0.0)
    return grads_w, grads_b, loss


def adam_step(
    mlp: Mlp,
    grads: Tuple[List[np.ndarray], List[np.ndarray]],
    adam: AdamState,
    cfg: TrainConfig,
) -> Tuple[Mlp, AdamState]:
    """Standard Adam with bias correction; updates mlp and adam in place.

    The update lr * m_hat / (sqrt(v_hat) + eps) is applied in the fused,
    algebraically identical form lr*sqrt(c2)/c1 * m / (sqrt(v) + eps*sqrt(c2))
    with c1 = 1 - beta1^t, c2 = 1 - beta2^t, which halves the elementwise
    passes over the parameter arrays.
    """
    grads_w, grads_b = grads
    adam.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** adam.t
    sqrt_c2 = np.sqrt(1.0 - b2 ** adam.t)
    alpha_t = cfg.learning_rate * sqrt_c2 / c1
    eps_t = cfg.epsilon_adam * sqrt_c2
    if not adam.scratch_w:
        adam.scratch_w = [np.zeros_like(w) for w in adam.m_w]
        adam.scratch_b = [np.zeros_like(b) for b in adam.m_b]
    for params, gs, ms, vs, scratch in (
        (mlp.weights, grads_w, adam.m_w, adam.v_w, adam.scratch_w),
        (mlp.biases, grads_b, adam.m_b, adam.v_b, adam.scratch_b),
    ):
        for theta, g, m, v, s in zip(params, gs, ms, vs, scratch):
            m *= b1
            np.multiply(g, 1.0 - b1, out=s)
            m += s
            v *= b2
            np.multiply(g, g, out=s)
            s *= 1.0 - b2
            v += s
            np.sqrt(v, out=s)
            s += eps_t
            np.divide(m, s, out=s)
            s *= alpha_t
            theta -= s
    return mlp, adam


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_f1: float


def train(
    mlp: Mlp, split: SplitDataset, cfg: TrainConfig
) -> Tuple[Mlp, List[EpochRecord]]:
    """Minibatch Adam training with per-epoch shuffling; returns the
    parameters with the best validation F1 seen (ties keep the earliest)."""
    from .evalbench import confusion, f1_accuracy  # local import: avoids cycle

    if cfg.epochs == 0:
        return mlp.copy(), []
    if len(split.train) == 0:
        raise ValueError("training split is empty")

    x_train = split.train.features
    if mlp.scaler is not None:
        x_train = mlp.scaler.transform(x_train)
    y_train = split.train.labels
    weights = cfg.class_weights()
    n = len(y_train)
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState.zeros_like(mlp)
    # training operates on a working copy so the caller's initial model is kept
    work = mlp.copy()
    scaler_backup = work.scaler
    work.scaler = None  # inputs pre-scaled above

    best = work.copy()
    best_f1 = -1.0
    history: List[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        losses = []
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            try:
                gw, gb, loss = backward(work, x_train[idx], y_train[idx], weights)
            except TrainingDivergedError as e:
                raise TrainingDivergedError(epoch, bi, "gradient") from e
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, bi, "loss")
            adam_step(work, (gw, gb), adam, cfg)
            losses.append(loss)

        val_probs = forward_with_scaler(work, scaler_backup, split.validation.features)
        val_loss = weighted_ce_loss(val_probs, split.validation.labels, weights)
        val_pred = (val_probs[:, 1] > val_probs[:, 0]).astype(np.int64)
        metrics = f1_accuracy(confusion(val_pred, split.validation.labels))
        history.append(EpochRecord(epoch, float(np.mean(losses)), val_loss, metrics.f1))
        if metrics.f1 > best_f1:
            best_f1 = metrics.f1
            best = work.copy()

    best.scaler = scaler_backup
    best.meta["train_config"] = asdict(cfg)
    return best, history


def forward_with_scaler(mlp: Mlp, scaler: Optional[Scaler], features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64).reshape(-1, mlp.layer_dims[0])
    if scaler is not None:
        x = scaler.transform(x)
    return _forward_scaled(mlp, x)


def finite_difference_gradients(
    mlp: Mlp,
    features: np.ndarray,
    labels: np.ndarray,
    class_weights: np.ndarray,
    eps: float = 1e-5,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Central-difference gradients of the batch loss, one parameter at a
    time. Independent check of backward(); only viable on small networks."""

    def loss_at(m: Mlp) -> float:
        probs = forward(m, features)
        return weighted_ce_loss(probs, labels, class_weights)

    work = mlp.copy()
    grads_w, grads_b = [], []
    for params, out in ((work.weights, grads_w), (work.biases, grads_b)):
        for arr in params:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + eps
                lp = loss_at(work)
                arr[ix] = orig - eps
                lm = loss_at(work)
                arr[ix] = orig
                g[ix] = (lp - lm) / (2.0 * eps)
            out.append(g)
    return grads_w, grads_b


def save_model(mlp: Mlp, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_dims": list(mlp.layer_dims),
        "activation": {"hidden": "relu", "output": "softmax"},
        "scaler": (
            {"mean": mlp.scaler.mean.tolist(), "std": mlp.scaler.std.tolist()}
            if mlp.scaler is not None else None
        ),
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
        "train_config_echo": mlp.meta.get("train_config"),
        "seed": mlp.meta.get("seed"),
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, separators=(",", ":"))


def load_model(path) -> Mlp:
    try:
        with open(path) as f:
            doc = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise CorruptModelError(f"unreadable model file: {e}") from None
    if not isinstance(doc, dict):
        raise CorruptModelError("model file is not a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatchError(f"format_version {version!r}, expected {MODEL_FORMAT_VERSION}")
    try:
        dims = [int(d) for d in doc["layer_dims"]]
        weights = [np.array(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        scaler_doc = doc["scaler"]
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptModelError(f"missing or malformed field: {e}") from None
    scaler = None
    if scaler_doc is not None:
        try:
            scaler = Scaler(
                mean=np.array(scaler_doc["mean"], dtype=np.float64),
                std=np.array(scaler_doc["std"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptModelError(f"malformed scaler: {e}") from None
    meta = {}
    if doc.get("seed") is not None:
        meta["seed"] = doc["seed"]
    if doc.get("train_config_echo") is not None:
        meta["train_config"] = doc["train_config_echo"]
    return Mlp(layer_dims=dims, weights=weights, biases=biases, scaler=scaler, meta=meta)


def write_history_csv(history: List[EpochRecord], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss", "val_f1"])
        for rec in history:
            writer.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_loss), repr(rec.val_f1)])
