"""From-scratch classifiers: k-NN, linear SVM, MLP, and a 1-D CNN.

All training is plain mini-batch stochastic gradient descent with momentum,
fully seeded, in numpy.  Every differentiable model exposes
``loss_and_grads`` (dropout disabled) so its backward pass can be verified
against central finite differences with :func:`gradient_check`.

Trained models are immutable in practice (weights are not mutated after
training) and safe to share for inference.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODEL_MAGIC = b"BMDL"
MODEL_VERSION = 1
_MODEL_PREAMBLE = struct.Struct("<4sHI")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings shared by the gradient-trained models."""

    seed: int = 0
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _glorot_uniform(rng, fan_in: int, fan_out: int, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and d(loss)/d(logits)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    eps = np.finfo(logits.dtype).tiny
    loss = -np.mean(np.log(probs[np.arange(n), labels] + eps))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def _sgd_epochs(n: int, config: TrainConfig, rng):
    """Yield per-epoch lists of batch index arrays (seeded shuffles)."""
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        yield [
            perm[i : i + config.batch_size]
            for i in range(0, n, config.batch_size)
        ]


# ---------------------------------------------------------------------------
# k-nearest neighbors
# ---------------------------------------------------------------------------

def _vote(labels_k: np.ndarray, num_classes: int) -> np.ndarray:
    """Majority vote per row; ties resolve to the smallest class index."""
    m = labels_k.shape[0]
    counts = np.zeros((m, num_classes), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(m), labels_k.shape[1]), labels_k.ravel()), 1)
    return counts.argmax(axis=1)


class KnnModel:
    """Euclidean k-nearest-neighbor classifier over flattened trials."""

    kind = "knn"

    def __init__(self, train_x: np.ndarray, train_y: np.ndarray, k: int = 7):
        train_x = np.asarray(train_x)
        train_y = np.asarray(train_y, dtype=np.int64)
        if train_x.ndim != 2 or train_x.shape[0] != train_y.shape[0]:
            raise ValueError("train_x must be (N, D) aligned with train_y")
        if train_x.shape[0] == 0:
            raise ValueError("empty training set")
        if not 1 <= k <= train_x.shape[0]:
            raise ValueError(f"k={k} out of range 1..{train_x.shape[0]}")
        self.x = train_x
        self.y = train_y
        self.k = k
        self.num_classes = int(train_y.max()) + 1
        self._sq_norms = np.einsum("nd,nd->n", train_x, train_x)

    def predict(self, queries: np.ndarray, chunk: int = 256) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries))
        out = np.empty(queries.shape[0], dtype=np.int64)
        for start in range(0, queries.shape[0], chunk):
            q = queries[start : start + chunk]
            d2 = (
                np.einsum("md,md->m", q, q)[:, None]
                - 2.0 * (q @ self.x.T)
                + self._sq_norms[None, :]
            )
            # stable sort: equidistant neighbors resolve to lower trial index
            nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            out[start : start + chunk] = _vote(self.y[nearest], self.num_classes)
        return out


def knn_classify(
    train_x: np.ndarray, train_y: np.ndarray, query: np.ndarray, k: int
) -> int:
    """Label of a single query by majority vote among its k nearest."""
    model = KnnModel(train_x, train_y, k=k)
    return int(model.predict(query[None, :])[0])


# ---------------------------------------------------------------------------
# Linear model (one-vs-rest SVM)
# ---------------------------------------------------------------------------

class LinearModel:
    """Per-class linear scores; prediction is the argmax.

    ``loss_kind="hinge"`` is the one-vs-rest SVM objective used for
    training; ``loss_kind="squared"`` is the differentiable variant used by
    gradient checking.
    """

    kind = "linear"

    def __init__(self, weights: np.ndarray, biases: np.ndarray,
                 l2: float = 0.0, loss_kind: str = "hinge"):
        if loss_kind not in ("hinge", "squared"):
            raise ValueError(f"unknown loss_kind {loss_kind!r}")
        self.w = np.asarray(weights)
        self.b = np.asarray(biases)
        self.l2 = float(l2)
        self.loss_kind = loss_kind

    @classmethod
    def zeros(cls, dim: int, classes: int, dtype=np.float64, **kw) -> "LinearModel":
        return cls(np.zeros((dim, classes), dtype=dtype),
                   np.zeros(classes, dtype=dtype), **kw)

    def scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.b

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.scores(x).argmax(axis=1)

    def param_arrays(self):
        return [self.w, self.b]

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        n = x.shape[0]
        targets = -np.ones((n, self.w.shape[1]), dtype=x.dtype)
        targets[np.arange(n), y] = 1.0
        s = self.scores(x)
        if self.loss_kind == "hinge":
            margins = 1.0 - targets * s
            loss = np.maximum(margins, 0.0).sum(axis=1).mean()
            ds = np.where(margins > 0, -targets, 0.0) / n
        else:
            diff = s - targets
            loss = 0.5 * np.einsum("nc,nc->", diff, diff) / n
            ds = diff / n
        loss += 0.5 * self.l2 * float(np.einsum("dc,dc->", self.w, self.w))
        gw = x.T @ ds + self.l2 * self.w
        gb = ds.sum(axis=0)
        return float(loss), [gw, gb]


def train_svm(
    train_x: np.ndarray,
    train_y: np.ndarray,
    config: TrainConfig,
    l2: float = 1e-4,
) -> LinearModel:
    """One-vs-rest linear SVM by mini-batch subgradient descent.

    Hinge loss summed over classes plus an explicit L2 penalty on the
    weights (biases unpenalized).  Deterministic under the config seed.
    """
    train_x = np.asarray(train_x)
    train_y = np.asarray(train_y, dtype=np.int64)
    classes = int(train_y.max()) + 1
    if np.unique(train_y).size < 2:
        raise ValueError("SVM training needs at least 2 classes")
    dtype = train_x.dtype if train_x.dtype in (np.float32, np.float64) else np.float64
    rng = np.random.default_rng(config.seed)
    model = LinearModel.zeros(train_x.shape[1], classes, dtype=dtype, l2=l2)
    vel = [np.zeros_like(p) for p in model.param_arrays()]
    for batches in _sgd_epochs(train_x.shape[0], config, rng):
        for idx in batches:
            loss, grads = model.loss_and_grads(train_x[idx], train_y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"SVM loss diverged with {config}")
            for p, v, g in zip(model.param_arrays(), vel, grads):
                v *= config.momentum
                v -= config.learning_rate * g
                p += v
    return model


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class MlpModel:
    """Two fully connected layers with a sigmoid after the first."""

    kind = "mlp"

    def __init__(self, w1, b1, w2, b2, weight_decay: float = 0.0):
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2
        self.weight_decay = float(weight_decay)

    @classmethod
    def init(cls, dim: int, hidden: int, classes: int, seed: int,
             dtype=np.float64, weight_decay: float = 0.0) -> "MlpModel":
        rng = np.random.default_rng(seed)
        return cls(
            _glorot_uniform(rng, dim, hidden, (dim, hidden), dtype),
            np.zeros(hidden, dtype=dtype),
            _glorot_uniform(rng, hidden, classes, (hidden, classes), dtype),
            np.zeros(classes, dtype=dtype),
            weight_decay=weight_decay,
        )

    def param_arrays(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def logits(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(x @ self.w1 + self.b1) @ self.w2 + self.b2

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.logits(x).argmax(axis=1)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray):
        hidden = _sigmoid(x @ self.w1 + self.b1)
        logits = hidden @ self.w2 + self.b2
        loss, dlogits = _softmax_cross_entropy(logits, y)
        gw2 = hidden.T @ dlogits
        gb2 = dlogits.sum(axis=0)
        dhidden = (dlogits @ self.w2.T) * hidden * (1.0 - hidden)
        gw1 = x.T @ dhidden
        gb1 = dhidden.sum(axis=0)
        if self.weight_decay:
            loss += 0.5 * self.weight_decay * (
                float(np.sum(self.w1**2)) + float(np.sum(self.w2**2))
            )
            gw1 += self.weight_decay * self.w1
            gw2 += self.weight_decay * self.w2
        return float(loss), [gw1, gb1, gw2, gb2]


def train_mlp(
    train_x: np.ndarray,
    train_y: np.ndarray,
    hidden: int = 128,
    config: TrainConfig = TrainConfig(),
) -> MlpModel:
    """Train the two-layer sigmoid MLP with softmax cross-entropy."""
    train_x = np.asarray(train_x)
    train_y = np.asarray(train_y, dtype=np.int64)
    classes = int(train_y.max()) + 1
    if np.unique(train_y).size < 2:
        raise ValueError("MLP training needs at least 2 classes")
    dtype = train_x.dtype if train_x.dtype in (np.float32, np.float64) else np.float64
    model = MlpModel.init(
        train_x.shape[1], hidden, classes, seed=config.seed, dtype=dtype,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed + 1)  # shuffles; init used config.seed
    vel = [np.zeros_like(p) for p in model.param_arrays()]
    for batches in _sgd_epochs(train_x.shape[0], config, rng):
        for idx in batches:
            loss, grads = model.loss_and_grads(train_x[idx], train_y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"MLP loss diverged with {config}")
            for p, v, g in zip(model.param_arrays(), vel, grads):
                v *= config.momentum
                v -= config.learning_rate * g
                p += v
    return model


# ---------------------------------------------------------------------------
# 1-D CNN
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cnn1dConfig:
    """Architecture of the per-channel 1-D CNN.

    Each channel is convolved by the same bank of ``kernels`` kernels of
    length ``kernel_len`` (stride 1), followed by ELU and dropout; a fully
    connected layer shared across time maps the channels x kernels features
    of each time point to class scores; average pooling (``pool_len``,
    ``pool_stride``) runs along time per class; dropout again; and a final
    fully connected layer maps the flattened pooled map to class logits.
    """

    kernels: int = 8
    kernel_len: int = 32
    stride: int = 1
    shared_channels: bool = True
    dropout_p: float = 0.5
    pool_len: int = 128
    pool_stride: int = 64
    classes: int = 40

    def __post_init__(self):
        if self.stride != 1:
            raise ValueError("only stride 1 is supported")
        if self.kernel_len < 1 or self.kernels < 1:
            raise ValueError("kernels and kernel_len must be >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.pool_len < 1 or self.pool_stride < 1:
            raise ValueError("pool_len and pool_stride must be >= 1")

    def conv_length(self, width: int) -> int:
        if width < self.kernel_len:
            raise ValueError(f"window {width} shorter than kernel {self.kernel_len}")
        return width - self.kernel_len + 1

    def pooled_points(self, width: int) -> int:
        t1 = self.conv_length(width)
        if t1 < self.pool_len:
            raise ValueError(
                f"conv output {t1} shorter than pool length {self.pool_len}"
            )
        return (t1 - self.pool_len) // self.pool_stride + 1


class Cnn1dModel:
    """The 1-D CNN with explicit forward and backward passes."""

    kind = "cnn1d"

    def __init__(self, config: Cnn1dConfig, channels: int, width: int,
                 seed: int, dtype=np.float64, weight_decay: float = 0.0):
        self.config = config
        self.channels = channels
        self.width = width
        self.weight_decay = float(weight_decay)
        self.t1 = config.conv_length(width)
        self.pooled = config.pooled_points(width)
        k, L, c = config.kernels, config.kernel_len, config.classes
        feat = channels * k
        rng = np.random.default_rng(seed)
        if config.shared_channels:
            self.conv_w = _glorot_uniform(rng, L, k, (k, L), dtype)
            self.conv_b = np.zeros(k, dtype=dtype)
        else:
            self.conv_w = _glorot_uniform(rng, L, k, (channels, k, L), dtype)
            self.conv_b = np.zeros((channels, k), dtype=dtype)
        self.fc_time_w = _glorot_uniform(rng, feat, c, (feat, c), dtype)
        self.fc_time_b = np.zeros(c, dtype=dtype)
        self.fc_out_w = _glorot_uniform(rng, self.pooled * c, c,
                                        (self.pooled * c, c), dtype)
        self.fc_out_b = np.zeros(c, dtype=dtype)
        self._mask_rng = np.random.default_rng(seed + 1)

    def param_arrays(self):
        return [self.conv_w, self.conv_b, self.fc_time_w, self.fc_time_b,
                self.fc_out_w, self.fc_out_b]

    def _mask(self, shape, keep: float, dtype) -> np.ndarray:
        rand_dtype = np.float32 if dtype == np.float32 else np.float64
        raw = self._mask_rng.random(shape, dtype=rand_dtype)
        return (raw < keep).astype(dtype) * dtype.type(1.0 / keep)

    def _forward(self, x: np.ndarray, train: bool, need_grads: bool = True):
        cfg = self.config
        n, ch, w = x.shape
        if ch != self.channels or w != self.width:
            raise ValueError("input shape does not match the trained model")
        windows = np.ascontiguousarray(
            np.lib.stride_tricks.sliding_window_view(x, cfg.kernel_len, axis=2)
        )  # (n, ch, t1, L); contiguous so the matmuls below hit BLAS
        if cfg.shared_channels:
            conv = (
                windows.reshape(-1, cfg.kernel_len) @ self.conv_w.T
            ).reshape(n, ch, self.t1, cfg.kernels)
            conv += self.conv_b
        else:
            conv = np.einsum(
                "nctl,ckl->nctk", windows, self.conv_w, optimize=True
            )
            conv += self.conv_b[None, :, None, :]
        neg = conv < 0
        act = np.where(neg, np.expm1(conv), conv)  # ELU, alpha=1
        cache = {}
        if need_grads:
            # ELU'(z) = 1 for z > 0, exp(z) = elu(z) + 1 otherwise
            cache = {
                "windows": windows,
                "elu_deriv": np.where(neg, act + 1.0, 1.0),
            }
        if train and cfg.dropout_p > 0:
            mask1 = self._mask(act.shape, 1.0 - cfg.dropout_p, act.dtype)
            act = act * mask1
            cache["mask1"] = mask1
        feat = act.transpose(0, 2, 1, 3).reshape(n, self.t1, ch * cfg.kernels)
        cache["feat"] = feat
        scores_t = feat @ self.fc_time_w + self.fc_time_b  # (n, t1, C)
        pooled = np.empty((n, self.pooled, cfg.classes), dtype=x.dtype)
        for p in range(self.pooled):
            start = p * cfg.pool_stride
            pooled[:, p] = scores_t[:, start : start + cfg.pool_len].mean(axis=1)
        if train and cfg.dropout_p > 0:
            mask2 = self._mask(pooled.shape, 1.0 - cfg.dropout_p, pooled.dtype)
            pooled = pooled * mask2
            cache["mask2"] = mask2
        flat = pooled.reshape(n, self.pooled * cfg.classes)
        cache["flat"] = flat
        logits = flat @ self.fc_out_w + self.fc_out_b
        return logits, cache

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self._forward(np.asarray(x), train=False, need_grads=False)[0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.logits(x).argmax(axis=1)

    def _backward(self, x, dlogits, cache, train: bool):
        cfg = self.config
        n = x.shape[0]
        g_out_w = cache["flat"].T @ dlogits
        g_out_b = dlogits.sum(axis=0)
        dflat = dlogits @ self.fc_out_w.T
        dpooled = dflat.reshape(n, self.pooled, cfg.classes)
        if train and "mask2" in cache:
            dpooled = dpooled * cache["mask2"]
        dscores_t = np.zeros((n, self.t1, cfg.classes), dtype=x.dtype)
        for p in range(self.pooled):
            start = p * cfg.pool_stride
            dscores_t[:, start : start + cfg.pool_len] += (
                dpooled[:, p : p + 1] / cfg.pool_len
            )
        feat = cache["feat"]
        g_time_w = feat.reshape(-1, feat.shape[2]).T @ dscores_t.reshape(
            -1, cfg.classes
        )
        g_time_b = dscores_t.sum(axis=(0, 1))
        dfeat = dscores_t @ self.fc_time_w.T
        dact = dfeat.reshape(n, self.t1, self.channels, cfg.kernels).transpose(
            0, 2, 1, 3
        )
        if train and "mask1" in cache:
            dact = dact * cache["mask1"]
        windows = cache["windows"]
        dconv = dact * cache["elu_deriv"]
        if cfg.shared_channels:
            g_conv_w = (
                dconv.reshape(-1, cfg.kernels).T
                @ windows.reshape(-1, cfg.kernel_len)
            )
            g_conv_b = dconv.sum(axis=(0, 1, 2))
        else:
            g_conv_w = np.einsum(
                "nctl,nctk->ckl", windows, dconv, optimize=True
            )
            g_conv_b = dconv.sum(axis=(0, 2))
        return [g_conv_w, g_conv_b, g_time_w, g_time_b, g_out_w, g_out_b]

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, train: bool = False):
        """Cross-entropy loss and parameter gradients.

        ``train=True`` samples fresh dropout masks (advancing the model's
        mask stream); ``train=False`` is the deterministic path used by
        gradient checking.
        """
        x = np.asarray(x)
        y = np.asarray(y, dtype=np.int64)
        logits, cache = self._forward(x, train=train)
        loss, dlogits = _softmax_cross_entropy(logits, y)
        grads = self._backward(x, dlogits, cache, train=train)
        if self.weight_decay:
            for p, g in zip(self.param_arrays(), grads):
                if p.ndim > 1:  # weights only, not biases
                    loss += 0.5 * self.weight_decay * float(np.sum(p**2))
                    g += self.weight_decay * p
        return float(loss), grads


def train_cnn1d(
    trials,
    config: Cnn1dConfig,
    train_config: TrainConfig = TrainConfig(),
    labels: np.ndarray | None = None,
) -> Cnn1dModel:
    """Train the 1-D CNN on a TrialMatrix, or on a bare (N, ch, W) array
    with ``labels`` passed separately."""
    x = trials.trials if hasattr(trials, "trials") else np.asarray(trials)
    y = labels if labels is not None else getattr(trials, "labels", None)
    if y is None:
        raise ValueError("train_cnn1d needs labeled trials")
    y = np.asarray(y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise ValueError("CNN training needs at least 2 classes")
    dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
    model = Cnn1dModel(
        config, channels=x.shape[1], width=x.shape[2],
        seed=train_config.seed, dtype=dtype,
        weight_decay=train_config.weight_decay,
    )
    rng = np.random.default_rng(train_config.seed + 1)
    vel = [np.zeros_like(p) for p in model.param_arrays()]
    for batches in _sgd_epochs(x.shape[0], train_config, rng):
        for idx in batches:
            loss, grads = model.loss_and_grads(x[idx], y[idx], train=True)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"CNN loss diverged with {train_config}")
            for p, v, g in zip(model.param_arrays(), vel, grads):
                v *= train_config.momentum
                v -= train_config.learning_rate * g
                p += v
    return model


# ---------------------------------------------------------------------------
# Verification and evaluation
# ---------------------------------------------------------------------------

def gradient_check(
    model, x: np.ndarray, y: np.ndarray, epsilon: float = 1e-3,
    floor: float = 1e-8,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The instance must be small enough to perturb every parameter; dropout is
    disabled throughout.  Relative error for one parameter is
    ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.
    """
    _, grads = model.loss_and_grads(x, y)
    worst = 0.0
    for p, g in zip(model.param_arrays(), grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = model.loss_and_grads(x, y)[0]
            flat[i] = orig - epsilon
            down = model.loss_and_grads(x, y)[0]
            flat[i] = orig
            numeric = (up - down) / (2.0 * epsilon)
            denom = max(abs(gflat[i]), abs(numeric), floor)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


def evaluate_accuracy(model, x: np.ndarray, y: np.ndarray,
                      num_classes: int | None = None):
    """Fraction correct plus the per-class confusion matrix (rows = truth)."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty test set")
    preds = model.predict(x)
    c = num_classes or int(max(y.max(), preds.max())) + 1
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (y, preds), 1)
    accuracy = float((preds == y).mean())
    return accuracy, confusion


# ---------------------------------------------------------------------------
# Model persistence ("BMDL": JSON config header + float64 LE payload)
# ---------------------------------------------------------------------------

def _model_arrays(model) -> dict[str, np.ndarray]:
    if isinstance(model, KnnModel):
        return {"x": model.x, "y": model.y}
    if isinstance(model, LinearModel):
        return {"w": model.w, "b": model.b}
    if isinstance(model, MlpModel):
        return {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": model.b2}
    if isinstance(model, Cnn1dModel):
        return {
            "conv_w": model.conv_w, "conv_b": model.conv_b,
            "fc_time_w": model.fc_time_w, "fc_time_b": model.fc_time_b,
            "fc_out_w": model.fc_out_w, "fc_out_b": model.fc_out_b,
        }
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def save_model(model, path: str | Path) -> None:
    """Write a trained model to the versioned BMDL container."""
    arrays = _model_arrays(model)
    header: dict = {"kind": model.kind, "arrays": []}
    if isinstance(model, KnnModel):
        header["config"] = {"k": model.k, "num_classes": model.num_classes}
    elif isinstance(model, LinearModel):
        header["config"] = {"l2": model.l2, "loss_kind": model.loss_kind}
    elif isinstance(model, MlpModel):
        header["config"] = {"weight_decay": model.weight_decay}
    elif isinstance(model, Cnn1dModel):
        header["config"] = {
            "kernels": model.config.kernels,
            "kernel_len": model.config.kernel_len,
            "stride": model.config.stride,
            "shared_channels": model.config.shared_channels,
            "dropout_p": model.config.dropout_p,
            "pool_len": model.config.pool_len,
            "pool_stride": model.config.pool_stride,
            "classes": model.config.classes,
            "channels": model.channels,
            "width": model.width,
            "weight_decay": model.weight_decay,
        }
    payload = bytearray()
    for name, arr in arrays.items():
        header["arrays"].append({"name": name, "shape": list(arr.shape)})
        payload += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_MODEL_PREAMBLE.pack(MODEL_MAGIC, MODEL_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def load_model(path: str | Path):
    """Read a BMDL container back into the matching model class."""
    with open(path, "rb") as fh:
        preamble = fh.read(_MODEL_PREAMBLE.size)
        if len(preamble) < _MODEL_PREAMBLE.size:
            raise ValueError(f"{path}: truncated model file")
        magic, version, header_len = _MODEL_PREAMBLE.unpack(preamble)
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: bad model magic {magic!r}")
        if version != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        header = json.loads(fh.read(header_len).decode())
        payload = fh.read()
    arrays = {}
    offset = 0
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
        offset += count * 8
    kind = header["kind"]
    cfg = header.get("config", {})
    if kind == "knn":
        return KnnModel(arrays["x"], arrays["y"].astype(np.int64), k=int(cfg["k"]))
    if kind == "linear":
        return LinearModel(arrays["w"], arrays["b"], l2=cfg.get("l2", 0.0),
                           loss_kind=cfg.get("loss_kind", "hinge"))
    if kind == "mlp":
        return MlpModel(arrays["w1"], arrays["b1"], arrays["w2"], arrays["b2"],
                        weight_decay=cfg.get("weight_decay", 0.0))
    if kind == "cnn1d":
        config = Cnn1dConfig(
            kernels=cfg["kernels"], kernel_len=cfg["kernel_len"],
            stride=cfg["stride"], shared_channels=cfg["shared_channels"],
            dropout_p=cfg["dropout_p"], pool_len=cfg["pool_len"],
            pool_stride=cfg["pool_stride"], classes=cfg["classes"],
        )
        model = Cnn1dModel(config, channels=cfg["channels"], width=cfg["width"],
                           seed=0, weight_decay=cfg.get("weight_decay", 0.0))
        (model.conv_w, model.conv_b, model.fc_time_w, model.fc_time_b,
         model.fc_out_w, model.fc_out_b) = (
            arrays["conv_w"], arrays["conv_b"], arrays["fc_time_w"],
            arrays["fc_time_b"], arrays["fc_out_w"], arrays["fc_out_b"])
        return model
    raise ValueError(f"{path}: unknown model kind {kind!r}")
