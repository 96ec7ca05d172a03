"""A small convolutional classifier built directly on numpy.

Architecture: three rounds of 3x3 same-padding convolution, ReLU, and 2x2
max pooling, then one hidden dense layer with ReLU and a softmax output.
Everything runs in float64, NHWC layout, with explicit forward and
backward passes; training is plain minibatch RMSprop. All randomness
(initialization, epoch shuffles) flows from stored seeds, so a run is a
pure function of its inputs.

Convolutions avoid materializing patch matrices: a 3x3 kernel is nine
(Cin, Cout) matrices, and the output is the sum of nine shifted
batch-matrix products against the padded input. The backward pass reuses
the same shifts.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import ConfigError, DataFormatError, NumericError

CHECKPOINT_MAGIC = b"EHCN"
CHECKPOINT_VERSION = 1

RMSPROP_RHO = 0.9
RMSPROP_EPS = 1e-7

PARAM_FIELDS = (
    "kernel1",
    "bias1",
    "kernel2",
    "bias2",
    "kernel3",
    "bias3",
    "hidden_weight",
    "hidden_bias",
    "output_weight",
    "output_bias",
)


@dataclass(frozen=True)
class Architecture:
    """Static shape of the network plus its initialization seed."""

    height: int
    width: int
    channels: tuple[int, int, int] = (32, 64, 64)
    hidden: int = 128
    classes: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.height < 8 or self.width < 8:
            raise ConfigError("images must be at least 8x8 to survive three pools")
        if len(self.channels) != 3 or min(self.channels) < 1:
            raise ConfigError("need three positive channel counts")
        if self.hidden < 1 or self.classes < 2:
            raise ConfigError("need hidden >= 1 and classes >= 2")

    @property
    def pooled_shape(self) -> tuple[int, int]:
        return self.height // 8, self.width // 8

    @property
    def flat_dim(self) -> int:
        h, w = self.pooled_shape
        return h * w * self.channels[2]


@dataclass(frozen=True)
class Params:
    """All trainable tensors, in the order they are serialized."""

    kernel1: np.ndarray
    bias1: np.ndarray
    kernel2: np.ndarray
    bias2: np.ndarray
    kernel3: np.ndarray
    bias3: np.ndarray
    hidden_weight: np.ndarray
    hidden_bias: np.ndarray
    output_weight: np.ndarray
    output_bias: np.ndarray

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in PARAM_FIELDS)

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "Params":
        if len(arrays) != len(PARAM_FIELDS):
            raise ConfigError(f"expected {len(PARAM_FIELDS)} parameter tensors")
        return cls(**dict(zip(PARAM_FIELDS, arrays)))


def param_shapes(arch: Architecture) -> dict[str, tuple[int, ...]]:
    c1, c2, c3 = arch.channels
    return {
        "kernel1": (3, 3, 1, c1),
        "bias1": (c1,),
        "kernel2": (3, 3, c1, c2),
        "bias2": (c2,),
        "kernel3": (3, 3, c2, c3),
        "bias3": (c3,),
        "hidden_weight": (arch.flat_dim, arch.hidden),
        "hidden_bias": (arch.hidden,),
        "output_weight": (arch.hidden, arch.classes),
        "output_bias": (arch.classes,),
    }


def initialize(arch: Architecture) -> Params:
    """He-initialized weights (variance 2 / fan-in), zero biases.

    Weight tensors are drawn in serialization order from a generator
    seeded with ``arch.seed``; biases consume no randomness.
    """
    rng = np.random.default_rng(arch.seed)
    shapes = param_shapes(arch)
    arrays = []
    for name in PARAM_FIELDS:
        shape = shapes[name]
        if name.startswith("bias") or name.endswith("_bias"):
            arrays.append(np.zeros(shape))
            continue
        fan_in = int(np.prod(shape[:-1]))
        arrays.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape))
    return Params.from_arrays(arrays)


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


def conv3x3_forward(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Same-padding stride-1 3x3 convolution; returns (output, padded input)."""
    b, h, w, _ = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.broadcast_to(bias, (b, h, w, kernel.shape[3])).copy()
    for u in range(3):
        for v in range(3):
            out += xp[:, u : u + h, v : v + w, :] @ kernel[u, v]
    return out, xp


def conv3x3_backward(
    xp: np.ndarray, kernel: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (input, kernel, bias) of the convolution above."""
    b, h, w, _ = grad_out.shape
    grad_xp = np.zeros_like(xp)
    grad_kernel = np.empty_like(kernel)
    for u in range(3):
        for v in range(3):
            patch = xp[:, u : u + h, v : v + w, :]
            grad_kernel[u, v] = np.tensordot(patch, grad_out, axes=([0, 1, 2],) * 2)
            grad_xp[:, u : u + h, v : v + w, :] += grad_out @ kernel[u, v].T
    grad_bias = grad_out.sum(axis=(0, 1, 2))
    return grad_xp[:, 1:-1, 1:-1, :], grad_kernel, grad_bias


def maxpool_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pooling; odd trailing rows/columns are dropped.

    Returns (pooled, argmax) where argmax holds, per window, the index of
    the first maximum in row-major window order (r0c0, r0c1, r1c0, r1c1);
    the backward pass routes the gradient only there.
    """
    b, h, w, c = x.shape
    hh, ww = h // 2, w // 2
    windows = (
        x[:, : 2 * hh, : 2 * ww, :]
        .reshape(b, hh, 2, ww, 2, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(b, hh, ww, 4, c)
    )
    argmax = windows.argmax(axis=3)
    pooled = np.take_along_axis(windows, argmax[:, :, :, None, :], axis=3)[
        :, :, :, 0, :
    ]
    return pooled, argmax


def maxpool_backward(
    grad_out: np.ndarray, argmax: np.ndarray, input_shape: tuple[int, ...]
) -> np.ndarray:
    b, h, w, c = input_shape
    hh, ww = h // 2, w // 2
    windows = np.zeros((b, hh, ww, 4, c))
    np.put_along_axis(
        windows, argmax[:, :, :, None, :], grad_out[:, :, :, None, :], axis=3
    )
    grad = np.zeros(input_shape)
    grad[:, : 2 * hh, : 2 * ww, :] = (
        windows.reshape(b, hh, ww, 2, 2, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(b, 2 * hh, 2 * ww, c)
    )
    return grad


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of the true classes."""
    picked = probs[np.arange(labels.size), labels]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())


# ---------------------------------------------------------------------------
# Full network
# ---------------------------------------------------------------------------


def _as_batch(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[:, :, :, None]
    if images.ndim != 4 or images.shape[3] != 1:
        raise DataFormatError(
            f"expected a (N, H, W) grayscale batch, got shape {images.shape}"
        )
    return images


def forward(params: Params, images: np.ndarray) -> tuple[np.ndarray, dict]:
    """Logits for a batch plus the cache the backward pass needs."""
    x = _as_batch(images)
    cache: dict = {"batch": x.shape[0]}
    for i, (kernel, bias) in enumerate(
        ((params.kernel1, params.bias1), (params.kernel2, params.bias2),
         (params.kernel3, params.bias3)),
        start=1,
    ):
        pre, xp = conv3x3_forward(x, kernel, bias)
        mask = pre > 0
        act = pre * mask
        pooled, argmax = maxpool_forward(act)
        cache[f"conv{i}"] = (xp, mask, act.shape, argmax)
        x = pooled
    flat = x.reshape(x.shape[0], -1)
    hidden_pre = flat @ params.hidden_weight + params.hidden_bias
    hidden_mask = hidden_pre > 0
    hidden = hidden_pre * hidden_mask
    logits = hidden @ params.output_weight + params.output_bias
    cache.update(
        pooled_shape=x.shape, flat=flat, hidden_mask=hidden_mask, hidden=hidden
    )
    return logits, cache


def loss_and_gradients(
    params: Params, images: np.ndarray, labels: np.ndarray
) -> tuple[float, Params, np.ndarray]:
    """Cross-entropy loss, its gradient with respect to every parameter,
    and the class probabilities for the batch.

    Softmax and cross-entropy fuse: the logit gradient is simply
    (probabilities - one-hot) / batch.
    """
    labels = np.asarray(labels)
    logits, cache = forward(params, images)
    probs = softmax(logits)
    loss = cross_entropy(probs, labels)
    batch = cache["batch"]

    grad_logits = probs.copy()
    grad_logits[np.arange(batch), labels] -= 1.0
    grad_logits /= batch

    grad_output_weight = cache["hidden"].T @ grad_logits
    grad_output_bias = grad_logits.sum(axis=0)
    grad_hidden = (grad_logits @ params.output_weight.T) * cache["hidden_mask"]
    grad_hidden_weight = cache["flat"].T @ grad_hidden
    grad_hidden_bias = grad_hidden.sum(axis=0)
    grad_x = (grad_hidden @ params.hidden_weight.T).reshape(cache["pooled_shape"])

    kernels = (params.kernel1, params.kernel2, params.kernel3)
    grads_conv: list[tuple[np.ndarray, np.ndarray]] = []
    for i in (3, 2, 1):
        xp, mask, act_shape, argmax = cache[f"conv{i}"]
        grad_act = maxpool_backward(grad_x, argmax, act_shape)
        grad_pre = grad_act * mask
        grad_x, grad_kernel, grad_bias = conv3x3_backward(
            xp, kernels[i - 1], grad_pre
        )
        grads_conv.append((grad_kernel, grad_bias))
    (gk3, gb3), (gk2, gb2), (gk1, gb1) = grads_conv

    grads = Params(
        kernel1=gk1, bias1=gb1, kernel2=gk2, bias2=gb2, kernel3=gk3, bias3=gb3,
        hidden_weight=grad_hidden_weight, hidden_bias=grad_hidden_bias,
        output_weight=grad_output_weight, output_bias=grad_output_bias,
    )
    return loss, grads, probs


# ---------------------------------------------------------------------------
# Optimizer and training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RmspropState:
    """Running mean of squared gradients, one array per parameter."""

    squares: tuple[np.ndarray, ...]

    @classmethod
    def zeros(cls, params: Params) -> "RmspropState":
        return cls(tuple(np.zeros_like(a) for a in params.arrays()))


def rmsprop_step(
    params: Params,
    grads: Params,
    state: RmspropState,
    learning_rate: float,
    rho: float = RMSPROP_RHO,
    eps: float = RMSPROP_EPS,
) -> tuple[Params, RmspropState]:
    """One update: s <- rho s + (1 - rho) g^2, theta <- theta - lr g / (sqrt(s) + eps).

    Inputs are left untouched; fresh parameter and state objects come back.
    """
    new_params = []
    new_squares = []
    for theta, g, s in zip(params.arrays(), grads.arrays(), state.squares):
        s_new = rho * s + (1.0 - rho) * g * g
        new_params.append(theta - learning_rate * g / (np.sqrt(s_new) + eps))
        new_squares.append(s_new)
    return Params.from_arrays(new_params), RmspropState(tuple(new_squares))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 80
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class TrainResult:
    params: Params
    history: list[dict]


def evaluate_network(
    params: Params,
    images: np.ndarray,
    labels: np.ndarray,
    batch_size: int = 256,
) -> tuple[float, float]:
    """(mean loss, accuracy) over a labeled set, computed in batches."""
    labels = np.asarray(labels)
    n = labels.size
    if n == 0:
        raise ConfigError("cannot evaluate on an empty set")
    total_loss = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        logits, _ = forward(params, images[start:stop])
        probs = softmax(logits)
        total_loss += cross_entropy(probs, labels[start:stop]) * (stop - start)
        correct += int((probs.argmax(axis=1) == labels[start:stop]).sum())
    return total_loss / n, correct / n


def predict(params: Params, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Predicted class indices for a batch of images."""
    images = np.asarray(images, dtype=np.float64)
    out = []
    for start in range(0, images.shape[0], batch_size):
        logits, _ = forward(params, images[start : start + batch_size])
        out.append(logits.argmax(axis=1))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def train(
    arch: Architecture,
    train_images: np.ndarray,
    train_labels: np.ndarray,
    config: TrainConfig,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
) -> TrainResult:
    """Minibatch RMSprop from a fresh He initialization.

    Each epoch shuffles the training set with a generator seeded by
    ``config.seed``, walks it in ``batch_size`` chunks (the short final
    chunk included), and records running train metrics plus, when given,
    validation metrics on the epoch's final parameters. The returned model
    is the last epoch's, not a best-so-far snapshot.
    """
    train_images = np.asarray(train_images, dtype=np.float64)
    train_labels = np.asarray(train_labels)
    n = train_labels.size
    if n == 0:
        raise ConfigError("cannot train on an empty set")
    if train_labels.min() < 0 or train_labels.max() >= arch.classes:
        raise ConfigError("training labels outside the architecture's class range")
    params = initialize(arch)
    state = RmspropState.zeros(params)
    shuffler = np.random.default_rng(config.seed)
    history: list[dict] = []
    for epoch in range(config.epochs):
        order = shuffler.permutation(n)
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, n, config.batch_size):
            take = order[start : start + config.batch_size]
            loss, grads, probs = loss_and_gradients(
                params, train_images[take], train_labels[take]
            )
            if not np.isfinite(loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            params, state = rmsprop_step(params, grads, state, config.learning_rate)
            epoch_loss += loss * take.size
            epoch_correct += int(
                (probs.argmax(axis=1) == train_labels[take]).sum()
            )
        row = {
            "epoch": epoch,
            "train_loss": epoch_loss / n,
            "train_accuracy": epoch_correct / n,
        }
        if validation is not None:
            val_loss, val_acc = evaluate_network(params, *validation)
            row["validation_loss"] = val_loss
            row["validation_accuracy"] = val_acc
        history.append(row)
    return TrainResult(params=params, history=history)


# ---------------------------------------------------------------------------
# Checkpoints: little-endian magic + version, the architecture as eight
# u64 fields (H, W, c1, c2, c3, hidden, classes, seed), then every
# parameter tensor as float64 in serialization order, C-contiguous.
# ---------------------------------------------------------------------------


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    data = stream.read(count)
    if len(data) != count:
        raise DataFormatError(f"truncated checkpoint while reading {what}")
    return data


def save_checkpoint(arch: Architecture, params: Params, path: str | Path) -> None:
    with open(path, "wb") as stream:
        stream.write(CHECKPOINT_MAGIC)
        stream.write(struct.pack("<I", CHECKPOINT_VERSION))
        stream.write(
            struct.pack(
                "<8Q",
                arch.height,
                arch.width,
                *arch.channels,
                arch.hidden,
                arch.classes,
                arch.seed,
            )
        )
        for array in params.arrays():
            stream.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> tuple[Architecture, Params]:
    path = Path(path)
    with open(path, "rb") as stream:
        magic = _read_exact(stream, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(stream, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
        fields = struct.unpack("<8Q", _read_exact(stream, 64, "architecture"))
        h, w, c1, c2, c3, hidden, classes, seed = (int(v) for v in fields)
        arch = Architecture(h, w, (c1, c2, c3), hidden, classes, seed)
        arrays = []
        for name, shape in param_shapes(arch).items():
            count = int(np.prod(shape))
            data = _read_exact(stream, 8 * count, name)
            arrays.append(np.frombuffer(data, dtype="<f8").reshape(shape).copy())
        if stream.read(1):
            raise DataFormatError(f"{path}: trailing bytes after parameters")
    for array in arrays:
        if not np.isfinite(array).all():
            raise NumericError(f"{path}: non-finite parameter values")
    return arch, Params.from_arrays(arrays)
