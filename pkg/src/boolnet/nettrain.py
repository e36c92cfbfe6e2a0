"""Boolean multilayer perceptron trained with logic signals and the flip optimizer.

Hidden layers are XNOR layers followed by sign thresholding; the output
layer's integer pre-activations feed the loss. The gradient of the loss
enters the last layer as an upstream signal, travels down through
``logicgrad.backward_layer`` and passes each sign activation unchanged
(straight-through). Each layer owns one optimizer state covering its
weights and its bias.
"""
from __future__ import annotations

import csv
import logging
import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import optim
from .bitcore import BooleanTensor, binarize, forward_layer, read_tensors
from .logicgrad import backward_layer, bias_signal
from .optim import OptimConfig, OptimState

log = logging.getLogger(__name__)

DATA_MAGIC = b"BLDS"
MODEL_MAGIC = b"BLMD"
LOSSES = ("squared", "cross_entropy")


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data


@dataclass
class Dataset:
    inputs: BooleanTensor
    labels: np.ndarray
    batch_size: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        n = self.inputs.shape[0]
        if len(self.labels) != n:
            raise DataError(f"{n} inputs but {len(self.labels)} labels")
        if not 1 <= self.batch_size <= n:
            raise DataError(f"batch size {self.batch_size} must lie in [1, {n}]")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def batches(self, rng: np.random.Generator | None):
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for start in range(0, len(self), self.batch_size):
            yield order[start:start + self.batch_size]

    def subset(self, idx) -> tuple[BooleanTensor, np.ndarray]:
        return self.inputs[np.asarray(idx)], self.labels[idx]


def binarize_input(features, thresholds=None) -> tuple[BooleanTensor, np.ndarray]:
    """Threshold real features column-wise: True iff value >= threshold.

    Thresholds default to training-set medians; a column already valued in
    {-1, +1} uses 0 so it maps through unchanged. Constant columns keep their
    value as threshold (all True) and emit a warning.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError("features must be a 2-D array")
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    if thresholds is None:
        thresholds = np.median(x, axis=0)
        for j in range(x.shape[1]):
            col = x[:, j]
            if np.all(col == col[0]):
                warnings.warn(f"feature column {j} is constant; it binarizes to all True", stacklevel=2)
                thresholds[j] = col[0]
            elif np.all(np.isin(col, (-1.0, 1.0))):
                thresholds[j] = 0.0
    thresholds = np.asarray(thresholds, dtype=np.float64)
    return BooleanTensor.from_bool(x >= thresholds[None, :]), thresholds


def read_csv_dataset(path, label_column: str = "label") -> tuple[np.ndarray, np.ndarray]:
    """Return (features, labels). Labels become int64 when every value is integral."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: missing label column {label_column!r}")
        li = header.index(label_column)
        rows = [r for r in reader if r]
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        table = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if table.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    labels = table[:, li]
    features = np.delete(table, li, axis=1)
    if np.all(labels == np.round(labels)):
        labels = labels.astype(np.int64)
    return features, labels


def write_binary_dataset(path, inputs: BooleanTensor, labels) -> None:
    labels = np.asarray(labels)
    kind = 0 if np.issubdtype(labels.dtype, np.integer) else 1
    n, m = inputs.shape
    with open(path, "wb") as fh:
        fh.write(DATA_MAGIC + struct.pack("<IIB", n, m, kind))
        fh.write(inputs.words.astype("<u8").tobytes())
        fh.write(labels.astype("<i8" if kind == 0 else "<f8").tobytes())


def read_binary_dataset(path) -> tuple[BooleanTensor, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != DATA_MAGIC:
        raise DataError(f"{path}: bad dataset magic")
    n, m, kind = struct.unpack_from("<IIB", data, 4)
    offset = 13
    n_words = (m + 63) // 64
    end = offset + 8 * n * n_words
    words = np.frombuffer(data[offset:end], dtype="<u8").astype(np.uint64)
    if words.size != n * n_words:
        raise DataError(f"{path}: truncated bit payload")
    if len(data) - end != 8 * n:
        raise DataError(f"{path}: expected {n} labels ({8 * n} bytes), found {len(data) - end} bytes")
    labels = np.frombuffer(data[end:], dtype="<i8" if kind == 0 else "<f8")
    try:
        inputs = BooleanTensor((n, m), words.reshape(n, n_words))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    return inputs, labels.astype(np.int64 if kind == 0 else np.float64)


def xor_dataset(copies: int = 1, batch_size: int | None = None) -> Dataset:
    """All four 2-bit inputs, label 1 iff the bits differ."""
    bits = np.array([[False, False], [False, True], [True, False], [True, True]])
    bits = np.tile(bits, (copies, 1))
    labels = (bits[:, 0] != bits[:, 1]).astype(np.int64)
    return Dataset(BooleanTensor.from_bool(bits), labels, batch_size or len(bits))


# ---------------------------------------------------------------------------
# model


@dataclass
class Layer:
    # rows 0..m-1 hold the weights, row m the bias
    params: BooleanTensor
    state: OptimState

    @property
    def fan_in(self) -> int:
        return self.params.shape[0] - 1

    @property
    def weights(self) -> BooleanTensor:
        return self.params[: self.fan_in]

    @property
    def bias(self) -> BooleanTensor:
        return self.params[self.fan_in]


class BooleanMLP:
    def __init__(self, sizes: Sequence[int], *, loss: str = "cross_entropy",
                 cfg: OptimConfig | None = None, seed: int = 0, shared_beta: bool = False):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if loss not in LOSSES:
            raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
        self.sizes = [int(s) for s in sizes]
        self.loss = loss
        self.cfg = cfg or OptimConfig()
        self.shared_beta = shared_beta
        self.thresholds: np.ndarray | None = None
        rng = np.random.default_rng([seed, 0x1A7E])
        self.layers = [
            Layer(BooleanTensor.random((m + 1, n), rng), OptimState.zeros((m + 1, n), self.cfg, stream=i))
            for i, (m, n) in enumerate(zip(self.sizes[:-1], self.sizes[1:]))
        ]
        self._buffers: list[BooleanTensor | None] = [None] * len(self.layers)
        self.buffer_releases = 0

    @property
    def n_params(self) -> int:
        return sum(layer.params.size for layer in self.layers)

    def forward(self, x: BooleanTensor, *, buffer: bool = False) -> np.ndarray:
        h = x
        pre = None
        for i, layer in enumerate(self.layers):
            if buffer:
                self._buffers[i] = h
            pre = forward_layer(h, layer.weights, layer.bias)
            if i + 1 < len(self.layers):
                h = binarize(pre)
        return pre

    def loss_and_grad(self, pre: np.ndarray, targets) -> tuple[float, np.ndarray]:
        K = pre.shape[0]
        if self.loss == "squared":
            y = self.squared_targets(targets, pre.shape)
            diff = pre - y
            return float(0.5 * np.sum(diff * diff) / K), diff / K
        scale = 1.0 / math.sqrt(self.sizes[-2])
        logits = pre * scale
        logits = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        y = np.asarray(targets, dtype=np.int64)
        loss = -float(np.mean(np.log(p[np.arange(K), y])))
        p[np.arange(K), y] -= 1.0
        return loss, p * (scale / K)

    @staticmethod
    def squared_targets(labels, shape) -> np.ndarray:
        """Real targets as given; integer class ids become +/-1 one-hot rows."""
        labels = np.asarray(labels)
        if labels.ndim == 1 and np.issubdtype(labels.dtype, np.integer) and shape[1] > 1:
            return np.where(np.arange(shape[1])[None, :] == labels[:, None], 1.0, -1.0)
        return labels.astype(np.float64).reshape(shape)

    def backward(self, g_out: np.ndarray) -> list[np.ndarray]:
        """Optimization signals per layer, shaped like ``layer.params``."""
        qs: list[np.ndarray] = [None] * len(self.layers)
        g = g_out
        for i in reversed(range(len(self.layers))):
            x = self._buffers[i]
            if x is None:
                raise RuntimeError(f"layer {i}: no buffered input; run forward(buffer=True) first")
            layer = self.layers[i]
            g_down, q = backward_layer(x, layer.weights, g)
            qs[i] = np.vstack([q, bias_signal(g)[None, :]])
            g = g_down  # straight-through across the sign activation
        return qs

    def step(self, qs: Sequence[np.ndarray]) -> list[int]:
        flips = []
        for layer, q in zip(self.layers, qs):
            layer.params, layer.state = optim.apply_step(layer.params, layer.state, q, self.cfg)
            flips.append(layer.state.last_flips)
        if self.shared_beta and self.cfg.beta_mode[0] == "adaptive":
            keep = 1.0 - sum(flips) / self.n_params
            for layer in self.layers:
                layer.state = replace(layer.state, beta=keep)
        self.release()
        return flips

    def release(self) -> None:
        if any(b is None for b in self._buffers):
            raise RuntimeError("buffer released twice or never filled")
        self._buffers = [None] * len(self.layers)
        self.buffer_releases += 1

    def train_step(self, x: BooleanTensor, targets) -> dict:
        pre = self.forward(x, buffer=True)
        loss, g = self.loss_and_grad(pre, targets)
        if not math.isfinite(loss):
            self.release()
            raise FloatingPointError("non-finite loss")
        qs = self.backward(g)
        flips = self.step(qs)
        states = [layer.state for layer in self.layers]
        return {
            "loss": loss,
            "flips": flips,
            "betas": [s.beta for s in states],
            "q_sq": float(sum(np.sum(q * q) for q in qs)),
            "m_sq": sum(s.last_m_sq for s in states),
            "e_sq": sum(s.last_e_sq for s in states),
            "h_sq": sum(s.last_h_sq for s in states),
            "eta": states[0].eta,
        }

    def predict(self, x: BooleanTensor) -> np.ndarray:
        """Class ids by argmax of the pre-activations (ties give -1)."""
        pre = self.forward(x)
        top = pre.max(axis=1, keepdims=True)
        winners = pre == top
        # ties count as no prediction
        return np.where(winners.sum(axis=1) == 1, pre.argmax(axis=1), -1)

    def accuracy(self, data: Dataset) -> float:
        """Class accuracy for integer labels; sign agreement for real targets."""
        labels = np.asarray(data.labels)
        if np.issubdtype(labels.dtype, np.integer) and labels.ndim == 1:
            return float(np.mean(self.predict(data.inputs) == labels))
        pre = self.forward(data.inputs)
        y = labels.astype(np.float64).reshape(pre.shape)
        return float(np.mean(np.all(np.sign(pre) == np.sign(y), axis=1)))

    def evaluate_loss(self, data: Dataset) -> float:
        return self.loss_and_grad(self.forward(data.inputs), data.labels)[0]

    # -- checkpoint --------------------------------------------------------

    def to_bytes(self) -> bytes:
        """MAGIC, n_layers u32, n_thresholds u32, thresholds f64[], layer tensors."""
        th = np.zeros(0) if self.thresholds is None else np.asarray(self.thresholds, dtype=np.float64)
        out = MODEL_MAGIC + struct.pack("<II", len(self.layers), th.size) + th.astype("<f8").tobytes()
        return out + b"".join(layer.params.to_bytes() for layer in self.layers)

    @staticmethod
    def load_params(data: bytes) -> tuple[list[BooleanTensor], np.ndarray]:
        if data[:4] != MODEL_MAGIC:
            raise ValueError("bad model magic")
        n_layers, n_th = struct.unpack_from("<II", data, 4)
        offset = 12 + 8 * n_th
        thresholds = np.frombuffer(data[12:offset], dtype="<f8").astype(np.float64)
        tensors = read_tensors(data[offset:])
        if len(tensors) != n_layers:
            raise ValueError(f"expected {n_layers} layers, found {len(tensors)}")
        return tensors, thresholds


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float
    flip_rate: list[float]
    betas: list[list[float]] = field(default_factory=list)


def train_epoch(model: BooleanMLP, data: Dataset, rng: np.random.Generator | None,
                epoch: int = 0, on_step=None) -> EpochMetrics:
    """One pass over ``data`` in minibatches; ``on_step`` receives each step's stats."""
    losses, flips, betas = [], np.zeros(len(model.layers)), []
    steps = 0
    for idx in data.batches(rng):
        xb, yb = data.subset(idx)
        stats = model.train_step(xb, yb)
        losses.append(stats["loss"])
        flips += stats["flips"]
        betas.append(stats["betas"])
        steps += 1
        if on_step is not None:
            on_step(stats)
    sizes = np.array([layer.params.size for layer in model.layers])
    return EpochMetrics(
        epoch=epoch,
        loss=float(np.mean(losses)),
        accuracy=model.accuracy(data),
        flip_rate=list(flips / (sizes * steps)),
        betas=betas,
    )
