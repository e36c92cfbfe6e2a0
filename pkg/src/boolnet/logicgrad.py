"""Sign-magnitude backprop and optimization signals for XNOR layers.

Every edge of a layer carries a ``LogicSignal``: a truth value saying
whether the edge votes up (True) or down (False) and a nonnegative
magnitude. Aggregating an edge bundle is "sum of True magnitudes minus sum
of False magnitudes". With XNOR as the layer gate, the truth of an edge is
XNOR(weight-or-input, upstream >= 0) and its magnitude is |upstream|.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bitcore import BooleanTensor


@dataclass(frozen=True)
class LogicSignal:
    truth: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "truth", np.asarray(self.truth, dtype=bool))
        magnitude = np.asarray(self.magnitude, dtype=np.float64)
        if np.any(magnitude < 0):
            raise ValueError("magnitude must be nonnegative")
        object.__setattr__(self, "magnitude", magnitude)

    def signed(self) -> np.ndarray:
        return np.where(self.truth, self.magnitude, -self.magnitude)


def edge_backprop_signal(w, g) -> LogicSignal:
    """Edge signal from weight ``w`` (bool) and upstream gradient ``g``."""
    g = np.asarray(g, dtype=np.float64)
    return LogicSignal(np.asarray(w, dtype=bool) == (g >= 0), np.abs(g))


def edge_optim_signal(x, g) -> LogicSignal:
    """Edge signal from layer input ``x`` (bool) and upstream gradient ``g``."""
    g = np.asarray(g, dtype=np.float64)
    return LogicSignal(np.asarray(x, dtype=bool) == (g >= 0), np.abs(g))


def _aggregate(signals: LogicSignal, axis: int) -> np.ndarray:
    # Sequential accumulation in index order: the result is bit-identical to
    # a left-to-right signed sum over the same axis.
    truth, mag = np.broadcast_arrays(signals.truth, signals.magnitude)
    truth = np.moveaxis(truth, axis, 0)
    mag = np.moveaxis(mag, axis, 0)
    acc = np.zeros(truth.shape[1:], dtype=np.float64)
    for t_slice, m_slice in zip(truth, mag):
        acc = np.where(t_slice, acc + m_slice, acc - m_slice)
    return acc


def aggregate_backprop(signals: LogicSignal, axis: int = -1) -> np.ndarray:
    """Reduce edge signals over the output index ``j`` (default: last axis)."""
    return _aggregate(signals, axis)


def aggregate_optim(signals: LogicSignal, axis: int = 0) -> np.ndarray:
    """Reduce edge signals over the batch index ``k`` (default: first axis)."""
    return _aggregate(signals, axis)


def backward_layer(x: BooleanTensor, w: BooleanTensor, g_up) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(g_down[K, m], q[m, n])`` for a layer with input x[K, m], weights w[m, n]."""
    g_up = np.asarray(g_up, dtype=np.float64)
    if len(x.shape) != 2 or len(w.shape) != 2 or g_up.ndim != 2:
        raise ValueError("backward_layer expects x[K,m], w[m,n], g_up[K,n]")
    K, m = x.shape
    if w.shape[0] != m or g_up.shape != (K, w.shape[1]):
        raise ValueError(f"dimension mismatch: x{x.shape}, w{w.shape}, g_up{g_up.shape}")
    if not np.all(np.isfinite(g_up)):
        raise ValueError("upstream gradient has non-finite entries")

    wb = w.to_bool()
    xb = x.to_bool()
    # edges indexed [k, i, j]
    bp = edge_backprop_signal(wb[None, :, :], g_up[:, None, :])
    g_down = aggregate_backprop(bp, axis=2)
    op = edge_optim_signal(xb[:, :, None], g_up[:, None, :])
    q = aggregate_optim(op, axis=0)
    return g_down, q


def bias_signal(g_up) -> np.ndarray:
    """Optimization signal of a bias (an edge whose input is constantly True)."""
    g_up = np.asarray(g_up, dtype=np.float64)
    return aggregate_optim(edge_optim_signal(True, g_up), axis=0)
