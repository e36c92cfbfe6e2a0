"""Error-feedback reformulation of the flip optimizer.

The flip optimizer can be written as quantized error feedback:

    m     = eta * grad + e
    delta = q1(m, w)
    w'    = q0(w - delta)
    e'    = m - delta

``q1`` passes ``m`` through only where the flip rule fires (|m| > 1 with the
sign of ``w``) and is zero elsewhere; ``q0`` re-binarizes. The residual
``e`` plays the part of the accumulator, and ``h = q0(w - delta) - (w - delta)``
is the re-binarization deviation.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import optim
from .bitcore import BooleanTensor
from .optim import OptimConfig, OptimState
from .rng import counter_uniforms


def q1(m, w):
    """``w * (relu(w*m - 1) + sgn(w*m - 1)/2 + 1/2)`` with sgn(0) = -1.

    Returns exactly ``m`` where |m| > 1 and sign(m) == sign(w), else 0
    (exact for |m| < 2**52).
    """
    m = np.asarray(m, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    z = w * m - 1.0
    sgn = np.where(z > 0, 1.0, -1.0)
    return w * (np.maximum(z, 0.0) + (0.5 * sgn + 0.5))


def q0_deterministic(v):
    return np.where(np.asarray(v) >= 0, 1.0, -1.0)


def q0_stochastic(v, uniform):
    """Unbiased +/-1 rounding of ``v`` clamped to [-1, 1]: P(+1) = (1 + v) / 2."""
    v = np.clip(np.asarray(v, dtype=np.float64), -1.0, 1.0)
    return np.where(np.asarray(uniform) < (1.0 + v) / 2.0, 1.0, -1.0)


@dataclass
class AbstractState:
    w: np.ndarray
    e: np.ndarray
    last_m: np.ndarray
    last_delta: np.ndarray
    last_h: np.ndarray
    t: int = 0

    @classmethod
    def start(cls, w0) -> "AbstractState":
        w = np.asarray(w0, dtype=np.float64).copy()
        zeros = np.zeros_like(w)
        return cls(w=w, e=zeros.copy(), last_m=zeros.copy(), last_delta=zeros.copy(), last_h=zeros.copy())


def abstract_step(state: AbstractState, grad, eta: float, *, q0: str = "deterministic",
                  uniform=None, kappa: float | None = None, rule: str = "boolean",
                  sign_scale: float = 1.0) -> AbstractState:
    """Run one step of the error-feedback recursion, coordinate-wise.

    ``rule="ef_signsgd"`` swaps the quantizers for ``q1(m) = sign_scale * sign(m)``
    and ``q0 = identity``, which is plain error-feedback sign descent.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.w.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match weights {state.w.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient has non-finite entries")
    m = eta * grad + state.e
    if kappa is not None:
        m = np.clip(m, -eta * kappa, eta * kappa)

    if rule == "boolean":
        delta = q1(m, state.w)
        u = state.w - delta
        if q0 == "deterministic":
            w_new = q0_deterministic(u)
        elif q0 == "stochastic":
            if uniform is None:
                raise ValueError("stochastic q0 needs uniform draws")
            w_new = q0_stochastic(u, uniform)
        else:
            raise ValueError(f"unknown q0 mode {q0!r}")
    elif rule == "ef_signsgd":
        delta = sign_scale * np.sign(m)
        u = state.w - delta
        w_new = u
    else:
        raise ValueError(f"unknown rule {rule!r}")

    return replace(state, w=w_new, e=m - delta, last_m=m, last_delta=delta, last_h=w_new - u, t=state.t + 1)


def compression_ratio(state: AbstractState) -> float:
    """||e_{t+1}||^2 / ||m_t||^2 for the last step (0 when m_t == 0)."""
    m_sq = float(np.sum(state.last_m ** 2))
    return float(np.sum(state.e ** 2)) / m_sq if m_sq > 0 else 0.0


@dataclass
class EquivalenceReport:
    equivalent: bool
    steps: int
    d: int
    flips: int = 0
    step: int | None = None
    coordinate: int | None = None
    quantity: str | None = None
    optim_value: float | None = None
    abstract_value: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def equivalence_check(grads, eta: float, w0=None, *, tau: float = 1.0, q0: str = "deterministic",
                      seed: int = 0) -> EquivalenceReport:
    """Feed the same gradient stream to ``optim.apply_step`` and ``abstract_step``.

    ``grads`` has shape [T, d]. The optimizer runs with beta fixed at 1 and no
    clipping; ``tau`` is the optimizer's threshold (the abstraction's is 1),
    so any other value is a deliberate mismatch. Weight trajectories and
    accumulator/residual pairs are compared for exact equality.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if grads.ndim != 2:
        raise ValueError("grads must be [T, d]")
    T, d = grads.shape
    w0 = np.ones(d) if w0 is None else np.asarray(w0, dtype=np.float64)
    cfg = OptimConfig(eta0=eta, tau=tau, kappa=None, beta_mode=("constant", 1.0), flip_mode=q0, seed=seed)

    w_bool = BooleanTensor.from_pm(w0)
    ostate = OptimState.zeros((d,), cfg)
    astate = AbstractState.start(w0)
    total_flips = 0
    for t in range(T):
        uniform = None
        if q0 == "stochastic":
            uniform = counter_uniforms(seed, 0, t, (d,))
        w_bool, ostate = optim.apply_step(w_bool, ostate, grads[t], cfg, uniform=uniform)
        astate = abstract_step(astate, grads[t], eta, q0=q0, uniform=uniform)
        total_flips += ostate.last_flips

        w_opt = w_bool.to_pm(np.float64)
        for name, a, b in (("w", w_opt, astate.w), ("accumulator", ostate.m, astate.e)):
            bad = np.flatnonzero(a != b)
            if bad.size:
                i = int(bad[0])
                return EquivalenceReport(False, T, d, total_flips, step=t + 1, coordinate=i,
                                         quantity=name, optim_value=float(a[i]), abstract_value=float(b[i]))
    return EquivalenceReport(True, T, d, total_flips)
