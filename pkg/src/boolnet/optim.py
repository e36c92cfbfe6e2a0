"""Accumulator-based flip optimizer for Boolean weights.

Per weight the optimizer keeps a real accumulator ``m``. Each step:

    m <- beta * m + eta * q            (clipped to [-eta*kappa, eta*kappa])
    flip w when |m| > tau and sign(m) agrees with w, then reset m to 0

``beta`` is the fraction of weights kept (not flipped) in the previous step
when ``beta_mode`` is adaptive. In stochastic mode the flip outcome is drawn
so that the post-step weight is an unbiased rounding of ``w - m``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .bitcore import BooleanTensor
from .rng import counter_uniforms

_STEP_RE = re.compile(r"^step\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)$")
_CONST_RE = re.compile(r"^constant\(\s*([^)\s]+)\s*\)$")

AUTO = "auto"


@dataclass(frozen=True)
class OptimConfig:
    eta0: float = 0.1
    # "constant" or ("step", factor, period)
    eta_schedule: tuple = ("constant",)
    tau: float = 1.0
    # AUTO resolves to 2 / eta0 (eta * kappa = 2); None disables clipping
    kappa: float | str | None = AUTO
    # "adaptive" or ("constant", value)
    beta_mode: tuple = ("adaptive",)
    flip_mode: str = "deterministic"
    seed: int = 0

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be positive, got {self.eta0}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.kappa == AUTO:
            object.__setattr__(self, "kappa", 2.0 / self.eta0)
        if self.kappa is not None:
            if not self.kappa > 0:
                raise ValueError(f"kappa must be positive, got {self.kappa}")
            if self.eta0 * self.kappa < self.tau:
                raise ValueError(
                    f"eta0*kappa = {self.eta0 * self.kappa} < tau = {self.tau}: no flip could ever occur")
        if isinstance(self.eta_schedule, str):
            object.__setattr__(self, "eta_schedule", parse_schedule(self.eta_schedule))
        if isinstance(self.beta_mode, str):
            object.__setattr__(self, "beta_mode", parse_beta_mode(self.beta_mode))
        kind = self.eta_schedule[0]
        if kind == "step":
            _, factor, period = self.eta_schedule
            if not (factor > 0 and period >= 1):
                raise ValueError(f"bad step schedule {self.eta_schedule}")
        elif kind != "constant":
            raise ValueError(f"unknown eta schedule {self.eta_schedule!r}")
        if self.beta_mode[0] == "constant":
            if not 0 <= self.beta_mode[1] <= 1:
                raise ValueError("constant beta must lie in [0, 1]")
        elif self.beta_mode[0] != "adaptive":
            raise ValueError(f"unknown beta mode {self.beta_mode!r}")
        if self.flip_mode not in ("deterministic", "stochastic"):
            raise ValueError(f"unknown flip mode {self.flip_mode!r}")


def parse_schedule(text: str) -> tuple:
    text = text.strip()
    if text == "constant":
        return ("constant",)
    match = _STEP_RE.match(text)
    if match:
        return ("step", float(match.group(1)), int(match.group(2)))
    raise ValueError(f"cannot parse eta schedule {text!r}; expected 'constant' or 'step(factor, period)'")


def parse_beta_mode(text: str) -> tuple:
    text = text.strip()
    if text == "adaptive":
        return ("adaptive",)
    match = _CONST_RE.match(text)
    if match:
        return ("constant", float(match.group(1)))
    raise ValueError(f"cannot parse beta mode {text!r}; expected 'adaptive' or 'constant(value)'")


def format_schedule(schedule: tuple) -> str:
    if schedule[0] == "constant":
        return "constant"
    return f"step({schedule[1]!r}, {schedule[2]})"


def format_beta_mode(mode: tuple) -> str:
    return "adaptive" if mode[0] == "adaptive" else f"constant({mode[1]!r})"


def eta_update(cfg: OptimConfig, t: int) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    if cfg.eta_schedule[0] == "constant":
        return cfg.eta0
    _, factor, period = cfg.eta_schedule
    return cfg.eta0 * factor ** (t // period)


@dataclass
class OptimState:
    m: np.ndarray
    beta: float = 1.0
    eta: float = 0.0
    c_tot: int = 0
    c_kept: int = 0
    t: int = 0
    stream: int = 0
    # diagnostics of the last step
    last_flips: int = 0
    last_m_sq: float = 0.0
    last_m_absmax: float = 0.0
    last_e_sq: float = 0.0
    last_h_sq: float = 0.0
    last_triggered: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def zeros(cls, shape, cfg: OptimConfig, stream: int = 0) -> "OptimState":
        return cls(m=np.zeros(tuple(shape)), beta=1.0, eta=eta_update(cfg, 0), stream=stream)

    @property
    def delta_hat(self) -> float:
        """Compression ratio ||m_after||^2 / ||m_before||^2 of the last step."""
        return self.last_e_sq / self.last_m_sq if self.last_m_sq > 0 else 0.0


def accumulate(state: OptimState, q, cfg: OptimConfig) -> OptimState:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != state.m.shape:
        raise ValueError(f"signal shape {q.shape} does not match accumulator {state.m.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("optimization signal has non-finite entries")
    m = state.beta * state.m + state.eta * q
    if cfg.kappa is not None:
        bound = state.eta * cfg.kappa
        m = np.clip(m, -bound, bound)
    return replace(state, m=m)


def triggered(w_pm, m, tau: float) -> np.ndarray:
    """Coordinates where |m| > tau and m has the sign of w (m == 0 never agrees)."""
    return (np.abs(m) > tau) & (np.asarray(w_pm) * m > 0)


def flip_decision(w, m, cfg: OptimConfig, uniform=None) -> np.ndarray:
    """Boolean mask of weights to flip. ``w`` is bool (True = +1)."""
    w_pm = np.where(np.asarray(w, dtype=bool), 1.0, -1.0)
    m = np.asarray(m, dtype=np.float64)
    hit = triggered(w_pm, m, cfg.tau)
    if cfg.flip_mode == "deterministic":
        return hit
    if uniform is None:
        raise ValueError("stochastic flip mode needs uniform draws")
    target = np.clip(w_pm - np.where(hit, m, 0.0), -1.0, 1.0)
    new_pm = np.where(np.asarray(uniform) < (1.0 + target) / 2.0, 1.0, -1.0)
    return new_pm != w_pm


def apply_step(w: BooleanTensor, state: OptimState, q, cfg: OptimConfig,
               uniform=None) -> tuple[BooleanTensor, OptimState]:
    """One optimizer step. Returns the new weights and a new state."""
    if w.shape != state.m.shape:
        raise ValueError(f"weights {w.shape} and accumulator {state.m.shape} differ")
    acc = accumulate(state, q, cfg)
    m = acc.m
    wb = w.to_bool()
    w_pm = np.where(wb, 1.0, -1.0)
    hit = triggered(w_pm, m, cfg.tau)
    if cfg.flip_mode == "stochastic" and uniform is None:
        uniform = counter_uniforms(cfg.seed, state.stream, state.t, m.shape)
    flips = flip_decision(wb, m, cfg, uniform)

    # deterministic: hit == flips; stochastic: reset wherever the rule fired
    reset = hit if cfg.flip_mode == "stochastic" else flips
    m_new = np.where(reset, 0.0, m)
    new_pm = np.where(flips, -w_pm, w_pm)
    h = new_pm - (w_pm - np.where(hit, m, 0.0))

    c_tot = int(m.size)
    n_flips = int(np.count_nonzero(flips))
    c_kept = c_tot - n_flips
    if cfg.beta_mode[0] == "adaptive":
        beta = c_kept / c_tot if c_tot else 1.0
    else:
        beta = float(cfg.beta_mode[1])
    t = state.t + 1
    new_state = replace(
        acc,
        m=m_new,
        beta=beta,
        eta=eta_update(cfg, t),
        c_tot=c_tot,
        c_kept=c_kept,
        t=t,
        last_flips=n_flips,
        last_m_sq=float(np.dot(m.ravel(), m.ravel())),
        last_m_absmax=float(np.max(np.abs(m))) if m.size else 0.0,
        last_e_sq=float(np.dot(m_new.ravel(), m_new.ravel())),
        last_h_sq=float(np.dot(h.ravel(), h.ravel())),
        last_triggered=hit,
    )
    w_new = w ^ BooleanTensor.from_bool(flips) if n_flips else w
    return w_new, new_state

