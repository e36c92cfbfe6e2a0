import math

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from boolnet import optim
from boolnet.bitcore import BooleanTensor
from boolnet.optim import OptimConfig, OptimState, accumulate, apply_step, eta_update, flip_decision


def state_with(m, cfg, beta=1.0):
    s = OptimState.zeros(np.shape(m), cfg)
    return replace(s, m=np.asarray(m, dtype=np.float64), beta=beta)


def test_accumulate_examples():
    cfg = OptimConfig(eta0=0.1, kappa=None)
    assert accumulate(state_with([0.0], cfg), [2.0], cfg).m[0] == pytest.approx(0.2, abs=1e-15)
    assert accumulate(state_with([0.9], cfg, beta=0.8), [1.0], cfg).m[0] == pytest.approx(0.82, abs=1e-15)
    clipped = OptimConfig(eta0=0.1, kappa=5.0, tau=0.5)
    assert accumulate(state_with([0.6], clipped), [1.0], clipped).m[0] == 0.5
    assert accumulate(state_with([-0.6], clipped), [-1.0], clipped).m[0] == -0.5


def test_accumulate_errors():
    cfg = OptimConfig()
    with pytest.raises(ValueError):
        accumulate(state_with([0.0, 0.0], cfg), [1.0], cfg)
    with pytest.raises(ValueError):
        accumulate(state_with([0.0], cfg), [np.inf], cfg)


@pytest.mark.parametrize("w, m, expected", [
    (True, 1.2, True),
    (True, -5.0, False),
    (True, 0.9, False),
    (False, -1.2, True),
    (False, 1.2, False),
    (True, 1.0, False),
    (True, 0.0, False),
])
def test_flip_decision_deterministic(w, m, expected):
    assert bool(flip_decision(w, m, OptimConfig(kappa=None))) == expected


def test_flip_decision_stochastic_probabilities():
    cfg = OptimConfig(kappa=None, flip_mode="stochastic")
    u = np.linspace(0, 1, 10001)[:-1]
    # w=+1, m=1.5: target -0.5, stays +1 with probability 0.25
    assert np.mean(flip_decision(np.full(u.size, True), np.full(u.size, 1.5), cfg, u)) == pytest.approx(0.75, abs=1e-3)
    # not triggered: never flips
    assert not flip_decision(np.full(u.size, True), np.full(u.size, 0.5), cfg, u).any()
    with pytest.raises(ValueError):
        flip_decision(True, 1.5, cfg)


def test_apply_step_single_flip():
    cfg = OptimConfig(eta0=0.1, kappa=None)
    w = BooleanTensor.from_bool([True])
    w2, s = apply_step(w, state_with([0.95], cfg), [1.0], cfg)
    assert w2.to_bool().tolist() == [False]
    assert s.m[0] == 0.0 and s.beta == 0.0 and s.last_flips == 1


def test_apply_step_null_update():
    cfg = OptimConfig()
    w = BooleanTensor.random((4, 5), np.random.default_rng(0))
    w2, s = apply_step(w, OptimState.zeros((4, 5), cfg), np.zeros((4, 5)), cfg)
    assert w2 == w and s.beta == 1.0 and not s.m.any()
    assert (s.c_tot, s.c_kept, s.t) == (20, 20, 1)


def test_apply_step_two_of_ten():
    cfg = OptimConfig(eta0=1.0, kappa=None)
    w = BooleanTensor.full((10,), True)
    q = np.zeros(10)
    q[[3, 7]] = 2.0
    w2, s = apply_step(w, OptimState.zeros((10,), cfg), q, cfg)
    assert s.beta == 0.8
    assert w2.to_bool().tolist() == [i not in (3, 7) for i in range(10)]


def test_constant_beta_mode():
    cfg = OptimConfig(eta0=1.0, kappa=None, beta_mode="constant(0.5)")
    _, s = apply_step(BooleanTensor.full((2,), True), OptimState.zeros((2,), cfg), [2.0, 0.0], cfg)
    assert s.beta == 0.5


def test_eta_update_examples():
    assert eta_update(OptimConfig(eta0=0.3), 12345) == 0.3
    assert eta_update(OptimConfig(eta0=1.0, eta_schedule="step(0.1, 100)", kappa=None), 250) == pytest.approx(0.01)
    assert eta_update(OptimConfig(eta0=0.8, eta_schedule="step(0.5, 1)", kappa=None), 3) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        eta_update(OptimConfig(), -1)


def test_schedule_text_round_trip():
    for text in ("constant", "step(0.5, 100)"):
        assert optim.format_schedule(optim.parse_schedule(text)) == text
    for text in ("adaptive", "constant(0.9)"):
        assert optim.format_beta_mode(optim.parse_beta_mode(text)) == text


@pytest.mark.parametrize("kwargs", [
    dict(eta0=0.0), dict(tau=-1.0), dict(eta0=0.1, kappa=5.0), dict(kappa=-1.0),
    dict(eta_schedule="linear"), dict(eta_schedule="step(0, 10)"), dict(beta_mode="constant(1.5)"),
    dict(beta_mode="cosine"), dict(flip_mode="random"),
])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        OptimConfig(**kwargs)


def test_auto_kappa_gives_eta_kappa_two():
    cfg = OptimConfig(eta0=0.05)
    assert cfg.eta0 * cfg.kappa == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.floats(0.01, 2.0), st.sampled_from(["deterministic", "stochastic"]),
       st.booleans(), st.integers(0, 2**32 - 1))
def test_step_invariants(d, eta, mode, clip, seed):
    rng = np.random.default_rng(seed)
    cfg = OptimConfig(eta0=eta, kappa="auto" if clip else None, flip_mode=mode, seed=seed)
    w = BooleanTensor.random((d,), rng)
    s = OptimState.zeros((d,), cfg)
    for _ in range(20):
        q = rng.normal(size=d) * 3
        w_prev = w.to_pm(np.float64)
        w, s = apply_step(w, s, q, cfg)
        flipped = w.to_pm(np.float64) != w_prev
        assert 0 <= s.beta <= 1 and s.c_kept <= s.c_tot
        assert np.all(s.m[flipped] == 0)
        if clip:
            assert np.max(np.abs(s.m)) <= s.eta * cfg.kappa
        if mode == "deterministic":
            np.testing.assert_array_equal(flipped, s.last_triggered)
        else:
            assert np.all(s.last_triggered[flipped])
        if cfg.beta_mode[0] == "adaptive":
            assert s.beta == (d - flipped.sum()) / d


def test_one_dimensional_quadratic_sign_semantics():
    # f(w) = (w + 1)^2 from w = +1: gradient 4 until the flip, 0 after
    eta, tau = 0.1, 1.0
    cfg = OptimConfig(eta0=eta, tau=tau, kappa=None)
    w = BooleanTensor.from_bool([True])
    s = OptimState.zeros((1,), cfg)
    flip_step = None
    for t in range(1, 50):
        grad = 2 * (w.to_pm(np.float64) + 1.0)
        w, s = apply_step(w, s, grad, cfg)
        if s.last_flips:
            assert flip_step is None, "flipped back"
            flip_step = t
    assert w.to_bool().tolist() == [False]
    assert flip_step <= math.ceil(tau / (eta * 4.0))


def test_stochastic_mode_is_reproducible():
    cfg = OptimConfig(eta0=0.5, flip_mode="stochastic", seed=9)
    rng = np.random.default_rng(0)
    qs = rng.normal(size=(30, 50)) * 3
    runs = []
    for _ in range(2):
        w, s = BooleanTensor.full((50,), True), OptimState.zeros((50,), cfg)
        for q in qs:
            w, s = apply_step(w, s, q, cfg)
        runs.append(w)
    assert runs[0] == runs[1]
