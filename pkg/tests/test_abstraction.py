import json

import numpy as np
import pytest

from boolnet.abstraction import (
    AbstractState, abstract_step, compression_ratio, equivalence_check, q0_deterministic, q0_stochastic, q1,
)
from boolnet.rng import counter_uniforms

from oracles import ef_signsgd_reference


@pytest.mark.parametrize("m, w, expected", [
    (0.5, 1, 0.0), (1.5, 1, 1.5), (-2.0, -1, -2.0), (-0.5, 1, 0.0), (1.0, 1, 0.0), (-1.0, -1, 0.0), (2.0, -1, 0.0),
])
def test_q1_examples(m, w, expected):
    assert q1(m, w) == expected


def test_q1_dichotomy_dense_grid():
    m = np.linspace(-3, 3, 50001)
    m = np.concatenate([m, [1.0, -1.0, np.nextafter(1.0, 2), np.nextafter(-1.0, -2), 0.0]])
    for w in (-1.0, 1.0):
        out = q1(m, np.full_like(m, w))
        fires = (np.abs(m) > 1) & (np.sign(m) == w)
        np.testing.assert_array_equal(out, np.where(fires, m, 0.0))


@pytest.mark.parametrize("v, expected", [(0.3, 1.0), (-0.5, -1.0), (0.0, 1.0)])
def test_q0_deterministic(v, expected):
    assert q0_deterministic(v) == expected


def test_q0_stochastic_boundaries_and_mean():
    u = np.random.default_rng(0).random(10**6)
    assert np.all(q0_stochastic(np.ones_like(u), u) == 1.0)
    assert np.all(q0_stochastic(np.full_like(u, 5.0), u) == 1.0)
    assert np.mean(q0_stochastic(np.zeros_like(u), u)) == pytest.approx(0.0, abs=3e-3)
    assert np.mean(q0_stochastic(np.full_like(u, 0.5), u)) == pytest.approx(0.5, abs=3e-3)


def test_abstract_step_small_signal_keeps_weights():
    s = AbstractState.start([1.0, -1.0, 1.0])
    g = np.array([0.3, -0.2, 0.9])
    s2 = abstract_step(s, g, 0.5)
    np.testing.assert_array_equal(s2.w, s.w)
    np.testing.assert_array_equal(s2.e, 0.5 * g)
    assert not s2.last_delta.any() and not s2.last_h.any()


def test_abstract_step_flip_trace():
    s = AbstractState.start([1.0])
    s.e[:] = 0.9
    s2 = abstract_step(s, [2.0], 0.1)
    assert s2.last_m[0] == pytest.approx(1.1)
    assert s2.last_delta[0] == s2.last_m[0]
    assert s2.w[0] == -1.0 and s2.e[0] == 0.0
    assert s2.last_h[0] == pytest.approx(-0.9)


def test_abstract_step_zero_gradient_is_fixed_point():
    s = AbstractState.start([1.0, -1.0])
    s2 = abstract_step(s, [0.0, 0.0], 0.3)
    np.testing.assert_array_equal(s2.w, s.w)
    np.testing.assert_array_equal(s2.e, s.e)


def test_abstract_step_errors():
    s = AbstractState.start([1.0])
    with pytest.raises(ValueError):
        abstract_step(s, [np.nan], 0.1)
    with pytest.raises(ValueError):
        abstract_step(s, [1.0, 2.0], 0.1)
    with pytest.raises(ValueError):
        abstract_step(s, [1.0], 0.1, q0="stochastic")
    with pytest.raises(ValueError):
        abstract_step(s, [1.0], 0.1, rule="other")


def test_compression_ratio_bounded_by_one():
    rng = np.random.default_rng(1)
    s = AbstractState.start(np.ones(32))
    for _ in range(50):
        s = abstract_step(s, rng.normal(size=32) * 4, 0.2)
        assert 0.0 <= compression_ratio(s) <= 1.0


def test_h_is_zero_without_flips_in_deterministic_mode():
    rng = np.random.default_rng(2)
    s = AbstractState.start(np.where(rng.random(64) < 0.5, 1.0, -1.0))
    for _ in range(40):
        s = abstract_step(s, rng.normal(size=64), 0.3)
        assert np.all(s.last_h[s.last_delta == 0] == 0)


def test_h_unbiased_under_stochastic_rounding():
    # fixed w=+1 and delta=1.5 -> u=-0.5, h = Q0(u) - u
    n = 10**6
    u = counter_uniforms(3, 0, 0, (n,))
    h = q0_stochastic(np.full(n, -0.5), u) + 0.5
    se = h.std() / np.sqrt(n)
    assert abs(h.mean()) <= 3 * se


def test_equivalence_constant_gradient():
    rep = equivalence_check(np.full((10, 1), 0.3), eta=1.0)
    assert rep.equivalent and rep.flips >= 1


def test_equivalence_first_flip_at_step_four():
    # accumulated 0.3 * t exceeds 1 first at t = 4
    rep = equivalence_check(np.full((3, 1), 0.3), eta=1.0)
    assert rep.equivalent and rep.flips == 0
    rep = equivalence_check(np.full((4, 1), 0.3), eta=1.0)
    assert rep.flips == 1


def test_equivalence_zero_stream():
    rep = equivalence_check(np.zeros((20, 5)), eta=0.1)
    assert rep.equivalent and rep.flips == 0


@pytest.mark.parametrize("q0", ["deterministic", "stochastic"])
def test_equivalence_gaussian_stream(q0):
    grads = np.random.default_rng(4).normal(size=(1000, 128))
    rep = equivalence_check(grads, eta=0.3, q0=q0, seed=4)
    assert rep.equivalent, rep
    assert rep.flips > 0


def test_equivalence_detects_threshold_mismatch():
    grads = np.random.default_rng(5).normal(size=(200, 16))
    rep = equivalence_check(grads, eta=0.5, tau=1.2)
    assert not rep.equivalent
    record = json.loads(rep.to_json())
    assert record["step"] >= 1 and record["quantity"] in ("w", "accumulator")


def test_ef_signsgd_mode_matches_reference():
    rng = np.random.default_rng(6)
    x0 = rng.normal(size=8)
    grads = rng.normal(size=(100, 8))
    eta, step = 0.3, 0.05
    s = AbstractState.start(x0)
    ref = ef_signsgd_reference(x0, grads, eta, step)
    for g, (x_ref, e_ref) in zip(grads, ref):
        s = abstract_step(s, g, eta, rule="ef_signsgd", sign_scale=step)
        assert s.w.tolist() == x_ref
        assert s.e.tolist() == e_ref
