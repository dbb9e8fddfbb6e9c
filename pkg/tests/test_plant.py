import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwconsensus import (
    build_state_space,
    builtin_case,
    check_stability,
    eval_at_one,
    make_nonlinearity,
    make_plant,
    poly,
    static_gain,
    steady_state_check,
    step,
    step_state_space,
)
from hwconsensus.errors import NonFiniteValue, ValidationError, ZeroDCGain
from hwconsensus.plant import is_strictly_increasing

F2 = make_nonlinearity("affine", {"beta": -2.0, "gamma": 1.0})
IDENT = make_nonlinearity("identity", {})


def test_eval_at_one():
    assert eval_at_one(poly([1, 0.2, 0, 0.6])) == pytest.approx(1.8, abs=1e-12)
    assert eval_at_one(poly([1, -0.3, -1.2])) == pytest.approx(-0.5, abs=1e-12)
    assert eval_at_one(poly([1])) == 1.0


def test_polynomial_constant_term_pinned():
    with pytest.raises(ValidationError):
        poly([2, 0.5])
    with pytest.raises(ValidationError):
        poly([])


def test_stability_linear_factors():
    rep = check_stability(poly([1, -0.5]))
    assert rep.stable
    assert rep.roots[0] == pytest.approx(2.0, abs=1e-9)
    rep = check_stability(poly([1, -2]))
    assert not rep.stable
    assert rep.roots[0] == pytest.approx(0.5, abs=1e-9)
    assert check_stability(poly([1])).stable  # degree 0, vacuous


def test_stability_case1_agent1():
    rep = check_stability(poly([1, 0.2, 0, 0.6]))
    assert rep.stable
    mods = sorted(abs(r) for r in rep.roots)
    reals = [r for r in rep.roots if abs(r.imag) < 1e-9]
    assert len(reals) == 1
    assert reals[0].real == pytest.approx(-1.0921268117651506, abs=1e-9)
    assert mods[-1] == pytest.approx(1.2353438008545017, abs=1e-9)


def test_all_builtin_polynomials_stable():
    for case in (1, 2, 3):
        for a in builtin_case(case).agents:
            rep = check_stability(a.C, tol=1e-9)
            assert rep.stable, a.C


def test_state_space_shapes():
    ss = build_state_space(poly([1, -0.5]), poly([1]))
    assert np.array_equal(ss.A, np.array([[0.5, 1.0], [0.0, 0.0]]))
    assert np.array_equal(ss.B, np.array([1.0, 0.0]))
    assert np.array_equal(ss.G1, np.array([1.0, 0.0]))

    ss = build_state_space(poly([1]), poly([1]))
    assert ss.A.shape == (1, 1) and ss.A[0, 0] == 0.0
    assert ss.B[0] == 1.0

    ss = build_state_space(poly([1, 0.6, 0.5, 0.4]), poly([1, -1, -2]))
    assert ss.A.shape == (4, 4)
    assert np.array_equal(ss.A[:, 0], np.array([-0.6, -0.5, -0.4, 0.0]))
    assert np.array_equal(np.diag(ss.A, 1), np.ones(3))


def test_step_examples():
    p = make_plant("hammerstein", poly([1]), poly([1]), IDENT)
    assert step(p, 3.0) == 3.0

    p = make_plant("hammerstein", poly([1, 0.6, 0.5, 0.4]), poly([1, -1, -2]), F2)
    assert step(p, 1.0) == -1.0  # v = f2(1) = -1 feeds straight through

    p = make_plant("wiener", poly([1, 0.6, 0.5, 0.4]), poly([1, -1, -2]), F2)
    assert step(p, 1.0) == -1.0  # v = 1, y = f2(1)


def test_step_nonfinite_detection():
    p = make_plant("hammerstein", poly([1, -0.5]), poly([1]), IDENT)
    p.y_hist = [1.6e308]
    with pytest.raises(NonFiniteValue):
        step(p, 1.6e308)  # 0.8e308 + 1.6e308 overflows


def test_static_gain_values():
    p = make_plant("hammerstein", poly([1, 0.6, 0.5, 0.4]), poly([1, -1, -2]), F2)
    g = static_gain(p)
    assert g.c == pytest.approx(2.5, abs=1e-12)
    assert g.d == pytest.approx(-2.0, abs=1e-12)
    assert g.h(0.5) == pytest.approx(0.0, abs=1e-12)
    for u in (-3.0, 0.0, 1.7):
        assert g.h(u) == pytest.approx(1.6 * u - 0.8, abs=1e-12)

    p = make_plant("hammerstein", poly([1]), poly([1]), IDENT)
    g = static_gain(p)
    assert g.h(2.3) == 2.3

    f3 = make_nonlinearity("shifted_cube", {"gamma": 1.0})
    p = make_plant("hammerstein", poly([1, -0.15, 0, 0.5]), poly([1, 0.2, -0.4]), f3)
    g = static_gain(p)
    assert g.h(2.0) == pytest.approx((0.8 / 1.35) * 1.0, rel=1e-12)


def test_zero_dc_gain_rejected():
    p = make_plant("hammerstein", poly([1, -1]), poly([1]), IDENT)
    with pytest.raises(ZeroDCGain):
        static_gain(p)


def test_steady_state():
    p = make_plant("hammerstein", poly([1, -0.5]), poly([1]), IDENT)
    assert static_gain(p).h(1.0) == pytest.approx(2.0, abs=1e-12)
    assert steady_state_check(p, 1.0, horizon=200, tol=1e-9)

    p = make_plant("hammerstein", poly([1]), poly([1]), IDENT)
    assert steady_state_check(p, 0.37, horizon=1, tol=1e-12)

    a4 = builtin_case(1).agents[3]
    p = a4.build()
    assert static_gain(p).h(0.0) == pytest.approx(1.5 / 2.86, abs=1e-6)
    assert steady_state_check(p, 0.0, horizon=2000, tol=1e-6)


def test_builtin_gain_monotone_on_grid():
    for case in (1, 2, 3):
        for a in builtin_case(case).agents:
            assert is_strictly_increasing(static_gain(a.build()).h)


def test_unknown_nonlinearity_rejected():
    with pytest.raises(ValidationError):
        make_nonlinearity("sigmoid", {})
    with pytest.raises(ValidationError):
        make_nonlinearity("affine", {"beta": 1.0})  # gamma missing
    with pytest.raises(ValidationError):
        make_nonlinearity("affine", {"beta": 1.0, "gamma": 0.0, "x": 1.0})


def _random_stable_poly(rng, max_deg=4):
    deg = rng.integers(0, max_deg + 1)
    coeffs = [1.0]
    factors = []
    d = deg
    while d > 0:
        if d >= 2 and rng.random() < 0.5:
            r = rng.uniform(1.05, 3.0)
            th = rng.uniform(0.1, math.pi - 0.1)
            factors.append([1.0, -2.0 * math.cos(th) / r, 1.0 / r**2])
            d -= 2
        else:
            r = rng.uniform(1.05, 3.0) * rng.choice([-1.0, 1.0])
            factors.append([1.0, -1.0 / r])
            d -= 1
    out = np.array(coeffs)
    for f in factors:
        out = np.convolve(out, np.array(f))
    return poly(list(out))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_state_space_matches_difference_equation(seed):
    rng = np.random.default_rng(seed)
    C = _random_stable_poly(rng)
    D = poly([1.0] + list(rng.uniform(-2, 2, size=rng.integers(0, 4))))
    p = make_plant("hammerstein", C, D, IDENT)
    ss = build_state_space(C, D)
    us = rng.uniform(-4, 4, size=200)
    for u in us:
        y_diff = step(p, float(u))
        y_ss = step_state_space(ss, float(u))
        assert abs(y_diff - y_ss) < 1e-10


def test_state_space_matches_for_all_builtin_agents():
    rng = np.random.default_rng(0)
    for case in (1, 2, 3):
        for a in builtin_case(case).agents:
            plant = a.build()
            ss = build_state_space(a.C, a.D)
            for u in rng.uniform(-3, 3, size=300):
                if plant.kind == "hammerstein":
                    w = plant.f(float(u))
                    y_ss = step_state_space(ss, w)
                    y = step(plant, float(u))
                else:
                    v_ss = step_state_space(ss, float(u))
                    y_ss = plant.f(v_ss)
                    y = step(plant, float(u))
                assert abs(y - y_ss) < 1e-10


def test_transition_matrix_decays():
    # stable C implies the powers of A vanish geometrically
    for case in (1, 2, 3):
        for a in builtin_case(case).agents:
            A = build_state_space(a.C, a.D).A
            norms = []
            P = np.eye(A.shape[0])
            for _ in range(200):
                P = P @ A
                norms.append(np.linalg.norm(P))
            logs = np.log(np.maximum(norms, 1e-300))
            ks = np.arange(1, 201)
            slope = np.polyfit(ks, logs, 1)[0]
            assert slope < 0


def test_bounded_input_bounded_state():
    rng = np.random.default_rng(3)
    for a in builtin_case(1).agents:
        ss = build_state_space(a.C, a.D)
        peak = 0.0
        for _ in range(10_000):
            step_state_space(ss, float(rng.uniform(-1, 1)))
            peak = max(peak, float(np.linalg.norm(ss.X)))
        assert peak < 1e3
