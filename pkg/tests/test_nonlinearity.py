import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splab.nonlinearity import (
    DEFAULT_Q_L, Nonlinearity, NonlinearityError, SamplingSpec, ScalingContext,
    ScalingOverflowWarning, a1_deviation, check_assumptions, eval_f, eval_F, eval_fprime,
    f1_default, f2_default, scaled_f, scaled_F, scaled_fprime,
)

BUILTINS = [Nonlinearity.pure_power(3.0), f1_default(), f2_default()]


def test_f_examples():
    assert eval_f(Nonlinearity.pure_power(3.0), -2.0) == -8.0
    assert math.isclose(eval_f(f2_default(), 2.0), 8 - 2 ** 2.5, rel_tol=1e-14)
    for nl in BUILTINS:
        assert eval_f(nl, 0.0) == 0.0


def test_F_examples():
    assert eval_F(Nonlinearity.pure_power(3.0), 2.0) == 4.0
    nl = Nonlinearity.power_sum([2.5, 3.0])
    assert math.isclose(eval_F(nl, 1.0), 1 / 3.5 + 1 / 4, rel_tol=1e-14)
    for nl in BUILTINS:
        assert eval_F(nl, 0.0) == 0.0


def test_fprime_examples():
    assert eval_fprime(Nonlinearity.pure_power(3.0), 2.0) == 12.0
    assert eval_fprime(Nonlinearity.pure_power(3.7), 0.0) == 0.0
    assert math.isclose(eval_fprime(f2_default(), 1.0), 0.5, rel_tol=1e-14)


@pytest.mark.parametrize("nl", BUILTINS, ids=lambda n: n.kind)
def test_derivatives_match_finite_differences(nl):
    s = np.concatenate([-np.geomspace(0.05, 20, 40), np.geomspace(0.05, 20, 40)])
    h = 1e-6 * np.abs(s)
    dF = (eval_F(nl, s + h) - eval_F(nl, s - h)) / (2 * h)
    np.testing.assert_allclose(dF, eval_f(nl, s), rtol=1e-5)
    df = (eval_f(nl, s + h) - eval_f(nl, s - h)) / (2 * h)
    np.testing.assert_allclose(df, eval_fprime(nl, s), rtol=1e-5)


@pytest.mark.parametrize("nl", BUILTINS, ids=lambda n: n.kind)
@pytest.mark.parametrize("c", [1.0, 1e-2, 1e-4])
def test_scaled_F_derivative_is_scaled_f(nl, c):
    ctx = ScalingContext(c, nl.p)
    s = np.geomspace(0.05, 20, 50)
    s = np.concatenate([-s, s])
    h = 1e-6 * np.abs(s)
    dF = (scaled_F(nl, ctx, s + h) - scaled_F(nl, ctx, s - h)) / (2 * h)
    np.testing.assert_allclose(dF, scaled_f(nl, ctx, s), rtol=1e-5)


@given(c=st.floats(1e-6, 1.0), s=st.floats(-50, 50), p=st.floats(2.4, 4.9))
def test_pure_power_scaling_is_c_independent(c, s, p):
    nl = Nonlinearity.pure_power(p)
    ctx = ScalingContext(c, p)
    assert scaled_f(nl, ctx, s) == abs(s) ** (p - 1) * s
    assert scaled_F(nl, ctx, s) == eval_F(nl, s)
    assert scaled_fprime(nl, ctx, s) == eval_fprime(nl, s)


@given(s=st.floats(-1e3, 1e3, allow_nan=False))
def test_odd_and_even_symmetry(s):
    for nl in BUILTINS:
        assert eval_f(nl, -s) == -eval_f(nl, s)
        assert eval_F(nl, -s) == eval_F(nl, s)


def test_subdominant_power_vanishes_in_the_limit():
    nl = Nonlinearity.power_sum([2.5, 3.0])
    for c in (1e-3 ** 0.5, 1e-4 ** 0.5):  # lam = c^2 at p = 3
        ctx = ScalingContext(c, 3.0)
        lam = ctx.lam
        assert math.isclose(scaled_f(nl, ctx, 1.0), 1.0 + lam ** 0.5, rel_tol=1e-13)
    assert abs(scaled_f(nl, ScalingContext(1e-6, 3.0), 1.0) - 1.0) < 1e-5


def test_context_at_p3():
    ctx = ScalingContext(1e-2, 3.0)
    assert ctx.alpha == 4.0
    assert math.isclose(ctx.lam, 1e-4, rel_tol=1e-14)
    assert math.isclose(ctx.zoom * ctx.lam, 1.0, rel_tol=1e-14)
    assert ScalingContext.limit(3.0).coulomb_prefactor == 0.0


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_context_rejects_bad_c(bad):
    with pytest.raises(ValueError):
        ScalingContext(bad, 3.0)


def test_constructors_validate():
    with pytest.raises(NonlinearityError):
        Nonlinearity.pure_power(2.0)
    with pytest.raises(NonlinearityError):
        Nonlinearity.power_sum([3.0, 5.5])
    with pytest.raises(NonlinearityError):
        Nonlinearity.power_difference(3.0, 3.2)
    with pytest.raises(NonlinearityError):
        Nonlinearity.from_config({"kind": "exponential"})


def test_config_round_trip():
    for nl in BUILTINS:
        assert Nonlinearity.from_config(nl.to_config()) == nl


def test_custom_expression_matches_builtin():
    custom = Nonlinearity.from_expression("np.abs(s)**2*s", 3.0)
    ref = Nonlinearity.pure_power(3.0)
    s = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(eval_f(custom, s), eval_f(ref, s), rtol=1e-14)
    np.testing.assert_allclose(eval_F(custom, s), eval_F(ref, s), rtol=1e-10, atol=1e-14)
    ctx = ScalingContext(1e-2, 3.0)
    np.testing.assert_allclose(scaled_F(custom, ctx, s), scaled_F(ref, ctx, s),
                               rtol=1e-10, atol=1e-14)


def test_custom_overflow_uses_asymptote():
    custom = Nonlinearity.from_expression("np.abs(s)**2*s", 3.0)
    ctx = ScalingContext(1e-6, 3.0)
    with pytest.warns(ScalingOverflowWarning):
        v = scaled_f(custom, ctx, np.array([1e3]))
    assert v[0] == 1e9


def test_pure_power_assumptions_pass_with_zero_F1_margin():
    rep = check_assumptions(Nonlinearity.pure_power(3.0), 4.0, 4.0)
    assert rep.all_passed, rep.failed()
    assert rep.checks["F1"].margin == 0.0


def test_pure_power_violates_F1_below_p_plus_one():
    rep = check_assumptions(Nonlinearity.pure_power(3.0), 3.5, 4.0)
    assert not rep.all_passed
    assert rep.failed() == ["F1"]


def test_f1_passes_all_assumptions():
    nl = f1_default()
    rep = check_assumptions(nl, *DEFAULT_Q_L[nl.kind](nl))
    assert rep.all_passed, rep.failed()


def test_f2_A1_deviation_decreases_with_lambda():
    nl = f2_default()
    s = np.linspace(-10, 10, 2001)
    devs = [a1_deviation(nl, lam, s) for lam in (1e-1, 1e-2, 1e-3)]
    assert devs[0] > devs[1] > devs[2]


def test_f2_F1_has_no_admissible_q():
    # f(s)s - qF(s) = (1 - q/4) s^4 - (1 - q/3.5) s^3.5 for s > 0:
    # small s needs q <= 3.5, large s needs q >= 4
    nl = f2_default()
    for q in (3.4, 3.5, 3.75, 4.0, 4.5):
        assert "F1" in check_assumptions(nl, q, 3.5).failed()


def test_assumption_q_range_checked():
    with pytest.raises(ValueError):
        check_assumptions(Nonlinearity.pure_power(3.0), 3.0, 4.0)


def test_sampling_grid_is_symmetric():
    s = SamplingSpec().s_grid()
    np.testing.assert_array_equal(np.sort(s), np.sort(-s))
    assert np.max(np.abs(s)) == pytest.approx(1e3)
