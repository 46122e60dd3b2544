import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diracnls.closed_forms import (
    GalileanBoost, SelfSimilarParams, chirp_factor, conformal_transform, eval_fa,
    eval_phase_A, eval_phase_rate, eval_u_selfsim, galilean_transform, nls_residual,
    reconstruct_u, selfsim_field,
)
from diracnls.grid import FieldState, SpatialGrid

ULP = np.finfo(float).eps

# 50-digit mpmath evaluations of a e^{ix^2/4t} (it)^{-1/2} e^{+-iA(t)}, frozen
MPMATH_VALUES = [
    # (a, alpha, sign, t, x, value)
    (1.5, 1.0, 1, 2.5, 0.7, -0.61504663602786766719 - 0.72230023917399035711j),
    (1.0, 2.0, -1, 0.3, -1.2, -0.087197683860728357914 + 1.8236583828290477843j),
    (0.8, 0.5, 1, 7.0, 3.0, -0.013334793702833464975 - 0.30207739853467074894j),
]


def test_params_validation():
    with pytest.raises(ValueError):
        SelfSimilarParams(alpha=-1)
    with pytest.raises(ValueError):
        SelfSimilarParams(d=0)
    with pytest.raises(ValueError):
        SelfSimilarParams(sign=0)
    assert SelfSimilarParams(alpha=2.0, d=1).is_critical
    assert SelfSimilarParams(alpha=1.0, d=2).is_critical
    assert SelfSimilarParams(alpha=1.0, d=1).is_subcritical
    assert not SelfSimilarParams(alpha=3.0, d=1).is_subcritical


def test_boost_must_be_finite():
    with pytest.raises(ValueError):
        GalileanBoost((float("nan"),))


def test_fa_examples():
    p = SelfSimilarParams(a=1.0)
    assert eval_fa(p, 1.0, 0.0) == pytest.approx(cmath.exp(-1j * math.pi / 4), abs=1e-15)
    assert eval_fa(SelfSimilarParams(a=0.0), 3.0, 1.7) == 0
    x = np.linspace(-20, 20, 101)
    assert np.allclose(np.abs(eval_fa(SelfSimilarParams(a=2.0), 4.0, x)), 1.0, atol=4 * ULP)


def test_fa_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        eval_fa(SelfSimilarParams(), 0.0, 1.0)
    with pytest.raises(ValueError):
        conformal_transform(lambda s, y: 1.0, 1, -1.0, 0.0)


def test_phase_examples():
    assert eval_phase_A(SelfSimilarParams(a=1.0, alpha=1.0), 4.0) == pytest.approx(4.0, rel=1e-15)
    assert eval_phase_A(SelfSimilarParams(a=3.0, alpha=2.0), 1.0) == 0.0
    assert eval_phase_A(SelfSimilarParams(a=1.0, alpha=2.0), math.e) == pytest.approx(1.0, rel=1e-15)
    # d = 2 critical branch uses |a|^{2/d} log t
    assert eval_phase_A(SelfSimilarParams(a=2.0, alpha=1.0, d=2), math.e) == pytest.approx(2.0)


@pytest.mark.parametrize("a, alpha, sign, t, x, value", MPMATH_VALUES)
def test_selfsim_matches_high_precision(a, alpha, sign, t, x, value):
    got = eval_u_selfsim(SelfSimilarParams(a=a, alpha=alpha, sign=sign), t, x)
    assert abs(got - value) <= 1e-14 * abs(value)


def test_selfsim_modulus_and_zero():
    x = np.linspace(-5, 5, 41)
    for alpha in (0.5, 1.0, 2.0):
        for sign in (1, -1):
            u = eval_u_selfsim(SelfSimilarParams(a=1.0, alpha=alpha, sign=sign), 1.0, x)
            assert np.allclose(np.abs(u), 1.0, atol=4 * ULP)
    assert np.all(eval_u_selfsim(SelfSimilarParams(a=0.0), 2.0, x) == 0)


@given(st.floats(0.05, 50), st.floats(-30, 30), st.floats(0.1, 3), st.sampled_from([1, 2, 3]))
def test_fa_modulus_property(t, x, amp, d):
    p = SelfSimilarParams(a=amp, d=d)
    xv = np.full(d, x) if d > 1 else x
    got = abs(eval_fa(p, t, xv))
    assert abs(got - amp / t ** (d / 2)) <= 4 * ULP * amp / t ** (d / 2) + 1e-300


def test_fd_residual_spec_point():
    # unscaled centred differences at (t, x) = (1, 0.3), h = 1e-4
    for alpha in (0.5, 1.0, 2.0):
        p = SelfSimilarParams(a=1.0, alpha=alpha, sign=1)
        res, mag = nls_residual(selfsim_field(p), p, 1.0, 0.3, 1e-4, scaled=False)
        assert abs(res) <= 1e-6 * mag


def test_fa_solves_free_equation_order_two():
    p = SelfSimilarParams(a=1.0)
    fa = lambda t, x: eval_fa(p, t, x)
    t = np.longdouble(1.3)
    x = np.longdouble(0.4)
    hs = [1e-2, 1e-3, 1e-4]
    errs = [abs(nls_residual(fa, p, t, x, np.longdouble(h), nonlinear=False)[0]) for h in hs]
    orders = [math.log10(float(errs[k] / errs[k + 1])) for k in range(2)]
    assert min(orders) >= 1.9


@given(st.floats(-3, 3), st.floats(0.1, 10), st.floats(-5, 5),
       st.sampled_from([0.5, 1.0, 2.0]), st.sampled_from([1, -1]))
def test_galilean_fixed_point(nu, t, x, alpha, sign):
    p = SelfSimilarParams(a=1.2, alpha=alpha, sign=sign)
    u = selfsim_field(p)
    boosted = galilean_transform(u, GalileanBoost(nu), t, x)
    direct = u(t, x)
    assert abs(boosted - direct) <= 1e-10 * abs(direct)


def test_galilean_examples():
    p = SelfSimilarParams(a=1.0)
    u = selfsim_field(p)
    assert abs(galilean_transform(u, GalileanBoost(0.7), 1.0, 0.2) - u(1.0, 0.2)) <= 1e-12
    x = np.linspace(-2, 2, 9)
    assert np.array_equal(galilean_transform(u, GalileanBoost(0.0), 0.5, x), u(0.5, x))
    k, nu, t = 1.3, -0.4, 0.8
    wave = lambda t, x: np.exp(1j * (k * x - k * k * t))
    expected = np.exp(1j * ((k + nu) * x - (k + nu) ** 2 * t))
    assert np.allclose(galilean_transform(wave, GalileanBoost(nu), t, x), expected, rtol=1e-13)


def test_galilean_two_dimensional():
    p = SelfSimilarParams(a=1.0, alpha=0.5, d=2)
    u = selfsim_field(p)
    x = np.array([[0.3, -0.2], [1.0, 2.0]])
    got = galilean_transform(u, GalileanBoost((0.5, -1.5)), 2.0, x)
    assert np.allclose(got, u(2.0, x), rtol=1e-10)


def test_conformal_transform_examples():
    x = np.linspace(-3, 3, 13)
    t = 0.7
    p = SelfSimilarParams(a=1.4, alpha=1.0, sign=-1)
    assert np.allclose(conformal_transform(lambda s, y: p.a, 1, t, x), eval_fa(p, t, x), rtol=1e-15)
    assert np.all(conformal_transform(lambda s, y: 0.0 * y, 1, t, x) == 0)

    def v(s, y):
        return np.exp(1j * p.sign * eval_phase_A(p, 1 / s)) * p.a * np.ones_like(y)

    assert np.allclose(conformal_transform(v, 1, t, x), eval_u_selfsim(p, t, x), rtol=1e-14)


def test_chirp_factor_dtype_preserving():
    t = np.longdouble(2)
    assert chirp_factor(t, np.longdouble(1)).dtype == np.clongdouble


def test_phase_continuity_across_threshold():
    # the subcritical phase carries the constant 1/kappa, so compare increments from t = 1
    t = np.linspace(0.5, 2.0, 31)
    crit = eval_phase_A(SelfSimilarParams(a=1.0, alpha=2.0), t)
    for delta in (1e-6, -1e-6):
        p = SelfSimilarParams(a=1.0, alpha=2.0 * (1 - delta))
        near = eval_phase_A(p, t) - eval_phase_A(p, 1.0)
        assert np.max(np.abs(near - crit)) <= 1e-4
    assert np.allclose(eval_phase_rate(SelfSimilarParams(a=2.0, alpha=1.0), 4.0), 1.0)


def test_reconstruct_u_examples():
    grid = SpatialGrid(256, 20.0)
    p = SelfSimilarParams(a=1.0, alpha=1.0, sign=-1)
    t = 0.5
    x = np.linspace(-4, 4, 17)
    zero = FieldState(grid, np.zeros(grid.n), 1 / t)
    assert np.allclose(reconstruct_u(zero, p, t, x), eval_u_selfsim(p, t, x), rtol=0, atol=0)
    eps = FieldState(grid, 0.3 * np.exp(-grid.x**2 / 4) * np.exp(0.5j * grid.x), 1 / t)
    diff = np.abs(reconstruct_u(eps, p, t, x) - eval_u_selfsim(p, t, x))
    assert np.allclose(diff, np.abs(eps.interpolate(x / t)) / math.sqrt(t), rtol=1e-12)
    with pytest.raises(ValueError):
        reconstruct_u(eps, p, 0.25, x)
    with pytest.raises(ValueError):
        reconstruct_u(eps, p, t, np.array([15.0]))
