import math

import numpy as np
import pytest

from diracnls.closed_forms import SelfSimilarParams
from diracnls.equations import EquationSpec, Family
from diracnls.grid import FieldState, SpatialGrid
from diracnls.scattering import (
    InsufficientHorizon, back_propagate, cauchy_tail, dyadic_times, estimate_scattering_state,
    fresnel_image, scatter_profile, small_time_limit_residual, sobolev_distance,
)
from diracnls.solver import TimeMesh, free_flow, integrate

ULP = np.finfo(float).eps
PARAMS = SelfSimilarParams(a=1.0, alpha=1.0, sign=-1)


def conformal_run(nonlinear=True, amp=0.1, n=1024, L=64.0, t_end=8.0, steps=200):
    spec = EquationSpec(Family.CONFORMAL_PERTURBATION, PARAMS, nonlinear=nonlinear)
    g = SpatialGrid(n, L)
    dyadic = tuple(2.0**k for k in range(int(math.log2(t_end)) + 1))
    init = FieldState(g, amp * np.exp(-g.x**2 / 4) * np.exp(0.3j * g.x), 1.0)
    return integrate(spec, init, TimeMesh(1.0, t_end, steps, extra_times=dyadic), snapshot_times=dyadic)


def test_back_propagate_identity_and_norm():
    g = SpatialGrid(256, 16.0)
    s = FieldState(g, np.exp(-g.x**2) * (1 + 1j), 0.0)
    assert np.array_equal(back_propagate(s, -1, 0.0).values, s.values)
    later = FieldState(g, s.values, 3.7)
    out = back_propagate(later, -1, 0.0)
    assert out.time == 0.0
    assert abs(out.norm() - later.norm()) <= 8 * ULP * later.norm()


def test_back_propagation_inverts_free_flow():
    g = SpatialGrid(256, 16.0)
    s = FieldState(g, np.exp(-g.x**2) * np.exp(1j * g.x), 1.0)
    moved = free_flow(s, -1, 4.0)
    back = back_propagate(moved, -1, 1.0)
    assert np.max(np.abs(back.values - s.values)) <= 1e-12 * np.max(np.abs(s.values))


def test_sobolev_distance():
    g = SpatialGrid(64, math.pi)
    a = FieldState(g, np.exp(2j * g.x))
    b = FieldState(g, np.zeros(g.n))
    assert sobolev_distance(a, b, 0) == pytest.approx(math.sqrt(2 * math.pi))
    assert sobolev_distance(a, b, 1) == pytest.approx(math.sqrt(5 * 2 * math.pi))
    assert sobolev_distance(a, b, 2) == pytest.approx(math.sqrt(25 * 2 * math.pi))
    with pytest.raises(ValueError):
        sobolev_distance(a, b, 3)


def test_linear_run_has_exact_wave_operator():
    traj = conformal_run(nonlinear=False)
    assert np.all(cauchy_tail(traj) <= 1e-12)
    prof = scatter_profile(traj)
    assert np.max(prof.distances) <= 1e-12


def test_zero_perturbation_tail_and_residual():
    traj = conformal_run(amp=0.0)
    assert np.all(cauchy_tail(traj) == 0)
    res = small_time_limit_residual(traj, PARAMS, [1.0, 0.5, 0.25])
    assert np.all(res == 0)


def test_insufficient_horizon():
    traj = conformal_run(t_end=2.0, steps=20)
    assert list(dyadic_times(traj)) == [1.0, 2.0]
    with pytest.raises(InsufficientHorizon):
        cauchy_tail(traj)
    _, budget = estimate_scattering_state(traj)
    assert math.isnan(budget)


def test_linear_run_matches_free_image_exactly():
    traj = conformal_run(nonlinear=False, t_end=4.0, steps=50)
    res = small_time_limit_residual(traj, PARAMS, [1.0, 0.5, 0.25], exact_free=True)
    assert np.all(res <= 1e-8)


def test_nonlinear_tail_decreases():
    traj = conformal_run(amp=0.3, t_end=64.0, steps=400)
    d = cauchy_tail(traj)
    assert np.all(np.diff(d[3:]) < 0)
    eps_plus, budget = estimate_scattering_state(traj)
    assert eps_plus.time == 0.0 and 0 < budget < d[0]


def test_fresnel_image_is_unitary_in_the_limit():
    g = SpatialGrid(512, 32.0)
    eps = FieldState(g, np.exp(-g.x**2 / 2) * (1 + 0.5j), 0.0)
    x = np.linspace(-60, 60, 4097)[:-1]
    img = fresnel_image(eps, 0.0, x, chirp=False)
    norm = math.sqrt(np.sum(np.abs(img) ** 2) * (x[1] - x[0]))
    assert norm == pytest.approx(eps.norm(), rel=1e-10)
    # Gaussian transform in closed form: (4 pi)^{-1/2} sqrt(2 pi) e^{-x^2/8} (1 + 0.5i)
    want = (1 + 0.5j) * math.sqrt(2 * math.pi / (4 * math.pi)) * np.exp(-x**2 / 8)
    assert np.max(np.abs(img - want)) <= 1e-12
