"""Finite-horizon surrogates for wave operators and asymptotic completeness.

A conformal-frame trajectory eps(t) is compared with free evolutions by
back-propagating snapshots with the inverse free flow. The scattering state
eps_plus is estimated by the last back-propagated profile; the dyadic Cauchy
distances of the back-propagated profiles budget that estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_forms import SelfSimilarParams, chirp_factor, eval_phase_A
from .grid import FieldState
from .solver import Trajectory, free_flow


class InsufficientHorizon(ValueError):
    pass


@dataclass(frozen=True)
class ScatterProfile:
    times: np.ndarray
    profiles: list
    distances: np.ndarray  # pairwise L^2 distances between profiles
    t_base: float


def back_propagate(state: FieldState, sigma: int, t_base: float = 0.0) -> FieldState:
    """Undo the free flow from state.time back to t_base (norm preserving)."""
    out = free_flow(state, sigma, t_base - state.time)
    return out.with_values(out.values, t_base)


def sobolev_distance(a: FieldState, b: FieldState, s: int = 0) -> float:
    """L^2 distance with spectral weight (1 + xi^2)^{s/2}, s in {0, 1, 2}."""
    if s not in (0, 1, 2):
        raise ValueError("s must be 0, 1 or 2")
    grid = a.grid
    diff = np.fft.fft(a.values - b.values)
    weight = (1 + grid.xi2) ** s
    return math.sqrt(float(np.sum(weight * np.abs(diff) ** 2)) * grid.dx / grid.n)


def scatter_profile(traj: Trajectory, sigma: int | None = None, t_base: float = 0.0,
                    times=None) -> ScatterProfile:
    sigma = traj.spec.sigma if sigma is None else sigma
    snaps = traj.snapshots()
    if times is not None:
        snaps = [traj.state_at(t) for t in times]
    profiles = [back_propagate(s, sigma, t_base) for s in snaps]
    k = len(profiles)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            dist[i, j] = dist[j, i] = sobolev_distance(profiles[i], profiles[j])
    return ScatterProfile(np.array([s.time for s in snaps]), profiles, dist, t_base)


def dyadic_times(traj: Trajectory, t0: float | None = None) -> np.ndarray:
    """Times 2^k t0 (k = 0, 1, ...) at which the trajectory holds snapshots."""
    t0 = traj.entries[0].time if t0 is None else t0
    stored = [s.time for s in traj.snapshots()]
    out = []
    k = 0
    while True:
        target = t0 * 2.0**k
        if target > traj.entries[-1].time * (1 + 1e-12):
            break
        if not any(abs(t - target) <= 1e-9 * target for t in stored):
            break
        out.append(target)
        k += 1
    return np.array(out)


def cauchy_tail(traj: Trajectory, sigma: int | None = None, t0: float | None = None) -> np.ndarray:
    """d_k = ||phi(2^{k+1} t0) - phi(2^k t0)||_2 for back-propagated profiles phi."""
    sigma = traj.spec.sigma if sigma is None else sigma
    times = dyadic_times(traj, t0)
    if times.size < 3:
        raise InsufficientHorizon(
            f"need snapshots at >= 3 dyadic times starting at t0, found {times.size}")
    profiles = [back_propagate(traj.state_at(t), sigma, 0.0) for t in times]
    return np.array([sobolev_distance(profiles[k + 1], profiles[k]) for k in range(len(profiles) - 1)])


def estimate_scattering_state(traj: Trajectory, sigma: int | None = None) -> tuple[FieldState, float]:
    """eps_plus estimated from the last snapshot, plus the last dyadic distance as error budget."""
    sigma = traj.spec.sigma if sigma is None else sigma
    snaps = traj.snapshots()
    if not snaps:
        raise InsufficientHorizon("trajectory holds no snapshots")
    eps_plus = back_propagate(snaps[-1], sigma, 0.0)
    try:
        budget = float(cauchy_tail(traj, sigma)[-1])
    except InsufficientHorizon:
        budget = float("nan")
    return eps_plus, budget


def fresnel_image(eps_plus: FieldState, t: float, x: np.ndarray, chirp: bool = True,
                  chunk: int = 256) -> np.ndarray:
    """(4 pi)^{-1/2} int e^{ixz/2} e^{-itz^2/4} eps_plus(z) dz by direct quadrature.

    With ``chirp=False`` this is the t -> 0 limit, a rescaled Fourier transform
    of eps_plus evaluated at x/2 (unitary from L^2(dz) to L^2(dx)). eps_plus is
    band-limited on its grid, so frequencies x/2 beyond the grid Nyquist are
    zero rather than the aliased value of the quadrature sum.
    """
    grid = eps_plus.grid
    z = grid.x
    weights = eps_plus.values * grid.dx / math.sqrt(4 * math.pi)
    if chirp:
        weights = weights * np.exp(-1j * t * z * z / 4)
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    for start in range(0, flat.size, chunk):
        xs = flat[start:start + chunk]
        out[start:start + chunk] = np.exp(0.5j * np.outer(xs, z)) @ weights
    out[np.abs(flat) / 2 >= np.pi / grid.dx] = 0.0
    return out.reshape(x.shape)


def _physical_perturbation(eps: FieldState, params: SelfSimilarParams, t: float):
    """Nodes x = t*y and values of u - u_selfsim = chirp * e^{+-iA(t)} * eps(1/t, y)."""
    x = t * eps.grid.x
    phase = np.exp(1j * params.sign * eval_phase_A(params, t))
    return x, chirp_factor(t, x, 1) * phase * eps.values


def small_time_limit_residual(traj: Trajectory, params: SelfSimilarParams, t_phys,
                              eps_plus: FieldState | None = None, exact_free: bool = False) -> np.ndarray:
    """||(u - u_selfsim)(t) - target||_{L^2(dx)} at each physical time t.

    The target is the t -> 0 limit profile (4 pi)^{-1/2} hat(eps_plus)(x/2).
    With ``exact_free`` it is instead the exact free image at time t (chirp and
    self-similar phase included), which a linear run matches identically.
    The norm is the quadrature over the rescaled conformal nodes x = t*y.
    """
    if eps_plus is None:
        eps_plus, budget = estimate_scattering_state(traj)
        if not np.isfinite(budget) and len(traj.snapshots()) < 2:
            raise InsufficientHorizon("cannot resolve eps_plus")
    out = []
    for t in np.atleast_1d(t_phys):
        eps = traj.state_at(1.0 / t)
        x, pert = _physical_perturbation(eps, params, t)
        target = fresnel_image(eps_plus, t, x, chirp=exact_free)
        if exact_free:
            target = target * np.exp(1j * params.sign * eval_phase_A(params, t))
        dx = t * eps.grid.dx
        out.append(math.sqrt(float(np.sum(np.abs(pert - target) ** 2)) * dx))
    return np.array(out)
