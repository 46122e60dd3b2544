"""Explicit self-similar solutions and exact changes of variables.

All evaluators are pure and dtype-preserving: passing ``np.longdouble``
times/positions gives extended-precision results, which the finite-difference
checks rely on to keep rounding below truncation error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import FieldState

#: |alpha*d - 2| below this selects the logarithmic (critical) phase branch
CRITICAL_TOL = 1e-12

FieldFn = Callable[[object, object], object]


@dataclass(frozen=True)
class SelfSimilarParams:
    a: complex = 1.0
    alpha: float = 2.0
    d: int = 1
    sign: int = 1  # +1 focusing, -1 defocusing

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 (focusing) or -1 (defocusing), got {self.sign}")

    @property
    def is_critical(self) -> bool:
        return abs(self.alpha * self.d - 2.0) <= CRITICAL_TOL

    @property
    def is_subcritical(self) -> bool:
        return not self.is_critical and self.alpha * self.d < 2.0


@dataclass(frozen=True)
class GalileanBoost:
    nu: tuple

    def __post_init__(self):
        nu = tuple(float(v) for v in np.atleast_1d(self.nu))
        if not all(np.isfinite(nu)):
            raise ValueError("boost components must be finite")
        object.__setattr__(self, "nu", nu)


def _check_time(t):
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be > 0 (the t = 0 delta limit is not evaluable)")


def _radius2(x, d: int):
    x = np.asarray(x)
    if d == 1:
        return x * x
    if x.shape[-1] != d:
        raise ValueError(f"x must have trailing dimension {d}")
    return np.sum(x * x, axis=-1)


def _it_power(t, d: int):
    # principal branch of (i t)^{d/2}; any fixed branch only shifts a global phase
    t = np.asarray(t)
    ctype = np.result_type(t.dtype, np.complex128)
    return np.power(np.asarray(1j, dtype=ctype) * t, np.asarray(d, dtype=t.dtype) / 2)


def chirp_factor(t, x, d: int = 1):
    """exp(i|x|^2/4t) / (it)^{d/2}, the kernel shared by f_a and the conformal map."""
    _check_time(t)
    t = np.asarray(t)
    r2 = _radius2(x, d)
    return np.exp(1j * r2 / (4 * t)) / _it_power(t, d)


def eval_fa(p: SelfSimilarParams, t, x):
    """Free solution a e^{i|x|^2/4t}/(it)^{d/2} emanating from a delta at the origin."""
    return p.a * chirp_factor(t, x, p.d)


def eval_phase_A(p: SelfSimilarParams, t):
    _check_time(t)
    t = np.asarray(t)
    amp = abs(p.a)
    if p.is_critical:
        return amp ** (2.0 / p.d) * np.log(t)
    kappa = 1.0 - p.alpha * p.d / 2.0
    return amp**p.alpha * t**kappa / kappa


def eval_phase_rate(p: SelfSimilarParams, t):
    """d/dt of eval_phase_A, i.e. |a|^alpha t^{-alpha d/2}."""
    _check_time(t)
    return abs(p.a) ** p.alpha * np.asarray(t) ** (-p.alpha * p.d / 2.0)


def eval_u_selfsim(p: SelfSimilarParams, t, x):
    return eval_fa(p, t, x) * np.exp(1j * p.sign * eval_phase_A(p, t))


def selfsim_field(p: SelfSimilarParams) -> FieldFn:
    return lambda t, x: eval_u_selfsim(p, t, x)


def galilean_transform(u: FieldFn, boost: GalileanBoost, t, x):
    """e^{-it|nu|^2 + i nu.x} u(t, x - 2 nu t)."""
    nu = np.asarray(boost.nu)
    x = np.asarray(x)
    if nu.size == 1:
        nu = nu[0]
        shifted = x - 2 * nu * t
        phase = -t * nu * nu + nu * x
    else:
        shifted = x - 2 * nu * np.asarray(t)[..., None]
        phase = -t * np.dot(nu, nu) + x @ nu
    return np.exp(1j * phase) * u(t, shifted)


def conformal_transform(f: FieldFn, d: int, t, x):
    """(Tf)(t,x) = e^{i|x|^2/4t}/(it)^{d/2} f(1/t, x/t)."""
    _check_time(t)
    t = np.asarray(t)
    x = np.asarray(x)
    scaled = x / (t[..., None] if d > 1 and t.ndim else t)
    return chirp_factor(t, x, d) * f(1 / t, scaled)


def reconstruct_u(eps: FieldState, p: SelfSimilarParams, t: float, x, time_rtol: float = 1e-9):
    """Physical solution from the conformal-frame perturbation sampled at s = 1/t.

    u(t,x) = u_selfsim(t,x) + e^{i x^2/4t}/(it)^{1/2} e^{+-iA(t)} eps(1/t, x/t),
    with eps interpolated band-limitedly between grid nodes.
    """
    if p.d != 1:
        raise ValueError("reconstruction is only available for d = 1")
    _check_time(t)
    if abs(eps.time * t - 1.0) > time_rtol:
        raise ValueError(f"eps is sampled at s = {eps.time}, expected 1/t = {1 / t}")
    x = np.asarray(x, dtype=float)
    y = x / t
    L = eps.grid.half_width
    if np.any(y < -L) or np.any(y > L):
        raise ValueError("x/t falls outside the sampled conformal grid")
    phase = np.exp(1j * p.sign * eval_phase_A(p, t))
    return eval_u_selfsim(p, t, x) + chirp_factor(t, x, 1) * phase * eps.interpolate(y)


def nls_residual(u: FieldFn, p: SelfSimilarParams, t, x, h: float, scaled: bool = True,
                 nonlinear: bool = True):
    """Centered-difference residual of i u_t + u_xx +- |u|^alpha u (d = 1).

    With ``scaled`` the time and space steps are h divided by the local
    oscillation rate of the self-similar solution at (t, x), so that h acts as
    a dimensionless step. Returns (residual, magnitude) where magnitude is the
    sum of the moduli of the three terms, for relative comparisons.
    """
    t = np.asarray(t)
    x = np.asarray(x)
    if scaled:
        rate_t = x * x / (4 * t * t) + abs(p.a) ** p.alpha * t ** (-p.alpha / 2) + 1 / (2 * t)
        rate_x = np.abs(x) / (2 * t) + 1 / np.sqrt(t)
        ht = h / rate_t
        hx = h / rate_x
    else:
        ht = hx = h
    u0 = u(t, x)
    ut = (u(t + ht, x) - u(t - ht, x)) / (2 * ht)
    uxx = (u(t, x + hx) - 2 * u0 + u(t, x - hx)) / (hx * hx)
    nonlin = p.sign * np.abs(u0) ** p.alpha * u0 if nonlinear else np.zeros_like(u0)
    res = 1j * ut + uxx + nonlin
    mag = np.abs(ut) + np.abs(uxx) + np.abs(nonlin)
    return res, mag
