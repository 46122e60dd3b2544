"""Equation families handled by the split-step solver.

Every family is written in the common form

    sigma * i psi_t + psi_xx + sign * C(t) * (|w|^alpha - |bg|^alpha) w = 0,
    w = psi + bg(t, x),

where bg is the background the perturbation psi lives on and C(t) the
time coefficient of the nonlinearity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .closed_forms import SelfSimilarParams, eval_fa


class Family(str, enum.Enum):
    DIRECT_PERTURBATION = "direct_perturbation"
    CONFORMAL_PERTURBATION = "conformal_perturbation"
    CRITICAL_CONFORMAL = "critical_conformal"
    GROSS_PITAEVSKII = "gross_pitaevskii"
    CONSTANT_CUBIC = "constant_cubic"


_SIGMA = {
    Family.DIRECT_PERTURBATION: 1,
    Family.CONFORMAL_PERTURBATION: -1,
    Family.CRITICAL_CONFORMAL: -1,
    Family.GROSS_PITAEVSKII: 1,
    Family.CONSTANT_CUBIC: 1,
}

CONFORMAL_FAMILIES = (Family.CONFORMAL_PERTURBATION, Family.CRITICAL_CONFORMAL)


@dataclass(frozen=True)
class EquationSpec:
    family: Family
    params: SelfSimilarParams = field(default_factory=SelfSimilarParams)
    t0: float = 1.0
    sigma: int | None = None
    nonlinear: bool = True

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        sigma = _SIGMA[fam] if self.sigma is None else self.sigma
        if sigma != _SIGMA[fam]:
            raise ValueError(f"{fam.value} requires sigma = {_SIGMA[fam]}")
        object.__setattr__(self, "sigma", sigma)
        p = self.params
        if p.d != 1:
            raise ValueError("solver scenarios are one-dimensional (d = 1)")
        if fam is Family.CRITICAL_CONFORMAL and p.alpha != 2:
            raise ValueError("critical_conformal requires alpha = 2")
        if fam is Family.CONFORMAL_PERTURBATION and not p.is_subcritical:
            raise ValueError("conformal_perturbation requires alpha < 2/d")
        if fam is Family.DIRECT_PERTURBATION and not p.is_subcritical:
            raise ValueError("direct_perturbation requires alpha < 2/d")
        if fam is Family.GROSS_PITAEVSKII and (p.alpha != 2 or p.sign != -1 or p.a != 1):
            raise ValueError("gross_pitaevskii is the defocusing cubic equation around background 1")
        if fam in CONFORMAL_FAMILIES and p.a == 0:
            raise ValueError("conformal families need a nonzero background amplitude")

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def sign(self) -> int:
        return self.params.sign

    @property
    def constant_background(self) -> bool:
        return self.family is not Family.DIRECT_PERTURBATION

    def background(self, t: float, x: np.ndarray):
        fam = self.family
        if fam in CONFORMAL_FAMILIES:
            return self.params.a
        if fam is Family.GROSS_PITAEVSKII:
            return 1.0
        if fam is Family.DIRECT_PERTURBATION:
            return eval_fa(self.params, t, x)
        return 0.0

    def coefficient(self, t: float) -> float:
        """C(t) multiplying the nonlinearity."""
        fam = self.family
        if fam is Family.CRITICAL_CONFORMAL:
            return 1.0 / t
        if fam is Family.CONFORMAL_PERTURBATION:
            return t ** (self.alpha / 2 - 2)
        return 1.0

    def coefficient_rate(self, t: float) -> float:
        """dC/dt."""
        fam = self.family
        if fam is Family.CRITICAL_CONFORMAL:
            return -1.0 / t**2
        if fam is Family.CONFORMAL_PERTURBATION:
            return (self.alpha / 2 - 2) * t ** (self.alpha / 2 - 3)
        return 0.0

    def coefficient_integral(self, t: float, dt: float) -> float:
        """Exact integral of C over [t, t + dt]."""
        fam = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if fam is Family.CRITICAL_CONFORMAL:
                return float(np.log1p(dt / t)) if t != 0 else float("inf")
            if fam is Family.CONFORMAL_PERTURBATION:
                beta = self.alpha / 2 - 1
                return float(((t + dt) ** beta - t**beta) / beta)
        return float(dt)


def nonlinear_gap(spec: EquationSpec, w: np.ndarray, bg) -> np.ndarray:
    """|w|^alpha - |bg|^alpha, the factor that vanishes at the background."""
    alpha = spec.alpha
    if alpha == 2:
        return np.abs(w) ** 2 - np.abs(bg) ** 2
    return np.abs(w) ** alpha - np.abs(bg) ** alpha


def potential_density(spec: EquationSpec, w: np.ndarray, bg) -> np.ndarray:
    """Q(|w|^2, |bg|^2) with dQ/d(|w|^2) = (|w|^alpha - |bg|^alpha)/2 and Q(bg) = 0.

    For alpha = 2 this is (|w|^2 - |bg|^2)^2 / 4.
    """
    rho = np.abs(w) ** 2
    big = np.abs(bg) ** 2 * np.ones_like(rho)
    alpha = spec.alpha
    if alpha == 2:
        return 0.25 * (rho - big) ** 2
    p = alpha / 2 + 1
    return 0.5 * ((rho**p - big**p) / p - big ** (p - 1) * (rho - big))
