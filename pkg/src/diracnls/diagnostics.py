"""Discrete functionals, conservation-law monitors and a-priori bound checks.

Integrals use the uniform rectangle rule (spectrally accurate for smooth
periodic integrands); x-derivatives are spectral. Time integrals of law
right-hand sides are accumulated by the integrator with the trapezoid rule
at every step, so the residuals here are clean O(dt^2) probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .equations import CONFORMAL_FAMILIES, EquationSpec, Family, nonlinear_gap, potential_density
from .grid import FieldState, SpatialGrid

CSV_HEADER = (
    "step", "t", "mass", "grad_l2", "potential_l2", "energy", "cum_dissipation",
    "energy_residual", "mass_residual", "boundary_contamination",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    mass: float
    grad: float
    potential: float
    energy: float
    cum_dissipation: float
    energy_residual: float
    mass_residual: float
    boundary_contamination: float
    cum_mass_flux: float = 0.0
    blowup: bool = False

    def csv_row(self) -> list:
        return [self.step, self.t, self.mass, self.grad, self.potential, self.energy,
                self.cum_dissipation, self.energy_residual, self.mass_residual,
                self.boundary_contamination]


@dataclass(frozen=True)
class GeometricEnergyRecord:
    t: float
    value: float
    shape_term: float
    density_term: float


@dataclass
class CheckReport:
    """Outcome of a monitor: per-check pass flags, margins and offending records."""

    passed: bool = True
    checks: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def add(self, name: str, margins: np.ndarray, times: np.ndarray, tol: float = 0.0):
        margins = np.asarray(margins, dtype=float)
        ok = bool(np.all(margins >= -tol))
        self.checks[name] = ok
        self.margins[name] = margins
        if not ok:
            k = int(np.argmin(margins))
            self.violations.append((name, float(times[k]), float(margins[k])))
        self.passed = self.passed and ok
        return ok


# --- functionals -----------------------------------------------------------

def mass(state: FieldState) -> float:
    return state.grid.integrate(np.abs(state.values) ** 2)


def spectral_mass(state: FieldState) -> float:
    coeffs = np.fft.fft(state.values)
    return float(np.sum(np.abs(coeffs) ** 2) * state.grid.dx / state.grid.n)


def grad_norm2(state: FieldState) -> float:
    return state.grid.gradient_norm2(state.values)


def _total(state: FieldState, spec: EquationSpec, t: float):
    bg = spec.background(t, state.grid.x)
    return state.values + bg, bg


def potential_l2(state: FieldState, spec: EquationSpec, t: float | None = None) -> float:
    """int (|psi + bg|^2 - |bg|^2)^2."""
    t = state.time if t is None else t
    w, bg = _total(state, spec, t)
    return state.grid.integrate((np.abs(w) ** 2 - np.abs(bg) ** 2) ** 2)


def potential_energy(state: FieldState, spec: EquationSpec, t: float | None = None) -> float:
    t = state.time if t is None else t
    w, bg = _total(state, spec, t)
    return state.grid.integrate(potential_density(spec, w, bg))


def energy(state: FieldState, spec: EquationSpec, t: float | None = None) -> float:
    """E = 1/2 int|psi_x|^2 - sign * C(t) * int Q for any family."""
    t = state.time if t is None else t
    if not spec.nonlinear:
        return 0.5 * grad_norm2(state)
    return 0.5 * grad_norm2(state) - spec.sign * spec.coefficient(t) * potential_energy(state, spec, t)


def energy_conformal(state: FieldState, spec: EquationSpec, t: float | None = None) -> float:
    """E(t) = 1/2 int|eps_x|^2 -+ (1/4t) int(|eps + a|^2 - |a|^2)^2 in the conformal frame."""
    if spec.family not in CONFORMAL_FAMILIES:
        raise ValueError(f"energy_conformal needs a conformal family, got {spec.family.value}")
    t = state.time if t is None else t
    if t <= 0:
        raise ValueError("t must be > 0")
    if spec.family is Family.CRITICAL_CONFORMAL:
        return 0.5 * grad_norm2(state) - spec.sign * potential_l2(state, spec, t) / (4 * t)
    return energy(state, spec, t)


def dissipation_rate(state: FieldState, spec: EquationSpec, t: float) -> float:
    """-dE/dt = sign * C'(t) * int Q; equals P/(4t^2) for the defocusing critical case."""
    if not spec.nonlinear or not spec.constant_background:
        return 0.0
    rate = spec.coefficient_rate(t)
    if rate == 0.0:
        return 0.0
    return spec.sign * rate * potential_energy(state, spec, t)


def mass_flux_rate(state: FieldState, spec: EquationSpec, t: float) -> float:
    """Right side of d/dt (1/2 ||psi||^2) = -sigma*sign*C(t) int gap * Im(bg conj(psi))."""
    if not spec.nonlinear:
        return 0.0
    w, bg = _total(state, spec, t)
    gap = nonlinear_gap(spec, w, bg)
    density = gap * np.imag(bg * np.conj(state.values))
    return -spec.sigma * spec.sign * spec.coefficient(t) * state.grid.integrate(density)


def boundary_contamination(state: FieldState, fraction: float = 0.1) -> float:
    """Largest |psi| within `fraction` of either end of the periodic box."""
    return float(np.max(np.abs(state.values[state.grid.edge_mask(fraction)])))


def make_record(state: FieldState, spec: EquationSpec, step: int, cum_dissipation: float,
                cum_mass_flux: float, energy0: float | None, mass0: float | None) -> DiagnosticsRecord:
    t = state.time
    m = mass(state)
    g = grad_norm2(state)
    pot = potential_l2(state, spec, t) if spec.nonlinear else 0.0
    e = energy(state, spec, t)
    e0 = e if energy0 is None else energy0
    m0 = m if mass0 is None else mass0
    blowup = not (math.isfinite(m) and math.isfinite(e))
    return DiagnosticsRecord(
        step=step, t=t, mass=m, grad=g, potential=pot, energy=e,
        cum_dissipation=cum_dissipation,
        energy_residual=e + cum_dissipation - e0,
        mass_residual=0.5 * (m - m0) - cum_mass_flux,
        boundary_contamination=boundary_contamination(state),
        cum_mass_flux=cum_mass_flux, blowup=blowup,
    )


# --- law residuals -------------------------------------------------------------

def _records(traj):
    return list(traj.records)


def energy_law_residual(traj) -> np.ndarray:
    """Per-interval mismatch [E + D]_{k+1} - [E + D]_k of the energy law."""
    recs = _records(traj)
    if len(recs) < 2:
        raise ValueError("need at least two records")
    budget = np.array([r.energy + r.cum_dissipation for r in recs])
    return np.diff(budget)


def mass_law_residual(traj, spec: EquationSpec | None = None) -> np.ndarray:
    """Per-interval mismatch of d/dt (1/2||psi||^2) against the accumulated law flux."""
    recs = _records(traj)
    if len(recs) < 2:
        raise ValueError("need at least two records")
    half_mass = 0.5 * np.array([r.mass for r in recs])
    flux = np.array([r.cum_mass_flux for r in recs])
    return np.diff(half_mass) - np.diff(flux)


def mass_law_rhs(state: FieldState, spec: EquationSpec, t: float | None = None) -> float:
    return mass_flux_rate(state, spec, state.time if t is None else t)


# --- a-priori bounds -------------------------------------------------------------

def check_apriori_bounds(traj, spec: EquationSpec, rtol: float = 1e-9) -> CheckReport:
    """Gradient, potential and mass-growth bounds of the defocusing conformal problem.

    Energies are recomputed from the recorded grad/potential columns using the
    defocusing sign of ``spec``, so a trajectory produced with a corrupted
    nonlinearity is judged against the intended law.
    """
    if spec.family not in CONFORMAL_FAMILIES or spec.sign != -1:
        raise ValueError("a-priori bounds apply to defocusing conformal families")
    recs = _records(traj)
    t = np.array([r.t for r in recs])
    grad = np.array([r.grad for r in recs])
    report = CheckReport()
    if spec.family is Family.CRITICAL_CONFORMAL:
        pot = np.array([r.potential for r in recs])
        energy_t = 0.5 * grad + pot / (4 * t)
    else:
        energy_t = np.array([r.energy for r in recs])
    e0 = energy_t[0]
    scale = rtol * max(abs(e0), 1e-300)
    report.add("grad", 2 * e0 - grad, t, tol=scale)
    if spec.family is Family.CRITICAL_CONFORMAL:
        report.add("pot", 4 * t * e0 - pot, t, tol=scale * t.max())
        norm = np.sqrt([r.mass for r in recs])
        a = abs(spec.params.a)
        envelope = norm[0] + 4 * a * math.sqrt(max(e0, 0.0)) * (np.sqrt(t) - np.sqrt(t[0]))
        report.add("mass", envelope - norm, t, tol=rtol * max(norm[0], 1e-300))
        diss = np.array([r.cum_dissipation for r in recs])
        # left side of the dissipation bound is 4x the accumulated P/(4t^2)
        report.add("dissipation", 4 * e0 - 4 * diss, t, tol=4 * scale)
    return report


def running_min_potential_ratio(traj) -> np.ndarray:
    """Running minimum of (1/t) int(|v|^2 - |a|^2)^2 along the records."""
    recs = _records(traj)
    vals = np.array([r.potential / r.t for r in recs])
    return np.minimum.accumulate(vals)


def gp_monitor(traj, energy_tol: float = 1e-6) -> CheckReport:
    """Energy flatness and the affine mass envelope ||u(t)|| <= 2 sqrt(E0) t + ||u0||."""
    recs = _records(traj)
    t = np.array([r.t for r in recs])
    e = np.array([r.energy for r in recs])
    norm = np.sqrt([r.mass for r in recs])
    report = CheckReport()
    report.add("energy_drift", energy_tol - np.abs(e - e[0]), t)
    envelope = 2 * math.sqrt(max(e[0], 0.0)) * (t - t[0]) + norm[0]
    report.add("mass_envelope", envelope - norm, t, tol=1e-12 * max(norm[0], 1.0))
    return report


# --- geometric energy ----------------------------------------------------------

def geometric_energy(c: np.ndarray, tau: np.ndarray, t: float, c0: float,
                     grid: SpatialGrid | np.ndarray) -> GeometricEnergyRecord:
    """Renormalised filament energy written with curvature and torsion.

    ``grid`` is a periodic SpatialGrid (spectral c_x) or a uniform node array
    (second-order finite-difference c_x).
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    c = np.asarray(c, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if c.shape != tau.shape:
        raise ValueError("c and tau must share a grid")
    if isinstance(grid, SpatialGrid):
        x = grid.x
        dx = grid.dx
        cx = np.real(grid.derivative(c))
    else:
        x = np.asarray(grid, dtype=float)
        dx = x[1] - x[0]
        cx = np.gradient(c, dx, edge_order=2)
    shape = t**2 / (4 * math.sqrt(2)) * float(np.sum(cx**2 + c**2 * (x / (2 * t) - tau) ** 2) * dx)
    dens = 1 / (16 * math.sqrt(2)) * float(np.sum((t * c**2 - c0**2) ** 2) * dx)
    return GeometricEnergyRecord(t=t, value=shape + dens, shape_term=shape, density_term=dens)


# --- technical inequality --------------------------------------------------------

def _power_gap(z: np.ndarray, r) -> np.ndarray:
    """| |1+z|^r - 1 | without cancellation for small z."""
    mod = np.abs(1 + z)
    # |1+z| - 1 = (2 Re z + |z|^2) / (|1+z| + 1)
    d = (2 * np.real(z) + np.abs(z) ** 2) / (mod + 1)
    with np.errstate(divide="ignore"):
        out = np.abs(np.expm1(r * np.log1p(d)))
    return np.where(mod == 0, 1.0, out) * (np.asarray(r) > 0)


def lemma_bound_ratio(x, y, r) -> np.ndarray:
    """||x+y|^r - |y|^r| / (|y|^{r-1}|x| + |x|^r), evaluated in scale-free form."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if np.any(y == 0):
        raise ValueError("y must be nonzero")
    z = x / y
    az = np.abs(z)
    num = _power_gap(z, r)
    den = az + az**r
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(num == 0, 0.0, num / den)


def lemma_restricted_ratio(x, y, r) -> np.ndarray:
    """||x+y|^r - |y|^r| / (|y|^{r-1}|x|), the sharper form valid when r <= 1 or |x| <= |y|/4."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if np.any(y == 0):
        raise ValueError("y must be nonzero")
    z = x / y
    num = _power_gap(z, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(num == 0, 0.0, num / np.abs(z))
