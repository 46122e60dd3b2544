"""Strang split-step Fourier integrator on the periodic interval [-L, L).

The linear substep is the exact spectral propagator of sigma*i psi_t + psi_xx = 0.
The nonlinear substep is solved exactly pointwise: it preserves |psi + bg| and
rotates psi + bg by a phase built from the exact integral of the time
coefficient over the substep.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .diagnostics import DiagnosticsRecord
from .equations import CONFORMAL_FAMILIES, EquationSpec, Family, nonlinear_gap
from .grid import FieldState, SpatialGrid

logger = logging.getLogger(__name__)


class StepRule(str, enum.Enum):
    LOG = "log"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class TimeMesh:
    """Time nodes uniform in log t (conformal families) or in t.

    ``extra_times`` are merged into the node set so that snapshots can be taken
    at exactly those times; a node closer than 1e-9 (relative) is snapped.
    """

    t_start: float
    t_end: float
    steps: int
    rule: StepRule = StepRule.LOG
    extra_times: tuple = ()

    def __post_init__(self):
        rule = StepRule(self.rule)
        object.__setattr__(self, "rule", rule)
        object.__setattr__(self, "extra_times", tuple(float(t) for t in self.extra_times))
        if not self.t_start < self.t_end:
            raise ValueError("t_start must be < t_end")
        if rule is StepRule.LOG and self.t_start <= 0:
            raise ValueError("log-time mesh needs t_start > 0")
        if self.t_start < 0:
            raise ValueError("t_start must be >= 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        for t in self.extra_times:
            if not self.t_start <= t <= self.t_end:
                raise ValueError(f"extra time {t} outside [{self.t_start}, {self.t_end}]")

    @classmethod
    def for_spec(cls, spec: EquationSpec, t_start, t_end, steps, extra_times=()):
        rule = StepRule.LOG if spec.family in CONFORMAL_FAMILIES else StepRule.UNIFORM
        return cls(t_start, t_end, steps, rule, tuple(extra_times))

    def nodes(self) -> np.ndarray:
        if self.steps == 0:
            nodes = np.array([self.t_start])
        elif self.rule is StepRule.LOG:
            nodes = np.exp(np.linspace(math.log(self.t_start), math.log(self.t_end), self.steps + 1))
        else:
            nodes = np.linspace(self.t_start, self.t_end, self.steps + 1)
        if self.steps:
            nodes[0], nodes[-1] = self.t_start, self.t_end
        for t in self.extra_times:
            k = int(np.argmin(np.abs(nodes - t)))
            if abs(nodes[k] - t) <= 1e-9 * max(abs(t), 1.0):
                nodes[k] = t
            else:
                nodes = np.sort(np.append(nodes, t))
        return nodes


@dataclass(frozen=True)
class TrajectoryEntry:
    time: float
    state: FieldState | None
    record: DiagnosticsRecord


@dataclass
class Trajectory:
    spec: EquationSpec
    mesh: TimeMesh
    entries: list = field(default_factory=list)
    blowup: bool = False

    @property
    def records(self) -> list:
        return [e.record for e in self.entries]

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.entries])

    def snapshots(self) -> list:
        return [e.state for e in self.entries if e.state is not None]

    def state_at(self, t: float, rtol: float = 1e-12) -> FieldState:
        for e in self.entries:
            if e.state is not None and abs(e.time - t) <= rtol * max(abs(t), 1.0):
                return e.state
        raise KeyError(f"no snapshot stored at t = {t}")

    @property
    def final(self) -> TrajectoryEntry:
        return self.entries[-1]


# --- substeps --------------------------------------------------------------------

def free_flow(state: FieldState, sigma: int, dt: float) -> FieldState:
    """Exact solution of sigma*i psi_t + psi_xx = 0 over dt (negative dt allowed)."""
    if dt == 0:
        return state
    grid = state.grid
    mult = np.exp(-1j * sigma * dt * grid.xi2)
    return state.with_values(np.fft.ifft(mult * np.fft.fft(state.values)), state.time + dt)


def _phase_substep(values: np.ndarray, spec: EquationSpec, grid: SpatialGrid, t: float, dt: float):
    if not spec.nonlinear:
        return values
    if spec.family is Family.DIRECT_PERTURBATION:
        # background advances with the linear flow, so it is frozen at the substep midpoint
        bg = spec.background(t + 0.5 * dt, grid.x)
        weight = dt
    else:
        bg = spec.background(t, grid.x)
        weight = spec.coefficient_integral(t, dt)
    if not math.isfinite(weight):
        raise ValueError(f"time coefficient is not integrable over [{t}, {t + dt}]")
    w = values + bg
    theta = (spec.sigma * spec.sign * weight) * nonlinear_gap(spec, w, bg)
    if not np.all(np.isfinite(theta)):
        raise ValueError("non-finite nonlinear phase")
    return w * np.exp(1j * theta) - bg


def nonlinear_phase_step(state: FieldState, spec: EquationSpec, t: float, dt: float) -> FieldState:
    """Exact flow of the nonlinearity alone from t to t + dt (state time is left unchanged)."""
    if spec.family is Family.DIRECT_PERTURBATION and t <= 0:
        raise ValueError("direct_perturbation needs t > 0")
    return state.with_values(_phase_substep(state.values, spec, state.grid, t, dt))


def strang_step(state: FieldState, spec: EquationSpec, t: float, dt: float) -> FieldState:
    half = free_flow(state, spec.sigma, 0.5 * dt)
    mid = nonlinear_phase_step(half, spec, t, dt)
    out = free_flow(mid, spec.sigma, 0.5 * dt)
    return out.with_values(out.values, t + dt)


# --- driver ------------------------------------------------------------------------

def _geometric_pick(times: np.ndarray, count: int) -> set:
    if count <= 0 or times.size == 0:
        return set()
    if times.size <= count:
        return set(range(times.size))
    offset = times - times[0]
    span = offset[-1]
    targets = span * np.geomspace(1e-3, 1.0, count - 1) if span > 0 else np.zeros(count - 1)
    picks = {0, times.size - 1}
    for target in targets:
        picks.add(int(np.argmin(np.abs(offset - target))))
    return picks


def integrate(spec: EquationSpec, initial: FieldState, mesh: TimeMesh, record_every: int = 1,
              snapshot_times=(), max_snapshots: int = 64) -> Trajectory:
    """Advance ``initial`` over the mesh with Strang steps.

    Diagnostics are recorded every ``record_every`` steps (and at the last
    step and every snapshot time). The dissipation and mass-flux integrals are
    accumulated with the trapezoid rule at every step. Snapshots are stored at
    ``snapshot_times`` (which must be mesh nodes) plus up to ``max_snapshots``
    geometrically spaced records.
    """
    if abs(initial.time - mesh.t_start) > 1e-12 * max(1.0, abs(mesh.t_start)):
        raise ValueError("initial.time must equal mesh.t_start")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    nodes = mesh.nodes()
    snap_idx = set()
    for ts in snapshot_times:
        k = int(np.argmin(np.abs(nodes - ts)))
        if abs(nodes[k] - ts) > 1e-9 * max(abs(ts), 1.0):
            raise ValueError(f"snapshot time {ts} is not a mesh node")
        snap_idx.add(k)
    last = nodes.size - 1
    record_idx = set(range(0, last + 1, record_every)) | {last} | snap_idx
    record_sorted = np.array(sorted(record_idx))
    snap_idx |= {int(record_sorted[i]) for i in _geometric_pick(nodes[record_sorted], max_snapshots)}

    traj = Trajectory(spec=spec, mesh=mesh)
    state = initial.with_values(initial.values, float(nodes[0]))
    cum_diss = 0.0
    cum_flux = 0.0
    rate_d = diagnostics.dissipation_rate(state, spec, state.time)
    rate_m = diagnostics.mass_flux_rate(state, spec, state.time)
    rec0 = diagnostics.make_record(state, spec, 0, 0.0, 0.0, None, None)
    e0, m0 = rec0.energy, rec0.mass
    traj.entries.append(TrajectoryEntry(state.time, state if 0 in snap_idx else None, rec0))
    for k in range(last):
        t, t_next = float(nodes[k]), float(nodes[k + 1])
        state = strang_step(state, spec, t, t_next - t)
        state = state.with_values(state.values, t_next)
        new_d = diagnostics.dissipation_rate(state, spec, t_next)
        new_m = diagnostics.mass_flux_rate(state, spec, t_next)
        cum_diss += 0.5 * (rate_d + new_d) * (t_next - t)
        cum_flux += 0.5 * (rate_m + new_m) * (t_next - t)
        rate_d, rate_m = new_d, new_m
        if k + 1 in record_idx or not (math.isfinite(cum_diss) and math.isfinite(cum_flux)):
            rec = diagnostics.make_record(state, spec, k + 1, cum_diss, cum_flux, e0, m0)
            keep = state if (k + 1) in snap_idx else None
            traj.entries.append(TrajectoryEntry(t_next, keep, rec))
            if rec.blowup:
                logger.warning("non-finite diagnostics at t=%g, aborting", t_next)
                traj.blowup = True
                break
    return traj


# --- reference solution --------------------------------------------------------------

def plane_wave_reference(grid: SpatialGrid, k: float, amp: complex, sign: int, sigma: int = 1):
    """Exact plane wave A e^{i(kx - omega t)} of sigma*i u_t + u_xx + sign |u|^2 u = 0.

    omega = sigma * (k^2 - sign |A|^2); for sigma = +1 this is k^2 -+ |A|^2.
    """
    if not grid.is_grid_frequency(k):
        raise ValueError(f"k = {k} is not a frequency of the grid")
    omega = sigma * (k * k - sign * abs(amp) ** 2)

    def field(t, x):
        return amp * np.exp(1j * (k * np.asarray(x) - omega * np.asarray(t)))

    field.omega = omega
    return field
