"""Curvature/torsion profiles, the Hasimoto map and Frenet reconstruction of curves.

Curves live in R^3 with either the Euclidean dot product or the Minkowski
pseudo-metric <u, v> = u1 v1 + u2 v2 - u3 v3. The twisted cross product is
u ^ v = diag(1, 1, +-1)(u x v). In the Minkowski case the tangent indicatrix
lies on the hyperboloid H^2 (<T, T> = -1, T3 > 0) and the normal and binormal
are spacelike; the frame satisfies

    T' = c n,   n' = -<T, T> c T + tau b,   b' = -tau n,   b = T ^ n,

which reduces to the usual Frenet-Serret system in the Euclidean case. With
b = T ^ n the binormal-flow velocity chi_x ^ chi_xx equals c b.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class FrameDegeneracy(ValueError):
    """The frame lost its causal type or collapsed during reconstruction."""


class UnderResolvedWarning(UserWarning):
    pass


class MetricSign(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    MINKOWSKI = "minkowski"

    @property
    def s(self) -> int:
        return 1 if self is MetricSign.EUCLIDEAN else -1

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([1.0, 1.0, float(self.s)])

    def inner(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + self.s * u[..., 2] * v[..., 2]

    def wedge(self, u, v) -> np.ndarray:
        w = np.cross(u, v)
        if self.s < 0:
            w[..., 2] = -w[..., 2]
        return w

    @property
    def tangent_type(self) -> int:
        """<T, T> along the indicatrix: +1 on the sphere, -1 on H^2."""
        return self.s


@dataclass(frozen=True)
class CurvatureTorsion:
    x: np.ndarray
    c: np.ndarray
    tau: np.ndarray
    t: float | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        c = np.broadcast_to(np.asarray(self.c, dtype=float), x.shape).copy()
        tau = np.broadcast_to(np.asarray(self.tau, dtype=float), x.shape).copy()
        if x.ndim != 1 or x.size < 2:
            raise ValueError("x must be a 1-D grid with at least 2 nodes")
        if np.any(np.diff(x) <= 0):
            raise ValueError("x must be strictly increasing")
        for arr in (x, c, tau):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "tau", tau)


@dataclass(frozen=True)
class Frame3:
    T: np.ndarray
    n: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("T", "n", "b"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            object.__setattr__(self, name, v)

    def gram(self, metric: MetricSign) -> np.ndarray:
        vecs = (self.T, self.n, self.b)
        return np.array([[metric.inner(u, v) for v in vecs] for u in vecs])

    def orthonormality_defect(self, metric: MetricSign) -> float:
        target = np.diag([float(metric.tangent_type), 1.0, 1.0])
        return float(np.max(np.abs(self.gram(metric) - target)))

    @classmethod
    def standard(cls) -> "Frame3":
        """T = e3, n = e1, b = e2; orthonormal (and b = T ^ n) in both signatures."""
        return cls(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))


@dataclass(frozen=True)
class Curve3:
    x: np.ndarray
    points: np.ndarray  # (N, 3)
    T: np.ndarray  # (N, 3) frame vectors per node
    n: np.ndarray
    b: np.ndarray
    metric: MetricSign
    t: float | None = None
    curvature: np.ndarray | None = field(default=None, repr=False)
    torsion: np.ndarray | None = field(default=None, repr=False)

    def frame(self, j: int) -> Frame3:
        return Frame3(self.T[j], self.n[j], self.b[j])

    def frame_defect(self) -> float:
        """Largest deviation of the nodewise Gram matrices from the target signature."""
        m = self.metric
        target = {("T", "T"): m.tangent_type, ("n", "n"): 1.0, ("b", "b"): 1.0}
        worst = 0.0
        for p in ("T", "n", "b"):
            for q in ("T", "n", "b"):
                g = m.inner(getattr(self, p), getattr(self, q))
                worst = max(worst, float(np.max(np.abs(g - target.get((p, q), 0.0)))))
        return worst


# --- profiles and the Hasimoto map ----------------------------------------------------

def _nodes(grid) -> np.ndarray:
    return np.asarray(grid.x if hasattr(grid, "x") else grid, dtype=float)


def self_similar_profile(c0: float, t: float, grid) -> CurvatureTorsion:
    """c = c0/sqrt(t), tau = x/2t on the nodes of ``grid`` (array or SpatialGrid)."""
    if not t > 0:
        raise ValueError("t must be > 0")
    x = _nodes(grid)
    return CurvatureTorsion(x, np.full(x.shape, c0 / math.sqrt(t)), x / (2 * t), float(t))


def cumulative_from_zero(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Trapezoid approximation of int_0^{x_j} f, exact for piecewise-linear f.

    If 0 is not a node, the partial cell containing it uses the linear
    interpolant of f.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    cells = 0.5 * (f[1:] + f[:-1]) * np.diff(x)
    cum = np.concatenate([[0.0], np.cumsum(cells)])
    if x[0] <= 0 <= x[-1]:
        k = int(np.clip(np.searchsorted(x, 0.0, side="right") - 1, 0, x.size - 2))
        w = (0.0 - x[k]) / (x[k + 1] - x[k])
        f0 = (1 - w) * f[k] + w * f[k + 1]
        base = cum[k] + 0.5 * (f[k] + f0) * (0.0 - x[k])
    else:
        # zero lies outside the grid; extend linearly from the nearest end
        k = 0 if x[0] > 0 else x.size - 2
        slope = (f[k + 1] - f[k]) / (x[k + 1] - x[k])
        edge = x[0] if x[0] > 0 else x[-1]
        fe = f[0] if x[0] > 0 else f[-1]
        f0 = fe - slope * edge
        base = (cum[0] if x[0] > 0 else cum[-1]) - 0.5 * (fe + f0) * edge
    return cum - base


def hasimoto(ct: CurvatureTorsion) -> np.ndarray:
    """Psi = c exp(i int_0^x tau), phase measured from x = 0."""
    return ct.c * np.exp(1j * cumulative_from_zero(ct.x, ct.tau))


# --- Frenet reconstruction ------------------------------------------------------------

def _cubic_midpoints(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Values of f at cell midpoints by 4-point Lagrange interpolation (one-sided at the ends)."""
    n = x.size
    if n < 4:
        return 0.5 * (f[1:] + f[:-1])
    xm = 0.5 * (x[1:] + x[:-1])
    start = np.clip(np.arange(n - 1) - 1, 0, n - 4)
    idx = start[:, None] + np.arange(4)[None, :]
    xs = x[idx]
    fs = f[idx]
    out = np.zeros(n - 1)
    for i in range(4):
        w = np.ones(n - 1)
        for j in range(4):
            if j != i:
                w *= (xm - xs[:, j]) / (xs[:, i] - xs[:, j])
        out += w * fs[:, i]
    return out


def _frenet_rhs(state: np.ndarray, c: float, tau: float, eta: float) -> np.ndarray:
    T, n, b = state[3:6], state[6:9], state[9:12]
    out = np.empty(12)
    out[0:3] = T
    out[3:6] = c * n
    out[6:9] = -eta * c * T + tau * b
    out[9:12] = -tau * n
    return out


def _renormalize(state: np.ndarray, metric: MetricSign) -> np.ndarray:
    eta = metric.tangent_type
    T, n = state[3:6], state[6:9]
    nt = metric.inner(T, T)
    if eta * nt <= 1e-8 or (eta < 0 and T[2] <= 0):
        raise FrameDegeneracy(f"tangent left the indicatrix (<T,T> = {nt:.3e})")
    T = T / math.sqrt(eta * nt)
    n = n - eta * metric.inner(n, T) * T
    nn = metric.inner(n, n)
    if nn <= 1e-8:
        raise FrameDegeneracy(f"normal collapsed (<n,n> = {nn:.3e})")
    n = n / math.sqrt(nn)
    out = state.copy()
    out[3:6], out[6:9], out[9:12] = T, n, metric.wedge(T, n)
    return out


def _rk4_sweep(state0, xs, cs, cm, taus, tm, metric):
    """Integrate along the node sequence xs (monotone either way); returns states per node."""
    eta = metric.tangent_type
    out = np.empty((xs.size, 12))
    out[0] = state0
    y = state0
    for k in range(xs.size - 1):
        h = xs[k + 1] - xs[k]
        k1 = _frenet_rhs(y, cs[k], taus[k], eta)
        k2 = _frenet_rhs(y + 0.5 * h * k1, cm[k], tm[k], eta)
        k3 = _frenet_rhs(y + 0.5 * h * k2, cm[k], tm[k], eta)
        k4 = _frenet_rhs(y + h * k3, cs[k + 1], taus[k + 1], eta)
        y = _renormalize(y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4), metric)
        out[k + 1] = y
    return out


def reconstruct_curve(ct: CurvatureTorsion, metric: MetricSign = MetricSign.EUCLIDEAN,
                      seed: Frame3 | None = None, origin=(0.0, 0.0, 0.0),
                      frame_tol: float = 1e-10) -> Curve3:
    """Integrate the Frenet system from the node nearest x = 0 outward.

    Classical RK4 with curvature and torsion at cell midpoints taken from the
    cubic interpolant of the samples; after each step the frame is
    re-orthonormalized in the active metric (Gram-Schmidt, then b = T ^ n).
    The seed frame and ``origin`` are attached to that starting node.
    """
    metric = MetricSign(metric)
    seed = Frame3.standard() if seed is None else seed
    if seed.orthonormality_defect(metric) > frame_tol:
        raise FrameDegeneracy("seed frame is not orthonormal in the chosen metric")
    if metric is MetricSign.EUCLIDEAN and np.any(ct.c < 0):
        raise ValueError("euclidean curvature must be >= 0")
    x, c, tau = ct.x, ct.c, ct.tau
    cm = _cubic_midpoints(x, c)
    tm = _cubic_midpoints(x, tau)
    j0 = int(np.argmin(np.abs(x)))
    state0 = np.concatenate([np.asarray(origin, dtype=float), seed.T, seed.n, seed.b])
    fwd = _rk4_sweep(state0, x[j0:], c[j0:], cm[j0:], tau[j0:], tm[j0:], metric)
    back = _rk4_sweep(state0, x[j0::-1], c[j0::-1], cm[:j0][::-1], tau[j0::-1], tm[:j0][::-1], metric)
    states = np.concatenate([back[::-1], fwd[1:]])
    return Curve3(x=x, points=states[:, 0:3], T=states[:, 3:6], n=states[:, 6:9], b=states[:, 9:12],
                  metric=metric, t=ct.t, curvature=c, torsion=tau)


def sm_invariant(gamma, metric: MetricSign) -> np.ndarray:
    """<A gamma_j, gamma_j> per node."""
    return np.atleast_1d(MetricSign(metric).inner(gamma, gamma))


# --- finite differences on uniform nodes ------------------------------------------------

_D1_INNER = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12
_D2_INNER = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12
_D1_EDGE = (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12,
            np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12)
_D2_EDGE = (np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12,
            np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12)


def _fd(f: np.ndarray, h: float, order: int) -> np.ndarray:
    """4th-order first or second derivative along axis 0, one-sided near the ends."""
    n = f.shape[0]
    if n < 6:
        raise ValueError("need at least 6 nodes for 4th-order differences")
    inner, edge, scale = (_D1_INNER, _D1_EDGE, h) if order == 1 else (_D2_INNER, _D2_EDGE, h * h)
    out = np.zeros_like(f)
    for k, w in enumerate(inner):
        out[2:-2] += w * f[k:n - 4 + k]
    for j, w in enumerate(edge):
        m = w.size
        out[j] = np.tensordot(w, f[:m], axes=(0, 0))
        # mirrored stencil at the right end; odd derivatives change sign
        mirror = np.tensordot(w, f[::-1][:m], axes=(0, 0))
        out[n - 1 - j] = -mirror if order == 1 else mirror
    return out / scale


def binormal_velocity(curve: Curve3, metric: MetricSign | None = None,
                      strict: bool = False) -> np.ndarray:
    """chi_x ^ chi_xx from 4th-order differences of the points.

    The grid must be uniform. Fewer than 4 nodes per local wavelength
    2 pi / sqrt(c^2 + tau^2) raises UnderResolvedWarning (or an error with
    ``strict``).
    """
    metric = curve.metric if metric is None else MetricSign(metric)
    dx = np.diff(curve.x)
    h = float(dx[0])
    if np.max(np.abs(dx - h)) > 1e-9 * abs(h):
        raise ValueError("binormal_velocity needs a uniform grid")
    if curve.curvature is not None:
        rate = float(np.max(np.hypot(curve.curvature, curve.torsion)))
    else:
        rate = float(np.max(np.linalg.norm(_fd(curve.points, h, 2), axis=1)))
    if h * rate > 2 * math.pi / 4:
        msg = f"under-resolved curve: h * max rate = {h * rate:.3g} > pi/2"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, UnderResolvedWarning, stacklevel=2)
    return metric.wedge(_fd(curve.points, h, 1), _fd(curve.points, h, 2))


# --- corner formation -------------------------------------------------------------------

@dataclass(frozen=True)
class CornerEstimate:
    A1: np.ndarray  # limit tangent as x -> +infinity
    A2: np.ndarray  # limit tangent as x -> -infinity
    angle: float
    spread: float
    converged: bool
    times: np.ndarray
    raw: np.ndarray  # (len(times), 2, 3) corrected end tangents per time


def corner_angle(A1, A2, metric: MetricSign) -> float:
    """Euclidean angle arccos(A1.A2), or the hyperbolic distance arccosh(-<A1,A2>) on H^2."""
    metric = MetricSign(metric)
    g = float(metric.inner(A1, A2))
    if metric is MetricSign.EUCLIDEAN:
        return math.acos(max(-1.0, min(1.0, g)))
    return math.acosh(max(1.0, -g))


def _project(v: np.ndarray, metric: MetricSign) -> np.ndarray:
    """Normalize onto the unit sphere or H^2."""
    return v / math.sqrt(abs(float(metric.inner(v, v))))


def limit_tangent(curve: Curve3, j: int) -> np.ndarray:
    """Estimate of lim T at the end of the curve containing node j.

    Integrating T' = c n by parts twice (n = -b'/tau, b = (n' + eta c T)/tau)
    gives lim T = T + (c/tau) b - ((c/tau)'/tau) n up to a multiple of the
    limit itself, which the projection back onto the indicatrix absorbs. The
    remaining error decays like (c/tau)^4 for the self-similar profile.
    """
    c, tau = curve.curvature, curve.torsion
    if tau[j] == 0:
        return curve.T[j].copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = c / tau
    slope = np.gradient(ratio, curve.x, edge_order=2)[j]
    v = curve.T[j] + ratio[j] * curve.b[j] - (slope / tau[j]) * curve.n[j]
    return _project(v, curve.metric)


def _richardson(raw: np.ndarray, roots: np.ndarray, order: float) -> np.ndarray:
    """Eliminate a (sqrt t)^order error term between consecutive times."""
    p0 = roots[:-1, None, None] ** order
    p1 = roots[1:, None, None] ** order
    return (p0 * raw[1:] - p1 * raw[:-1]) / (p0 - p1)


def corner_tangents(c0: float, metric: MetricSign = MetricSign.EUCLIDEAN,
                    t_sequence=(4e-3, 2e-3, 1e-3), half_width: float = 1.0, h: float = 5e-3,
                    seed: Frame3 | None = None, order: float = 4.0, tol: float = 1e-3) -> CornerEstimate:
    """Limits A1, A2 of the end tangents of the self-similar curves as t -> 0.

    The curve of the profile c = c0/sqrt(t), tau = x/2t on [-X, X] is
    sqrt(t) G(x/sqrt(t)) with G the curve of the t = 1 profile, and its frame
    at x is the frame of G at y = x/sqrt(t). So G is reconstructed once, with
    step h in y and nodes at every y = +-X/sqrt(t), and the end frames at each t
    are read off there. Corrected end tangents (``limit_tangent``) are then
    Richardson-extrapolated in sqrt(t) with the given ``order`` of the
    leading error; the spread of the extrapolants measures convergence.
    """
    metric = MetricSign(metric)
    times = np.asarray(t_sequence, dtype=float)
    if times.size < 2 or np.any(times <= 0) or np.any(np.diff(times) >= 0):
        raise ValueError("t_sequence must hold at least 2 decreasing positive times")
    ends = half_width / np.sqrt(times)
    Y = float(ends[-1])
    nodes = np.arange(-Y, Y + 0.5 * h, h)
    nodes = nodes[np.abs(nodes) < Y - 0.25 * h]
    keep = np.ones(nodes.size, dtype=bool)
    for e in ends:
        keep &= np.abs(np.abs(nodes) - e) > 0.25 * h
    y = np.unique(np.concatenate([nodes[keep], ends, -ends]))
    curve = reconstruct_curve(self_similar_profile(c0, 1.0, y), metric, seed)
    raw = np.empty((times.size, 2, 3))
    for i, e in enumerate(ends):
        raw[i, 0] = limit_tangent(curve, int(np.argmin(np.abs(y - e))))
        raw[i, 1] = limit_tangent(curve, int(np.argmin(np.abs(y + e))))
    extrap = _richardson(raw, np.sqrt(times), order)
    est = extrap[-1]
    if extrap.shape[0] > 1:
        spread = float(np.max(np.abs(extrap - est)))
    else:
        spread = float(np.max(np.abs(raw[-1] - raw[-2])))
    A1, A2 = _project(est[0], metric), _project(est[1], metric)
    converged = spread <= tol
    if not converged:
        logger.warning("corner extrapolation spread %.3g exceeds %.3g", spread, tol)
    return CornerEstimate(A1, A2, corner_angle(A1, A2, metric), spread, converged, times, raw)


def write_curve(curve: Curve3, path) -> None:
    """Plain-text three-column point list."""
    header = f"x y z  (metric={curve.metric.value}, t={curve.t})"
    np.savetxt(path, curve.points, fmt="%.17g", header=header)
