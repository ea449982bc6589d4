"""Left/right shooting solutions, Wronskians and the characteristic function.

The left solution phi starts from the boundary condition at ``a`` and is
carried across c1 and c2 with the lam-dependent jump maps; the right
solution chi starts from the eigenparameter condition at ``b`` and is carried
backwards.  omega(lam) = gamma^2 * W(phi, chi) on the last segment, and its
zeros are the eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _dopri
from .problem import ValidatedProblem

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
MIN_DENSE = 64
MAX_DENSE = 200_000


class IntegrationError(RuntimeError):
    """The ODE integrator failed (step underflow or non-finite state)."""

    def __init__(self, message: str, lam: float, x: float):
        super().__init__(f"{message} at lam={lam!r}, x={x!r}")
        self.lam = lam
        self.x = x


_STATUS_TEXT = {
    _dopri.STATUS_UNDERFLOW: "step size underflow",
    _dopri.STATUS_NONFINITE: "non-finite state",
    _dopri.STATUS_MAXSTEPS: "step budget exhausted",
}


def _check(status: int, lam: float, x: float) -> None:
    if status != _dopri.STATUS_OK:
        raise IntegrationError(_STATUS_TEXT.get(status, f"status {status}"), lam, x)


@dataclass(frozen=True)
class ShotState:
    u: float
    up: float
    x: float


@dataclass(frozen=True)
class SegmentRecord:
    """Dense output on one segment, abscissae increasing."""

    x: np.ndarray
    u: np.ndarray
    up: np.ndarray

    @property
    def first(self) -> ShotState:
        return ShotState(float(self.u[0]), float(self.up[0]), float(self.x[0]))

    @property
    def last(self) -> ShotState:
        return ShotState(float(self.u[-1]), float(self.up[-1]), float(self.x[-1]))

    def __call__(self, x, derivative: bool = False):
        """Cubic Hermite interpolation; exact at stored abscissae."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.x, x)
        idx_c = np.clip(idx, 0, self.x.size - 1)
        hit = self.x[idx_c] == x
        spline = CubicHermiteSpline(self.x, self.u, self.up)
        if derivative:
            out = spline(x, 1)
            return np.where(hit, self.up[idx_c], out)
        return np.where(hit, self.u[idx_c], spline(x))


@dataclass(frozen=True)
class PiecewiseSolution:
    """phi_lam (side='left') or chi_lam (side='right') on the three segments."""

    lam: float
    side: str
    segments: tuple[SegmentRecord, SegmentRecord, SegmentRecord]

    @property
    def at_a(self) -> ShotState:
        return self.segments[0].first

    @property
    def c1_minus(self) -> ShotState:
        return self.segments[0].last

    @property
    def c1_plus(self) -> ShotState:
        return self.segments[1].first

    @property
    def c2_minus(self) -> ShotState:
        return self.segments[1].last

    @property
    def c2_plus(self) -> ShotState:
        return self.segments[2].first

    @property
    def at_b(self) -> ShotState:
        return self.segments[2].last

    def segment(self, i: int) -> SegmentRecord:
        return self.segments[i - 1]

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(s.u))) for s in self.segments)


def _dense_count(lam: float, length: float, n_dense: Optional[int]) -> int:
    if n_dense is not None:
        return max(int(n_dense), 2)
    # at least 16 points per oscillation wavelength 2*pi/sqrt(lam)
    waves = math.sqrt(max(lam, 0.0)) * length / (2 * math.pi)
    return min(MAX_DENSE, max(MIN_DENSE, int(math.ceil(16 * waves)) + 1))


def _segment_index(problem: ValidatedProblem, x0: float, x1: float) -> int:
    lo, hi = min(x0, x1), max(x0, x1)
    for i, (sa, sb) in enumerate(problem.bounds):
        if sa <= lo and hi <= sb:
            return i
    raise ValueError(f"[{lo}, {hi}] is not inside a single segment")


def integrate_segment(problem: ValidatedProblem, lam: float, start: ShotState, to_x: float,
                      tol: float = DEFAULT_RTOL, *, atol: float = DEFAULT_ATOL,
                      n_dense: Optional[int] = None,
                      extra_points: Optional[Sequence[float]] = None) -> SegmentRecord:
    """Solve -u'' + q u = lam u from ``start`` to ``to_x`` inside one segment.

    Backward integration is allowed. The record holds a uniform grid of at
    least 64 points between the two ends plus ``extra_points``.
    """
    i = _segment_index(problem, start.x, to_x)
    bp, cf = problem.pieces[i]
    lo, hi = min(start.x, to_x), max(start.x, to_x)
    grid = np.linspace(lo, hi, _dense_count(lam, hi - lo, n_dense))
    if extra_points is not None and len(extra_points):
        extra = np.asarray(extra_points, dtype=float)
        grid = np.union1d(grid, extra[(extra >= lo) & (extra <= hi)])
    grid[0], grid[-1] = lo, hi
    forward = to_x >= start.x
    xout = grid if forward else grid[::-1].copy()
    uout = np.empty_like(xout)
    upout = np.empty_like(xout)
    u1, up1, status, xf, _ = _dopri.integrate(bp, cf, float(lam), float(start.x), float(start.u),
                                              float(start.up), float(to_x), tol, atol,
                                              xout, uout, upout)
    _check(status, lam, xf)
    if not forward:
        uout, upout = uout[::-1].copy(), upout[::-1].copy()
    # the end point must be the integrator's final state, not an interpolant
    if forward:
        uout[-1], upout[-1] = u1, up1
    else:
        uout[0], upout[0] = u1, up1
    return SegmentRecord(grid, uout, upout)


def _nodes_for(extra_points, i):
    if extra_points is None:
        return None
    return extra_points[i]


def shoot_left(problem: ValidatedProblem, lam: float, tol: float = DEFAULT_RTOL, *,
               atol: float = DEFAULT_ATOL, n_dense: Optional[int] = None,
               extra_points=None) -> PiecewiseSolution:
    """phi_lam: u(a)=beta2, u'(a)=-beta1, then the left-to-right jump maps.

    ``extra_points`` is an optional triple of abscissa arrays (one per
    segment) added to the dense output, e.g. quadrature nodes.
    """
    p = problem
    lam = float(lam)
    s1 = integrate_segment(p, lam, ShotState(p.beta2, -p.beta1, p.a), p.c1, tol, atol=atol,
                           n_dense=n_dense, extra_points=_nodes_for(extra_points, 0))
    e = s1.last
    start2 = ShotState(e.u / p.delta, (e.up + lam * e.u) / p.delta, p.c1)
    s2 = integrate_segment(p, lam, start2, p.c2, tol, atol=atol, n_dense=n_dense,
                           extra_points=_nodes_for(extra_points, 1))
    e = s2.last
    start3 = ShotState(p.delta / p.gamma * e.u, (p.delta * e.up + lam * e.u) / p.gamma, p.c2)
    s3 = integrate_segment(p, lam, start3, p.b, tol, atol=atol, n_dense=n_dense,
                           extra_points=_nodes_for(extra_points, 2))
    return PiecewiseSolution(lam, "left", (s1, s2, s3))


def shoot_right(problem: ValidatedProblem, lam: float, tol: float = DEFAULT_RTOL, *,
                atol: float = DEFAULT_ATOL, n_dense: Optional[int] = None,
                extra_points=None) -> PiecewiseSolution:
    """chi_lam: u(b)=lam*alpha2p-alpha2, u'(b)=lam*alpha1p-alpha1, carried backwards."""
    p = problem
    lam = float(lam)
    start3 = ShotState(lam * p.alpha2p - p.alpha2, lam * p.alpha1p - p.alpha1, p.b)
    s3 = integrate_segment(p, lam, start3, p.c2, tol, atol=atol, n_dense=n_dense,
                           extra_points=_nodes_for(extra_points, 2))
    e = s3.first
    g_d = p.gamma / p.delta
    start2 = ShotState(g_d * e.u, g_d * (e.up - lam / p.delta * e.u), p.c2)
    s2 = integrate_segment(p, lam, start2, p.c1, tol, atol=atol, n_dense=n_dense,
                           extra_points=_nodes_for(extra_points, 1))
    e = s2.first
    start1 = ShotState(p.delta * e.u, p.delta * (e.up - lam * e.u), p.c1)
    s1 = integrate_segment(p, lam, start1, p.a, tol, atol=atol, n_dense=n_dense,
                           extra_points=_nodes_for(extra_points, 0))
    return PiecewiseSolution(lam, "right", (s1, s2, s3))


def wronskian(left: PiecewiseSolution, right: PiecewiseSolution, x, segment: Optional[int] = None):
    """left*right' - left'*right using the segment that holds ``x``.

    ``segment`` (1..3) selects a side at c1 or c2; by default an interface
    point belongs to the segment on its left.
    """
    if left.lam != right.lam:
        raise ValueError(f"Wronskian of solutions at different lam ({left.lam} vs {right.lam})")
    x_arr = np.asarray(x, dtype=float)
    if segment is None:
        bounds = [s.x[-1] for s in left.segments]
        segment = 1 if np.all(x_arr <= bounds[0]) else (2 if np.all(x_arr <= bounds[1]) else 3)
    L, R = left.segment(segment), right.segment(segment)
    lo, hi = L.x[0], L.x[-1]
    if np.any(x_arr < lo) or np.any(x_arr > hi):
        raise ValueError(f"x outside segment {segment} [{lo}, {hi}]")
    w = L(x_arr) * R(x_arr, derivative=True) - L(x_arr, derivative=True) * R(x_arr)
    return float(w) if w.ndim == 0 else w


def wronskian_on_grid(left: PiecewiseSolution, right: PiecewiseSolution, segment: int) -> np.ndarray:
    """W on a shared dense grid (both records must share abscissae)."""
    L, R = left.segment(segment), right.segment(segment)
    if L.x.shape != R.x.shape or not np.array_equal(L.x, R.x):
        return wronskian(left, right, L.x, segment)
    return L.u * R.up - L.up * R.u


def _args(problem: ValidatedProblem):
    p = problem
    (bp1, cf1), (bp2, cf2), (bp3, cf3) = p.pieces
    return bp1, cf1, bp2, cf2, bp3, cf3


def _closing(problem: ValidatedProblem, lam: float, u: float, up: float) -> float:
    p = problem
    return p.gamma ** 2 * ((lam * p.alpha1p - p.alpha1) * u - (lam * p.alpha2p - p.alpha2) * up)


def omega_rescaled(problem: ValidatedProblem, lam: float, tol: float = DEFAULT_RTOL,
                   atol: float = DEFAULT_ATOL) -> tuple[float, float]:
    """(omega_tilde, log_scale) with omega = omega_tilde * exp(log_scale).

    The left state is renormalised at every segment entry, so omega_tilde
    keeps sign and relative size even where omega itself would overflow.
    """
    p = problem
    lam = float(lam)
    u, up, ls, status, xf = _dopri.shoot_left_end(lam, p.a, p.c1, p.c2, p.b, p.beta1, p.beta2,
                                                  p.delta, p.gamma, *_args(p), tol, atol)
    _check(status, lam, xf)
    return _closing(p, lam, u, up), ls


def omega(problem: ValidatedProblem, lam: float, tol: float = DEFAULT_RTOL,
          atol: float = DEFAULT_ATOL) -> float:
    """Characteristic function gamma^2 {(lam a1' - a1) phi(b) - (lam a2' - a2) phi'(b)}."""
    w, ls = omega_rescaled(problem, lam, tol, atol)
    with np.errstate(over="ignore"):
        return float(w * math.exp(ls)) if ls < 700 else math.copysign(math.inf, w)


def omega_chain(problem: ValidatedProblem, lam: float, tol: float = DEFAULT_RTOL,
                atol: float = DEFAULT_ATOL) -> tuple[float, float, float]:
    """(omega_1, delta^2 omega_2, gamma^2 omega_3) from the segment Wronskians."""
    phi = shoot_left(problem, lam, tol, atol=atol)
    chi = shoot_right(problem, lam, tol, atol=atol)
    w = [float(np.mean(wronskian_on_grid(phi, chi, i))) for i in (1, 2, 3)]
    return w[0], problem.delta ** 2 * w[1], problem.gamma ** 2 * w[2]


def central_difference(f: Callable[[float], float], x: float, h: float) -> float:
    """Central difference with one Richardson step (h and h/2)."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    h2 = h / 2
    d2 = (f(x + h2) - f(x - h2)) / (2 * h2)
    return (4 * d2 - d1) / 3


def omega_derivative(problem: ValidatedProblem, lam: float, h: Optional[float] = None,
                     tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> float:
    """d omega / d lam by Richardson-extrapolated central differences.

    All stencil points reuse the step mesh accepted at ``lam`` so the
    discretisation error is a smooth function of lam and cancels in the
    differences instead of showing up as step-selection noise.
    """
    lam = float(lam)
    if h is None:
        h = 1e-6 * (1.0 + abs(lam))
    if not h > 0:
        raise ValueError("h must be positive")
    p = problem
    args = _args(p)
    m1, m2, m3, status, xf = _dopri.left_meshes(lam, p.a, p.c1, p.c2, p.b, p.beta1, p.beta2,
                                                p.delta, p.gamma, *args, tol, atol)
    _check(status, lam, xf)

    def f(t: float) -> float:
        u, up = _dopri.shoot_left_fixed(t, p.beta1, p.beta2, p.delta, p.gamma, *args, m1, m2, m3)
        return _closing(p, t, u, up)

    return central_difference(f, lam, h)


def transmission_residuals(sol: PiecewiseSolution, problem: ValidatedProblem) -> tuple[float, ...]:
    """(T1, T2, T3, T4) evaluated on the one-sided limits of ``sol``."""
    p, lam = problem, sol.lam
    m1, p1, m2, p2 = sol.c1_minus, sol.c1_plus, sol.c2_minus, sol.c2_plus
    return (m1.u - p.delta * p1.u,
            m1.up - p.delta * p1.up + lam * m1.u,
            p.delta * m2.u - p.gamma * p2.u,
            p.delta * m2.up - p.gamma * p2.up + lam * m2.u)


def boundary_residuals(sol: PiecewiseSolution, problem: ValidatedProblem) -> tuple[float, float]:
    """(B1 at a, B2 at b) for ``sol``."""
    p, lam = problem, sol.lam
    a, b = sol.at_a, sol.at_b
    b1 = p.beta1 * a.u + p.beta2 * a.up
    b2 = lam * (p.alpha1p * b.u - p.alpha2p * b.up) - (p.alpha1 * b.u - p.alpha2 * b.up)
    return b1, b2


def proportionality(left: PiecewiseSolution, right: PiecewiseSolution,
                    floor: float = 1e-3) -> tuple[float, float]:
    """(mean, coefficient of variation) of chi/phi where |phi| > floor*max|phi|.

    At an eigenvalue chi = k phi, so the ratio is a constant k != 0.
    """
    ratios = []
    big = floor * left.max_abs()
    for L, R in zip(left.segments, right.segments):
        if L.x.shape == R.x.shape and np.array_equal(L.x, R.x):
            rv = R.u
        else:
            rv = R(L.x)
        mask = np.abs(L.u) > big
        ratios.append(rv[mask] / L.u[mask])
    r = np.concatenate(ratios)
    mean = float(np.mean(r))
    return mean, float(np.std(r) / abs(mean))
