"""The Hilbert space H = L2(a, b) + R^3 of the problem and its eigenvectors.

An element is F = (f, h1, h2, h3).  The inner product weights the three
segment integrals by 1, delta^2, gamma^2 and the discrete part by
gamma^2/rho, 1, delta:

    <F, G> = int_a^c1 f g + delta^2 int_c1^c2 f g + gamma^2 int_c2^b f g
             + (gamma^2/rho) h1 k1 + h2 k2 + delta h3 k3

An eigenfunction phi is lifted to Phi = (phi, R'_b(phi), R_c1(phi), R_c2(phi)).

Eigenvectors at distinct eigenvalues are orthogonal under the *signed* form
(the same expression with the discrete part subtracted), which follows from
Green's formula with the jump conditions above.  Under the positive form
they are not, so both are exposed; see ``indefinite_inner_product``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from ._parallel import pmap
from .problem import ValidatedProblem
from .shooting import DEFAULT_ATOL, DEFAULT_RTOL, PiecewiseSolution, shoot_left

GAUSS_ORDER = 32
PANELS = 8


@lru_cache(maxsize=None)
def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre nodes and weights, one pair per segment."""

    nodes: tuple[np.ndarray, np.ndarray, np.ndarray]
    weights: tuple[np.ndarray, np.ndarray, np.ndarray]
    panels: int
    order: int


def quadrature_rule(problem: ValidatedProblem, panels: int = PANELS,
                    order: int = GAUSS_ORDER) -> QuadratureRule:
    if panels < 1 or order < 1:
        raise ValueError("panels and order must be >= 1")
    t, w = _gauss(order)
    nodes, weights = [], []
    for lo, hi in problem.bounds:
        edges = np.linspace(lo, hi, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        weights.append((half[:, None] * w[None, :]).ravel())
    return QuadratureRule(tuple(nodes), tuple(weights), panels, order)


@dataclass(frozen=True)
class HVector:
    """(f, h1, h2, h3); f is sampled per segment on an increasing grid.

    ``slopes`` (optional) holds f' on the same grids and makes resampling
    cubic Hermite instead of a cubic spline.
    """

    grids: tuple[np.ndarray, np.ndarray, np.ndarray]
    values: tuple[np.ndarray, np.ndarray, np.ndarray]
    h: tuple[float, float, float]
    slopes: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    def on(self, segment: int, x: np.ndarray) -> np.ndarray:
        """f on segment 1..3 at ``x``; exact when ``x`` is the stored grid."""
        g = self.grids[segment - 1]
        v = self.values[segment - 1]
        if g.shape == x.shape and np.array_equal(g, x):
            return v
        if g.size < 2:
            raise ValueError(f"segment {segment} grid has fewer than 2 points")
        lo, hi = g[0], g[-1]
        tol = 1e-12 * (1 + abs(lo) + abs(hi))
        if x.size and (x.min() < lo - tol or x.max() > hi + tol):
            raise ValueError(f"segment {segment} grid [{lo}, {hi}] does not cover the quadrature nodes")
        if self.slopes is not None:
            return CubicHermiteSpline(g, v, self.slopes[segment - 1])(x)
        return CubicSpline(g, v)(x)


@dataclass(frozen=True)
class BoundaryFunctionals:
    Rb: float
    Rbp: float
    Rc1: float
    Rc1p: float
    Rc2: float
    Rc2p: float


def functionals(solution: PiecewiseSolution, problem: ValidatedProblem) -> BoundaryFunctionals:
    p = problem
    try:
        b, m1, p1, m2, p2 = (solution.at_b, solution.c1_minus, solution.c1_plus,
                             solution.c2_minus, solution.c2_plus)
    except (AttributeError, IndexError) as exc:
        raise ValueError("solution lacks one-sided limit data") from exc
    return BoundaryFunctionals(
        Rb=p.alpha1 * b.u - p.alpha2 * b.up,
        Rbp=p.alpha1p * b.u - p.alpha2p * b.up,
        Rc1=m1.u,
        Rc1p=m1.up - p.delta * p1.up,
        Rc2=m2.u,
        Rc2p=p.delta * m2.up - p.gamma * p2.up,
    )


def lift(solution: PiecewiseSolution, problem: ValidatedProblem,
         rule: Optional[QuadratureRule] = None) -> HVector:
    """Phi = (phi, R'_b, R_c1, R_c2); values sampled at the rule's nodes if given."""
    R = functionals(solution, problem)
    h = (R.Rbp, R.Rc1, R.Rc2)
    if rule is None:
        segs = solution.segments
        return HVector(tuple(s.x for s in segs), tuple(s.u for s in segs), h,
                       tuple(s.up for s in segs))
    vals = tuple(np.asarray(solution.segment(i + 1)(rule.nodes[i]), dtype=float) for i in range(3))
    return HVector(rule.nodes, vals, h)


def eigenvector(problem: ValidatedProblem, lam: float, rule: Optional[QuadratureRule] = None,
                tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> HVector:
    """Lift of phi_lam with values taken straight from the integrator at the nodes."""
    rule = rule or quadrature_rule(problem)
    sol = shoot_left(problem, lam, tol, atol=atol, extra_points=rule.nodes)
    return lift(sol, problem, rule)


def _integrals(F: HVector, G: HVector, problem: ValidatedProblem, rule: QuadratureRule) -> float:
    total = 0.0
    for i, wt in enumerate(problem.weights):
        x = rule.nodes[i]
        total += wt * float(np.dot(rule.weights[i], F.on(i + 1, x) * G.on(i + 1, x)))
    return total


def _discrete(F: HVector, G: HVector, problem: ValidatedProblem) -> float:
    p = problem
    w = (p.gamma ** 2 / p.rho, 1.0, p.delta)
    return sum(wi * a * b for wi, a, b in zip(w, F.h, G.h))


def inner_product(F: HVector, G: HVector, problem: ValidatedProblem,
                  rule: Optional[QuadratureRule] = None) -> float:
    """<F, G> with the positive discrete weights gamma^2/rho, 1, delta."""
    rule = rule or quadrature_rule(problem)
    return _integrals(F, G, problem, rule) + _discrete(F, G, problem)


def indefinite_inner_product(F: HVector, G: HVector, problem: ValidatedProblem,
                             rule: Optional[QuadratureRule] = None) -> float:
    """[F, G]: the same integrals minus the discrete part.

    This is the form under which the lifted eigenvectors are orthogonal; it
    has three negative squares, so [F, F] may be negative.
    """
    rule = rule or quadrature_rule(problem)
    return _integrals(F, G, problem, rule) - _discrete(F, G, problem)


def eigenvector_norm(problem: ValidatedProblem, entry, phi: Optional[PiecewiseSolution] = None,
                     rule: Optional[QuadratureRule] = None) -> float:
    """||Phi_n||_H under the positive form; ``entry`` is a spectrum entry or a lam."""
    lam = float(getattr(entry, "lam", entry))
    rule = rule or quadrature_rule(problem)
    if phi is None:
        F = eigenvector(problem, lam, rule)
    else:
        if phi.lam != lam:
            raise ValueError(f"phi computed at lam={phi.lam}, entry is lam={lam}")
        F = lift(phi, problem, rule)
    return float(np.sqrt(inner_product(F, F, problem, rule)))


def gram_matrix(vectors: list[HVector], problem: ValidatedProblem,
                rule: Optional[QuadratureRule] = None, signed: bool = False) -> np.ndarray:
    rule = rule or quadrature_rule(problem)
    form = indefinite_inner_product if signed else inner_product
    n = len(vectors)
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = G[j, i] = form(vectors[i], vectors[j], problem, rule)
    return G


def orthogonality_matrix(problem: ValidatedProblem, spectrum, count: int,
                         signed: bool = False, rule: Optional[QuadratureRule] = None,
                         workers: Optional[int] = None) -> np.ndarray:
    """Gram matrix of the first ``count`` eigenvectors, normalised.

    With ``signed=False`` the entries are <Psi_m, Psi_n> and the diagonal is 1.
    With ``signed=True`` they are [Phi_m, Phi_n] / sqrt(|[Phi_m,Phi_m] [Phi_n,Phi_n]|),
    so the diagonal holds the sign (+1 or -1) of each eigenvector's square.
    """
    if len(spectrum) < count:
        raise ValueError(f"spectrum has {len(spectrum)} entries, {count} requested")
    rule = rule or quadrature_rule(problem)
    lams = [float(getattr(e, "lam", e)) for e in list(spectrum)[:count]]
    vecs = pmap(lambda lam: eigenvector(problem, lam, rule), lams, workers)
    G = gram_matrix(vecs, problem, rule, signed)
    d = np.sqrt(np.abs(np.diag(G)))
    return G / np.outer(d, d)
