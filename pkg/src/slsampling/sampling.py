"""Forward transform and its Lagrange-type reconstruction from eigenvalue samples.

For g in L2(a, b) the transform

    F(lam) = int_a^c1 g phi + delta^2 int_c1^c2 g phi + gamma^2 int_c2^b g phi

(phi = phi_lam) is entire in lam, and is rebuilt from its values at the
eigenvalues by

    F(lam) ~ sum_n F(lam_n) omega(lam) / ((lam - lam_n) omega'(lam_n)).

``reconstruct_normalized`` replaces omega by the canonical product
prod (1 - lam/lam_n) over the available eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PPoly

from ._parallel import pmap
from .hilbert import QuadratureRule, quadrature_rule
from .problem import PolySegment, Segment, ValidatedProblem, _segment_ppoly
from .shooting import DEFAULT_ATOL, DEFAULT_RTOL, omega, shoot_left

NODE_RTOL = 1e-9


@dataclass(frozen=True)
class SourceFunction:
    """g as three segment descriptors, in the same format as the potential."""

    segments: tuple[Segment, Segment, Segment]

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "SourceFunction":
        p = PolySegment(coeffs)
        return cls((p, p, p))

    @classmethod
    def zero(cls) -> "SourceFunction":
        return cls.polynomial([0.0])

    def pieces(self, problem: ValidatedProblem) -> tuple[PPoly, PPoly, PPoly]:
        return tuple(_segment_ppoly(s, lo, hi, i)
                     for i, (s, (lo, hi)) in enumerate(zip(self.segments, problem.bounds), 1))

    def __call__(self, problem: ValidatedProblem, x: np.ndarray, segment: int) -> np.ndarray:
        return self.pieces(problem)[segment - 1](np.asarray(x, dtype=float))


def _g_on_nodes(problem, g: SourceFunction, rule: QuadratureRule):
    return tuple(pp(x) for pp, x in zip(g.pieces(problem), rule.nodes))


def forward_transform(problem: ValidatedProblem, g: SourceFunction, lam: float,
                      rule: Optional[QuadratureRule] = None, tol: float = DEFAULT_RTOL,
                      atol: float = DEFAULT_ATOL, _g_nodes=None) -> float:
    rule = rule or quadrature_rule(problem)
    gv = _g_nodes if _g_nodes is not None else _g_on_nodes(problem, g, rule)
    if not any(np.any(v) for v in gv):
        return 0.0
    sol = shoot_left(problem, lam, tol, atol=atol, extra_points=rule.nodes)
    total = 0.0
    for i, wt in enumerate(problem.weights):
        phi = sol.segment(i + 1)(rule.nodes[i])
        total += wt * float(np.dot(rule.weights[i], gv[i] * phi))
    if not math.isfinite(total):
        raise ArithmeticError(f"non-finite transform at lam={lam!r}")
    return total


def forward_transform_many(problem: ValidatedProblem, g: SourceFunction, lams,
                           rule: Optional[QuadratureRule] = None, tol: float = DEFAULT_RTOL,
                           atol: float = DEFAULT_ATOL, workers: Optional[int] = None) -> np.ndarray:
    rule = rule or quadrature_rule(problem)
    gv = _g_on_nodes(problem, g, rule)
    return np.array(pmap(lambda lam: forward_transform(problem, g, lam, rule, tol, atol, gv),
                         [float(l) for l in lams], workers))


@dataclass(frozen=True)
class TransformSamples:
    lambdas: np.ndarray
    values: np.ndarray
    omega_primes: np.ndarray
    fingerprint: str = ""

    def __post_init__(self):
        if not (self.lambdas.shape == self.values.shape == self.omega_primes.shape):
            raise ValueError("lambdas, values and omega_primes must have equal length")
        if np.any(self.omega_primes == 0):
            raise ValueError("omega'(lam_n) must be nonzero")

    @property
    def N(self) -> int:
        return int(self.lambdas.size)

    def truncated(self, n: int) -> "TransformSamples":
        return TransformSamples(self.lambdas[:n], self.values[:n], self.omega_primes[:n],
                                self.fingerprint)


def sample_transform(problem: ValidatedProblem, g: SourceFunction, spectrum,
                     rule: Optional[QuadratureRule] = None, tol: float = DEFAULT_RTOL,
                     atol: float = DEFAULT_ATOL, workers: Optional[int] = None) -> TransformSamples:
    fp = getattr(spectrum, "fingerprint", "")
    if fp and fp != problem.fingerprint():
        raise ValueError("spectrum was computed for a different problem")
    lams = np.array([e.lam for e in spectrum])
    values = forward_transform_many(problem, g, lams, rule, tol, atol, workers)
    return TransformSamples(lams, values, np.array([e.omega_prime for e in spectrum]),
                            problem.fingerprint())


def _node_hit(lambdas: np.ndarray, lam: float) -> Optional[int]:
    d = np.abs(lam - lambdas)
    k = int(np.argmin(d)) if d.size else -1
    if k >= 0 and d[k] <= NODE_RTOL * (1 + abs(lambdas[k])):
        return k
    return None


def lagrange_sum(lambdas, values, omega_primes, lam: float, omega_lam: float) -> float:
    """sum_n values[n] omega_lam / ((lam - lambdas[n]) omega_primes[n]).

    At a node the sample itself is returned.  The terms are added with
    ``math.fsum``, so the result does not depend on summation order.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size == 0:
        return 0.0
    k = _node_hit(lambdas, lam)
    if k is not None:
        return float(values[k])
    terms = np.asarray(values) * (omega_lam / ((lam - lambdas) * np.asarray(omega_primes)))
    return math.fsum(terms)


def reconstruct(samples: TransformSamples, problem: ValidatedProblem, lam: float,
                tol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> float:
    """Lagrange-type series with omega(lam) evaluated fresh by shooting."""
    if samples.N == 0:
        return 0.0
    if _node_hit(samples.lambdas, lam) is not None:
        return lagrange_sum(samples.lambdas, samples.values, samples.omega_primes, lam, 0.0)
    return lagrange_sum(samples.lambdas, samples.values, samples.omega_primes, lam,
                        omega(problem, lam, tol, atol))


# -- canonical product -----------------------------------------------------------

@dataclass(frozen=True)
class LogValue:
    """sign * exp(log_abs); sign 0 means an exact zero."""

    log_abs: float
    sign: int
    factors: int

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        with np.errstate(over="ignore"):
            return self.sign * math.exp(self.log_abs) if self.log_abs < 709 else self.sign * math.inf


def _log_factors(lambdas: np.ndarray, lam: float, skip: Optional[int] = None) -> LogValue:
    """Product of (1 - lam/lam_k), with lam itself standing in for a zero lam_k."""
    f = np.where(lambdas == 0.0, lam, 1.0 - lam / np.where(lambdas == 0.0, 1.0, lambdas))
    if skip is not None:
        f = np.delete(f, skip)
    if np.any(f == 0):
        return LogValue(-math.inf, 0, f.size)
    sign = -1 if np.count_nonzero(f < 0) % 2 else 1
    return LogValue(math.fsum(np.log(np.abs(f))), sign, f.size)


def _lambdas_of(spectrum) -> np.ndarray:
    if isinstance(spectrum, TransformSamples):
        return spectrum.lambdas
    if hasattr(spectrum, "lambdas"):
        return np.asarray(spectrum.lambdas, dtype=float)
    return np.asarray([getattr(e, "lam", e) for e in spectrum], dtype=float)


def canonical_product_log(spectrum, lam: float) -> LogValue:
    """varpi(lam) = prod (1 - lam/lam_n), or lam * prod_{n>=1} when lam_0 = 0."""
    return _log_factors(_lambdas_of(spectrum), float(lam))


def canonical_product(spectrum, lam: float) -> float:
    return canonical_product_log(spectrum, lam).value


def canonical_derivative_log(spectrum, n: int) -> LogValue:
    """varpi'(lam_n) by removing the n-th factor and differentiating it alone."""
    lambdas = _lambdas_of(spectrum)
    ln = float(lambdas[n])
    rest = _log_factors(lambdas, ln, skip=n)
    if ln == 0.0:
        return rest
    # d/dlam (1 - lam/lam_n) = -1/lam_n
    sign = rest.sign * (-1 if ln > 0 else 1)
    return LogValue(rest.log_abs - math.log(abs(ln)), sign, rest.factors + 1)


def canonical_derivative(spectrum, n: int) -> float:
    return canonical_derivative_log(spectrum, n).value


def reconstruct_normalized(samples: TransformSamples, spectrum, lam: float) -> float:
    """The same series with the canonical product in place of omega.

    The product runs over every eigenvalue in ``spectrum``, which may hold
    more entries than ``samples``; a longer product shrinks its own
    truncation error independently of the number of samples.
    """
    if samples.N == 0:
        return 0.0
    k = _node_hit(samples.lambdas, lam)
    if k is not None:
        return float(samples.values[k])
    full = _lambdas_of(spectrum)
    if full.size < samples.N or not np.array_equal(samples.lambdas, full[:samples.N]):
        raise ValueError("samples must be the leading nodes of the spectrum")
    top = _log_factors(full, float(lam))
    terms = []
    for n in range(samples.N):
        d = canonical_derivative_log(full, n)
        if d.sign == 0:
            raise ArithmeticError(f"varpi'(lam_{n}) vanished")
        mag = math.exp(top.log_abs - d.log_abs) if top.sign else 0.0
        terms.append(samples.values[n] * top.sign * d.sign * mag / (lam - samples.lambdas[n]))
    return math.fsum(terms)


# -- truncation study ------------------------------------------------------------

@dataclass
class ReconstructionReport:
    probes: np.ndarray
    direct: np.ndarray
    schedule: list[int]
    reconstructed: dict[int, np.ndarray]
    node_residuals: dict[int, float]
    max_rel: dict[int, float] = field(default_factory=dict)
    mean_rel: dict[int, float] = field(default_factory=dict)
    fingerprint: str = ""

    def rows(self):
        """(N, probe, direct, reconstructed, abs_err, rel_err) per probe and N."""
        scale = self.scale
        for N in self.schedule:
            for lam, d, r in zip(self.probes, self.direct, self.reconstructed[N]):
                yield N, float(lam), float(d), float(r), abs(r - d), abs(r - d) / scale

    @property
    def scale(self) -> float:
        """Errors are relative to max |F| over the probes."""
        s = float(np.max(np.abs(self.direct))) if self.direct.size else 0.0
        return s if s > 0 else 1.0

    def trend_ok(self, slack: float = 0.05) -> bool:
        e = [self.max_rel[N] for N in self.schedule]
        return all(b <= a * (1 + slack) for a, b in zip(e, e[1:]))


def default_probes(spectrum, n_probes: int = 25, upto: Optional[int] = None) -> np.ndarray:
    """``n_probes`` interior points of [lam_0, lam_{upto}] (default upto = len/2)."""
    lams = _lambdas_of(spectrum)
    top = len(lams) // 2 if upto is None else upto
    top = max(1, min(top, len(lams) - 1))
    return np.linspace(lams[0], lams[top], n_probes + 2)[1:-1]


def truncation_report(problem: ValidatedProblem, g: SourceFunction, spectrum, probes=None,
                      N_schedule: Sequence[int] = (25, 50, 100, 200),
                      rule: Optional[QuadratureRule] = None, tol: float = DEFAULT_RTOL,
                      atol: float = DEFAULT_ATOL, workers: Optional[int] = None) -> ReconstructionReport:
    schedule = sorted(int(n) for n in N_schedule)
    if not schedule or schedule[0] < 1:
        raise ValueError("N_schedule must hold positive counts")
    if schedule[-1] > len(spectrum):
        raise ValueError(f"spectrum has {len(spectrum)} entries, N up to {schedule[-1]} requested")
    rule = rule or quadrature_rule(problem)
    if probes is None:
        probes = default_probes(spectrum, 25, schedule[0] // 2)
    probes = np.asarray(probes, dtype=float)
    samples = sample_transform(problem, g, spectrum.truncated(schedule[-1])
                               if hasattr(spectrum, "truncated") else list(spectrum)[:schedule[-1]],
                               rule, tol, atol, workers)
    direct = forward_transform_many(problem, g, probes, rule, tol, atol, workers)
    om = np.array(pmap(lambda lam: omega(problem, lam, tol, atol), list(probes), workers))
    rep = ReconstructionReport(probes, direct, schedule, {}, {}, fingerprint=problem.fingerprint())
    for N in schedule:
        s = samples.truncated(N)
        rep.reconstructed[N] = np.array([
            lagrange_sum(s.lambdas, s.values, s.omega_primes, lam, w) for lam, w in zip(probes, om)])
        res = [abs(lagrange_sum(s.lambdas, s.values, s.omega_primes, ln, 0.0) - v)
               / max(abs(v), 1e-300) for ln, v in zip(s.lambdas, s.values)]
        rep.node_residuals[N] = float(max(res))
        rel = np.abs(rep.reconstructed[N] - direct) / rep.scale
        rep.max_rel[N] = float(rel.max()) if rel.size else 0.0
        rep.mean_rel[N] = float(rel.mean()) if rel.size else 0.0
    return rep
