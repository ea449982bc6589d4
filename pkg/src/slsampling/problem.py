"""Problem instances: interval geometry, potential, boundary and jump data.

A problem is ``-u'' + q u = lam u`` on ``[a, c1) U (c1, c2) U (c2, b]`` with

* ``beta1 u(a) + beta2 u'(a) = 0``
* ``lam (alpha1p u(b) - alpha2p u'(b)) - (alpha1 u(b) - alpha2 u'(b)) = 0``
* ``u(c1-) = delta u(c1+)``, ``u'(c1-) - delta u'(c1+) + lam u(c1-) = 0``
* ``delta u(c2-) = gamma u(c2+)``, ``delta u'(c2-) - gamma u'(c2+) + lam u(c2-) = 0``
"""

from __future__ import annotations

import cmath
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.interpolate import PchipInterpolator, PPoly


class ProblemError(ValueError):
    """A problem instance violates one of its structural constraints."""


@dataclass(frozen=True)
class PolySegment:
    """q(x) = c0 + c1 x + c2 x^2 + ... in the global abscissa."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float]):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in coeffs))


@dataclass(frozen=True)
class TableSegment:
    """Sampled q, interpolated by a monotone (PCHIP) cubic."""

    x: tuple[float, ...]
    values: tuple[float, ...]

    def __init__(self, x: Sequence[float], values: Sequence[float]):
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        object.__setattr__(self, "values", tuple(float(v) for v in values))


Segment = Union[PolySegment, TableSegment]


@dataclass(frozen=True)
class PotentialSpec:
    segments: tuple[Segment, Segment, Segment]

    @classmethod
    def zero(cls) -> "PotentialSpec":
        z = PolySegment([0.0])
        return cls((z, z, z))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "PotentialSpec":
        """Same polynomial on all three segments."""
        p = PolySegment(coeffs)
        return cls((p, p, p))


@dataclass(frozen=True)
class ProblemSpec:
    a: float
    c1: float
    c2: float
    b: float
    beta1: float
    beta2: float
    alpha1: float
    alpha2: float
    alpha1p: float
    alpha2p: float
    delta: float
    gamma: float
    q: PotentialSpec = field(default_factory=PotentialSpec.zero)

    def to_dict(self) -> dict:
        segs = []
        for s in self.q.segments:
            if isinstance(s, PolySegment):
                segs.append({"poly": list(s.coeffs)})
            else:
                segs.append({"table": {"x": list(s.x), "values": list(s.values)}})
        d = {k: getattr(self, k) for k in _SCALARS}
        d["q"] = segs
        return d


_SCALARS = ("a", "c1", "c2", "b", "beta1", "beta2", "alpha1", "alpha2",
            "alpha1p", "alpha2p", "delta", "gamma")


@dataclass(frozen=True, eq=False)
class ValidatedProblem(ProblemSpec):
    """Immutable, checked problem with precomputed rho and potential pieces.

    Equality and hashing go through the underlying spec, so validating an
    already validated problem returns an equal value.
    """

    rho: float = 0.0
    # per segment (breakpoints, coefficients) in PPoly layout, for the kernel
    pieces: tuple = ()

    def spec(self) -> ProblemSpec:
        return ProblemSpec(**{k: getattr(self, k) for k in _SCALARS}, q=self.q)

    @property
    def bounds(self) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
        return ((self.a, self.c1), (self.c1, self.c2), (self.c2, self.b))

    @property
    def weights(self) -> tuple[float, float, float]:
        """Integral weights 1, delta^2, gamma^2 of the three segments."""
        return (1.0, self.delta ** 2, self.gamma ** 2)

    def fingerprint(self) -> str:
        return fingerprint(self.spec())

    def segment_of(self, x: float) -> int:
        """Segment index (1, 2, 3) of an interior abscissa; c1, c2 go left."""
        if x < self.a or x > self.b:
            raise ProblemError(f"x={x} outside [{self.a}, {self.b}]")
        if x <= self.c1:
            return 1
        if x <= self.c2:
            return 2
        return 3

    def __eq__(self, other):
        if isinstance(other, ValidatedProblem):
            return self.spec() == other.spec()
        if isinstance(other, ProblemSpec):
            return self.spec() == other
        return NotImplemented

    def __hash__(self):
        return hash(self.spec())


def fingerprint(spec: ProblemSpec) -> str:
    blob = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _segment_ppoly(seg: Segment, lo: float, hi: float, index: int) -> PPoly:
    if isinstance(seg, PolySegment):
        if not seg.coeffs:
            raise ProblemError(f"potential segment {index}: empty coefficient list")
        if not all(math.isfinite(c) for c in seg.coeffs):
            raise ProblemError(f"potential segment {index}: non-finite coefficient")
        shifted = np.polynomial.Polynomial(seg.coeffs)(np.polynomial.Polynomial([lo, 1.0]))
        local = shifted.coef[::-1].reshape(-1, 1)
        return PPoly(np.ascontiguousarray(local, dtype=float), np.array([lo, hi]))
    x = np.asarray(seg.x)
    y = np.asarray(seg.values)
    if x.size < 2 or x.size != y.size:
        raise ProblemError(f"potential segment {index}: table needs >= 2 matching points")
    if np.any(np.diff(x) <= 0):
        raise ProblemError(f"potential segment {index}: table abscissae must be strictly increasing")
    tol = 1e-12 * (1.0 + abs(lo) + abs(hi))
    if x[0] > lo + tol or x[-1] < hi - tol:
        raise ProblemError(
            f"potential segment {index}: table spans [{x[0]}, {x[-1]}], must cover [{lo}, {hi}]")
    if not np.all(np.isfinite(y)):
        raise ProblemError(f"potential segment {index}: non-finite table value")
    pch = PchipInterpolator(x, y, extrapolate=True)
    return PPoly(np.ascontiguousarray(pch.c), np.ascontiguousarray(pch.x))


def validate(spec: ProblemSpec) -> ValidatedProblem:
    """Check every constraint of ``spec`` and freeze it.

    Raises ProblemError naming the first violated inequality.
    """
    if isinstance(spec, ValidatedProblem):
        spec = spec.spec()
    vals = {k: float(getattr(spec, k)) for k in _SCALARS}
    for k, v in vals.items():
        if not math.isfinite(v):
            raise ProblemError(f"{k} must be finite")
    a, c1, c2, b = vals["a"], vals["c1"], vals["c2"], vals["b"]
    if not a < c1:
        raise ProblemError("a < c1 violated")
    if not c1 < c2:
        raise ProblemError("c1 < c2 violated")
    if not c2 < b:
        raise ProblemError("c2 < b violated")
    if abs(vals["beta1"]) + abs(vals["beta2"]) == 0:
        raise ProblemError("|beta1| + |beta2| must be nonzero")
    if not vals["delta"] > 0:
        raise ProblemError("delta must be positive")
    if vals["gamma"] == 0:
        raise ProblemError("gamma must be nonzero")
    rho = vals["alpha1p"] * vals["alpha2"] - vals["alpha1"] * vals["alpha2p"]
    if not rho > 0:
        raise ProblemError(f"rho must be positive (rho = alpha1p*alpha2 - alpha1*alpha2p = {rho:g})")
    if len(spec.q.segments) != 3:
        raise ProblemError("potential needs exactly three segments")
    pieces = []
    for i, (seg, (lo, hi)) in enumerate(zip(spec.q.segments, ((a, c1), (c1, c2), (c2, b))), 1):
        pp = _segment_ppoly(seg, lo, hi, i)
        pieces.append((np.ascontiguousarray(pp.x, dtype=float),
                       np.ascontiguousarray(pp.c, dtype=float)))
    for bp, cf in pieces:
        bp.setflags(write=False)
        cf.setflags(write=False)
    return ValidatedProblem(**vals, q=spec.q, rho=rho, pieces=tuple(pieces))


def eval_q(problem: ValidatedProblem, x: float, segment: int) -> float:
    """q on one closed segment; endpoints give that segment's one-sided limit."""
    if segment not in (1, 2, 3):
        raise ProblemError(f"segment must be 1, 2 or 3, got {segment}")
    lo, hi = problem.bounds[segment - 1]
    if not lo <= x <= hi:
        raise ProblemError(f"x={x} outside segment {segment} [{lo}, {hi}]")
    bp, cf = problem.pieces[segment - 1]
    return float(PPoly(cf, bp)(x))


@dataclass(frozen=True)
class SpectralParameter:
    """lam together with s, lam = s**2; s is imaginary when lam < 0."""

    lam: float

    @property
    def s(self) -> complex:
        return cmath.sqrt(self.lam)

    @property
    def imaginary(self) -> bool:
        return self.lam < 0

    @property
    def magnitude(self) -> float:
        return math.sqrt(abs(self.lam))

    def __str__(self) -> str:
        return f"{self.magnitude!r}j" if self.imaginary else repr(self.magnitude)


def reference_problem(**overrides) -> ProblemSpec:
    """Unit-segment problem with q = 0 used throughout the tests and docs."""
    base = dict(a=0.0, c1=1.0, c2=2.0, b=3.0, beta1=0.0, beta2=1.0,
                alpha1=1.0, alpha2=0.0, alpha1p=0.0, alpha2p=-1.0,
                delta=1.0, gamma=1.0, q=PotentialSpec.zero())
    base.update(overrides)
    return ProblemSpec(**base)
