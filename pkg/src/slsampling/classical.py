"""Classical sampling series: WKS (sinc), Levinson's nonuniform Lagrange series, Kramer.

These serve as baselines and as regression oracles for the eigenvalue
sampling engine, which is a Lagrange series of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np


class LevinsonBoundError(ValueError):
    """Sample points stray too far from the uniform grid k pi / sigma."""

    def __init__(self, D: float, bound: float):
        super().__init__(f"perturbation D={D:.6g} must be < pi/(4 sigma)={bound:.6g}")
        self.D = D
        self.bound = bound


def sinc_kernel(sigma: float, t, k):
    """sin(sigma t - k pi) / (sigma t - k pi), equal to 1 at t = k pi / sigma."""
    x = sigma * np.asarray(t, dtype=float) / math.pi - np.asarray(k, dtype=float)
    out = np.sinc(x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BandlimitedSamples:
    """Values f(t_k) for integer indices k; ``uniform`` means t_k = k pi / sigma."""

    sigma: float
    ks: np.ndarray
    points: np.ndarray
    values: np.ndarray
    uniform: bool

    @property
    def D(self) -> float:
        return float(np.max(np.abs(self.points - self.ks * math.pi / self.sigma))) if self.ks.size else 0.0

    @classmethod
    def on_grid(cls, sigma: float, f: Callable, k_min: int, k_max: int) -> "BandlimitedSamples":
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        ks = np.arange(k_min, k_max + 1)
        t = ks * math.pi / sigma
        return cls(float(sigma), ks, t, np.asarray(f(t), dtype=float), True)

    @classmethod
    def from_values(cls, sigma: float, ks: Sequence[int], values: Sequence[float]) -> "BandlimitedSamples":
        ks = np.asarray(ks, dtype=int)
        return cls(float(sigma), ks, ks * math.pi / sigma, np.asarray(values, dtype=float), True)

    @classmethod
    def nonuniform(cls, sigma: float, ks: Sequence[int], points: Sequence[float],
                   values: Sequence[float]) -> "BandlimitedSamples":
        """Checked against sup |t_k - k pi/sigma| < pi/(4 sigma)."""
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        ks = np.asarray(ks, dtype=int)
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(values, dtype=float)
        if not (ks.shape == pts.shape == vals.shape):
            raise ValueError("ks, points and values must have equal length")
        s = cls(float(sigma), ks, pts, vals, False)
        bound = math.pi / (4 * sigma)
        if not s.D < bound:
            raise LevinsonBoundError(s.D, bound)
        return s


def _node(samples: BandlimitedSamples, t: float) -> Optional[int]:
    hit = np.nonzero(samples.points == t)[0]
    return int(hit[0]) if hit.size else None


def wks_reconstruct(samples: BandlimitedSamples, t: float) -> float:
    """sum_k f(t_k) sinc(sigma t - k pi) over the supplied k."""
    if not samples.uniform:
        raise ValueError("WKS needs uniform samples t_k = k pi / sigma")
    k = _node(samples, t)
    if k is not None:
        return float(samples.values[k])
    return math.fsum(samples.values * sinc_kernel(samples.sigma, t, samples.ks))


def _by_index(samples: BandlimitedSamples) -> dict[int, float]:
    return {int(k): float(t) for k, t in zip(samples.ks, samples.points)}


def _factors(points: dict[int, float], t: float, skip: Optional[int] = None) -> np.ndarray:
    """(t - t_0) and (1 - t/t_k), (1 - t/t_-k) for the available k, one entry each."""
    out = []
    for k, tk in points.items():
        if k == skip:
            continue
        out.append(t - tk if k == 0 else 1.0 - t / tk)
    return np.asarray(out, dtype=float)


def _signed_log(f: np.ndarray) -> tuple[float, int]:
    if np.any(f == 0):
        return -math.inf, 0
    return math.fsum(np.log(np.abs(f))), (-1 if np.count_nonzero(f < 0) % 2 else 1)


def levinson_G(points, t: float) -> float:
    """G(t) = (t - t_0) prod_k (1 - t/t_k)(1 - t/t_-k), pairs (k, -k) as available.

    ``points`` maps index k to t_k (or is a BandlimitedSamples).
    """
    pts = _by_index(points) if isinstance(points, BandlimitedSamples) else dict(points)
    if 0 not in pts:
        raise ValueError("t_0 is required")
    la, sg = _signed_log(_factors(pts, float(t)))
    return 0.0 if sg == 0 else sg * math.exp(la)


def _log_G_prime(pts: dict[int, float], k: int) -> tuple[float, int]:
    tk = pts[k]
    la, sg = _signed_log(_factors(pts, tk, skip=k))
    if k == 0:
        return la, sg
    # d/dt (1 - t/t_k) = -1/t_k
    return la - math.log(abs(tk)), sg * (-1 if tk > 0 else 1)


def levinson_reconstruct(samples: BandlimitedSamples, t: float) -> float:
    """sum_k f(t_k) G(t) / (G'(t_k) (t - t_k))."""
    bound = math.pi / (4 * samples.sigma)
    if not samples.D < bound:
        raise LevinsonBoundError(samples.D, bound)
    k = _node(samples, t)
    if k is not None:
        return float(samples.values[k])
    pts = _by_index(samples)
    if 0 not in pts:
        raise ValueError("t_0 is required")
    lg, sg = _signed_log(_factors(pts, float(t)))
    if sg == 0:
        return 0.0
    terms = []
    for kk, v in zip(samples.ks, samples.values):
        ld, sd = _log_G_prime(pts, int(kk))
        terms.append(v * sg * sd * math.exp(lg - ld) / (t - pts[int(kk)]))
    return math.fsum(terms)


def kramer_reconstruct(kernel_gram, norms, samples) -> float:
    """sum_k f(t_k) <K(., t), K(., t_k)> / ||K(., t_k)||^2.

    ``kernel_gram[k]`` is the inner product of the kernel at the target t
    with the kernel at t_k, ``norms[k]`` the squared norm (or, for an
    indefinite form, the self product) of the kernel at t_k.
    """
    g = np.asarray(kernel_gram, dtype=float)
    n = np.asarray(norms, dtype=float)
    f = np.asarray(samples, dtype=float)
    if not (g.shape == n.shape == f.shape):
        raise ValueError("kernel_gram, norms and samples must have equal length")
    if f.size == 0:
        return 0.0
    if np.any(n == 0):
        raise ZeroDivisionError(f"kernel norm vanishes at sample {int(np.nonzero(n == 0)[0][0])}")
    return math.fsum(f * g / n)
