"""Real zeros of the characteristic function.

Eigenvalues are located by a sign-change scan of the rescaled omega on a grid
built from the large-lam seed lattices

    (n + 1/2) pi / (c1 - a),   n pi / (c2 - c1),   (n + 1/2) pi / (b - c2)

(in s, lam = s^2).  Where two lattices collide the eigenvalues come in
tight pairs that no affordable grid separates, so every local minimum of
|omega| without a sign change is also probed by a bounded 1-D minimisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from ._parallel import pmap
from .problem import SpectralParameter, ValidatedProblem
from .shooting import DEFAULT_ATOL, DEFAULT_RTOL, omega_derivative, omega_rescaled

FAMILIES = ("A", "B", "C")


class SpectrumError(RuntimeError):
    pass


class RootCountShortfall(SpectrumError):
    def __init__(self, wanted: int, found: int, lam_max: float):
        super().__init__(f"found {found} of {wanted} eigenvalues below lam={lam_max:g}")
        self.wanted = wanted
        self.found = found


class DoubleRootError(SpectrumError):
    pass


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo: float
    f_hi: float


@dataclass(frozen=True)
class SpectrumEntry:
    lam: float
    omega_prime: float
    residual: float
    bracket: tuple[float, float]

    @property
    def s(self) -> SpectralParameter:
        return SpectralParameter(self.lam)


@dataclass
class Spectrum:
    entries: list[SpectrumEntry]
    fingerprint: str
    lambda_floor: float = -math.inf
    notes: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries])

    @property
    def omega_primes(self) -> np.ndarray:
        return np.array([e.omega_prime for e in self.entries])

    def truncated(self, n: int) -> "Spectrum":
        return Spectrum(self.entries[:n], self.fingerprint, self.lambda_floor, list(self.notes))


@dataclass(frozen=True)
class SolverSettings:
    tol_ode: float = DEFAULT_RTOL
    atol_ode: float = DEFAULT_ATOL
    tol_root: float = 1e-10
    bisect_width: float = 1e-3
    max_iter: int = 200
    dedup: float = 1e-7
    simplicity: float = 1e-6
    zero_value: float = 1e-13
    collision_refine: int = 8


DEFAULTS = SolverSettings()


# -- seeds ---------------------------------------------------------------------

def lattices(problem: ValidatedProblem, n_max: int) -> dict[str, np.ndarray]:
    n = np.arange(n_max + 1, dtype=float)
    return {
        "A": (n + 0.5) * np.pi / (problem.c1 - problem.a),
        "B": n * np.pi / (problem.c2 - problem.c1),
        "C": (n + 0.5) * np.pi / (problem.b - problem.c2),
    }


def asymptotic_seeds(problem: ValidatedProblem, n_max: int) -> list[float]:
    """Merged, sorted s-lattices for n = 0..n_max with coincident points merged."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return [s for s, _ in _merged(problem, n_max)]


def _merged(problem: ValidatedProblem, n_max: int, tol: float = 1e-9) -> list[tuple[float, int]]:
    """(seed, multiplicity) pairs; multiplicity > 1 marks a lattice collision."""
    pts = np.sort(np.concatenate(list(lattices(problem, n_max).values())))
    out: list[tuple[float, int]] = []
    for s in pts:
        if out and s - out[-1][0] <= tol * (1.0 + s):
            out[-1] = (out[-1][0], out[-1][1] + 1)
        else:
            out.append((float(s), 1))
    return out


def nearest_lattice(problem: ValidatedProblem, lam: float) -> tuple[float, str, int]:
    """(signed distance in s, family, index) of the closest lattice point.

    Negative lam has imaginary s; its distance is measured from s = 0 by
    magnitude and reported with the family of the closest point to 0.
    """
    s = math.sqrt(abs(lam))
    n_max = int(s * max(b - a for a, b in _lengths(problem)) / math.pi) + 2
    best = (math.inf, "A", 0)
    for fam, pts in lattices(problem, n_max).items():
        k = int(np.argmin(np.abs(pts - s)))
        d = s - float(pts[k])
        if abs(d) < abs(best[0]):
            best = (d, fam, k)
    return best


def _lengths(problem):
    return ((problem.a, problem.c1), (problem.c1, problem.c2), (problem.c2, problem.b))


# -- scanning ------------------------------------------------------------------

def _seed_grid(problem: ValidatedProblem, lo: float, hi: float, refine: int) -> np.ndarray:
    """Grid on [max(lo,0), hi] with <= 1/4 seed gap spacing, finer at collisions."""
    if hi <= 0:
        return np.empty(0)
    lmax = max(b - a for a, b in _lengths(problem))
    n_max = int(math.sqrt(hi) * lmax / math.pi) + 3
    merged = _merged(problem, n_max)
    seeds = np.array([s * s for s, _ in merged])
    mult = np.array([m for _, m in merged])
    knots = np.concatenate(([0.0], seeds))
    kmult = np.concatenate(([1], mult))
    knots, idx = np.unique(knots, return_index=True)
    kmult = kmult[idx]
    pieces = []
    for i in range(knots.size - 1):
        a, b = knots[i], knots[i + 1]
        if b < max(lo, 0.0) or a > hi:
            continue
        n = 4
        if kmult[i] > 1 or kmult[i + 1] > 1:
            n *= refine
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    if not pieces:
        return np.empty(0)
    g = np.concatenate(pieces)
    return g[(g >= lo) & (g <= hi)]


def _grid(problem, lam_min, lam_max, grid, refine):
    g = np.linspace(lam_min, lam_max, max(int(grid), 2))
    g = np.union1d(g, _seed_grid(problem, lam_min, lam_max, refine))
    if lam_min < 0:
        # no lattice below zero; space uniformly in sqrt(-lam), where omega
        # behaves like exp(sqrt(-lam) (b - a))
        t_hi = math.sqrt(-lam_min)
        t_lo = math.sqrt(-lam_max) if lam_max < 0 else 0.0
        dt = 0.15 / (problem.b - problem.a)
        t = np.linspace(t_lo, t_hi, max(64, int(math.ceil((t_hi - t_lo) / dt)) + 1))
        g = np.union1d(g, -t * t)
    return g


def _rescaled(problem, settings):
    def f(lam):
        return omega_rescaled(problem, lam, settings.tol_ode, settings.atol_ode)[0]
    return f


def scan_brackets(problem: ValidatedProblem, lambda_min: float, lambda_max: float,
                  grid: int = 2, settings: SolverSettings = DEFAULTS,
                  workers: Optional[int] = None) -> list[Bracket]:
    """Sign-change brackets of the rescaled omega on [lambda_min, lambda_max].

    Grid points where |omega| is negligible next to its neighbours are
    returned as degenerate brackets (lo == hi).
    """
    if not lambda_min < lambda_max:
        raise ValueError("lambda_min must be < lambda_max")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    xs = _grid(problem, lambda_min, lambda_max, grid, settings.collision_refine)
    f = _rescaled(problem, settings)
    fs = np.array(pmap(f, xs, workers))
    return _brackets_from_samples(xs, fs, f, settings)


def _brackets_from_samples(xs, fs, f, settings) -> list[Bracket]:
    out: list[Bracket] = []
    n = xs.size
    zero = np.zeros(n, dtype=bool)
    for i in range(n):
        nb = max(abs(fs[max(i - 1, 0)]), abs(fs[min(i + 1, n - 1)]))
        if nb > 0 and abs(fs[i]) < settings.zero_value * nb:
            zero[i] = True
    for i in range(n):
        if zero[i]:
            out.append(Bracket(xs[i], xs[i], fs[i], fs[i]))
    for i in range(n - 1):
        if zero[i] or zero[i + 1]:
            continue
        if fs[i] * fs[i + 1] < 0:
            out.append(Bracket(xs[i], xs[i + 1], fs[i], fs[i + 1]))
    # tight pairs hiding between grid points
    for i in range(1, n - 1):
        if zero[i - 1] or zero[i] or zero[i + 1]:
            continue
        sgn = np.sign(fs[i])
        if sgn == 0 or np.sign(fs[i - 1]) != sgn or np.sign(fs[i + 1]) != sgn:
            continue
        if not (abs(fs[i]) < abs(fs[i - 1]) and abs(fs[i]) <= abs(fs[i + 1])):
            continue
        lo, hi = xs[i - 1], xs[i + 1]
        res = minimize_scalar(lambda t: sgn * f(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * (1 + abs(xs[i])) + 1e-14 * (hi - lo),
                                       "maxiter": 200})
        fm = float(sgn * res.fun)
        if np.sign(fm) == -sgn:
            out.append(Bracket(lo, float(res.x), fs[i - 1], fm))
            out.append(Bracket(float(res.x), hi, fm, fs[i + 1]))
    out.sort(key=lambda b: (b.lo, b.hi))
    return out


# -- refinement ----------------------------------------------------------------

def _true_omega(problem, settings):
    def f(lam):
        w, ls = omega_rescaled(problem, lam, settings.tol_ode, settings.atol_ode)
        return w * math.exp(ls) if ls < 600 else w
    return f


def refine_root(problem: ValidatedProblem, bracket: Bracket,
                settings: SolverSettings = DEFAULTS) -> SpectrumEntry:
    """Bisection down to width 1e-3 (1+|lam|), then bracket-safeguarded secant."""
    f = _true_omega(problem, settings)
    lo, hi = float(bracket.lo), float(bracket.hi)
    if lo == hi:
        lam = lo
        flo = fhi = f(lam)
    else:
        flo, fhi = f(lo), f(hi)
        if flo * fhi > 0:
            raise ValueError(f"bracket [{lo}, {hi}] does not straddle a sign change")
        lam = _solve(f, lo, hi, flo, fhi, settings)
    w = f(lam)
    wp = omega_derivative(problem, lam, tol=settings.tol_ode, atol=settings.atol_ode)
    return SpectrumEntry(lam=lam, omega_prime=wp, residual=abs(w), bracket=(lo, hi))


def _solve(f, lo, hi, flo, fhi, settings) -> float:
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    it = 0
    while hi - lo > settings.bisect_width * (1 + max(abs(lo), abs(hi))):
        it += 1
        if it > settings.max_iter:
            raise SpectrumError(f"no convergence in bracket [{lo}, {hi}]")
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if flo * fm < 0:
            hi, fhi = mid, fm
        else:
            lo, flo = mid, fm
    # secant polish on the bracket ends (Illinois variant: an end kept twice
    # has its value halved, so both ends keep moving)
    side = 0
    while True:
        it += 1
        if it > settings.max_iter:
            raise SpectrumError(f"no convergence in bracket [{lo}, {hi}]")
        x = hi - fhi * (hi - lo) / (fhi - flo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0:
            return x
        eps = settings.tol_root * (1 + abs(x))
        if flo * fx < 0:
            step = hi - x
            hi, fhi = x, fx
            if side == -1:
                flo *= 0.5
            side = -1
        else:
            step = x - lo
            lo, flo = x, fx
            if side == 1:
                fhi *= 0.5
            side = 1
        if hi - lo <= eps:
            return x
        if step <= eps:
            # confirm the sign change across a tolerance-sized step
            probe = x - eps if side == -1 else x + eps
            fp = f(probe)
            if fp * fx <= 0:
                return x
            if side == -1:
                hi, fhi = probe, fp
            else:
                lo, flo = probe, fp


# -- full spectrum -------------------------------------------------------------

def find_floor(problem: ValidatedProblem, settings: SolverSettings = DEFAULTS,
               start: float = 0.0, width: float = 1.0, stable_windows: int = 3,
               workers: Optional[int] = None) -> float:
    """Lower search edge from a downward scan of doubling windows.

    Stops after ``stable_windows`` consecutive windows with no bracket and
    returns the bottom of the last one minus one more window.
    """
    hi = start
    w = width
    stable = 0
    for _ in range(60):
        lo = hi - w
        if scan_brackets(problem, lo, hi, 16, settings, workers):
            stable = 0
        else:
            stable += 1
            if stable >= stable_windows:
                return lo - 2 * w
        hi = lo
        w *= 2
    raise SpectrumError("omega keeps changing sign far below zero; no lower bound found")


def _certify(problem, entries, settings) -> list[SpectrumEntry]:
    out = []
    for e in entries:
        lo, hi = e.bracket
        if lo != hi:
            f = _true_omega(problem, settings)
            scale = max(abs(f(lo)), abs(f(hi))) / (hi - lo)
        else:
            scale = abs(e.omega_prime)
        if e.omega_prime == 0 or abs(e.omega_prime) <= settings.simplicity * scale:
            raise DoubleRootError(f"lam={e.lam!r} is not a simple zero (omega'={e.omega_prime:g})")
        out.append(e)
    return out


def _dedup(entries: list[SpectrumEntry], settings) -> list[SpectrumEntry]:
    entries = sorted(entries, key=lambda e: e.lam)
    out: list[SpectrumEntry] = []
    for e in entries:
        if out and abs(e.lam - out[-1].lam) <= settings.dedup * (1 + abs(e.lam)):
            prev = out[-1]
            touching = (prev.bracket[1] >= e.bracket[0]) or prev.bracket[0] == prev.bracket[1] \
                or e.bracket[0] == e.bracket[1]
            if not touching:
                raise DoubleRootError(f"two roots within {settings.dedup:g} at lam={e.lam!r}")
            if e.residual < prev.residual:
                out[-1] = e
            continue
        out.append(e)
    return out


def spectrum_in_window(problem: ValidatedProblem, lam_min: float, lam_max: float,
                       settings: SolverSettings = DEFAULTS, grid: int = 2,
                       workers: Optional[int] = None) -> list[SpectrumEntry]:
    brackets = scan_brackets(problem, lam_min, lam_max, grid, settings, workers)
    entries = pmap(lambda b: refine_root(problem, b, settings), brackets, workers)
    return _dedup(_certify(problem, entries, settings), settings)


def compute_spectrum(problem: ValidatedProblem, N: int, settings: SolverSettings = DEFAULTS,
                     lambda_floor: Optional[float] = None, lambda_cap: float = 1e9,
                     grid: int = 2, workers: Optional[int] = None) -> Spectrum:
    """The N lowest eigenvalues, each bracketed, refined and certified simple."""
    if N < 1:
        raise ValueError("N must be >= 1")
    floor = find_floor(problem, settings, workers=workers) if lambda_floor is None else lambda_floor
    lmax = max(b - a for a, b in _lengths(problem))
    # about three roots per pi in s for unit segments; start with a generous window
    s_guess = (N + 3) * math.pi / sum(1.0 / (b - a) for a, b in _lengths(problem)) + math.pi / lmax
    hi = min(max(s_guess * s_guess * 1.2, floor + 10.0, 10.0), lambda_cap)
    lo = floor
    found: list[SpectrumEntry] = []
    while True:
        found = _dedup(found + spectrum_in_window(problem, lo, hi, settings, grid, workers), settings)
        if len(found) >= N:
            break
        if hi >= lambda_cap:
            raise RootCountShortfall(N, len(found), hi)
        # overlap the windows so a tight pair at the old edge is seen whole
        lo, hi = hi - 0.05 * (hi - lo), min(lambda_cap, max(2.0 * hi, hi + 10.0))
    return Spectrum(found[:N], problem.fingerprint(), floor)
