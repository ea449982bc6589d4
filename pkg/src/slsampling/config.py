"""INI-style run configuration.

    [interval]      a, c1, c2, b
    [potential]     seg1, seg2, seg3 = poly:[c0, c1, ...] | table:path
    [boundary]      beta1, beta2, alpha1, alpha2, alpha1p, alpha2p
    [transmission]  delta, gamma
    [solver]        tol_ode, tol_root, n_eigs, lambda_min, lambda_max
                    (optional: atol_ode, grid, workers)
    [sampling]      g = poly:[...] | table:path (or g1, g2, g3 per segment),
                    probes = [...], n_schedule = [...]
    [omega]         grid = [...]  or  lambda_min, lambda_max, points
    [classical]     sigma, k_max, n_probes, seed, jitter
    [verify]        golden = path to a spectrum CSV, count, lambdas = [...]

Table files hold two comma- or whitespace-separated columns (x, value);
relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .eigensolve import SolverSettings
from .problem import PolySegment, PotentialSpec, ProblemSpec, TableSegment
from .sampling import SourceFunction


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ClassicalConfig:
    sigma: float = 1.0
    k_max: int = 200
    n_probes: int = 20
    seed: int = 0
    jitter: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemSpec
    settings: SolverSettings
    n_eigs: int = 30
    lambda_min: Optional[float] = None
    lambda_max: float = 1e9
    grid: int = 2
    workers: int = 1
    g: Optional[SourceFunction] = None
    probes: Optional[tuple[float, ...]] = None
    n_schedule: tuple[int, ...] = (25, 50, 100, 200)
    omega_grid: Optional[tuple[float, ...]] = None
    classical: ClassicalConfig = ClassicalConfig()
    golden: Optional[Path] = None
    verify_count: int = 10
    verify_lambdas: Optional[tuple[float, ...]] = None
    fingerprint: str = ""
    base_dir: Path = field(default=Path("."))


def _where(section: str, key: str) -> str:
    return f"[{section}] {key}"


def _float(cp, section, key, default=None, required=False) -> Optional[float]:
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"missing key {_where(section, key)}")
        return default
    raw = cp.get(section, key).strip()
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{_where(section, key)}: expected a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{_where(section, key)}: must be finite")
    return v


def _int(cp, section, key, default):
    v = _float(cp, section, key)
    if v is None:
        return default
    if v != int(v):
        raise ConfigError(f"{_where(section, key)}: expected an integer, got {v}")
    return int(v)


def _list(cp, section, key) -> Optional[list[float]]:
    if not cp.has_option(section, key):
        return None
    raw = cp.get(section, key).strip()
    try:
        v = json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(f"{_where(section, key)}: expected a list like [1, 2.5], got {raw!r}") from None
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{_where(section, key)}: expected a list of numbers")
    return [float(x) for x in v]


def read_table(path: Path) -> tuple[list[float], list[float]]:
    try:
        data = np.loadtxt(path, delimiter=None if path.suffix != ".csv" else ",",
                          comments="#", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"malformed table {path}: {exc}") from None
    if data.shape[1] < 2:
        raise ConfigError(f"table {path} needs two columns (x, value)")
    return data[:, 0].tolist(), data[:, 1].tolist()


def _segment(raw: str, where: str, base: Path):
    raw = raw.strip()
    kind, sep, body = raw.partition(":")
    kind = kind.strip().lower()
    if not sep:
        raise ConfigError(f"{where}: expected 'poly:[...]' or 'table:path', got {raw!r}")
    if kind == "poly":
        try:
            coeffs = json.loads(body)
        except json.JSONDecodeError:
            raise ConfigError(f"{where}: malformed coefficient list {body!r}") from None
        if not isinstance(coeffs, list) or not coeffs or not all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in coeffs):
            raise ConfigError(f"{where}: coefficients must be a nonempty list of numbers")
        return PolySegment(coeffs)
    if kind == "table":
        path = Path(body.strip())
        if not path.is_absolute():
            path = base / path
        x, y = read_table(path)
        return TableSegment(x, y)
    raise ConfigError(f"{where}: unknown segment kind {kind!r}")


def _segments(cp, section, keys, base):
    segs = []
    for k in keys:
        if not cp.has_option(section, k):
            raise ConfigError(f"missing key {_where(section, k)}")
        segs.append(_segment(cp.get(section, k), _where(section, k), base))
    return tuple(segs)


def _canonical(cp: configparser.ConfigParser) -> str:
    d = {s: dict(sorted(cp.items(s))) for s in sorted(cp.sections())}
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def parse_config(text: str, base_dir: Path = Path("."), source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not cp.sections():
        raise ConfigError(f"{source}: empty configuration")
    for sec in ("interval", "boundary", "transmission"):
        if not cp.has_section(sec):
            raise ConfigError(f"{source}: missing section [{sec}]")

    geo = {k: _float(cp, "interval", k, required=True) for k in ("a", "c1", "c2", "b")}
    bnd = {k: _float(cp, "boundary", k, required=True)
           for k in ("beta1", "beta2", "alpha1", "alpha2", "alpha1p", "alpha2p")}
    trn = {k: _float(cp, "transmission", k, required=True) for k in ("delta", "gamma")}
    if cp.has_section("potential"):
        q = PotentialSpec(_segments(cp, "potential", ("seg1", "seg2", "seg3"), base_dir))
    else:
        q = PotentialSpec.zero()
    spec = ProblemSpec(**geo, **bnd, **trn, q=q)

    defaults = SolverSettings()
    tol_ode = _float(cp, "solver", "tol_ode", defaults.tol_ode)
    atol_ode = _float(cp, "solver", "atol_ode", defaults.atol_ode)
    tol_root = _float(cp, "solver", "tol_root", defaults.tol_root)
    for name, v in (("tol_ode", tol_ode), ("atol_ode", atol_ode), ("tol_root", tol_root)):
        if not v > 0:
            raise ConfigError(f"{_where('solver', name)}: tolerance must be positive")
    settings = SolverSettings(tol_ode=tol_ode, atol_ode=atol_ode, tol_root=tol_root)
    n_eigs = _int(cp, "solver", "n_eigs", 30)
    if n_eigs < 1:
        raise ConfigError(f"{_where('solver', 'n_eigs')}: N must be >= 1")
    lambda_min = _float(cp, "solver", "lambda_min")
    lambda_max = _float(cp, "solver", "lambda_max", 1e9)
    if lambda_min is not None and not lambda_min < lambda_max:
        raise ConfigError("[solver] lambda_min must be < lambda_max")
    grid = _int(cp, "solver", "grid", 2)
    workers = _int(cp, "solver", "workers", 1)
    if grid < 2:
        raise ConfigError(f"{_where('solver', 'grid')}: must be >= 2")

    g = None
    if cp.has_section("sampling"):
        if cp.has_option("sampling", "g"):
            seg = _segment(cp.get("sampling", "g"), _where("sampling", "g"), base_dir)
            g = SourceFunction((seg, seg, seg))
        elif any(cp.has_option("sampling", k) for k in ("g1", "g2", "g3")):
            g = SourceFunction(_segments(cp, "sampling", ("g1", "g2", "g3"), base_dir))
    probes = _list(cp, "sampling", "probes")
    sched = _list(cp, "sampling", "n_schedule")
    if sched is not None:
        if not sched or any(n < 1 or n != int(n) for n in sched):
            raise ConfigError("[sampling] n_schedule: positive integers required")
        sched = tuple(sorted(int(n) for n in sched))

    omega_grid = _list(cp, "omega", "grid")
    if omega_grid is None and cp.has_section("omega"):
        lo = _float(cp, "omega", "lambda_min", required=True)
        hi = _float(cp, "omega", "lambda_max", required=True)
        n = _int(cp, "omega", "points", 201)
        if n < 1:
            raise ConfigError("[omega] points must be >= 1")
        omega_grid = np.linspace(lo, hi, n).tolist() if n > 1 else [lo]

    cl = ClassicalConfig()
    if cp.has_section("classical"):
        cl = ClassicalConfig(
            sigma=_float(cp, "classical", "sigma", cl.sigma),
            k_max=_int(cp, "classical", "k_max", cl.k_max),
            n_probes=_int(cp, "classical", "n_probes", cl.n_probes),
            seed=_int(cp, "classical", "seed", cl.seed),
            jitter=_float(cp, "classical", "jitter", cl.jitter))
        if not cl.sigma > 0:
            raise ConfigError("[classical] sigma must be positive")

    golden = None
    if cp.has_option("verify", "golden"):
        golden = Path(cp.get("verify", "golden").strip())
        if not golden.is_absolute():
            golden = base_dir / golden
    verify_count = _int(cp, "verify", "count", 10)
    verify_lambdas = _list(cp, "verify", "lambdas")

    return RunConfig(
        problem=spec, settings=settings, n_eigs=n_eigs, lambda_min=lambda_min,
        lambda_max=lambda_max, grid=grid, workers=workers, g=g,
        probes=tuple(probes) if probes is not None else None,
        n_schedule=sched or RunConfig.n_schedule,
        omega_grid=tuple(omega_grid) if omega_grid is not None else None,
        classical=cl, golden=golden, verify_count=verify_count,
        verify_lambdas=tuple(verify_lambdas) if verify_lambdas is not None else None,
        fingerprint=hashlib.sha256(_canonical(cp).encode()).hexdigest()[:16],
        base_dir=base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent, str(path))
