"""Command-line front end.

    slsampling {eigs,omega,transform,reconstruct,verify,classical}
               --config FILE [--out DIR] [--format csv|json] [--threads N]

Exit codes: 0 success, 1 numerical failure (or a failed verification),
2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import classical as cl
from ._parallel import set_workers
from .config import ConfigError, RunConfig, load_config
from .eigensolve import SpectrumError, compute_spectrum, nearest_lattice
from .hilbert import orthogonality_matrix
from .problem import ProblemError, SpectralParameter, ValidatedProblem, validate
from .sampling import (default_probes, forward_transform_many, truncation_report)
from .shooting import (IntegrationError, boundary_residuals, omega, omega_chain,
                       omega_derivative, omega_rescaled, proportionality, shoot_left,
                       shoot_right, transmission_residuals, wronskian_on_grid)

UNITS = "lambda in 1/length^2, s in 1/length, x in length"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


class Writer:
    """Writes tables as CSV (header comment + column row) or JSON."""

    def __init__(self, out: Path, fmt: str, cfg: RunConfig, problem: Optional[ValidatedProblem]):
        self.out = out
        self.fmt = fmt
        self.meta = {"config_fingerprint": cfg.fingerprint,
                     "problem_fingerprint": problem.fingerprint() if problem else "",
                     "units": UNITS}
        out.mkdir(parents=True, exist_ok=True)

    def table(self, stem: str, columns: Sequence[str], rows: Iterable[Sequence], fmt: Optional[str] = None,
              extra: Optional[dict] = None) -> Path:
        fmt = fmt or self.fmt
        rows = [list(r) for r in rows]
        if fmt == "json":
            doc = dict(self.meta, **(extra or {}))
            doc["columns"] = list(columns)
            doc["rows"] = [[_json_value(v) for v in r] for r in rows]
            return self.document(stem, doc)
        path = self.out / f"{stem}.csv"
        buf = io.StringIO()
        buf.write("# " + ", ".join(f"{k}={v}" for k, v in self.meta.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        path.write_bytes(buf.getvalue().encode())
        return path

    def document(self, stem: str, doc: dict) -> Path:
        path = self.out / f"{stem}.json"
        doc = dict(self.meta, **doc)
        path.write_bytes((json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n").encode())
        return path


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _spectrum(cfg: RunConfig, problem: ValidatedProblem, n: int):
    return compute_spectrum(problem, n, cfg.settings, lambda_floor=cfg.lambda_min,
                            lambda_cap=cfg.lambda_max, grid=cfg.grid)


def _s_text(lam: float) -> str:
    sp = SpectralParameter(lam)
    return _fmt(sp.magnitude) + ("j" if sp.imaginary else "")


# -- commands --------------------------------------------------------------------

def cmd_eigs(cfg: RunConfig, problem: ValidatedProblem, w: Writer) -> int:
    spec = _spectrum(cfg, problem, cfg.n_eigs)
    rows = []
    for n, e in enumerate(spec):
        d, fam, _ = nearest_lattice(problem, e.lam)
        rows.append([n, e.lam, _s_text(e.lam), e.omega_prime, e.residual, d, fam])
    path = w.table("spectrum", ["n", "lambda_n", "s_n", "omega_prime", "residual",
                                "nearest_lattice", "lattice_family"], rows,
                   extra={"lambda_floor": spec.lambda_floor})
    print(f"eigs: {len(rows)} eigenvalues -> {path}")
    return 0


def _omega_grid(cfg: RunConfig) -> list[float]:
    if cfg.omega_grid is not None:
        grid = list(cfg.omega_grid)
    elif cfg.lambda_min is not None and math.isfinite(cfg.lambda_max) and cfg.lambda_max < 1e9:
        grid = np.linspace(cfg.lambda_min, cfg.lambda_max, 201).tolist()
    else:
        grid = []
    if not grid:
        raise ConfigError("omega: empty grid (set [omega] grid or lambda_min/lambda_max/points)")
    return grid


def cmd_omega(cfg: RunConfig, problem: ValidatedProblem, w: Writer) -> int:
    rows = []
    for lam in _omega_grid(cfg):
        wt, ls = omega_rescaled(problem, lam, cfg.settings.tol_ode, cfg.settings.atol_ode)
        rows.append([lam, omega(problem, lam, cfg.settings.tol_ode, cfg.settings.atol_ode), wt, ls])
    path = w.table("omega", ["lambda", "omega", "omega_rescaled", "log_scale"], rows)
    print(f"omega: {len(rows)} points -> {path}")
    return 0


def _need_g(cfg: RunConfig):
    if cfg.g is None:
        raise ConfigError("missing key [sampling] g")
    return cfg.g


def cmd_transform(cfg: RunConfig, problem: ValidatedProblem, w: Writer) -> int:
    g = _need_g(cfg)
    lams = list(cfg.probes) if cfg.probes is not None else (
        list(cfg.omega_grid) if cfg.omega_grid is not None else [])
    if not lams:
        raise ConfigError("transform: no lambda values ([sampling] probes or [omega] grid)")
    vals = forward_transform_many(problem, g, lams, tol=cfg.settings.tol_ode, atol=cfg.settings.atol_ode)
    path = w.table("transform", ["lambda", "F"], zip(lams, vals))
    print(f"transform: {len(lams)} values -> {path}")
    return 0


def cmd_reconstruct(cfg: RunConfig, problem: ValidatedProblem, w: Writer) -> int:
    g = _need_g(cfg)
    sched = list(cfg.n_schedule)
    spec = _spectrum(cfg, problem, max(sched))
    probes = np.asarray(cfg.probes) if cfg.probes is not None else default_probes(spec, 25, sched[0] // 2)
    rep = truncation_report(problem, g, spec, probes, sched, tol=cfg.settings.tol_ode,
                            atol=cfg.settings.atol_ode)
    by_n: dict[int, list] = {N: [] for N in sched}
    for N, lam, d, r, ae, re in rep.rows():
        by_n[N].append([lam, d, r, ae, re, rep.node_residuals[N]])
    for N in sched:
        w.table(f"reconstruct_N{N}", ["probe", "direct", "reconstructed", "abs_err", "rel_err",
                                      "node_residual"], by_n[N])
    summary = {"schedule": sched, "error_scale": rep.scale, "trend_ok": rep.trend_ok(),
               "per_N": [{"N": N, "max_rel": rep.max_rel[N], "mean_rel": rep.mean_rel[N],
                          "node_residual": rep.node_residuals[N]} for N in sched]}
    path = w.document("reconstruct_summary", summary)
    for N in sched:
        print(f"reconstruct: N={N} max_rel={rep.max_rel[N]:.3e} node_residual={rep.node_residuals[N]:.1e}")
    print(f"reconstruct: trend {'ok' if rep.trend_ok() else 'NOT monotone'} -> {path}")
    return 0


def read_golden(path: Path) -> list[float]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read golden spectrum {path}: {exc}") from None
    if path.suffix == ".json":
        doc = json.loads(text)
        col = doc["columns"].index("lambda_n")
        return [float(r[col]) for r in doc["rows"]]
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or "lambda_n" not in reader.fieldnames:
        raise ConfigError(f"golden spectrum {path} lacks a lambda_n column")
    return [float(r["lambda_n"]) for r in reader]


def verification_checks(cfg: RunConfig, problem: ValidatedProblem) -> list[dict]:
    """(name, measured, limit, passed, gate) records for the invariant suite."""
    tol, atol = cfg.settings.tol_ode, cfg.settings.atol_ode
    checks = []

    def add(name, measured, limit, gate=True):
        checks.append({"check": name, "measured": float(measured), "limit": float(limit),
                       "passed": bool(measured <= limit), "gate": gate})

    probes = list(cfg.verify_lambdas) if cfg.verify_lambdas else [-5.0, 0.0, 1.0, 10.0, 100.0]
    wr = ch = tr = br = 0.0
    for lam in probes:
        phi = shoot_left(problem, lam, tol, atol=atol)
        chi = shoot_right(problem, lam, tol, atol=atol)
        for i in (1, 2, 3):
            W = wronskian_on_grid(phi, chi, i)
            ref = W[0]
            wr = max(wr, float(np.max(np.abs(W - ref))) / (1 + abs(ref)))
        w1, w2, w3 = omega_chain(problem, lam, tol, atol)
        ch = max(ch, max(abs(w1 - w2), abs(w1 - w3)) / (1 + abs(w1)))
        for sol in (phi, chi):
            scale = 1 + max(max(abs(s.u).max(), abs(s.up).max()) for s in sol.segments) * (1 + abs(lam))
            tr = max(tr, max(abs(r) for r in transmission_residuals(sol, problem)) / scale)
        b1, _ = boundary_residuals(phi, problem)
        _, b2 = boundary_residuals(chi, problem)
        br = max(br, max(abs(b1), abs(b2)) / (1 + abs(lam)) / (1 + phi.max_abs() + chi.max_abs()))
    add("wronskian_constancy", wr, 1e-9)
    add("omega_chain", ch, 1e-9)
    add("transmission_residuals", tr, 1e-10)
    add("boundary_residuals", br, 1e-12)

    if cfg.golden is not None:
        lams = read_golden(cfg.golden)[:cfg.verify_count]
        source = f"golden:{cfg.golden.name}"
    else:
        lams = _spectrum(cfg, problem, cfg.verify_count).lambdas.tolist()
        source = "computed"
    if len(lams) < 2:
        raise ConfigError("verify needs at least two eigenvalues")
    root = 0.0
    cov = 0.0
    for lam in lams:
        wp = omega_derivative(problem, lam, tol=tol, atol=atol)
        root = max(root, abs(omega(problem, lam, tol, atol) / wp) / (1 + abs(lam)))
        cov = max(cov, proportionality(shoot_left(problem, lam, tol, atol=atol),
                                       shoot_right(problem, lam, tol, atol=atol))[1])
    add(f"eigen_residual[{source}]", root, 1e-8)
    add(f"proportionality_cov[{source}]", cov, 1e-6)
    n = len(lams)
    signed = orthogonality_matrix(problem, lams, n, signed=True)
    plain = orthogonality_matrix(problem, lams, n, signed=False)
    off = lambda G: float(np.max(np.abs(G - np.diag(np.diag(G)))))
    add(f"orthogonality_signed[{source}]", off(signed), 1e-6)
    add(f"orthogonality_positive_form[{source}]", off(plain), 1e-6, gate=False)
    return checks


def cmd_verify(cfg: RunConfig, problem: ValidatedProblem, w: Writer) -> int:
    checks = verification_checks(cfg, problem)
    rows = [[c["check"], c["measured"], c["limit"],
             "pass" if c["passed"] else ("FAIL" if c["gate"] else "info")] for c in checks]
    path = w.table("verify", ["check", "measured", "limit", "status"], rows)
    for r in rows:
        print(f"{r[3]:4s} {r[0]}: {r[1]:.3e} (limit {r[2]:.0e})")
    failed = [c for c in checks if c["gate"] and not c["passed"]]
    print(f"verify: {'FAILED' if failed else 'all gated checks passed'} -> {path}")
    return 1 if failed else 0


def _bandlimited(sigma: float):
    """sinc(sigma t) + 0.5 sinc(sigma (t - 2.3)), band sigma."""
    return lambda t: (np.sinc(sigma * np.asarray(t) / math.pi)
                      + 0.5 * np.sinc(sigma * (np.asarray(t) - 2.3) / math.pi))


def cmd_classical(cfg: RunConfig, problem, w: Writer) -> int:
    c = cfg.classical
    f = _bandlimited(c.sigma)
    s = cl.BandlimitedSamples.on_grid(c.sigma, f, -c.k_max, c.k_max)
    rng = np.random.default_rng(c.seed)
    span = 5.0 * math.pi / c.sigma
    probes = np.sort(rng.uniform(-span, span, c.n_probes))
    rows = []
    for t in probes:
        ft = float(f(t))
        a, b = cl.wks_reconstruct(s, t), cl.levinson_reconstruct(s, t)
        rows.append([t, ft, a, b, abs(a - ft), abs(b - ft), abs(a - b)])
    node_err = max(abs(cl.wks_reconstruct(s, t) - v) for t, v in zip(s.points, s.values))
    bound = math.pi / (4 * c.sigma)
    jit = cl.BandlimitedSamples.nonuniform(
        c.sigma, s.ks, s.points + c.jitter * bound * rng.uniform(-1, 1, s.ks.size), s.values)
    lev_node = max(abs(cl.levinson_reconstruct(jit, t) - v) for t, v in zip(jit.points, jit.values))
    try:
        bad = s.points.copy()
        bad[len(bad) // 2 + 1] += bound
        cl.BandlimitedSamples.nonuniform(c.sigma, s.ks, bad, s.values)
        rejected = False
    except cl.LevinsonBoundError:
        rejected = True
    extra = {"wks_node_error": node_err, "levinson_jittered_node_error": lev_node,
             "levinson_bound": bound, "bound_violation_rejected": rejected}
    path = w.table("classical", ["t", "f", "wks", "levinson", "wks_err", "levinson_err",
                                 "wks_vs_levinson"], rows, extra=extra)
    if w.fmt == "csv":
        w.document("classical_summary", extra)
    print(f"classical: max |wks-f|={max(r[4] for r in rows):.3e} "
          f"max |lev-f|={max(r[5] for r in rows):.3e} max |wks-lev|={max(r[6] for r in rows):.3e}")
    print(f"classical: node error {node_err:.1e}; bound violation rejected: {rejected} -> {path}")
    return 0


COMMANDS = {"eigs": cmd_eigs, "omega": cmd_omega, "transform": cmd_transform,
            "reconstruct": cmd_reconstruct, "verify": cmd_verify, "classical": cmd_classical}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slsampling", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="problem/run configuration (INI)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default from config)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        problem = validate(cfg.problem)
    except (ConfigError, ProblemError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    set_workers(args.threads if args.threads is not None else cfg.workers)
    try:
        w = Writer(Path(args.out), args.format, cfg, problem)
        return COMMANDS[args.command](cfg, problem, w)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationError, SpectrumError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    finally:
        set_workers(1)


if __name__ == "__main__":
    sys.exit(main())
