import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import problem, spectrum
from oracles import p0_oracle, trapezoid
from slsampling.hilbert import eigenvector, indefinite_inner_product, inner_product, quadrature_rule
from slsampling.problem import PolySegment, TableSegment
from slsampling.sampling import (SourceFunction, TransformSamples, canonical_derivative,
                                 canonical_product, canonical_product_log, default_probes,
                                 forward_transform, forward_transform_many, lagrange_sum,
                                 reconstruct, reconstruct_normalized, sample_transform,
                                 truncation_report)
from slsampling.shooting import omega

G_PARABOLA = SourceFunction.polynomial([0.0, 3.0, -1.0])  # x (3 - x)
ONE = SourceFunction.polynomial([1.0])
LAM0 = -4.936719732317599


def test_zero_source_transform(p0):
    assert forward_transform(p0, SourceFunction.zero(), 12.0) == 0.0


def test_constant_source_at_zero(p0):
    assert forward_transform(p0, ONE, 0.0) == pytest.approx(3.0, rel=1e-12)


def test_constant_source_at_lowest_eigenvalue(p0):
    F0 = forward_transform(p0, ONE, LAM0)
    assert F0 == pytest.approx(-0.003054939393802858, abs=1e-6)
    O = p0_oracle()
    brute = sum(trapezoid(lambda x: O.phi(x, LAM0), lo, lo + 1.0, 100001) for lo in (0.0, 1.0, 2.0))
    assert F0 == pytest.approx(brute, abs=1e-6)


def test_table_source_matches_polynomial(p0):
    x = np.linspace(0, 3, 3001)
    segs = tuple(TableSegment(x[(x >= lo - 1e-12) & (x <= hi + 1e-12)],
                              (lambda t: t * (3 - t))(x[(x >= lo - 1e-12) & (x <= hi + 1e-12)]))
                 for lo, hi in p0.bounds)
    g = SourceFunction(segs)
    assert forward_transform(p0, g, 7.0) == pytest.approx(forward_transform(p0, G_PARABOLA, 7.0), rel=1e-7)


def test_transform_of_eigenfunction_at_other_eigenvalues():
    # the weighted integral of phi_n phi_m (m != n) equals +(gamma^2/rho) R'_b R'_b + R_c1 R_c1 + delta R_c2 R_c2
    p = problem("p0")
    lams = spectrum("p0", 10).lambdas
    rule = quadrature_rule(p)
    n = 3
    Fn = eigenvector(p, lams[n], rule)
    for m in (0, 5, 8):
        Fm = eigenvector(p, lams[m], rule)
        integral = 0.5 * (inner_product(Fn, Fm, p, rule) + indefinite_inner_product(Fn, Fm, p, rule))
        w = (p.gamma ** 2 / p.rho, 1.0, p.delta)
        discrete = sum(a * b * c for a, b, c in zip(w, Fn.h, Fm.h))
        assert integral == pytest.approx(discrete, rel=1e-8, abs=1e-10)


def test_sample_transform_shape_and_fingerprint():
    p = problem("p0")
    sp = spectrum("p0", 30)
    s = sample_transform(p, G_PARABOLA, sp)
    assert s.N == 30 and np.all(np.isfinite(s.values))
    assert s.fingerprint == p.fingerprint()
    with pytest.raises(ValueError, match="different problem"):
        sample_transform(problem("qx"), G_PARABOLA, sp)


def test_transform_samples_validation():
    with pytest.raises(ValueError):
        TransformSamples(np.zeros(2), np.zeros(3), np.ones(2))
    with pytest.raises(ValueError):
        TransformSamples(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]))


def test_reconstruct_reproduces_nodes():
    p = problem("p0")
    s = sample_transform(p, G_PARABOLA, spectrum("p0", 30))
    for lam, v in zip(s.lambdas, s.values):
        assert reconstruct(s, p, lam) == v
        assert reconstruct(s, p, lam * (1 + 1e-11) + 1e-12) == v


def test_reconstruct_zero_source_and_empty():
    p = problem("p0")
    s = sample_transform(p, SourceFunction.zero(), spectrum("p0", 30))
    assert reconstruct(s, p, 2.5) == 0.0
    empty = TransformSamples(np.empty(0), np.empty(0), np.empty(0))
    assert reconstruct(empty, p, 2.5) == 0.0


def test_lagrange_sum_scale_invariance():
    rng = np.random.default_rng(4)
    lams = np.sort(rng.uniform(-5, 500, 50))
    vals, wp = rng.normal(size=50), rng.normal(size=50)
    for lam in rng.uniform(-5, 500, 20):
        a = lagrange_sum(lams, vals, wp, lam, 0.37)
        b = lagrange_sum(lams, vals, 1e3 * wp, lam, 1e3 * 0.37)
        assert b == pytest.approx(a, rel=1e-12, abs=1e-300)


def test_reconstruct_linearity():
    p = problem("real")
    sp = spectrum("real", 30)
    g1, g2 = G_PARABOLA, SourceFunction.polynomial([1.0, 0.0, 0.0, 0.2])
    combo = SourceFunction.polynomial([2.0, -1.5 * 3.0, 1.5, 0.4])  # 2 g2 - 1.5 g1
    s1, s2, s3 = (sample_transform(p, g, sp) for g in (g1, g2, combo))
    for lam in (0.3, 7.7, 44.0):
        a = reconstruct(s3, p, lam)
        b = 2 * reconstruct(s2, p, lam) - 1.5 * reconstruct(s1, p, lam)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-12)


def test_convergence_on_all_real_problem():
    p = problem("real")
    rep = truncation_report(p, G_PARABOLA, spectrum("real", 200))
    errs = [rep.max_rel[N] for N in rep.schedule]
    assert rep.trend_ok()
    assert errs[-1] < 1e-6
    assert all(v == 0.0 for v in rep.node_residuals.values())
    assert len(list(rep.rows())) == 25 * 4


def test_convergence_midway_probe_on_reference_problem():
    # the error at one probe between lam_0 and lam_1 decreases with N
    p = problem("p0")
    sp = spectrum("p0", 200)
    lam = 0.5 * (sp.lambdas[0] + sp.lambdas[1])
    exact = forward_transform(p, G_PARABOLA, lam)
    s = sample_transform(p, G_PARABOLA, sp)
    errs = [abs(reconstruct(s.truncated(N), p, lam) - exact) for N in (50, 100, 200)]
    assert errs[0] >= errs[1] * 0.95 and errs[1] >= errs[2] * 0.95


def test_truncation_report_checks_schedule():
    p = problem("p0")
    with pytest.raises(ValueError):
        truncation_report(p, G_PARABOLA, spectrum("p0", 30), N_schedule=(10, 50))
    with pytest.raises(ValueError):
        truncation_report(p, G_PARABOLA, spectrum("p0", 30), N_schedule=())


def test_canonical_product_basics():
    sp = spectrum("p0", 30)
    assert canonical_product(sp, 0.0) == 1.0
    for lam in sp.lambdas:
        assert canonical_product(sp, lam) == 0.0
    mids = 0.5 * (sp.lambdas[:-1] + sp.lambdas[1:])
    signs = np.sign([canonical_product(sp, m) for m in mids])
    assert np.all(signs[1:] == -signs[:-1])


def test_canonical_product_zero_eigenvalue_branch():
    lams = np.array([0.0, 2.0, 5.0])
    assert canonical_product(lams, 1.0) == pytest.approx(1.0 * (1 - 0.5) * (1 - 0.2))
    assert canonical_derivative(lams, 0) == pytest.approx(1.0)
    assert canonical_derivative(lams, 1) == pytest.approx(2.0 * (-0.5) * (1 - 0.4))
    assert canonical_product_log(lams, 1.0).factors == 3


def test_canonical_product_log_form_survives_overflow():
    lams = np.arange(1, 2001, dtype=float) ** 2 * 0.01
    lv = canonical_product_log(lams, -1e6)
    assert lv.sign == 1 and math.isfinite(lv.log_abs) and lv.log_abs > 709


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.5, 100.0), min_size=2, max_size=6, unique=True), st.integers(0, 5))
def test_canonical_derivative_matches_difference(lams, k):
    lams = np.sort(np.array(lams))
    if np.min(np.diff(lams)) < 1e-2:
        return
    k = k % lams.size
    h = 1e-6 * (1 + lams[k])
    fd = (canonical_product(lams, lams[k] + h) - canonical_product(lams, lams[k] - h)) / (2 * h)
    assert canonical_derivative(lams, k) == pytest.approx(fd, rel=1e-5, abs=1e-12)
    assert canonical_derivative(lams, k) != 0.0


def test_normalized_reconstruction_nodes_and_cross_check():
    p = problem("real")
    sp = spectrum("real", 400)
    s = sample_transform(p, G_PARABOLA, sp.truncated(25))
    for lam, v in zip(s.lambdas, s.values):
        assert reconstruct_normalized(s, sp, lam) == v
    probes = default_probes(sp, 10, 12)
    direct = forward_transform_many(p, G_PARABOLA, probes)
    a = np.array([reconstruct(s, p, x) for x in probes])
    b = np.array([reconstruct_normalized(s, sp, x) for x in probes])
    scale = np.max(np.abs(direct))
    trunc = np.max(np.abs(a - direct)) / scale
    assert np.max(np.abs(a - b)) / scale <= trunc


def test_normalized_requires_leading_nodes():
    p = problem("real")
    sp = spectrum("real", 30)
    s = sample_transform(p, G_PARABOLA, sp.truncated(10))
    with pytest.raises(ValueError):
        reconstruct_normalized(s, sp.truncated(5), 3.3)


def test_reconstruct_is_thread_count_independent():
    from slsampling._parallel import set_workers
    p = problem("real")
    sp = spectrum("real", 30)
    base = sample_transform(p, G_PARABOLA, sp).values
    try:
        set_workers(4)
        threaded = sample_transform(p, G_PARABOLA, sp).values
    finally:
        set_workers(1)
    assert np.array_equal(base, threaded)
