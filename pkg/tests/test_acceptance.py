"""Acceptance criteria, one test per criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from almost_s.catalog import flat_chart, round_sphere, standard_metric, standard_s_structure
from almost_s.chart import Field, Sampler, position_field, scalar_field
from almost_s.expr import DomainError, ExprSyntaxError, UnknownIdentifierError, parse, to_field
from almost_s.geometry import curvature
from almost_s.identities import IDENTITY_NAMES, run_suite
from almost_s.soliton import (
    PotentialFamily,
    VectorFieldFamily,
    classify,
    einstein_obstruction_witness,
    fit_soliton,
    grid_search,
    soliton_chain,
    soliton_residual,
)
from almost_s.structure import AXIOM_NAMES, axiom_residuals
from almost_s.warp import NonBasicWarpError, leaf_curvature_report, vertical_warp

import oracles

criterion = pytest.mark.criterion
SAMPLER = Sampler(200, 42)


def _line(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")


@criterion(1, "axiom suite on (n=2, p=2), 200 samples: every residual < 1e-8 in < 30 s")
def test_criterion_01_axioms():
    start = time.perf_counter()
    s = standard_s_structure(2, 2)
    res = axiom_residuals(s, SAMPLER.points(s.chart))
    elapsed = time.perf_counter() - start
    worst = {name: float(res[name].max()) for name in AXIOM_NAMES}
    ok = max(worst.values()) < 1e-8 and elapsed < 30
    _line(1, ok, f"max residual {max(worst.values()):.3e}, {elapsed:.2f} s")
    assert max(worst.values()) < 1e-8, worst
    assert elapsed < 30


@criterion(2, "identity suite < 1e-7 on (2,2), (1,1), (1,2)")
@pytest.mark.parametrize("n,p", [(2, 2), (1, 1), (1, 2)])
def test_criterion_02_identities(n, p):
    rep = run_suite(standard_s_structure(n, p), SAMPLER, tol=1e-7)
    worst = {name: rep.entries[name].max_abs for name in IDENTITY_NAMES}
    bad = {k: v for k, v in worst.items() if not v < 1e-7}
    _line(2, not bad, f"(n={n}, p={p}) failing: {bad or 'none'}")
    assert not bad, f"identities above 1e-7 on (n={n}, p={p}): {bad}"


@criterion(3, "curvature oracles: spheres within 1e-9, flat within 1e-12, finite-difference Ricci < 1e-5 relative")
def test_criterion_03_curvature_oracles():
    chart, g = round_sphere(2, 1.0)
    pts = Sampler(100, 42).points(chart)
    c2 = curvature(g, pts)
    err_ric = float(np.abs(c2.ricci - g.eval(pts)).max())
    err_s2 = float(np.abs(c2.scalar - 2.0).max())
    chart3, g3 = round_sphere(3, 1.0)
    err_s3 = float(np.abs(curvature(g3, Sampler(100, 42).points(chart3)).scalar - 6.0).max())
    flat_err = 0.0
    for m in (2, 3, 4):
        fc, fg = flat_chart(m)
        cf = curvature(fg, Sampler(50, 42).points(fc))
        flat_err = max(flat_err, *(float(np.abs(a).max()) for a in (cf.riemann, cf.ricci, cf.scalar)))
    rel = []
    for seed in range(3):
        np_fn, jet_fn = oracles.random_analytic_metric(seed)
        x = np.random.default_rng(1000 + seed).uniform(-1, 1, 3)
        ref = oracles.ricci_fd(np_fn, x)
        rel.append(float(np.abs(curvature(Field("metric", 3, jet_fn), x).ricci - ref).max() / np.abs(ref).max()))
    ok = max(err_ric, err_s2, err_s3) < 1e-9 and flat_err <= 1e-12 and max(rel) < 1e-5
    _line(3, ok, f"sphere {max(err_ric, err_s2, err_s3):.2e}, flat {flat_err:.2e}, FD rel {max(rel):.2e}")
    assert err_ric < 1e-9 and err_s2 < 1e-9 and err_s3 < 1e-9
    assert flat_err <= 1e-12
    assert max(rel) < 1e-5


@criterion(4, "leafwise on (n=1, p=2): K(xi1, xi2), Ric_F and second fundamental form < 1e-8")
def test_criterion_04_leafwise():
    rep = leaf_curvature_report(standard_s_structure(1, 2), SAMPLER)
    summ = rep.summary()
    ok = summ["sectional_max_abs"] < 1e-8 and summ["leaf_ricci_max_abs"] < 1e-8 and summ["second_fundamental_max"] < 1e-8
    _line(4, ok, str(summ))
    assert summ["sectional_max_abs"] < 1e-8
    assert summ["leaf_ricci_max_abs"] < 1e-8
    assert summ["second_fundamental_max"] < 1e-8
    assert rep.trusted


@criterion(5, "warping: zero warp < 1e-12, constant warp < 1e-9, composition < 1e-10, non-basic rejected")
def test_criterion_05_warping():
    s = standard_s_structure(1, 2)
    pts = Sampler(50, 42).points(s.chart)

    def diff(a, b):
        return max(float(np.abs(x - y).max()) for x, y in zip(a.jet(pts, 3).parts, b.jet(pts, 3).parts))

    zero = diff(vertical_warp(s.g, s, 0.0), s.g)
    const = 0.0
    for c in (-0.7, 0.4):
        a = curvature(vertical_warp(s.g, s, c), pts)
        b = curvature(standard_metric(1, 2, math.exp(2 * c)), pts)
        const = max(const, float(np.abs(a.riemann - b.riemann).max()), float(np.abs(a.ricci - b.ricci).max()))
    w1 = scalar_field(lambda x, y, z1, z2: (x * 0.8).sin() + y * 0.3, 4)
    w2 = scalar_field(lambda x, y, z1, z2: x * y * 0.5 - y.cos(), 4)
    both = scalar_field(lambda x, y, z1, z2: (x * 0.8).sin() + y * 0.3 + x * y * 0.5 - y.cos(), 4)
    comp = diff(vertical_warp(vertical_warp(s.g, s, w2), s, w1), vertical_warp(s.g, s, both))
    rejected = False
    try:
        vertical_warp(s.g, s, scalar_field(lambda x, y, z1, z2: z1.sin(), 4))
    except NonBasicWarpError:
        rejected = True
    ok = zero < 1e-12 and const < 1e-9 and comp < 1e-10 and rejected
    _line(5, ok, f"zero {zero:.2e}, constant {const:.2e}, composition {comp:.2e}, non-basic rejected {rejected}")
    assert zero < 1e-12
    assert const < 1e-9
    assert comp < 1e-10
    assert rejected


@criterion(6, "soliton residuals: flat radial < 1e-10, sphere lambda = -1 +- 1e-6, Gaussian lambda = 1/2 +- 1e-9, labels")
def test_criterion_06_solitons():
    fchart, fg = flat_chart(3)
    pts = SAMPLER.points(fchart)
    radial = max(float(np.abs(soliton_residual(fg, position_field(3, a), -a, pts)).max()) for a in (-1.5, 0.5, 2.0))
    fit_r = fit_soliton(VectorFieldFamily(fg, fchart, [position_field(3)], ["a"]), SAMPLER, start=[0.7, 0.0])

    schart, sg = round_sphere(2)
    fit_s = fit_soliton(VectorFieldFamily(sg, schart, []), SAMPLER)

    f = scalar_field(lambda x, y, z: (x * x + y * y + z * z) * 0.25, 3)
    fit_g = fit_soliton(PotentialFamily(fg, fchart, [], base=f), SAMPLER)

    labels = (
        classify(0.3) == "shrinking"
        and classify(0.0) == "steady"
        and classify(-2.0) == "expanding"
        and fit_s.classification == classify(fit_s.lam)
        and fit_g.classification == classify(-fit_g.lam)
    )
    ok = (radial < 1e-10 and fit_r.residual_norm < 1e-10 and abs(fit_s.lam + 1) < 1e-6
          and abs(fit_g.lam - 0.5) < 1e-9 and labels)
    _line(6, ok, f"radial {radial:.2e}, sphere lambda {fit_s.lam:.12f}, Gaussian lambda {fit_g.lam:.12f}")
    assert radial < 1e-10
    assert fit_r.residual_norm < 1e-10 and abs(fit_r.lam + fit_r.params[0]) < 1e-8
    assert fit_s.lam == pytest.approx(-1.0, abs=1e-6)
    assert fit_g.lam == pytest.approx(0.5, abs=1e-9)
    assert labels


@criterion(7, "no Reeb-span soliton on periodic (n=1, p=2): fit and 11^3 grid residual > 0.1 in < 5 min")
def test_criterion_07_no_reeb_soliton():
    start = time.perf_counter()
    s = standard_s_structure(1, 2, periodic=True)
    fam = VectorFieldFamily(s.g, s.chart, list(s.xi))
    fit = fit_soliton(fam, SAMPLER)
    grid = grid_search(fam, SAMPLER, k=11, bounds=(-2.0, 2.0))
    elapsed = time.perf_counter() - start
    ok = fit.residual_norm > 0.1 and grid.residual_norm > 0.1 and grid.cells == 11**3 and elapsed < 300
    _line(7, ok, f"fit {fit.residual_norm:.5f}, grid {grid.residual_norm:.5f}, {elapsed:.1f} s")
    assert fit.residual_norm > 0.1
    assert grid.cells == 11**3
    assert grid.residual_norm > 0.1
    assert elapsed < 300


@criterion(8, "chain: trace consistency < 1e-7 for 5 random (u, lambda) on (n=1, p=1)")
def test_criterion_08_chain():
    s = standard_s_structure(1, 1)
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(5):
        c = rng.uniform(-1, 1, 5)
        lam = float(rng.uniform(-2, 2))
        u = scalar_field(
            lambda x, y, z, c=c: (x * c[0]).sin() + y * y * c[1] + (z * c[2]).cos() + x * y * c[3] + c[4], 3
        )
        rep = soliton_chain(s, [u], lam, Sampler(50, 42))
        worst = max(worst, rep.max_abs("trace_consistency"))
    _line(8, worst < 1e-7, f"max trace-consistency residual {worst:.3e}")
    assert worst < 1e-7


@criterion(9, "Einstein obstruction witnesses on (n=2, p=2)")
def test_criterion_09_witness():
    rep = einstein_obstruction_witness(standard_s_structure(2, 2), SAMPLER)
    v = rep.values
    checks = {
        "nabla_xi_bar": v["nabla_xi_bar_max"] < 1e-8,
        "ric_xi_bar": v["ric_xi_bar_max_abs"] < 1e-7,
        "d_eta_bar_minus_pF": v["d_eta_bar_minus_pF_max"] < 1e-8,
        "d_eta_bar_min_norm": v["d_eta_bar_min_norm"] > 0.1,
        "ric_xi_xi_minus_2n": v["ric_xi_xi_minus_2n_max_abs"] < 1e-6,
    }
    _line(9, all(checks.values()), str({k: round(float(x), 12) for k, x in v.items() if np.isscalar(x)}))
    assert all(checks.values()), (checks, v)
    assert not rep.degenerate


@criterion(10, "parser: grammar examples, jets vs order-4 finite differences < 1e-7 on 50 points, exact offsets")
def test_criterion_10_parser():
    names = ("x1", "y1", "z1")
    parse("0.1*sin(x1)", names)
    offsets = {}
    for text, err in (("sin(q)", UnknownIdentifierError), ("1+*2", ExprSyntaxError)):
        with pytest.raises(err) as info:
            parse(text, names)
        offsets[text] = info.value.offset
    sq = to_field(parse("x1^2", names), names).jet(np.array([[3.0, 0.0, 0.0]]), 3)
    powers = (sq.value[0], sq.parts[1][0, 0], sq.parts[2][0, 0, 0], sq.parts[3][0, 0, 0, 0])
    with pytest.raises(DomainError):
        to_field(parse("log(x1)", names), names).eval(np.array([[-1.0, 0.0, 0.0]]))

    text = "0.1*sin(x1) + exp(0.3*y1)*cos(x1*z1) - z1^3/(2+y1^2)"
    field = to_field(parse(text, names), names)
    fn = lambda p: 0.1 * np.sin(p[0]) + np.exp(0.3 * p[1]) * np.cos(p[0] * p[2]) - p[2] ** 3 / (2 + p[1] ** 2)
    pts = np.random.default_rng(42).uniform(-1, 1, (50, 3))
    jet = field.jet(pts, 2)
    err = 0.0
    for i, x in enumerate(pts):
        grad = np.array([oracles.d_central(fn, x, k) for k in range(3)])
        hess = np.array([[oracles.d_central(lambda y: oracles.d_central(fn, y, b), x, a) for b in range(3)]
                         for a in range(3)])
        err = max(err, abs(jet.value[i] - fn(x)), np.abs(jet.parts[1][i] - grad).max(),
                  np.abs(jet.parts[2][i] - hess).max())
    ok = offsets == {"sin(q)": 4, "1+*2": 2} and powers == (9.0, 6.0, 2.0, 0.0) and err < 1e-7
    _line(10, ok, f"offsets {offsets}, x1^2 jet {powers}, FD error {err:.2e}")
    assert offsets == {"sin(q)": 4, "1+*2": 2}
    assert powers == (9.0, 6.0, 2.0, 0.0)
    assert err < 1e-7


@criterion(11, "determinism: two verify runs with identical argv give byte-identical reports")
def test_criterion_11_determinism():
    argv = [sys.executable, "-m", "almost_s.cli", "verify", "--structure", "standard-s", "--n", "2", "--p", "2",
            "--samples", "200", "--seed", "42", "--tol", "1e-7"]
    a = subprocess.run(argv, capture_output=True)
    b = subprocess.run(argv, capture_output=True)
    ok = a.returncode == b.returncode and a.returncode in (0, 1) and a.stdout == b.stdout and len(a.stdout) > 0
    _line(11, ok, f"exit codes {a.returncode}/{b.returncode}, {len(a.stdout)} bytes, identical {a.stdout == b.stdout}")
    assert a.returncode in (0, 1)
    assert a.stdout == b.stdout
    assert len(a.stdout) > 0
