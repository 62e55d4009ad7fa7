import numpy as np
import pytest

from almost_s import _core
from almost_s.catalog import flat_chart, round_sphere, standard_s_structure
from almost_s.chart import ChartError, DegenerateMetricError, Field, Sampler, constant_field, scalar_field
from almost_s.geometry import (
    check_metric,
    christoffel,
    covariant_derivative,
    curvature,
    divergence,
    exterior_derivative,
    hessian_laplacian,
    lie_derivative,
    orthonormal_frame,
    ricci_range,
    sectional,
)

import oracles


@pytest.fixture(scope="module")
def sphere2():
    chart, g = round_sphere(2, 1.0)
    return chart, g, Sampler(40, 7).points(chart)


def test_sphere_ricci_equals_metric(sphere2):
    _, g, pts = sphere2
    c = curvature(g, pts)
    np.testing.assert_allclose(c.ricci, g.eval(pts), atol=1e-9)
    np.testing.assert_allclose(c.scalar, 2.0, atol=1e-9)


@pytest.mark.parametrize("m,r", [(2, 1.0), (2, 2.0), (3, 1.0), (3, 0.5)])
def test_sphere_scalar_closed_form(m, r):
    chart, g = round_sphere(m, r)
    pts = Sampler(20, 1).points(chart)
    np.testing.assert_allclose(curvature(g, pts).scalar, oracles.sphere_scalar(m, r), atol=1e-9)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_flat_chart_has_zero_curvature(m):
    chart, g = flat_chart(m)
    c = curvature(g, Sampler(10).points(chart))
    assert np.abs(c.riemann).max() <= 1e-12
    assert np.abs(c.scalar).max() <= 1e-12


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ricci_matches_finite_difference_oracle(seed):
    np_fn, jet_fn = oracles.random_analytic_metric(seed)
    g = Field("metric", 3, jet_fn)
    x = np.random.default_rng(100 + seed).uniform(-1, 1, 3)
    ours = curvature(g, x).ricci
    ref = oracles.ricci_fd(np_fn, x)
    assert np.abs(ours - ref).max() / np.abs(ref).max() < 1e-5


def test_christoffel_matches_finite_differences():
    np_fn, jet_fn = oracles.random_analytic_metric(5)
    g = Field("metric", 3, jet_fn)
    x = np.array([0.1, -0.3, 0.5])
    np.testing.assert_allclose(christoffel(g, x), oracles.christoffel_fd(np_fn, x), atol=1e-9)


def test_riemann_symmetries_and_first_bianchi():
    _, jet_fn = oracles.random_analytic_metric(11)
    g = Field("metric", 3, jet_fn)
    pts = np.random.default_rng(4).uniform(-1, 1, (6, 3))
    c = curvature(g, pts)
    r = c.riemann
    np.testing.assert_allclose(r, -np.swapaxes(r, -1, -2), atol=1e-12)
    bianchi = r + np.einsum("...lijk->...lkij", r) + np.einsum("...ljki->...lkij", r)
    assert np.abs(bianchi).max() < 1e-12
    low = np.einsum("...al,...lkij->...akij", g.eval(pts), r)
    np.testing.assert_allclose(low, -np.swapaxes(low, -3, -4), atol=1e-12)
    np.testing.assert_allclose(c.ricci, np.swapaxes(c.ricci, -1, -2), atol=1e-12)


def test_backends_agree():
    s = standard_s_structure(2, 1)
    pts = Sampler(30).points(s.chart)
    a = curvature(s.g, pts, backend="python")
    if _core.compiled_curvature_arrays is None:
        pytest.skip("compiled kernel not built")
    b = curvature(s.g, pts, backend="cython")
    for x, y in zip((a.christoffel, a.riemann, a.ricci, a.scalar), (b.christoffel, b.riemann, b.ricci, b.scalar)):
        np.testing.assert_allclose(x, y, atol=1e-13)


def test_sectional_curvature_of_sphere(sphere2):
    _, g, pts = sphere2
    np.testing.assert_allclose(sectional(g, pts, [1.0, 0.0], [0.3, 1.0]), 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        sectional(g, pts, [1.0, 0.0], [2.0, 0.0])


def test_ricci_range_oracles(sphere2):
    _, g, pts = sphere2
    lo, hi = ricci_range(g, pts)
    assert lo == pytest.approx(1.0, abs=1e-9) and hi == pytest.approx(1.0, abs=1e-9)
    chart, g3 = round_sphere(3, 1.0)
    lo, hi = ricci_range(g3, Sampler(20).points(chart))
    assert lo == pytest.approx(2.0, abs=1e-9) and hi == pytest.approx(2.0, abs=1e-9)
    chart, gf = flat_chart(3)
    assert ricci_range(gf, Sampler(5).points(chart)) == (0.0, 0.0)


def test_d_squared_is_zero():
    f = scalar_field(lambda x, y, z: (x * y).sin() + z * z * x, 3)
    w = exterior_derivative(f, np.random.default_rng(0).uniform(-1, 1, (5, 3)))
    one = Field("one-form", 3, lambda x: [x[1] * x[2], (x[0] * x[2]).sin(), x[0] * x[0]])
    pts = np.random.default_rng(1).uniform(-1, 1, (5, 3))
    from almost_s.geometry import exterior_derivative_jet
    dd = exterior_derivative_jet(exterior_derivative_jet(one.jet(pts, 2), "one-form"), "two-form")
    assert np.abs(dd.value).max() < 1e-14
    df = exterior_derivative_jet(exterior_derivative_jet(f.jet(pts, 2), "scalar"), "one-form")
    assert np.abs(df.value).max() < 1e-14
    assert w.shape == (5, 3)


def test_killing_field_of_sphere(sphere2):
    _, g, pts = sphere2
    rot = constant_field("vector", [0.0, 1.0], 2)  # d/dphi
    np.testing.assert_allclose(lie_derivative(rot, g, pts), 0.0, atol=1e-14)


def test_hessian_symmetric_and_laplacian_of_linear_function():
    chart, g = flat_chart(3)
    f = scalar_field(lambda x, y, z: x * 2.0 - y + z * 0.5, 3)
    pts = Sampler(10).points(chart)
    hess, lap = hessian_laplacian(f, g, pts)
    assert np.abs(hess).max() == 0 and np.abs(lap).max() == 0
    q = scalar_field(lambda x, y, z: x * x + y * y + z * z, 3)
    hess, lap = hessian_laplacian(q, g, pts)
    np.testing.assert_allclose(lap, -6.0)  # Delta = -tr Hess


def test_divergence_is_frame_independent():
    s = standard_s_structure(1, 1)
    pts = Sampler(15, 3).points(s.chart)
    gv = s.g.eval(pts)
    v = Field("vector", 3, lambda x: [x[0] * x[1], x[2].sin(), x[0] * x[0]])
    d1 = divergence(v, s.g, pts)
    seeds = np.random.default_rng(9).standard_normal((len(pts), 3, 3))
    d2 = divergence(v, s.g, pts, frame=orthonormal_frame(gv, seeds))
    np.testing.assert_allclose(d1, d2, atol=1e-12)
    d3 = divergence(s.phi, s.g, pts)
    d4 = divergence(s.phi, s.g, pts, frame=orthonormal_frame(gv, seeds))
    np.testing.assert_allclose(d3, d4, atol=1e-12)


def test_covariant_derivative_of_metric_vanishes():
    s = standard_s_structure(1, 2)
    pts = Sampler(10).points(s.chart)
    for k in range(4):
        e = np.eye(4)[k]
        assert np.abs(covariant_derivative(s.g, e, s.g, pts)).max() < 1e-13


def test_degenerate_metric_rejected():
    with pytest.raises(DegenerateMetricError):
        check_metric(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(DegenerateMetricError):
        check_metric(np.array([[1.0, 2.0], [2.0, 1.0]]))
    bad = constant_field("metric", [[1.0, 0.0], [0.0, -1.0]], 2)
    with pytest.raises(DegenerateMetricError):
        curvature(bad, np.zeros(2))
    with pytest.raises(DegenerateMetricError):
        christoffel(bad, np.zeros(2))


def test_wrong_point_dimension():
    _, g = flat_chart(3)
    with pytest.raises(ChartError):
        curvature(g, np.zeros(2))
