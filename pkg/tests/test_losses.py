import numpy as np
import pytest
from helpers import MANIFOLD_NAMES, gaussian_data, make_manifold, random_point
from oracles import central_hessian, sphere_log

from manifold_infer.core import fd_chart_gradient, fd_chart_hessian
from manifold_infer.errors import AntipodalSample, EmptyInput, NonFinite, ShapeMismatch
from manifold_infer.losses import (
    GaussianLocation,
    SphereBarycenter,
    chart_gradient,
    chart_hessian,
    loss_value,
    make_loss,
    per_sample_chart_gradients,
)
from manifold_infer.manifolds import Sphere, Stiefel


def _rel(a, b):
    return np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b))


def _barycenter_data(rng, center, n=25, spread=0.4):
    m = Sphere(center.size)
    ch = m.chart(center)
    return np.stack([ch.retract(spread * rng.standard_normal(m.dim)) for _ in range(n)])


def _models(rng):
    for name in MANIFOLD_NAMES:
        m = make_manifold(name)
        x = random_point(m, rng)
        yield name, GaussianLocation(m), x, gaussian_data(m, x, rng, scale=1.0)
    m = Sphere(3)
    x = random_point(m, rng)
    yield "barycenter", SphereBarycenter(m), x, _barycenter_data(rng, x)


def test_gaussian_value_examples():
    m = Sphere(3)
    th = np.array([0.0, 1.0, 0.0])
    model = GaussianLocation(m)
    assert loss_value(model, th, np.tile(th, (4, 1))) == 0.0
    assert loss_value(model, th, np.array([[0.0, 3.0, 0.0]])) == pytest.approx(2.0, abs=0)


def test_barycenter_value_examples():
    m = Sphere(3)
    th = np.array([0.0, 1.0, 0.0])
    model = SphereBarycenter(m)
    assert loss_value(model, th, np.tile(th, (4, 1))) == 0.0
    x = np.array([[1.0, 0.0, 0.0]])
    assert loss_value(model, th, x) == pytest.approx(0.5 * (np.pi / 2) ** 2, rel=1e-15)


def test_gaussian_gradient_zero_at_projected_mean(rng):
    m = Sphere(3)
    X = rng.standard_normal((50, 3)) + np.array([0.0, 2.0, 0.0])
    c = X.mean(axis=0) / np.linalg.norm(X.mean(axis=0))
    assert np.abs(chart_gradient(GaussianLocation(m), c, X)).max() <= 1e-12


def test_barycenter_gradient_zero_for_symmetric_pairs(rng):
    m = Sphere(3)
    c = np.array([0.0, 1.0, 0.0])
    ch = m.chart(c)
    X = []
    for _ in range(5):
        w = np.array([rng.uniform(0.1, 1.0), 0.0])
        X += [ch.retract(w), ch.retract(-w)]
    g = chart_gradient(SphereBarycenter(m), c, np.array(X))
    assert np.abs(g).max() <= 1e-12


def test_barycenter_gradient_is_mean_log(rng):
    m = Sphere(3)
    c = random_point(m, rng)
    X = _barycenter_data(rng, c)
    g = chart_gradient(SphereBarycenter(m), c, X)
    ref = -np.mean([sphere_log(c, x) for x in X], axis=0)
    np.testing.assert_allclose(g, m.chart(c).frame.T @ ref, atol=1e-12)


def test_per_sample_mean_equals_gradient(rng):
    for _, model, x, X in _models(rng):
        S = per_sample_chart_gradients(model, x, X)
        assert S.shape == (X.shape[0], model.manifold.dim)
        assert np.abs(S.mean(axis=0) - chart_gradient(model, x, X)).max() <= 1e-12


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(20):
        for name, model, x, X in _models(rng):
            ch = model.manifold.chart(x)
            f = lambda v: model.value(ch.retract(v), X)
            g = model.chart_gradient(x, X, chart=ch)
            assert _rel(g, fd_chart_gradient(f, ch.dim)) <= 1e-5, name
            H = model.chart_hessian(x, X, chart=ch)
            assert _rel(H, fd_chart_hessian(f, ch.dim)) <= 1e-4, name


def test_oracle_fd_agrees_with_package_fd(rng):
    m = Stiefel(4, 2)
    x = random_point(m, rng)
    X = gaussian_data(m, x, rng)
    ch = m.chart(x)
    f = lambda v: GaussianLocation(m).value(ch.retract(v), X)
    np.testing.assert_allclose(fd_chart_hessian(f, m.dim), central_hessian(f, m.dim), atol=1e-12)


def test_gaussian_sphere_hessian_identity_when_curvature_term_vanishes(rng):
    m = Sphere(3)
    x = random_point(m, rng)
    F = m.chart(x).frame
    X = x + rng.standard_normal((20, 2)) @ F.T
    X -= X.mean(axis=0) - x
    np.testing.assert_allclose(chart_hessian(GaussianLocation(m), x, X), np.eye(2), atol=1e-12)


def test_barycenter_hessian_identity_at_coincident_samples(rng):
    m = Sphere(3)
    c = random_point(m, rng)
    ch = m.chart(c)
    X = np.stack([ch.retract(1e-6 * rng.standard_normal(2)) for _ in range(10)])
    np.testing.assert_allclose(chart_hessian(SphereBarycenter(m), c, X), np.eye(2), atol=1e-8)
    # exactly coincident samples hit the analytic limit
    np.testing.assert_allclose(chart_hessian(SphereBarycenter(m), c, np.tile(c, (3, 1))), np.eye(2), atol=1e-10)


def test_barycenter_antipodal_sample():
    m = Sphere(3)
    c = np.array([0.0, 1.0, 0.0])
    with pytest.raises(AntipodalSample):
        chart_gradient(SphereBarycenter(m), c, np.array([[0.0, -1.0, 0.0]]))


def test_gaussian_translation_covariance(rng):
    for name in MANIFOLD_NAMES:
        m = make_manifold(name)
        model = GaussianLocation(m)
        x = random_point(m, rng)
        X = gaussian_data(m, x, rng)
        c = rng.standard_normal(m.ambient_shape)
        ch = m.chart(x)
        shift = model.chart_gradient(x, X + c, chart=ch) - model.chart_gradient(x, X, chart=ch)
        np.testing.assert_allclose(shift, -ch.grad_coords(c), atol=1e-12)


def test_data_validation():
    model = GaussianLocation(Sphere(3))
    with pytest.raises(EmptyInput):
        model.validate(np.zeros((0, 3)))
    with pytest.raises(ShapeMismatch):
        model.validate(np.zeros((4, 2)))
    with pytest.raises(NonFinite):
        model.validate(np.array([[np.nan, 0.0, 1.0]]))
    with pytest.raises(ValueError):
        SphereBarycenter(Sphere(3)).validate(np.array([[2.0, 0.0, 0.0]]))


def test_make_loss():
    assert isinstance(make_loss("gaussian", Sphere(3)), GaussianLocation)
    assert isinstance(make_loss("barycenter", Sphere(3)), SphereBarycenter)
    with pytest.raises(ValueError):
        make_loss("huber", Sphere(3))
    with pytest.raises(TypeError):
        SphereBarycenter(Stiefel(4, 2))


def test_pullback_derivatives_at_zero_match_chart(rng):
    for _, model, x, X in _models(rng):
        ch = model.manifold.chart(x)
        d = model.pullback_derivatives(ch, np.zeros(ch.dim), X)
        np.testing.assert_allclose(d.grad, model.chart_gradient(x, X, chart=ch), atol=1e-7)
        H = model.chart_hessian(x, X, chart=ch)
        assert _rel(d.hessian, H) <= 1e-5
