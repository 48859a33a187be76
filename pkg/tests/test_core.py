import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manifold_infer.core import (
    Flag,
    OrthoAnchor,
    fd_chart_gradient,
    fd_chart_hessian,
    fd_jacobian,
    fd_second_derivatives,
    fix_signs,
    ortho_complement,
    pinv_solve,
    pinv_sym,
)
from manifold_infer.errors import AnchorMismatch, NonFinite, RankDeficient
from manifold_infer.manifolds import FixedRank, ManifoldDescriptor, RankOneTensor, Sphere, Stiefel


def test_ortho_complement_basic_vector():
    e1 = np.array([[1.0], [0.0]])
    F = ortho_complement(e1, e1)
    np.testing.assert_allclose(F, [[0.0], [1.0]], atol=1e-15)


def test_ortho_complement_random_near_anchor(rng):
    A0 = rng.standard_normal((5, 2))
    for _ in range(10):
        A = A0 + 0.05 * rng.standard_normal((5, 2))
        F = ortho_complement(A, A0)
        assert F.shape == (5, 3)
        assert np.abs(A.T @ F).max() <= 1e-12
        assert np.abs(F.T @ F - np.eye(3)).max() <= 1e-12


def test_ortho_complement_follows_weighted_recipe(rng):
    # the complement spans the top left singular space of the projected weighted frame
    A0 = rng.standard_normal((6, 2))
    A = A0 + 0.1 * rng.standard_normal((6, 2))
    anchor = OrthoAnchor.from_matrix(A0)
    np.testing.assert_allclose(
        anchor.weighted, np.hstack([anchor.u0, anchor.u0_perp]) @ np.diag([6.0, 5, 4, 3, 2, 1]), atol=1e-15
    )
    Ua = np.linalg.svd(A, full_matrices=False)[0]
    M = (np.eye(6) - Ua @ Ua.T) @ anchor.weighted
    ref = np.linalg.svd(M)[0][:, :4]
    F = ortho_complement(A, anchor)
    np.testing.assert_allclose(F @ F.T, ref @ ref.T, atol=1e-12)
    # same column directions up to sign
    np.testing.assert_allclose(np.abs(np.sum(F * ref, axis=0)), 1.0, atol=1e-10)


def test_anchor_own_complement_has_positive_largest_entries(rng):
    A0 = rng.standard_normal((5, 2))
    F = ortho_complement(A0, A0)
    idx = np.argmax(np.abs(F), axis=0)
    assert np.all(F[idx, np.arange(F.shape[1])] > 0)


def test_ortho_complement_continuity(rng):
    worst = 0.0
    for _ in range(20):
        A0 = rng.standard_normal((5, 2))
        A = A0 + 0.05 * rng.standard_normal((5, 2))
        D = rng.standard_normal((5, 2))
        D *= 1e-6 / np.linalg.norm(D)
        F1 = ortho_complement(A, A0)
        F2 = ortho_complement(A + D, A0)
        worst = max(worst, np.linalg.norm(F1 - F2) / 1e-6)
    assert worst <= 1e3


def test_ortho_complement_errors():
    A0 = np.eye(4)[:, :2]
    with pytest.raises(AnchorMismatch):
        ortho_complement(np.eye(4)[:, :3], A0)
    with pytest.raises(RankDeficient):
        ortho_complement(np.zeros((4, 2)), A0)
    with pytest.raises(AnchorMismatch):
        ortho_complement(np.eye(2), np.eye(2))


def test_fix_signs():
    M = np.array([[1.0, -3.0], [-2.0, 1.0]])
    out = fix_signs(M)
    np.testing.assert_array_equal(out, [[-1.0, 3.0], [2.0, -1.0]])


def test_pinv_solve_identity():
    np.testing.assert_allclose(pinv_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_pinv_solve_singular():
    np.testing.assert_allclose(pinv_solve(np.diag([2.0, 0.0]), [4.0, 5.0]), [2.0, 0.0], atol=1e-15)


def test_pinv_solve_threshold():
    np.testing.assert_allclose(pinv_solve(np.diag([1.0, 1e-15]), [1.0, 1.0], rcond=1e-12), [1.0, 0.0])


def test_pinv_solve_nonfinite():
    with pytest.raises(NonFinite):
        pinv_solve(np.array([[np.nan, 0.0], [0.0, 1.0]]), [1.0, 1.0])
    with pytest.raises(NonFinite):
        pinv_solve(np.eye(2), [np.inf, 1.0])


def test_pinv_sym_rank():
    _, r = pinv_sym(np.diag([3.0, 1.0, 0.0]))
    assert r == 2


@given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=1, max_value=6))
def test_pinv_solve_inverts_well_conditioned(seed, p):
    rng = np.random.default_rng(seed)
    Q = np.linalg.qr(rng.standard_normal((p, p)))[0]
    lam = np.exp(rng.uniform(0.0, np.log(1e8), p)) * rng.choice([-1.0, 1.0], p)
    lam[0] = np.sign(lam[0])
    H = (Q * lam) @ Q.T
    v = rng.standard_normal(p)
    x = pinv_solve(H, H @ v)
    assert np.linalg.norm(x - v) <= 1e-8 * np.linalg.norm(v)


def test_fd_quadratic():
    f = lambda v: float(v @ v)
    np.testing.assert_allclose(fd_chart_gradient(f, 2), [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(fd_chart_hessian(f, 2), 2 * np.eye(2), atol=1e-8)


def test_fd_linear():
    np.testing.assert_allclose(fd_chart_gradient(lambda v: float(v[0]), 3), [1.0, 0.0, 0.0], atol=1e-10)


def test_fd_vector_maps_match_batched():
    F = lambda v: np.array([np.sin(v[0]) * v[1], v[0] ** 2 + np.exp(v[1])])
    many = lambda V: np.stack([F(v) for v in V])
    v = np.array([0.3, -0.2])
    J = fd_jacobian(F, v)
    ref = np.array([[np.cos(0.3) * -0.2, np.sin(0.3)], [0.6, np.exp(-0.2)]])
    np.testing.assert_allclose(J, ref, atol=1e-8)
    np.testing.assert_array_equal(J, fd_jacobian(F, v, many=many))
    D2 = fd_second_derivatives(F, v)
    np.testing.assert_allclose(D2[0, 1], [np.cos(0.3), 0.0], atol=1e-6)
    np.testing.assert_allclose(D2[0, 0], [-np.sin(0.3) * -0.2, 2.0], atol=1e-6)
    np.testing.assert_allclose(D2[1, 1], [0.0, np.exp(-0.2)], atol=1e-6)


def test_flag_describe():
    assert Flag.describe(Flag.ESCAPE | Flag.OUT_OF_CHART) == ["escape", "out_of_chart"]
    assert Flag.describe(0) == []


def test_descriptor_dimensions():
    assert Sphere(3).dim == 2
    assert Stiefel(4, 2).dim == 8 - 3
    assert FixedRank(2, 4, 4).dim == 8 + 8 - 4
    assert RankOneTensor((3, 3, 3)).dim == 1 + 2 + 2 + 2
    with pytest.raises(ValueError):
        ManifoldDescriptor("bad", (3,), 3)
    with pytest.raises(ValueError):
        ManifoldDescriptor("bad", (3,), 0)
