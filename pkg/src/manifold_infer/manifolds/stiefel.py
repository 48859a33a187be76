from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import expm, logm

from ..core import OrthoAnchor, fd_jacobian
from ..errors import DomainEscape, NoConvergence, OutOfChart
from .base import Chart, Manifold, ManifoldDescriptor

INVERSE_TOL = 1e-10
INVERSE_MAX_ITER = 100


def polar(X):
    """Orthonormal polar factor ``L R^T`` of ``X = L D R^T``."""
    L, s, Rt = np.linalg.svd(X, full_matrices=False)
    if not s[-1] > 1e-12 * s[0]:
        raise DomainEscape("polar factor undefined for rank-deficient matrix")
    return L @ Rt


@lru_cache(maxsize=None)
def _triu(r):
    return np.triu_indices(r, 1)


def skew_from_vec(v, r):
    A = np.zeros((r, r))
    A[_triu(r)] = v
    return A - A.T


def stiefel_exp(U, xi):
    """Canonical-metric geodesic ``Exp_U(xi)``."""
    p, r = U.shape
    A = U.T @ xi
    Q, R = np.linalg.qr(xi - U @ A)
    blk = np.block([[A, -R.T], [R, np.zeros((r, r))]])
    MN = expm(blk)[:, :r]
    return U @ MN[:r] + Q @ MN[r:]


def stiefel_log(U, Y, tol=1e-12, max_iter=100):
    """Canonical-metric logarithm by the iterative matrix-log algorithm.

    Returns the ambient tangent vector ``U A + Q B``.
    """
    p, r = U.shape
    M = U.T @ Y
    Q, N = np.linalg.qr(Y - U @ M)
    MN = np.vstack([M, N])
    full, _ = np.linalg.qr(MN, mode="complete")
    V = np.hstack([MN, full[:, r:]])
    if np.linalg.det(V) < 0:
        V[:, -1] = -V[:, -1]
    for _ in range(max_iter):
        LV = np.real(logm(V))
        C = LV[r:, r:]
        if np.linalg.norm(C) <= tol:
            break
        V[:, r:] = V[:, r:] @ expm(-C)
    else:
        raise NoConvergence("Stiefel logarithm did not converge")
    return U @ LV[:r, :r] + Q @ LV[r:, :r]


@dataclass(frozen=True, eq=False)
class StiefelChart(Chart):
    manifold: "Stiefel"
    center: np.ndarray
    perp: np.ndarray  # p x (p-r)
    basis: np.ndarray

    def _split(self, v):
        p, r = self.center.shape
        k = r * (r - 1) // 2
        A = np.zeros((r, r))
        iu = _triu(r)
        A[iu] = v[:k]
        A -= A.T
        B = v[k:].reshape((p - r, r), order="F")
        return A, B

    def retract(self, v):
        U = self.center
        A, B = self._split(np.asarray(v, dtype=float))
        H = U @ A + self.perp @ B
        Y = U + H + 0.5 * H @ A - U @ (H.T @ H) / 3.0 - 0.5 * U @ (A @ A)
        return polar(Y)

    def hessian_coords(self, ambient_grad, ambient_hess_apply):
        # <b_a, Riesz(Q_b)> = tr(b_a^T Q_b) for tangent b_a
        m, U = self.manifold, self.center
        G = np.asarray(ambient_grad, dtype=float)
        Q = np.stack([np.ravel(m._hess_form(U, G, ambient_hess_apply, b)) for b in self.basis_vectors()])
        H = self.basis @ Q.T
        return 0.5 * (H + H.T)

    def coords(self, xi):
        """Chart coordinates of an ambient tangent vector ``U A + U_perp B``."""
        A = self.center.T @ xi
        A = 0.5 * (A - A.T)
        B = self.perp.T @ xi
        return np.concatenate([A[_triu(A.shape[0])], B.ravel(order="F")])

    def _chord(self, y, v, max_iter):
        # fixed-point iteration with the chart differential at zero
        for _ in range(max_iter):
            step = self.coords(y - self.retract(v))
            v = v + step
            ns = np.linalg.norm(step)
            if not np.isfinite(ns) or ns > 1e3:
                return v, False
            if ns <= 1e-15 * max(1.0, np.linalg.norm(v)):
                break
        return v, np.linalg.norm(y - self.retract(v)) <= INVERSE_TOL

    def _newton(self, y, v, max_iter):
        for _ in range(max_iter):
            res = (y - self.retract(v)).ravel()
            J = fd_jacobian(self.retract, v, h=1e-7)
            step = np.linalg.lstsq(J, res, rcond=None)[0]
            v = v + step
            if np.linalg.norm(step) <= 1e-14 * max(1.0, np.linalg.norm(v)):
                break
        return v, np.linalg.norm(y - self.retract(v)) <= INVERSE_TOL

    def inverse(self, y):
        """Exact inverse of :meth:`retract` by iterative refinement.

        Starts from the projection ``coords(y - U)`` with a chord
        iteration; if that stalls, restarts from the canonical
        logarithm with finite-difference Newton steps.
        """
        y = np.asarray(y, dtype=float)
        U = self.center
        if np.linalg.svd(U.T @ y, compute_uv=False)[-1] < 1e-8:
            raise OutOfChart("point is too far from the chart center")
        try:
            v, ok = self._chord(y, self.coords(y - U), INVERSE_MAX_ITER)
        except DomainEscape:
            ok = False
        if ok:
            return v
        try:
            v0 = self.coords(stiefel_log(U, y))
        except (np.linalg.LinAlgError, ValueError, NoConvergence):
            v0 = self.coords(y - U)
        if not np.all(np.isfinite(v0)):
            raise OutOfChart("non-finite logarithm")
        try:
            v, ok = self._newton(y, v0, INVERSE_MAX_ITER)
        except DomainEscape:
            ok = False
        if not ok:
            raise NoConvergence("inverse retraction did not converge")
        return v


@dataclass(frozen=True, eq=False)
class Stiefel(Manifold):
    """Stiefel manifold ``St(p, r)`` with the canonical metric.

    Chart coordinates are the upper triangle of the skew block (row-major)
    followed by the column-major ``(p - r) x r`` normal block.
    """

    p: int
    r: int
    anchor: np.ndarray | None = None
    _ortho: OrthoAnchor | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.p > self.r >= 1:
            raise ValueError("Stiefel manifold needs p > r >= 1")
        dim = self.p * self.r - self.r * (self.r + 1) // 2
        object.__setattr__(self, "descriptor", ManifoldDescriptor("stiefel", (self.p, self.r), dim))
        if self.anchor is not None and self._ortho is None:
            a = np.asarray(self.anchor, dtype=float)
            object.__setattr__(self, "anchor", a)
            object.__setattr__(self, "_ortho", OrthoAnchor.from_matrix(a))

    def with_anchor(self, anchor):
        return Stiefel(self.p, self.r, None if anchor is None else np.asarray(anchor, dtype=float))

    def spec(self):
        return f"stiefel:{self.p},{self.r}"

    def chart(self, x):
        U = np.asarray(x, dtype=float)
        ortho = self._ortho if self._ortho is not None else OrthoAnchor.from_matrix(U)
        perp = ortho.complement(U)
        p, r = self.p, self.r
        rows = []
        for i, j in zip(*np.triu_indices(r, 1)):
            E = np.zeros((r, r))
            E[i, j], E[j, i] = 1.0, -1.0
            rows.append((U @ E).ravel())
        for m in range((p - r) * r):
            k, l = m % (p - r), m // (p - r)
            E = np.zeros((p, r))
            E[:, l] = perp[:, k]
            rows.append(E.ravel())
        return StiefelChart(self, U, perp, np.array(rows))

    def inner(self, x, a, b):
        return float(np.vdot(a, b) - 0.5 * np.vdot(x.T @ a, x.T @ b))

    def project(self, x, z):
        S = x.T @ z
        return x @ (0.5 * (S - S.T)) + z - x @ S

    def riemannian_grad(self, x, ambient_grad):
        return ambient_grad - x @ ambient_grad.T @ x

    def _hess_form(self, U, G, hess_apply, xi):
        # Q with Hess f(xi, eta) = tr(eta^T Q) for all tangent eta
        S = G.T @ U + U.T @ G
        return (
            hess_apply(xi)
            + 0.5 * (U @ (xi.T @ G) + G @ (xi.T @ U))
            - 0.5 * (xi @ S - U @ (U.T @ xi @ S))
        )

    def riemannian_hess_apply(self, x, ambient_grad, ambient_hess_apply, xi):
        Q = self._hess_form(x, ambient_grad, ambient_hess_apply, xi)
        S = x.T @ Q
        # canonical-metric Riesz representer of eta -> tr(eta^T Q)
        return x @ (S - Q.T @ x) + Q - x @ S

    def feasibility(self, x):
        return float(np.linalg.norm(x.T @ x - np.eye(self.r)))

    def nearest_point(self, z):
        return polar(np.asarray(z, dtype=float))

    def random_point(self, rng):
        return polar(rng.standard_normal((self.p, self.r)))

    exp = staticmethod(stiefel_exp)
    log = staticmethod(stiefel_log)
