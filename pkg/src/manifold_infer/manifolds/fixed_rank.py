from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import OrthoAnchor, align_signs, fix_signs
from ..errors import DomainEscape, RankDeficient
from .base import Chart, Manifold, ManifoldDescriptor

RETRACT_COND = 1e12


def _col_major_units(rows, cols):
    # E_ij enumerated column-major
    for m in range(rows * cols):
        E = np.zeros((rows, cols))
        E[m % rows, m // rows] = 1.0
        yield E


@dataclass(frozen=True, eq=False)
class FixedRankChart(Chart):
    manifold: "FixedRank"
    center: np.ndarray
    u1: np.ndarray
    s: np.ndarray
    v1: np.ndarray
    u2: np.ndarray
    v2: np.ndarray
    basis: np.ndarray

    def _split(self, v):
        m = self.manifold
        r, q1, q2 = m.r, m.p1 - m.r, m.p2 - m.r
        v = np.asarray(v, dtype=float)
        A = v[: r * r].reshape((r, r), order="F")
        B = v[r * r : r * r + q1 * r].reshape((q1, r), order="F")
        C = v[r * r + q1 * r :].reshape((r, q2), order="F")
        return A, B, C

    def retract(self, v):
        A, B, C = self._split(v)
        SA = np.diag(self.s) + A
        if not np.linalg.cond(SA) < RETRACT_COND:
            raise DomainEscape("Sigma + A is singular")
        left = self.u1 @ SA + self.u2 @ B
        right = SA @ self.v1.T + C @ self.v2.T
        return left @ np.linalg.solve(SA, right)

    def hessian_coords(self, ambient_grad, ambient_hess_apply):
        # orthonormal tangent basis: pair Z = hess[b] + N b^T X^+T + X^+T b^T N
        # with the basis directly, the tangent projection drops out
        shape = self.center.shape
        Bv = self.basis.reshape((-1,) + shape)
        G = np.asarray(ambient_grad, dtype=float)
        GV = G - self.u1 @ (self.u1.T @ G)
        N = GV - (GV @ self.v1) @ self.v1.T
        Xpt = (self.u1 / self.s) @ self.v1.T
        HB = np.stack([ambient_hess_apply(b) for b in Bv])
        curv = np.einsum("ij,bkj,kl->bil", N, Bv, Xpt) + np.einsum("ij,bkj,kl->bil", Xpt, Bv, N)
        H = self.basis @ (HB + curv).reshape(len(Bv), -1).T
        return 0.5 * (H + H.T)

    def inverse(self, y):
        YV1 = y @ self.v1
        A = self.u1.T @ YV1 - np.diag(self.s)
        B = self.u2.T @ YV1
        C = self.u1.T @ y @ self.v2
        return np.concatenate([A.ravel(order="F"), B.ravel(order="F"), C.ravel(order="F")])


@dataclass(frozen=True, eq=False)
class FixedRank(Manifold):
    """Manifold of ``p1 x p2`` real matrices of rank exactly ``r``.

    Chart coordinates are ``(vec A, vec B, vec C)`` (column-major) for
    ``R_X(v) = U [S + A, C; B, B (S + A)^{-1} C] V^T`` with the full
    orthogonal frames ``U = (U1, U2)`` and ``V = (V1, V2)``.
    """

    r: int
    p1: int
    p2: int
    anchor: np.ndarray | None = None
    _ortho: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.r < min(self.p1, self.p2):
            raise ValueError("fixed-rank manifold needs 1 <= r < min(p1, p2)")
        dim = (self.p1 + self.p2) * self.r - self.r * self.r
        object.__setattr__(
            self, "descriptor", ManifoldDescriptor("fixedrank", (self.p1, self.p2), dim)
        )
        if self.anchor is not None and self._ortho is None:
            a = np.asarray(self.anchor, dtype=float)
            object.__setattr__(self, "anchor", a)
            object.__setattr__(self, "_ortho", self._anchor_data(a))

    def _anchor_data(self, X0):
        U, s, Vt = np.linalg.svd(X0, full_matrices=False)
        r = self.r
        if s[r - 1] <= 1e-8 * s[0]:
            raise RankDeficient("anchor has rank below r")
        u1 = fix_signs(U[:, :r])
        v1 = X0.T @ u1 / s[:r]
        return u1, OrthoAnchor.from_matrix(u1), OrthoAnchor.from_matrix(v1)

    def with_anchor(self, anchor):
        return FixedRank(self.r, self.p1, self.p2, None if anchor is None else np.asarray(anchor, dtype=float))

    def spec(self):
        return f"fixedrank:{self.r},{self.p1},{self.p2}"

    def factors(self, x):
        """``(U1, s, V1)`` with ``U1`` signs aligned to the anchor's."""
        ch = self.chart(x)
        return ch.u1, ch.s, ch.v1

    def chart(self, x):
        x = np.asarray(x, dtype=float)
        data = self._ortho if self._ortho is not None else self._anchor_data(x)
        ref, ou, ov = data
        U, s, _ = np.linalg.svd(x, full_matrices=False)
        r = self.r
        if not s[r - 1] >= 1e-8 * s[0] or s[r - 1] == 0.0:
            raise RankDeficient("point has rank below r")
        u1 = align_signs(U[:, :r], ref)
        s = s[:r]
        v1 = x.T @ u1 / s
        u2 = ou.complement(u1)
        v2 = ov.complement(v1)
        rows = []
        for E in _col_major_units(r, r):
            rows.append((u1 @ E @ v1.T).ravel())
        for E in _col_major_units(self.p1 - r, r):
            rows.append((u2 @ E @ v1.T).ravel())
        for E in _col_major_units(r, self.p2 - r):
            rows.append((u1 @ E @ v2.T).ravel())
        return FixedRankChart(self, x, u1, s, v1, u2, v2, np.array(rows))

    def _frames(self, x):
        U, s, Vt = np.linalg.svd(x, full_matrices=False)
        r = self.r
        return U[:, :r], s[:r], Vt[:r].T

    def _normal(self, U, V, Z):
        ZV = Z - U @ (U.T @ Z)
        return ZV - (ZV @ V) @ V.T

    def project(self, x, z):
        U, _, V = self._frames(x)
        return z - self._normal(U, V, z)

    def riemannian_grad(self, x, ambient_grad):
        return self.project(x, ambient_grad)

    def riemannian_hess_apply(self, x, ambient_grad, ambient_hess_apply, xi):
        U, s, V = self._frames(x)
        N = self._normal(U, V, ambient_grad)
        Xpt = (U / s) @ V.T  # (X^+)^T
        curv = N @ xi.T @ Xpt + Xpt @ xi.T @ N
        Z = ambient_hess_apply(xi) + curv
        return Z - self._normal(U, V, Z)

    def feasibility(self, x):
        s = np.linalg.svd(x, compute_uv=False)
        return float(s[self.r] / s[0]) if s[0] > 0 else np.inf

    def nearest_point(self, z):
        U, s, Vt = np.linalg.svd(np.asarray(z, dtype=float), full_matrices=False)
        r = self.r
        return (U[:, :r] * s[:r]) @ Vt[:r]

    def random_point(self, rng):
        return rng.standard_normal((self.p1, self.r)) @ rng.standard_normal((self.r, self.p2))

    def distinct_singular_values(self, x, tol=1e-8):
        s = np.linalg.svd(np.asarray(x, dtype=float), compute_uv=False)[: self.r]
        if self.r == 1:
            return True
        return bool(np.min(-np.diff(s)) >= tol * s[0])
