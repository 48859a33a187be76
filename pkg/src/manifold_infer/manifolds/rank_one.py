from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ..core import OrthoAnchor, align_signs, fix_signs
from ..errors import DomainEscape, RankDeficient
from .base import Chart, Manifold, ManifoldDescriptor

DOMAIN_GUARD = 1e-8


def outer(vectors):
    return reduce(np.multiply.outer, vectors)


def contract(Z, us, skip=()):
    """Contract ``Z`` with ``us[j]`` along every mode ``j`` not in ``skip``."""
    for j in reversed(range(len(us))):
        if j not in skip:
            Z = np.tensordot(Z, us[j], axes=([j], [0]))
    return Z


def _embed(us, i, w):
    vs = list(us)
    vs[i] = w
    return outer(vs)


def _embed2(us, i, wi, l, wl):
    vs = list(us)
    vs[i], vs[l] = wi, wl
    return outer(vs)


def top_factors(X):
    """Leading left singular vector of every mode unfolding."""
    out = []
    for i in range(X.ndim):
        M = np.moveaxis(X, i, 0).reshape(X.shape[i], -1)
        U = np.linalg.svd(M, full_matrices=False)[0]
        out.append(U[:, 0])
    return out


@dataclass(frozen=True, eq=False)
class RankOneChart(Chart):
    manifold: "RankOneTensor"
    center: np.ndarray
    x0: float
    us: tuple
    perps: tuple
    basis: np.ndarray

    def _split(self, v):
        v = np.asarray(v, dtype=float)
        ws, k = [], 1
        for P in self.perps:
            q = P.shape[1]
            ws.append(v[k : k + q])
            k += q
        return v[0], ws

    def retract(self, v):
        a0, ws = self._split(v)
        c = self.x0 + a0
        if not abs(c) >= DOMAIN_GUARD * abs(self.x0):
            raise DomainEscape("x0 + a0 vanishes")
        return c * outer([u + P @ w / c for u, P, w in zip(self.us, self.perps, ws)])

    def hessian_coords(self, ambient_grad, ambient_hess_apply):
        # basis rows are orthonormal tangent vectors, so the projection drops
        # out; the curvature only couples distinct modes i != j through
        # P_i^T G_ij P_j / x0, G_ij being the gradient contracted off i and j
        B = self.basis
        shape = self.center.shape
        HB = np.stack([np.ravel(ambient_hess_apply(b.reshape(shape))) for b in B])
        H = B @ HB.T
        G = np.asarray(ambient_grad, dtype=float)
        k = len(self.us)
        offs = np.cumsum([1] + [P.shape[1] for P in self.perps])
        for i in range(k):
            for j in range(i + 1, k):
                Gij = contract(G, self.us, skip=(i, j))
                C = self.perps[i].T @ Gij @ self.perps[j] / self.x0
                H[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] += C
                H[offs[j] : offs[j + 1], offs[i] : offs[i + 1]] += C.T
        return 0.5 * (H + H.T)

    def inverse(self, y):
        a0 = float(contract(y, self.us)) - self.x0
        ws = [P.T @ contract(y, self.us, skip=(i,)) for i, P in enumerate(self.perps)]
        return np.concatenate([[a0], *ws])


@dataclass(frozen=True, eq=False)
class RankOneTensor(Manifold):
    """Rank-one tensors ``x0 u_1 o ... o u_k`` with ``x0 != 0``.

    Chart coordinates ``(a0, w_1, ..., w_k)`` with ``w_i`` of length
    ``p_i - 1`` give
    ``R_X(v) = (x0 + a0) o_i (u_i + U_i,perp w_i / (x0 + a0))``, whose
    differential at zero is an orthonormal frame of the tangent space.
    """

    shape: tuple
    anchor: np.ndarray | None = None
    _ortho: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) < 2 or min(shape) < 2:
            raise ValueError("rank-one tensors need order >= 2 and mode sizes >= 2")
        object.__setattr__(self, "shape", shape)
        dim = 1 + sum(s - 1 for s in shape)
        object.__setattr__(self, "descriptor", ManifoldDescriptor("rank1tensor", shape, dim))
        if self.anchor is not None and self._ortho is None:
            a = np.asarray(self.anchor, dtype=float)
            object.__setattr__(self, "anchor", a)
            object.__setattr__(self, "_ortho", self._anchor_data(a))

    def _anchor_data(self, X0):
        us = [fix_signs(u) for u in top_factors(X0)]
        if abs(float(contract(X0, us))) == 0.0:
            raise RankDeficient("anchor tensor is zero")
        return tuple(us), tuple(OrthoAnchor.from_matrix(u) for u in us)

    def with_anchor(self, anchor):
        return RankOneTensor(self.shape, None if anchor is None else np.asarray(anchor, dtype=float))

    def spec(self):
        return "rank1tensor:" + ",".join(str(s) for s in self.shape)

    def factors(self, x):
        """``(x0, [u_1, ..., u_k])`` with signs aligned to the anchor."""
        refs, _ = self._ortho if self._ortho is not None else self._anchor_data(x)
        us = [align_signs(u[:, None], r[:, None])[:, 0] for u, r in zip(top_factors(x), refs)]
        return float(contract(x, us)), us

    def chart(self, x):
        x = np.asarray(x, dtype=float)
        refs, anchors = self._ortho if self._ortho is not None else self._anchor_data(x)
        us = [align_signs(u[:, None], r[:, None])[:, 0] for u, r in zip(top_factors(x), refs)]
        x0 = float(contract(x, us))
        if x0 == 0.0 or not np.isfinite(x0):
            raise RankDeficient("tensor has vanishing scale")
        perps = [a.complement(u) for a, u in zip(anchors, us)]
        rows = [outer(us).ravel()]
        for i, P in enumerate(perps):
            for m in range(P.shape[1]):
                rows.append(_embed(us, i, P[:, m]).ravel())
        return RankOneChart(self, x, x0, tuple(us), tuple(perps), np.array(rows))

    def _unit_factors(self, x):
        us = top_factors(x)
        return float(contract(x, us)), us

    def _project_with(self, us, z):
        out = contract(z, us) * outer(us)
        for i, u in enumerate(us):
            g = contract(z, us, skip=(i,))
            out = out + _embed(us, i, g - u * (u @ g))
        return out

    def project(self, x, z):
        _, us = self._unit_factors(x)
        return self._project_with(us, z)

    def riemannian_grad(self, x, ambient_grad):
        return self.project(x, ambient_grad)

    def riemannian_hess_apply(self, x, ambient_grad, ambient_hess_apply, xi):
        x0, us = self._unit_factors(x)
        N = ambient_grad - self._project_with(us, ambient_grad)
        k = len(us)
        du = []
        for l in range(k):
            d = contract(xi, us, skip=(l,))
            du.append((d - us[l] * (us[l] @ d)) / x0)
        curv = np.zeros_like(xi)
        for i in range(k):
            acc = np.zeros(self.shape[i])
            for l in range(k):
                if l == i:
                    continue
                vs = list(us)
                vs[l] = du[l]
                acc = acc + contract(N, vs, skip=(i,))
            acc = acc - us[i] * (us[i] @ acc)
            curv = curv + _embed(us, i, acc)
        return self._project_with(us, ambient_hess_apply(xi)) + curv

    def feasibility(self, x):
        x = np.asarray(x, dtype=float)
        x0, us = self._unit_factors(x)
        nx = np.linalg.norm(x)
        return float(np.linalg.norm(x - x0 * outer(us)) / nx) if nx > 0 else np.inf

    def nearest_point(self, z):
        z = np.asarray(z, dtype=float)
        x0, us = self._unit_factors(z)
        return x0 * outer(us)

    def random_point(self, rng):
        us = [rng.standard_normal(s) for s in self.shape]
        return outer([u / np.linalg.norm(u) for u in us]) * (1.0 + rng.random())
