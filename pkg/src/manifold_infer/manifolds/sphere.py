from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import OrthoAnchor
from ..errors import OutOfChart
from .base import Chart, Manifold, ManifoldDescriptor


@dataclass(frozen=True, eq=False)
class SphereChart(Chart):
    manifold: "Sphere"
    center: np.ndarray
    frame: np.ndarray  # p x (p-1), orthonormal complement of the center

    @property
    def basis(self):
        return self.frame.T

    def retract(self, v):
        y = self.center + self.frame @ v
        return y / np.sqrt(y @ y)

    def retract_many(self, V):
        Y = self.center + np.asarray(V, dtype=float) @ self.frame.T
        return Y / np.sqrt(np.einsum("ij,ij->i", Y, Y))[:, None]

    def hessian_coords(self, ambient_grad, ambient_hess_apply):
        # frame columns are tangent, so the projection drops out of the pairing
        F = self.frame
        HF = np.stack([ambient_hess_apply(F[:, k]) for k in range(F.shape[1])], axis=1)
        H = F.T @ HF - float(self.center @ ambient_grad) * np.eye(F.shape[1])
        return 0.5 * (H + H.T)

    def inverse(self, y):
        t = float(y @ self.center)
        if not t > 1e-12:
            raise OutOfChart("point is not in the open hemisphere around the center")
        return self.frame.T @ y / t


@dataclass(frozen=True, eq=False)
class Sphere(Manifold):
    """Unit sphere ``S^{p-1}`` in ``R^p`` with the projection retraction
    ``R_x(v) = (x + F v) / ||x + F v||`` and ``F`` the anchored complement
    of ``x``."""

    p: int
    anchor: np.ndarray | None = None
    _ortho: OrthoAnchor | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("sphere needs ambient dimension >= 2")
        object.__setattr__(self, "descriptor", ManifoldDescriptor("sphere", (self.p,), self.p - 1))
        if self.anchor is not None and self._ortho is None:
            a = np.asarray(self.anchor, dtype=float)
            object.__setattr__(self, "anchor", a)
            object.__setattr__(self, "_ortho", OrthoAnchor.from_matrix(a[:, None]))

    def with_anchor(self, anchor):
        return Sphere(self.p, None if anchor is None else np.asarray(anchor, dtype=float))

    def spec(self):
        return f"sphere:{self.p}"

    def chart(self, x):
        x = np.asarray(x, dtype=float)
        ortho = self._ortho if self._ortho is not None else OrthoAnchor.from_matrix(x[:, None])
        return SphereChart(self, x, ortho.complement(x[:, None]))

    def project(self, x, z):
        return z - x * (x @ z)

    def riemannian_grad(self, x, ambient_grad):
        return self.project(x, ambient_grad)

    def riemannian_hess_apply(self, x, ambient_grad, ambient_hess_apply, xi):
        # projected ambient Hessian plus the Weingarten term -(x^T g) xi
        return self.project(x, ambient_hess_apply(xi)) - (x @ ambient_grad) * xi

    def feasibility(self, x):
        return abs(float(np.linalg.norm(x)) - 1.0)

    def nearest_point(self, z):
        return np.asarray(z, dtype=float) / np.linalg.norm(z)

    def random_point(self, rng):
        return self.nearest_point(rng.standard_normal(self.p))

    def dist(self, x, y):
        return float(np.arccos(np.clip(x @ y, -1.0, 1.0)))

    def log(self, x, y):
        """Riemannian logarithm as an ambient tangent vector."""
        t = float(np.clip(x @ y, -1.0, 1.0))
        w = y - t * x
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return np.zeros_like(x)
        return np.arccos(t) * w / nw

    def exp(self, x, xi):
        nx = np.linalg.norm(xi)
        if nx == 0.0:
            return x.copy()
        return np.cos(nx) * x + np.sin(nx) * xi / nx
