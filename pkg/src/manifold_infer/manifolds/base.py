from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..errors import ChartError, ShapeMismatch


@dataclass(frozen=True)
class ManifoldDescriptor:
    name: str
    ambient_shape: tuple
    dim: int

    def __post_init__(self):
        size = int(np.prod(self.ambient_shape))
        if not 1 <= self.dim < size:
            raise ValueError(f"intrinsic dimension {self.dim} incompatible with {self.ambient_shape}")


class Chart(ABC):
    """Retraction chart centered at a point.

    ``basis`` has shape ``(p, d)``: row ``i`` is the flattened ambient
    tangent vector ``dR_x delta_i``. Subclasses implement the closed-form
    retraction and its inverse.
    """

    manifold: "Manifold"
    center: np.ndarray
    basis: np.ndarray

    @abstractmethod
    def retract(self, v):
        """Point ``R_x(v)``; raises :class:`DomainEscape` outside the domain."""

    @abstractmethod
    def inverse(self, y):
        """Coordinates ``R_x^{-1}(y)``; raises :class:`OutOfChart`."""

    def retract_many(self, V):
        """Retractions of a stack of coordinate vectors, shape ``(k, *ambient)``."""
        return np.stack([self.retract(v) for v in np.asarray(V, dtype=float)])

    @property
    def dim(self):
        return self.basis.shape[0]

    def tangent(self, v):
        """Ambient tangent vector ``sum_i v_i dR_x delta_i``."""
        return (np.asarray(v) @ self.basis).reshape(self.center.shape)

    def basis_vectors(self):
        return self.basis.reshape((self.dim,) + self.center.shape)

    def grad_coords(self, G):
        """Chart gradient coordinates of ambient (Euclidean) gradients.

        For every manifold here, the coordinates of the Riemannian
        gradient in the chart basis equal the Euclidean pairings
        ``<G, dR_x delta_i>``, so batches of per-sample gradients with
        shape ``(n, *ambient)`` map to ``(n, p)`` in one product.
        """
        G = np.asarray(G, dtype=float)
        lead = G.shape[: G.ndim - self.center.ndim]
        return G.reshape(lead + (-1,)) @ self.basis.T

    def hessian_coords(self, ambient_grad, ambient_hess_apply):
        """Matrix ``<Hess f(x)[b_i], b_j>`` over the chart basis, symmetrized."""
        m = self.manifold
        B = self.basis_vectors()
        HB = [m.riemannian_hess_apply(self.center, ambient_grad, ambient_hess_apply, b) for b in B]
        H = np.array([[m.inner(self.center, hb, bj) for bj in B] for hb in HB])
        return 0.5 * (H + H.T)


class Manifold(ABC):
    """A matrix manifold with retraction charts anchored at a fixed point.

    The anchor (typically the point estimate) fixes the smooth
    orthogonal complements used by every chart. With no anchor, each
    chart is anchored at its own center.
    """

    descriptor: ManifoldDescriptor
    anchor: np.ndarray | None

    @property
    def name(self):
        return self.descriptor.name

    @property
    def ambient_shape(self):
        return self.descriptor.ambient_shape

    @property
    def dim(self):
        return self.descriptor.dim

    @abstractmethod
    def with_anchor(self, anchor) -> "Manifold":
        ...

    @abstractmethod
    def chart(self, x) -> Chart:
        ...

    @abstractmethod
    def project(self, x, z):
        """Orthogonal projection of an ambient array onto ``T_x M``."""

    @abstractmethod
    def riemannian_grad(self, x, ambient_grad):
        ...

    @abstractmethod
    def riemannian_hess_apply(self, x, ambient_grad, ambient_hess_apply, xi):
        ...

    @abstractmethod
    def feasibility(self, x) -> float:
        ...

    @abstractmethod
    def nearest_point(self, z):
        """A feasible point close to the ambient array ``z``."""

    @abstractmethod
    def random_point(self, rng):
        ...

    def inner(self, x, a, b):
        return float(np.vdot(a, b))

    def spec(self):
        """Mini-grammar string ``name:dims`` for this manifold."""
        raise NotImplementedError

    def check_point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.ambient_shape:
            raise ShapeMismatch(f"expected shape {self.ambient_shape}, got {x.shape}")
        return x

    def retract(self, x, v, strict=False):
        """``R_x(v)``; outside the domain returns ``x`` unless ``strict``."""
        x = self.check_point(x)
        try:
            return self.chart(x).retract(np.asarray(v, dtype=float))
        except ChartError:
            if strict:
                raise
            return x.copy()

    def inverse_retract(self, x, y, strict=False):
        """``R_x^{-1}(y)``; out-of-chart points map to zero unless ``strict``."""
        x = self.check_point(x)
        try:
            return self.chart(x).inverse(self.check_point(y))
        except ChartError:
            if strict:
                raise
            return np.zeros(self.dim)

    def chart_basis(self, x):
        return self.chart(self.check_point(x)).basis_vectors()

    def tangent_residual(self, x, xi):
        return float(np.linalg.norm(np.asarray(xi) - self.project(x, xi)))

    def normal_space_residual(self, x, y):
        """Norm of the tangential part of ``x + v - y`` with ``v = R_x^{-1}(y)``.

        Zero for projection-like inverse retractions whose defect lies in
        the normal space.
        """
        ch = self.chart(self.check_point(x))
        v = ch.inverse(self.check_point(y))
        defect = ch.center + ch.tangent(v) - y
        return float(np.linalg.norm(self.project(ch.center, defect)))

    def distinct_singular_values(self, x, tol=1e-8):
        return True
