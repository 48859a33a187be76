"""Loss models and their chart derivatives.

A dataset is an array of shape ``(n, *ambient_shape)``. Every loss
exposes ambient (Euclidean) derivatives of a smooth extension; chart
derivatives are obtained through the manifold's Riemannian gradient and
Hessian formulas evaluated on the chart basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import fd_jacobian, fd_second_derivatives
from .errors import AntipodalSample, EmptyInput, NonFinite, ShapeMismatch
from .manifolds import Chart, Manifold, Sphere

CLAMP = 1e-12


def check_data(manifold, data):
    data = np.asarray(data, dtype=float)
    if data.ndim == 0 or data.shape[0] == 0:
        raise EmptyInput("dataset has no samples")
    if data.shape[1:] != tuple(manifold.ambient_shape):
        raise ShapeMismatch(f"samples have shape {data.shape[1:]}, expected {manifold.ambient_shape}")
    if not np.all(np.isfinite(data)):
        raise NonFinite("dataset contains NaN or Inf")
    return data


@dataclass(frozen=True)
class Derivatives:
    """Chart derivatives of the empirical loss at a chart center."""

    grad: np.ndarray  # (p,)
    sample_grads: np.ndarray  # (n, p)
    hessian: np.ndarray  # (p, p)


class LossModel:
    """Empirical loss ``L_n(theta) = mean_i L(theta, X_i)``.

    Subclasses implement :meth:`value`, :meth:`sample_grads` (ambient
    per-sample gradients) and :meth:`hess_apply` (the ambient Hessian of
    the mean loss as a linear map).
    """

    kind = "loss"
    manifold: Manifold

    def value(self, theta, data):
        raise NotImplementedError

    def sample_grads(self, theta, data):
        raise NotImplementedError

    def hess_apply(self, theta, data):
        raise NotImplementedError

    def with_manifold(self, manifold):
        return type(self)(manifold)

    def validate(self, data):
        return check_data(self.manifold, data)

    def ambient_grad(self, theta, data):
        return self.sample_grads(theta, data).mean(axis=0)

    def _chart(self, center, chart):
        return chart if chart is not None else self.manifold.chart(center)

    def derivatives(self, center, data, chart=None, with_samples=True):
        """Gradient, per-sample gradients and Hessian in chart coordinates."""
        ch = self._chart(center, chart)
        Gs = self.sample_grads(ch.center, data)
        G = Gs.mean(axis=0)
        S = ch.grad_coords(Gs) if with_samples else None
        g = S.mean(axis=0) if with_samples else ch.grad_coords(G)
        H = ch.hessian_coords(G, self.hess_apply(ch.center, data))
        return Derivatives(g, S, H)

    def chart_gradient(self, center, data, chart=None):
        ch = self._chart(center, chart)
        return ch.grad_coords(self.ambient_grad(ch.center, data))

    def per_sample_chart_gradients(self, center, data, chart=None):
        ch = self._chart(center, chart)
        return ch.grad_coords(self.sample_grads(ch.center, data))

    def chart_hessian(self, center, data, chart=None):
        ch = self._chart(center, chart)
        G = self.ambient_grad(ch.center, data)
        return ch.hessian_coords(G, self.hess_apply(ch.center, data))

    def pullback_derivatives(self, param, eta, data, with_samples=True):
        """Derivatives of ``eta -> L_n(param(eta))`` at an arbitrary ``eta``.

        ``param`` maps coordinates to ambient points; passing a
        :class:`Chart` uses its retraction. First and second derivatives of
        ``param`` are taken by central differences, the loss derivatives
        analytically: the Hessian is ``J^T (hess J) + sum_k g_k param''_k``.
        """
        many = None
        if isinstance(param, Chart):
            param, many = param.retract, param.retract_many
        eta = np.asarray(eta, dtype=float)
        theta = np.asarray(param(eta), dtype=float)
        J = fd_jacobian(param, eta, h=1e-6, many=many)
        D2 = fd_second_derivatives(param, eta, h=1e-4, many=many)
        Gs = self.sample_grads(theta, data)
        flat = Gs.reshape(Gs.shape[0], -1)
        gbar = flat.mean(axis=0)
        hv = self.hess_apply(theta, data)
        HJ = np.stack(
            [np.ravel(hv(J[:, k].reshape(theta.shape))) for k in range(J.shape[1])], axis=1
        )
        H = J.T @ HJ + D2 @ gbar
        H = 0.5 * (H + H.T)
        S = flat @ J if with_samples else None
        g = S.mean(axis=0) if with_samples else gbar @ J
        return Derivatives(g, S, H)


@dataclass(frozen=True, eq=False)
class GaussianLocation(LossModel):
    """Gaussian location likelihood ``L(theta, X) = ||X - theta||_F^2 / 2``.

    The ambient gradient of one sample is ``theta - X`` and the ambient
    Hessian is the identity.
    """

    manifold: Manifold
    kind = "gaussian"

    def value(self, theta, data):
        d = np.asarray(data) - theta
        return 0.5 * float(np.mean(np.sum(d.reshape(d.shape[0], -1) ** 2, axis=1)))

    def sample_grads(self, theta, data):
        return theta - np.asarray(data)

    def ambient_grad(self, theta, data):
        return theta - np.asarray(data).mean(axis=0)

    def hess_apply(self, theta, data):
        return _identity


def _identity(xi):
    return xi


def _acos_ratio(t):
    """``h(t) = arccos(t) / sqrt(1 - t^2)`` with its limit 1 at ``t = 1``."""
    s = np.arccos(t)
    return np.where(s < 1e-8, 1.0 + s * s / 6.0, s / np.sin(np.maximum(s, 1e-300)))


def _acos_curv(t, h):
    """``(1 - t h(t)) / (1 - t^2)``; tends to 1/3 as ``t -> 1``."""
    s = np.arccos(t)
    small = s < 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        full = (1.0 - t * h) / (1.0 - t * t)
    return np.where(small, 1.0 / 3.0 + 2.0 * s * s / 15.0, full)


@dataclass(frozen=True, eq=False)
class SphereBarycenter(LossModel):
    """Squared geodesic distance ``L(theta, x) = arccos(x^T theta)^2 / 2`` on the sphere.

    Inner products are clamped to ``[-1 + 1e-12, 1 - 1e-12]``; samples
    with ``x^T theta <= -1 + 1e-12`` raise :class:`AntipodalSample`.
    The ambient extension ``y -> arccos(x^T y)^2 / 2`` has gradient
    ``-h(t) x`` and Hessian ``(1 - t h) / (1 - t^2) x x^T`` with
    ``t = x^T y``.
    """

    manifold: Manifold
    kind = "barycenter"

    def __post_init__(self):
        if not isinstance(self.manifold, Sphere):
            raise TypeError("the barycenter loss is defined on the sphere only")

    def validate(self, data):
        data = check_data(self.manifold, data)
        if np.max(np.abs(np.linalg.norm(data, axis=1) - 1.0)) > 1e-8:
            raise ValueError("barycenter samples must lie on the unit sphere")
        return data

    def _t(self, theta, data):
        t = np.asarray(data) @ theta
        if np.any(t <= -1.0 + CLAMP):
            raise AntipodalSample("a sample is antipodal to the evaluation point")
        return np.clip(t, -1.0 + CLAMP, 1.0 - CLAMP)

    def value(self, theta, data):
        t = np.clip(np.asarray(data) @ theta, -1.0, 1.0)
        return 0.5 * float(np.mean(np.arccos(t) ** 2))

    def sample_grads(self, theta, data):
        X = np.asarray(data)
        h = _acos_ratio(self._t(theta, X))
        return -h[:, None] * X

    def hess_apply(self, theta, data):
        X = np.asarray(data)
        t = self._t(theta, X)
        c = _acos_curv(t, _acos_ratio(t)) / X.shape[0]

        def apply(xi):
            return X.T @ (c * (X @ xi))

        return apply


def make_loss(kind, manifold):
    kind = str(kind).lower()
    if kind == "gaussian":
        return GaussianLocation(manifold)
    if kind == "barycenter":
        return SphereBarycenter(manifold)
    raise ValueError(f"unknown loss {kind!r}")


def loss_value(model, theta, data):
    return model.value(np.asarray(theta, dtype=float), data)


def chart_gradient(model, center, data):
    return model.chart_gradient(np.asarray(center, dtype=float), data)


def per_sample_chart_gradients(model, center, data):
    return model.per_sample_chart_gradients(np.asarray(center, dtype=float), data)


def chart_hessian(model, center, data):
    return model.chart_hessian(np.asarray(center, dtype=float), data)
