"""Shared numerical kernels: anchored orthogonal complements, symmetric
pseudo-inverse solves and finite-difference chart derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnchorMismatch, NonFinite, RankDeficient

DEFAULT_RCOND = 1e-12
RANK_THRESHOLD = 1e-8


def fix_signs(M):
    """Flip columns of ``M`` so that each column's largest-magnitude entry is positive."""
    M = np.array(M, dtype=float, copy=True)
    if M.ndim == 1:
        return M if M[np.argmax(np.abs(M))] >= 0 else -M
    idx = np.argmax(np.abs(M), axis=0)
    s = np.sign(M[idx, np.arange(M.shape[1])])
    s[s == 0] = 1.0
    return M * s


def align_signs(M, ref, tol=1e-8):
    """Flip columns of ``M`` to have nonnegative inner product with ``ref``.

    Columns nearly orthogonal to their reference fall back to
    :func:`fix_signs`.
    """
    d = np.einsum("ij,ij->j", M, ref)
    s = np.where(d < 0, -1.0, 1.0)
    out = M * s
    weak = np.abs(d) < tol
    if np.any(weak):
        out[:, weak] = fix_signs(M[:, weak])
    return out


def top_left_singular(A, k):
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return U[:, :k], s


@dataclass(frozen=True, eq=False)
class OrthoAnchor:
    """Cached anchor data for :func:`ortho_complement`.

    Holds the anchor's top left singular vectors ``u0``, a fixed
    orthonormal complement ``u0_perp`` and the weighted frame
    ``(u0, u0_perp) @ diag(p1, p1 - 1, ..., 1)``.
    """

    a0: np.ndarray
    u0: np.ndarray
    u0_perp: np.ndarray
    weighted: np.ndarray
    sigma_max: float

    @classmethod
    def from_matrix(cls, A0):
        A0 = np.asarray(A0, dtype=float)
        if A0.ndim == 1:
            A0 = A0[:, None]
        p1, p2 = A0.shape
        if not p1 > p2 > 0:
            raise AnchorMismatch(f"anchor must be tall p1 > p2 > 0, got {A0.shape}")
        U, s = top_left_singular(A0, p2)
        if s[-1] <= RANK_THRESHOLD * s[0]:
            raise RankDeficient("anchor matrix is rank deficient")
        u0 = fix_signs(U)
        # deterministic complement: weighted identity projected off span(u0)
        proj = np.eye(p1) - u0 @ u0.T
        W0 = proj * np.arange(p1, 0, -1, dtype=float)
        u0_perp = fix_signs(top_left_singular(W0, p1 - p2)[0])
        weights = np.arange(p1, 0, -1, dtype=float)
        weighted = np.hstack([u0, u0_perp]) * weights
        return cls(A0, u0, u0_perp, weighted, float(s[0]))

    @property
    def shape(self):
        return self.a0.shape

    def complement(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if A.shape != self.a0.shape:
            raise AnchorMismatch(f"shape {A.shape} does not match anchor {self.a0.shape}")
        p1, p2 = A.shape
        if p2 == 1:
            nrm = np.sqrt(float(A[:, 0] @ A[:, 0]))
            U, s = A / nrm, np.array([nrm])
        else:
            U, s = top_left_singular(A, p2)
        if not np.all(np.isfinite(s)) or s[-1] < RANK_THRESHOLD * self.sigma_max:
            raise RankDeficient("matrix is rank deficient relative to its anchor")
        M = self.weighted - U @ (U.T @ self.weighted)
        F = top_left_singular(M, p1 - p2)[0]
        return align_signs(F, self.u0_perp)


def ortho_complement(A, A0):
    """Smooth orthonormal complement of ``A`` anchored at ``A0``.

    Parameters
    ----------
    A : array, shape (p1, p2)
        Full column rank matrix near the anchor.
    A0 : array or OrthoAnchor
        Anchor matrix, or its precomputed :class:`OrthoAnchor`.

    Returns
    -------
    F : array, shape (p1, p1 - p2)
        Orthonormal columns with ``A.T @ F == 0``, taken as the top
        left singular vectors of ``(I - U_A U_A^T) (U_0, U_0perp) D``
        with ``D = diag(p1, ..., 1)``. Column signs agree with the
        anchor's own complement, which in turn has each column's
        largest-magnitude entry positive.
    """
    anchor = A0 if isinstance(A0, OrthoAnchor) else OrthoAnchor.from_matrix(A0)
    return anchor.complement(A)


def pinv_sym(H, rcond=DEFAULT_RCOND):
    """Moore-Penrose inverse of a symmetric matrix and its numerical rank."""
    H = np.asarray(H, dtype=float)
    if not np.isfinite(H.sum()):
        raise NonFinite("matrix contains NaN or Inf")
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    if lam.size == 0:
        return np.zeros_like(H), 0
    keep = np.abs(lam) > rcond * np.abs(lam).max()
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    return (Q * inv) @ Q.T, int(keep.sum())


def pinv_solve(H, g, rcond=DEFAULT_RCOND):
    """Solve ``H x = g`` with the symmetric pseudo-inverse of ``H``.

    Eigenvalues with ``|lambda| <= rcond * max|lambda|`` are treated as zero.
    """
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFinite("vector contains NaN or Inf")
    Hp, _ = pinv_sym(H, rcond)
    return Hp @ g


def fd_chart_gradient(f, p, h=1e-5):
    """Central-difference gradient at 0 of a scalar function on R^p."""
    g = np.empty(p)
    for i in range(p):
        e = np.zeros(p)
        e[i] = h
        g[i] = (f(e) - f(-e)) / (2 * h)
    return g


def fd_chart_hessian(f, p, h=1e-4):
    """Four-point second-difference Hessian at 0, symmetrized."""
    H = np.empty((p, p))
    eye = np.eye(p) * h
    for i in range(p):
        for j in range(i, p):
            ei, ej = eye[i], eye[j]
            H[i, j] = (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4 * h * h)
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def _evaluate(F, points, many):
    if many is not None:
        return np.asarray(many(points)).reshape(len(points), -1)
    return np.stack([np.ravel(F(q)) for q in points])


def fd_jacobian(F, v, h=1e-6, many=None):
    """Central-difference Jacobian of a vector-valued map at ``v``.

    Returns an array of shape ``(m, p)`` where ``m`` is the flattened
    output size. ``many``, if given, evaluates ``F`` on a stack of points.
    """
    v = np.asarray(v, dtype=float)
    eye = np.eye(v.size) * h
    vals = _evaluate(F, np.concatenate([v + eye, v - eye]), many)
    return ((vals[: v.size] - vals[v.size :]) / (2 * h)).T


def fd_second_derivatives(F, v, h=1e-4, many=None):
    """Second partials of a vector-valued map at ``v``.

    Returns an array of shape ``(p, p, m)``.
    """
    v = np.asarray(v, dtype=float)
    p = v.size
    eye = np.eye(p) * h
    pairs = [(i, j) for i in range(p) for j in range(i, p)]
    pts = []
    for i, j in pairs:
        ei, ej = eye[i], eye[j]
        pts += [v + ei + ej, v + ei - ej, v - ei + ej, v - ei - ej]
    vals = _evaluate(F, np.array(pts), many).reshape(len(pairs), 4, -1)
    d = (vals[:, 0] - vals[:, 1] - vals[:, 2] + vals[:, 3]) / (4 * h * h)
    out = np.empty((p, p, d.shape[1]))
    for k, (i, j) in enumerate(pairs):
        out[i, j] = d[k]
        out[j, i] = d[k]
    return out


class Flag:
    """Bit flags attached to replicates and statistics."""

    ESCAPE = 1  # a retraction step left its domain; the iterate stayed put
    SINGULAR = 2  # chart Hessian was rank deficient
    NONFINITE = 4  # NaN or Inf in a derivative
    OUT_OF_CHART = 8  # inverse retraction failed; statistic set to zero
    ZERO_VARIANCE = 16  # studentizing variance was not positive

    NAMES = {1: "escape", 2: "singular", 4: "nonfinite", 8: "out_of_chart", 16: "zero_variance"}

    @classmethod
    def describe(cls, value):
        return [name for bit, name in cls.NAMES.items() if int(value) & bit]
