"""Riemannian Newton fitting and the two-step Newton bootstrap."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import index_map
from .core import DEFAULT_RCOND, Flag, pinv_sym
from .errors import ChartError, DomainEscape, NonFinite, RankDeficient


@dataclass(frozen=True)
class NewtonConfig:
    """Settings for :func:`newton_iterate`.

    Parameters
    ----------
    max_iter : int
        Number of Newton steps ``t``.
    grad_tol : float
        Early stop once the chart gradient norm is at most this value.
    rcond : float
        Relative eigenvalue cutoff of the Hessian pseudo-inverse.
    """

    max_iter: int = 20
    grad_tol: float = 1e-12
    rcond: float = DEFAULT_RCOND

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class NewtonResult:
    x: np.ndarray
    grad_norms: list
    iterations: int
    flags: int = 0
    grad_tol: float = 0.0

    @property
    def converged(self):
        return bool(self.grad_norms) and self.grad_norms[-1] <= self.grad_tol


def _step(model, data, x, rcond, chart=None):
    """One Newton step; returns ``(x_new, grad_norm, flags)``."""
    ch = chart if chart is not None else model.manifold.chart(x)
    d = model.derivatives(x, data, chart=ch, with_samples=False)
    g, H = d.grad, d.hessian
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        raise NonFinite("non-finite chart derivatives")
    Hp, rank = pinv_sym(H, rcond)
    flags = 0 if rank == g.size else Flag.SINGULAR
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return x, gn, flags
    try:
        return ch.retract(-(Hp @ g)), gn, flags
    except DomainEscape:
        return x, gn, flags | Flag.ESCAPE


def newton_step(model, data, x, rcond=DEFAULT_RCOND):
    """``R_x(-H^+ g)`` for the chart gradient ``g`` and Hessian ``H`` at ``x``.

    Returns ``x`` itself when the step leaves the retraction domain.
    """
    x = model.manifold.check_point(x)
    return _step(model, data, x, rcond)[0]


def chart_grad_norm(model, data, x, chart=None):
    ch = chart if chart is not None else model.manifold.chart(x)
    return float(np.linalg.norm(model.chart_gradient(x, data, chart=ch)))


def newton_iterate(model, data, x0, config=None, early_stop=True, first_chart=None):
    """Riemannian Newton iteration.

    Runs ``config.max_iter`` steps, stopping early when the chart gradient
    norm falls to ``config.grad_tol`` (unless ``early_stop`` is false).
    ``grad_norms`` logs the gradient norm at every evaluated iterate;
    with ``early_stop`` its last entry belongs to the returned point.
    """
    config = config or NewtonConfig()
    x = np.asarray(x0, dtype=float)
    norms, flags, steps = [], 0, 0
    chart = first_chart
    for _ in range(config.max_iter):
        x_new, gn, f = _step(model, data, x, config.rcond, chart=chart)
        chart = None
        norms.append(gn)
        flags |= f
        if early_stop and gn <= config.grad_tol:
            break
        x = x_new
        steps += 1
        if f & Flag.ESCAPE:
            break
    else:
        if early_stop:
            norms.append(chart_grad_norm(model, data, x))
    return NewtonResult(x, norms, steps, int(flags), config.grad_tol)


def resample_indices(seed, i, n):
    """Bootstrap indices for replicate ``i`` from a counter-based generator.

    The stream depends only on ``(seed, i)``, never on execution order.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(i)])))
    return rng.integers(0, n, size=n)


@dataclass
class BootstrapBundle:
    """Point estimate with its two-step Newton bootstrap replicates.

    ``stats`` caches per-replicate statistic series computed by the
    inference routines.
    """

    theta_hat: np.ndarray
    replicates: np.ndarray
    seed: int
    flags: np.ndarray
    fit: NewtonResult
    model: object
    n: int
    resampler: object = resample_indices
    stats: dict = field(default_factory=dict)

    @property
    def b(self):
        return self.replicates.shape[0]

    @property
    def manifold(self):
        return self.model.manifold

    def indices(self, i):
        return self.resampler(self.seed, i, self.n)

    def replicate_data(self, data, i):
        return np.asarray(data)[self.indices(i)]


@dataclass(frozen=True, eq=False)
class _ReplicateTask:
    model: object
    data: np.ndarray
    theta_hat: np.ndarray
    seed: int
    rcond: float
    resampler: object
    hook: object
    chart: object


def _replicate(task, i):
    Xi = task.data[task.resampler(task.seed, i, task.data.shape[0])]
    cfg = NewtonConfig(max_iter=2, rcond=task.rcond)
    try:
        res = newton_iterate(task.model, Xi, task.theta_hat, cfg, early_stop=False, first_chart=task.chart)
        x, flags = res.x, res.flags
    except (NonFinite, RankDeficient, ChartError, np.linalg.LinAlgError):
        x, flags = task.theta_hat, Flag.NONFINITE
    extra = None
    if task.hook is not None:
        extra = task.hook(task.model, Xi, x, task.theta_hat, flags)
    return x, flags, extra


def fit(model, data, x0, burn=20, config=None):
    """Stage one: ``burn`` Newton iterations from ``x0`` with early stopping."""
    data = model.validate(data)
    config = config or NewtonConfig(max_iter=burn)
    return newton_iterate(model, data, model.manifold.check_point(x0), config)


def fit_and_bootstrap(model, data, x0, burn=20, b=1000, seed=0, threads=None, config=None,
                      hook=None, resampler=resample_indices, estimate=None):
    """Estimate, then resample with two Newton steps per replicate.

    Parameters
    ----------
    model : LossModel
    data : array, shape (n, *ambient_shape)
    x0 : array
        Initial point in the basin of the estimator.
    burn : int
        Newton iterations for the point estimate (early stop at ``grad_tol``).
    b : int
        Number of bootstrap replicates.
    seed : int
        Master seed; replicate ``i`` resamples with a stream keyed by ``(seed, i)``.
    threads : int, optional
        Worker processes; results are identical for every worker count.
    hook : callable, optional
        ``hook(model, replicate_data, theta_star, theta_hat, flags)``
        evaluated inside each replicate; results land in ``bundle.stats["hook"]``.
    estimate : NewtonResult, optional
        Precomputed point estimate; skips the fitting stage.

    Returns
    -------
    BootstrapBundle
        Uses ``model`` re-anchored at the point estimate, so every chart
        of the replicates shares the estimate's orthogonal complements.
    """
    if int(b) < 1:
        raise ValueError("b must be at least 1")
    config = config or NewtonConfig(max_iter=burn)
    data = model.validate(data)
    if estimate is None:
        estimate = newton_iterate(model, data, model.manifold.check_point(x0), config)
    est = estimate
    theta = est.x
    anchored = model.with_manifold(model.manifold.with_anchor(theta))
    task = _ReplicateTask(anchored, data, theta, int(seed), config.rcond, resampler, hook,
                          anchored.manifold.chart(theta))
    out = index_map(_replicate, task, int(b), threads=threads)
    reps = np.array([o[0] for o in out])
    flags = np.array([o[1] for o in out], dtype=np.int64)
    bundle = BootstrapBundle(theta, reps, int(seed), flags, est, anchored, data.shape[0], resampler)
    if hook is not None:
        bundle.stats["hook"] = [o[2] for o in out]
    return bundle
