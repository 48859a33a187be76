"""Sandwich covariances, Wald and t statistics, bootstrap confidence regions
and the locational hypothesis test."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._parallel import index_map
from .core import DEFAULT_RCOND, Flag, pinv_sym
from .errors import ChartError, EmptyInput, ManifoldInferError, ZeroVariance
from .estimator import NewtonConfig, fit_and_bootstrap, newton_iterate

B_WARN = 100


# ---------------------------------------------------------------- covariance


@dataclass(frozen=True, eq=False)
class SandwichCovariance:
    """``sigma = H^+ G H^+`` in chart coordinates at ``center``.

    ``hessian_factor`` is ``H``, ``score_outer`` is
    ``G = mean_i g_i g_i^T`` of the per-sample chart gradients.
    """

    sigma: np.ndarray
    hessian_factor: np.ndarray
    score_outer: np.ndarray
    rank: int
    center: np.ndarray
    rcond: float = DEFAULT_RCOND

    @property
    def singular(self):
        return self.rank < self.sigma.shape[0]

    @classmethod
    def from_derivatives(cls, d, center, rcond=DEFAULT_RCOND):
        S = d.sample_grads
        G = S.T @ S / S.shape[0]
        Hp, rank = pinv_sym(d.hessian, rcond)
        sigma = Hp @ G @ Hp
        return cls(0.5 * (sigma + sigma.T), d.hessian, G, rank, center, rcond)

    def pinv(self):
        return pinv_sym(self.sigma, self.rcond)[0]


def sandwich(model, data, center, chart=None, rcond=DEFAULT_RCOND):
    """Sandwich covariance of the empirical loss at ``center``."""
    center = model.manifold.check_point(center)
    d = model.derivatives(center, data, chart=chart)
    return SandwichCovariance.from_derivatives(d, center, rcond)


def _sigma_matrix(sigma):
    return sigma.sigma if isinstance(sigma, SandwichCovariance) else np.asarray(sigma, dtype=float)


# ---------------------------------------------------------------- statistics


def _quad(v, sigma, rcond=DEFAULT_RCOND):
    Sp = pinv_sym(sigma, rcond)[0]
    return float(v @ Sp @ v)


def _coords(manifold, center_from, theta_ref, chart=None):
    ch = chart if chart is not None else manifold.chart(manifold.check_point(center_from))
    return ch.inverse(manifold.check_point(theta_ref))


def wald_value(v, sigma, rcond=DEFAULT_RCOND):
    """``v^T sigma^+ v``, with ``(0, flag)`` on non-finite input."""
    S = _sigma_matrix(sigma)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(S))):
        return 0.0, Flag.NONFINITE
    return _quad(v, S, rcond), 0


def t_value(v, sigma, a):
    """``a^T v / sqrt(a^T sigma a)``, with ``(0, flag)`` on zero variance."""
    S = _sigma_matrix(sigma)
    var = float(a @ S @ a)
    if not (np.isfinite(var) and var > 0.0) or not np.all(np.isfinite(v)):
        return 0.0, Flag.ZERO_VARIANCE
    return float(a @ v) / np.sqrt(var), 0


def wald(manifold, center_from, theta_ref, sigma, chart=None):
    """Wald statistic ``R^{-1}_c(theta)^T sigma^+ R^{-1}_c(theta)``.

    Returns 0 when ``theta_ref`` is outside the chart of ``center_from``.
    """
    try:
        v = _coords(manifold, center_from, theta_ref, chart)
    except ChartError:
        return 0.0
    return wald_value(v, sigma)[0]


def intrinsic_t(manifold, center_from, theta_ref, sigma, a, chart=None):
    """Intrinsic t statistic ``a^T R^{-1}_c(theta) / sqrt(a^T sigma a)``; 0 when undefined."""
    a = np.asarray(a, dtype=float)
    try:
        v = _coords(manifold, center_from, theta_ref, chart)
    except ChartError:
        return 0.0
    return t_value(v, sigma, a)[0]


@dataclass(frozen=True, eq=False)
class Functional:
    """Smooth ambient function ``f`` with an optional analytic gradient."""

    fn: object
    grad: object = None
    name: str = "f"

    def __call__(self, x):
        return float(self.fn(x))


@dataclass(frozen=True)
class _Entry:
    index: tuple

    def __call__(self, x):
        return float(np.asarray(x)[self.index])


@dataclass(frozen=True)
class _EntryGrad:
    index: tuple
    shape: tuple

    def __call__(self, x):
        g = np.zeros(self.shape)
        g[self.index] = 1.0
        return g


def entry_functional(index, shape):
    """``f(X) = X[index]``; picklable, with its exact gradient."""
    index = tuple(int(i) for i in np.atleast_1d(index))
    return Functional(_Entry(index), _EntryGrad(index, tuple(shape)), name=f"entry{list(index)}")


@dataclass(frozen=True)
class _Linear:
    weights: np.ndarray

    def __call__(self, x):
        return float(np.vdot(self.weights, x))


@dataclass(frozen=True)
class _Const:
    value: np.ndarray

    def __call__(self, x):
        return self.value


def linear_functional(weights, offset=0.0):
    """``f(X) = <W, X> + offset``."""
    W = np.asarray(weights, dtype=float)
    fn = _Linear(W) if offset == 0.0 else _Shifted(_Linear(W), float(offset))
    return Functional(fn, _Const(W), name="linear")


@dataclass(frozen=True)
class _Shifted:
    base: object
    offset: float

    def __call__(self, x):
        return self.base(x) + self.offset


def functional_chart_gradient(f, chart):
    """Chart gradient of ``f o R_c`` at zero."""
    if getattr(f, "grad", None) is not None:
        return chart.grad_coords(np.asarray(f.grad(chart.center), dtype=float))
    from .core import fd_chart_gradient

    return fd_chart_gradient(lambda v: f(chart.retract(v)), chart.dim)


def extrinsic_t(manifold, center_from, ref_value, f, sigma, chart=None):
    """``(f(c) - ref_value) / sqrt(g^T sigma g)`` with ``g`` the chart gradient of ``f o R_c``.

    Raises :class:`ZeroVariance` when the denominator vanishes.
    """
    ch = chart if chart is not None else manifold.chart(manifold.check_point(center_from))
    g = functional_chart_gradient(f, ch)
    var = float(g @ _sigma_matrix(sigma) @ g)
    if not (np.isfinite(var) and var > 0.0):
        raise ZeroVariance("extrinsic t statistic has zero variance")
    return (f(ch.center) - float(ref_value)) / np.sqrt(var)


def empirical_quantile(values, target_cdf):
    """Smallest sample value ``x`` minimizing ``|F_hat(x) - target_cdf|``."""
    x = np.sort(np.asarray(values, dtype=float).ravel())
    if x.size == 0:
        raise EmptyInput("no values to take a quantile of")
    # F_hat at each distinct sample point counts every tied value
    F = np.searchsorted(x, x, side="right") / x.size
    return float(x[int(np.argmin(np.abs(F - float(target_cdf))))])


# ---------------------------------------------------------------- replicate series


@dataclass(frozen=True)
class StatisticSeries:
    """Bootstrap values of one statistic; flagged entries are exactly zero."""

    values: np.ndarray
    kind: str
    flags: np.ndarray

    @property
    def zero_flag_count(self):
        return int(np.count_nonzero(self.flags))

    @property
    def flagged_fraction(self):
        return self.zero_flag_count / max(1, self.values.size)

    def quantile(self, target):
        return empirical_quantile(self.values, target)

    def to_csv(self):
        return "".join(f"{float(v)!r}\n" for v in self.values)


@dataclass(frozen=True, eq=False)
class ReplicateStatistics:
    """Per-replicate statistic evaluation at ``theta_star`` against ``theta_hat``.

    Computes the studentized values (with the replicate sandwich) and the
    non-studentized values (with ``sigma_hat`` when given) of the Wald
    statistic, the intrinsic t statistic for direction ``a`` and the
    extrinsic t statistic for ``functional``.
    """

    a: np.ndarray | None = None
    functional: Functional | None = None
    sigma_hat: np.ndarray | None = None
    f_hat: float | None = None
    pinv_t: bool = False

    def __call__(self, model, Xi, theta_star, theta_hat, flags):
        return _evaluate_replicate(self, model, Xi, theta_star, theta_hat, flags)


LAYOUT = ("wald", "wald_ns", "intrinsic_t", "intrinsic_t_ns", "extrinsic_t", "extrinsic_t_ns")


def _evaluate_replicate(spec, model, Xi, theta_star, theta_hat, flags):
    vals = np.zeros(len(LAYOUT))
    fl = np.full(len(LAYOUT), int(flags), dtype=np.int64)
    manifold = model.manifold
    try:
        ch = manifold.chart(theta_star)
        cov = SandwichCovariance.from_derivatives(model.derivatives(theta_star, Xi, chart=ch), theta_star)
        v = ch.inverse(theta_hat)
    except ChartError:
        fl[:] |= Flag.OUT_OF_CHART
        return vals, _zero_flagged(vals, fl)
    except (ManifoldInferError, np.linalg.LinAlgError):
        fl[:] |= Flag.NONFINITE
        return vals, _zero_flagged(vals, fl)
    if cov.singular:
        fl[:] |= Flag.SINGULAR
    Sinv = cov.pinv()
    vals[0] = float(v @ Sinv @ v)
    if spec.sigma_hat is not None:
        vals[1] = float(v @ pinv_sym(spec.sigma_hat)[0] @ v)
    if spec.a is not None:
        a = np.asarray(spec.a, dtype=float)
        S = Sinv if spec.pinv_t else cov.sigma
        vals[2], f2 = t_value(v, S, a)
        fl[2] |= f2
        if spec.sigma_hat is not None:
            vals[3], f3 = t_value(v, spec.sigma_hat, a)
            fl[3] |= f3
    if spec.functional is not None:
        g = functional_chart_gradient(spec.functional, ch)
        diff = spec.functional(theta_star) - spec.f_hat
        for k, S in ((4, cov.sigma), (5, spec.sigma_hat)):
            if S is None:
                continue
            var = float(g @ S @ g)
            if np.isfinite(var) and var > 0.0:
                vals[k] = diff / np.sqrt(var)
            else:
                fl[k] |= Flag.ZERO_VARIANCE
    return vals, _zero_flagged(vals, fl)


def _zero_flagged(vals, fl):
    # the escape flag alone does not invalidate a statistic
    bad = (fl & ~np.int64(Flag.ESCAPE | Flag.SINGULAR)) != 0
    vals[bad] = 0.0
    return fl


@dataclass(frozen=True, eq=False)
class _SeriesTask:
    model: object
    data: np.ndarray
    replicates: np.ndarray
    flags: np.ndarray
    theta_hat: np.ndarray
    seed: int
    resampler: object
    spec: ReplicateStatistics


def _series_one(task, i):
    Xi = task.data[task.resampler(task.seed, i, task.data.shape[0])]
    return task.spec(task.model, Xi, task.replicates[i], task.theta_hat, int(task.flags[i]))


def _collect(out):
    vals = np.array([o[0] for o in out])
    fl = np.array([o[1] for o in out], dtype=np.int64)
    return {k: StatisticSeries(vals[:, j].copy(), k, fl[:, j].copy()) for j, k in enumerate(LAYOUT)}


def replicate_series(bundle, data, spec, threads=None):
    """Evaluate ``spec`` on every replicate of ``bundle``.

    Replicate datasets are regenerated from the bundle's seed, so the
    series is identical whether computed here or inside the bootstrap.
    """
    data = np.asarray(data, dtype=float)
    task = _SeriesTask(bundle.model, data, bundle.replicates, bundle.flags, bundle.theta_hat,
                       bundle.seed, bundle.resampler, spec)
    return _collect(index_map(_series_one, task, bundle.b, threads=threads))


def bootstrap_with_statistics(model, data, x0, b, seed, a=None, functional=None, burn=20,
                              threads=None, non_studentized=False, pinv_t=False):
    """Bundle plus statistic series in a single pass over the replicates.

    The point estimate is computed first so that ``sigma_hat`` (for the
    non-studentized series) and ``f(theta_hat)`` are available to every
    replicate.
    """
    data = model.validate(data)
    est = newton_iterate(model, data, model.manifold.check_point(x0), NewtonConfig(max_iter=burn))
    theta = est.x
    anchored = model.with_manifold(model.manifold.with_anchor(theta))
    sig = sandwich(anchored, data, theta).sigma if non_studentized else None
    fhat = functional(theta) if functional is not None else None
    spec = ReplicateStatistics(None if a is None else np.asarray(a, dtype=float), functional, sig, fhat, pinv_t)
    bundle = fit_and_bootstrap(model, data, theta, burn=burn, b=b, seed=seed, threads=threads, hook=spec,
                               estimate=est)
    bundle.stats.update(_collect(bundle.stats.pop("hook")))
    bundle.stats["spec"] = spec
    return bundle


def _series(bundle, data, key, spec, threads):
    cached = bundle.stats.get("spec")
    if cached is not None and _compatible(cached, spec) and key in bundle.stats:
        return bundle.stats[key]
    res = replicate_series(bundle, data, spec, threads=threads)
    return res[key]


def _compatible(a, b):
    def same(x, y):
        if x is None or y is None:
            return x is None and y is None
        return np.array_equal(np.asarray(x), np.asarray(y))

    return same(a.a, b.a) and (a.functional is b.functional or b.functional is None) and a.pinv_t == b.pinv_t


# ---------------------------------------------------------------- regions


def _flag_summary(series):
    names = sorted({n for f in np.unique(series.flags) for n in Flag.describe(f)})
    return {"count": series.zero_flag_count, "fraction": series.flagged_fraction, "kinds": names}


def _check_b(bundle):
    if bundle.b < B_WARN:
        warnings.warn(f"only {bundle.b} bootstrap replicates; at least {B_WARN} recommended", stacklevel=3)


def _json_float(x):
    x = float(x)
    if np.isfinite(x):
        return x
    return None


@dataclass
class ConfidenceRegion:
    """Bootstrap confidence region.

    ``bounds`` holds the studentized limits ``(lo, hi)`` (``-inf``/``inf``
    for one-sided regions); the Wald region uses ``(0, quantile)``.
    """

    kind: str
    level: float
    quantile: float
    sigma: SandwichCovariance
    manifold: object
    center: np.ndarray
    series: StatisticSeries
    bounds: tuple
    direction: np.ndarray | None = None
    functional: Functional | None = None
    sided: str = "two"
    decision: str | None = None
    extra: dict = field(default_factory=dict)

    def statistic(self, theta):
        """Studentized value of ``theta`` (``None`` when undefined)."""
        try:
            v = self.manifold.chart(self.center).inverse(self.manifold.check_point(theta))
        except ChartError:
            return None
        if self.kind == "wald":
            return wald_value(v, self.sigma)[0]
        if self.kind == "intrinsic_t":
            sd = np.sqrt(float(self.direction @ self.sigma.sigma @ self.direction))
            return float(self.direction @ v) / sd if sd > 0 else None
        raise TypeError("use contains_value for extrinsic regions")

    def contains(self, theta):
        if self.kind == "extrinsic_t":
            return self.contains_value(self.functional(np.asarray(theta, dtype=float)))
        s = self.statistic(theta)
        if s is None:
            return False
        lo, hi = self.bounds
        return bool(lo <= s <= hi)

    def contains_value(self, value):
        lo, hi = self.interval
        return bool(lo <= float(value) <= hi)

    @property
    def interval(self):
        """Interval for ``a^T R^{-1}(theta)`` (intrinsic) or ``f(theta)`` (extrinsic)."""
        lo, hi = self.bounds
        if self.kind == "intrinsic_t":
            sd = np.sqrt(float(self.direction @ self.sigma.sigma @ self.direction))
            return lo * sd, hi * sd
        if self.kind == "extrinsic_t":
            sd = self.extra["sd"]
            fh = self.extra["f_hat"]
            return fh - hi * sd, fh - lo * sd
        raise TypeError("the Wald region is not an interval")

    def to_dict(self):
        d = {
            "kind": self.kind,
            "level": float(self.level),
            "quantile": float(self.quantile),
            "sigma": [[float(v) for v in row] for row in self.sigma.sigma],
            "flags": _flag_summary(self.series),
            "decision": self.decision,
        }
        if self.kind != "wald":
            d["bounds"] = [_json_float(v) for v in self.bounds]
            d["sided"] = self.sided
            d["interval"] = [_json_float(v) for v in self.interval]
        if self.direction is not None:
            d["direction"] = [float(v) for v in self.direction]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _level(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 1.0 - alpha


def _sigma_hat(bundle, data):
    return sandwich(bundle.model, data, bundle.theta_hat)


def wald_region(bundle, data, alpha, threads=None):
    """Wald-type bootstrap confidence region.

    ``W*[i] = R^{-1}_{theta*_i}(theta_hat)^T S_i^+ R^{-1}_{theta*_i}(theta_hat)``
    with ``S_i`` the replicate sandwich at ``theta*_i``; the region is
    ``{theta : R^{-1}_{theta_hat}(theta)^T S^+ R^{-1}_{theta_hat}(theta) <= q_{1-alpha}(W*)}``.
    """
    level = _level(alpha)
    _check_b(bundle)
    series = _series(bundle, data, "wald", ReplicateStatistics(), threads)
    w = empirical_quantile(series.values, level)
    sig = _sigma_hat(bundle, data)
    return ConfidenceRegion("wald", level, w, sig, bundle.manifold, bundle.theta_hat, series, (0.0, w))


def _t_bounds(series, alpha, sided):
    if sided == "two":
        lo, hi = series.quantile(alpha / 2), series.quantile(1 - alpha / 2)
        return (lo, hi), hi
    if sided == "upper":
        hi = series.quantile(1 - alpha)
        return (-np.inf, hi), hi
    if sided == "lower":
        lo = series.quantile(alpha)
        return (lo, np.inf), lo
    raise ValueError("sided must be 'two', 'upper' or 'lower'")


def intrinsic_t_interval(bundle, data, a, alpha, sided="two", pinv_t=False, threads=None):
    """Intrinsic t bootstrap interval for ``a^T R^{-1}_{theta_hat}(theta_0)``.

    Two-sided: ``a^T R^{-1}(theta) in [q_{alpha/2}, q_{1-alpha/2}] sd``
    with ``sd = sqrt(a^T S a)``. ``"upper"`` keeps ``(-inf, q_{1-alpha} sd]``
    and ``"lower"`` keeps ``[q_alpha sd, inf)``. With ``pinv_t`` the
    replicates are studentized by ``a^T S_i^+ a`` instead of ``a^T S_i a``.
    """
    level = _level(alpha)
    _check_b(bundle)
    a = np.asarray(a, dtype=float)
    if not bundle.manifold.distinct_singular_values(bundle.theta_hat):
        warnings.warn("chart is degenerate at the estimate (repeated singular values)", stacklevel=2)
    series = _series(bundle, data, "intrinsic_t", ReplicateStatistics(a=a, pinv_t=pinv_t), threads)
    bounds, q = _t_bounds(series, 1.0 - level, sided)
    sig = _sigma_hat(bundle, data)
    return ConfidenceRegion("intrinsic_t", level, q, sig, bundle.manifold, bundle.theta_hat, series,
                            bounds, direction=a, sided=sided)


def extrinsic_t_interval(bundle, data, f, alpha, sided="two", threads=None):
    """Extrinsic t bootstrap interval for ``f(theta_0)``.

    ``T*[i] = (f(theta*_i) - f(theta_hat)) / sqrt(g_i^T S_i g_i)``; the
    two-sided interval is ``[f_hat - q_{1-alpha/2} sd, f_hat - q_{alpha/2} sd]``
    and the one-sided upper bound is ``f_hat - q_alpha sd``.
    """
    level = _level(alpha)
    _check_b(bundle)
    if not isinstance(f, Functional):
        f = Functional(f)
    fh = f(bundle.theta_hat)
    sig = _sigma_hat(bundle, data)
    ch = bundle.manifold.chart(bundle.theta_hat)
    g = functional_chart_gradient(f, ch)
    var = float(g @ sig.sigma @ g)
    if not (np.isfinite(var) and var > 0.0):
        raise ZeroVariance("extrinsic t statistic has zero variance")
    spec = ReplicateStatistics(functional=f, f_hat=fh)
    series = _series(bundle, data, "extrinsic_t", spec, threads)
    if sided == "two":
        lo, hi = series.quantile((1.0 - level) / 2), series.quantile(1 - (1.0 - level) / 2)
        bounds, q = (lo, hi), hi
    elif sided == "upper":
        lo = series.quantile(1.0 - level)
        bounds, q = (lo, np.inf), lo
    elif sided == "lower":
        hi = series.quantile(level)
        bounds, q = (-np.inf, hi), hi
    else:
        raise ValueError("sided must be 'two', 'upper' or 'lower'")
    return ConfidenceRegion("extrinsic_t", level, q, sig, bundle.manifold, bundle.theta_hat, series,
                            bounds, functional=f, sided=sided, extra={"sd": np.sqrt(var), "f_hat": fh})


# ---------------------------------------------------------------- location test


@dataclass
class LocationTestResult:
    """Outcome of the bootstrap test of ``H0: theta_0 = theta_1``."""

    t: np.ndarray
    wald: float
    t_star: np.ndarray  # (b, p)
    wald_star: np.ndarray  # (b,)
    flags: dict
    theta_hat: np.ndarray
    eta_hat: np.ndarray
    sigma: np.ndarray

    def reject_t(self, alpha):
        """Two-sided per-coordinate decisions at level ``alpha``."""
        out = []
        for j in range(self.t.size):
            lo = empirical_quantile(self.t_star[:, j], alpha / 2)
            hi = empirical_quantile(self.t_star[:, j], 1 - alpha / 2)
            out.append(bool(self.t[j] < lo or self.t[j] > hi))
        return np.array(out)

    def reject_wald(self, alpha):
        return bool(self.wald > empirical_quantile(self.wald_star, 1 - alpha))

    def critical_values(self, alpha):
        return {
            "t": [
                [empirical_quantile(self.t_star[:, j], alpha / 2), empirical_quantile(self.t_star[:, j], 1 - alpha / 2)]
                for j in range(self.t.size)
            ],
            "wald": empirical_quantile(self.wald_star, 1 - alpha),
        }

    def to_dict(self, alpha):
        rt = self.reject_t(alpha)
        rw = self.reject_wald(alpha)
        return {
            "kind": "location_test",
            "level": 1.0 - float(alpha),
            "t": [float(v) for v in self.t],
            "wald": float(self.wald),
            "critical_values": self.critical_values(alpha),
            "reject_t": [bool(v) for v in rt],
            "reject_wald": rw,
            "sigma": [[float(v) for v in row] for row in self.sigma],
            "flags": self.flags,
            "decision": "reject" if (rw or rt.any()) else "accept",
        }


def _phi_statistics(model, data, phi_chart, theta, eta_ref):
    """``(eta, T, W, flags)`` in the chart ``phi`` around ``eta_ref``."""
    eta = phi_chart.inverse(theta)
    d = model.pullback_derivatives(phi_chart, eta, data)
    cov = SandwichCovariance.from_derivatives(d, theta)
    diff = eta - eta_ref
    flags = Flag.SINGULAR if cov.singular else 0
    dg = np.diag(cov.sigma)
    T = np.zeros(eta.size)
    ok = dg > 0
    T[ok] = diff[ok] / np.sqrt(dg[ok])
    if not np.all(ok):
        flags |= Flag.ZERO_VARIANCE
    W = float(diff @ cov.pinv() @ diff)
    return eta, T, W, flags, cov


@dataclass(frozen=True, eq=False)
class _PhiHook:
    phi: object
    eta_hat: np.ndarray

    def __call__(self, model, Xi, theta_star, theta_hat, flags):
        p = self.eta_hat.size
        if flags & Flag.NONFINITE:
            return np.zeros(p), 0.0, int(flags)
        try:
            _, T, W, f, _ = _phi_statistics(model, Xi, self.phi, theta_star, self.eta_hat)
        except ChartError:
            return np.zeros(p), 0.0, int(flags) | Flag.OUT_OF_CHART
        except (ManifoldInferError, np.linalg.LinAlgError):
            return np.zeros(p), 0.0, int(flags) | Flag.NONFINITE
        return T, W, int(flags) | f


def location_test(model, data, theta1, alpha=0.1, b=1000, seed=0, burn=20, threads=None):
    """Bootstrap test of ``H0: theta_0 = theta_1`` in the chart ``phi = R^{-1}_{theta_1}``.

    With ``eta_hat = phi(theta_hat)`` and ``S`` the sandwich of
    ``eta -> L_n(R_{theta_1}(eta))`` at ``eta_hat``, the statistics are
    ``T_j = eta_hat_j / sqrt(S_jj)`` and ``W = eta_hat^T S^+ eta_hat``.
    Their bootstrap versions are centered at ``eta_hat`` and studentized
    by the replicate sandwich at ``phi(theta*_i)``. Any statistic that
    cannot be formed is set to zero and flagged.

    Returns a :class:`LocationTestResult`; decisions for any level come
    from :meth:`LocationTestResult.reject_t` and ``reject_wald``.
    """
    data = model.validate(data)
    theta1 = model.manifold.check_point(theta1)
    phi = model.manifold.with_anchor(theta1).chart(theta1)
    est = newton_iterate(model, data, theta1, NewtonConfig(max_iter=burn))
    theta = est.x
    p = model.manifold.dim
    try:
        eta, T, W, f0, cov = _phi_statistics(model, data, phi, theta, np.zeros(p))
        sigma = cov.sigma
    except ChartError:
        eta, T, W, f0, sigma = np.zeros(p), np.zeros(p), 0.0, Flag.OUT_OF_CHART, np.zeros((p, p))
    hook = _PhiHook(phi, eta)
    bundle = fit_and_bootstrap(model, data, theta, burn=burn, b=b, seed=seed, threads=threads, hook=hook,
                               estimate=est)
    res = bundle.stats["hook"]
    t_star = np.array([r[0] for r in res])
    w_star = np.array([r[1] for r in res])
    fl = np.array([r[2] for r in res], dtype=np.int64)
    bad = (fl & (Flag.OUT_OF_CHART | Flag.NONFINITE | Flag.ZERO_VARIANCE)) != 0
    flags = {"statistic": int(f0), "replicates_flagged": int(bad.sum()), "fraction": float(bad.mean())}
    return LocationTestResult(T, W, t_star, w_star, flags, theta, eta, sigma)
