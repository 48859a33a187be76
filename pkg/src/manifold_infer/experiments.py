"""Simulation settings and the desk-scale experiment suites.

Settings
--------
``sphere``
    ``S^2`` with truth ``(0, 1, 0)``, Gaussian noise of variance 2.
``stiefel``
    ``St(4, 2)`` with truth ``[[1, 1], [1, -1], [0, 0], [0, 0]] / sqrt(2)``.
``fixedrank``
    Rank-2 ``4 x 4`` matrices with truth ``diag(5, 1, 0, 0)``.
``rank1tensor``
    Rank-one ``3 x 3 x 3`` tensors with truth ``e1 o e1 o e1``.
``barycenter``
    Geodesic barycenter on ``S^2`` of samples concentrated around ``(0, 1, 0)``.
``counterexample``
    Rank-2 ``4 x 4`` matrices with repeated singular values, truth ``diag(1, 1, 0, 0)``.

Gaussian settings other than ``sphere`` use unit noise variance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import stats

from ._parallel import index_map
from .errors import ChartError, EmptyGrid, ManifoldInferError
from .estimator import NewtonConfig, newton_iterate
from .inference import bootstrap_with_statistics, location_test, sandwich, t_value, wald_value
from .io import dumps_json, rows_to_csv
from .losses import GaussianLocation, SphereBarycenter
from .manifolds import FixedRank, RankOneTensor, Sphere, Stiefel

SETTINGS = ("sphere", "stiefel", "fixedrank", "rank1tensor", "barycenter", "counterexample")
CDF_SETTINGS = ("stiefel", "fixedrank", "rank1tensor", "barycenter")
DEFAULT_NOISE = {"sphere": np.sqrt(2.0)}
WALD_GRID = np.arange(1.0, 9.0)
T_GRID = 0.2 * np.arange(-10, 11)
TYPE1_COLUMNS = ("n", "level", "statistic", "acceptance", "epochs", "b", "seed")
CDF_COLUMNS = ("setting", "n", "method", "error", "log_error", "sqrtn_error", "seed")
BARYCENTER_COLUMNS = ("n", "epoch", "dist", "grad_norm", "iterations", "seed")
BARYCENTER_INIT_SCALE = 0.1


# ---------------------------------------------------------------- settings


def _check_setting(setting):
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; expected one of {', '.join(SETTINGS)}")
    return setting


def ground_truth(setting):
    """True parameter of a simulation setting."""
    setting = _check_setting(setting)
    if setting in ("sphere", "barycenter"):
        return np.array([0.0, 1.0, 0.0])
    if setting == "stiefel":
        return np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0], [0.0, 0.0]]) / np.sqrt(2.0)
    if setting == "fixedrank":
        return np.diag([5.0, 1.0, 0.0, 0.0])
    if setting == "counterexample":
        return np.diag([1.0, 1.0, 0.0, 0.0])
    e1 = np.eye(3)[0]
    return np.einsum("i,j,k->ijk", e1, e1, e1)


def setting_manifold(setting):
    setting = _check_setting(setting)
    if setting in ("sphere", "barycenter"):
        return Sphere(3)
    if setting == "stiefel":
        return Stiefel(4, 2)
    if setting in ("fixedrank", "counterexample"):
        return FixedRank(2, 4, 4)
    return RankOneTensor((3, 3, 3))


def setting_model(setting):
    M = setting_manifold(setting)
    return SphereBarycenter(M) if setting == "barycenter" else GaussianLocation(M)


def default_noise(setting):
    return float(DEFAULT_NOISE.get(_check_setting(setting), 1.0))


def derive_seed(*keys):
    """64-bit seed derived from integer keys, independent of call order."""
    words = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def _rng(seed):
    return np.random.default_rng(seed)


def simulate_dataset(setting, n, seed, noise_scale=None):
    """Simulated samples, shape ``(n, *ambient_shape)``.

    Gaussian settings add i.i.d. normal noise with standard deviation
    ``noise_scale`` to the truth. The barycenter setting draws
    ``(cos t sin f, cos f, sin t sin f)`` with ``t ~ U[0, 2 pi)`` and
    ``f ~ Beta(2, 2)``.
    """
    setting = _check_setting(setting)
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    rng = _rng(seed)
    if setting == "barycenter":
        t = rng.uniform(0.0, 2.0 * np.pi, n)
        f = rng.beta(2.0, 2.0, n)
        return np.stack([np.cos(t) * np.sin(f), np.cos(f), np.sin(t) * np.sin(f)], axis=1)
    theta0 = ground_truth(setting)
    scale = default_noise(setting) if noise_scale is None else float(noise_scale)
    return theta0 + scale * rng.standard_normal((n,) + theta0.shape)


def initial_point(setting, data, seed=0):
    """Starting point for the Newton fit.

    Gaussian settings project the sample mean onto the manifold; the
    barycenter setting projects a small seeded perturbation of the truth.
    """
    setting = _check_setting(setting)
    M = setting_manifold(setting)
    if setting == "barycenter":
        rng = _rng(derive_seed(seed, 7))
        return M.nearest_point(ground_truth(setting) + BARYCENTER_INIT_SCALE * rng.standard_normal(3))
    return M.nearest_point(np.asarray(data).mean(axis=0))


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration shared by the experiment suites.

    ``b`` defaults to ``min(1000 n, 50000)``; ``mc`` is the number of
    fresh datasets behind the Monte-Carlo reference CDF.
    """

    setting: str = "sphere"
    n: tuple = (40, 80, 160)
    b: int | None = None
    epochs: int = 30
    seed: int = 0
    noise_scale: float | None = None
    levels: tuple = (0.9, 0.95, 0.975)
    output: str | None = None
    threads: int | None = None
    mc: int = 500
    burn: int = 20

    def __post_init__(self):
        _check_setting(self.setting)
        ns = (self.n,) if np.isscalar(self.n) else tuple(self.n)
        object.__setattr__(self, "n", tuple(int(v) for v in ns))
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.n or min(self.n) < 10:
            raise ValueError("every sample size must be at least 10")
        if int(self.epochs) < 1:
            raise ValueError("epochs must be at least 1")
        if self.b is not None and int(self.b) < 1:
            raise ValueError("b must be positive")
        if int(self.mc) < 1:
            raise ValueError("mc must be positive")
        if any(not 0.0 < v < 1.0 for v in self.levels):
            raise ValueError("levels must lie in (0, 1)")

    def b_for(self, n):
        return int(self.b) if self.b is not None else min(1000 * int(n), 50000)

    def noise(self):
        return default_noise(self.setting) if self.noise_scale is None else float(self.noise_scale)

    def to_dict(self):
        d = asdict(self)
        d["noise_scale"] = self.noise()
        d["b_per_n"] = {str(n): self.b_for(n) for n in self.n}
        d.pop("threads")
        d.pop("output")
        return d


def manifest(config, study, outputs):
    """Run manifest echoing the full configuration."""
    return {"study": study, "config": config.to_dict(), "outputs": list(outputs),
            "settings_index": list(SETTINGS)}


# ---------------------------------------------------------------- CDF metric


def ecdf(samples, x):
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("no samples")
    return np.searchsorted(s, np.asarray(x, dtype=float), side="right") / s.size


def _as_cdf(obj):
    if callable(obj):
        return lambda x: np.asarray(obj(np.asarray(x, dtype=float)), dtype=float)
    s = np.sort(np.asarray(obj, dtype=float).ravel())
    return lambda x: ecdf(s, x)


def cdf_error(samples, reference_cdf, grid):
    """``sup_{x in grid} |F_samples(x) - F_ref(x)|``.

    Either argument may be a sample array (its empirical CDF is used)
    or a vectorized CDF.
    """
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise EmptyGrid("the evaluation grid is empty")
    return float(np.max(np.abs(_as_cdf(samples)(grid) - _as_cdf(reference_cdf)(grid))))


# ---------------------------------------------------------------- type-I table


@dataclass(frozen=True, eq=False)
class _Type1Task:
    config: ExperimentConfig
    n: int


def _type1_epoch(task, e):
    cfg, n = task.config, task.n
    model = setting_model(cfg.setting)
    theta0 = ground_truth(cfg.setting)
    X = simulate_dataset(cfg.setting, n, derive_seed(cfg.seed, n, e, 0), cfg.noise_scale)
    res = location_test(model, X, theta0, b=cfg.b_for(n), seed=derive_seed(cfg.seed, n, e, 1),
                        burn=cfg.burn, threads=1)
    t = [not bool(res.reject_t(1.0 - lev)[0]) for lev in cfg.levels]
    w = [not res.reject_wald(1.0 - lev) for lev in cfg.levels]
    return t, w


def run_type1_table(config):
    """Acceptance rates of the location test under the null.

    For every ``n`` and level, ``epochs`` datasets are tested at
    ``theta_1 = theta_0`` with the two-sided t test on the first chart
    coordinate and the Wald test. Returns rows with the columns of
    :data:`TYPE1_COLUMNS`.
    """
    rows = []
    for n in config.n:
        out = index_map(_type1_epoch, _Type1Task(config, n), int(config.epochs), threads=config.threads)
        t = np.array([o[0] for o in out], dtype=float)
        w = np.array([o[1] for o in out], dtype=float)
        for stat, acc in (("t", t), ("wald", w)):
            for k, lev in enumerate(config.levels):
                rows.append({"n": n, "level": lev, "statistic": stat, "acceptance": float(acc[:, k].mean()),
                             "epochs": int(config.epochs), "b": config.b_for(n), "seed": int(config.seed)})
    return rows


def type1_grid(rows):
    """Pivot :func:`run_type1_table` rows into ``(ns, columns, matrix)``.

    Columns are ``(statistic, level)`` pairs, t first, then Wald.
    """
    ns = sorted({r["n"] for r in rows})
    cols = sorted({(r["statistic"], r["level"]) for r in rows}, key=lambda c: (c[0] != "t", c[1]))
    lookup = {(r["n"], r["statistic"], r["level"]): r["acceptance"] for r in rows}
    mat = np.array([[lookup[(n, s, lev)] for s, lev in cols] for n in ns])
    return ns, cols, mat


# ---------------------------------------------------------------- CDF study


def original_statistics(model, data, theta0, x0, burn=20, a=None):
    """Wald and intrinsic t statistics at the truth, scaled by ``n`` and ``sqrt n``.

    Uses ``v = R^{-1}_{theta_hat}(theta_0)`` and the sandwich at the
    estimate, both in the chart anchored at the estimate. Returns
    ``(n W, sqrt(n) T, flags)``.
    """
    data = model.validate(data)
    n = data.shape[0]
    est = newton_iterate(model, data, model.manifold.check_point(x0), NewtonConfig(max_iter=burn))
    theta = est.x
    anchored = model.with_manifold(model.manifold.with_anchor(theta))
    ch = anchored.manifold.chart(theta)
    sig = sandwich(anchored, data, theta, chart=ch)
    a = np.eye(ch.dim)[0] if a is None else np.asarray(a, dtype=float)
    try:
        v = ch.inverse(theta0)
    except ChartError:
        return 0.0, 0.0, 1
    W, fw = wald_value(v, sig.sigma)
    T, ft = t_value(v, sig.sigma, a)
    return n * W, np.sqrt(n) * T, int(fw | ft)


@dataclass(frozen=True, eq=False)
class _CdfTask:
    config: ExperimentConfig
    setting: str
    n: int


def _reference_one(task, j):
    cfg, s, n = task.config, task.setting, task.n
    X = simulate_dataset(s, n, derive_seed(cfg.seed, SETTINGS.index(s), n, j, 2), cfg.noise_scale)
    try:
        W, T, _ = original_statistics(setting_model(s), X, ground_truth(s), initial_point(s, X, j), cfg.burn)
    except (ManifoldInferError, np.linalg.LinAlgError):
        return 0.0, 0.0
    return W, T


def reference_samples(config, setting, n):
    """Monte-Carlo draws of the scaled original statistics over ``config.mc`` datasets."""
    out = index_map(_reference_one, _CdfTask(config, setting, n), int(config.mc), threads=config.threads)
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def _bootstrap_one(task, e):
    cfg, s, n = task.config, task.setting, task.n
    X = simulate_dataset(s, n, derive_seed(cfg.seed, SETTINGS.index(s), n, e, 3), cfg.noise_scale)
    model = setting_model(s)
    p = model.manifold.dim
    bundle = bootstrap_with_statistics(model, X, initial_point(s, X, e), b=cfg.b_for(n),
                                       seed=derive_seed(cfg.seed, SETTINGS.index(s), n, e, 4),
                                       a=np.eye(p)[0], burn=cfg.burn, threads=1, non_studentized=True)
    st = bundle.stats
    return (n * st["wald"].values, n * st["wald_ns"].values,
            np.sqrt(n) * st["intrinsic_t"].values, np.sqrt(n) * st["intrinsic_t_ns"].values, p)


def cdf_errors_for(config, setting, n, reference=None):
    """Per-epoch CDF errors of every method against the reference CDF.

    Returns a dict ``method -> array of shape (epochs,)``. Methods are
    ``{wald, t}_{studentized, nonstudentized, parametric}``.
    """
    wref, tref = reference if reference is not None else reference_samples(config, setting, n)
    out = index_map(_bootstrap_one, _CdfTask(config, setting, n), int(config.epochs), threads=config.threads)
    p = out[0][4]
    chi2 = stats.chi2(df=p).cdf
    errs = {k: [] for k in ("wald_studentized", "wald_nonstudentized", "wald_parametric",
                            "t_studentized", "t_nonstudentized", "t_parametric")}
    for w, wns, t, tns, _ in out:
        errs["wald_studentized"].append(cdf_error(w, wref, WALD_GRID))
        errs["wald_nonstudentized"].append(cdf_error(wns, wref, WALD_GRID))
        errs["wald_parametric"].append(cdf_error(chi2, wref, WALD_GRID))
        errs["t_studentized"].append(cdf_error(t, tref, T_GRID))
        errs["t_nonstudentized"].append(cdf_error(tns, tref, T_GRID))
        errs["t_parametric"].append(cdf_error(stats.norm.cdf, tref, T_GRID))
    return {k: np.array(v) for k, v in errs.items()}


def run_cdf_study(config, settings=None):
    """CDF approximation errors of the bootstrap versus benchmarks.

    For each setting and ``n``, the reference CDF is the Monte-Carlo
    distribution of the original statistic (``n W`` or ``sqrt(n) T``)
    over ``config.mc`` fresh datasets; each method's error is averaged
    over ``config.epochs`` datasets. Returns rows with the columns of
    :data:`CDF_COLUMNS`.
    """
    settings = (config.setting,) if settings is None else tuple(settings)
    rows = []
    for s in settings:
        if s not in CDF_SETTINGS:
            raise ValueError(f"the CDF study supports {', '.join(CDF_SETTINGS)}, not {s!r}")
        cfg = replace(config, setting=s)
        for n in cfg.n:
            errs = cdf_errors_for(cfg, s, n)
            for method, e in errs.items():
                err = float(e.mean())
                rows.append({"setting": s, "n": n, "method": method, "error": err,
                             "log_error": float(np.log(err)) if err > 0 else -np.inf,
                             "sqrtn_error": float(np.sqrt(n) * err), "seed": int(cfg.seed)})
    return rows


# ---------------------------------------------------------------- barycenter


@dataclass(frozen=True, eq=False)
class _BaryTask:
    config: ExperimentConfig
    n: int


def _barycenter_one(task, e):
    cfg, n = task.config, task.n
    seed = derive_seed(cfg.seed, n, e, 5)
    X = simulate_dataset("barycenter", n, seed)
    model = setting_model("barycenter")
    est = newton_iterate(model, X, initial_point("barycenter", X, seed), NewtonConfig(max_iter=cfg.burn))
    d = float(model.manifold.dist(est.x, ground_truth("barycenter")))
    return d, float(est.grad_norms[-1]), int(est.iterations)


def run_barycenter_study(config):
    """Barycenter fits over ``epochs`` seeded datasets for each ``n``.

    Rows hold the geodesic distance to ``(0, 1, 0)``, the final chart
    gradient norm and the Newton iteration count.
    """
    rows = []
    for n in config.n:
        out = index_map(_barycenter_one, _BaryTask(config, n), int(config.epochs), threads=config.threads)
        for e, (d, g, it) in enumerate(out):
            rows.append({"n": n, "epoch": e, "dist": d, "grad_norm": g, "iterations": it,
                         "seed": int(config.seed)})
    return rows


# ---------------------------------------------------------------- counterexample


def studentized_coordinate_ks(setting, n, b, seed=0, threads=None, noise_scale=None):
    """KS distance between ``sqrt(n) T*`` for the first chart coordinate and ``N(0, 1)``.

    ``T*`` is the bootstrap intrinsic t series studentized by the
    replicate sandwich, from one simulated dataset.
    """
    X = simulate_dataset(setting, n, derive_seed(seed, SETTINGS.index(setting), n, 6), noise_scale)
    model = setting_model(setting)
    bundle = bootstrap_with_statistics(model, X, initial_point(setting, X, seed), b=b,
                                       seed=derive_seed(seed, SETTINGS.index(setting), n, 7),
                                       a=np.eye(model.manifold.dim)[0], threads=threads)
    t = np.sqrt(n) * bundle.stats["intrinsic_t"].values
    return float(stats.kstest(t, "norm").statistic)


# ---------------------------------------------------------------- outputs


def type1_outputs(config, rows):
    """``{filename: text}`` for a type-I run."""
    return {"type1.csv": rows_to_csv(rows, TYPE1_COLUMNS),
            "manifest.json": dumps_json(manifest(config, "type1", ["type1.csv"]))}


def cdf_outputs(config, rows, settings):
    cfg = dict(manifest(config, "cdf", ["cdf_error.csv"]))
    cfg["settings"] = list(settings)
    return {"cdf_error.csv": rows_to_csv(rows, CDF_COLUMNS), "manifest.json": dumps_json(cfg)}


def barycenter_outputs(config, rows):
    return {"barycenter.csv": rows_to_csv(rows, BARYCENTER_COLUMNS),
            "manifest.json": dumps_json(manifest(config, "barycenter", ["barycenter.csv"]))}
