"""Command-line interface.

Subcommands: ``estimate``, ``infer {wald,intrinsic-t,extrinsic-t}``,
``test`` and ``simulate --study {type1,cdf,barycenter}``. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments as ex
from .errors import (
    AntipodalSample,
    ChartError,
    EmptyInput,
    ManifoldInferError,
    NonFinite,
    ShapeMismatch,
)
from .estimator import NewtonConfig, fit_and_bootstrap, newton_iterate
from .inference import (
    entry_functional,
    extrinsic_t_interval,
    intrinsic_t_interval,
    linear_functional,
    location_test,
    sandwich,
    wald_region,
)
from .io import (
    format_float,
    read_dataset,
    read_point,
    write_json,
    write_matrix_csv,
    write_point,
)
from .losses import make_loss
from .manifolds import parse_manifold

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
KNOWN_SETTINGS = {"sphere:3": "sphere", "stiefel:4,2": "stiefel", "fixedrank:2,4,4": "fixedrank",
                  "rank1tensor:3,3,3": "rank1tensor"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- parsing helpers


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _alpha(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return v


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("expected positive integers")
    return tuple(vals)


def parse_floats(text):
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def parse_simulation(text):
    """``key=value`` pairs, e.g. ``n=200,seed=7,noise=1.5,setting=sphere``."""
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise UsageError(f"malformed simulation spec {text!r}")
        k, v = (s.strip() for s in part.split("=", 1))
        out[k] = v
    unknown = set(out) - {"n", "seed", "noise", "setting"}
    if unknown:
        raise UsageError(f"unknown simulation keys: {', '.join(sorted(unknown))}")
    try:
        n = int(out.get("n", 100))
        seed = int(out.get("seed", 0))
        noise = float(out["noise"]) if "noise" in out else None
    except ValueError:
        raise UsageError(f"malformed simulation spec {text!r}") from None
    if n < 1:
        raise UsageError("simulation n must be positive")
    return {"n": n, "seed": seed, "noise": noise, "setting": out.get("setting")}


def _manifold(args):
    try:
        return parse_manifold(args.manifold)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _simulate(manifold, loss_kind, spec):
    setting = spec["setting"]
    if setting is None:
        setting = "barycenter" if loss_kind == "barycenter" else KNOWN_SETTINGS.get(manifold.spec())
    if setting is not None:
        if setting not in ex.SETTINGS:
            raise UsageError(f"unknown setting {setting!r}")
        if ex.setting_manifold(setting).spec() != manifold.spec():
            raise UsageError(f"setting {setting!r} does not live on {manifold.spec()}")
        return ex.simulate_dataset(setting, spec["n"], spec["seed"], spec["noise"])
    # generic manifold: truth drawn from the seed
    rng = np.random.default_rng(ex.derive_seed(spec["seed"], 11))
    truth = manifold.random_point(rng)
    scale = 1.0 if spec["noise"] is None else spec["noise"]
    return truth + scale * rng.standard_normal((spec["n"],) + truth.shape)


def _load(args):
    """``(model, data, x0)`` from the common options."""
    M = _manifold(args)
    try:
        model = make_loss(args.loss, M)
    except (ValueError, TypeError) as err:
        raise UsageError(str(err)) from None
    if (args.data is None) == (args.simulate is None):
        raise UsageError("give exactly one of --data and --simulate")
    if args.data is not None:
        if not os.path.exists(args.data):
            raise DataError(f"data file not found: {args.data}")
        try:
            data = read_dataset(args.data, M.ambient_shape)
        except (ValueError, OSError) as err:
            raise DataError(f"cannot read {args.data}: {err}") from None
    else:
        data = _simulate(M, args.loss, parse_simulation(args.simulate))
    try:
        data = model.validate(data)
    except (EmptyInput, ShapeMismatch, NonFinite, ValueError) as err:
        raise DataError(str(err)) from None
    if args.x0 is not None:
        try:
            x0 = read_point(args.x0, M.ambient_shape)
        except (ValueError, OSError) as err:
            raise DataError(f"cannot read {args.x0}: {err}") from None
    else:
        x0 = M.nearest_point(data.mean(axis=0))
    return model, data, x0


def _out_dir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _fit(model, data, x0, burn):
    return newton_iterate(model, data, model.manifold.check_point(x0), NewtonConfig(max_iter=burn))


# ---------------------------------------------------------------- commands


def cmd_estimate(args):
    model, data, x0 = _load(args)
    est = _fit(model, data, x0, args.burn)
    anchored = model.with_manifold(model.manifold.with_anchor(est.x))
    sig = sandwich(anchored, data, est.x)
    out = _out_dir(args)
    write_point(os.path.join(out, "theta.csv"), est.x)
    with open(os.path.join(out, "grad_norms.csv"), "w") as fh:
        fh.write("".join(format_float(g) + "\n" for g in est.grad_norms))
    write_matrix_csv(os.path.join(out, "sigma.csv"), sig.sigma)
    print(f"estimate: {est.iterations} Newton steps, final gradient norm {format_float(est.grad_norms[-1])}")
    print(f"wrote theta.csv, grad_norms.csv, sigma.csv to {out}")
    return EXIT_OK


def _functional(args, shape):
    spec = args.functional or "entry:" + ",".join("0" for _ in shape)
    kind, _, rest = spec.partition(":")
    if kind == "entry":
        try:
            idx = tuple(int(v) for v in rest.split(","))
        except ValueError:
            raise UsageError(f"malformed functional {spec!r}") from None
        if len(idx) != len(shape) or any(not 0 <= i < s for i, s in zip(idx, shape)):
            raise UsageError(f"entry index {idx} out of range for shape {shape}")
        return entry_functional(idx, shape)
    if kind == "linear":
        w = parse_floats(rest)
        if w.size != int(np.prod(shape)):
            raise UsageError(f"linear functional needs {int(np.prod(shape))} weights")
        return linear_functional(w.reshape(shape, order="F"))
    raise UsageError(f"unknown functional kind {kind!r}")


def cmd_infer(args):
    model, data, x0 = _load(args)
    M = model.manifold
    p = M.dim
    a = np.eye(p)[0] if args.a is None else parse_floats(args.a)
    if a.size != p:
        raise UsageError(f"direction needs {p} entries")
    f = _functional(args, M.ambient_shape) if args.mode == "extrinsic-t" else None
    est = _fit(model, data, x0, args.burn)
    bundle = fit_and_bootstrap(model, data, est.x, burn=args.burn, b=args.b, seed=args.seed,
                               threads=args.threads, estimate=est)
    if args.mode == "wald":
        region = wald_region(bundle, data, args.alpha, threads=args.threads)
    elif args.mode == "intrinsic-t":
        region = intrinsic_t_interval(bundle, data, a, args.alpha, sided=args.sided, threads=args.threads)
    else:
        region = extrinsic_t_interval(bundle, data, f, args.alpha, sided=args.sided, threads=args.threads)
    if region.series.zero_flag_count == region.series.values.size:
        print("every bootstrap replicate was flagged", file=sys.stderr)
        return EXIT_NUMERIC
    out = _out_dir(args)
    query = None
    if args.query is not None:
        try:
            query = read_point(args.query, M.ambient_shape)
        except (ValueError, OSError) as err:
            raise DataError(f"cannot read {args.query}: {err}") from None
        region.decision = "inside" if region.contains(query) else "outside"
    d = region.to_dict()
    d["theta_hat"] = [float(v) for v in np.ravel(bundle.theta_hat, order="F")]
    d["b"] = int(bundle.b)
    d["seed"] = int(args.seed)
    write_json(os.path.join(out, "region.json"), d)
    with open(os.path.join(out, "series.csv"), "w") as fh:
        fh.write(region.series.to_csv())
    print(f"{region.kind} region at level {format_float(region.level)}: quantile {format_float(region.quantile)}")
    if region.kind != "wald":
        lo, hi = region.interval
        print(f"interval [{format_float(lo)}, {format_float(hi)}]")
    if query is not None:
        print(region.decision)
    return EXIT_OK


def cmd_test(args):
    model, data, _ = _load(args)
    M = model.manifold
    if args.null is None:
        raise UsageError("test requires --null")
    if os.path.exists(args.null):
        try:
            theta1 = read_point(args.null, M.ambient_shape)
        except (ValueError, OSError) as err:
            raise DataError(f"cannot read {args.null}: {err}") from None
    else:
        vals = parse_floats(args.null)
        if vals.size != int(np.prod(M.ambient_shape)):
            raise UsageError(f"--null needs {int(np.prod(M.ambient_shape))} entries")
        theta1 = vals.reshape(M.ambient_shape, order="F")
    if M.feasibility(theta1) > 1e-8:
        raise DataError("hypothesized point is not on the manifold")
    res = location_test(model, data, theta1, alpha=args.alpha, b=args.b, seed=args.seed, burn=args.burn,
                        threads=args.threads)
    d = res.to_dict(args.alpha)
    d["seed"] = int(args.seed)
    d["b"] = int(args.b)
    out = _out_dir(args)
    write_json(os.path.join(out, "test.json"), d)
    cv = d["critical_values"]
    for j, (t, rj) in enumerate(zip(d["t"], d["reject_t"])):
        lo, hi = cv["t"][j]
        print(f"t[{j}] = {format_float(t)} critical [{format_float(lo)}, {format_float(hi)}]: "
              f"{'reject' if rj else 'accept'}")
    print(f"wald = {format_float(d['wald'])} critical {format_float(cv['wald'])}: "
          f"{'reject' if d['reject_wald'] else 'accept'}")
    return EXIT_OK


def _write_outputs(out, files):
    os.makedirs(out, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out, name), "w", newline="") as fh:
            fh.write(text)


def cmd_simulate(args):
    setting = args.setting or {"type1": "sphere", "cdf": "stiefel", "barycenter": "barycenter"}[args.study]
    settings = tuple(s for s in setting.split("+") if s)
    if args.study == "cdf":
        for s in settings:
            if s not in ex.CDF_SETTINGS:
                raise UsageError(f"the CDF study supports {', '.join(ex.CDF_SETTINGS)}")
        setting = settings[0]
    try:
        config = ex.ExperimentConfig(setting=setting, n=args.n, b=args.b, epochs=args.epochs, seed=args.seed,
                                     noise_scale=args.noise, output=args.out, threads=args.threads,
                                     mc=args.mc, burn=args.burn)
    except ValueError as err:
        raise UsageError(str(err)) from None
    if args.study == "type1":
        if setting != "sphere":
            raise UsageError("the type-I study runs on the sphere setting")
        rows = ex.run_type1_table(config)
        _write_outputs(args.out, ex.type1_outputs(config, rows))
        ns, cols, mat = ex.type1_grid(rows)
        print("n      " + " ".join(f"{s}@{lev:g}".rjust(10) for s, lev in cols))
        for n, row in zip(ns, mat):
            print(f"{n:<6} " + " ".join(f"{v:10.4f}" for v in row))
    elif args.study == "cdf":
        rows = ex.run_cdf_study(config, settings)
        _write_outputs(args.out, ex.cdf_outputs(config, rows, settings))
        for r in rows:
            print(f"{r['setting']:<12} n={r['n']:<5} {r['method']:<22} error {r['error']:.4f}")
    else:
        if setting != "barycenter":
            raise UsageError("the barycenter study runs on the barycenter setting")
        rows = ex.run_barycenter_study(config)
        _write_outputs(args.out, ex.barycenter_outputs(config, rows))
        for n in config.n:
            d = np.array([r["dist"] for r in rows if r["n"] == n])
            print(f"n={n}: median distance {np.median(d):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common(p, data=True):
    if data:
        p.add_argument("--manifold", required=True, help="manifold spec, e.g. sphere:3 or stiefel:4,2")
        p.add_argument("--loss", default="gaussian", choices=("gaussian", "barycenter"))
        p.add_argument("--data", help="dataset file (CSV or binary container)")
        p.add_argument("--simulate", help="simulation spec, e.g. n=200,seed=7")
        p.add_argument("--x0", help="initial point (one flattened CSV row)")
    p.add_argument("--burn", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--out", default=".", help="output directory")


def build_parser():
    parser = _Parser(prog="manifold-infer", description="Bootstrap inference on matrix manifolds.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("estimate", help="fit the M-estimator")
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("infer", help="bootstrap confidence regions")
    p.add_argument("mode", choices=("wald", "intrinsic-t", "extrinsic-t"))
    _common(p)
    p.add_argument("--b", type=_positive_int, default=1000)
    p.add_argument("--alpha", type=_alpha, default=0.1)
    p.add_argument("--a", help="direction for the intrinsic t interval (comma-separated)")
    p.add_argument("--functional", help="entry:i,j,... or linear:w1,w2,... (column-major)")
    p.add_argument("--sided", default="two", choices=("two", "upper", "lower"))
    p.add_argument("--query", help="point whose membership is reported")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("test", help="bootstrap location test")
    _common(p)
    p.add_argument("--null", help="hypothesized point: CSV file or comma-separated literal")
    p.add_argument("--b", type=_positive_int, default=1000)
    p.add_argument("--alpha", type=_alpha, default=0.1)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="experiment suites")
    p.add_argument("--study", required=True, choices=("type1", "cdf", "barycenter"))
    p.add_argument("--setting", help="simulation setting; cdf accepts several joined by '+'")
    p.add_argument("--n", type=_int_list, default=(40, 80, 160))
    p.add_argument("--b", type=_positive_int, default=None)
    p.add_argument("--epochs", type=_positive_int, default=30)
    p.add_argument("--mc", type=_positive_int, default=500)
    p.add_argument("--noise", type=float, default=None)
    _common(p, data=False)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (AntipodalSample, EmptyInput, ShapeMismatch, NonFinite) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ManifoldInferError, ChartError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
