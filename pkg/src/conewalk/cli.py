"""Command-line front end.

Exit codes: 0 success, 2 invalid input (including usage errors), 3 a
statistical test failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from scipy import stats as sst

from . import experiments as E
from . import manifest as M
from .cones import exponent, parse_cone
from .conditioned import sample_bridge, sample_htransform, sample_meander, sample_meander_split
from .engine import _Runner, check_start, set_threads, survival_probability_mc
from .errors import ConewalkError, InvalidInputError
from .harmonic import build_v_exact
from .increments import parse_steps
from .io import dumps, read_table, sidecar_path, write_csv, write_json, write_paths, write_table
from .reference import (
    DEFAULT_EPS, DEFAULT_GRID, RadialLaw, entrance_law_cdf, entrance_law_density, radial_transition_cdf,
    radial_transition_density, sample_bessel, sample_bm_meander, sample_h_bm,
)
from .stats import horizon_grid
from .svg import cdf_plot, histogram_plot, line_plot

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3
MAX_RECORDED_VALUES = 5 * 10**7


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise InvalidInputError(f"bad point {text!r}; use comma-separated numbers") from None


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInputError(f"bad list {text!r}") from None


def _record(text: str):
    if text in ("quarters", "end", "full"):
        return text
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise InvalidInputError("--record is quarters, end, full or comma-separated step indices") from None


def _r_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    try:
        lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise InvalidInputError(f"bad grid {text!r}; use r_min:r_max:steps") from None
    if len(parts) != 3 or not 0 <= lo < hi or num < 2:
        raise InvalidInputError("grid needs 0 <= r_min < r_max and at least two steps")
    return np.linspace(lo, hi, num)


def _model(args):
    cone = parse_cone(args.cone)
    dist = parse_steps(args.steps, cone.dimension)
    return cone, dist


def _emit(args, doc) -> None:
    if getattr(args, "report", None):
        write_json(args.report, doc)
    else:
        sys.stdout.write(dumps(doc))


# -- subcommands -----------------------------------------------------------


def cmd_simulate(args) -> int:
    cone, dist = _model(args)
    x = check_start(cone, _point(args.start))
    est = survival_probability_mc(cone, dist, x, args.n, args.replicas, args.seed)
    if args.record_paths:
        if args.replicas * (args.n + 1) * cone.dimension > MAX_RECORDED_VALUES:
            raise InvalidInputError("too many values to record; lower --replicas or --n")
        runner = _Runner(cone, dist, args.seed)
        rt = np.arange(args.n + 1, dtype=np.int64)
        pos, _, _, _, ex = runner.run(np.broadcast_to(x, (args.replicas, len(x))), 0, args.n,
                                      np.arange(args.replicas, dtype=np.uint64), rec_times=rt)
        write_paths(args.record_paths, pos, rt, ex)
    doc = est.to_dict()
    doc.update({"cone": str(cone), "steps": str(dist), "seed": int(args.seed)})
    _emit(args, doc)
    return EXIT_OK


def cmd_estimate_v(args) -> int:
    cone, dist = _model(args)
    tab = build_v_exact(cone, dist, args.window, args.tol, method=args.method)
    write_table(args.out, tab)
    sys.stdout.write(dumps(tab.sidecar()))
    return EXIT_OK


def cmd_sample(args) -> int:
    cone, dist = _model(args)
    x = _point(args.start)
    rec = _record(args.record)
    if args.law == "meander":
        if args.split_levels:
            lv = [int(v) for v in _floats(args.split_levels)]
            ens = sample_meander_split(cone, dist, x, args.n, args.count, lv, args.seed, record=rec)
        else:
            ens = sample_meander(cone, dist, x, args.n, args.count, args.seed, record=rec)
    elif args.law == "htransform":
        if args.vtable:
            tab = read_table(args.vtable)
        else:
            if args.window is None:
                raise InvalidInputError("the htransform law needs --vtable or --window")
            tab = build_v_exact(cone, dist, args.window)
        ens = sample_htransform(cone, dist, tab, x, args.n, args.count, args.seed, record=rec)
    else:
        if args.end is None:
            raise InvalidInputError("the bridge law needs --end")
        ens = sample_bridge(cone, dist, x, args.n, _point(args.end), args.count, args.seed, method=args.method,
                            record=rec)
    write_paths(args.out, ens.positions, ens.times)
    write_json(sidecar_path(args.out), ens.summary())
    return EXIT_OK


def cmd_reference(args) -> int:
    obj = args.object
    if obj in ("meander", "h-bm"):
        if not args.cone:
            raise InvalidInputError(f"{obj} needs --cone")
        cone = parse_cone(args.cone)
        rec = _record(args.record)
        if obj == "meander":
            ens = sample_bm_meander(cone, args.m, args.eps, args.count, args.seed, record=rec)
            w = np.ones(ens.count)
        else:
            if args.start is None:
                raise InvalidInputError("h-bm needs --start")
            ens = sample_h_bm(cone, _point(args.start), args.horizon, args.m, args.count, args.seed, record=rec)
            w = ens.weights
        d = ens.d
        rows = ([i, float(k) / ens.horizon, *(ens.positions[i, j] / ens.scale).tolist(), float(w[i])]
                for i in range(ens.count) for j, k in enumerate(ens.times))
        write_csv(args.out, ["replica", "t", *[f"coord_{c + 1}" for c in range(d)], "weight"], rows)
        write_json(sidecar_path(args.out), ens.summary())
        return EXIT_OK
    law = _law(args)
    if obj == "bessel":
        times = _floats(args.times)
        paths = sample_bessel(law, args.r0, times, args.count, args.seed)
        rows = ([i, float(t), float(paths.values[i, j])] for i in range(args.count) for j, t in enumerate(paths.times))
        write_csv(args.out, ["replica", "t", "radius"], rows)
        return EXIT_OK
    if args.grid is None:
        raise InvalidInputError(f"{obj} needs --grid r_min:r_max:steps")
    r = _r_grid(args.grid)
    if obj == "entrance-density":
        dens = entrance_law_density(law, args.t, r)
        cdf = entrance_law_cdf(law, args.t, r)
        write_csv(args.out, ["r", "density", "cdf"], zip(r, dens, cdf))
    else:
        if not args.r0 > 0:
            raise InvalidInputError("kernel needs --r0 > 0")
        r = r[r > 0]
        dens = radial_transition_density(law, args.h, args.r0, r)
        cdf = radial_transition_cdf(law, args.h, args.r0, r)
        write_csv(args.out, ["r", "density", "cdf"], zip(r, dens, cdf))
    return EXIT_OK


def _law(args) -> RadialLaw:
    if args.degrees is not None:
        return RadialLaw.of_dimension(args.degrees)
    if args.cone:
        return RadialLaw.from_cone(parse_cone(args.cone))
    raise InvalidInputError("give --cone or --degrees")


def cmd_survival_exponent(args) -> int:
    cone, dist = _model(args)
    res = E.survival_exponent(cone, dist, _point(args.start), horizon_grid(args.horizons), method=args.method,
                              replicas=args.replicas, seed=args.seed, tol=args.tol)
    if args.out:
        write_csv(args.out, ["n", "probability", "std_error"], zip(res.horizons, res.survivals, res.std_errors))
    if args.plot:
        fit = np.exp(res.fit.intercept) * res.horizons.astype(float) ** res.fit.slope
        line_plot(args.plot, res.horizons, [res.survivals, fit], ["survival", f"fit, slope {res.fit.slope:.4f}"],
                  logx=True, logy=True, title="P(tau > n)")
    _emit(args, res.report.to_dict())
    return EXIT_OK if res.report.passed else EXIT_FAILED


def _write_samples(path, report: E.TestReport) -> None:
    rows = ([name, src, float(v)] for (name, src), vals in report.samples.items() for v in np.ravel(vals))
    write_csv(path, ["functional", "source", "value"], rows)


def _plot_report(path, report: E.TestReport, functional: str, reference_cdf=None, cdf_label="reference") -> None:
    keys = [k for k in report.samples if k[0] == functional]
    cdf_plot(path, [report.samples[k] for k in keys], [k[1] for k in keys], cdf=reference_cdf, cdf_label=cdf_label,
             title=functional)


def _finish_test(args, report: E.TestReport, functional: str, reference_cdf=None, cdf_label="reference") -> int:
    if args.samples:
        _write_samples(args.samples, report)
    if args.plot:
        _plot_report(args.plot, report, functional, reference_cdf, cdf_label)
    _emit(args, report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_test_meander(args) -> int:
    cone, dist = _model(args)
    lv = [int(v) for v in _floats(args.split_levels)] if args.split_levels else None
    rep = E.meander_convergence_test(cone, dist, _point(args.start), args.n, args.count, args.seed,
                                     bm_count=args.bm_count, eps=args.eps, m=args.m, split_levels=lv,
                                     reference=not args.no_reference, level=args.level)
    k = exponent(cone) + cone.dimension
    return _finish_test(args, rep, "endpoint-radius", sst.chi(k).cdf, f"chi({k:g})")


def cmd_test_htransform(args) -> int:
    cone, dist = _model(args)
    tab = read_table(args.vtable) if args.vtable else build_v_exact(cone, dist, args.window)
    rep = E.htransform_convergence_test(cone, dist, tab, _point(args.start), args.n, args.count, args.seed,
                                        bessel_count=args.bessel_count, bins=args.bins,
                                        reference=not args.no_reference, level=args.level)
    law = RadialLaw.from_cone(cone)
    if args.plot:
        r = rep.samples[("radius-at-1", "walk")]
        histogram_plot(args.plot, r, sst.chi(law.degrees).pdf, label="walk", density_label=f"chi({law.degrees:g})",
                       title="endpoint radius")
        args.plot = None
    return _finish_test(args, rep, "radius-at-1")


def cmd_test_bridge(args) -> int:
    cone, dist = _model(args)
    rep = E.bridge_convergence_test(cone, dist, _point(args.start), _point(args.end), args.n, args.t, args.count,
                                    args.seed, bm_count=args.bm_count, eps=args.eps, m=args.m,
                                    resamples=args.resamples, level=args.level, method=args.method)
    return _finish_test(args, rep, "max")


def cmd_suite(args) -> int:
    man = M.load(args.manifest)
    only = set(args.only.split(",")) if args.only else None
    summary = M.run_suite(man, args.outdir, only, log=lambda s: print(s, file=sys.stderr))
    sys.stdout.write(dumps(summary))
    return EXIT_OK if summary["ok"] else EXIT_FAILED


# -- parser ----------------------------------------------------------------


def _model_args(p, start=True):
    p.add_argument("--cone", required=True, help="half-line, half-space:d, orthant:d, wedge:alpha, weyl-a:d, weyl-b:d")
    p.add_argument("--steps", required=True, help="gaussian, rademacher, sphere or lattice:<file or name>")
    if start:
        p.add_argument("--start", required=True, help="comma-separated start point")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: CONEWALK_THREADS)")
    parser = _Parser(prog="conewalk", description="Random walks in cones: conditioned samplers and tests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="survival estimate with optional path dump")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--record-paths")
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-v", parents=[common], help="harmonic function table on a window")
    _model_args(p, start=False)
    p.add_argument("--window", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--method", choices=("jacobi", "direct"), default="jacobi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate_v)

    p = sub.add_parser("sample", parents=[common], help="conditioned path ensembles")
    p.add_argument("--law", choices=("meander", "htransform", "bridge"), required=True)
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--end")
    p.add_argument("--vtable")
    p.add_argument("--window", type=float)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--record", default="quarters")
    p.add_argument("--split-levels")
    p.add_argument("--method", choices=("auto", "dp", "rejection"), default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("reference", parents=[common], help="limit processes and radial densities")
    p.add_argument("--object", choices=("meander", "h-bm", "bessel", "entrance-density", "kernel"), required=True)
    p.add_argument("--cone")
    p.add_argument("--degrees", type=float)
    p.add_argument("--start")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--m", type=int, default=DEFAULT_GRID)
    p.add_argument("--record", default="quarters")
    p.add_argument("--times", default="0.25,0.5,0.75,1")
    p.add_argument("--r0", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--grid")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("survival-exponent", parents=[common], help="survival curve and log-log slope")
    _model_args(p)
    p.add_argument("--horizons", required=True, help="a:b:log10, a:b:logN or a:b:N")
    p.add_argument("--method", choices=("auto", "exact", "mc"), default="auto")
    p.add_argument("--replicas", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--out")
    p.add_argument("--report")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_survival_exponent)

    def test_io(p):
        p.add_argument("--level", type=float, default=0.01)
        p.add_argument("--report")
        p.add_argument("--samples")
        p.add_argument("--plot")

    p = sub.add_parser("test-meander", parents=[common], help="conditioned walk against the Brownian meander")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bm-count", type=int)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--m", type=int, default=DEFAULT_GRID)
    p.add_argument("--split-levels")
    p.add_argument("--no-reference", action="store_true")
    test_io(p)
    p.set_defaults(func=cmd_test_meander)

    p = sub.add_parser("test-htransform", parents=[common], help="Doob transform against the Bessel process")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--vtable")
    p.add_argument("--window", type=float, default=800.0)
    p.add_argument("--bessel-count", type=int)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--no-reference", action="store_true")
    test_io(p)
    p.set_defaults(func=cmd_test_htransform)

    p = sub.add_parser("test-bridge", parents=[common], help="bridge functionals against the weighted meander")
    _model_args(p)
    p.add_argument("--end", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, default=0.5)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--bm-count", type=int)
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--m", type=int, default=DEFAULT_GRID)
    p.add_argument("--resamples", type=int, default=400)
    p.add_argument("--method", choices=("auto", "dp", "rejection"), default="auto")
    test_io(p)
    p.set_defaults(func=cmd_test_bridge)

    p = sub.add_parser("suite", parents=[common], help="run an experiment manifest")
    p.add_argument("--manifest", required=True, help="path, or the name of a bundled manifest")
    p.add_argument("--outdir")
    p.add_argument("--only", help="comma-separated experiment ids")
    p.set_defaults(func=cmd_suite)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        set_threads(args.threads)
        for name in ("out", "report", "samples", "plot", "record_paths"):
            target = getattr(args, name, None)
            if target and not Path(target).resolve().parent.is_dir():
                raise InvalidInputError(f"directory of {target} does not exist")
        return args.func(args)
    except (ConewalkError, ValueError) as exc:
        print(f"conewalk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
