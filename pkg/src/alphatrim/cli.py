"""Command-line front end.

Exit codes: 0 success, 2 malformed input, 3 invalid flags or names,
4 trimming-class or reweighting-index errors, 130 interrupted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as aio
from . import lp
from .convergence import (
    EXPERIMENTS,
    ExperimentConfig,
    default_config,
    partial_report,
    run_experiment,
)
from .families import CATALOG, FunctionFamily, make_family
from .measure import (
    DensityFn,
    DiscreteMeasure,
    IndexSetError,
    TrimmingError,
    check_trim_weights,
    empirical_measure,
    rn_reweight,
    sequential_update,
    trim_violations,
)
from .regions import (
    direction_grid,
    integral_lp,
    integral_region_mask,
    query_lattice,
    zonoid_lp,
    zonoid_region,
)

EXIT_INPUT = 2
EXIT_USAGE = 3
EXIT_TRIM = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _alpha(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be a number in (0, 1], got {text!r}") from None
    if not (0.0 < value <= 1.0):
        raise argparse.ArgumentTypeError(f"alpha must lie in the interval (0, 1], got {value}")
    return value


def _nonneg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("value must be nonnegative")
    return value


def _point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"point must be comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alphatrim", description="Alpha-trimmed regions of empirical measures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    region = sub.add_parser("region", help="compute a trimmed region")
    region.add_argument("kind", choices=["zonoid", "integral"])
    region.add_argument("--in", dest="inp", required=True, help="points CSV")
    region.add_argument("--alpha", type=_alpha, required=True)
    region.add_argument("--out", help="output path (default: stdout)")
    region.add_argument("--svg", help="also write an SVG plot")
    region.add_argument("--grid", type=int, help="directions (zonoid) or lattice points per axis (integral)")
    region.add_argument("--family", help="function family name (integral only)")
    region.add_argument("--epsilon", type=_nonneg, default=None, help="relaxation (integral only)")
    region.add_argument("--format", choices=["json", "csv", "svg"], help="format written to --out")

    trim = sub.add_parser("trim", help="trimming-class operations")
    trim.add_argument("action", choices=["check", "update", "reweight"])
    trim.add_argument("--in", dest="inp", help="sample CSV (arrival order)")
    trim.add_argument("--alpha", type=_alpha, required=True)
    trim.add_argument("--weights", help="trimming weights JSON {weights: [...]}")
    trim.add_argument("--measure", help="measure Q as JSON {atoms, probs}")
    trim.add_argument("--reference", help="measure P as JSON {atoms, probs}")
    trim.add_argument("--density", help="density JSON {form, params} or {tabulated: [...]}")
    trim.add_argument("--point", type=_point, help="point to append (update)")
    trim.add_argument("--out", help="output path (default: stdout)")

    exp = sub.add_parser("experiment", help="run a convergence experiment")
    exp.add_argument("name", help=f"one of: {', '.join(EXPERIMENTS)}")
    exp.add_argument("--config", help="JSON config overriding the defaults")
    exp.add_argument("--seed", type=int)
    exp.add_argument("--alpha", type=_alpha)
    exp.add_argument("--epsilon", type=_nonneg)
    exp.add_argument("--family")
    exp.add_argument("--grid", type=int)
    exp.add_argument("--workers", type=int)
    exp.add_argument("--out", help="report path (default: stdout)")
    exp.add_argument("--format", choices=["csv", "json"], default="csv")

    dbg = sub.add_parser("lp", help="debug: dump or solve membership programs")
    dbg.add_argument("action", choices=["dump", "solve"])
    dbg.add_argument("--in", dest="inp", required=True, help="points CSV (dump) or program JSON (solve)")
    dbg.add_argument("--alpha", type=_alpha)
    dbg.add_argument("--point", type=_point)
    dbg.add_argument("--family")
    dbg.add_argument("--epsilon", type=_nonneg, default=0.0)
    dbg.add_argument("--out")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        aio.write_text(out, text)
    else:
        sys.stdout.write(text)


def _family(name: str | None, sample: np.ndarray) -> FunctionFamily:
    if name is None:
        raise UsageError("--family is required; catalog: " + ", ".join(CATALOG))
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        return FunctionFamily.from_dict(aio.read_json(path))
    try:
        return make_family(name, sample)
    except KeyError:
        listing = "\n".join(f"  {k}: {v}" for k, v in CATALOG.items())
        raise UsageError(f"unknown family {name!r}; catalog:\n{listing}") from None


def cmd_region(args) -> int:
    sample = aio.read_points(args.inp)
    if args.kind == "zonoid":
        if args.family is not None or args.epsilon is not None:
            raise UsageError("--family and --epsilon apply to integral regions only")
        if args.format == "csv":
            raise UsageError("zonoid regions are written as json or svg")
        d = sample.shape[1]
        try:
            grid = direction_grid(d, args.grid)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        region = zonoid_region(sample, args.alpha, grid)
        if args.format == "svg":
            _emit(aio.region_svg(region, sample if d == 2 else None), args.out)
        else:
            _emit(json.dumps({"schema_version": aio.SCHEMA_VERSION, "alpha": args.alpha, **region.to_dict()},
                             indent=2, sort_keys=True) + "\n", args.out)
        if args.svg:
            if d != 2:
                raise UsageError("--svg needs 2-D data")
            aio.write_text(args.svg, aio.region_svg(region, sample))
        return 0

    if args.format == "json":
        raise UsageError("integral masks are written as csv or svg")
    family = _family(args.family, sample)
    size = 101 if args.grid is None else args.grid
    if size < 2:
        raise UsageError("--grid must be at least 2 for integral masks")
    query = query_lattice(sample, size)
    mask = integral_region_mask(sample, args.alpha, family, query, args.epsilon or 0.0)
    if args.format == "svg":
        _emit(aio.mask_svg(query, mask, sample), args.out)
    else:
        _emit(aio.mask_to_csv(query, mask), args.out)
    if args.svg:
        if sample.shape[1] != 2:
            raise UsageError("--svg needs 2-D data")
        aio.write_text(args.svg, aio.mask_svg(query, mask, sample))
    return 0


def _load_weights(path) -> np.ndarray:
    data = aio.read_json(path)
    if "weights" not in data:
        raise aio.InputError("weights file lacks a 'weights' list")
    return np.asarray(data["weights"], dtype=float)


def _load_measure(path) -> DiscreteMeasure:
    data = aio.read_json(path)
    try:
        return DiscreteMeasure.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise aio.InputError(f"measure file needs atoms and probs ({exc})") from None


def cmd_trim(args) -> int:
    sample = aio.read_points(args.inp) if args.inp else None
    if args.action == "check":
        if args.measure:
            q = _load_measure(args.measure)
        elif args.weights and sample is not None:
            w = _load_weights(args.weights)
            if w.size > sample.shape[0]:
                raise aio.InputError("more weights than sample points")
            q = DiscreteMeasure.from_weights(sample[: w.size], w)
            sample = sample[: w.size]
        else:
            raise UsageError("trim check needs --measure, or --weights with --in")
        if args.reference:
            p = _load_measure(args.reference)
        elif sample is not None:
            p = empirical_measure(sample)
        else:
            raise UsageError("trim check needs --reference or --in")
        bad = trim_violations(q, p, args.alpha)
        verdict = {"member": not bad, "alpha": args.alpha}
        if bad:
            first = bad[0]
            verdict["first_violation"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in first.items()}
        _emit(json.dumps(verdict, sort_keys=True) + "\n", args.out)
        return 0

    if sample is None:
        raise UsageError(f"trim {args.action} needs --in")
    if args.action == "update":
        if not args.weights:
            raise UsageError("trim update needs --weights")
        w = _load_weights(args.weights)
        if args.point is not None:
            if args.point.size != sample.shape[1]:
                raise UsageError("--point dimension does not match the sample")
            sample = np.vstack([sample[: w.size], args.point])
        if sample.shape[0] <= w.size:
            raise aio.InputError("sample has no point after the weighted prefix; pass --point")
        check_trim_weights(w, sample, args.alpha)
        new = sequential_update(w, sample, args.alpha, check=False)
        _emit(json.dumps({"schema_version": aio.SCHEMA_VERSION, "weights": new.tolist()}) + "\n", args.out)
        return 0

    if not args.density:
        raise UsageError("trim reweight needs --density")
    try:
        g = DensityFn.from_dict(aio.read_json(args.density))
    except (KeyError, TypeError) as exc:
        raise aio.InputError(f"density file is malformed ({exc})") from None
    w = rn_reweight(sample, g, args.alpha)
    _emit(json.dumps({"schema_version": aio.SCHEMA_VERSION, "weights": w.tolist()}) + "\n", args.out)
    return 0


def _experiment_config(args) -> ExperimentConfig:
    if args.name not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {args.name!r}; choose from {', '.join(EXPERIMENTS)}")
    data = default_config(args.name).to_dict()
    if args.config:
        extra = aio.read_json(args.config)
        if not isinstance(extra, dict):
            raise aio.InputError("config must be a JSON object")
        extra.pop("schema_version", None)
        if extra.get("experiment", args.name) != args.name:
            raise UsageError("config names a different experiment")
        data.update(extra)
    for key in ("seed", "alpha", "epsilon", "family", "grid", "workers"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    if data.get("family") not in CATALOG:
        listing = "\n".join(f"  {k}: {v}" for k, v in CATALOG.items())
        raise UsageError(f"unknown family {data.get('family')!r}; catalog:\n{listing}")
    try:
        return ExperimentConfig.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise aio.InputError(f"config is malformed ({exc})") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _render(report, fmt: str) -> str:
    return report.to_json() if fmt == "json" else report.to_csv()


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    rows: list = []
    try:
        report = run_experiment(config, sink=rows)
    except KeyboardInterrupt:
        partial = partial_report(config, rows)
        if partial is not None:
            target = (args.out or f"{config.experiment}.{args.format}") + ".partial"
            aio.write_text(target, _render(partial, args.format))
            sys.stderr.write(f"interrupted; {len(rows)} replications written to {target}\n")
        return 130
    _emit(_render(report, args.format), args.out)
    if config.experiment == "ladder" and args.out:
        first = report.extra["first_replication"]
        lines = ["k,epoch,ratio"]
        for k, (e, r) in enumerate(zip(first["epochs"], first["ratios"]), start=1):
            lines.append(f"{k},{int(e)},{float(r)!r}")
        aio.write_text(str(Path(args.out).with_suffix("")) + ".epochs.csv", "\n".join(lines) + "\n")
    summary = report.summary()[-1]
    sys.stderr.write(f"{config.experiment}: {config.replications} replications, final row {summary}\n")
    return 0


def cmd_lp(args) -> int:
    if args.action == "solve":
        try:
            prog = lp.BoundedLp.from_dict(aio.read_json(args.inp))
        except (KeyError, TypeError, ValueError) as exc:
            raise aio.InputError(f"program file is malformed ({exc})") from None
        res = lp.solve_max(prog)
        out = {"status": res.status, "value": res.value,
               "solution": None if res.solution is None else res.solution.tolist(), "iterations": res.iterations}
        _emit(json.dumps(out, sort_keys=True) + "\n", args.out)
        return 0
    if args.alpha is None or args.point is None:
        raise UsageError("lp dump needs --alpha and --point")
    sample = aio.read_points(args.inp)
    if args.point.size != sample.shape[1]:
        raise UsageError("--point dimension does not match the sample")
    if args.family:
        prog = integral_lp(sample, args.alpha, _family(args.family, sample), args.point, args.epsilon)
    else:
        prog = zonoid_lp(sample, args.alpha, args.point)
    _emit(json.dumps(prog.to_dict(), sort_keys=True) + "\n", args.out)
    return 0


_COMMANDS = {"region": cmd_region, "trim": cmd_trim, "experiment": cmd_experiment, "lp": cmd_lp}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"alphatrim: error: {exc}\n")
        return EXIT_USAGE
    except (IndexSetError, TrimmingError) as exc:
        sys.stderr.write(f"alphatrim: {exc}\n")
        return EXIT_TRIM
    except (aio.InputError, OSError) as exc:
        sys.stderr.write(f"alphatrim: malformed input: {exc}\n")
        return EXIT_INPUT
    except ValueError as exc:
        sys.stderr.write(f"alphatrim: malformed input: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
