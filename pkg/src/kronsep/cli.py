"""Command line: ``kronsep {simulate,solve,compare,profile}``.

Exit codes: 0 success, 1 I/O or file-format error, 2 usage or
configuration error, 3 solver did not converge, 4 dense solve refused by
the size guard, 5 out of memory under ``--mem-budget``.
"""
import argparse
import json
import re
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import bench
from .errors import (
    ConfigurationError,
    MapFormatError,
    NumericalBreakdown,
    OutOfMemoryError,
    ShapeError,
    SizeGuardError,
)
from .grid import MAX_LEVEL, new_grid
from .simio import read_maps, write_maps, write_report

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_REFUSED, EXIT_OOM = 0, 1, 2, 3, 4, 5

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Keys recognised in the config file, by section, with the flag they feed.
CONFIG_KEYS = {
    "run": {"level", "seed", "out", "threads"},
    "solver": {"method", "tol", "max_iter", "mem_budget"},
    "model": {"kappa_s", "kappa_d", "T", "P", "nhits"},
}
DEFAULTS = {"seed": 0, "method": "lanczos-sylvester", "tol": 1e-8, "max_iter": None,
            "mem_budget": None, "threads": None, "out": None}


class _UsageError(Exception):
    pass


def _level(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"level must be an integer, got {text!r}") from None
    if not 0 <= value <= MAX_LEVEL:
        raise argparse.ArgumentTypeError(f"level must be in [0, {MAX_LEVEL}], got {value}")
    return value


def _level_range(text):
    """``"4-8"``, ``"4:8"``, ``"5"`` or ``"1,3,4"``; an inverted range is empty."""
    text = text.strip()
    m = re.fullmatch(r"(\d+)\s*[-:]\s*(\d+)", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        levels = list(range(lo, hi + 1))
    elif text == "":
        levels = []
    else:
        try:
            levels = [int(t) for t in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad level range {text!r}") from None
    for lv in levels:
        if not 0 <= lv <= MAX_LEVEL:
            raise argparse.ArgumentTypeError(f"level {lv} outside [0, {MAX_LEVEL}]")
    return levels


_UNITS = {"": 1, "b": 1, "k": 10 ** 3, "kb": 10 ** 3, "m": 10 ** 6, "mb": 10 ** 6, "g": 10 ** 9,
          "gb": 10 ** 9, "kib": 2 ** 10, "mib": 2 ** 20, "gib": 2 ** 30}


def _bytes(text):
    m = re.fullmatch(r"\s*([0-9]*\.?[0-9]+(?:[eE][+-]?\d+)?)\s*([A-Za-z]*)\s*", str(text))
    if not m or m.group(2).lower() not in _UNITS:
        raise argparse.ArgumentTypeError(f"bad byte count {text!r} (use e.g. 1000000, 512K, 2MB)")
    return int(float(m.group(1)) * _UNITS[m.group(2).lower()])


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with [run], [solver] and [model] tables")
    common.add_argument("--seed", type=int, help="simulation seed (default 0)")
    common.add_argument("--threads", type=_positive_int, help="BLAS/OpenMP threads for numerical kernels")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--method", choices=bench.METHODS)
    solver.add_argument("--tol", type=_positive_float, help="relative stopping tolerance (default 1e-8)")
    solver.add_argument("--max-iter", type=_positive_int, dest="max_iter")
    solver.add_argument("--mem-budget", type=_bytes, dest="mem_budget",
                        help="byte budget for the assembled sparse-dense path")

    parser = argparse.ArgumentParser(prog="kronsep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write simulated S_true and Y map files")
    p.add_argument("--level", type=_level)
    p.add_argument("--out", type=Path, help="output directory")

    for name, helptext in (("solve", "solve for the posterior mean"),
                           ("profile", "solve once and write a per-phase timing breakdown")):
        p = sub.add_parser(name, parents=[common, solver], help=helptext)
        p.add_argument("--level", type=_level, help="simulate at this level when --input is absent")
        p.add_argument("--input", type=Path, help="Y map file written by 'simulate'")
        p.add_argument("--out", type=Path, help="output directory")

    p = sub.add_parser("compare", parents=[common, solver], help="CSV table over levels and methods")
    p.add_argument("--levels", type=_level_range, required=True, help="e.g. 1-4")
    p.add_argument("--methods", default="lanczos-sylvester,sparse-dense",
                   help="comma-separated list (default: the two Sylvester methods)")
    p.add_argument("--repeat", type=_positive_int, default=1, help="report the fastest of this many runs")
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")
    return parser


def load_config(path):
    """Flatten a TOML config into flag names; unknown keys are errors."""
    try:
        data = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config {path}: {exc}") from None
    flat = {}
    for section, table in data.items():
        if section not in CONFIG_KEYS or not isinstance(table, dict):
            raise ConfigurationError(f"config {path}: unknown section [{section}]")
        for key, value in table.items():
            if key not in CONFIG_KEYS[section]:
                raise ConfigurationError(f"config {path}: unknown key {section}.{key}")
            flat[key] = value
    if "method" in flat and flat["method"] not in bench.METHODS:
        raise ConfigurationError(f"config method must be one of {', '.join(bench.METHODS)}")
    if "level" in flat:
        try:
            flat["level"] = _level(flat["level"])
        except argparse.ArgumentTypeError as exc:
            raise ConfigurationError(str(exc)) from None
    if "mem_budget" in flat:
        try:
            flat["mem_budget"] = _bytes(flat["mem_budget"])
        except argparse.ArgumentTypeError as exc:
            raise ConfigurationError(str(exc)) from None
    return flat


def resolve(args):
    """Merge defaults < config file < flags into one namespace."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None) is not None:
        merged.update(load_config(args.config))
    for key, value in vars(args).items():
        if value is not None:
            merged[key] = value
    return argparse.Namespace(**merged)


def model_kwargs(opts):
    """Model overrides from the config; a scalar ``nhits`` applies to every pixel."""
    kw = {}
    for key in ("kappa_s", "kappa_d"):
        if key in vars(opts):
            kw[key] = float(getattr(opts, key))
    for key in ("T", "P"):
        if key in vars(opts):
            kw[key] = np.asarray(getattr(opts, key), dtype=float)
    if "nhits" in vars(opts):
        nh = opts.nhits
        kw["Nhits"] = read_maps(nh)[:, 0] if isinstance(nh, str) else np.asarray(nh, dtype=float)
    return kw


def _threads(n):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _problem(opts):
    """Grid, model and maps from ``--input`` or a fresh simulation."""
    if getattr(opts, "input", None) is not None:
        Y, header = read_maps(opts.input, with_header=True)
        level = header.level
        if getattr(opts, "level", None) not in (None, level):
            raise ConfigurationError(f"--level {opts.level} disagrees with input level {level}")
        grid = new_grid(level)
        return grid, bench.make_model(grid, model_kwargs(opts)), Y
    if getattr(opts, "level", None) is None:
        raise _UsageError("either --level or --input is required")
    grid, model, _, Y = bench.simulated_problem(opts.level, opts.seed, model_kwargs(opts))
    return grid, model, Y


def cmd_simulate(opts):
    if getattr(opts, "level", None) is None:
        raise _UsageError("--level is required")
    out = Path(opts.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    grid, model, S, Y = bench.simulated_problem(opts.level, opts.seed, model_kwargs(opts))
    write_maps(out / "S_true.ksm", S, opts.level, seed=opts.seed)
    write_maps(out / "Y.ksm", Y, opts.level, seed=opts.seed)
    print(f"wrote {out / 'S_true.ksm'} and {out / 'Y.ksm'} (N={grid.npix})")
    return EXIT_OK


def cmd_solve(opts):
    grid, model, Y = _problem(opts)
    M, report = bench.run_method(opts.method, grid, model, Y, tol=opts.tol, max_iter=opts.max_iter,
                                 mem_budget=opts.mem_budget)
    out = Path(opts.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_maps(out / "mu.ksm", M, grid.level, seed=opts.seed)
    write_report(out / "report.json", report)
    print(f"{report.method}: {report.iterations} iterations, rel_residual {report.rel_residual:.3e}, "
          f"{report.wall_time:.3g} s")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_compare(opts):
    methods = [m.strip() for m in opts.methods.split(",") if m.strip()]
    for m in methods:
        if m not in bench.METHODS:
            raise _UsageError(f"unknown method {m!r}; choose from {', '.join(bench.METHODS)}")
    rows = bench.compare_rows(opts.levels, methods, seed=opts.seed, tol=opts.tol, max_iter=opts.max_iter,
                              mem_budget=opts.mem_budget, repeat=opts.repeat,
                              model_kwargs=model_kwargs(opts))
    if opts.out is None:
        bench.rows_to_csv(rows, sys.stdout)
    else:
        Path(opts.out).parent.mkdir(parents=True, exist_ok=True)
        with open(opts.out, "w", newline="") as fh:
            bench.rows_to_csv(rows, fh)
    return EXIT_OK


def cmd_profile(opts):
    grid, model, Y = _problem(opts)
    out = Path(opts.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    result = bench.profile_run(opts.method, grid, model, Y, tol=opts.tol, max_iter=opts.max_iter,
                               mem_budget=opts.mem_budget,
                               sink=lambda M: write_maps(out / "mu.ksm", M, grid.level, seed=opts.seed))
    (out / "profile.json").write_text(json.dumps(result, indent=2) + "\n")
    shares = ", ".join(f"{k} {v / result['wall_time_s']:.0%}"
                       for k, v in sorted(result["phases"].items(), key=lambda kv: -kv[1]))
    print(f"{opts.method} level {grid.level}: {result['wall_time_s']:.3g} s ({shares})")
    return EXIT_OK if result["report"]["converged"] else EXIT_NOT_CONVERGED


COMMANDS = {"simulate": cmd_simulate, "solve": cmd_solve, "compare": cmd_compare, "profile": cmd_profile}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    try:
        opts = resolve(args)
        with _threads(opts.threads):
            return COMMANDS[opts.command](opts)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"kronsep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, ShapeError) as exc:
        print(f"kronsep: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalBreakdown as exc:
        print(f"kronsep: solver breakdown: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except SizeGuardError as exc:
        print(f"kronsep: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except OutOfMemoryError as exc:
        print(f"kronsep: out of memory: {exc}", file=sys.stderr)
        return EXIT_OOM
    except (OSError, MapFormatError) as exc:
        print(f"kronsep: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
