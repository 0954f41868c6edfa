"""Command-line front end.

Subcommands: gendata (write a built-in dataset as CSV), fit (one seeded
optimisation run, JSON report), bench (replicated comparison with CSV and
text summaries), oracle (exact spline reference solution, JSON report).

Run settings come from a flat key = value config file; full-line comments
start with '#', keys use dots for grouping, unknown or duplicate keys are
rejected, and schema_version = 1 is required.  Exit codes: 0 success,
2 configuration problems, 3 data input/output problems, 4 infeasibility,
5 numerical singularity.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .constraints import Interval
from .core import (CoolingSchedule, InfeasibleStartError, ProposalConfig,
                   multistart_sa_run, smcsa_run)
from .experiments import (CANONICAL_SEED, DataFormatError, ExperimentSpec,
                          StartSetError, SummaryTable, contaminate_ht1,
                          gen_ht0, gen_lidar_surrogate, load_dataset_csv,
                          monotone_spline_problem, qp_oracle_monotone_spline,
                          run_replication, scale_axes, summarize_runs,
                          write_dataset_csv)
from .models import (LossSpec, PoleError, SingularDesignError, design_matrix)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4
EXIT_SINGULAR = 5

_DATASET_BUILDERS = {
    "ht0": gen_ht0,
    "ht1": lambda seed: contaminate_ht1(gen_ht0(seed)),
    "lidar-surrogate": gen_lidar_surrogate,
}


class ConfigError(ValueError):
    """Configuration file cannot be parsed or validated."""


def _int_value(raw: str) -> int:
    return int(raw, 10)


def _float_value(raw: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _choice(*options):
    def convert(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"must be one of: {', '.join(options)}")
        return raw
    return convert


def _scale_value(raw: str):
    if raw in ("none", ""):
        return None
    if raw == "max":
        return "max"
    return _float_value(raw)


def _origin_value(raw: str):
    if raw in ("", "crude"):
        return None
    try:
        return tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ValueError("must be 'crude' or comma-separated numbers") from None


_REQUIRED = object()

# key -> (converter, default); _REQUIRED marks keys that must be present.
_SCHEMA = {
    "schema_version": (_int_value, _REQUIRED),
    "experiment": (str, ""),
    "dataset": (_choice("ht0", "ht1", "lidar-surrogate", "csv"), "ht0"),
    "dataset.seed": (_int_value, CANONICAL_SEED),
    "dataset.path": (str, ""),
    "dataset.x_column": (str, "x"),
    "dataset.y_column": (str, "y"),
    "dataset.x_scale": (_scale_value, None),
    "dataset.y_scale": (_scale_value, None),
    "model": (_choice("rational", "bspline"), "rational"),
    "model.numer_degree": (_int_value, 2),
    "model.denom_degree": (_int_value, 2),
    "model.n_knots": (_int_value, 10),
    "model.degree": (_int_value, 2),
    "loss": (_choice("squared_error", "tukey"), "squared_error"),
    "loss.c": (_float_value, 1.0),
    "constraint.direction": (_choice("increasing", "decreasing"), "increasing"),
    "constraint.lo": (_float_value, 0.0),
    "constraint.hi": (_float_value, 6.0),
    "constraint.root_tol": (_float_value, 1e-6),
    "algorithm": (str, "smcsa"),
    "schedule": (_choice("logarithm", "reciprocal"), "reciprocal"),
    "schedule.alpha": (_float_value, 0.95),
    "schedule.floor": (_float_value, 1e-10),
    "proposal": (_choice("full", "kpoint"), "full"),
    "proposal.k_points": (_int_value, 2),
    "proposal.sigma0": (_float_value, 1.0),
    "proposal.decay": (_float_value, 1.0),
    "proposal.max_attempts": (_int_value, 1000),
    "resampling": (_choice("multinomial", "systematic"), "multinomial"),
    "n_states": (_int_value, 100),
    "iterations": (_int_value, 100),
    "replications": (_int_value, 10),
    "seed": (_int_value, CANONICAL_SEED),
    "start.scale": (_float_value, 2.0),
    "start.copies": (_int_value, 1),
    "start.origin": (_origin_value, None),
    "start.max_attempts": (_int_value, 100_000),
    "conv_threshold_pct": (_float_value, 1.0),
    "progress_every": (_int_value, 0),
}


def parse_config_text(text: str, source: str = "<config>"):
    """Parse flat key = value configuration text.

    Returns (values, explicit) where explicit is the set of keys present
    in the file; missing optional keys take schema defaults.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        converter, _ = _SCHEMA[key]
        try:
            values[key] = converter(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
    explicit = set(values)
    for key, (_, default) in _SCHEMA.items():
        if key not in values:
            if default is _REQUIRED:
                raise ConfigError(f"{source}: missing required key {key!r}")
            values[key] = default
    if values["schema_version"] != 1:
        raise ConfigError(f"{source}: unsupported schema_version {values['schema_version']}")
    return values, explicit


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def _algorithms(cfg) -> list:
    names = [part.strip() for part in cfg["algorithm"].split(",") if part.strip()]
    if not names:
        raise ConfigError("algorithm: empty")
    for name in names:
        if name not in ("smcsa", "multistart"):
            raise ConfigError(f"algorithm: unknown algorithm {name!r}")
    if len(set(names)) != len(names):
        raise ConfigError("algorithm: duplicates listed")
    return names


def _dataset_from_config(cfg):
    kind = cfg["dataset"]
    if kind == "csv":
        if not cfg["dataset.path"]:
            raise ConfigError("dataset.path is required when dataset = csv")
        data = load_dataset_csv(cfg["dataset.path"], cfg["dataset.x_column"],
                                cfg["dataset.y_column"])
    else:
        data = _DATASET_BUILDERS[kind](cfg["dataset.seed"])
    try:
        return scale_axes(data, cfg["dataset.x_scale"], cfg["dataset.y_scale"])
    except ValueError as exc:
        raise ConfigError(f"dataset scaling: {exc}") from None


def _schedule_from_config(cfg, explicit) -> CoolingSchedule:
    if cfg["schedule"] == "logarithm":
        if "schedule.alpha" in explicit:
            raise ConfigError("schedule.alpha only applies to schedule = reciprocal")
        return CoolingSchedule.logarithm(cfg["schedule.floor"])
    return CoolingSchedule.reciprocal(cfg["schedule.alpha"], cfg["schedule.floor"])


def _proposal_from_config(cfg, explicit) -> ProposalConfig:
    if cfg["proposal"] == "full":
        if "proposal.k_points" in explicit:
            raise ConfigError("proposal.k_points only applies to proposal = kpoint")
        return ProposalConfig.full(cfg["proposal.sigma0"], cfg["proposal.decay"],
                                   cfg["proposal.max_attempts"])
    return ProposalConfig.kpoint(cfg["proposal.k_points"], cfg["proposal.sigma0"],
                                 cfg["proposal.decay"], cfg["proposal.max_attempts"])


def _spec_from_config(cfg, explicit, algorithm: str) -> ExperimentSpec:
    try:
        Interval(cfg["constraint.lo"], cfg["constraint.hi"])
        return ExperimentSpec(
            name=cfg["experiment"] or f"{cfg['model']}-{algorithm}",
            algorithm=algorithm,
            model=cfg["model"],
            schedule=_schedule_from_config(cfg, explicit),
            proposal=_proposal_from_config(cfg, explicit),
            n_states=cfg["n_states"],
            iterations=cfg["iterations"],
            replications=cfg["replications"],
            seed=cfg["seed"],
            loss_spec=LossSpec(cfg["loss"], cfg["loss.c"]),
            direction=cfg["constraint.direction"],
            interval=(cfg["constraint.lo"], cfg["constraint.hi"]),
            numer_degree=cfg["model.numer_degree"],
            denom_degree=cfg["model.denom_degree"],
            n_knots=cfg["model.n_knots"],
            spline_degree=cfg["model.degree"],
            start_scale=cfg["start.scale"],
            start_copies=cfg["start.copies"],
            start_origin=cfg["start.origin"],
            start_max_attempts=cfg["start.max_attempts"],
            resampling=cfg["resampling"],
            root_tol=cfg["constraint.root_tol"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _jsonable(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def _config_echo(cfg) -> dict:
    return {key: _jsonable(value) for key, value in cfg.items()}


def _write_json(report: dict, out):
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _progress_printer(label: str, iterations: int, every: int, quiet: bool):
    if quiet or every < 1:
        return None

    def callback(population):
        k = population.iteration
        if k % every == 0 or k == iterations:
            print(f"{label}: iteration {k}/{iterations} best {population.best_loss:.6g}",
                  file=sys.stderr, flush=True)
    return callback


def cmd_gendata(args) -> int:
    seed = args.seed if args.seed is not None else CANONICAL_SEED
    data = _DATASET_BUILDERS[args.name](seed)
    if args.out:
        write_dataset_csv(data, args.out)
        if not args.quiet:
            print(f"wrote {data.n} rows to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(f"{data.x_label},{data.y_label}\n")
        for xi, yi in zip(data.x, data.y):
            sys.stdout.write(f"{float(xi)!r},{float(yi)!r}\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg, explicit = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    algorithms = _algorithms(cfg)
    if len(algorithms) != 1:
        raise ConfigError("fit needs exactly one algorithm")
    data = _dataset_from_config(cfg)
    spec = _spec_from_config(cfg, explicit, algorithms[0])
    progress = _progress_printer(spec.name, spec.iterations,
                                 cfg["progress_every"], args.quiet)
    result = run_replication(spec, data, 0, n_threads=args.threads,
                             on_iteration=progress)
    report = {
        "schema_version": 1,
        "command": "fit",
        "config": _config_echo(cfg),
        "dataset": data.name,
        "algorithm": spec.algorithm,
        "seed": spec.seed,
        "run_seed": result.seed,
        "best_state": [float(v) for v in result.best_state],
        "best_loss": result.best_loss,
        "iterations_run": result.iterations_run,
        "trace": [[k, loss] for k, loss in result.trace],
        "wall_time_s": result.wall_time,
    }
    _write_json(report, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg, explicit = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    algorithms = _algorithms(cfg)
    data = _dataset_from_config(cfg)
    out_dir = args.out or "bench-out"
    os.makedirs(out_dir, exist_ok=True)

    run_rows = []
    summary_rows = []
    for algorithm in algorithms:
        spec = _spec_from_config(cfg, explicit, algorithm)
        outcomes = [None] * spec.replications
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                futures = [pool.submit(run_replication, spec, data, rep)
                           for rep in range(spec.replications)]
            for rep, future in enumerate(futures):
                outcomes[rep] = _capture(future.result)
        else:
            for rep in range(spec.replications):
                outcomes[rep] = _capture(lambda r=rep: run_replication(spec, data, r))
        results = []
        for rep, (result, failure) in enumerate(outcomes):
            if failure is not None:
                run_rows.append([algorithm, rep, "failed", "", "", failure])
                print(f"warning: {algorithm} replication {rep} failed: {failure}",
                      file=sys.stderr)
                continue
            results.append(result)
            run_rows.append([algorithm, rep, "ok", repr(result.best_loss),
                             f"{result.wall_time:.3f}", ""])
            if not args.quiet:
                print(f"{algorithm}: replication {rep + 1}/{spec.replications} "
                      f"loss {result.best_loss:.6g} ({result.wall_time:.1f}s)",
                      file=sys.stderr, flush=True)
        if results:
            summary_rows.append(summarize_runs(results, cfg["conv_threshold_pct"],
                                               label=algorithm))

    with open(os.path.join(out_dir, "runs.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["algorithm", "replication", "status", "best_loss",
                         "wall_time_s", "message"])
        writer.writerows(run_rows)
    if not summary_rows:
        print("smcsa: error: every replication failed", file=sys.stderr)
        return EXIT_INFEASIBLE
    table = SummaryTable(summary_rows, cfg["conv_threshold_pct"])
    table.write_csv(os.path.join(out_dir, "summary.csv"))
    text = table.to_text()
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(text + "\n")
    if not args.quiet:
        print(text)
    return EXIT_OK


def _capture(call):
    try:
        return call(), None
    except (InfeasibleStartError, StartSetError, PoleError, SingularDesignError,
            RuntimeError, np.linalg.LinAlgError) as exc:
        return None, str(exc) or type(exc).__name__


def cmd_oracle(args) -> int:
    cfg, explicit = load_config(args.config)
    if cfg["model"] != "bspline":
        raise ConfigError("oracle requires model = bspline")
    data = _dataset_from_config(cfg)
    _, basis = monotone_spline_problem(
        data, n_knots=cfg["model.n_knots"], degree=cfg["model.degree"],
        direction=cfg["constraint.direction"])
    design = design_matrix(basis, data.x)
    coefficients = qp_oracle_monotone_spline(design, data.y,
                                             cfg["constraint.direction"])
    resid = data.y - design @ coefficients
    report = {
        "schema_version": 1,
        "command": "oracle",
        "config": _config_echo(cfg),
        "dataset": data.name,
        "direction": cfg["constraint.direction"],
        "n_basis": basis.n_basis,
        "knots": [float(k) for k in basis.knots],
        "coefficients": [float(c) for c in coefficients],
        "objective": float(resid @ resid),
    }
    _write_json(report, args.out)
    return EXIT_OK


def _default_threads() -> int:
    raw = os.environ.get("SMCSA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smcsa",
        description="Shape-constrained regression by annealed particle search")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker threads (default: SMCSA_THREADS or 1)")
    common.add_argument("--quiet", action="store_true",
                        help="suppress progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gendata", parents=[common],
                       help="write a built-in dataset as CSV")
    p.add_argument("--name", required=True, choices=sorted(_DATASET_BUILDERS))
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("fit", parents=[common],
                       help="run one seeded fit and emit a JSON report")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", parents=[common],
                       help="run replicated benchmarks and summarise")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", parents=[common],
                       help="exact reference solution for spline problems")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except DataFormatError as exc:
        return _fail(exc, EXIT_DATA)
    except (InfeasibleStartError, StartSetError) as exc:
        return _fail(exc, EXIT_INFEASIBLE)
    except (PoleError, SingularDesignError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_SINGULAR)
    except OSError as exc:
        return _fail(exc, EXIT_DATA)
    except ValueError as exc:
        return _fail(exc, EXIT_CONFIG)


def _fail(exc, code: int) -> int:
    print(f"smcsa: error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
