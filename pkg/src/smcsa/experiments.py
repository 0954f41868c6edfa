"""Experiment protocols: datasets, starting states, baselines, summaries.

The two study problems are monotone rational regression on a noisy
hyperbolic-tangent dataset and decreasing quadratic-spline regression on
a surrogate of a laser-ranging scatter.  Everything needed to reproduce a
benchmark lives here: dataset generators and CSV round-trip, Cauchy
starting-state generation around a crude estimate, an exact active-set
enumeration oracle for the spline problem, and multi-run summaries.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constraints import (DECREASING, DEFAULT_ROOT_TOL, INCREASING, Interval,
                          bspline_monotone_batch, bspline_monotone_indicator,
                          rational_monotone_indicator)
from .core import (MULTINOMIAL, CoolingSchedule, Problem, ProposalConfig,
                   RunResult, multistart_sa_run, smcsa_run)
from .models import (BSplineBasis, Dataset, LossSpec, RationalModel,
                     SingularDesignError, design_matrix, loss,
                     rational_crude_estimate, rational_eval, tukey_biweight)

logger = logging.getLogger(__name__)

CANONICAL_SEED = 1729

# 1-based positions of the two observations replaced when contaminating.
_CONTAMINATED_POINTS = ((2, 2.0), (28, 0.0))


class DataFormatError(ValueError):
    """CSV input does not parse into a numeric two-column dataset."""


class StartSetError(RuntimeError):
    """Feasible starting states could not be generated near the origin."""


def gen_ht0(seed: int = CANONICAL_SEED) -> Dataset:
    """Noisy shifted hyperbolic tangent on 30 equispaced points in [0, 6].

    y_i = 1 + tanh(x_i - 3) + e_i with e_i iid N(0, 0.3^2).
    """
    x = (6.0 / 29.0) * np.arange(30)
    rng = np.random.default_rng(seed)
    y = 1.0 + np.tanh(x - 3.0) + 0.3 * rng.standard_normal(30)
    return Dataset(x, y, name=f"ht0-{seed}")


def contaminate_ht1(data: Dataset) -> Dataset:
    """Copy of the dataset with two gross outliers planted.

    Observation 2 (1-based) is replaced by 2.0 and observation 28 by 0.0,
    turning the smooth testbed into its outlier-contaminated variant.
    """
    if data.n < max(pos for pos, _ in _CONTAMINATED_POINTS):
        raise ValueError("dataset too short to contaminate")
    y = data.y.copy()
    for pos, value in _CONTAMINATED_POINTS:
        y[pos - 1] = value
    return Dataset(data.x, y, name=f"{data.name}-contaminated",
                   x_label=data.x_label, y_label=data.y_label)


def gen_lidar_surrogate(seed: int = CANONICAL_SEED) -> Dataset:
    """Synthetic stand-in for a laser-ranging scatter: 221 points, decreasing.

    A smooth sigmoid drop over range 390..720 with additive Gaussian
    noise; divide both axes by their maxima (scale_by_max) to reproduce
    the usual preprocessing before fitting.
    """
    x = np.linspace(390.0, 720.0, 221)
    rng = np.random.default_rng(seed)
    y = 0.3 - 0.5 * np.tanh((x - 585.0) / 40.0) + 0.05 * rng.standard_normal(221)
    return Dataset(x, y, name=f"lidar-surrogate-{seed}",
                   x_label="range", y_label="logratio")


def scale_axes(data: Dataset, x_scale=None, y_scale=None) -> Dataset:
    """Divide either axis by a constant, or by its maximum ("max")."""
    def factor(values, spec):
        if spec is None:
            return 1.0
        if spec == "max":
            m = float(values.max())
            if m <= 0.0:
                raise ValueError("max scaling needs a positive maximum")
            return m
        f = float(spec)
        if not math.isfinite(f) or f == 0.0:
            raise ValueError("scale factor must be finite and non-zero")
        return f
    return Dataset(data.x / factor(data.x, x_scale),
                   data.y / factor(data.y, y_scale),
                   name=data.name, x_label=data.x_label, y_label=data.y_label)


def scale_by_max(data: Dataset) -> Dataset:
    """Scale both axes by their maxima (the surrogate's preprocessing)."""
    return scale_axes(data, "max", "max")


def write_dataset_csv(data: Dataset, path):
    """Write x,y rows with a header; floats via repr so reloads are exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([data.x_label, data.y_label])
        for xi, yi in zip(data.x, data.y):
            writer.writerow([repr(float(xi)), repr(float(yi))])


def load_dataset_csv(path, x_column: str = "x", y_column: str = "y") -> Dataset:
    """Read a two-column numeric dataset from a headered CSV file.

    Raises DataFormatError naming the offending line and column for
    missing headers, short rows, or non-numeric/non-finite fields.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    indices = {}
    for column in (x_column, y_column):
        if column not in header:
            raise DataFormatError(f"{path}: column {column!r} not in header {header}")
        indices[column] = header.index(column)
    xs = []
    ys = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise DataFormatError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
        values = {}
        for column, idx in indices.items():
            cell = row[idx].strip()
            try:
                value = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {lineno}, column {column!r}: non-numeric value {cell!r}") from None
            if not math.isfinite(value):
                raise DataFormatError(
                    f"{path}: line {lineno}, column {column!r}: non-finite value {cell!r}")
            values[column] = value
        xs.append(values[x_column])
        ys.append(values[y_column])
    if not xs:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(np.array(xs), np.array(ys), name=os.path.basename(path),
                   x_label=x_column, y_label=y_column)


@dataclass(frozen=True)
class StartSet:
    """Feasible starting states scattered around a crude estimate."""

    states: np.ndarray
    origin: np.ndarray


def gen_start_set(origin, indicator, n: int, scale: float = 2.0, seed: int = 0,
                  max_attempts: int = 100_000, indicator_batch=None) -> StartSet:
    """Draw n feasible states component-wise Cauchy around the origin.

    Each state repeats origin + scale * Cauchy noise until the indicator
    accepts it; the heavy tails spread starts far beyond the crude
    estimate.  Every state draws from its own child stream of the seed, so
    the set does not depend on how many rejections earlier states took or
    on whether the vectorised indicator path is used.  Raises
    StartSetError when a state exhausts max_attempts.
    """
    origin = np.asarray(origin, dtype=float)
    if origin.ndim != 1 or not np.all(np.isfinite(origin)):
        raise ValueError("origin must be a finite vector")
    if n < 1:
        raise ValueError("need at least one start")
    streams = np.random.SeedSequence(seed).spawn(n)
    states = np.empty((n, origin.size))
    for i in range(n):
        rng = np.random.default_rng(streams[i])
        if indicator_batch is not None:
            state = _first_feasible_cauchy(origin, scale, max_attempts,
                                           indicator_batch, rng)
        else:
            state = None
            for _ in range(max_attempts):
                candidate = origin + scale * rng.standard_cauchy(origin.size)
                if indicator(candidate):
                    state = candidate
                    break
        if state is None:
            raise StartSetError(
                f"no feasible start within {max_attempts} draws (state {i}); "
                "try another origin or scale")
        states[i] = state
    return StartSet(states=states, origin=origin)


def _first_feasible_cauchy(origin, scale, max_attempts, indicator_batch, rng):
    remaining = max_attempts
    batch = 16
    while remaining > 0:
        b = min(batch, remaining)
        candidates = origin + scale * rng.standard_cauchy((b, origin.size))
        feasible = np.asarray(indicator_batch(candidates))
        first = int(np.argmax(feasible))
        if feasible[first]:
            return candidates[first]
        remaining -= b
        batch = min(4 * batch, 1024)
    return None


def duplicate_starts(states, copies: int) -> np.ndarray:
    """Stack `copies` blockwise repetitions of the start states."""
    states = np.asarray(states, dtype=float)
    if copies < 1:
        raise ValueError("copies must be at least 1")
    return np.tile(states, (copies, 1))


def rational_monotone_problem(data: Dataset, *, model: RationalModel = RationalModel(),
                              direction: str = INCREASING, interval=(0.0, 6.0),
                              loss_spec: LossSpec = LossSpec(),
                              root_tol: float = DEFAULT_ROOT_TOL) -> Problem:
    """Fit a rational curve constrained to be monotone on an interval.

    The returned problem's indicator decides monotonicity exactly from the
    parameter vector; the loss aggregates residuals per loss_spec.  The
    interval must cover the data abscissae so feasible parameters cannot
    put a pole at a data point.
    """
    iv = interval if isinstance(interval, Interval) else Interval(*interval)
    if data.x.min() < iv.lo or data.x.max() > iv.hi:
        raise ValueError("constraint interval must cover the data abscissae")

    def predict(theta, xs):
        return rational_eval(model, theta, xs)

    def loss_fn(theta):
        return loss(predict, theta, data, loss_spec)

    split = model.numer_degree + 1

    def indicator_fn(theta):
        numer = theta[:split]
        denom = np.concatenate(([1.0], theta[split:]))
        return rational_monotone_indicator(numer, denom, iv, direction, root_tol)

    return Problem(model.n_parameters, loss_fn, indicator_fn)


def monotone_spline_problem(data: Dataset, *, n_knots: int = 10, degree: int = 2,
                            direction: str = DECREASING,
                            loss_spec: LossSpec = LossSpec()):
    """Fit a monotone spline on equidistant knots covering the data range.

    Returns (problem, basis); the problem's states are the basis
    coefficients and its indicator is the coefficient-ordering check.
    """
    basis = BSplineBasis.covering(float(data.x.min()), float(data.x.max()),
                                  n_knots, degree)
    design = design_matrix(basis, data.x)
    y = data.y
    c = loss_spec.c
    if loss_spec.kind == "squared_error":
        def loss_fn(theta):
            resid = y - design @ theta
            return float(resid @ resid)
    else:
        def loss_fn(theta):
            resid = y - design @ theta
            return float(np.sum(tukey_biweight(resid, c)))

    def indicator_fn(theta):
        return bspline_monotone_indicator(theta, direction)

    def indicator_batch_fn(thetas):
        return bspline_monotone_batch(thetas, direction)

    return Problem(basis.n_basis, loss_fn, indicator_fn, indicator_batch_fn), basis


def qp_oracle_monotone_spline(design, y, direction: str = DECREASING) -> np.ndarray:
    """Exact least-squares spline coefficients under a monotonicity order.

    Enumerates every subset of the J - 1 adjacent-equality constraints,
    solves the equality-restricted least-squares problem by merging the
    tied columns, and keeps the feasible solution with the smallest
    residual sum of squares.  The all-tied subset (a constant fit) is
    always feasible, so a solution always exists.  Exponential in J; meant
    as a small-J reference, not a production solver.
    """
    a = np.asarray(design, dtype=float)
    yv = np.asarray(y, dtype=float)
    if a.ndim != 2 or a.shape[0] != yv.size:
        raise ValueError("design rows must match y")
    jdim = a.shape[1]
    if jdim < 2:
        raise ValueError("need at least two coefficients")
    if jdim > 20:
        raise ValueError("active-set enumeration is limited to 20 coefficients")
    sign = 1.0 if direction == INCREASING else -1.0
    if direction not in (INCREASING, DECREASING):
        raise ValueError(f"direction must be increasing or decreasing, got {direction!r}")

    best_rss = np.inf
    best_beta = None
    skipped = 0
    groups = np.empty(jdim, dtype=int)
    for mask in range(1 << (jdim - 1)):
        g = 0
        groups[0] = 0
        for j in range(1, jdim):
            if not (mask >> (j - 1)) & 1:
                g += 1
            groups[j] = g
        starts = np.flatnonzero(np.r_[True, groups[1:] != groups[:-1]])
        reduced = np.add.reduceat(a, starts, axis=1)
        beta_g, _, rank, _ = np.linalg.lstsq(reduced, yv, rcond=None)
        if rank < reduced.shape[1]:
            skipped += 1
            continue
        beta = beta_g[groups]
        if not np.all(sign * np.diff(beta) >= 0.0):
            continue
        resid = yv - a @ beta
        rss = float(resid @ resid)
        if rss < best_rss:
            best_rss = rss
            best_beta = beta
    if skipped:
        logger.warning("qp oracle skipped %d rank-deficient active sets", skipped)
    if best_beta is None:
        raise SingularDesignError("no active set produced a full-rank system")
    return best_beta


@dataclass(frozen=True)
class SummaryRow:
    """Distribution of final losses over replications of one configuration."""

    label: str
    n_runs: int
    mean: float
    sd: float
    min: float
    median: float
    max: float
    conv_count: int
    median_time: float


def summarize_runs(results, conv_threshold_pct: float = 1.0, label: str = "") -> SummaryRow:
    """Summary statistics of final losses across runs.

    conv_count counts runs with loss strictly below
    min * (1 + conv_threshold_pct / 100); the rule presumes positive
    losses, where the minimising run always counts.
    """
    losses = np.array([r.best_loss for r in results], dtype=float)
    if losses.size == 0:
        raise ValueError("no runs to summarise")
    times = np.array([r.wall_time for r in results], dtype=float)
    best = float(losses.min())
    threshold = best * (1.0 + conv_threshold_pct / 100.0)
    return SummaryRow(
        label=label,
        n_runs=int(losses.size),
        mean=float(losses.mean()),
        sd=float(losses.std(ddof=1)) if losses.size > 1 else 0.0,
        min=best,
        median=float(np.median(losses)),
        max=float(losses.max()),
        conv_count=int(np.sum(losses < threshold)),
        median_time=float(np.median(times)),
    )


_SUMMARY_FIELDS = ("label", "n_runs", "mean", "sd", "min", "median", "max",
                   "conv_count", "median_time")


@dataclass
class SummaryTable:
    """Rows of run summaries with text and CSV renderings."""

    rows: list
    conv_threshold_pct: float = 1.0

    def to_text(self) -> str:
        out = [f"{'configuration':<28}{'mean':>11}{'sd':>11}{'min':>11}"
               f"{'median':>11}{'max':>11}{'conv':>9}{'time_s':>10}"]
        for r in self.rows:
            conv = f"{r.conv_count}/{r.n_runs}"
            out.append(f"{r.label:<28}{r.mean:>11.4g}{r.sd:>11.4g}{r.min:>11.4g}"
                       f"{r.median:>11.4g}{r.max:>11.4g}{conv:>9}{r.median_time:>10.3f}")
        out.append(f"conv: runs within {self.conv_threshold_pct}% of the best run")
        return "\n".join(out)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_SUMMARY_FIELDS)
            for r in self.rows:
                writer.writerow([getattr(r, f) for f in _SUMMARY_FIELDS])


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete recipe for one benchmark configuration.

    Two ExperimentSpecs differing only in algorithm see identical
    starting states in matching replications, so comparisons share their
    initial conditions.
    """

    name: str
    algorithm: str
    model: str
    schedule: CoolingSchedule
    proposal: ProposalConfig
    n_states: int
    iterations: int
    replications: int
    seed: int
    loss_spec: LossSpec = LossSpec()
    direction: str = INCREASING
    interval: tuple = (0.0, 6.0)
    numer_degree: int = 2
    denom_degree: int = 2
    n_knots: int = 10
    spline_degree: int = 2
    start_scale: float = 2.0
    start_copies: int = 1
    start_origin: tuple = None
    start_max_attempts: int = 100_000
    resampling: str = MULTINOMIAL
    root_tol: float = DEFAULT_ROOT_TOL

    def __post_init__(self):
        if self.algorithm not in ("smcsa", "multistart"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.model not in ("rational", "bspline"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.n_states < 1 or self.iterations < 1 or self.replications < 1:
            raise ValueError("n_states, iterations, and replications must be positive")
        if self.start_copies < 1 or self.n_states % self.start_copies:
            raise ValueError("n_states must be a positive multiple of start_copies")


def replication_seeds(master_seed: int, rep: int):
    """Deterministic (start_seed, run_seed) pair for one replication."""
    ss = np.random.SeedSequence([master_seed & (2 ** 64 - 1), rep])
    start_seed, run_seed = ss.generate_state(2, np.uint64)
    return int(start_seed), int(run_seed)


def _build_problem(spec: ExperimentSpec, data: Dataset):
    if spec.model == "rational":
        model = RationalModel(spec.numer_degree, spec.denom_degree)
        problem = rational_monotone_problem(
            data, model=model, direction=spec.direction, interval=spec.interval,
            loss_spec=spec.loss_spec, root_tol=spec.root_tol)
        basis = None
        if spec.start_origin is not None:
            origin = np.asarray(spec.start_origin, dtype=float)
        else:
            origin = rational_crude_estimate(data, model)
    else:
        problem, basis = monotone_spline_problem(
            data, n_knots=spec.n_knots, degree=spec.spline_degree,
            direction=spec.direction, loss_spec=spec.loss_spec)
        if spec.start_origin is not None:
            origin = np.asarray(spec.start_origin, dtype=float)
        else:
            # An ordered integer ramp: already feasible, and the heavy-tailed
            # start scatter does the exploring.
            j = problem.dimension
            if spec.direction == DECREASING:
                origin = np.arange(j, 0, -1, dtype=float)
            else:
                origin = np.arange(1, j + 1, dtype=float)
    if origin.shape != (problem.dimension,):
        raise ValueError(f"start origin must have dimension {problem.dimension}")
    return problem, origin, basis


def run_replication(spec: ExperimentSpec, data: Dataset, rep: int, *,
                    n_threads: int = 1, on_iteration=None) -> RunResult:
    """Run one seeded replication of an ExperimentSpec on the dataset."""
    if not 0 <= rep < spec.replications:
        raise ValueError(f"replication index must lie in [0, {spec.replications})")
    problem, origin, _ = _build_problem(spec, data)
    start_seed, run_seed = replication_seeds(spec.seed, rep)
    starts = gen_start_set(origin, problem.indicator,
                           spec.n_states // spec.start_copies,
                           scale=spec.start_scale, seed=start_seed,
                           max_attempts=spec.start_max_attempts,
                           indicator_batch=problem.indicator_batch)
    states = duplicate_starts(starts.states, spec.start_copies)
    if spec.algorithm == "smcsa":
        return smcsa_run(problem, states, spec.schedule, spec.proposal,
                         spec.iterations, run_seed, resampling=spec.resampling,
                         n_threads=n_threads, on_iteration=on_iteration)
    return multistart_sa_run(problem, states, spec.schedule, spec.proposal,
                             spec.iterations, run_seed, n_threads=n_threads,
                             on_iteration=on_iteration)


def run_experiment(spec: ExperimentSpec, data: Dataset, *, n_threads: int = 1) -> list:
    """Run every replication; results are ordered and seed-reproducible.

    Replications are independent and may run on a thread pool; each
    replication derives its seeds from (spec.seed, replication index), so
    the outcome does not depend on n_threads.
    """
    if n_threads <= 1 or spec.replications == 1:
        return [run_replication(spec, data, r) for r in range(spec.replications)]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        futures = [pool.submit(run_replication, spec, data, r)
                   for r in range(spec.replications)]
        return [f.result() for f in futures]
