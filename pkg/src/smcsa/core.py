"""Sequential Monte Carlo simulated annealing over black-box feasible sets.

A population of feasible states is evolved through a cooling schedule.
Each iteration reweights the population by the Boltzmann change between
consecutive temperatures, resamples, and applies one Metropolis move per
particle: a truncated Gaussian random-walk proposal (resampled until it
lands in the feasible set) accepted with probability
min(1, exp(-(loss(new) - loss(old)) / T_k)).  The proposal-density ratio
is deliberately dropped from the acceptance probability; with the modest
truncation rates seen under shape constraints the bias is negligible and
the indicator never has to be integrated.

Temperatures adapt to the running best loss, so schedules need no manual
scale tuning.  A multi-start variant without the interaction step is
included for benchmarking.

Randomness is organised in counter-based lanes: every (iteration,
particle) pair owns a block of a Philox stream keyed by the run seed.
Draws therefore depend only on the seed and the lane, never on thread
scheduling, which makes runs bit-reproducible for any worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

LOGARITHM = "logarithm"
RECIPROCAL = "reciprocal"

MULTINOMIAL = "multinomial"
SYSTEMATIC = "systematic"

DEFAULT_TEMPERATURE_FLOOR = 1e-10
DEFAULT_MAX_ATTEMPTS = 1000

# Lane index reserved for per-iteration bookkeeping draws (resampling).
_RESAMPLE_LANE = 2 ** 64 - 1


class InfeasibleStartError(ValueError):
    """A starting state violates the feasibility indicator."""

    def __init__(self, index: int):
        super().__init__(f"start state {index} violates the feasibility indicator")
        self.index = index


@dataclass(frozen=True)
class Problem:
    """Minimisation target: a loss and a black-box feasibility indicator.

    The indicator answers membership only; no gradients or constraint
    values are ever requested.  loss must be finite on feasible states.
    indicator_batch, when given, must evaluate the same predicate on the
    rows of a 2-d array; the rejection sampler then tests candidates in
    vectorised batches, with results identical to the scalar path.
    """

    dimension: int
    loss: Callable[[np.ndarray], float]
    indicator: Callable[[np.ndarray], bool]
    indicator_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")


@dataclass(frozen=True)
class CoolingSchedule:
    """Temperature sequence T(k) scaled by the running best loss.

    kind "logarithm": T_k = |best| / ln(k + 1); guarantees the classic
    convergence condition but cools slowly.  kind "reciprocal":
    T_k = |best| / (1 + alpha (k - 1)^2) with alpha in (0, 1); cools much
    faster at the price of the guarantee.  Temperatures are clamped from
    below by floor so acceptance ratios stay well-defined.
    """

    kind: str
    alpha: Optional[float] = None
    floor: float = DEFAULT_TEMPERATURE_FLOOR

    def __post_init__(self):
        if self.kind not in (LOGARITHM, RECIPROCAL):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == RECIPROCAL:
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("reciprocal schedule needs alpha in (0, 1)")
        elif self.alpha is not None:
            raise ValueError("logarithm schedule takes no alpha")
        if not self.floor > 0.0:
            raise ValueError("floor must be positive")

    @classmethod
    def logarithm(cls, floor: float = DEFAULT_TEMPERATURE_FLOOR) -> "CoolingSchedule":
        return cls(LOGARITHM, None, floor)

    @classmethod
    def reciprocal(cls, alpha: float, floor: float = DEFAULT_TEMPERATURE_FLOOR) -> "CoolingSchedule":
        return cls(RECIPROCAL, alpha, floor)

    def temperature(self, k: int, best_loss: float) -> float:
        """T at iteration k >= 1 given the best loss through iteration k - 1."""
        if k < 1:
            raise ValueError("iteration index starts at 1")
        scale = abs(best_loss)
        if self.kind == LOGARITHM:
            t = scale / math.log(k + 1.0)
        else:
            t = scale / (1.0 + self.alpha * (k - 1.0) ** 2)
        return t if t > self.floor else self.floor


@dataclass(frozen=True)
class ProposalConfig:
    """Truncated Gaussian random-walk settings.

    kind "full" perturbs every coordinate; kind "kpoint" picks k_points
    coordinates uniformly without replacement once per move and perturbs
    only those.  sigma0 is the initial noise variance, shrunk to
    sigma0 * decay**k at iteration k.  Proposals are redrawn until
    feasible; after max_attempts failures the move is abandoned.
    """

    kind: str = "full"
    k_points: Optional[int] = None
    sigma0: float = 1.0
    decay: float = 1.0
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self):
        if self.kind not in ("full", "kpoint"):
            raise ValueError(f"unknown proposal kind {self.kind!r}")
        if self.kind == "kpoint":
            if self.k_points is None or self.k_points < 1:
                raise ValueError("kpoint proposal needs k_points >= 1")
        elif self.k_points is not None:
            raise ValueError("full proposal takes no k_points")
        if not self.sigma0 > 0.0:
            raise ValueError("sigma0 must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")

    @classmethod
    def full(cls, sigma0: float = 1.0, decay: float = 1.0,
             max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> "ProposalConfig":
        return cls("full", None, sigma0, decay, max_attempts)

    @classmethod
    def kpoint(cls, k_points: int, sigma0: float = 1.0, decay: float = 1.0,
               max_attempts: int = DEFAULT_MAX_ATTEMPTS) -> "ProposalConfig":
        return cls("kpoint", k_points, sigma0, decay, max_attempts)

    def sigma2_at(self, k: int) -> float:
        """Noise variance at iteration k."""
        return self.sigma0 * self.decay ** k


class Particle(NamedTuple):
    state: np.ndarray
    loss: float
    weight: float


@dataclass
class Population:
    """Snapshot of the particle system at one iteration."""

    states: np.ndarray
    losses: np.ndarray
    weights: np.ndarray
    iteration: int
    best_state: np.ndarray
    best_loss: float

    def __post_init__(self):
        n = self.states.shape[0]
        if self.losses.shape != (n,) or self.weights.shape != (n,):
            raise ValueError("losses and weights must match the number of states")
        if self.iteration < 0:
            raise ValueError("iteration must be non-negative")
        if np.any(self.weights < 0.0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to one")
        if self.best_loss > self.losses.min():
            raise ValueError("best loss cannot exceed the population minimum")

    @property
    def n(self) -> int:
        return self.states.shape[0]

    def particles(self):
        return [Particle(self.states[j], float(self.losses[j]), float(self.weights[j]))
                for j in range(self.n)]


@dataclass
class RunResult:
    """Outcome of one optimisation run."""

    best_state: np.ndarray
    best_loss: float
    iterations_run: int
    trace: list
    wall_time: float
    seed: int


def acceptance_probability(proposed_loss: float, current_loss: float,
                           proposed_feasible: bool, temperature: float) -> float:
    """Metropolis acceptance probability at the given temperature.

    Infeasible proposals are never accepted; loss improvements always are.
    """
    if not proposed_feasible:
        return 0.0
    if not temperature > 0.0:
        raise ValueError("temperature must be positive")
    diff = proposed_loss - current_loss
    if diff <= 0.0:
        return 1.0
    return math.exp(-diff / temperature)


def compute_weights(losses, k: int, t_k: float, t_prev: Optional[float] = None) -> np.ndarray:
    """Normalised importance weights for iteration k.

    At k = 1 the weights are Boltzmann weights exp(-loss / T_1); afterwards
    they are the change of Boltzmann measure between T_{k-1} and T_k,
    exp(-loss * (1/T_k - 1/T_{k-1})).  Exponents are max-shifted before
    exponentiation so the largest weight is exactly 1 pre-normalisation.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError("losses must be a non-empty vector")
    if not np.all(np.isfinite(losses)):
        raise ValueError("losses must be finite")
    if not t_k > 0.0:
        raise ValueError("t_k must be positive")
    if k < 1:
        raise ValueError("iteration index starts at 1")
    if k == 1:
        exponents = -losses / t_k
    else:
        if t_prev is None or not t_prev > 0.0:
            raise ValueError("iterations beyond the first need the previous temperature")
        exponents = -losses * (1.0 / t_k - 1.0 / t_prev)
    exponents -= exponents.max()
    w = np.exp(exponents)
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise RuntimeError("importance weights degenerated to zero")
    return w / total


def resample_indices(weights, size: int, rng: np.random.Generator,
                     method: str = MULTINOMIAL) -> np.ndarray:
    """Ancestor indices drawn by inverse transform over the weight CDF."""
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w)
    if not 0.999999 < cdf[-1] < 1.000001:
        raise ValueError("weights must sum to one")
    cdf[-1] = 1.0
    if method == MULTINOMIAL:
        u = rng.random(size)
    elif method == SYSTEMATIC:
        u = (rng.random() + np.arange(size)) / size
    else:
        raise ValueError(f"unknown resampling method {method!r}")
    return np.searchsorted(cdf, u, side="right")


def resample(states, weights, rng: np.random.Generator,
             method: str = MULTINOMIAL) -> np.ndarray:
    """Draw a same-size population of states proportional to the weights."""
    states = np.asarray(states, dtype=float)
    idx = resample_indices(weights, states.shape[0], rng, method)
    return states[idx]


def _propose_batches(state, coords, sigma, max_attempts, indicator_batch, rng):
    # Candidate i of a batch equals candidate i of the scalar loop: numpy
    # fills the noise matrix row by row from the same stream, so taking the
    # first feasible row reproduces the sequential rejection sampler.
    remaining = max_attempts
    batch = 16
    while remaining > 0:
        b = min(batch, remaining)
        if coords is None:
            candidates = state + sigma * rng.standard_normal((b, state.shape[0]))
        else:
            candidates = np.repeat(state[None, :], b, axis=0)
            candidates[:, coords] += sigma * rng.standard_normal((b, coords.shape[0]))
        feasible = np.asarray(indicator_batch(candidates))
        first = int(np.argmax(feasible))
        if feasible[first]:
            return candidates[first]
        remaining -= b
        batch = min(4 * batch, 256)
    return None


def propose(state: np.ndarray, config: ProposalConfig, sigma2_k: float,
            indicator: Callable[[np.ndarray], bool],
            rng: np.random.Generator, indicator_batch=None) -> Optional[np.ndarray]:
    """One feasible random-walk proposal, or None when attempts run out.

    Gaussian noise with variance sigma2_k is added (to all coordinates, or
    to a once-chosen random subset of k_points coordinates) and redrawn
    until the indicator accepts the candidate.  A vectorised
    indicator_batch, when given, is used in place of per-candidate calls;
    the returned candidate is identical either way.
    """
    sigma = math.sqrt(sigma2_k)
    coords = None
    if config.kind == "kpoint":
        k = config.k_points
        if k > state.shape[0]:
            raise ValueError("k_points exceeds the state dimension")
        coords = rng.permutation(state.shape[0])[:k]
    if indicator_batch is not None:
        return _propose_batches(state, coords, sigma, config.max_attempts,
                                indicator_batch, rng)
    if coords is not None:
        for _ in range(config.max_attempts):
            candidate = state.copy()
            candidate[coords] += sigma * rng.standard_normal(coords.shape[0])
            if indicator(candidate):
                return candidate
        return None
    for _ in range(config.max_attempts):
        candidate = state + sigma * rng.standard_normal(state.shape[0])
        if indicator(candidate):
            return candidate
    return None


def sa_move(state: np.ndarray, state_loss: float, t_k: float, problem: Problem,
            config: ProposalConfig, sigma2_k: float, rng: np.random.Generator):
    """One Metropolis step; returns the (state, loss) pair after the move.

    Exhausted proposals count as rejected moves, so the chain never leaves
    the feasible set.
    """
    # The acceptance uniform is drawn before the proposal, so the decision
    # does not depend on how many rejected candidates the sampler consumed.
    u = rng.random()
    candidate = propose(state, config, sigma2_k, problem.indicator, rng,
                        problem.indicator_batch)
    if candidate is None:
        return state, state_loss
    candidate_loss = problem.loss(candidate)
    p = acceptance_probability(candidate_loss, state_loss, True, t_k)
    if p >= 1.0 or u < p:
        return candidate, candidate_loss
    return state, state_loss


class _LaneStreams:
    """Philox stream carved into counter lanes addressed by (iteration, particle).

    The 256-bit counter is set to (0, 0, particle, iteration) and the
    draw buffer cleared before handing out the generator, so each lane
    yields the same values no matter what was drawn before it.  One
    instance must not be shared across threads; workers hold their own.
    """

    def __init__(self, seed: int):
        self._bitgen = np.random.Philox(key=seed & ((1 << 128) - 1))
        self.generator = np.random.Generator(self._bitgen)

    def lane(self, iteration: int, particle: int) -> np.random.Generator:
        state = self._bitgen.state
        counter = state["state"]["counter"]
        counter[0] = 0
        counter[1] = 0
        counter[2] = particle
        counter[3] = iteration
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self.generator


def _prepare_starts(problem: Problem, starts) -> np.ndarray:
    states = np.array([np.asarray(s, dtype=float) for s in starts])
    if states.ndim != 2 or states.shape[0] == 0:
        raise ValueError("starts must be a non-empty collection of state vectors")
    if states.shape[1] != problem.dimension:
        raise ValueError(
            f"start states have dimension {states.shape[1]}, problem expects {problem.dimension}")
    if not np.all(np.isfinite(states)):
        raise ValueError("start states must be finite")
    for j in range(states.shape[0]):
        if not problem.indicator(states[j]):
            raise InfeasibleStartError(j)
    return states


def _initial_losses(problem: Problem, states: np.ndarray) -> np.ndarray:
    losses = np.array([problem.loss(states[j]) for j in range(states.shape[0])], dtype=float)
    if not np.all(np.isfinite(losses)):
        bad = int(np.flatnonzero(~np.isfinite(losses))[0])
        raise ValueError(f"loss at start state {bad} is not finite")
    return losses


def _move_population(states, losses, iteration, t_k, sigma2, problem, config,
                     streams, executor):
    n = states.shape[0]
    out_states = np.empty_like(states)
    out_losses = np.empty(n)

    def work(lo: int, hi: int, lanes: _LaneStreams):
        for j in range(lo, hi):
            rng = lanes.lane(iteration, j)
            s, l = sa_move(states[j], losses[j], t_k, problem, config, sigma2, rng)
            out_states[j] = s
            out_losses[j] = l

    if executor is None:
        work(0, n, streams[0])
    else:
        bounds = np.linspace(0, n, len(streams) + 1).astype(int)
        futures = [executor.submit(work, bounds[i], bounds[i + 1], streams[i])
                   for i in range(len(streams))]
        for f in futures:
            f.result()
    return out_states, out_losses


def _anneal(problem: Problem, starts, schedule: CoolingSchedule,
            proposal: ProposalConfig, iterations: int, seed: int,
            interacting: bool, resampling: str, n_threads: int,
            on_iteration) -> RunResult:
    t0 = time.perf_counter()
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if n_threads < 1:
        raise ValueError("n_threads must be at least 1")
    states = _prepare_starts(problem, starts)
    if proposal.kind == "kpoint" and proposal.k_points > problem.dimension:
        raise ValueError("k_points exceeds the problem dimension")
    losses = _initial_losses(problem, states)
    n = states.shape[0]

    best_j = int(np.argmin(losses))
    best_state = states[best_j].copy()
    best_loss = float(losses[best_j])
    trace = [(0, best_loss)]

    streams = [_LaneStreams(seed) for _ in range(n_threads)]
    executor = ThreadPoolExecutor(max_workers=n_threads) if n_threads > 1 else None
    t_prev = None
    try:
        for k in range(1, iterations + 1):
            t_k = schedule.temperature(k, best_loss)
            if interacting:
                weights = compute_weights(losses, k, t_k, t_prev)
                idx = resample_indices(weights, n, streams[0].lane(k, _RESAMPLE_LANE), resampling)
                states = states[idx]
                losses = losses[idx]
            else:
                weights = np.full(n, 1.0 / n)
            sigma2 = proposal.sigma2_at(k)
            states, losses = _move_population(
                states, losses, k, t_k, sigma2, problem, proposal, streams, executor)
            for j in range(n):
                if losses[j] < best_loss:
                    best_loss = float(losses[j])
                    best_state = states[j].copy()
            t_prev = t_k
            trace.append((k, best_loss))
            if on_iteration is not None:
                on_iteration(Population(states, losses, weights, k, best_state, best_loss))
    finally:
        if executor is not None:
            executor.shutdown(wait=False)
    return RunResult(best_state=best_state, best_loss=best_loss,
                     iterations_run=iterations, trace=trace,
                     wall_time=time.perf_counter() - t0, seed=seed)


def smcsa_run(problem: Problem, starts, schedule: CoolingSchedule,
              proposal: ProposalConfig, iterations: int, seed: int, *,
              resampling: str = MULTINOMIAL, n_threads: int = 1,
              on_iteration=None) -> RunResult:
    """Run sequential Monte Carlo simulated annealing.

    Parameters
    ----------
    problem : Problem
        Loss and feasibility indicator; starts must all be feasible.
    starts : sequence of state vectors
        Initial population; its length fixes the particle count.
    schedule, proposal : CoolingSchedule, ProposalConfig
        Cooling and random-walk settings.
    iterations : int
        Number of reweight/resample/move sweeps.
    seed : int
        Master seed; identical seeds give identical results for any
        n_threads.
    resampling : str
        "multinomial" (default) or "systematic".
    n_threads : int
        Worker threads for the per-particle moves.
    on_iteration : callable, optional
        Called with the Population after every iteration.

    Returns
    -------
    RunResult
        Best state and loss found, with the per-iteration best-loss trace.
    """
    return _anneal(problem, starts, schedule, proposal, iterations, seed,
                   True, resampling, n_threads, on_iteration)


def multistart_sa_run(problem: Problem, starts, schedule: CoolingSchedule,
                      proposal: ProposalConfig, iterations: int, seed: int, *,
                      n_threads: int = 1, on_iteration=None) -> RunResult:
    """Run independent annealing chains from each start (no interaction).

    Same mechanics as smcsa_run minus the reweighting and resampling; the
    returned best is taken across all chains and iterations.
    """
    return _anneal(problem, starts, schedule, proposal, iterations, seed,
                   False, MULTINOMIAL, n_threads, on_iteration)
