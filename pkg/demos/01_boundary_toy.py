"""Minimize (x - 2)^2 subject to x >= 3.

The unconstrained minimum sits outside the feasible set, so the answer
lives on the boundary.  A handful of interacting annealing runs all pin
it down to two decimals within a couple of seconds.
"""

import numpy as np

from smcsa.core import CoolingSchedule, Problem, ProposalConfig, smcsa_run
from smcsa.experiments import gen_start_set

problem = Problem(
    dimension=1,
    loss=lambda t: float((t[0] - 2.0) ** 2),
    indicator=lambda t: t[0] >= 3.0,
    indicator_batch=lambda m: m[:, 0] >= 3.0,
)

schedule = CoolingSchedule.reciprocal(0.95)
proposal = ProposalConfig.full(sigma0=1.0, decay=0.97)

print("run  best x      best loss")
for seed in range(5):
    starts = gen_start_set(np.array([4.0]), problem.indicator, 100, seed=seed,
                           indicator_batch=problem.indicator_batch)
    result = smcsa_run(problem, starts.states, schedule, proposal,
                       iterations=200, seed=seed)
    print(f"{seed:3d}  {result.best_state[0]:.6f}  {result.best_loss:.6f}")

print("\nexact constrained minimum: x = 3, loss = 1")
