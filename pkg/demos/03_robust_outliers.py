"""Tukey biweight loss versus squared error on contaminated data.

Two points of the sigmoid dataset are overwritten with gross outliers.
The squared-error fit chases them; the bounded loss caps their
influence at c^2/6 each and recovers the underlying curve, leaving both
contaminated residuals larger than c.
"""

import numpy as np

from smcsa.core import CoolingSchedule, ProposalConfig
from smcsa.experiments import (
    CANONICAL_SEED,
    ExperimentSpec,
    contaminate_ht1,
    gen_ht0,
    run_replication,
)
from smcsa.models import LossSpec, RationalModel, rational_eval

data = contaminate_ht1(gen_ht0(CANONICAL_SEED))
outlier_idx = [1, 27]

model = RationalModel()


def fit(loss_spec):
    spec = ExperimentSpec(
        name="ht1", algorithm="smcsa", model="rational",
        schedule=CoolingSchedule.reciprocal(0.95),
        proposal=ProposalConfig.kpoint(2, 1.0, 0.97),
        n_states=200, iterations=150, replications=1, seed=CANONICAL_SEED,
        loss_spec=loss_spec,
    )
    result = run_replication(spec, data, 0)
    return np.abs(data.y - rational_eval(model, result.best_state, data.x))


for label, loss_spec in (("squared error", LossSpec()),
                         ("tukey c=1", LossSpec("tukey", 1.0))):
    resid = fit(loss_spec)
    clean = np.delete(resid, outlier_idx)
    print(f"{label:14s} outlier residuals "
          f"{resid[outlier_idx[0]]:.3f}, {resid[outlier_idx[1]]:.3f}; "
          f"clean residuals median {np.median(clean):.3f}, max {clean.max():.3f}")

print("\nboth planted outliers sit further from the robust fit than from the")
print("squared-error one: the bounded loss refuses to bend toward them")
