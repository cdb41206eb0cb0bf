"""Linear hypothesis tests under MLq estimation.

Wald, score, and bilinear-form statistics for H beta = h, all referred to
a chi-square with rank(H) degrees of freedom.  The Wald form needs only
the unconstrained fit, the score form only the constrained one, and the
bilinear form mixes both.  The added-variable score statistic screens a
candidate regressor without refitting the larger model.
"""

import numpy as np

from lqglm import (
    FitControl,
    LinearHypothesis,
    added_variable_score,
    bf_test,
    fit_mlq,
    rng_stream,
    score_test,
    wald_test,
)
from lqglm.datasets import vaso_model_data

data = vaso_model_data()
q = 0.9
fit = fit_mlq(data, FitControl(q=q))

# equal effects of the two logged covariates?
hyp = LinearHypothesis([[0.0, 1.0, -1.0]], [0.0])
for result in (
    wald_test(fit, hyp),
    score_test(data, hyp, q),
    bf_test(data, fit, hyp),
):
    print(f"{result.kind:<9} statistic = {result.statistic:7.4f}  "
          f"df = {result.dof}  p = {result.p_value:.4f}")

# screen a synthetic candidate regressor (pure noise here)
z = rng_stream(7, 0).normal(size=data.n)
r = added_variable_score(data, fit, z)
print(f"\nadded-variable score for a noise column: {r.statistic:.4f} (p = {r.p_value:.3f})")

# the same machinery on a per-case indicator is the squared standardized
# residual, so single-case outlyingness is just another score test
e4 = np.zeros(data.n)
e4[3] = 1.0
r4 = added_variable_score(data, fit, e4)
print(f"mean-shift score for case 4: {r4.statistic:.2f} (p = {r4.p_value:.4f})")
