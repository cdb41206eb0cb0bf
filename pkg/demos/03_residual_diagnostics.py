"""Residual diagnostics and a simulated QQ envelope.

Three residual types for an MLq fit: standardized residuals from the
mean-shift outlier model (add an indicator column for case i; its score
statistic is t_i squared), signed-root per-observation deviances, and
randomized quantile residuals.  A parametric bootstrap gives pointwise
envelope bands for the sorted residuals; genuine outliers then stick out
of the band instead of hiding in the tail shape.
"""

import numpy as np

from lqglm import (
    FitControl,
    deviance_residuals,
    fit_mlq,
    quantile_residuals,
    rng_stream,
    simulation_envelope,
    standardized_residuals,
)
from lqglm.datasets import vaso_model_data

data = vaso_model_data()
fit = fit_mlq(data, FitControl(q=0.79))

t = standardized_residuals(data, fit)
rdev = deviance_residuals(data, fit)
rqtl = quantile_residuals(data, fit, rng_stream(2024, 0))

print("largest standardized residuals (1-indexed):")
for i in np.argsort(-np.abs(t))[:4]:
    print(f"  case {i + 1:2d}: t = {t[i]:7.2f}   deviance r = {rdev[i]:6.2f}   quantile r = {rqtl[i]:6.2f}")

env = simulation_envelope(data, fit, kind="standardized", reps=100, seed=42)
outside = (env.observed < env.lower) | (env.observed > env.upper)
print(f"\n95% envelope from {env.reps} refits: {int(outside.sum())} points outside")
print("sorted-position table (tail):")
print("  pos  normal-q  observed   lower   upper")
for i in range(data.n - 4, data.n):
    star = " *" if outside[i] else ""
    print(f"  {i + 1:3d}  {env.normal_quantiles[i]:7.2f}  {env.observed[i]:8.2f} "
          f"{env.lower[i]:7.2f} {env.upper[i]:7.2f}{star}")
