"""
Private confidence intervals and how they tighten with n
=========================================================

Each interval comes from two private quantile draws around the median
slope. With a small dataset the target quantiles fall outside (0, 1);
the default strict mode refuses, and the lenient mode runs at the
boundary quantile, which gives a valid but very wide interval.
"""

import numpy as np

from dptheilsen import Dataset, IntervalError, dp_theil_sen_ci, suggest_theta_terms

rng = np.random.default_rng(7)
eps, p, R = 1.0, 0.1, 10.0

for n in (100, 1000, 5000):
    x = np.linspace(0, 1, n)
    d = Dataset(x, 2.0 * x + rng.normal(size=n))
    theta = suggest_theta_terms(1.0, float(np.std(x)), n, eps, p, R).theta
    try:
        ci = dp_theil_sen_ci(d, eps, p, R, theta, variant="khalf", k=10, rng=rng)
        note = ""
    except IntervalError:
        ci = dp_theil_sen_ci(d, eps, p, R, theta, variant="khalf", k=10, rng=rng, strict=False)
        note = "  (targets outside (0, 1): boundary quantiles used)"
    print(f"n={n:5d}: [{ci.lower:7.3f}, {ci.upper:7.3f}] width {ci.width:6.3f}{note}")
