"""
Private slope estimates on a small regression
==============================================

Fits the same noisy line with least squares, the two non-private
pairwise-slope estimators and the two private ones, then repeats the
private fits to show their spread.
"""

import numpy as np

from dptheilsen import Dataset, dp_theil_sen, dp_theil_sen_k_half, ols_fit, theil_sen, theil_sen_half

rng = np.random.default_rng(1)

# 200 points on a line with slope 2, plus a handful of gross outliers
n = 200
x = np.linspace(0, 1, n)
y = 0.5 + 2.0 * x + rng.normal(scale=0.5, size=n)
y[:8] += 25
d = Dataset(x, y)

for name, fit in [("ols", ols_fit), ("theil-sen", theil_sen), ("half", theil_sen_half)]:
    print(f"{name:>10}: {fit(d).beta:7.3f}")

# the private estimators need a range [-R, R] for the output and a widening theta
eps, R, theta = 1.0, 10.0, 0.01
ts = np.array([dp_theil_sen(d, eps, R, theta, rng).beta for _ in range(200)])
kh = np.array([dp_theil_sen_k_half(d, eps, 10, R, theta, rng).beta for _ in range(200)])

# each point touches n - 1 all-pairs slopes but only 2k matched slopes,
# so the k-matching version spends much less budget per slope
for name, draws in [("dp all-pairs", ts), ("dp k=10", kh)]:
    lo, med, hi = np.quantile(draws, [0.05, 0.5, 0.95])
    print(f"{name:>12}: median {med:6.3f}, 90% of draws in [{lo:6.3f}, {hi:6.3f}]")
