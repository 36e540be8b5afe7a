"""
Convergence bounds next to a quick simulation
==============================================

Prints the closed-form (1 - p) error bounds for every estimator, then
checks two of them against the empirical (1 - p) error quantile.
"""

from dptheilsen import (BoundParams, PrivacySetting, SimConfig, bound_table, empirical_convergence,
                        run_trials, suggest_theta_terms)

n, eps, p, R = 400, 2.0, 0.1, 10.0
cfg = SimConfig(n=n, beta=2.0, sigma_e=1.0, trials=500, seed=3, estimators=("ts", "dpkhalf"),
                settings=(PrivacySetting(eps=eps, R=R, theta="auto", k=1, p=p),))

sug = suggest_theta_terms(1.0, cfg.sigma_x, n, eps, p, R)
print(f"theta = {sug.theta:.4g} ({sug.dominant} term dominates)")

params = BoundParams(sigma_e=1.0, sigma_x=cfg.sigma_x, n=n, p=p, eps=eps, R=R, theta=sug.theta,
                     k=1, abs_beta=2.0, r_u=1.0)
for row in bound_table(params):
    flag = "*" if row.asymptotic else " "
    ok = "" if row.constraints_ok else "  constraint violated"
    print(f"{row.estimator:>12}{flag} {row.value:8.4f}{ok}")

rep = run_trials(cfg)
print(f"empirical 0.9 error quantile, theil-sen: {empirical_convergence((rep, 'ts'), p):.4f}")
print(f"empirical 0.9 error quantile, private single matching: {empirical_convergence((rep, 'dpkhalf'), p):.4f}")
