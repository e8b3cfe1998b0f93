"""The relative-entropy sandwich between the two decay rates.

The annealed rate equals the infimum, over shift-invariant environment
laws Q, of (mean one-step cost under Q) + (specific relative entropy of Q
from the true law).  Tilted product measures make that infimum searchable:
every tilt gives an upper bound on it, the untilted point recovers the
quenched rate exactly (entropy zero), and the minimum over the family is
sandwiched between the annealed and quenched estimates.
"""

from killedwalk import (
    OptimizerConfig,
    estimate_alpha_mc,
    estimate_beta,
    exponential_tilt,
    kl_divergence,
    make_distribution,
    minimize_variational,
)

bern = make_distribution({"kind": "finite", "atoms": [[0.0, 0.5], [1.0, 0.5]]})

print("== tilting the marginal ==")
for theta in (-1.0, 0.0, 1.0, 3.0):
    tpm = exponential_tilt(bern, theta)
    weights = {v: round(w, 4) for v, w in tpm.tilt.atoms}
    print(f"  theta {theta:+.1f}: marginal {weights}, entropy cost {tpm.kl_per_site():.4f}")

seed, n_samples, tol = 11, 1500, 1e-7
alpha = estimate_alpha_mc(bern, n_samples=n_samples, tol=tol, seed=seed)
beta = estimate_beta(bern, n_grid=[2, 4, 8, 12], seed=seed, n_paths=150_000)

cfg = OptimizerConfig(n_samples=n_samples, tol=tol, seed=seed,
                      theta_lo=-1.0, theta_hi=4.0, n_grid=11, max_evals=40)
report = minimize_variational(bern, optimizer_cfg=cfg, alpha_hat=alpha, beta_hat=beta)

print("\n== objective curve (common random numbers across tilts) ==")
print("  theta    E_Q[cost]  entropy   objective")
for row in report.objective_curve:
    print(f"  {row['theta']:+.3f}    {row['E_Q_F']:.5f}   {row['kl_per_site']:.5f}   {row['objective']:.5f}")

eps = alpha.ci_halfwidth + beta.ci_halfwidth + report.stat_halfwidth + report.trunc_budget
print(f"\n== sandwich ==")
print(f"  annealed estimate  {beta.value:.4f} +- {beta.ci_halfwidth:.4f}")
print(f"  variational min    {report.var_min_value:.4f} at theta = {report.var_min_tilt.theta:.4f}")
print(f"  quenched estimate  {alpha.value:.4f} +- {alpha.ci_halfwidth:.4f}")
print(f"  beta - eps <= min <= alpha + eps with eps = {eps:.4f}: "
      f"{beta.value - eps <= report.var_min_value <= alpha.value + eps}")
anchor = [row for row in report.objective_curve if row["theta"] == 0.0][0]
print(f"  untilted point reproduces the quenched estimate exactly: "
      f"{anchor['objective'] == alpha.value}")
print(f"  sanity: KL of the base against itself = {kl_divergence(bern, bern)}")
