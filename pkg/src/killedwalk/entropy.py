"""Relative entropy of tilted product laws and the variational sandwich.

The annealed decay rate is the infimum over shift-invariant environment
laws Q of  E^Q[one-step functional] + H(Q | P).  Restricting Q to tilted
product measures keeps the infimum finitely parameterized: the candidate
objective is then (Monte Carlo mean of the functional under the tilted
marginal) + (single-site relative entropy), and minimizing it yields a
certified upper bound on the infimum.  Together with the quenched and
annealed point estimates this sandwiches the identity numerically:

    beta_hat - err  <=  min objective  <=  alpha_hat + err.

Common random numbers across tilt parameters keep the objective a smooth
function of the tilt, so a 1-d search is reliable near the noise floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import PotentialDistribution, make_distribution
from .lyapunov import LyapunovEstimate, _mean_F_estimate


def kl_divergence(q: PotentialDistribution, p: PotentialDistribution) -> float:
    """Relative entropy of one site, sum q_i ln(q_i / p_i).

    Zero iff the laws coincide; +inf when q charges a value p does not
    (absolute continuity fails).  Finite-support laws only.
    """
    q_atoms = _finite_atoms(q)
    p_atoms = _finite_atoms(p)
    total = 0.0
    for value, qw in q_atoms.items():
        pw = p_atoms.get(value, 0.0)
        if pw == 0.0:
            return math.inf
        total += qw * math.log(qw / pw)
    return max(total, 0.0)


def _finite_atoms(dist: PotentialDistribution) -> dict[float, float]:
    if dist.kind == "finite":
        return dict(dist.atoms)
    if dist.kind == "point":
        return {dist.mass_value: 1.0}
    raise ValueError("relative entropy here needs a finite-support law")


def specific_entropy_product(q_marginal, p_marginal) -> float:
    """Per-site relative entropy of two product laws.

    For products the window entropy is exactly window-size times the
    single-site divergence, so the per-site limit equals the one-site KL.
    """
    return kl_divergence(q_marginal, p_marginal)


@dataclass(frozen=True)
class TiltedProductMeasure:
    """An i.i.d. environment law whose marginal reweights the base law.

    family "exponential-tilt": tilt weights proportional to
    base weight * exp(-theta * value); "free-simplex": arbitrary weights
    on the base support.
    """

    base: PotentialDistribution
    tilt: PotentialDistribution
    family: str = "exponential-tilt"
    theta: float = 0.0

    def kl_per_site(self) -> float:
        if self.tilt.kind == "exponential" and self.base.kind == "exponential":
            ratio = self.tilt.rate / self.base.rate
            return math.log(ratio) + 1.0 / ratio - 1.0
        return kl_divergence(self.tilt, self.base)


def exponential_tilt(base: PotentialDistribution, theta: float) -> TiltedProductMeasure:
    """The Gibbs-type reweighting of the base marginal by exp(-theta * value)."""
    if base.kind == "point":
        return TiltedProductMeasure(base=base, tilt=base, family="exponential-tilt", theta=theta)
    if base.kind == "exponential":
        new_rate = base.rate + theta
        if new_rate <= 0:
            raise ValueError(f"tilt parameter {theta} leaves the exponential family")
        tilt = PotentialDistribution(kind="exponential", rate=new_rate)
        return TiltedProductMeasure(base=base, tilt=tilt, family="exponential-tilt", theta=theta)
    values = np.array([v for v, _ in base.atoms])
    weights = np.array([w for _, w in base.atoms])
    logits = np.log(weights) - theta * values
    logits -= logits.max()
    new_w = np.exp(logits)
    new_w /= new_w.sum()
    tilt = PotentialDistribution(
        kind="finite", atoms=tuple((float(v), float(w)) for v, w in zip(values, new_w))
    )
    return TiltedProductMeasure(base=base, tilt=tilt, family="exponential-tilt", theta=theta)


def simplex_tilt(base: PotentialDistribution, weights) -> TiltedProductMeasure:
    """A free reweighting of the base support (same atoms, new weights)."""
    if base.kind != "finite":
        raise ValueError("free-simplex tilts need a finite-support base")
    w = np.asarray(weights, dtype=np.float64)
    if w.size != len(base.atoms) or np.any(w < 0):
        raise ValueError("need one nonnegative weight per base atom")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must not all vanish")
    w = w / total
    keep = [(float(v), float(wi)) for (v, _), wi in zip(base.atoms, w) if wi > 0]
    tilt = PotentialDistribution(kind="finite", atoms=tuple(keep))
    return TiltedProductMeasure(base=base, tilt=tilt, family="free-simplex")


def expected_F_under(
    q_tilt,
    n_samples: int,
    tol: float = 1e-7,
    seed: int = 0,
    threads: int = 1,
) -> LyapunovEstimate:
    """Monte Carlo mean of the one-step functional under the tilted marginal.

    Environments are drawn through the inverse CDF of the tilt from the
    keyed uniforms of (seed, sample index, site), so runs at different tilt
    parameters share their randomness; at tilt = base this reproduces the
    quenched estimator bit for bit.
    """
    marginal = q_tilt.tilt if isinstance(q_tilt, TiltedProductMeasure) else make_distribution(q_tilt)
    return _mean_F_estimate(
        marginal, n_samples, tol, seed, threads, method="expected-F-under-tilt"
    )


@dataclass(frozen=True)
class OptimizerConfig:
    n_samples: int = 1000
    tol: float = 1e-7
    seed: int = 0
    theta_lo: float = -1.0
    theta_hi: float = 6.0
    n_grid: int = 25
    param_tol: float = 1e-4
    max_evals: int = 200
    threads: int = 1


@dataclass(frozen=True)
class VariationalReport:
    """The numerical sandwich: point estimates, the minimized objective and
    the full objective curve (theta, E_Q_F, kl_per_site, objective)."""

    alpha_hat: LyapunovEstimate
    beta_hat: LyapunovEstimate | None
    var_min_value: float
    var_min_tilt: TiltedProductMeasure
    objective_curve: list[dict]
    converged: bool
    n_evals: int
    stat_halfwidth: float
    trunc_budget: float


def minimize_variational(
    base: PotentialDistribution,
    family: str = "exponential-tilt",
    optimizer_cfg: OptimizerConfig | None = None,
    alpha_hat: LyapunovEstimate | None = None,
    beta_hat: LyapunovEstimate | None = None,
) -> VariationalReport:
    """Minimize  E^{Q_theta}[F] + KL(Q_theta | base)  over the tilt family.

    The exponential family runs a grid sweep (the reported curve) plus a
    golden-section refinement; the free simplex (at most 4 atoms) runs
    Nelder-Mead over logits.  Common random numbers are held fixed across
    all evaluations.
    """
    cfg = optimizer_cfg or OptimizerConfig()
    if alpha_hat is None:
        alpha_hat = _mean_F_estimate(
            base, cfg.n_samples, cfg.tol, cfg.seed, cfg.threads, method="quenched-mc"
        )
    evals: list[dict] = []

    def objective(tpm: TiltedProductMeasure) -> dict:
        est = expected_F_under(tpm, cfg.n_samples, cfg.tol, cfg.seed, cfg.threads)
        kl = tpm.kl_per_site()
        row = {
            "theta": tpm.theta,
            "E_Q_F": est.value,
            "kl_per_site": kl,
            "objective": est.value + kl,
            "stat_halfwidth": est.ci_halfwidth,
            "trunc_bias": est.trunc_bias,
            "tilt": tpm,
        }
        evals.append(row)
        return row

    if family in ("exponential-tilt", "exp-tilt"):
        theta_lo = cfg.theta_lo
        if base.kind == "exponential":
            # stay inside the family: the tilted rate must remain positive
            theta_lo = max(theta_lo, -0.999 * base.rate)
        thetas = np.linspace(theta_lo, cfg.theta_hi, cfg.n_grid)
        if not np.any(thetas == 0.0) and theta_lo < 0.0 < cfg.theta_hi:
            thetas = np.sort(np.append(thetas, 0.0))
        curve = [objective(exponential_tilt(base, float(t))) for t in thetas]
        best = min(range(len(curve)), key=lambda i: curve[i]["objective"])
        lo = curve[max(best - 1, 0)]["theta"]
        hi = curve[min(best + 1, len(curve) - 1)]["theta"]
        converged = _golden_section(
            lambda t: objective(exponential_tilt(base, t))["objective"],
            lo,
            hi,
            cfg.param_tol,
            cfg.max_evals - len(evals),
        )
    elif family == "free-simplex":
        if base.kind != "finite" or len(base.atoms) > 4:
            raise ValueError("free-simplex minimization supports at most 4 atoms")
        from scipy.optimize import minimize as scipy_minimize

        m = len(base.atoms)
        base_w = np.array([w for _, w in base.atoms])

        def f(z: np.ndarray) -> float:
            w = base_w * np.exp(np.concatenate([[0.0], z]))
            return objective(simplex_tilt(base, w / w.sum()))["objective"]

        objective(simplex_tilt(base, base_w))  # the Q = P anchor
        res = scipy_minimize(
            f,
            np.zeros(m - 1),
            method="Nelder-Mead",
            options={"maxfev": cfg.max_evals - len(evals), "xatol": cfg.param_tol, "fatol": 0.0},
        )
        curve = [row for row in evals]
        converged = bool(res.success)
    else:
        raise ValueError(f"unknown tilt family {family!r}")

    best_row = min(evals, key=lambda row: row["objective"])
    curve_rows = [
        {k: row[k] for k in ("theta", "E_Q_F", "kl_per_site", "objective", "stat_halfwidth")}
        for row in curve
    ]
    return VariationalReport(
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        var_min_value=best_row["objective"],
        var_min_tilt=best_row["tilt"],
        objective_curve=curve_rows,
        converged=converged,
        n_evals=len(evals),
        stat_halfwidth=max(row["stat_halfwidth"] for row in evals),
        trunc_budget=max(row["trunc_bias"] for row in evals),
    )


def _golden_section(f, lo: float, hi: float, param_tol: float, budget: int) -> bool:
    """Golden-section minimization; returns True if the bracket shrank
    below param_tol within the evaluation budget."""
    if budget <= 0 or hi - lo <= param_tol:
        return hi - lo <= param_tol
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    budget -= 2
    while budget > 0 and (b - a) > param_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        budget -= 1
    return (b - a) <= param_tol
