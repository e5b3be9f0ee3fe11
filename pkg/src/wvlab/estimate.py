"""Sampling, estimators, and Monte Carlo Cramér-Rao experiments.

Randomness comes from a counter-based Philox generator with one substream per
(seed, trial) pair, so experiments reproduce bit-for-bit regardless of trial
execution order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
import numpy as np

from .errors import BoundaryMaximum, SingularCovariance
from .infometrics import ParamDistribution, classical_fisher
from .noise import CorrelatedNoiseModel, cm_fisher_correlated, covariance, spd_cholesky
from scipy.linalg import cho_solve


def substream(seed: int, trial: int = 0) -> np.random.Generator:
    """Independent counter-based stream keyed by (seed, trial)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial])))


# ---------------------------------------------------------------------------
# sampling


class AliasSampler:
    """Walker alias method for discrete distributions: O(1) per draw."""

    def __init__(self, probs: np.ndarray):
        p = np.asarray(probs, dtype=float)
        p = p / p.sum()
        n = p.size
        scaled = p * n
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        self.prob = np.ones(n)
        self.alias = np.arange(n)
        while small and large:
            s, l = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for i in small + large:
            self.prob[i] = 1.0

    def draw(self, rng: np.random.Generator, nu: int) -> np.ndarray:
        idx = rng.integers(0, self.prob.size, size=nu)
        take_alias = rng.random(nu) >= self.prob[idx]
        return np.where(take_alias, self.alias[idx], idx)


def sample(
    dist: ParamDistribution, nu: int, seed: int, trial: int = 0, g: float = 0.0
) -> np.ndarray:
    """nu i.i.d. draws from the distribution at parameter g.

    Continuous: inverse-CDF on the grid; discrete: alias method. Identical
    (seed, trial) pairs reproduce identical sequences.
    """
    rng = substream(seed, trial)
    probs = dist.probabilities(g)
    if dist.kind == "discrete":
        idx = AliasSampler(probs).draw(rng, nu)
        values = dist.outcome_values()
        return values[idx]
    grid = dist.grid
    dq = dist.spacing
    inc = 0.5 * (probs[1:] + probs[:-1]) * dq
    cdf = np.concatenate([[0.0], np.cumsum(inc)])
    cdf = cdf / cdf[-1]
    u = rng.random(nu)
    return np.interp(u, cdf, grid)


def correlated_noise_samples(
    model: CorrelatedNoiseModel, seed: int, trial: int = 0
) -> np.ndarray:
    """One zero-mean Gaussian noise sequence with the model covariance."""
    rng = substream(seed, trial)
    chol = np.linalg.cholesky(covariance(model))
    return chol @ rng.standard_normal(model.n)


# ---------------------------------------------------------------------------
# estimators


def amr_estimate(samples: np.ndarray, calibration: float) -> float:
    """Averaged measurement results: mean(samples) / calibration."""
    if calibration == 0:
        raise ValueError("calibration must be nonzero")
    return float(np.mean(samples)) / calibration


def mle_weights(c: np.ndarray) -> np.ndarray:
    """Generalized-least-squares weights f = C^{-1} 1 / (1' C^{-1} 1)."""
    y = cho_solve(spd_cholesky(c), np.ones(c.shape[0]))
    total = y.sum()
    if total <= 0:
        raise SingularCovariance("inverse-covariance row sums are not positive")
    return y / total


def mle_correlated(samples: np.ndarray, c: np.ndarray) -> float:
    """Weighted average sum_k f_k s_k with GLS weights from the covariance.

    For exchangeable covariances the weights are uniform and the estimate is
    delegated to the plain mean so white-noise results match `amr_estimate`
    bitwise.
    """
    f = mle_weights(np.asarray(c, dtype=float))
    if np.all(f == f[0]):
        return float(np.mean(samples))
    return float(f @ samples)


def mle_grid(
    samples: np.ndarray, dist: ParamDistribution, g_grid: np.ndarray
) -> float:
    """Grid maximum-likelihood with three-point parabolic refinement."""
    g_grid = np.asarray(g_grid, dtype=float)
    loglik = np.empty(g_grid.size)
    for i, g in enumerate(g_grid):
        p = dist.probabilities(g)
        if dist.kind == "continuous":
            vals = np.interp(samples, dist.grid, p)
        else:
            labels = dist.outcome_values()
            idx = np.searchsorted(labels, samples)
            vals = p[np.clip(idx, 0, p.size - 1)]
        loglik[i] = np.sum(np.log(np.clip(vals, 1e-300, None)))
    k = int(np.argmax(loglik))
    if k == 0 or k == g_grid.size - 1:
        raise BoundaryMaximum("likelihood maximum on the grid edge")
    y0, y1, y2 = loglik[k - 1], loglik[k], loglik[k + 1]
    denom = y0 - 2 * y1 + y2
    offset = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    step = g_grid[k] - g_grid[k - 1]
    return float(g_grid[k] + offset * step)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentPlan:
    """Replicated sampling experiment.

    scheme: a scheme spec from `wvlab.schemes` (or None for a bare
    noise-model experiment measuring `true_value` directly). noise: optional
    CorrelatedNoiseModel applied per measurement sequence. For noise
    experiments nu must equal the model's N.
    """

    scheme: object | None
    nu: int
    trials: int
    seed: int
    estimator: str  # "amr" | "mle_correlated" | "mle_grid"
    noise: CorrelatedNoiseModel | None = None
    true_value: float = 0.0

    def __post_init__(self):
        if self.nu < 1 or self.trials < 1:
            raise ValueError("nu and trials must be >= 1")
        if self.estimator not in ("amr", "mle_correlated", "mle_grid"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.noise is not None and self.scheme is None and self.noise.n != self.nu:
            raise ValueError("noise model N must equal nu")


@dataclass(frozen=True)
class EstimateReport:
    mean_estimate: float
    empirical_variance: float
    crb: float
    crb_ratio: float
    crb_ratio_se: float
    fisher_total: float
    trials: int
    nu: int
    seed: int
    estimator: str

    def to_dict(self) -> dict:
        return {
            "mean_estimate": self.mean_estimate,
            "empirical_variance": self.empirical_variance,
            "crb": self.crb,
            "crb_ratio": self.crb_ratio,
            "crb_ratio_se": self.crb_ratio_se,
            "fisher_total": self.fisher_total,
            "trials": self.trials,
            "nu": self.nu,
            "seed": self.seed,
            "estimator": self.estimator,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _jackknife_ratio_se(estimates: np.ndarray, fisher_total: float) -> float:
    """Jackknife standard error of Var(estimates) * F over trials."""
    n = estimates.size
    if n < 3:
        return float("nan")
    s1, s2 = estimates.sum(), np.sum(estimates**2)
    mean_i = (s1 - estimates) / (n - 1)
    var_i = (s2 - estimates**2 - (n - 1) * mean_i**2) / (n - 2)
    theta_i = var_i * fisher_total
    theta_bar = theta_i.mean()
    return float(math.sqrt((n - 1) / n * np.sum((theta_i - theta_bar) ** 2)))


def _scheme_family(scheme) -> tuple[ParamDistribution, float]:
    """(outcome family, true parameter) for the supported scheme specs."""
    from . import schemes as _s

    if isinstance(scheme, _s.StandardSpec):
        return _s.standard_scheme(scheme).family, scheme.g
    if isinstance(scheme, _s.PhaseSpaceSpec):
        return _s.phase_space_scheme(scheme).selection_family, scheme.g
    if isinstance(scheme, _s.EntangledSpec):
        return _s.entangled_scheme(scheme).family, scheme.phi
    raise ValueError(f"run_experiment has no outcome family for {type(scheme).__name__}")


def run_experiment(plan: ExperimentPlan) -> EstimateReport:
    """Independent replications of (sample, estimate); reports the empirical
    estimator variance against the Cramér-Rao bound of the experiment.

    crb_ratio = empirical_variance * F_total, where F_total is nu times the
    single-draw Fisher information for i.i.d. scheme sampling, or the full
    correlated-sequence information sum[C^{-1}] for noise experiments.
    """
    estimates = np.empty(plan.trials)

    if plan.noise is not None:
        # measurement results s_k = g * calibration + x_k; a standard-WVA
        # scheme amplifies by Re<A>_w over the p_f-thinned noise sequence
        calibration, truth, model = 1.0, plan.true_value, plan.noise
        from . import schemes as _s

        if isinstance(plan.scheme, _s.StandardSpec):
            pre, post = plan.scheme.states()
            from .qsys import SIGMA_Z, weak_value as _wv

            calibration = _wv(pre, post, SIGMA_Z).real
            if abs(calibration) < 1e-9:
                raise ValueError("noise plans need a real-weak-value scheme")
            truth = plan.scheme.g
            p_f = abs(np.vdot(post.amplitudes, pre.amplitudes)) ** 2
            model = plan.noise.thinned(p_f)
            if model.n != plan.nu:
                raise ValueError(
                    f"thinned noise keeps {model.n} samples; set nu accordingly"
                )
        elif plan.scheme is not None:
            raise ValueError("noise plans support scheme=None or StandardSpec")
        c = covariance(model)
        fisher_total = calibration**2 * cm_fisher_correlated(model)
        weights = mle_weights(c) if plan.estimator == "mle_correlated" else None
        chol = np.linalg.cholesky(c)
        for t in range(plan.trials):
            rng = substream(plan.seed, t)
            s = truth * calibration + chol @ rng.standard_normal(plan.nu)
            if plan.estimator == "amr":
                estimates[t] = amr_estimate(s, calibration)
            elif plan.estimator == "mle_correlated":
                estimates[t] = float(weights @ s) / calibration
            else:
                raise ValueError("mle_grid is not defined for noise plans")
    else:
        family, g_true = _scheme_family(plan.scheme)
        fisher_single = classical_fisher(family, g_true).fi
        fisher_total = plan.nu * fisher_single
        if plan.estimator == "amr":
            # calibration: local linear response of the outcome mean
            h = max(1e-6, 1e-4 * abs(g_true))
            m_plus = _family_mean(family, g_true + h)
            m_minus = _family_mean(family, g_true - h)
            slope = (m_plus - m_minus) / (2 * h)
            m0 = _family_mean(family, g_true)
            for t in range(plan.trials):
                s = sample(family, plan.nu, plan.seed, t, g_true)
                estimates[t] = g_true + (float(np.mean(s)) - m0) / slope
        elif plan.estimator == "mle_grid":
            sd = 1.0 / math.sqrt(max(fisher_total, 1e-300))
            g_grid = np.linspace(g_true - 8 * sd, g_true + 8 * sd, 101)
            for t in range(plan.trials):
                s = sample(family, plan.nu, plan.seed, t, g_true)
                estimates[t] = mle_grid(s, family, g_grid)
        else:
            raise ValueError("mle_correlated needs a noise model")

    emp_var = float(np.var(estimates, ddof=1))
    crb = 1.0 / fisher_total
    ratio = emp_var * fisher_total
    se = _jackknife_ratio_se(estimates, fisher_total)
    return EstimateReport(
        mean_estimate=float(np.mean(estimates)),
        empirical_variance=emp_var,
        crb=crb,
        crb_ratio=ratio,
        crb_ratio_se=se,
        fisher_total=fisher_total,
        trials=plan.trials,
        nu=plan.nu,
        seed=plan.seed,
        estimator=plan.estimator,
    )


def _family_mean(family: ParamDistribution, g: float) -> float:
    return family.mean_std(g)[0]
