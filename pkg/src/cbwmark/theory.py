"""Minimum watermark-success-rate bound and its Monte Carlo validation.

The bound gives the smallest watermark success rate W at which an m-trial
one-tailed t-test against the null pass rate rejects at level alpha; the
Monte Carlo harness checks both the size of the test at W equal to the null
rate and the power transition above the bound, and the enrollment-count
monotonicity of the success rate.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidInput
from .stats import t_quantile


@dataclass(frozen=True)
class BoundInput:
    m: int                 # number of verification trials
    alpha: float           # significance level
    p_beta_tau: float      # null probability that a trigger query passes

    def validate(self) -> None:
        if self.m < 2:
            raise InvalidInput(f"m must be >= 2, got {self.m}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInput(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.p_beta_tau < 1.0:
            raise InvalidInput(f"p_beta_tau must lie in [0, 1), got {self.p_beta_tau}")


@dataclass(frozen=True)
class BoundResult:
    w_min: float
    t_quantile_used: float
    discriminant: float


def wsr_bound(inp: BoundInput) -> BoundResult:
    """Smallest watermark success rate that rejects the null at level alpha.

    w_min is the larger root of the quadratic
    (m-1+t^2) W^2 - (2(m-1)P + t^2) W + (m-1) P^2, with t the (1-alpha)
    t-quantile at m-1 degrees of freedom and P the null pass rate.
    """
    inp.validate()
    m, p = inp.m, inp.p_beta_tau
    t = t_quantile(1.0 - inp.alpha, m - 1)
    t2 = t * t
    disc = 4.0 * t2 * p * (m - 1) * (1.0 - p) + t2 * t2
    w_min = (2.0 * (m - 1) * p + t2 + math.sqrt(disc)) / (2.0 * (m - 1 + t2))
    return BoundResult(w_min=w_min, t_quantile_used=t, discriminant=disc)


def bound_quadratic(inp: BoundInput, w: float) -> float:
    """Evaluate the bound's quadratic at w (zero at the bound's roots)."""
    m, p = inp.m, inp.p_beta_tau
    t2 = t_quantile(1.0 - inp.alpha, m - 1) ** 2
    return (m - 1 + t2) * w * w - (2.0 * (m - 1) * p + t2) * w + (m - 1) * p * p


def _simulate_rejections(inp: BoundInput, w: float, n_sims: int,
                         rng: np.random.Generator) -> float:
    """Fraction of simulated m-trial runs rejecting H0: pass rate = p_beta_tau.

    Each run draws m Bernoulli(w) pass events, forms the one-sample
    t-statistic sqrt(m) (W_bar - P)/s with s the sample standard deviation of
    the events, and rejects when it exceeds the (1-alpha) t-quantile. Runs
    with zero sample variance follow the degenerate contract: reject iff
    W_bar > P.
    """
    m = inp.m
    t_crit = t_quantile(1.0 - inp.alpha, m - 1)
    passes = rng.random((n_sims, m)) < w
    w_bar = passes.mean(axis=1)
    s = passes.std(axis=1, ddof=1)
    rejected = np.empty(n_sims, dtype=bool)
    degenerate = s == 0.0
    rejected[degenerate] = w_bar[degenerate] > inp.p_beta_tau
    ok = ~degenerate
    t_stat = math.sqrt(m) * (w_bar[ok] - inp.p_beta_tau) / s[ok]
    rejected[ok] = t_stat > t_crit
    return float(rejected.mean())


def mc_validate_bound(inp: BoundInput, w_grid, n_sims: int, seed: int) -> list[dict]:
    """Empirical rejection rate of the verification t-test per true W.

    Returns one row per grid value: {"w", "w_min", "empirical_rejection_rate"}.
    """
    inp.validate()
    if n_sims < 1000:
        raise InvalidInput(f"n_sims must be >= 1000, got {n_sims}")
    w_min = wsr_bound(inp).w_min
    rng = np.random.default_rng(seed)
    rows = []
    for w in w_grid:
        if not 0.0 <= w <= 1.0:
            raise InvalidInput(f"grid W must lie in [0, 1], got {w}")
        rate = _simulate_rejections(inp, float(w), n_sims, rng)
        rows.append({"w": float(w), "w_min": w_min, "empirical_rejection_rate": rate})
    return rows


def n_monotonicity_check(p_single: float, n_values, m: int, n_sims: int,
                         seed: int) -> list[dict]:
    """Success-rate growth with the number of enrolled speakers N.

    With per-speaker pass probability p_single, a trigger sequence passes
    1-to-N verification with probability 1 - (1 - p_single)^N. For each N the
    empirical mean of the m-trial pass rate is simulated and reported next to
    the exact value; means must be increasing in N within 3 standard errors.
    """
    if not 0.0 <= p_single <= 1.0:
        raise InvalidInput(f"p_single must lie in [0, 1], got {p_single}")
    if m < 1 or n_sims < 1:
        raise InvalidInput("m and n_sims must be positive")
    rng = np.random.default_rng(seed)
    rows = []
    for n in n_values:
        if n < 1:
            raise InvalidInput(f"N must be >= 1, got {n}")
        p_pass = 1.0 - (1.0 - p_single) ** n
        w_bar = rng.binomial(m, p_pass, size=n_sims) / m
        mean = float(w_bar.mean())
        se = float(w_bar.std(ddof=1) / math.sqrt(n_sims)) if n_sims > 1 else 0.0
        rows.append({
            "n_enrolled": int(n),
            "exact_mean": p_pass,
            "empirical_mean": mean,
            "standard_error": se,
        })
    return rows


def estimate_p_beta_tau(null_trigger_scores, threshold: float) -> float:
    """Empirical null pass rate: fraction of trigger scores above threshold.

    Feed max-similarity scores from a model known not to be trained on the
    watermarked data.
    """
    scores = np.asarray(null_trigger_scores, dtype=float)
    if scores.size == 0:
        raise InvalidInput("need at least one null trigger score")
    return float(np.mean(scores > threshold))
