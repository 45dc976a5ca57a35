"""Self-contained statistical primitives.

Student-t CDF/quantile built on a continued-fraction evaluation of the
regularized incomplete beta function, a one-tailed paired t-test, and a
one-tailed Wilcoxon signed-rank test with an exact small-sample null
distribution.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidDf, InvalidProbability, LengthMismatch, TooFewSamples

EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True)
class TTestResult:
    t_stat: float
    df: int
    p_value: float
    mean_diff: float


@dataclass(frozen=True)
class WilcoxonResult:
    w_stat: float
    n_effective: int
    p_value: float
    method: str  # "exact", "normal_approx", or "sign_exact"


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz's method)."""
    max_iter = 300
    eps = 1e-15
    fpmin = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_cdf(x: float, df: int) -> float:
    """CDF of Student's t distribution with ``df`` degrees of freedom."""
    if df < 1:
        raise InvalidDf(f"df must be >= 1, got {df}")
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    if x == 0.0:
        return 0.5
    ib = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + x * x))
    return 1.0 - 0.5 * ib if x > 0 else 0.5 * ib


def t_quantile(p: float, df: int) -> float:
    """Inverse of :func:`t_cdf`, accurate to |t_cdf(q, df) - p| <= 1e-10."""
    if df < 1:
        raise InvalidDf(f"df must be >= 1, got {df}")
    if not 0.0 < p < 1.0:
        raise InvalidProbability(f"p must lie in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > p:
        lo *= 2.0
        if lo < -1e18:
            break
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e18:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def paired_t_test_one_tailed(a, b, tau: float = 1.0) -> TTestResult:
    """One-tailed paired t-test of H1: mean(a - tau*b) > 0.

    Uses the sample standard deviation (m-1 denominator). The degenerate
    zero-variance case is total: p = 0 when the mean difference is positive,
    p = 1 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"paired samples must be equal-length 1-D, got {a.shape} vs {b.shape}")
    m = a.size
    if m < 2:
        raise TooFewSamples(f"need at least 2 pairs, got {m}")
    d = a - tau * b
    mean_d = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    df = m - 1
    if sd == 0.0:
        p = 0.0 if mean_d > 0.0 else 1.0
        t = math.inf if mean_d > 0.0 else (-math.inf if mean_d < 0.0 else 0.0)
        return TTestResult(t_stat=t, df=df, p_value=p, mean_diff=mean_d)
    t = math.sqrt(m) * mean_d / sd
    p = 1.0 - t_cdf(t, df)
    return TTestResult(t_stat=t, df=df, p_value=p, mean_diff=mean_d)


def _signed_ranks(diffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks of |diffs| (zeros already removed) and the sign mask."""
    abs_d = np.abs(diffs)
    order = np.argsort(abs_d, kind="stable")
    ranks = np.empty(abs_d.size, dtype=float)
    sorted_abs = abs_d[order]
    i = 0
    while i < sorted_abs.size:
        j = i
        while j + 1 < sorted_abs.size and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks, diffs > 0


def _exact_upper_tail_p(ranks: np.ndarray, w_obs: float) -> float:
    """P(W+ >= w_obs) by exact enumeration over all sign patterns.

    Ranks may be half-integers under ties; doubling makes every achievable
    rank sum an integer, so the null distribution is a convolution over
    integer offsets with exact integer counts.
    """
    doubled = np.rint(2.0 * ranks).astype(int)
    total = int(doubled.sum())
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        nxt = counts[:]
        for s in range(total - r + 1):
            c = counts[s]
            if c:
                nxt[s + r] += c
        counts = nxt
    w2 = int(math.ceil(round(2.0 * w_obs, 9) - 1e-9))
    num = sum(counts[max(w2, 0):])
    return num / (1 << doubled.size)


def wilcoxon_one_tailed(w, b) -> WilcoxonResult:
    """One-tailed Wilcoxon signed-rank test of H1: w stochastically larger than b.

    Zero differences are dropped; tied absolute differences receive average
    ranks. The exact null distribution is used for up to
    ``EXACT_WILCOXON_MAX_N`` nonzero differences, a tie-corrected normal
    approximation with continuity correction beyond that.
    """
    w = np.asarray(w, dtype=float)
    b = np.asarray(b, dtype=float)
    if w.shape != b.shape or w.ndim != 1:
        raise LengthMismatch(f"paired samples must be equal-length 1-D, got {w.shape} vs {b.shape}")
    diffs = w - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(w_stat=0.0, n_effective=0, p_value=1.0, method="exact")
    ranks, positive = _signed_ranks(diffs)
    w_plus = float(ranks[positive].sum())
    if n <= EXACT_WILCOXON_MAX_N:
        p = _exact_upper_tail_p(ranks, w_plus)
        return WilcoxonResult(w_stat=w_plus, n_effective=n, p_value=p, method="exact")
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: subtract sum(t^3 - t)/48 over tie groups
    _, tie_counts = np.unique(np.abs(diffs), return_counts=True)
    var -= float(np.sum(tie_counts.astype(float) ** 3 - tie_counts)) / 48.0
    if var <= 0.0:
        return WilcoxonResult(w_stat=w_plus, n_effective=n, p_value=1.0, method="normal_approx")
    z = (w_plus - mu - 0.5) / math.sqrt(var)
    p = min(max(1.0 - normal_cdf(z), 0.0), 1.0)
    return WilcoxonResult(w_stat=w_plus, n_effective=n, p_value=p, method="normal_approx")


def sign_test_one_tailed(w, b) -> WilcoxonResult:
    """Exact one-tailed sign test of H1: w tends to exceed b.

    Alternative to the signed-rank test for heavily tied (e.g. binary)
    paired data; reported through the same result type.
    """
    w = np.asarray(w, dtype=float)
    b = np.asarray(b, dtype=float)
    if w.shape != b.shape or w.ndim != 1:
        raise LengthMismatch(f"paired samples must be equal-length 1-D, got {w.shape} vs {b.shape}")
    diffs = w - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        return WilcoxonResult(w_stat=0.0, n_effective=0, p_value=1.0, method="sign_exact")
    k = int(np.sum(diffs > 0))
    # P(X >= k), X ~ Binomial(n, 1/2)
    num = sum(math.comb(n, i) for i in range(k, n + 1))
    return WilcoxonResult(w_stat=float(k), n_effective=n, p_value=num / (1 << n), method="sign_exact")
