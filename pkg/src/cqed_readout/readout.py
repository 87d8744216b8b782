"""Poisson threshold discrimination of the two spin states.

A shot reports |g0> when at most ``k`` photons are counted and |g1>
otherwise. With expected counts n0 < n1 and equal priors the best integer
threshold is

    M = floor((n1 - n0) / (ln n1 - ln n0))

and the success probability is 1/2 + 1/2 * (F(M; n0) - F(M; n1)), with F
the Poisson CDF.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import pdtr, pdtrc

from .errors import DimensionMismatchError, NoContrastError
from .models import angular, resolved_epsilon

NO_THRESHOLD = -1  # recorded when n1 <= n0: empty threshold sum, P_s = 1/2


@dataclass(frozen=True)
class CountsPair:
    n0: float
    n1: float

    def __post_init__(self):
        for name in ("n0", "n1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class ReadoutCurve:
    times: np.ndarray
    ps: np.ndarray
    thresholds: np.ndarray
    n0: np.ndarray
    n1: np.ndarray
    t_opt: float
    m_opt: int
    ps_opt: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def i_opt(self):
        return int(np.argmax(self.ps))


def analytic_counts(eta_T_nin, c):
    """Weak-excitation means: n1 = eta T n_in, n0 = n1 / (1 + C)^2."""
    if eta_T_nin < 0 or c < 0:
        raise ValueError("eta_T_nin and C must be >= 0")
    return CountsPair(n0=eta_T_nin / (1.0 + c) ** 2, n1=float(eta_T_nin))


def poisson_cdf_table(k_max, mean):
    """P(X <= k) for k = 0..k_max, X ~ Poisson(mean).

    Terms follow t_{j+1} = t_j * mean / (j + 1), carried in log space so
    that neither j! nor exp(-mean) over/underflows.
    """
    if k_max < 0:
        raise ValueError(f"threshold must be >= 0, got {k_max}")
    if mean == 0:
        return np.ones(k_max + 1)
    j = np.arange(1, k_max + 1, dtype=float)
    log_terms = -mean + np.concatenate([[0.0], np.cumsum(math.log(mean) - np.log(j))])
    top = log_terms.max()
    cdf = math.exp(top) * np.cumsum(np.exp(log_terms - top))
    return np.minimum(cdf, 1.0)


def poisson_cdf(k, mean):
    return float(poisson_cdf_table(k, mean)[-1])


def correct_prob_g0(k, n0):
    """P(X0 <= k): the shot is correctly reported as |g0>."""
    return poisson_cdf(k, n0)


def correct_prob_g1(k, n1):
    """P(X1 > k): the shot is correctly reported as |g1>."""
    return max(0.0, 1.0 - poisson_cdf(k, n1))


def optimal_threshold(counts):
    n0, n1 = counts.n0, counts.n1
    if not n1 > n0:
        raise NoContrastError(f"need n1 > n0, got n0={n0}, n1={n1}")
    if n0 == 0:
        return 0
    # logarithmic mean of n0, n1; log1p keeps it finite when n1 ~ n0
    d = math.log1p((n1 - n0) / n0)
    log_mean = (n1 - n0) / d if d > 0 else n0
    return max(0, math.floor(min(max(log_mean, n0), n1)))


def threshold_and_success(counts):
    """(M, P_s) at equal priors; M is NO_THRESHOLD without contrast."""
    if not counts.n1 > counts.n0:
        return NO_THRESHOLD, 0.5
    m = optimal_threshold(counts)
    ps = 0.5 + 0.5 * (poisson_cdf(m, counts.n0) - poisson_cdf(m, counts.n1))
    return m, min(max(ps, 0.5), 1.0)


def success_probability(counts):
    return threshold_and_success(counts)[1]


def error_probability(counts):
    """1 - P_s from the Poisson tails directly.

    Keeps full relative precision once P_s itself rounds to 1.0.
    """
    if not counts.n1 > counts.n0:
        return 0.5
    m = optimal_threshold(counts)
    tail0 = pdtrc(m, counts.n0) if counts.n0 > 0 else 0.0
    return 0.5 * float(tail0 + pdtr(m, counts.n1))


def success_probability_general(counts, q0, q1):
    """max_k q0 p0(k) + q1 p1(k) by exhaustive scan; returns (P_s, k).

    The scan covers k in [0, ceil(n + 10 sqrt(n + 1))] with n = max(n0, n1);
    ties go to the smallest k.
    """
    if q0 < 0 or q1 < 0 or abs(q0 + q1 - 1.0) > 1e-12:
        raise ValueError(f"priors must be non-negative and sum to 1, got {q0}, {q1}")
    top = max(counts.n0, counts.n1)
    k_max = math.ceil(top + 10.0 * math.sqrt(top + 1.0))
    value = q0 * poisson_cdf_table(k_max, counts.n0) + q1 * (
        1.0 - poisson_cdf_table(k_max, counts.n1)
    )
    k = int(np.argmax(value))  # first maximum
    return float(value[k]), k


def ps_curve(times, acc0, acc1, eta):
    """Success probability at each probe duration from accumulated counts.

    ``acc0``/``acc1`` are transmitted photon numbers before collection
    losses; ``eta`` scales both.
    """
    times = np.asarray(times, dtype=float)
    acc0 = np.asarray(acc0, dtype=float)
    acc1 = np.asarray(acc1, dtype=float)
    if not (times.shape == acc0.shape == acc1.shape):
        raise DimensionMismatchError("time grid and count curves differ in length")
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    n0 = eta * np.maximum(acc0, 0.0)
    n1 = eta * np.maximum(acc1, 0.0)
    ps = np.empty(times.size)
    ms = np.empty(times.size, dtype=int)
    for i in range(times.size):
        ms[i], ps[i] = threshold_and_success(CountsPair(n0[i], n1[i]))
    i = int(np.argmax(ps))
    return ReadoutCurve(
        times=times,
        ps=ps,
        thresholds=ms,
        n0=n0,
        n1=n1,
        t_opt=float(times[i]),
        m_opt=int(ms[i]),
        ps_opt=float(ps[i]),
    )


def calibrate_nin(p):
    """Transmitted flux of the empty resonant cavity, photons/ns.

    With drive sqrt(f kappa) eps (a + a^+) the steady field is
    <a> = -2i sqrt(f kappa) eps / kappa, so kappa |<a>|^2 = 4 f eps^2.
    """
    if p.kappa <= 0:
        raise ValueError("kappa must be positive")
    eps = resolved_epsilon(p)
    kappa = angular(p.kappa)
    amplitude = 2.0 * math.sqrt(p.input_coupling * kappa) * eps / kappa
    return kappa * amplitude**2
