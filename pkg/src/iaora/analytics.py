"""Closed-form probability and rate machinery for multi-cell opportunistic random access.

Everything in this module is computable without simulation: fading-gain CDFs,
the threshold relation that pins the per-user access probability at 1/N, the
discrete rate ladder indexed by the tolerable interferer count, and the
analytic lower bound on aggregate PHY throughput.

Conventions for the single-cell case (K = 1): the leakage CDF is identically 1,
the tolerable interferer count is 0, and the leakage threshold is ignored.
"""

import math
from dataclasses import dataclass

from scipy.special import gammainc, gammaincinv


class InfeasibleThresholdError(ValueError):
    """No gain threshold can hold the access probability at 1/N for the given leakage threshold."""


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of a K-cell random access network.

    Attributes:
        K: number of cells (one access point each).
        N: number of users per cell.
        snr: average receive SNR, linear scale (transmit power over noise power).
        p: per-slot transmission probability; defaults to 1/N, which maximizes
           the slotted-ALOHA MAC throughput.
    """

    K: int
    N: int
    snr: float
    p: float | None = None

    def __post_init__(self):
        if not isinstance(self.K, int) or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        if not isinstance(self.N, int) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        if self.p is None:
            object.__setattr__(self, "p", 1.0 / self.N)
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")


@dataclass(frozen=True)
class ProtocolParams:
    """Operating point of the interference-aware protocol.

    Attributes:
        phi_g: own-cell gain threshold (transmit only if gain >= phi_g).
        phi_i: leakage threshold (transmit only if summed foreign gain <= phi_i).
        rate: common PHY data rate in bits/s/Hz.
        nu: tolerable number of other-cell interferers baked into the rate.
        epsilon: target decoding-failure budget used when selecting nu.
        delta: user-scaling design constant.
    """

    phi_g: float
    phi_i: float
    rate: float
    nu: int = 0
    epsilon: float = 0.01
    delta: float = 0.1

    def __post_init__(self):
        if self.phi_g < 0:
            raise ValueError(f"phi_g must be nonnegative, got {self.phi_g}")
        if self.phi_i < 0:
            raise ValueError(f"phi_i must be nonnegative, got {self.phi_i}")
        if self.rate < 0:
            raise ValueError(f"rate must be nonnegative, got {self.rate}")
        if not isinstance(self.nu, int) or self.nu < 0:
            raise ValueError(f"nu must be a nonnegative integer, got {self.nu}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def check_against(self, cfg: NetworkConfig):
        """Validate that nu fits the interferer support of cfg."""
        if self.nu > (cfg.K - 1) * cfg.N:
            raise ValueError(
                f"nu={self.nu} exceeds the interferer support (K-1)*N={(cfg.K - 1) * cfg.N}"
            )


def exp_cdf(x: float) -> float:
    """CDF of a unit-mean exponential gain: 1 - exp(-x)."""
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    return -math.expm1(-x)


def exp_cdf_inv(u: float) -> float:
    """Inverse of exp_cdf: ln(1/(1-u)) for u in [0, 1)."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    return -math.log1p(-u)


def erlang_cdf(x: float, shape: int) -> float:
    """CDF of the sum of `shape` i.i.d. unit-mean exponentials.

    Equals 1 - exp(-x) * sum_{m=0}^{shape-1} x^m / m!. Computed via the
    regularized lower incomplete gamma function, which evaluates that
    expression without cancellation for small x.

    shape = 0 (single-cell network: empty leakage sum) returns 1 by
    convention, since an empty sum never exceeds any threshold.
    """
    if x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if shape < 0:
        raise ValueError(f"shape must be nonnegative, got {shape}")
    if shape == 0:
        return 1.0
    return float(gammainc(shape, x))


def erlang_cdf_inv(u: float, shape: int) -> float:
    """Inverse Erlang CDF; shape = 0 maps every u to 0 (degenerate sum)."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    if shape < 0:
        raise ValueError(f"shape must be nonnegative, got {shape}")
    if shape == 0:
        return 0.0
    return float(gammaincinv(shape, u))


def lemma_c1(K: int) -> float:
    """Constant c1 = e^-1 * 2^-(K-1) / ((K-1) * (K-2)!) in the leakage-CDF lower bound."""
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    return math.exp(-1.0) * 2.0 ** (-(K - 1)) / ((K - 1) * math.gamma(K - 1))


def erlang_cdf_lower_bound(x: float, K: int) -> float:
    """Polynomial lower bound c1 * x^(K-1) on the leakage CDF, valid on [0, 2)."""
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    if not 0.0 <= x < 2.0:
        raise ValueError(f"bound only holds for x in [0, 2), got {x}")
    return lemma_c1(K) * x ** (K - 1)


def decode_prob_tilde(K: int, N: int, nu: int) -> float:
    """Probability that at most `nu` other-cell users transmit in a slot.

    This is the CDF of Binomial((K-1)*N, 1/N) at nu, which is also a
    regularized incomplete beta value. Computed as a log-space binomial sum:
    each term exponentiates log C(M, i) + i*log(q) + (M-i)*log(1-q), with
    log-gamma for the coefficients, so the sum stays stable for M up to 1e6.

    Returns 1 for K = 1 (no interfering cells).
    """
    if K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if K == 1:
        return 1.0
    M = (K - 1) * N
    if not 0 <= nu <= M:
        raise ValueError(f"nu must lie in [0, {M}], got {nu}")
    if nu == M:
        return 1.0
    if N == 1:
        # q = 1: all M trials succeed, so the CDF below M is 0.
        return 0.0
    log_q = -math.log(N)
    log_1mq = math.log1p(-1.0 / N)
    lg_M = math.lgamma(M + 1)
    terms = [
        math.exp(
            lg_M
            - math.lgamma(i + 1)
            - math.lgamma(M - i + 1)
            + i * log_q
            + (M - i) * log_1mq
        )
        for i in range(nu + 1)
    ]
    return min(1.0, math.fsum(terms))


def select_nu_star(K: int, N: int, epsilon: float) -> int:
    """Smallest tolerable interferer count whose decode probability reaches 1 - epsilon.

    Exact equality is unattainable on integers, so the smallest nu with
    decode_prob_tilde(K, N, nu) >= 1 - epsilon is returned. Always at most
    (K-1)*N, where the probability equals 1. Returns 0 for K = 1.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if K == 1:
        return 0
    target = 1.0 - epsilon
    nu = 0
    while decode_prob_tilde(K, N, nu) < target:
        nu += 1
    return nu


def threshold_relation(phi_i: float, cfg: NetworkConfig) -> float:
    """Gain threshold that pins the per-user access probability at exactly 1/N.

    Solves Pr(gain >= phi_g) * Pr(leakage <= phi_i) = 1/N for phi_g, which
    for unit-mean exponential gains gives phi_g = ln(F_I(phi_i) * N).

    Raises InfeasibleThresholdError when F_I(phi_i) * N <= 1: the required
    tail probability would exceed 1 and no gain threshold exists.
    """
    if phi_i < 0:
        raise ValueError(f"phi_i must be nonnegative, got {phi_i}")
    target = erlang_cdf(phi_i, cfg.K - 1) * cfg.N
    if target <= 1.0:
        raise InfeasibleThresholdError(
            f"F_I(phi_i) * N = {target:.6g} <= 1: no gain threshold keeps the "
            f"access probability at 1/N for phi_i={phi_i}"
        )
    return math.log(target)


def invert_threshold_relation(phi_g: float, cfg: NetworkConfig) -> float:
    """Leakage threshold paired with phi_g so the access probability stays 1/N.

    Inverse of threshold_relation: phi_i = F_I^{-1}(exp(phi_g) / N). Requires
    exp(phi_g) < N for K >= 2 (the leakage CDF cannot reach 1). For K = 1 the
    leakage condition is vacuous; the only phi_g consistent with access
    probability 1/N is ln(N), and infinity is returned for phi_i.
    """
    if phi_g < 0:
        raise ValueError(f"phi_g must be nonnegative, got {phi_g}")
    if cfg.K == 1:
        if not math.isclose(phi_g, math.log(cfg.N), rel_tol=1e-9, abs_tol=1e-12):
            raise InfeasibleThresholdError(
                f"with K=1 only phi_g=ln(N)={math.log(cfg.N):.6g} keeps the "
                f"access probability at 1/N, got {phi_g}"
            )
        return math.inf
    target = math.exp(phi_g) / cfg.N
    if target >= 1.0:
        raise InfeasibleThresholdError(
            f"exp(phi_g)/N = {target:.6g} >= 1: no leakage threshold keeps the "
            f"access probability at 1/N for phi_g={phi_g}"
        )
    return erlang_cdf_inv(target, cfg.K - 1)


def select_rate(phi_g: float, phi_i: float, snr: float, nu: int) -> float:
    """Largest common PHY rate that tolerates `nu` interferers at the thresholds.

    R = log2(1 + phi_g / (1/snr + nu * phi_i)): the top of the SINR sub-range
    in which up to nu leakage-bounded interferers cannot break decoding.
    """
    if phi_g < 0:
        raise ValueError(f"phi_g must be nonnegative, got {phi_g}")
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    if nu < 0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    return math.log1p(phi_g / (1.0 / snr + nu * phi_i)) / math.log(2.0)


def mac_throughput(N: int, p: float) -> float:
    """Slotted-ALOHA MAC throughput N * p * (1-p)^(N-1), maximized at p = 1/N."""
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return N * p * (1.0 - p) ** (N - 1)


def throughput_lower_bound(cfg: NetworkConfig, epsilon: float, delta: float) -> float:
    """Closed-form lower bound on aggregate PHY throughput under the design rules.

    (K/e) * (1 - epsilon) * log2(1 + delta * snr * ln(N) / (nu* + 1)), with
    nu* from select_nu_star. Grows like (K/e)(1-eps) * log(snr * log N), the
    achievable scaling, once N satisfies the user-scaling condition; the bound
    is reported regardless, and is 0 at N = 1.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    nu_star = select_nu_star(cfg.K, cfg.N, epsilon)
    inner = delta * cfg.snr * math.log(cfg.N) / (nu_star + 1)
    return (cfg.K / math.e) * (1.0 - epsilon) * math.log1p(inner) / math.log(2.0)


def user_scaling_min_n(K: int, snr: float, delta: float) -> float:
    """Smallest per-cell user count for which the scaling guarantee kicks in.

    Solves c1 * snr^-(K-1) * N = N^delta, giving N = (snr^(K-1) / c1)^(1/(1-delta)).
    Returns 1 for K = 1 (no interference constrains the user count).
    """
    if K < 1:
        raise ValueError(f"K must be a positive integer, got {K}")
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if K == 1:
        return 1.0
    return (snr ** (K - 1) / lemma_c1(K)) ** (1.0 / (1.0 - delta))


def design_protocol_params(
    cfg: NetworkConfig,
    epsilon: float = 0.01,
    delta: float = 0.1,
    phi_i: float | None = None,
) -> ProtocolParams:
    """Build the analytically designed operating point for a network.

    phi_i defaults to 1/snr (the choice behind the scaling guarantee); phi_g
    follows from the access-probability relation, nu from select_nu_star, and
    the rate from the ladder. The relation e^-phi_g * F_I(phi_i) = 1/N is
    verified to relative tolerance 1e-9 before returning.
    """
    if phi_i is None:
        phi_i = 1.0 / cfg.snr
    phi_g = threshold_relation(phi_i, cfg)
    nu = select_nu_star(cfg.K, cfg.N, epsilon)
    rate = select_rate(phi_g, phi_i, cfg.snr, nu)
    access = math.exp(-phi_g) * erlang_cdf(phi_i, cfg.K - 1)
    if not math.isclose(access, 1.0 / cfg.N, rel_tol=1e-9):
        raise InfeasibleThresholdError(
            f"threshold relation violated: access probability {access:.12g} != 1/N"
        )
    params = ProtocolParams(
        phi_g=phi_g, phi_i=phi_i, rate=rate, nu=nu, epsilon=epsilon, delta=delta
    )
    params.check_against(cfg)
    return params
