"""Closed-form probability of correct classification.

``exact_pc`` enumerates every answer profile of one bit (how many honest
workers voted 0 or 1 with each definitive count, and how the guessing
spammers split) and sums their probabilities under both hypotheses.
``asymptotic_pc`` replaces the per-bit margin by a Gaussian with the mean and
variance of the weighted vote.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import erfc, gammaln, xlogy

from .fusion import ASPT, WeightScheme, weight_table

DEFAULT_PROFILE_CAP = 10**8
# relative tolerance for a zero margin when exact weights are unavailable
MARGIN_RTOL = 1e-12


class EnumerationTooLarge(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"{count} answer profiles exceed the cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class AnswerProfile:
    """Votes on one bit. ``q[n + N]`` counts honest workers with |n| definitive
    answers voting 1 (n > 0) or 0 (n < 0); ``q[N]`` counts those who skipped it."""

    q: tuple
    MN_one: int = 0
    MN_zero: int = 0

    def __post_init__(self):
        if len(self.q) % 2 != 1 or len(self.q) < 3:
            raise ValueError("q must have odd length 2N+1 with N >= 1")
        if min(self.q) < 0 or self.MN_one < 0 or self.MN_zero < 0:
            raise ValueError("profile entries must be non-negative")

    @property
    def N(self) -> int:
        return len(self.q) // 2

    @property
    def MN(self) -> int:
        return self.MN_one + self.MN_zero

    @property
    def honest(self) -> int:
        return int(sum(self.q))

    def at(self, n: int) -> int:
        return self.q[n + self.N]


def definitive_pmf(m: float, N: int) -> np.ndarray:
    """P(n) for n = 1..N: an honest worker answers this bit and n-1 of the other N-1."""
    n = np.arange(1, N + 1)
    return np.array([math.comb(N - 1, k - 1) for k in n], dtype=float) * (1 - m) ** n * m ** (N - n)


def _log_terms(q: np.ndarray, MN_one, MN, mu, m, N):
    """log F, log F' and log count for profile rows q (shape (..., 2N+1))."""
    q = np.asarray(q, dtype=float)
    P = definitive_pmf(m, N)
    neg = q[..., :N][..., ::-1]  # q_{-1} .. q_{-N}
    pos = q[..., N + 1:]  # q_1 .. q_N
    base = xlogy(q[..., N], m) + MN * math.log(0.5) + np.sum(xlogy(neg + pos, P), axis=-1)
    logF = base + np.sum(xlogy(neg, 1 - mu) + xlogy(pos, mu), axis=-1)
    logFp = base + np.sum(xlogy(pos, 1 - mu) + xlogy(neg, mu), axis=-1)
    H = q.sum(axis=-1)
    logcount = (gammaln(H + 1) - np.sum(gammaln(q + 1), axis=-1)
                + gammaln(MN + 1) - gammaln(MN_one + 1) - gammaln(MN - MN_one + 1))
    return logF, logFp, logcount


def profile_count(profile: AnswerProfile) -> int:
    """Number of worker assignments realising the profile: H!/prod q! * C(MN, MN_one)."""
    c = math.factorial(profile.honest)
    for v in profile.q:
        c //= math.factorial(v)
    return c * math.comb(profile.MN, profile.MN_one)


def profile_probability(profile: AnswerProfile, mu: float, m: float, hypothesis: int = 1,
                        with_count: bool = False) -> float:
    """Probability of one specific assignment with this profile (F under H1, F' under H0);
    times the number of such assignments when ``with_count``."""
    if hypothesis not in (0, 1):
        raise ValueError("hypothesis must be 0 or 1")
    N = profile.N
    logF, logFp, logc = _log_terms(np.array(profile.q), profile.MN_one, profile.MN, mu, m, N)
    out = logF if hypothesis == 1 else logFp
    if with_count:
        out = out + logc
    return float(np.exp(out))


def profile_margin(profile: AnswerProfile, weights) -> float:
    """sum_n (q_n - q_-n) W(n) + (MN_one - MN_zero) W(N); weights indexed by n = 0..N."""
    N = profile.N
    total = sum((profile.at(n) - profile.at(-n)) * weights[n] for n in range(1, N + 1))
    return total + (profile.MN_one - profile.MN_zero) * weights[N]


@lru_cache(maxsize=256)
def _compositions(total: int, parts: int) -> np.ndarray:
    """All compositions of `total` into `parts` non-negative parts, lexicographic."""
    if parts == 1:
        out = np.array([[total]], dtype=np.int64)
    else:
        blocks = []
        for i in range(total + 1):
            sub = _compositions(total - i, parts - 1)
            blocks.append(np.column_stack([np.full(len(sub), i, dtype=np.int64), sub]))
        out = np.concatenate(blocks)
    out.setflags(write=False)
    return out


def enumeration_size(W: int, M0: int, MN: int, N: int) -> int:
    H = W - M0 - MN
    return math.comb(H + 2 * N, 2 * N) * (MN + 1)


@dataclass
class ExactPcResult:
    pc: float
    pc_bit: float
    profile_count: int
    normalization: float
    tie_mass: float
    runtime: float = field(default=0.0, compare=False)


def _check_population(W, M0, MN, mu, m, N):
    if N < 1:
        raise ValueError("N must be positive")
    if min(M0, MN) < 0 or M0 + MN > W:
        raise ValueError("need 0 <= M0, MN and M0 + MN <= W")
    if not 0.0 <= m <= 1.0:
        raise ValueError("m must lie in [0, 1]")
    if not 0.5 <= mu <= 1.0:
        raise ValueError("mu must lie in [0.5, 1]")


def exact_pc_report(W: int, M0: int, MN: int, mu: float, m: float, N: int,
                    scheme: WeightScheme | None = None, cap: int = DEFAULT_PROFILE_CAP) -> ExactPcResult:
    """Exact P_c with diagnostics (profile count, total probability, tie mass).

    The default scheme is ASPT evaluated at the true parameters.
    """
    _check_population(W, M0, MN, mu, m, N)
    start = time.perf_counter()
    count = enumeration_size(W, M0, MN, N)
    if count > cap:
        raise EnumerationTooLarge(count, cap)
    if scheme is None:
        scheme = ASPT(W=W, M=M0 + MN, MN=MN, mu=mu, m=m, N=N)
    w = np.array(weight_table(scheme, N), dtype=float)
    try:
        w_exact = weight_table(scheme, N, exact=True)
    except (ValueError, ZeroDivisionError):
        w_exact = None
    scale = float(np.max(np.abs(w))) if np.any(w) else 1.0

    H = W - M0 - MN
    split = np.arange(MN + 1)
    spam = (2 * split - MN) * w[N]  # MN_one - MN_zero, times W(N)
    signed = np.concatenate([-w[1:][::-1], [0.0], w[1:]])  # per profile column n = -N..N

    s_win = s_tie = norm = 0.0
    seen = 0
    for first in range(H + 1):  # outer coordinate q_{-N}
        rest = _compositions(H - first, 2 * N)
        q = np.column_stack([np.full(len(rest), first, dtype=np.int64), rest])
        seen += len(q) * (MN + 1)
        honest_margin = q @ signed
        margin = honest_margin[:, None] + spam[None, :]
        logF, logFp, logc = _log_terms(q[:, None, :], split[None, :], MN, mu, m, N)
        cF = np.exp(logc + logF)
        diff = cF - np.exp(logc + logFp)
        norm += cF.sum()
        tie = np.abs(margin) <= 1e-9 * scale * max(1, W)
        if tie.any():
            tie = _refine_ties(tie, q, split, MN, N, w_exact, margin, scale)
        win = (margin > 0) & ~tie
        s_win += diff[win].sum()
        s_tie += diff[tie].sum()
    if seen != count:
        raise AssertionError(f"enumerated {seen} profiles, expected {count}")
    pc_bit = 0.5 + 0.5 * s_win + 0.25 * s_tie
    return ExactPcResult(pc=float(pc_bit**N), pc_bit=float(pc_bit), profile_count=count, normalization=float(norm),
                         tie_mass=float(s_tie), runtime=time.perf_counter() - start)


def _refine_ties(candidates, q, split, MN, N, w_exact, margin, scale):
    """Decide near-zero margins exactly when rational weights are available."""
    if w_exact is None:
        return np.abs(margin) <= MARGIN_RTOL * scale
    out = np.zeros_like(candidates)
    known: dict[tuple, bool] = {}
    for i, j in zip(*np.nonzero(candidates)):
        # the margin only depends on the per-count vote differences
        key = tuple(int(q[i, N + n] - q[i, N - n]) for n in range(1, N + 1))
        key = key[:-1] + (key[-1] + int(2 * split[j] - MN),)
        if key not in known:
            known[key] = sum(k * w_exact[n] for n, k in enumerate(key, start=1)) == 0
        out[i, j] = known[key]
    return out


def exact_pc(W: int, M0: int, MN: int, mu: float, m: float, N: int,
             scheme: WeightScheme | None = None, cap: int = DEFAULT_PROFILE_CAP) -> float:
    return exact_pc_report(W, M0, MN, mu, m, N, scheme, cap).pc


def q_function(x):
    """Upper tail of the standard normal."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AsymptoticMoments:
    mean_M: float
    var_V: float
    Z_M: float
    # per-worker moments of the signed weighted vote under H1
    E_honest: float
    V_honest: float
    E_spammer: float
    V_spammer: float
    honest: int
    MN: int

    @property
    def total_mean(self) -> float:
        """Sum of the per-worker means over the crowd."""
        return self.honest * self.E_honest + self.MN * self.E_spammer

    @property
    def total_var(self) -> float:
        return self.honest * self.V_honest + self.MN * self.V_spammer

    def component_pc(self, N: int) -> float:
        """Gaussian P_c from the summed per-worker moments instead of the closed form."""
        return _pc_from_moments(self.total_mean, self.total_var, N)


def asymptotic_moments(W: int, M0: int, MN: int, mu: float, m: float, N: int) -> AsymptoticMoments:
    """Closed-form mean and variance of the weighted vote on one bit.

    ``mean_M`` and ``var_V`` follow the published closed form term by term.
    Its first mean term carries a 1/(W-M) relative to the sum of per-worker
    means, so ``total_mean``/``total_var`` (built from the per-worker moments)
    are exposed separately for checking against simulation.
    """
    _check_population(W, M0, MN, mu, m, N)
    H = W - M0 - MN
    if H < 1:
        raise ValueError("need at least one honest worker (W > M)")
    if not 0.0 < m < 1.0:
        raise ValueError("m must lie in (0, 1)")
    Z = 2.0**N * (1.0 - m) ** N
    denom = H * mu**N * Z + MN
    mean = ((2 * mu - 1) * (1 - m) / mu * ((1 - m) / mu + m) ** (N - 1)
            + H * (2 * mu - 1) * (1 - m) ** N * Z / denom)
    var = ((1 - m) / (H * mu**2) * ((1 - m) / mu**2 + m) ** (N - 1)
           + (H * (1 - m) ** N + MN) * Z**2 / denom**2
           - mean**2 / H)

    scheme = ASPT(W=W, M=M0 + MN, MN=MN, mu=mu, m=m, N=N)
    w = np.array(weight_table(scheme, N))[1:]
    P = definitive_pmf(m, N)
    E_h = (2 * mu - 1) * float(np.sum(w * P))
    V_h = float(np.sum(w**2 * P)) - E_h**2
    return AsymptoticMoments(mean_M=mean, var_V=var, Z_M=Z, E_honest=E_h, V_honest=V_h,
                             E_spammer=0.0, V_spammer=float(w[-1] ** 2), honest=H, MN=MN)


def _pc_from_moments(M: float, V: float, N: int) -> float:
    if not V > 0:
        raise ValueError(f"variance must be positive, got {V}")
    return q_function(-M / math.sqrt(V)) ** N


def asymptotic_pc(W: int, M0: int, MN: int, mu: float, m: float, N: int) -> float:
    mom = asymptotic_moments(W, M0, MN, mu, m, N)
    return _pc_from_moments(mom.mean_M, mom.var_V, N)


@dataclass(frozen=True)
class CaseMoments:
    case: int
    mean_M: float
    var_V: float

    def pc(self, N: int) -> float:
        return _pc_from_moments(self.mean_M, self.var_V, N)


def spammer_fraction_cases(gamma: float, epsilon: float, mu: float, m: float, N: int, W: float) -> CaseMoments:
    """Large-crowd limits: case 1 has only Type I spammers (fraction gamma),
    case 2 only Type II spammers (fraction epsilon)."""
    if not (0.0 <= gamma < 1.0 and 0.0 <= epsilon < 1.0):
        raise ValueError("gamma and epsilon must lie in [0, 1)")
    if gamma > 0 and epsilon > 0:
        raise ValueError("the limiting forms cover one spammer kind at a time")
    if not 0.0 < m < 1.0 or not 0.5 <= mu <= 1.0:
        raise ValueError("need 0 < m < 1 and 0.5 <= mu <= 1")
    lead = (2 * mu - 1) * (1 - m) / mu * ((1 - m) / mu + m) ** (N - 1)
    spread = (1 - m) / mu**2 * ((1 - m) / mu**2 + m) ** (N - 1)
    Z = 2.0**N * (1.0 - m) ** N
    if epsilon == 0.0:
        mean = lead + (2 * mu - 1) * (1 - m) ** N / mu**N
        var = (spread + (1 - m) ** N / mu**N - mean**2) / (W * (1 - gamma))
        return CaseMoments(1, mean, var)
    mean = lead + (2 * mu - 1) * (1 - m) ** N * Z / (mu**N * Z + epsilon / (1 - epsilon))
    honest = W * (1 - epsilon)
    var = (spread / honest
           + ((1 - epsilon) * (1 - m) ** N + epsilon) * Z**2 / (W * ((1 - epsilon) * mu**N * Z + epsilon) ** 2)
           - mean**2 / honest)
    return CaseMoments(2, mean, var)
