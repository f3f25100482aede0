"""Estimate crowd parameters and spammer counts from observable responses.

Workers who answer every question or skip every question ("extreme" workers)
are left out of the m and mu estimates. The two spammer counts are then fit
by maximum likelihood on the number of extreme workers of each kind.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from .crowd import SKIP, AnswerMatrix

GOLD = "gold"
MAJORITY = "majority"


class AllWorkersExtreme(ValueError):
    """Every worker answered all questions or skipped all of them."""


class NoDefinitiveAnswers(ValueError):
    """No definitive answer is available to score against."""


@dataclass
class CrowdEstimates:
    m_hat: float
    mu_hat: float
    M0_hat: int
    MN_hat: int
    log_likelihood: float
    method_mu: str
    W_all: int = 0
    W_none: int = 0

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def extreme_counts(answers: AnswerMatrix) -> tuple[int, int]:
    """(workers with N+G definitive answers, workers who skipped everything)."""
    n = answers.definitive_counts("all")
    K = answers.responses.shape[1]
    return int(np.sum(n == K)), int(np.sum(n == 0))


def _non_extreme(answers: AnswerMatrix) -> np.ndarray:
    n = answers.definitive_counts("all")
    return (n > 0) & (n < answers.responses.shape[1])


def estimate_m(answers: AnswerMatrix) -> float:
    """Fraction of skipped cells among non-extreme workers."""
    keep = _non_extreme(answers)
    if not keep.any():
        raise AllWorkersExtreme("no worker has a mix of answers and skips")
    return float(np.mean(answers.responses[keep] == SKIP))


def estimate_mu(answers: AnswerMatrix, method: str = GOLD) -> float:
    """Correctness of definitive answers, clamped to [0.5, 1].

    ``gold`` scores non-extreme workers on the gold columns. ``majority``
    takes the simple majority of the non-extreme workers' definitive answers
    on each classification column as pseudo-truth (tied columns are dropped)
    and measures agreement with it; it reads no truth at all.
    """
    keep = _non_extreme(answers)
    if method == GOLD:
        if answers.G < 1:
            raise ValueError("gold training needs at least one gold question")
        resp = answers.gold_responses()[keep]
        ref = answers.gold_truth[None, :]
    elif method == MAJORITY:
        if keep.sum() < 3:
            raise ValueError("majority estimate needs at least 3 non-extreme workers")
        resp = answers.classification_responses()[keep]
        ones = np.sum(resp == 1, axis=0)
        zeros = np.sum(resp == 0, axis=0)
        decided = ones != zeros
        resp = resp[:, decided]
        ref = (ones > zeros)[decided][None, :].astype(np.int8)
    else:
        raise ValueError(f"unknown mu estimation method {method!r}")
    definitive = resp != SKIP
    total = int(definitive.sum())
    if total == 0:
        raise NoDefinitiveAnswers("no definitive answers to score")
    agree = int(np.sum(definitive & (resp == ref)))
    return float(np.clip(agree / total, 0.5, 1.0))


def _log_binom(a, b):
    return gammaln(a + 1.0) - gammaln(b + 1.0) - gammaln(a - b + 1.0)


def _xlog(k, p):
    # k * log(p) with 0 * log(0) = 0
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(k == 0, 0.0, k * np.log(p))


def _xlog1m(k, p):
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(k == 0, 0.0, k * np.log1p(-p))


def spammer_count_likelihood(W_all, W_none, MN, M0, W, m_hat, N, G, form: str = "printed"):
    """Log of f(W_all, W_none | MN, M0); -inf outside the support. Broadcasts over MN, M0.

    ``form="printed"`` is the published two-binomial expression, whose second
    factor uses the unconditional all-answer probability and whose remainder
    terms are (1 - p_none) and (1 - p_all). ``form="multinomial"`` is the exact
    probability of the honest extreme counts, (none, all, mixed) ~
    Multinomial(W - M0 - MN; p_none, p_all, 1 - p_none - p_all).
    """
    if form not in ("printed", "multinomial"):
        raise ValueError(f"unknown likelihood form {form!r}")
    if not 0.0 < m_hat < 1.0:
        raise ValueError(f"m_hat must lie in (0, 1), got {m_hat}")
    if min(W_all, W_none) < 0 or W_all + W_none > W:
        raise ValueError("inconsistent extreme counts")
    K = N + G
    MN = np.asarray(MN)
    M0 = np.asarray(M0)
    p_none = m_hat**K  # honest worker skips everything
    p_all = (1.0 - m_hat) ** K  # honest worker answers everything
    ok = (M0 >= 0) & (MN >= 0) & (M0 <= W_none) & (MN <= W_all) & (M0 + MN <= W)
    M0c = np.where(ok, M0, 0)
    MNc = np.where(ok, MN, 0)
    ll = (
        _log_binom(W - M0c - MNc, W_none - M0c)
        + _xlog(W_none - M0c, p_none)
        + _log_binom(W - W_none - MNc, W_all - MNc)
        + _xlog(W_all - MNc, p_all)
    )
    if form == "printed":
        ll = ll + _xlog1m(W - W_none - MNc, p_none) + _xlog1m(W - W_all - W_none, p_all)
    else:
        ll = ll + _xlog1m(W - W_all - W_none, p_none + p_all)
    ll = np.where(ok, ll, -np.inf)
    return float(ll) if ll.ndim == 0 else ll


def likelihood_surface(W_all, W_none, W, m_hat, N, G, form: str = "printed") -> np.ndarray:
    """Log-likelihood on the grid M0 in [0, W_none] (rows) x MN in [0, W_all] (columns)."""
    M0 = np.arange(W_none + 1)[:, None]
    MN = np.arange(W_all + 1)[None, :]
    return spammer_count_likelihood(W_all, W_none, MN, M0, W, m_hat, N, G, form)


def estimate_spammer_counts(W_all, W_none, W, m_hat, N, G, rtol: float = 1e-12, form: str = "printed"):
    """Grid-search MLE of (M0, MN).

    Ties (within rtol) go to the smallest M0 + MN, then the smallest M0.
    Returns (M0_hat, MN_hat, log_likelihood).
    """
    surf = np.atleast_2d(likelihood_surface(W_all, W_none, W, m_hat, N, G, form))
    best = surf.max()
    near = surf >= best - rtol * max(1.0, abs(best))
    M0, MN = np.nonzero(near)
    order = np.lexsort((M0, M0 + MN))
    i = order[0]
    return int(M0[i]), int(MN[i]), float(best)


def estimate_crowd(answers: AnswerMatrix, method_mu: str = GOLD) -> CrowdEstimates:
    W_all, W_none = extreme_counts(answers)
    m_hat = estimate_m(answers)
    mu_hat = estimate_mu(answers, method_mu)
    M0, MN, ll = estimate_spammer_counts(W_all, W_none, answers.W, m_hat, answers.N, answers.G)
    return CrowdEstimates(m_hat=m_hat, mu_hat=mu_hat, M0_hat=M0, MN_hat=MN, log_likelihood=ll,
                          method_mu=method_mu, W_all=W_all, W_none=W_none)


def surface_csv(W_all, W_none, W, m_hat, N, G) -> str:
    surf = likelihood_surface(W_all, W_none, W, m_hat, N, G)
    lines = ["M0,MN,loglik"]
    for M0 in range(surf.shape[0]):
        for MN in range(surf.shape[1]):
            lines.append(f"{M0},{MN},{surf[M0, MN]:.12g}")
    return "\n".join(lines) + "\n"
