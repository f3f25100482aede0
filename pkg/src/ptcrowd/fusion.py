"""Per-worker weights and weighted-majority aggregation of N-bit answer words.

Two decision rules are provided. ``fuse_word`` decides every bit by the sign of
the weighted vote margin; ``classify`` scores all 2**N classes, each worker
adding its weight to every class its partial word is consistent with, and
takes the argmax. Both share one tie policy: a bit whose margin is zero is
settled by a coin derived from ``(tie_seed, bit)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .crowd import SKIP, AnswerMatrix

# |margin| <= TIE_RTOL * max weight counts as a tie.
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class ASPT:
    """Spammer-aware weights: [(W-M) mu**n + MN / (2**N (1-m)**N) * [n == N]]**-1."""

    W: int
    M: int
    MN: int
    mu: float
    m: float
    N: int

    def __post_init__(self):
        if not 0.5 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0.5, 1], got {self.mu}")
        if not 0.0 <= self.m <= 1.0:
            raise ValueError(f"m must lie in [0, 1], got {self.m}")
        if not 0 <= self.MN <= self.M <= self.W:
            raise ValueError("need 0 <= MN <= M <= W")
        if self.N < 1:
            raise ValueError("N must be positive")

    def spammer_term(self, exact: bool = False):
        if self.MN == 0:
            return 0
        if self.m == 1.0:
            raise ValueError("m = 1 with Type II spammers makes the all-definitive weight undefined")
        if exact:
            return Fraction(self.MN) / (2**self.N * (1 - Fraction(self.m)) ** self.N)
        return self.MN / (2.0**self.N * (1.0 - self.m) ** self.N)

    def weight(self, n, n_max: int | None = None):
        n = np.asarray(n)
        N = self.N if n_max is None else n_max
        if np.any((n < 0) | (n > N)):
            raise ValueError(f"definitive count must lie in [0, {N}]")
        extra = _aspt_extra(self, N) if np.any(n == N) else 0.0
        with np.errstate(divide="ignore"):
            denom = (self.W - self.M) * self.mu ** n.astype(float) + np.where(n == N, extra, 0.0)
        if np.any(denom == 0):
            raise ValueError("ASPT weight undefined: no honest workers and n < N")
        out = 1.0 / denom
        return float(out) if out.ndim == 0 else out

    def exact_weight(self, n: int, n_max: int | None = None) -> Fraction:
        N = self.N if n_max is None else n_max
        denom = (self.W - self.M) * Fraction(self.mu) ** n
        if n == N and self.MN:
            if self.m == 1.0:
                raise ValueError("m = 1 with Type II spammers makes the all-definitive weight undefined")
            denom += Fraction(self.MN) / (2**N * (1 - Fraction(self.m)) ** N)
        if denom == 0:
            raise ValueError("ASPT weight undefined: no honest workers and n < N")
        return 1 / denom


def _aspt_extra(s: ASPT, N: int) -> float:
    if s.MN == 0:
        return 0.0
    if s.m == 1.0:
        raise ValueError("m = 1 with Type II spammers makes the all-definitive weight undefined")
    return s.MN / (2.0**N * (1.0 - s.m) ** N)


@dataclass(frozen=True)
class HonestAssumed:
    """Treat everybody as honest: mu**-n."""

    mu: float

    def weight(self, n, n_max: int | None = None):
        out = self.mu ** -np.asarray(n, dtype=float)
        return float(out) if out.ndim == 0 else out

    def exact_weight(self, n: int, n_max: int | None = None) -> Fraction:
        return 1 / Fraction(self.mu) ** n


@dataclass(frozen=True)
class ExcludeAllDefinitive:
    """mu**-n, except workers definitive on every question get weight 0."""

    mu: float

    def weight(self, n, n_max: int | None = None):
        if n_max is None:
            raise ValueError("ExcludeAllDefinitive needs the number of questions")
        n = np.asarray(n, dtype=float)
        out = np.where(n == n_max, 0.0, self.mu**-n)
        return float(out) if out.ndim == 0 else out

    def exact_weight(self, n: int, n_max: int | None = None) -> Fraction:
        if n == n_max:
            return Fraction(0)
        return 1 / Fraction(self.mu) ** n


@dataclass(frozen=True)
class MajorityVote:
    """Equal weights; meant for sessions collected without the skip option."""

    def weight(self, n, n_max: int | None = None):
        out = np.ones_like(np.asarray(n, dtype=float))
        return float(out) if out.ndim == 0 else out

    def exact_weight(self, n: int, n_max: int | None = None) -> Fraction:
        return Fraction(1)


WeightScheme = Union[ASPT, HonestAssumed, ExcludeAllDefinitive, MajorityVote]

SCHEME_NAMES = {
    "aspt": ASPT,
    "honest_assumed": HonestAssumed,
    "exclude_all_definitive": ExcludeAllDefinitive,
    "majority_vote": MajorityVote,
}


def scheme_name(scheme: WeightScheme) -> str:
    for name, cls in SCHEME_NAMES.items():
        if isinstance(scheme, cls):
            return name
    raise TypeError(f"not a weight scheme: {scheme!r}")


def aspt_weight(n, scheme: ASPT):
    return scheme.weight(n)


def weight_table(scheme: WeightScheme, N: int, exact: bool = False) -> list:
    """Weights indexed by definitive count n = 0..N."""
    if exact:
        out = []
        for n in range(N + 1):
            try:
                out.append(scheme.exact_weight(n, N))
            except ValueError:
                if n == 0:
                    out.append(Fraction(0))  # an all-skip worker never votes
                else:
                    raise
        return out
    return [float(_safe_weight(scheme, n, N)) for n in range(N + 1)]


def _safe_weight(scheme, n, N):
    try:
        return scheme.weight(n, N)
    except ValueError:
        if n == 0:
            return 0.0
        raise


def vote_signs(answers: AnswerMatrix) -> np.ndarray:
    """+1 for a One, -1 for a Zero, 0 for a skip, on the classification columns."""
    resp = answers.classification_responses()
    return np.where(resp == SKIP, 0, 2 * resp.astype(np.int8) - 1).astype(np.int8)


def assign_weights(answers: AnswerMatrix, scheme: WeightScheme, scope: str = "classification") -> np.ndarray:
    """Per-worker weight from the worker's definitive count.

    ``scope="classification"`` counts definitive answers over the N
    classification questions only; ``"all"`` counts over all N+G.
    """
    n = answers.definitive_counts(scope)
    n_max = answers.N if scope == "classification" else answers.responses.shape[1]
    table = np.array([_safe_weight(scheme, k, n_max) for k in range(n_max + 1)])
    return table[n]


def bit_margins(votes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.asarray(weights, dtype=float) @ np.asarray(votes, dtype=float)


def tie_tolerance(weights, votes=None) -> float:
    """TIE_RTOL times the largest weight, counting only workers who voted somewhere."""
    w = np.abs(np.asarray(weights, dtype=float))
    if votes is not None:
        w = w[np.any(np.asarray(votes) != 0, axis=1)]
    return TIE_RTOL * (w.max() if w.size else 0.0)


def tie_coin(tie_seed: int, bit: int) -> int:
    """Fair coin for `bit`, a pure function of (tie_seed, bit)."""
    state = np.random.SeedSequence(int(tie_seed), spawn_key=(int(bit),)).generate_state(1)[0]
    return int(state & 1)


def tie_resolution_policy(margins, tie_seed: int, tol: float = 0.0) -> dict[int, int]:
    """Coins for the tied bits only; untied bits consume nothing."""
    margins = np.asarray(margins, dtype=float)
    return {int(i): tie_coin(tie_seed, int(i)) for i in np.flatnonzero(np.abs(margins) <= tol)}


def decide_bits(margins, tie_seed: int, tol: float) -> np.ndarray:
    margins = np.asarray(margins, dtype=float)
    bits = (margins > 0).astype(np.int8)
    for i, coin in tie_resolution_policy(margins, tie_seed, tol).items():
        bits[i] = coin
    return bits


@dataclass
class ClassDecision:
    word: np.ndarray
    class_index: int
    per_bit_margin: np.ndarray

    def to_dict(self):
        return {"word": [int(b) for b in self.word], "class_index": self.class_index,
                "margins": [float(v) for v in self.per_bit_margin]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def word_to_index(word) -> int:
    """Binary encoding with the first question as the most significant bit."""
    idx = 0
    for b in word:
        idx = (idx << 1) | int(b)
    return idx


def index_to_word(idx: int, N: int) -> np.ndarray:
    return np.array([(idx >> (N - 1 - i)) & 1 for i in range(N)], dtype=np.int8)


def fuse_bit(answers: AnswerMatrix, weights, bit_index: int, tie_seed: int) -> int:
    votes = vote_signs(answers)
    if not 0 <= bit_index < votes.shape[1]:
        raise IndexError(f"bit_index {bit_index} outside [0, {votes.shape[1]})")
    margin = float(np.asarray(weights, dtype=float) @ votes[:, bit_index])
    if abs(margin) <= tie_tolerance(weights, votes):
        return tie_coin(tie_seed, bit_index)
    return int(margin > 0)


def fuse_word(answers: AnswerMatrix, weights, tie_seed: int) -> ClassDecision:
    """Bit-by-bit weighted vote."""
    votes = vote_signs(answers)
    margins = bit_margins(votes, weights)
    word = decide_bits(margins, tie_seed, tie_tolerance(weights, votes))
    return ClassDecision(word=word, class_index=word_to_index(word), per_bit_margin=margins)


def candidate_scores(answers: AnswerMatrix, weights) -> np.ndarray:
    """Score of each of the 2**N classes: total weight of workers consistent with it."""
    resp = answers.classification_responses()
    N = resp.shape[1]
    classes = np.array([index_to_word(i, N) for i in range(2**N)], dtype=np.int8)
    consistent = ((resp[:, None, :] == SKIP) | (resp[:, None, :] == classes[None, :, :])).all(axis=2)
    return np.asarray(weights, dtype=float) @ consistent


def classify(answers: AnswerMatrix, weights, tie_seed: int) -> ClassDecision:
    """Argmax of the class scores.

    Several maximal classes are settled by the bitwise decision: its word is
    returned when it is among them, otherwise the maximal class nearest to it
    in Hamming distance (lowest index first).
    """
    scores = candidate_scores(answers, weights)
    tol = tie_tolerance(weights, vote_signs(answers))
    best = np.flatnonzero(scores >= scores.max() - tol)
    bitwise = fuse_word(answers, weights, tie_seed)
    if len(best) == 1:
        idx = int(best[0])
    else:
        N = len(bitwise.word)
        dist = [int(np.sum(index_to_word(int(c), N) != bitwise.word)) for c in best]
        idx = int(best[int(np.argmin(dist))])
    word = index_to_word(idx, len(bitwise.word))
    return ClassDecision(word=word, class_index=idx, per_bit_margin=bitwise.per_bit_margin)
