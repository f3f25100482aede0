"""Prospect-theory primitives, the gold-question payment rule and worker strategies.

Honest workers decide per question whether to answer or skip by comparing
their confidence with a distorted threshold ``t*``. Spammers guess at random,
so their only choice is how many questions to skip; under the multiplicative
payment rule the optimum is always all-or-nothing.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Accepted ranges for the behavioural coefficients (exclusive lower, inclusive upper).
# Larger exponents make the power terms numerically fragile; widen here if needed.
PT_BOUNDS = {
    "alpha": (0.0, 2.0),
    "beta": (0.0, 10.0),
    "delta": (0.0, 2.0),
}

# Absolute tolerance used when comparing a confidence or a threshold to a boundary.
THRESHOLD_TOL = 1e-12


@dataclass(frozen=True)
class PTParams:
    """Behavioural triple: probability distortion, loss aversion, diminishing marginal utility."""

    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        for name, (lo, hi) in PT_BOUNDS.items():
            value = getattr(self, name)
            if not (math.isfinite(value) and lo < value <= hi):
                raise ValueError(f"{name}={value!r} outside ({lo}, {hi}]")

    @classmethod
    def rational(cls) -> "PTParams":
        return cls(1.0, 1.0, 1.0)

    @classmethod
    def tversky_kahneman(cls) -> "PTParams":
        """Population means reported by Tversky and Kahneman (1992)."""
        return cls(0.69, 2.25, 0.88)

    @property
    def is_rational(self) -> bool:
        return self.alpha == self.beta == self.delta == 1.0


class GoldOutcome(enum.Enum):
    WRONG = -1
    SKIPPED = 0
    CORRECT = 1


class SpammerType(enum.Enum):
    TYPE_I = "I"  # skips every question
    TYPE_II = "II"  # answers every question with a coin flip


class Action(enum.Enum):
    ANSWER = "answer"
    SKIP = "skip"


@dataclass(frozen=True)
class PaymentConfig:
    """Parameters of the multiplicative gold-question payment rule."""

    threshold: float
    gold_count: int
    mu_max: float = 1.0
    mu_min: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.gold_count < 0 or int(self.gold_count) != self.gold_count:
            raise ValueError(f"gold_count must be a non-negative integer, got {self.gold_count}")
        if not self.mu_max > self.mu_min >= 0.0:
            raise ValueError("need mu_max > mu_min >= 0")

    @property
    def kappa(self) -> float:
        return (self.mu_max - self.mu_min) * self.threshold**self.gold_count

    def multiplier(self, outcome: GoldOutcome) -> float:
        if outcome is GoldOutcome.WRONG:
            return 0.0
        if outcome is GoldOutcome.SKIPPED:
            return 1.0
        return 1.0 / self.threshold


def value_function(x, pt: PTParams):
    """Subjective utility of a gain (x >= 0) or a loss (x < 0)."""
    x = np.asarray(x, dtype=float)
    gain = np.abs(x) ** pt.delta
    out = np.where(x >= 0, gain, -pt.beta * gain)
    return float(out) if out.ndim == 0 else out


def probability_weight(x, pt: PTParams):
    """Inverse-S distortion of a probability; fixes 0 and 1 and is the identity at alpha=1."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("probability_weight requires 0 <= x <= 1")
    a = pt.alpha
    num = x**a
    out = num / (num + (1.0 - x) ** a) ** (1.0 / a)
    return float(out) if out.ndim == 0 else out


def _check_threshold(T: float) -> None:
    if not 0.0 < T < 1.0:
        raise ValueError(f"threshold T must lie in (0, 1), got {T}")


def threshold_odds(T: float, pt: PTParams) -> float:
    """eta = (beta*T/(1-T))**(delta/alpha): the odds a worker needs before answering."""
    _check_threshold(T)
    return (pt.beta * T / (1.0 - T)) ** (pt.delta / pt.alpha)


def confidence_threshold(T: float, pt: PTParams) -> float:
    """Effective confidence threshold t* of a worker with behaviour `pt` under payment threshold T.

    For rational workers t* == T.
    """
    eta = threshold_odds(T, pt)
    return eta / (1.0 + eta)


def subjective_payoff(t: float, Z: float, T: float, pt: PTParams) -> float:
    """Prospect value of answering (relative to skipping, which is worth 0).

    Answering multiplies the current variable reward Z by 1/T with probability t
    and wipes it out otherwise. Loss aversion is applied to the size of the loss
    before curvature, ``-(beta*Z)**delta``, which makes the zero crossing fall
    exactly at ``confidence_threshold(T, pt)``; with ``-beta*Z**delta`` the
    crossing would move to ``beta**(1/alpha) * (T/(1-T))**(delta/alpha)``.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("confidence t must lie in [0, 1]")
    if not Z > 0.0:
        raise ValueError("expected variable reward Z must be positive")
    _check_threshold(T)
    gain = value_function(Z * (1.0 / T - 1.0), pt)
    loss = -((pt.beta * Z) ** pt.delta)
    return probability_weight(t, pt) * gain + probability_weight(1.0 - t, pt) * loss


def honest_decision(t: float, T: float, pt: PTParams) -> Action:
    """Answer iff t > t*; a tie (within THRESHOLD_TOL) skips."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("confidence t must lie in [0, 1]")
    if t - confidence_threshold(T, pt) > THRESHOLD_TOL:
        return Action.ANSWER
    return Action.SKIP


def spammer_strategy_rational(T: float) -> SpammerType:
    """Type II below T = 1/2, Type I otherwise (the reward is flat in g at exactly 1/2)."""
    _check_threshold(T)
    return SpammerType.TYPE_II if T < 0.5 - THRESHOLD_TOL else SpammerType.TYPE_I


def spammer_strategy_pt(T: float, pt: PTParams) -> SpammerType:
    """A guessing spammer has confidence 1/2, which clears t* exactly when T < 1/(beta+1).

    This is honest_decision at t = 1/2; with beta = 1 it is the rational rule.
    """
    _check_threshold(T)
    return SpammerType.TYPE_II if 1.0 / (pt.beta + 1.0) - T > THRESHOLD_TOL else SpammerType.TYPE_I


def payment(outcomes: Sequence[GoldOutcome], cfg: PaymentConfig) -> float:
    if len(outcomes) != cfg.gold_count:
        raise ValueError(f"expected {cfg.gold_count} gold outcomes, got {len(outcomes)}")
    prod = 1.0
    for o in outcomes:
        prod *= cfg.multiplier(GoldOutcome(o))
    return cfg.kappa * prod + cfg.mu_min


def spammer_expected_reward(g: int, cfg: PaymentConfig) -> float:
    """Expected payment of a spammer that skips g gold questions and guesses the rest."""
    G = cfg.gold_count
    if not 0 <= g <= G:
        raise ValueError(f"g must lie in [0, {G}], got {g}")
    return (cfg.mu_max - cfg.mu_min) * 0.5**G * (2.0 * cfg.threshold) ** g + cfg.mu_min


def spammer_expected_reward_bruteforce(g: int, cfg: PaymentConfig) -> float:
    """Same quantity by summing over every gold-outcome sequence (3**G terms).

    The spammer skips the first g gold questions and guesses the others;
    each guess is right or wrong with probability 1/2.
    """
    G = cfg.gold_count
    if not 0 <= g <= G:
        raise ValueError(f"g must lie in [0, {G}], got {g}")
    total = 0.0
    for seq in itertools.product(GoldOutcome, repeat=G):
        prob = 1.0
        for j, o in enumerate(seq):
            if j < g:
                prob *= 1.0 if o is GoldOutcome.SKIPPED else 0.0
            else:
                prob *= 0.0 if o is GoldOutcome.SKIPPED else 0.5
            if prob == 0.0:
                break
        if prob:
            total += prob * payment(seq, cfg)
    return total


def best_skip_count(cfg: PaymentConfig) -> int:
    """argmax over g of the expected spammer reward; ties go to the largest g (skip)."""
    rewards = np.array([spammer_expected_reward(g, cfg) for g in range(cfg.gold_count + 1)])
    best = rewards.max()
    return int(np.flatnonzero(rewards >= best - THRESHOLD_TOL * max(1.0, abs(best)))[-1])
