import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptcrowd.behavior import (
    Action,
    GoldOutcome,
    PaymentConfig,
    PTParams,
    SpammerType,
    best_skip_count,
    confidence_threshold,
    honest_decision,
    payment,
    probability_weight,
    spammer_expected_reward,
    spammer_expected_reward_bruteforce,
    spammer_strategy_pt,
    spammer_strategy_rational,
    subjective_payoff,
    threshold_odds,
    value_function,
)

TK = PTParams.tversky_kahneman()
RATIONAL = PTParams.rational()

pt_params = st.builds(
    PTParams,
    alpha=st.floats(0.3, 1.5),
    beta=st.floats(0.2, 5.0),
    delta=st.floats(0.3, 1.5),
)


class TestParams:
    def test_bounds_enforced(self):
        for bad in [dict(alpha=0.0), dict(beta=-1.0), dict(delta=2.5), dict(beta=float("nan"))]:
            with pytest.raises(ValueError):
                PTParams(**bad)

    def test_presets(self):
        assert RATIONAL.is_rational
        assert (TK.alpha, TK.beta, TK.delta) == (0.69, 2.25, 0.88)
        assert not TK.is_rational


class TestValueFunction:
    def test_reference_point(self):
        assert value_function(0.0, TK) == 0.0

    def test_unit_loss(self):
        assert value_function(-1.0, TK) == pytest.approx(-2.25)

    def test_loss_of_two(self):
        assert value_function(-2.0, TK) == pytest.approx(-2.25 * 2**0.88, rel=1e-12)
        assert value_function(-2.0, TK) == pytest.approx(-4.141, abs=5e-4)

    @given(x=st.floats(1e-3, 100.0), pt=pt_params)
    def test_loss_scaled_by_beta(self, x, pt):
        assert value_function(-x, pt) == pytest.approx(-pt.beta * value_function(x, pt), rel=1e-12)

    def test_shape_by_finite_differences(self):
        x = np.linspace(0.1, 5.0, 50)
        gains = value_function(x, TK)
        losses = value_function(-x[::-1], TK)
        assert np.all(np.diff(gains) > 0) and np.all(np.diff(losses) > 0)
        assert np.all(np.diff(gains, 2) < 0)  # concave on gains
        assert np.all(np.diff(losses, 2) > 0)  # convex on losses


class TestProbabilityWeight:
    def test_identity_at_alpha_one(self):
        assert probability_weight(0.3, RATIONAL) == pytest.approx(0.3)

    def test_endpoints(self):
        pt = PTParams(alpha=0.69)
        assert probability_weight(0.0, pt) == 0.0
        assert probability_weight(1.0, pt) == 1.0

    def test_numeric_value(self):
        x, a = 0.1, 0.69
        expected = x**a / (x**a + (1 - x) ** a) ** (1 / a)
        assert probability_weight(x, PTParams(alpha=a)) == pytest.approx(expected, rel=1e-14)
        assert probability_weight(x, PTParams(alpha=a)) == pytest.approx(0.170, abs=5e-4)

    def test_inverse_s_crossover(self):
        pt = PTParams(alpha=0.69)
        assert probability_weight(0.05, pt) > 0.05
        assert probability_weight(0.95, pt) < 0.95

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            probability_weight(1.2, TK)
        with pytest.raises(ValueError):
            probability_weight(np.array([0.5, -0.1]), TK)


class TestThreshold:
    def test_rational_identity(self):
        for T in np.linspace(0.05, 0.95, 19):
            assert confidence_threshold(T, RATIONAL) == pytest.approx(T, abs=1e-15)

    def test_tk_value(self):
        eta = 3.375 ** (0.88 / 0.69)
        assert threshold_odds(0.6, TK) == pytest.approx(eta, rel=1e-14)
        assert confidence_threshold(0.6, TK) == pytest.approx(eta / (1 + eta), rel=1e-14)
        assert confidence_threshold(0.6, TK) == pytest.approx(0.825, abs=5e-4)

    @given(alpha=st.floats(0.3, 2.0), delta=st.floats(0.3, 2.0))
    def test_half_with_unit_beta(self, alpha, delta):
        assert confidence_threshold(0.5, PTParams(alpha, 1.0, delta)) == pytest.approx(0.5, abs=1e-14)

    def test_monotonicity_grid(self):
        # under beta*T >= 1 - T: nondecreasing in beta and delta, nonincreasing in alpha
        grid = np.linspace(0.5, 2.0, 7)
        for T in (0.5, 0.6, 0.75, 0.9):
            for a, b, d in itertools.product(grid, np.linspace(1.0, 4.0, 7), grid):
                if b * T < 1 - T:
                    continue
                base = confidence_threshold(T, PTParams(a, b, d))
                assert confidence_threshold(T, PTParams(a, b + 0.5, d)) >= base - 1e-15
                assert confidence_threshold(T, PTParams(a, b, min(d + 0.25, 2.0))) >= base - 1e-15
                assert confidence_threshold(T, PTParams(min(a + 0.25, 2.0), b, d)) <= base + 1e-15

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            confidence_threshold(1.0, TK)


class TestSubjectivePayoff:
    def test_zero_at_threshold(self):
        for pt in (RATIONAL, TK, PTParams(0.5, 3.0, 1.3)):
            t = confidence_threshold(0.6, pt)
            assert subjective_payoff(t, 1.0, 0.6, pt) == pytest.approx(0.0, abs=1e-12)

    def test_sure_gain(self):
        assert subjective_payoff(1.0, 1.0, 0.6, RATIONAL) == pytest.approx(2 / 3)

    def test_sure_loss(self):
        assert subjective_payoff(0.0, 1.0, 0.6, RATIONAL) == pytest.approx(-1.0)

    @settings(max_examples=300)
    @given(t=st.floats(0.0, 1.0), Z=st.floats(1e-3, 50.0), T=st.floats(0.05, 0.95), pt=pt_params)
    def test_decision_matches_payoff_sign(self, t, Z, T, pt):
        if abs(t - confidence_threshold(T, pt)) < 1e-9:
            return
        answer = honest_decision(t, T, pt) is Action.ANSWER
        assert answer == (subjective_payoff(t, Z, T, pt) > 0)


class TestHonestDecision:
    def test_examples(self):
        assert honest_decision(0.9, 0.6, RATIONAL) is Action.ANSWER
        assert honest_decision(0.7, 0.6, TK) is Action.SKIP
        assert honest_decision(0.6, 0.6, RATIONAL) is Action.SKIP


class TestSpammers:
    def test_rational_rule(self):
        assert spammer_strategy_rational(0.4) is SpammerType.TYPE_II
        assert spammer_strategy_rational(0.6) is SpammerType.TYPE_I
        assert spammer_strategy_rational(0.5) is SpammerType.TYPE_I

    def test_pt_rule(self):
        # 1/(beta+1) = 0.3077 for beta = 2.25
        assert spammer_strategy_pt(0.6, TK) is SpammerType.TYPE_I
        assert spammer_strategy_pt(0.3, TK) is SpammerType.TYPE_II
        assert spammer_strategy_pt(0.3, RATIONAL) is SpammerType.TYPE_II
        assert spammer_strategy_pt(0.5, RATIONAL) is SpammerType.TYPE_I

    @given(T=st.floats(0.01, 0.99), pt=pt_params)
    def test_pt_rule_is_honest_decision_at_half(self, T, pt):
        if abs(T - 1 / (pt.beta + 1)) < 1e-9:
            return
        answers = honest_decision(0.5, T, pt) is Action.ANSWER
        assert answers == (spammer_strategy_pt(T, pt) is SpammerType.TYPE_II)

    def test_pt_reduces_to_rational(self):
        for T in np.linspace(0.01, 0.99, 99):
            if abs(T - 0.5) < 1e-9:
                continue
            assert spammer_strategy_pt(T, RATIONAL) is spammer_strategy_rational(T)

    def test_reward_examples(self):
        cfg = PaymentConfig(0.6, 3)
        assert spammer_expected_reward(3, cfg) == pytest.approx(0.216)
        assert spammer_expected_reward(0, cfg) == pytest.approx(0.125)
        cfg = PaymentConfig(0.7, 4, mu_max=2.0, mu_min=0.5)
        assert spammer_expected_reward(4, cfg) == pytest.approx(1.5 * 0.7**4 + 0.5)

    def test_reward_out_of_range(self):
        with pytest.raises(ValueError):
            spammer_expected_reward(4, PaymentConfig(0.6, 3))

    @given(T=st.floats(0.05, 0.95), G=st.integers(1, 5), lo=st.floats(0.0, 1.0), span=st.floats(0.1, 3.0))
    def test_closed_form_equals_bruteforce(self, T, G, lo, span):
        cfg = PaymentConfig(T, G, mu_max=lo + span, mu_min=lo)
        for g in range(G + 1):
            assert spammer_expected_reward(g, cfg) == pytest.approx(
                spammer_expected_reward_bruteforce(g, cfg), rel=1e-12, abs=1e-12)

    def test_reward_monotonicity(self):
        for G in range(1, 6):
            up = [spammer_expected_reward(g, PaymentConfig(0.7, G)) for g in range(G + 1)]
            down = [spammer_expected_reward(g, PaymentConfig(0.3, G)) for g in range(G + 1)]
            flat = [spammer_expected_reward(g, PaymentConfig(0.5, G)) for g in range(G + 1)]
            assert np.all(np.diff(up) > 0) and np.all(np.diff(down) < 0)
            assert np.ptp(flat) < 1e-15

    def test_best_skip_count_all_or_nothing(self):
        for G in range(1, 6):
            assert best_skip_count(PaymentConfig(0.4, G)) == 0
            assert best_skip_count(PaymentConfig(0.6, G)) == G
            assert best_skip_count(PaymentConfig(0.5, G)) == G


class TestPayment:
    cfg = PaymentConfig(0.6, 3)

    def test_wrong_gives_floor(self):
        cfg = PaymentConfig(0.6, 3, mu_max=2.0, mu_min=0.3)
        for seq in itertools.product(GoldOutcome, repeat=3):
            if GoldOutcome.WRONG in seq:
                assert payment(seq, cfg) == pytest.approx(0.3)

    def test_all_correct_gives_max(self):
        assert payment([GoldOutcome.CORRECT] * 3, self.cfg) == pytest.approx(1.0)

    def test_all_skipped(self):
        assert payment([GoldOutcome.SKIPPED] * 3, self.cfg) == pytest.approx(0.216)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            payment([GoldOutcome.CORRECT], self.cfg)

    @given(st.lists(st.sampled_from(list(GoldOutcome)), min_size=4, max_size=4), st.randoms())
    def test_permutation_invariant_and_bounded(self, seq, rnd):
        cfg = PaymentConfig(0.55, 4, mu_max=1.5, mu_min=0.2)
        shuffled = list(seq)
        rnd.shuffle(shuffled)
        assert payment(seq, cfg) == pytest.approx(payment(shuffled, cfg), rel=1e-14)
        assert 0.2 - 1e-12 <= payment(seq, cfg) <= 1.5 + 1e-12
