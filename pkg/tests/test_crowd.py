import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptcrowd.behavior import PaymentConfig, PTParams
from ptcrowd.crowd import (
    SKIP,
    AnswerMatrix,
    ConfidenceModel,
    CrowdConfig,
    PTPopulation,
    SkipCorrectModel,
    Uniform,
    WorkerKind,
    crowd_stats,
    generate_crowd,
    mu_to_fr,
    parse_model,
    run_session,
)


def skip_crowd(W=50, M0=7, MN=7, N=3, G=3, f_p=Uniform(0.3, 0.9), f_r=Uniform(0.5, 1.0), redraw=False):
    return CrowdConfig(W=W, M0=M0, MN=MN, N=N, G=G, payment=PaymentConfig(0.6, G),
                       model=SkipCorrectModel(f_p, f_r), redraw_per_question=redraw)


def conf_crowd(W=30, pt=None, T=0.6):
    return CrowdConfig(W=W, M0=0, MN=0, N=3, G=3, payment=PaymentConfig(T, 3),
                       model=ConfidenceModel(0.5, Uniform(0.7, 0.9)),
                       pt=PTPopulation.fixed(pt or PTParams.rational()))


class TestDistributions:
    def test_uniform_parse_forms(self):
        assert Uniform.parse(0.4) == Uniform(0.4, 0.4)
        assert Uniform.parse({"uniform": [0.2, 0.8]}) == Uniform(0.2, 0.8)
        assert Uniform.parse({"low": 0.1, "high": 0.3}) == Uniform(0.1, 0.3)
        with pytest.raises(ValueError):
            Uniform.parse({"normal": [0, 1]})
        with pytest.raises(ValueError):
            Uniform(0.9, 0.1)

    def test_mu_to_fr(self):
        assert mu_to_fr(0.75) == Uniform(0.5, 1.0)
        assert mu_to_fr(0.5) == Uniform(0.0, 1.0)
        eps = 1e-3
        fr = mu_to_fr(1 - eps)
        assert fr.low == pytest.approx(1 - 2 * eps) and fr.high == 1.0
        for bad in (0.49, 1.0):
            with pytest.raises(ValueError):
                mu_to_fr(bad)

    @given(st.floats(0.5, 0.999))
    def test_mu_to_fr_mean(self, mu):
        assert mu_to_fr(mu).mean == pytest.approx(mu, abs=1e-12)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            SkipCorrectModel(Uniform(-0.1, 0.5), Uniform(0.5, 1.0))
        with pytest.raises(ValueError):
            SkipCorrectModel(Uniform(0.2, 0.8), Uniform(0.0, 0.6))  # mean below 1/2
        with pytest.raises(ValueError):
            ConfidenceModel(0.4, Uniform(0.7, 0.9))
        with pytest.raises(ValueError):
            parse_model({"kind": "beta"})


class TestCrowdStats:
    def test_skip_correct_means(self):
        assert crowd_stats(SkipCorrectModel(Uniform(0.3, 0.9), mu_to_fr(0.75)), 0.6, PTParams()) == (
            pytest.approx(0.6), pytest.approx(0.75))
        # U(0.2, 0.8) has mean 0.5
        m, _ = crowd_stats(SkipCorrectModel(Uniform(0.2, 0.8), mu_to_fr(0.75)), 0.6, PTParams())
        assert m == pytest.approx(0.5)

    def test_lower_support_threshold(self):
        m, mu = crowd_stats(ConfidenceModel(0.5, Uniform(0.9, 0.9)), 0.5, PTParams.rational())
        assert m == pytest.approx(0.0, abs=1e-12)
        assert mu == pytest.approx(0.7, abs=1e-12)

    def test_matches_sampling(self):
        rng = np.random.default_rng(20240611)
        n = 10**7
        x = rng.uniform(0.7, 0.9, n)
        t = rng.uniform(0.5, x)
        answered = t > 0.6
        m, mu = crowd_stats(ConfidenceModel(0.5, Uniform(0.7, 0.9)), 0.6, PTParams.rational())
        assert m == pytest.approx(1 - answered.mean(), abs=1e-3)
        assert mu == pytest.approx(t[answered].mean(), abs=1e-3)
        m_u, mu_u = crowd_stats(ConfidenceModel(0.5, Uniform(0.7, 0.9)), 0.6, PTParams.rational(),
                                reading="unconditional")
        assert m_u == pytest.approx(m) and mu_u == pytest.approx(1 - m)

    def test_pt_raises_skip_rate(self):
        model = ConfidenceModel(0.5, Uniform(0.7, 0.9))
        m_r, _ = crowd_stats(model, 0.6, PTParams.rational())
        m_pt, _ = crowd_stats(model, 0.6, PTParams.tversky_kahneman())
        assert m_pt > m_r


class TestConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            skip_crowd(W=10, M0=6, MN=6)
        with pytest.raises(ValueError):
            CrowdConfig(W=10, M0=0, MN=0, N=3, G=2, payment=PaymentConfig(0.6, 3),
                        model=SkipCorrectModel(Uniform(0.3, 0.9), Uniform(0.5, 1.0)))
        cfg = skip_crowd()
        assert cfg.M == 14 and cfg.honest == 36

    def test_round_trip_and_digest(self):
        for cfg in (skip_crowd(redraw=True), conf_crowd(pt=PTParams.tversky_kahneman())):
            back = CrowdConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
            assert back == cfg
            assert back.digest() == cfg.digest()
        assert skip_crowd().digest() != skip_crowd(W=51).digest()


class TestGenerateCrowd:
    def test_counts_exact(self):
        inst = generate_crowd(skip_crowd(), 11)
        assert inst.counts() == {"HONEST": 36, "TYPE_I": 7, "TYPE_II": 7}

    def test_deterministic(self):
        a, b = generate_crowd(skip_crowd(), 5), generate_crowd(skip_crowd(), 5)
        np.testing.assert_array_equal(a.kind, b.kind)
        np.testing.assert_array_equal(a.p, b.p)

    def test_seeds_differ(self):
        first = generate_crowd(skip_crowd(), 0)
        same = 0
        for s in range(1, 101):
            other = generate_crowd(skip_crowd(), s)
            same += np.array_equal(np.sort(first.p[~np.isnan(first.p)]), np.sort(other.p[~np.isnan(other.p)]))
        assert same == 0

    def test_confidence_thresholds(self):
        inst = generate_crowd(conf_crowd(pt=PTParams.tversky_kahneman()), 3)
        assert np.allclose(inst.t_star, 0.8251078723125804)


class TestRunSession:
    def test_only_type_i(self):
        cfg = skip_crowd(W=8, M0=8, MN=0)
        ans = run_session(generate_crowd(cfg, 1), cfg, 2)
        assert np.all(ans.responses == SKIP)

    def test_only_type_ii(self):
        cfg = skip_crowd(W=1000, M0=0, MN=1000, N=50, G=50)
        ans = run_session(generate_crowd(cfg, 1), cfg, 2)
        assert not np.any(ans.responses == SKIP)
        rate = np.mean(ans.responses == ans.truth[None, :])
        assert rate == pytest.approx(0.5, abs=4 * 0.5 / np.sqrt(ans.responses.size))

    @pytest.mark.parametrize("redraw", [False, True])
    def test_honest_skip_rate(self, redraw):
        cfg = skip_crowd(W=2000, M0=0, MN=0, N=25, G=25, redraw=redraw)
        ans = run_session(generate_crowd(cfg, 4), cfg, 5)
        assert np.mean(ans.responses == SKIP) == pytest.approx(0.6, abs=0.01)

    def test_honest_correctness(self):
        cfg = skip_crowd(W=2000, M0=0, MN=0, N=25, G=25, f_r=mu_to_fr(0.8), redraw=True)
        ans = run_session(generate_crowd(cfg, 4), cfg, 5)
        answered = ans.responses != SKIP
        right = (ans.responses == ans.truth[None, :]) & answered
        assert right.sum() / answered.sum() == pytest.approx(0.8, abs=0.01)

    def test_definitive_count_mean(self):
        # N(1 - m) within 3 standard errors over many honest rows
        cfg = skip_crowd(W=5000, M0=0, MN=0)
        ans = run_session(generate_crowd(cfg, 8), cfg, 9)
        n = ans.definitive_counts("classification")
        assert abs(n.mean() - 3 * 0.4) <= 3 * n.std(ddof=1) / np.sqrt(len(n))

    def test_reproducible(self):
        cfg = skip_crowd(redraw=True)
        a = run_session(generate_crowd(cfg, 1), cfg, 77)
        b = run_session(generate_crowd(cfg, 1), cfg, 77)
        assert a.to_json() == b.to_json()

    def test_gold_layout(self):
        cfg = skip_crowd()
        ans = run_session(generate_crowd(cfg, 1), cfg, 7)
        assert ans.N == 3 and ans.G == 3 and ans.responses.shape == (50, 6)

    def test_without_reject_option(self):
        cfg = skip_crowd()
        crowd = generate_crowd(cfg, 1)
        a = run_session(crowd, cfg, 7, reject_option=True)
        b = run_session(crowd, cfg, 7, reject_option=False)
        assert not np.any(b.responses == SKIP)
        kept = a.responses != SKIP
        np.testing.assert_array_equal(a.responses[kept], b.responses[kept])
        np.testing.assert_array_equal(a.truth, b.truth)

    def test_confidence_session_matches_stats(self):
        cfg = conf_crowd(W=4000)
        ans = run_session(generate_crowd(cfg, 2), cfg, 3)
        m, mu = crowd_stats(cfg.model, 0.6, PTParams.rational())
        answered = ans.responses != SKIP
        right = (ans.responses == ans.truth[None, :]) & answered
        assert 1 - answered.mean() == pytest.approx(m, abs=0.01)
        assert right.sum() / answered.sum() == pytest.approx(mu, abs=0.01)


class TestAnswerMatrixIO:
    def matrix(self):
        cfg = skip_crowd(W=12, M0=2, MN=3)
        return run_session(generate_crowd(cfg, 1), cfg, 5)

    def test_json_round_trip(self):
        ans = self.matrix()
        back = AnswerMatrix.from_json(ans.to_json())
        np.testing.assert_array_equal(back.responses, ans.responses)
        np.testing.assert_array_equal(back.truth, ans.truth)
        np.testing.assert_array_equal(back.is_gold, ans.is_gold)
        np.testing.assert_array_equal(back.worker_kind, ans.worker_kind)
        assert back.seed == 5 and back.config_digest == ans.config_digest

    def test_json_fields(self):
        d = json.loads(self.matrix().to_json())
        assert set(d) >= {"responses", "truth", "column_kind", "seed", "config_digest"}
        assert all(set(row) <= {"0", "1", "s"} for row in d["responses"])

    def test_csv_round_trip(self):
        ans = self.matrix()
        text = ans.to_csv()
        assert "\r" not in text
        back = AnswerMatrix.from_csv(text)
        np.testing.assert_array_equal(back.responses, ans.responses)
        np.testing.assert_array_equal(back.is_gold, ans.is_gold)
        np.testing.assert_array_equal(back.truth, ans.truth)

    def test_rejects_bad_symbols(self):
        d = self.matrix().to_dict()
        d["responses"][0] = "x" * len(d["truth"])
        with pytest.raises(ValueError):
            AnswerMatrix.from_dict(d)

    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(1, 4), st.integers(0, 3), st.data())
    def test_round_trip_property(self, W, N, G, data):
        resp = np.array(data.draw(st.lists(st.lists(st.sampled_from([0, 1, SKIP]), min_size=N + G,
                                                    max_size=N + G), min_size=W, max_size=W)))
        is_gold = np.array([False] * N + [True] * G)
        truth = np.array(data.draw(st.lists(st.integers(0, 1), min_size=N + G, max_size=N + G)))
        ans = AnswerMatrix(resp, truth, is_gold)
        for back in (AnswerMatrix.from_json(ans.to_json()), AnswerMatrix.from_csv(ans.to_csv())):
            np.testing.assert_array_equal(back.responses, ans.responses)
            assert back.N == N and back.G == G


def test_worker_kind_not_needed_downstream():
    from ptcrowd.fusion import ASPT, assign_weights, fuse_word
    from ptcrowd.inference import estimate_crowd

    cfg = skip_crowd()
    ans = run_session(generate_crowd(cfg, 3), cfg, 4)
    shuffled = AnswerMatrix(ans.responses, ans.truth, ans.is_gold,
                            worker_kind=np.random.default_rng(0).permutation(ans.worker_kind))
    stripped = AnswerMatrix(ans.responses, ans.truth, ans.is_gold)
    results = []
    for a in (ans, shuffled, stripped):
        est = estimate_crowd(a)
        w = assign_weights(a, ASPT(50, est.M0_hat + est.MN_hat, est.MN_hat, est.mu_hat, est.m_hat, 3))
        results.append((est.to_json(), fuse_word(a, w, 1).class_index))
    assert results[0] == results[1] == results[2]
    assert WorkerKind.TYPE_II in ans.worker_kind
