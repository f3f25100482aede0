"""Experiment presets and runners behind the command line.

Every trial draws its randomness from ``SeedSequence(master_seed,
spawn_key=(point_index, trial))``, split into crowd, session and tie-breaking
streams, so any row can be reproduced on its own and trials can be evaluated
in any order.
"""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import analytics
from .behavior import PaymentConfig, PTParams, confidence_threshold
from .crowd import (ConfidenceModel, CrowdConfig, PTPopulation, SkipCorrectModel, Uniform,
                    crowd_stats, generate_crowd, mu_to_fr, run_session)
from .fusion import (ASPT, ExcludeAllDefinitive, HonestAssumed, MajorityVote, TIE_RTOL,
                     assign_weights, classify, fuse_word, word_to_index)
from .inference import (GOLD, AllWorkersExtreme, NoDefinitiveAnswers, estimate_m, estimate_mu,
                        estimate_spammer_counts, extreme_counts)

PRESETS = ("Fig2Thresholds", "Fig3PTSweep", "Fig4MuSweep", "Fig5SpammerSweep", "Fig6WSweep",
           "Table1Estimation", "Analytics", "Custom")
SCHEMES = ("aspt", "exclude_all_definitive", "honest_assumed", "majority_vote")
SWEEP_KEYS = {"W", "M0", "MN", "N", "G", "T", "mu", "spammers", "alpha", "beta", "delta", "m"}

# skip probability U(0.3, 0.9): mean 0.6, the value used throughout the spammer experiments
SPAMMER_FP = Uniform(0.3, 0.9)
# class-level argmax over candidate scores, or bit-by-bit weighted votes
FUSION_RULES = {"class": classify, "bitwise": fuse_word}


@dataclass
class ExperimentConfig:
    preset: str
    crowd: CrowdConfig
    schemes: list = field(default_factory=lambda: list(SCHEMES))
    trials: int = 10_000
    master_seed: int = 0
    sweep: list = field(default_factory=lambda: [{}])
    oracle_params: bool = False
    mu_method: str = GOLD
    fusion_rule: str = "class"

    def __post_init__(self):
        if self.fusion_rule not in FUSION_RULES:
            raise ValueError(f"unknown fusion rule {self.fusion_rule!r}; choose from {sorted(FUSION_RULES)}")
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if not self.sweep:
            raise ValueError("sweep grid is empty")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        for point in self.sweep:
            bad = set(point) - SWEEP_KEYS
            if bad:
                raise ValueError(f"unknown sweep parameters {sorted(bad)}")

    def to_dict(self):
        return {"preset": self.preset, "crowd": self.crowd.to_dict(), "schemes": list(self.schemes),
                "trials": self.trials, "master_seed": self.master_seed, "sweep": self.sweep,
                "oracle_params": self.oracle_params, "mu_method": self.mu_method,
                "fusion_rule": self.fusion_rule}

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        d = dict(d)
        base = preset_config(d["preset"]) if d.get("preset") in PRESETS else None
        crowd = d.get("crowd")
        crowd = CrowdConfig.from_dict(crowd) if crowd is not None else base.crowd
        sweep = d.get("sweep", base.sweep if base else [{}])
        if isinstance(sweep, dict):  # {"param": name, "values": [...]}
            sweep = [{sweep["param"]: v} for v in sweep["values"]]
        return cls(preset=d["preset"], crowd=crowd,
                   schemes=list(d.get("schemes", base.schemes if base else SCHEMES)),
                   trials=int(d.get("trials", base.trials if base else 10_000)),
                   master_seed=int(d.get("master_seed", 0)), sweep=list(sweep),
                   oracle_params=bool(d.get("oracle_params", False)),
                   mu_method=d.get("mu_method", GOLD), fusion_rule=d.get("fusion_rule", "class"))


def spammer_crowd(W=50, M0=7, MN=7, mu=0.75, N=3, G=3, T=0.6) -> CrowdConfig:
    """Skip/correct crowd of the spammer experiments; p and r are redrawn per question."""
    return CrowdConfig(W=W, M0=M0, MN=MN, N=N, G=G, payment=PaymentConfig(T, G),
                       model=SkipCorrectModel(SPAMMER_FP, mu_to_fr(mu)), redraw_per_question=True)


def confidence_crowd(W=30, N=3, G=3, T=0.6, pt: PTParams | None = None) -> CrowdConfig:
    pop = PTPopulation.fixed(pt or PTParams.rational())
    return CrowdConfig(W=W, M0=0, MN=0, N=N, G=G, payment=PaymentConfig(T, G),
                       model=ConfidenceModel(0.5, Uniform(0.7, 0.9)), pt=pop)


def preset_config(name: str) -> ExperimentConfig:
    """Default configuration of each preset (10**4 trials for the figure sweeps)."""
    if name == "Fig2Thresholds":
        T = [round(0.5 + 0.025 * i, 3) for i in range(20)]
        triples = [(1.0, 1.0, 1.0), (0.69, 2.25, 0.88)]
        triples += [(0.69, b, 0.88) for b in (1.0, 1.5, 3.0)]
        triples += [(a, 2.25, 0.88) for a in (0.5, 0.8, 1.0)]
        sweep = [{"T": t, "alpha": a, "beta": b, "delta": d} for (a, b, d) in triples for t in T]
        return ExperimentConfig(name, confidence_crowd(), schemes=[], trials=1, sweep=sweep)
    if name == "Fig3PTSweep":
        sweep = [{"alpha": 1.0, "beta": 1.0, "delta": 1.0}]
        sweep += [{"alpha": 0.68, "beta": b, "delta": d}
                  for d in (0.7, 0.88, 1.0) for b in (1.0, 1.25, 1.5, 1.75, 2.0, 2.25)]
        sweep += [{"alpha": a, "beta": 2.25, "delta": d}
                  for d in (0.7, 0.88, 1.0) for a in (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)]
        return ExperimentConfig(name, confidence_crowd(), schemes=["aspt"], sweep=sweep)
    if name == "Fig4MuSweep":
        sweep = [{"mu": round(0.5 + 0.05 * i, 2)} for i in range(10)]
        return ExperimentConfig(name, spammer_crowd(), sweep=sweep)
    if name == "Fig5SpammerSweep":
        sweep = [{"spammers": k} for k in range(0, 22, 2)]
        return ExperimentConfig(name, spammer_crowd(), sweep=sweep)
    if name == "Fig6WSweep":
        sweep = [{"W": w} for w in (20, 30, 40, 50, 75, 100, 150, 200)]
        return ExperimentConfig(name, spammer_crowd(), sweep=sweep)
    if name == "Table1Estimation":
        sweep = [{"M0": a, "MN": b} for a in range(1, 20, 2) for b in range(1, 26, 2)]
        return ExperimentConfig(name, spammer_crowd(), schemes=[], trials=20, sweep=sweep)
    if name == "Analytics":
        sweep = [{"W": 10, "M0": 2, "MN": 2, "mu": 0.75, "m": 0.6, "N": 2},
                 {"W": 20, "M0": 4, "MN": 4, "mu": 0.75, "m": 0.6, "N": 2},
                 {"W": 40, "M0": 8, "MN": 8, "mu": 0.75, "m": 0.6, "N": 2},
                 {"W": 50, "M0": 7, "MN": 7, "mu": 0.75, "m": 0.6, "N": 3},
                 {"W": 500, "M0": 70, "MN": 70, "mu": 0.75, "m": 0.6, "N": 3}]
        return ExperimentConfig(name, spammer_crowd(), schemes=["aspt"], trials=100_000, sweep=sweep)
    if name == "Custom":
        return ExperimentConfig(name, spammer_crowd(), trials=1000)
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


def apply_point(base: CrowdConfig, point: dict) -> CrowdConfig:
    """Crowd configuration at one sweep point."""
    d = base.to_dict()
    for key in ("W", "M0", "MN", "N", "G"):
        if key in point:
            d[key] = int(point[key])
    if "spammers" in point:
        d["M0"] = d["MN"] = int(point["spammers"])
    if "T" in point:
        d["payment"]["threshold"] = float(point["T"])
    d["payment"]["gold_count"] = d["G"]
    if "mu" in point:
        if d["model"]["kind"] != "skip_correct":
            raise ValueError("sweeping mu needs the skip/correct crowd model")
        d["model"]["f_r"] = mu_to_fr(float(point["mu"])).to_dict()
    for key in ("alpha", "beta", "delta"):
        if key in point:
            d["pt"][key] = float(point[key])
    return CrowdConfig.from_dict(d)


@dataclass
class TrialEstimates:
    m: float
    mu: float
    M0: int
    MN: int


def estimate_in_loop(answers, mu_method: str = GOLD) -> TrialEstimates:
    """Crowd estimates from the responses alone, with a fallback when no worker
    mixes answers and skips (treat everyone as an uninformative honest worker)."""
    W_all, W_none = extreme_counts(answers)
    try:
        m_hat = estimate_m(answers)
    except AllWorkersExtreme:
        m_hat = float(np.clip(W_none / answers.W, 1e-6, 1 - 1e-6))
        return TrialEstimates(m_hat, 0.5, 0, 0)
    try:
        mu_hat = estimate_mu(answers, mu_method)
    except (NoDefinitiveAnswers, ValueError):
        mu_hat = 0.5
    M0, MN, _ = estimate_spammer_counts(W_all, W_none, answers.W, m_hat, answers.N, answers.G)
    return TrialEstimates(m_hat, mu_hat, M0, MN)


def oracle_estimates(cfg: CrowdConfig) -> TrialEstimates:
    m, mu = crowd_stats(cfg.model, cfg.payment.threshold, cfg.pt)
    return TrialEstimates(m, mu, cfg.M0, cfg.MN)


def build_scheme(name: str, est: TrialEstimates, W: int, N: int):
    if name == "aspt":
        return ASPT(W=W, M=est.M0 + est.MN, MN=est.MN, mu=est.mu, m=est.m, N=N)
    if name == "honest_assumed":
        return HonestAssumed(est.mu)
    if name == "exclude_all_definitive":
        return ExcludeAllDefinitive(est.mu)
    if name == "majority_vote":
        return MajorityVote()
    raise ValueError(f"unknown scheme {name!r}")


def trial_streams(master_seed: int, point_index: int, trial: int):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(point_index), int(trial)))
    crowd_ss, session_ss, tie_ss = ss.spawn(3)
    return crowd_ss, session_ss, int(tie_ss.generate_state(1, np.uint64)[0])


def run_trial(cfg: CrowdConfig, schemes, master_seed, point_index, trial,
              oracle: TrialEstimates | None = None, mu_method: str = GOLD, fusion_rule: str = "class") -> dict:
    """One session per scheme family; returns {scheme: 1 if the class is right}."""
    crowd_ss, session_ss, tie_seed = trial_streams(master_seed, point_index, trial)
    crowd = generate_crowd(cfg, crowd_ss)
    answers = run_session(crowd, cfg, session_ss, reject_option=True)
    truth = word_to_index(answers.classification_truth)
    est = oracle if oracle is not None else estimate_in_loop(answers, mu_method)
    fuse = FUSION_RULES[fusion_rule]
    out = {}
    for name in schemes:
        if name == "majority_vote":
            # same draws, collected without the skip option
            forced = run_session(crowd, cfg, session_ss, reject_option=False)
            w = np.ones(forced.W)
            out[name] = int(fuse(forced, w, tie_seed).class_index == truth)
            continue
        w = assign_weights(answers, build_scheme(name, est, cfg.W, cfg.N))
        out[name] = int(fuse(answers, w, tie_seed).class_index == truth)
    return out


@dataclass
class ResultRow:
    point: dict
    scheme: str
    pc: float
    se: float
    trials: int
    wall_time: float
    config_digest: str
    master_seed: int

    def as_dict(self):
        d = dict(self.point)
        d.update(scheme=self.scheme, pc=self.pc, se=self.se, trials=self.trials,
                 wall_time=round(self.wall_time, 4), config_digest=self.config_digest,
                 master_seed=self.master_seed)
        return d


def standard_error(pc: float, trials: int) -> float:
    return math.sqrt(max(pc * (1.0 - pc), 0.0) / trials)


def run_monte_carlo(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    for idx, point in enumerate(cfg.sweep):
        start = time.perf_counter()
        crowd_cfg = apply_point(cfg.crowd, point)
        oracle = oracle_estimates(crowd_cfg) if cfg.oracle_params else None
        hits = dict.fromkeys(cfg.schemes, 0)
        for t in range(cfg.trials):
            for name, ok in run_trial(crowd_cfg, cfg.schemes, cfg.master_seed, idx, t,
                                      oracle, cfg.mu_method, cfg.fusion_rule).items():
                hits[name] += ok
        elapsed = time.perf_counter() - start
        for name in cfg.schemes:
            pc = hits[name] / cfg.trials
            rows.append(ResultRow(point, name, pc, standard_error(pc, cfg.trials), cfg.trials,
                                  elapsed, crowd_cfg.digest(), cfg.master_seed))
    return rows


def run_thresholds(cfg: ExperimentConfig) -> list[dict]:
    rows = []
    for point in cfg.sweep:
        pt = PTParams(point.get("alpha", 1.0), point.get("beta", 1.0), point.get("delta", 1.0))
        T = float(point["T"])
        rows.append({"T": T, "alpha": pt.alpha, "beta": pt.beta, "delta": pt.delta,
                     "t_star": confidence_threshold(T, pt)})
    return rows


def run_table1(cfg: ExperimentConfig) -> list[dict]:
    """Spammer-count estimates on the grid; ``trials`` is the number of seeds per cell."""
    rows = []
    for idx, point in enumerate(cfg.sweep):
        crowd_cfg = apply_point(cfg.crowd, point)
        est0, estN, ok = [], [], 0
        for s in range(cfg.trials):
            crowd_ss, session_ss, _ = trial_streams(cfg.master_seed, idx, s)
            answers = run_session(generate_crowd(crowd_cfg, crowd_ss), crowd_cfg, session_ss)
            est = estimate_in_loop(answers, cfg.mu_method)
            est0.append(est.M0)
            estN.append(est.MN)
            ok += abs(est.M0 - crowd_cfg.M0) <= 1 and abs(est.MN - crowd_cfg.MN) <= 1
        rows.append({"M0": crowd_cfg.M0, "MN": crowd_cfg.MN,
                     "M0_hat_mean": float(np.mean(est0)), "MN_hat_mean": float(np.mean(estN)),
                     "M0_hat_first": est0[0], "MN_hat_first": estN[0],
                     "frac_within_1": ok / cfg.trials, "seeds": cfg.trials,
                     "config_digest": crowd_cfg.digest(), "master_seed": cfg.master_seed})
    return rows


def table1_score(rows: list[dict]) -> float:
    """Fraction of (cell, seed) pairs with both estimate errors at most one."""
    return float(np.mean([r["frac_within_1"] for r in rows]))


def monte_carlo_pc(W: int, M0: int, MN: int, mu: float, m: float, N: int, trials: int, seed: int = 0,
                   scheme=None, batch: int | None = None, return_margins: bool = False):
    """P_c of bitwise fusion under the population model used by the closed forms.

    Each honest worker skips every bit independently with probability m and is
    right with probability mu when it answers; Type II spammers guess; Type I
    spammers never vote. Weights follow ``scheme`` (ASPT at the true values by
    default) from the number of definitive answers. Returns (pc, se), plus the
    per-bit margins of the first batch when ``return_margins``.
    """
    H = W - M0 - MN
    if scheme is None:
        scheme = ASPT(W=W, M=M0 + MN, MN=MN, mu=mu, m=m, N=N)
    table = np.array([_weight_or_zero(scheme, n, N) for n in range(N + 1)])
    tol = TIE_RTOL * np.max(np.abs(table))
    batch = batch or max(1, min(trials, 4_000_000 // max(1, (H + MN) * N)))
    rng = np.random.default_rng(seed)
    hits = 0
    first = None
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        answered = rng.random((b, H, N)) >= m
        correct = rng.random((b, H, N)) < mu
        n = answered.sum(axis=2)
        votes = np.where(answered, np.where(correct, 1.0, -1.0), 0.0)
        margin = np.einsum("bh,bhn->bn", table[n], votes)
        if MN:
            margin += table[N] * (2.0 * rng.integers(0, 2, (b, MN, N)) - 1.0).sum(axis=1)
        coin = rng.integers(0, 2, (b, N)).astype(bool)
        right = np.where(np.abs(margin) <= tol, coin, margin > 0)
        hits += int(right.all(axis=1).sum())
        if first is None:
            first = margin
        done += b
    pc = hits / trials
    if return_margins:
        return pc, standard_error(pc, trials), first
    return pc, standard_error(pc, trials)


def _weight_or_zero(scheme, n, N):
    try:
        return float(scheme.weight(n, N))
    except ValueError:
        if n == 0:
            return 0.0
        raise


def run_analytics(cfg: ExperimentConfig, cap: int = analytics.DEFAULT_PROFILE_CAP) -> list[dict]:
    rows = []
    for idx, point in enumerate(cfg.sweep):
        p = {k: point[k] for k in ("W", "M0", "MN", "mu", "m", "N")}
        start = time.perf_counter()
        count = analytics.enumeration_size(p["W"], p["M0"], p["MN"], p["N"])
        try:
            exact = analytics.exact_pc(**p, cap=cap)
        except analytics.EnumerationTooLarge:
            exact = float("nan")
        mom = analytics.asymptotic_moments(**p)
        asym = analytics.asymptotic_pc(**p)
        seed = int(np.random.SeedSequence(cfg.master_seed, spawn_key=(idx,)).generate_state(1)[0])
        mc, se = monte_carlo_pc(**p, trials=cfg.trials, seed=seed)
        rows.append({**p, "pc_exact": exact, "pc_asymptotic": asym, "pc_mc": mc, "mc_se": se,
                     "mean_M": mom.mean_M, "var_V": mom.var_V, "profile_count": count,
                     "feasible": count <= cap, "runtime": round(time.perf_counter() - start, 4),
                     "master_seed": cfg.master_seed})
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    if cfg.preset == "Fig2Thresholds":
        return run_thresholds(cfg)
    if cfg.preset == "Table1Estimation":
        return run_table1(cfg)
    if cfg.preset == "Analytics":
        return run_analytics(cfg)
    return [r.as_dict() for r in run_monte_carlo(cfg)]


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    fields = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def set_override(d: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value`` to a nested dict; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ValueError(f"override {assignment!r} is not of the form KEY=VALUE")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out = copy.deepcopy(d)
    node = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ValueError(f"override path {key!r} does not exist")
        node = node[p]
    node[parts[-1]] = value
    return out
