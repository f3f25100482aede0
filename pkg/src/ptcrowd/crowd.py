"""Synthetic crowds and answering sessions.

A session is a W x (N+G) grid of responses over {0, 1, skip}. Gold columns are
interleaved with the N classification columns at seed-derived positions;
workers treat both kinds identically.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from scipy import integrate

from .behavior import THRESHOLD_TOL, PaymentConfig, PTParams, confidence_threshold

SKIP = -1
_SYMBOL = {0: "0", 1: "1", SKIP: "s"}
_CODE = {v: k for k, v in _SYMBOL.items()}


class WorkerKind(enum.IntEnum):
    HONEST = 0
    TYPE_I = 1
    TYPE_II = 2


@dataclass(frozen=True)
class Uniform:
    """U(low, high); low == high is a point mass."""

    low: float
    high: float

    def __post_init__(self):
        if not (np.isfinite(self.low) and np.isfinite(self.high)) or self.high < self.low:
            raise ValueError(f"invalid uniform bounds [{self.low}, {self.high}]")

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def sample(self, rng: np.random.Generator, size=None):
        if self.low == self.high:
            return np.full(size, self.low) if size is not None else self.low
        return rng.uniform(self.low, self.high, size)

    def within(self, lo: float, hi: float) -> bool:
        return lo - 1e-12 <= self.low and self.high <= hi + 1e-12

    def to_dict(self):
        return {"uniform": [self.low, self.high]}

    @classmethod
    def parse(cls, spec) -> "Uniform":
        if isinstance(spec, Uniform):
            return spec
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls(float(spec), float(spec))
        if isinstance(spec, dict):
            if "uniform" in spec and len(spec) == 1:
                lo, hi = spec["uniform"]
                return cls(float(lo), float(hi))
            if set(spec) == {"low", "high"}:
                return cls(float(spec["low"]), float(spec["high"]))
        raise ValueError(f"unsupported distribution spec: {spec!r}")


def mu_to_fr(mu: float) -> Uniform:
    """Correctness distribution U(2*mu - 1, 1), whose mean is mu."""
    if not 0.5 <= mu < 1.0:
        raise ValueError(f"mu must lie in [0.5, 1), got {mu}")
    return Uniform(2.0 * mu - 1.0, 1.0)


@dataclass(frozen=True)
class ConfidenceModel:
    """Per-question confidence t ~ U(t_low, x) with a per-worker upper end x ~ t_high."""

    t_low: float = 0.5
    t_high: Uniform = Uniform(0.7, 0.9)

    def __post_init__(self):
        object.__setattr__(self, "t_high", Uniform.parse(self.t_high))
        if not (0.5 <= self.t_low and self.t_high.within(self.t_low, 1.0)):
            raise ValueError("confidence support must lie in [0.5, 1] with x >= t_low")

    def to_dict(self):
        return {"kind": "confidence", "t_low": self.t_low, "t_high": self.t_high.to_dict()}


@dataclass(frozen=True)
class SkipCorrectModel:
    """Skip probability p ~ f_p and correctness-given-answer r ~ f_r."""

    f_p: Uniform
    f_r: Uniform

    def __post_init__(self):
        object.__setattr__(self, "f_p", Uniform.parse(self.f_p))
        object.__setattr__(self, "f_r", Uniform.parse(self.f_r))
        if not self.f_p.within(0.0, 1.0):
            raise ValueError("f_p support must lie in [0, 1]")
        # U(2mu-1, 1) reaches below 1/2 for mu < 3/4, so only the mean is held to [1/2, 1]
        if not (self.f_r.within(0.0, 1.0) and self.f_r.mean >= 0.5):
            raise ValueError("f_r support must lie in [0, 1] with mean at least 0.5")

    def to_dict(self):
        return {"kind": "skip_correct", "f_p": self.f_p.to_dict(), "f_r": self.f_r.to_dict()}


CrowdModelSpec = Union[ConfidenceModel, SkipCorrectModel]


def parse_model(spec) -> CrowdModelSpec:
    if isinstance(spec, (ConfidenceModel, SkipCorrectModel)):
        return spec
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind == "confidence":
        return ConfidenceModel(float(spec.get("t_low", 0.5)), Uniform.parse(spec["t_high"]))
    if kind == "skip_correct":
        return SkipCorrectModel(Uniform.parse(spec["f_p"]), Uniform.parse(spec["f_r"]))
    raise ValueError(f"unsupported crowd model spec: {spec!r}")


@dataclass(frozen=True)
class PTPopulation:
    """Behavioural parameters of honest workers; each coefficient fixed or uniform."""

    alpha: Uniform = Uniform(1.0, 1.0)
    beta: Uniform = Uniform(1.0, 1.0)
    delta: Uniform = Uniform(1.0, 1.0)

    def __post_init__(self):
        for name in ("alpha", "beta", "delta"):
            object.__setattr__(self, name, Uniform.parse(getattr(self, name)))
        # validate both ends against the PTParams bounds
        PTParams(self.alpha.low, self.beta.low, self.delta.low)
        PTParams(self.alpha.high, self.beta.high, self.delta.high)

    @classmethod
    def fixed(cls, pt: PTParams) -> "PTPopulation":
        return cls(pt.alpha, pt.beta, pt.delta)

    @property
    def is_fixed(self) -> bool:
        return all(u.low == u.high for u in (self.alpha, self.beta, self.delta))

    def as_params(self) -> PTParams:
        if not self.is_fixed:
            raise ValueError("population is not homogeneous")
        return PTParams(self.alpha.low, self.beta.low, self.delta.low)

    def to_dict(self):
        return {k: (u.low if u.low == u.high else u.to_dict())
                for k, u in (("alpha", self.alpha), ("beta", self.beta), ("delta", self.delta))}


def crowd_stats(model: CrowdModelSpec, T: float, pt: PTParams | PTPopulation,
                reading: str = "conditional") -> tuple[float, float]:
    """Population skip probability m and mean correctness mu.

    For the confidence model, m = E[P(t < t*)] over workers. With
    ``reading="conditional"`` mu is the correctness of submitted answers,
    E[t | t >= t*] pooled over the crowd (what gold-question training measures);
    ``reading="unconditional"`` returns the answered mass P(t >= t*) = 1 - m instead.
    """
    if reading not in ("conditional", "unconditional"):
        raise ValueError(f"unknown reading {reading!r}")
    if isinstance(model, SkipCorrectModel):
        return model.f_p.mean, model.f_r.mean
    if not isinstance(model, ConfidenceModel):
        raise ValueError(f"unsupported crowd model {model!r}")
    if isinstance(pt, PTPopulation):
        pt = pt.as_params()
    t_star = confidence_threshold(T, pt)
    a = model.t_low
    s = max(a, t_star)

    def skip_prob(x):
        if x <= a:
            return 1.0 if t_star >= a else 0.0
        return float(np.clip((t_star - a) / (x - a), 0.0, 1.0))

    def correct_mass(x):
        # E[t * 1{t > t*}] for t ~ U(a, x)
        if x <= s:
            return 0.0
        return (x * x - s * s) / (2.0 * (x - a))

    lo, hi = model.t_high.low, model.t_high.high
    if lo == hi:
        m = skip_prob(lo)
        c = correct_mass(lo)
    else:
        pts = [t_star] if lo < t_star < hi else None
        m = integrate.quad(skip_prob, lo, hi, points=pts)[0] / (hi - lo)
        c = integrate.quad(correct_mass, lo, hi, points=pts)[0] / (hi - lo)
    answered = 1.0 - m
    if reading == "unconditional":
        return m, answered
    if answered <= 0.0:
        raise ValueError("no worker ever answers at this threshold; mu is undefined")
    return m, c / answered


@dataclass(frozen=True)
class CrowdConfig:
    W: int
    M0: int
    MN: int
    N: int
    G: int
    payment: PaymentConfig
    model: CrowdModelSpec
    pt: PTPopulation = field(default_factory=PTPopulation)
    redraw_per_question: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", parse_model(self.model))
        if isinstance(self.pt, PTParams):
            object.__setattr__(self, "pt", PTPopulation.fixed(self.pt))
        if min(self.W, self.M0, self.MN, self.G) < 0 or self.N < 1:
            raise ValueError("need W, M0, MN, G >= 0 and N >= 1")
        if self.M0 + self.MN > self.W:
            raise ValueError("M0 + MN exceeds W")
        if self.payment.gold_count != self.G:
            raise ValueError("payment.gold_count must equal G")

    @property
    def M(self) -> int:
        return self.M0 + self.MN

    @property
    def honest(self) -> int:
        return self.W - self.M

    def to_dict(self):
        return {
            "W": self.W, "M0": self.M0, "MN": self.MN, "N": self.N, "G": self.G,
            "payment": asdict(self.payment),
            "model": self.model.to_dict(),
            "pt": self.pt.to_dict(),
            "redraw_per_question": self.redraw_per_question,
        }

    @classmethod
    def from_dict(cls, d) -> "CrowdConfig":
        d = dict(d)
        G = int(d["G"])
        pay = dict(d.get("payment", {}))
        pay.setdefault("gold_count", G)
        pay.setdefault("threshold", 0.6)
        return cls(
            W=int(d["W"]), M0=int(d.get("M0", 0)), MN=int(d.get("MN", 0)),
            N=int(d["N"]), G=G,
            payment=PaymentConfig(**pay),
            model=parse_model(d["model"]),
            pt=PTPopulation(**d.get("pt", {})),
            redraw_per_question=bool(d.get("redraw_per_question", False)),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class CrowdInstance:
    """Per-worker kinds and sampled parameters (NaN where not applicable)."""

    kind: np.ndarray
    p: np.ndarray  # skip probability (skip/correct model)
    r: np.ndarray  # correctness given an answer (skip/correct model)
    x: np.ndarray  # upper end of the confidence distribution (confidence model)
    t_star: np.ndarray  # effective confidence threshold (confidence model)

    @property
    def W(self) -> int:
        return len(self.kind)

    def counts(self) -> dict[str, int]:
        return {k.name: int(np.sum(self.kind == k)) for k in WorkerKind}


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def generate_crowd(cfg: CrowdConfig, seed) -> CrowdInstance:
    """Draw worker kinds (at random positions) and honest-worker parameters."""
    rng = _rng(seed)
    W = cfg.W
    kind = np.full(W, WorkerKind.HONEST, dtype=np.int8)
    order = rng.permutation(W)
    kind[order[: cfg.M0]] = WorkerKind.TYPE_I
    kind[order[cfg.M0: cfg.M]] = WorkerKind.TYPE_II
    honest = kind == WorkerKind.HONEST
    p = np.full(W, np.nan)
    r = np.full(W, np.nan)
    x = np.full(W, np.nan)
    t_star = np.full(W, np.nan)
    model = cfg.model
    if isinstance(model, SkipCorrectModel):
        p[honest] = model.f_p.sample(rng, W)[honest]
        r[honest] = model.f_r.sample(rng, W)[honest]
    else:
        x[honest] = model.t_high.sample(rng, W)[honest]
        alpha = cfg.pt.alpha.sample(rng, W)
        beta = cfg.pt.beta.sample(rng, W)
        delta = cfg.pt.delta.sample(rng, W)
        T = cfg.payment.threshold
        eta = (beta * T / (1.0 - T)) ** (delta / alpha)
        t_star[honest] = (eta / (1.0 + eta))[honest]
    return CrowdInstance(kind=kind, p=p, r=r, x=x, t_star=t_star)


@dataclass
class AnswerMatrix:
    """Responses of W workers to N classification and G gold questions.

    ``responses`` holds 0, 1 or SKIP (-1). ``worker_kind`` is simulation-only
    ground truth and is never read by estimation or fusion.
    """

    responses: np.ndarray
    truth: np.ndarray
    is_gold: np.ndarray
    worker_kind: np.ndarray | None = None
    seed: int | None = None
    config_digest: str | None = None

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=np.int8)
        self.truth = np.asarray(self.truth, dtype=np.int8)
        self.is_gold = np.asarray(self.is_gold, dtype=bool)
        if self.responses.ndim != 2 or self.responses.shape[1] != len(self.truth):
            raise ValueError("responses must be W x (N+G) matching truth")
        if len(self.is_gold) != len(self.truth):
            raise ValueError("is_gold length mismatch")
        if not np.isin(self.responses, (0, 1, SKIP)).all():
            raise ValueError("responses must be 0, 1 or SKIP")

    @property
    def W(self) -> int:
        return self.responses.shape[0]

    @property
    def N(self) -> int:
        return int(np.sum(~self.is_gold))

    @property
    def G(self) -> int:
        return int(np.sum(self.is_gold))

    @property
    def column_kind(self) -> list[str]:
        return ["gold" if g else "classification" for g in self.is_gold]

    def classification_responses(self) -> np.ndarray:
        return self.responses[:, ~self.is_gold]

    def gold_responses(self) -> np.ndarray:
        return self.responses[:, self.is_gold]

    @property
    def classification_truth(self) -> np.ndarray:
        return self.truth[~self.is_gold]

    @property
    def gold_truth(self) -> np.ndarray:
        return self.truth[self.is_gold]

    def definitive_counts(self, scope: str = "all") -> np.ndarray:
        if scope == "all":
            resp = self.responses
        elif scope == "classification":
            resp = self.classification_responses()
        else:
            raise ValueError(f"unknown scope {scope!r}")
        return np.sum(resp != SKIP, axis=1)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        d = {
            "responses": ["".join(_SYMBOL[int(v)] for v in row) for row in self.responses],
            "truth": [int(b) for b in self.truth],
            "column_kind": self.column_kind,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }
        if self.worker_kind is not None:
            d["worker_kind"] = [WorkerKind(int(k)).name for k in self.worker_kind]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d) -> "AnswerMatrix":
        try:
            rows = [[_CODE[ch] for ch in row] for row in d["responses"]]
        except KeyError as exc:
            raise ValueError(f"bad response symbol {exc}") from None
        kinds = d["column_kind"]
        if any(k not in ("gold", "classification") for k in kinds):
            raise ValueError("column_kind entries must be 'gold' or 'classification'")
        wk = d.get("worker_kind")
        return cls(
            responses=np.array(rows, dtype=np.int8).reshape(len(rows), len(kinds)),
            truth=np.array(d["truth"], dtype=np.int8),
            is_gold=np.array([k == "gold" for k in kinds]),
            worker_kind=None if wk is None else np.array([WorkerKind[k] for k in wk], dtype=np.int8),
            seed=d.get("seed"),
            config_digest=d.get("config_digest"),
        )

    @classmethod
    def from_json(cls, text: str) -> "AnswerMatrix":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """One worker per row; the last row, labelled ``truth``, carries the true bits."""
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        names, c, g = [], 0, 0
        for gold in self.is_gold:
            if gold:
                names.append(f"g{g}")
                g += 1
            else:
                names.append(f"c{c}")
                c += 1
        out.writerow(["worker", *names])
        for w, row in enumerate(self.responses):
            out.writerow([w, *(_SYMBOL[int(v)] for v in row)])
        out.writerow(["truth", *(int(b) for b in self.truth)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AnswerMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        is_gold = np.array([name.startswith("g") for name in header[1:]])
        truth_rows = [r for r in body if r[0] == "truth"]
        if len(truth_rows) != 1:
            raise ValueError("CSV must contain exactly one 'truth' row")
        workers = [r for r in body if r[0] != "truth"]
        try:
            resp = np.array([[_CODE[v] for v in r[1:]] for r in workers], dtype=np.int8)
        except KeyError as exc:
            raise ValueError(f"bad response symbol {exc}") from None
        return cls(responses=resp.reshape(len(workers), len(is_gold)),
                   truth=np.array([int(v) for v in truth_rows[0][1:]]), is_gold=is_gold)


def run_session(crowd: CrowdInstance, cfg: CrowdConfig, seed, reject_option: bool = True) -> AnswerMatrix:
    """Simulate one answering session.

    Every random draw is made regardless of ``reject_option`` so that the
    same seed yields matched sessions with and without the skip option: with
    it off, a worker who would have skipped answers anyway (an honest worker
    under the skip/correct model guesses, under the confidence model it is
    still right with probability t; Type I spammers guess).
    """
    rng = _rng(seed)
    W, K = crowd.W, cfg.N + cfg.G
    is_gold = np.zeros(K, dtype=bool)
    is_gold[rng.permutation(K)[: cfg.G]] = True
    truth = rng.integers(0, 2, K, dtype=np.int8)

    u_skip = rng.random((W, K))
    u_correct = rng.random((W, K))
    guess = rng.integers(0, 2, (W, K), dtype=np.int8)

    kind = crowd.kind
    honest = kind == WorkerKind.HONEST
    model = cfg.model
    if isinstance(model, SkipCorrectModel):
        if cfg.redraw_per_question:
            p = model.f_p.sample(rng, (W, K))
            r = model.f_r.sample(rng, (W, K))
        else:
            p = np.broadcast_to(crowd.p[:, None], (W, K))
            r = np.broadcast_to(crowd.r[:, None], (W, K))
        skip = u_skip < p
        correct = u_correct < r
        forced_correct = guess == truth
    else:
        if cfg.redraw_per_question:
            x = model.t_high.sample(rng, (W, K))
        else:
            x = np.broadcast_to(crowd.x[:, None], (W, K))
        t = model.t_low + (x - model.t_low) * u_skip
        skip = ~(t - crowd.t_star[:, None] > THRESHOLD_TOL)
        correct = u_correct < t
        forced_correct = correct

    honest_ans = np.where(correct, truth, 1 - truth).astype(np.int8)
    if reject_option:
        honest_ans = np.where(skip, SKIP, honest_ans)
    else:
        forced = np.where(forced_correct, truth, 1 - truth).astype(np.int8)
        honest_ans = np.where(skip, forced, honest_ans)

    resp = np.where(honest[:, None], honest_ans, guess).astype(np.int8)
    type_i = kind == WorkerKind.TYPE_I
    if reject_option:
        resp[type_i] = SKIP
    return AnswerMatrix(responses=resp, truth=truth, is_gold=is_gold, worker_kind=kind.copy(),
                        seed=seed if isinstance(seed, (int, np.integer)) else None,
                        config_digest=cfg.digest())
