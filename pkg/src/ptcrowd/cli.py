"""Command-line entry point: ``ptcrowd <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 infeasible enumeration.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analytics
from .behavior import (PaymentConfig, PTParams, best_skip_count, spammer_expected_reward,
                       spammer_strategy_pt, spammer_strategy_rational)
from .crowd import AnswerMatrix, CrowdConfig, generate_crowd, run_session
from .experiments import (ExperimentConfig, PRESETS, SCHEMES, TrialEstimates, build_scheme,
                          estimate_in_loop, preset_config, rows_to_csv, run_experiment,
                          set_override)
from .fusion import assign_weights, classify, fuse_word
from .inference import GOLD, MAJORITY, estimate_crowd, surface_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ConfigError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _load_json(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _with_overrides(d: dict, overrides) -> dict:
    for item in overrides or []:
        d = set_override(d, item)
    return d


def _load_matrix(path: str) -> AnswerMatrix:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    if path.endswith(".csv"):
        return AnswerMatrix.from_csv(text)
    return AnswerMatrix.from_json(text)


def cmd_simulate(args) -> int:
    d = _with_overrides(_load_json(args.config) or preset_config("Custom").crowd.to_dict(), args.set)
    cfg = CrowdConfig.from_dict(d)
    crowd = generate_crowd(cfg, args.seed)
    answers = run_session(crowd, cfg, args.seed, reject_option=not args.no_reject)
    if args.out and args.out.endswith(".csv"):
        _emit(answers.to_csv(), args.out)
    else:
        _emit(answers.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    answers = _load_matrix(args.matrix)
    est = estimate_crowd(answers, args.method)
    _emit(est.to_json() + "\n", args.out)
    if args.surface:
        _emit(surface_csv(est.W_all, est.W_none, answers.W, est.m_hat, answers.N, answers.G), args.surface)
    return EXIT_OK


def cmd_fuse(args) -> int:
    answers = _load_matrix(args.matrix)
    if args.estimates:
        e = _load_json(args.estimates)
        est = TrialEstimates(e["m_hat"], e["mu_hat"], e["M0_hat"], e["MN_hat"])
    else:
        est = estimate_in_loop(answers, args.method)
    weights = assign_weights(answers, build_scheme(args.scheme, est, answers.W, answers.N), args.count_scope)
    rule = classify if args.rule == "class" else fuse_word
    _emit(rule(answers, weights, args.tie_seed).to_json() + "\n", args.out)
    return EXIT_OK


def _population_args(p):
    for name, typ in (("--W", int), ("--M0", int), ("--MN", int), ("--mu", float), ("--m", float), ("--N", int)):
        p.add_argument(name, type=typ, required=True)


def _pop(args) -> dict:
    return {"W": args.W, "M0": args.M0, "MN": args.MN, "mu": args.mu, "m": args.m, "N": args.N}


def cmd_pc_exact(args) -> int:
    res = analytics.exact_pc_report(**_pop(args), cap=args.cap)
    row = {**_pop(args), "pc_exact": res.pc, "profile_count": res.profile_count,
           "normalization": res.normalization, "runtime": round(res.runtime, 4)}
    _emit(rows_to_csv([row]), args.out)
    return EXIT_OK


def cmd_pc_asymptotic(args) -> int:
    mom = analytics.asymptotic_moments(**_pop(args))
    row = {**_pop(args), "pc_asymptotic": analytics.asymptotic_pc(**_pop(args)),
           "mean_M": mom.mean_M, "var_V": mom.var_V, "Z_M": mom.Z_M}
    _emit(rows_to_csv([row]), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    d = preset_config(args.preset).to_dict()
    d.update(_load_json(args.config))
    d["preset"] = args.preset
    if args.trials is not None:
        d["trials"] = args.trials
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.oracle_params:
        d["oracle_params"] = True
    d = _with_overrides(d, args.set)
    cfg = ExperimentConfig.from_dict(d)
    _emit(rows_to_csv(run_experiment(cfg)), args.out)
    return EXIT_OK


def cmd_payment(args) -> int:
    cfg = PaymentConfig(args.T, args.G, args.mu_max, args.mu_min)
    pt = PTParams(args.alpha, args.beta, args.delta)
    rows = [{"g": g, "expected_reward": spammer_expected_reward(g, cfg)} for g in range(args.G + 1)]
    best = best_skip_count(cfg)
    for r in rows:
        r.update(best_g=best, rational_type=spammer_strategy_rational(args.T).value,
                 pt_type=spammer_strategy_pt(args.T, pt).value)
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptcrowd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--set", action="append", metavar="K=V", help="override a config key (repeatable)")

    p = sub.add_parser("simulate", help="simulate one session; writes JSON or CSV (by --out suffix)")
    common(p)
    p.add_argument("--no-reject", action="store_true", help="collect answers without the skip option")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate m, mu, M0, MN from an answer matrix")
    p.add_argument("matrix")
    p.add_argument("--method", choices=[GOLD, MAJORITY], default=GOLD)
    p.add_argument("--surface", help="also write the likelihood surface CSV here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fuse", help="aggregate an answer matrix into a class decision")
    p.add_argument("matrix")
    p.add_argument("--scheme", choices=SCHEMES, default="aspt")
    p.add_argument("--estimates", help="CrowdEstimates JSON (default: estimate from the matrix)")
    p.add_argument("--method", choices=[GOLD, MAJORITY], default=GOLD)
    p.add_argument("--rule", choices=["class", "bitwise"], default="class")
    p.add_argument("--count-scope", choices=["classification", "all"], default="classification")
    p.add_argument("--tie-seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("pc-exact", help="exact P_c by profile enumeration")
    _population_args(p)
    p.add_argument("--cap", type=int, default=analytics.DEFAULT_PROFILE_CAP)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pc_exact)

    p = sub.add_parser("pc-asymptotic", help="Gaussian approximation of P_c")
    _population_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pc_asymptotic)

    p = sub.add_parser("experiment", help="run a preset experiment")
    p.add_argument("preset", choices=PRESETS)
    common(p, seed_default=None)
    p.add_argument("--trials", type=int)
    p.add_argument("--oracle-params", action="store_true", help="weight with the true crowd parameters")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("payment", help="spammer rewards under the gold-question payment rule")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--G", type=int, required=True)
    p.add_argument("--mu-max", type=float, default=1.0)
    p.add_argument("--mu-min", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_payment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except analytics.EnumerationTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
