"""Command-line entry point: ``posmg validate|solve|evaluate|simulate|trace``.

Exit codes: 0 success, 1 domain failure (invalid model, impossible
observation, policy coverage, resource cap), 2 I/O or parse failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass

from . import jsonio
from .errors import ModelFormatError, PosmgError
from .model import load_model, validate
from .sim import estimate_risk, filter_trace, threads_from_env
from .solver import DEFAULT_STATE_CAP, PolicyTable, evaluate_policies, solve

log = logging.getLogger("posmg")


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str
    out: str | None = None
    seed: int = 0
    n: int = 1
    cap: int = DEFAULT_STATE_CAP
    verbosity: int = 0
    full_tables: bool = False
    x0: str | None = None
    p1: str | None = None
    p2: str | None = None
    p1_out: str | None = None
    p2_out: str | None = None
    history: str | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        names = cls.__dataclass_fields__
        return cls(**{k: v for k, v in vars(args).items() if k in names})

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("--n must be at least 1")
        if self.cap < 1:
            raise ValueError("--cap must be positive")


def _read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None


def _read_policy(path: str, player: int) -> PolicyTable:
    return PolicyTable.from_json(_read_json(path), player)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text + "\n")
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise ModelFormatError(f"cannot write {out}: {exc.strerror or exc}") from None


def cmd_validate(cfg: RunConfig) -> int:
    report = validate(load_model(cfg.model))
    _emit(jsonio.dumps(report.to_dict(), indent=2), None)
    return 0 if report.ok else 1


def cmd_solve(cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    result = solve(model, x0=cfg.x0, cap=cfg.cap)
    log.info("solved: %d reachable states, %d backups", result.reachable_count, result.backup_count)
    _emit(jsonio.dumps(result.to_json(full=cfg.full_tables), indent=2), cfg.out)
    for path, pol in ((cfg.p1_out, result.policy1), (cfg.p2_out, result.policy2)):
        if path:
            _emit(jsonio.dumps(pol.to_json(), indent=2), path)
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    p1, p2 = _read_policy(cfg.p1, 1), _read_policy(cfg.p2, 2)
    value = evaluate_policies(model, p1, p2, x0=cfg.x0)
    _emit(jsonio.dumps({"value": value}, indent=2), cfg.out)
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    p1, p2 = _read_policy(cfg.p1, 1), _read_policy(cfg.p2, 2)
    est = estimate_risk(model, p1, p2, cfg.n, cfg.seed, x0=cfg.x0, workers=threads_from_env())
    _emit(jsonio.dumps(est.to_json(), indent=2), cfg.out)
    return 0


def cmd_trace(cfg: RunConfig) -> int:
    model = load_model(cfg.model)
    data = _read_json(cfg.history)
    x0 = cfg.x0
    if isinstance(data, dict):
        x0 = x0 or data.get("x0")
        steps = data.get("steps", [])
    else:
        steps = data
    if not isinstance(steps, list):
        raise ModelFormatError("history must be an array of steps or an object with 'steps'")
    beliefs = filter_trace(model, steps, x0=x0)
    _emit("\n".join(jsonio.dumps(mu.to_json()) for mu in beliefs), cfg.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posmg",
        description="Risk-probability partially observable semi-Markov games on a tick grid.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, dest="verbosity")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="game value and equilibrium policies")
    p.add_argument("model")
    p.add_argument("--out")
    p.add_argument("--full-tables", action="store_true", dest="full_tables",
                   help="include value table and policies")
    p.add_argument("--cap", type=int, default=DEFAULT_STATE_CAP, help="reachable-state cap")
    p.add_argument("--p1-out", help="write player 1's policy file")
    p.add_argument("--p2-out", help="write player 2's policy file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="exact risk probability of a policy pair")
    p.add_argument("model")
    p.add_argument("--p1", required=True)
    p.add_argument("--p2", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte Carlo estimate of the risk probability")
    p.add_argument("model")
    p.add_argument("--p1", required=True)
    p.add_argument("--p2", required=True)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="belief trace along an observable history")
    p.add_argument("model")
    p.add_argument("--history", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    for name in ("solve", "evaluate", "simulate", "trace"):
        sub.choices[name].add_argument("--x0", help="initial observed state (default: first)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbosity, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = RunConfig.from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        return args.func(cfg)
    except ModelFormatError as exc:
        print(f"posmg: {exc}", file=sys.stderr)
        return 2
    except PosmgError as exc:
        print(f"posmg: {exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
