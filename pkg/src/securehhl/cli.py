"""Command line entry point.

Exit codes: 0 when every check holds, 1 on a violated expectation, 2 on a
usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Sequence

from .attacks import parse_attack
from .defense import PART2
from .harness import (
    DEFAULT_SHOTS, MODES, ConfigError, ExperimentConfig, _complex, _time, build_circuit,
    load_config, run_reproduction_suite, run_experiment, write_result,
)
from .textformat import dump_text

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

# Part 2 with the first X on b dropped: a negative control for the suite.
MUTATED_PART2 = PART2[:5] + PART2[6:]


def _attack(text: str):
    try:
        return parse_attack(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--attack", action="append", type=_attack, default=[], metavar="ROLE=KIND",
                   help="attack a wire (iia or hea); repeatable")
    p.add_argument("--defended", action="store_true", default=None, help="use the defended circuit")
    p.add_argument("--shots", type=int, help=f"shots in sampled mode (default {DEFAULT_SHOTS})")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--mode", choices=MODES, help="exact branch enumeration or sampling")
    p.add_argument("--noise-depol", type=float, dest="p_depol", help="per-gate Pauli error rate")
    p.add_argument("--noise-readout", type=float, dest="p_readout", help="readout flip rate")
    p.add_argument("--out", help="directory for the JSON and CSV files")
    p.add_argument("--name", help="experiment id used for file names")
    for key in ("A00", "A01", "A10", "A11", "b0", "b1"):
        p.add_argument(f"--{key}", type=_complex, metavar="RE,IM")
    p.add_argument("--n-clock", type=int, dest="n_clock")
    p.add_argument("--t", type=_time, help="evolution time; accepts pi or pi/k")
    p.add_argument("--C", type=float, help="rotation constant")
    p.add_argument("--cache-dir", help="where the no-attack baseline is cached")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="securehhl", description="HHL attack and defense experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(sub.add_parser("run", help="run one experiment"))
    _add_config_flags(sub.add_parser("circuit", help="print the circuit in text form"))
    suite = sub.add_parser("suite", help="run the fixed reproduction suite")
    suite.add_argument("--out", required=True, help="output directory")
    suite.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--noise-shots", type=int, default=10_000)
    suite.add_argument("--mutate", action="store_true", help="corrupt the b-defense sequence")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Load ``--config`` if given, then let explicit flags override it."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    A, b = list(cfg.A), list(cfg.b)
    for i, key in enumerate(("A00", "A01", "A10", "A11")):
        if getattr(args, key) is not None:
            A[i] = getattr(args, key)
    for i, key in enumerate(("b0", "b1")):
        if getattr(args, key) is not None:
            b[i] = getattr(args, key)
    attacks = {**cfg.attacks, **dict(args.attack)}
    scalars = {k: getattr(args, k) for k in
               ("defended", "shots", "seed", "mode", "p_depol", "p_readout", "out", "name", "n_clock", "t", "C")
               if getattr(args, k) is not None}
    return replace(cfg, A=tuple(A), b=tuple(b), attacks=attacks, **scalars)


def _run(args) -> int:
    cfg = config_from_args(args)
    result = run_experiment(cfg, args.cache_dir)
    if cfg.out:
        for path in write_result(result, cfg.out):
            print(path)
    else:
        print(json.dumps(result.to_json(), indent=2, sort_keys=True))
    for v in result.violations:
        print(f"violation: {v}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_VIOLATION


def _circuit(args) -> int:
    cfg = config_from_args(args)
    cfg.validate()
    circuit, levels = build_circuit(cfg)
    print(dump_text(circuit), end="")
    if any(levels):
        print(f"# initial levels: {' '.join(map(str, levels))}")
    return EXIT_OK


def _suite(args) -> int:
    report = run_reproduction_suite(args.out, args.shots, args.seed, args.noise_shots,
                                   MUTATED_PART2 if args.mutate else PART2)
    for check in sorted(report.checks, key=lambda c: c.id):
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.id}")
    return EXIT_OK if report.ok else EXIT_VIOLATION


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "circuit": _circuit, "suite": _suite}[args.command]
    try:
        return handler(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
