"""Command line: ``noisy-mps <experiment> [flags]`` or ``python -m noisy_mps ...``."""

from __future__ import annotations

import argparse
import sys

from .errors import CapacityError, ConfigError
from .harness import KINDS, THREADS_ENV, ExperimentConfig, float_list, int_list, parse_config, run

HELP = {
    "run-1d": "truncated MPS run of a 1D brick circuit",
    "run-2d": "grouped MPS run of a 2D lattice circuit (split-and-merge with several --grouping)",
    "run-gte": "Gaussian tensor ensemble estimate of the per-gate fidelity",
    "compare-exact": "engine against the state-vector oracle, depth by depth",
    "sample": "draw bitstrings from a truncated state",
    "pt-test": "Porter-Thomas distance and self-XEB of the exact state",
    "xeb-noise": "XEB and exact fidelity of noisy-gate circuits",
    "sweep": "residual error per gate against bond dimension",
}


def _add_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags given here override it")
    p.add_argument("--n", type=int, help="number of qubits (1D circuits)")
    p.add_argument("--grid", help="2D lattice: sycamore54, RxC, or [h1,h2,...] column heights")
    p.add_argument("--depth", type=int)
    p.add_argument("--chi", type=int_list, help="bond dimension or comma-separated list")
    p.add_argument("--gate", help="two-qubit gate tag (CZ, CX, iS, iS_theta:0.5, ...)")
    p.add_argument("--grouping", action="append", help="grouping tag such as [4,2,2,4]; repeat for split-and-merge")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="GTE draws, or circuit seeds for xeb-noise and sweep")
    p.add_argument("--beta", type=int, choices=(1, 2))
    p.add_argument("--shots", type=int)
    p.add_argument("--fidelity", type=float_list, help="noisy-gate fidelities for xeb-noise")
    p.add_argument("--out", help="output directory for circuit, log and metric tables")
    p.add_argument("--extended", action="store_true", default=None, help="allow long runs; checkpoint after every cycle")
    p.add_argument("--deterministic", action="store_true", default=None, help="single-threaded, bit-stable reductions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisy-mps",
        description=f"Noisy MPS circuit experiments. Thread count is read from ${THREADS_ENV}.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        _add_flags(sub.add_parser(kind, help=HELP[kind]))
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        "kind": ns.kind,
        "n_qubits": ns.n,
        "grid": ns.grid,
        "depth": ns.depth,
        "chis": ns.chi,
        "gate": ns.gate,
        "groupings": ns.grouping,
        "seed": ns.seed,
        "trials": ns.trials,
        "beta": ns.beta,
        "shots": ns.shots,
        "fidelities": ns.fidelity,
        "out": ns.out,
        "extended": ns.extended,
        "deterministic": ns.deterministic,
    }
    text = ""
    if ns.config:
        with open(ns.config) as fh:
            text = fh.read()
    return parse_config(text, **overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        config = config_from_args(ns)
        res = run(config)
    except ConfigError as exc:
        parser.error(str(exc))  # exits with status 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    for line in res.summary_lines():
        print(line)
    for name, path in res.files.items():
        print(f"wrote\t{path}")
    return 0
