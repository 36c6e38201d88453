"""Command-line interface: ``detsched {gen,compare,verify,sample}``.

Exit codes: 0 success, 1 verification failure, 2 invalid config/arguments.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import coverage
from .config import ExperimentConfig
from .dpp import Role, SymmetricKernel, build_L, gaussian_similarity, marginal_from_L, sample_many
from .errors import DetschedError, InvalidArgument, SizeLimit
from .experiment import realization_network, run_compare, run_verify
from .formats import dump_network, load_kernel
from .oracle import MAX_ENUM_PAIRS

log = logging.getLogger("detsched")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2

# flag -> config key
OVERRIDES = {
    "seed": int,
    "n_pairs": int,
    "tau": float,
    "sigma": float,
    "realizations": int,
    "output_dir": str,
}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-pairs", dest="n_pairs", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--realizations", type=int)
    p.add_argument("--out", dest="output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detsched", description="Determinantal scheduling with proportional fairness."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a bi-pole network JSON file")
    _common(gen)

    cmp_ = sub.add_parser("compare", help="optimize and compare schedulers over realizations")
    _common(cmp_)

    ver = sub.add_parser("verify", help="cross-check coverage formulas against oracles")
    _common(ver)
    ver.add_argument("--mc-samples", dest="mc_samples", type=int)
    ver.add_argument("--instances", dest="verify_instances", type=int)
    ver.add_argument("--no-enumerate", dest="enumerate", action="store_false", default=None)
    ver.add_argument("--tamper-h", dest="tamper_h", action="store_true", help=argparse.SUPPRESS)

    smp = sub.add_parser("sample", help="draw subsets from a kernel file or a configured network")
    _common(smp)
    smp.add_argument("--kernel", help="kernel CSV ('# role=<K|L|S> n=<n>' header)")
    smp.add_argument("--count", dest="sample_count", type=int)
    return parser


def effective_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in list(OVERRIDES) + ["mc_samples", "verify_instances", "enumerate", "sample_count"]:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return cfg.replace(**overrides) if overrides else cfg


def cmd_gen(cfg: ExperimentConfig, args) -> int:
    net = realization_network(cfg, 0)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "network.json")
    with open(path, "w") as fh:
        fh.write(dump_network(net))
    print(path)
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    res = run_compare(cfg)
    if res.warnings:
        print(f"warning: {res.warnings} scheduler run(s) infeasible; see per_realization.csv", file=sys.stderr)
    print(os.path.join(cfg.output_dir, "aggregate.csv"))
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    if cfg.enumerate and cfg.n_pairs > MAX_ENUM_PAIRS:
        raise SizeLimit(f"enumeration is limited to {MAX_ENUM_PAIRS} pairs (got n_pairs={cfg.n_pairs})")
    coverage._TAMPER_H = bool(getattr(args, "tamper_h", False))
    try:
        checks = run_verify(cfg)
    finally:
        coverage._TAMPER_H = False
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(
            f"FAIL instance={c.instance} scheduler={c.scheduler} link={c.link} "
            f"det={c.exact_det:.12g} enum={c.exact_enum:.12g} mc={c.mc_mean:.6g}+-{c.mc_se:.2g} "
            f"diff={abs(c.exact_det - c.exact_enum):.3g}",
            file=sys.stderr,
        )
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def _sample_kernel(cfg: ExperimentConfig, args) -> SymmetricKernel:
    if args.kernel:
        k = load_kernel(args.kernel)
        if k.role is Role.MARGINAL:
            return k
        if k.role is Role.SIMILARITY:
            k = SymmetricKernel.ensemble(k.matrix)
        return marginal_from_L(k)
    net = realization_network(cfg, 0)
    S = gaussian_similarity(net, cfg.sigma)
    return marginal_from_L(build_L(S, np.ones(net.n)))


def cmd_sample(cfg: ExperimentConfig, args) -> int:
    K = _sample_kernel(cfg, args)
    rng = np.random.default_rng(cfg.seed)
    masks = sample_many(K, cfg.sample_count, rng)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "subsets.txt")
    with open(path, "w") as fh:
        for row in masks:
            fh.write(" ".join(str(i) for i in np.flatnonzero(row)) + "\n")
    print(path)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "compare": cmd_compare, "verify": cmd_verify, "sample": cmd_sample}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](cfg, args)
    except (InvalidArgument, SizeLimit, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DetschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
