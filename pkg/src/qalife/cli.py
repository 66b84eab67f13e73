"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import qcore
from .channels import LindbladSpec, apply_damping, DampingParams, lindblad_rk4_evolve
from .config import SCENARIOS, ConfigError, load_config, scenario, with_changes
from .runner import run_ensemble
from .measure import peak_report

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def oracle_suite(n_registers: int = 20, n_qubits: int = 3, gamma_t: float = 1.0,
                 step: float = 1e-3, seed: int = 7) -> list[float]:
    """Max entrywise gap between exact damping and RK4 integration, per register."""
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(n_registers):
        reg = qcore.DensityRegister(qcore.random_density_matrix(n_qubits, rng))
        target = int(rng.integers(n_qubits))
        exact = apply_damping(reg, target, DampingParams(1.0, gamma_t))
        numeric = lindblad_rk4_evolve(reg, LindbladSpec((target,), 1.0), gamma_t, step)
        gaps.append(float(np.max(np.abs(exact.matrix - numeric.matrix))))
    return gaps


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.realizations is not None:
        out["realizations"] = args.realizations
    return out


def _report(result) -> None:
    h = result.histograms
    print(f"config {result.manifest['config_hash'][:12]}  realizations {h.realization_count}")
    for fam in ("genotype", "phenotype"):
        peaks = peak_report(h, fam, result.config.peak_threshold)
        shown = ", ".join(f"{c:+.2f} ({m:.1%})" for c, m in peaks[:5]) or "none"
        print(f"  {fam} peaks: {shown}")
    print(f"  interactions in {sum(1 for n in result.counts('interactions') if n)} realizations, "
          f"births {sum(result.counts('births'))}")
    for path in result.files:
        print(f"  wrote {path}")


def _run(cfg, args) -> int:
    cfg = with_changes(cfg, **_overrides(args))
    result = run_ensemble(cfg, out_dir=args.out_dir, threads=args.threads)
    _report(result)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qalife", description="Quantum artificial-life simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--realizations", type=int, help="number of realizations (overrides the config)")
        p.add_argument("--out-dir", default="qalife-out", help="directory for CSV/JSONL outputs")
        p.add_argument("--threads", type=int, default=1, help="worker processes for realizations")

    p = sub.add_parser("run", help="run an ensemble from a YAML config")
    p.add_argument("config")
    run_flags(p)

    p = sub.add_parser("scenario", help="run or print a canned figure scenario")
    p.add_argument("name", help=f"one of: {', '.join(SCENARIOS)}")
    p.add_argument("--emit-config", action="store_true", help="print the scenario config and exit")
    run_flags(p)

    p = sub.add_parser("validate", help="check a config file and print it with defaults filled in")
    p.add_argument("config")

    p = sub.add_parser("oracle", help="compare exact damping against RK4 integration")
    p.add_argument("--registers", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-6)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(load_config(args.config), args)
        if args.command == "scenario":
            try:
                cfg = scenario(args.name)
            except KeyError as exc:
                print(exc.args[0], file=sys.stderr)
                return EXIT_CONFIG
            if args.emit_config:
                sys.stdout.write(with_changes(cfg, **_overrides(args)).to_yaml())
                return EXIT_OK
            return _run(cfg, args)
        if args.command == "validate":
            cfg = load_config(args.config)
            sys.stdout.write(f"# config_hash={cfg.hash()}\n{cfg.to_yaml()}")
            return EXIT_OK
        gaps = oracle_suite(n_registers=args.registers)
        worst = max(gaps)
        print(f"{len(gaps)} registers, max |exact - rk4| = {worst:.3e} (tolerance {args.tolerance:.0e})")
        return EXIT_OK if worst <= args.tolerance else EXIT_RUNTIME
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
