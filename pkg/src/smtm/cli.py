"""Command-line entry points: `smtm run`, `smtm scaling`, `smtm selftest`."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import parse_set_overrides
from .errors import ConfigError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smtm",
        description="Stereographic multiple-try Metropolis experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a preset or config file")
    run_p.add_argument("config", help="preset name or path to a JSON config")
    run_p.add_argument("--seed", type=int, default=None, help="override the base seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override a config field (JSON value or bare string); repeatable",
    )

    sc_p = sub.add_parser("scaling", help="optimize the limit ESJD over step scale")
    sc_p.add_argument("--weight", choices=("gb", "lb"), default="gb")
    sc_p.add_argument("--n", type=int, default=1, help="candidate count")
    sc_p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                      help="radius ratio lambda (0 means the flat-space limit)")
    sc_p.add_argument("--samples", type=int, default=200000)
    sc_p.add_argument("--center", type=float, default=0.5,
                      help="component mean m of f = N(m, 1 - m^2)")
    sc_p.add_argument("--grid", default="0.2:6.0:50", metavar="LO:HI:NUM")

    st_p = sub.add_parser("selftest", help="run the acceptance-criteria suite")
    st_p.add_argument("--only", default=None, help="substring filter on check names")
    return parser


def _cmd_run(args) -> int:
    from .runner import run_preset

    overrides = parse_set_overrides(args.set)
    if args.seed is not None:
        overrides["seed0"] = args.seed
    manifest = run_preset(args.config, overrides, args.out)
    print(f"{manifest['name']}: wrote {len(manifest['outputs'])} files")
    for rel in manifest["outputs"]:
        print(f"  {rel}")
    return 0


def _cmd_scaling(args) -> int:
    from .rng import chain_rng
    from .scaling import optimize_ell

    try:
        lo, hi, num = args.grid.split(":")
        grid = np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise ConfigError(f"--grid expects LO:HI:NUM, got {args.grid!r}") from None
    m = args.center
    if not -1.0 < m < 1.0:
        raise ConfigError(f"--center must lie in (-1, 1), got {m!r}")
    lam = None if args.lam == 0 else args.lam
    fisher = 1.0 / (1.0 - m * m)
    opt = optimize_ell(
        grid, args.samples, chain_rng(1, 0),
        lam=lam, n_candidates=args.n, fisher_i=fisher, weight=args.weight,
    )
    print(
        f"weight={args.weight} n={args.n} lambda={args.lam} fisher_i={fisher:.6g}\n"
        f"ell*={opt.ell:.4g} esjd*={opt.esjd:.6g} (se {opt.esjd_stderr:.2g}) "
        f"acceptance={opt.acceptance:.4f} (se {opt.acceptance_stderr:.2g})"
    )
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_all

    results = run_all(only=args.only)
    failed = [r for r in results if not r.passed]
    print(f"\n{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 3


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "scaling":
            return _cmd_scaling(args)
        return _cmd_selftest(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure contract: exit 3
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
