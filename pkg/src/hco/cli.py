"""Command line entry point: ``hco {simulate,verify,trace,sweep,list}``.

Values come from built-in defaults, then a JSON ``--config`` file, then
explicit flags (flags win). Exit status: 0 pass, 1 check failure, 2 usage
or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from hco.algorithms import BUILTINS, build
from hco.errors import HCOError
from hco.harness import (
    COMMANDS,
    EXIT_USAGE,
    VERIFY_SUITES,
    ExperimentConfig,
    parse_range,
)

DEFAULTS = ExperimentConfig()


def _int_or_range(text: str):
    vals = parse_range(text)
    return vals[0] if len(vals) == 1 else vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hco",
        description="Hybrid compressed-oracle simulator and verifier.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with config fields; flags override it")
    common.add_argument("--M", type=int, help="domain size (default: per command)")
    common.add_argument("--N", type=int, help="range size (default: per command)")
    common.add_argument("--c", type=_int_or_range,
                        help="classical query budget; sweep accepts 0..2 or 0,1,2 (default: 0)")
    common.add_argument("--q", type=_int_or_range,
                        help="quantum query budget; sweep accepts 0..2 or 0,1,2 (default: 0)")
    common.add_argument("--w-dim", dest="w_dim", type=int,
                        help=f"workspace size; built-ins size their own workspace (default: {DEFAULTS.w_dim})")
    common.add_argument("--seed", type=int, help=f"first random seed (default: {DEFAULTS.seed})")
    common.add_argument("--trials", type=int,
                        help="random states or programs per check (default: 100 states, 50 programs)")
    common.add_argument("--tol", type=float, help=f"pass tolerance (default: {DEFAULTS.tol:g})")
    common.add_argument("--picture", choices=["standard", "compressed"],
                        help=f"simulation picture (default: {DEFAULTS.picture})")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--suite", help=f"verify suite: {', '.join(VERIFY_SUITES)} or all")
    common.add_argument("--algorithm", help=f"built-in: {', '.join(BUILTINS)}")
    common.add_argument("--problem", choices=["preimage", "collision"], help="sweep target problem")
    common.add_argument("--trace", action="store_true",
                        help="simulate: also write per-query trace rows to <out>.trace.csv (or stdout)")
    common.add_argument("--prune-eps", dest="prune_eps", type=float,
                        help="drop amplitudes below this magnitude after each step (default: off)")
    common.add_argument("--convert-cq", dest="convert_cq", action="store_true",
                        help="bht-hybrid: spend half the quantum budget as classical lookups")

    sub.add_parser("simulate", parents=[common], help="run a built-in and compare with the enumeration oracle")
    sub.add_parser("verify", parents=[common], help="run a verification suite, JSON report")
    sub.add_parser("trace", parents=[common], help="per-query progress measures of a built-in")
    sub.add_parser("sweep", parents=[common], help="success over a (c, q) grid next to reference curves")
    sub.add_parser("list", help="list built-in algorithms with their query accounting")
    return ap


def resolve_config(ns: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the JSON config, then flags."""
    values: dict = {}
    flags = vars(ns).copy()
    path = flags.pop("config", None)
    if path:
        with open(path) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(ExperimentConfig.field_names())
        if unknown:
            raise HCOError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    values.update(flags)
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_list() -> str:
    lines = ["algorithm,declared,notes (shown at M=4 N=4 c=2 q=2)"]
    for name in BUILTINS:
        prog = build(name, 4, 4, 2, 2)
        c, q = prog.counts
        lines.append(f"{name},c={c} q={q},{prog.notes}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    if ns.command == "list":
        sys.stdout.write(cmd_list())
        return 0
    try:
        cfg = resolve_config(ns)
        result = COMMANDS[cfg.command](cfg)
    except (HCOError, ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"hco {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, text = result[0], result[1]
    _write(cfg.out, text)
    if len(result) > 2 and result[2] is not None:
        _write(None if cfg.out is None else cfg.out + ".trace.csv", result[2])
    return code


if __name__ == "__main__":
    sys.exit(main())
