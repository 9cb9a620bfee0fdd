"""Run every verification suite and write one JSON report per suite.

    python3 scripts/verify_all.py --out-dir reports
    python3 scripts/verify_all.py --suites ortho sampl --trials 20

Prints a one-line summary per suite (records, failures, seconds) and exits
non-zero if any record fails.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from hco.harness import VERIFY_SUITES, ExperimentConfig, cmd_verify


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="reports")
    ap.add_argument("--suites", nargs="+", default=list(VERIFY_SUITES), choices=VERIFY_SUITES)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--tol", type=float, default=1e-9)
    args = ap.parse_args(argv)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    worst_code = 0
    for suite in args.suites:
        cfg = ExperimentConfig(command="verify", suite=suite, seed=args.seed, trials=args.trials, tol=args.tol)
        cfg.validate()
        t0 = time.perf_counter()
        code, text = cmd_verify(cfg)
        secs = time.perf_counter() - t0
        (out / f"{suite}.json").write_text(text)
        recs = json.loads(text)
        failed = sum(r["pass"] is False for r in recs)
        print(f"{suite:22s} records={len(recs):5d} failed={failed:3d} {secs:8.1f}s")
        worst_code = max(worst_code, code)
    return worst_code


if __name__ == "__main__":
    sys.exit(main())
