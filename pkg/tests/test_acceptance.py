"""Acceptance criteria, one PASS/FAIL line each.

    pytest tests/test_acceptance.py         # lines repeated in the summary
    python3 tests/test_acceptance.py        # standalone summary
"""

import math
import time

import pytest

from hco import cli, inequalities
from hco.algorithms import build, builtin_classical_birthday, builtin_classical_search, enumeration_oracle, run, \
    success_probability
from hco.harness import (
    ExperimentConfig,
    consistency_violations,
    random_corpus,
    verify_hdpred,
    verify_indistinguishability,
    verify_record_lemmas,
    verify_trajectory_recurrences,
)

TOL = 1e-9
LIMITS = {1: 60.0, 2: 120.0, 5: 300.0}  # seconds
CORPUS = 50
TRIALS = 100
INEQ_SUITES = ("sampl", "progress-search", "progress-collision")


LINES: list[str] = []  # echoed again in the terminal summary by conftest.py


def report(n, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title} ({detail})"
    LINES.append(line)
    print("\n" + line, flush=True)
    return line


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def test_c1_record_lemmas():
    recs, secs = timed(verify_record_lemmas, ExperimentConfig(command="verify", suite="record-lemmas"))
    worst = max(r["max_lhs_minus_rhs"] for r in recs if r["trials"])
    basis = [r for r in recs if "composed" in r["predicate"]]
    ok = len(basis) == 162 and all(r["pass"] is not False for r in recs) and secs < LIMITS[1]
    report(1, "fastpath record operators equal composed form", ok,
           f"{len(basis)} exhaustive records over M,N in 2..4, c,q in 0..2, max diff {worst:.2e}, {secs:.1f}s < {LIMITS[1]:.0f}s")
    assert len(basis) == 162 and all(r["pass"] for r in basis)
    assert worst <= TOL
    assert secs < LIMITS[1]


def test_c2_indistinguishability():
    cfg = ExperimentConfig(command="verify", suite="indistinguishability", trials=CORPUS)
    recs, secs = timed(verify_indistinguishability, cfg)
    worst = max(r["max_lhs_minus_rhs"] for r in recs)
    ok = len(recs) == CORPUS and worst <= TOL and secs < LIMITS[2]
    report(2, "S_all maps compressed onto standard after every query", ok,
           f"{len(recs)} programs, max distance {worst:.2e}, {secs:.1f}s < {LIMITS[2]:.0f}s")
    assert len(recs) == CORPUS and worst <= TOL
    assert secs < LIMITS[2]


def test_c2_corpus_is_desk_scale():
    for prog in random_corpus(0, CORPUS):
        c, q = prog.counts
        assert c + q <= 4 and prog.params.M <= 4 and prog.params.N <= 4


def test_c3_consistency():
    bad = total = 0
    for prog in random_corpus(0, CORPUS):
        b, t = consistency_violations(prog)
        bad, total = bad + b, total + t
    report(3, "compressed support is consistent with current counts", bad == 0,
           f"{bad} violations in {total} terms over {CORPUS} programs")
    assert total > 0 and bad == 0


def test_c4_ortho():
    grid = [(M, N, c, q) for M in (3, 4, 5) for N in (3, 4, 5) for c in (1, 2) for q in (1, 2)]
    recs = inequalities.run_suite(grid, TRIALS, 0, TOL, ("ortho",))
    checked = [r for r in recs if r["trials"]]
    names = {r["predicate"] for r in checked}
    worst = max(r["max_lhs_minus_rhs"] for r in checked)
    ok = len(names) == 9 and worst <= TOL and all(r["pass"] is not False for r in recs)
    report(4, "nine orthogonality quantities vanish", ok,
           f"{len(names)} quantities x {len(grid)} grid points, {TRIALS} states each, max {worst:.2e}")
    assert len(names) == 9
    assert worst <= TOL


def test_c5_inequality_suite():
    recs, secs = timed(inequalities.run_suite, inequalities.DEFAULT_GRID, TRIALS, 0, TOL, INEQ_SUITES)
    failed = [r for r in recs if r["pass"] is False]
    per = {}
    for r in recs:
        if r["max_lhs_minus_rhs"] is not None:
            per[r["predicate"]] = max(per.get(r["predicate"], -math.inf), r["max_lhs_minus_rhs"])
    ok = not failed and secs < LIMITS[5]
    report(5, "explicit-constant inequalities hold", ok,
           f"{len(per)} inequalities, {len(recs)} records, {len(failed)} failed, "
           f"max lhs-rhs {max(per.values()):.2e}, {secs:.1f}s < {LIMITS[5]:.0f}s")
    assert per and not failed
    assert secs < LIMITS[5]


def test_c6_recurrences():
    recs = verify_trajectory_recurrences(ExperimentConfig(command="verify", suite="recurrence"))
    rows = sum(r["trials"] for r in recs)
    bad = [(r["predicate"], r["failed_steps"]) for r in recs if not r["pass"]]
    report(6, "potential recurrences hold on every trajectory row", not bad,
           f"{len(recs)} built-in trajectories, {rows} rows, {len(bad)} failing")
    assert rows > 0 and not bad


EXACT = [
    ("classical-search", 2, 2, 1, 0, 0.5),
    ("classical-search", 2, 2, 2, 0, 0.75),
    ("classical-birthday", 3, 2, 3, 0, 1.0),
] + [("grover", 4, 4, 0, q, None) for q in (0, 2)] + [
    ("bht-hybrid", 4, 4, c, q, None) for c in (0, 1, 2) for q in (0, 2)]


def test_c7_exact_probabilities():
    worst = 0.0
    for name, M, N, c, q, expected in EXACT:
        prog = build(name, M, N, c, q)
        p = success_probability(run(prog))
        ref = enumeration_oracle(prog)
        worst = max(worst, abs(p - ref))
        if expected is not None:
            worst = max(worst, abs(p - expected))
    for N in (2, 3, 4, 5):
        for c in range(0, min(N, 4) + 1):
            M = max(c, 2)
            if c >= 1:
                p = success_probability(run(builtin_classical_search(M, N, c)))
                worst = max(worst, abs(p - (1 - (1 - 1 / N) ** c)))
            if c >= 2 and M**N <= 10**6:
                p = success_probability(run(builtin_classical_birthday(M, N, c)))
                worst = max(worst, abs(p - (1 - math.perm(N, c) / N**c)))
    report(7, "exact success probabilities and closed forms", worst <= TOL,
           f"{len(EXACT)} programs vs enumeration plus closed forms, max diff {worst:.2e}")
    assert worst <= TOL


def test_c8_hd_predicates():
    recs = verify_hdpred(ExperimentConfig(command="verify", suite="hdpred"))
    main = [r for r in recs if r["params"] == {"M": 3, "N": 3, "c": 1, "q": 2}]
    neg = next(r for r in main if r["predicate"] == "~(CollH+CollC)")
    ok = all(r["pass"] for r in recs) and not neg["database_monotone"] and neg["counterexample"]
    report(8, "hd-predicate classification at M=3,N=3,c=1,q=2", ok,
           f"{len(main)} predicates classified, counterexample: {neg['counterexample']}")
    assert all(r["pass"] for r in main)
    assert not neg["database_monotone"] and neg["counterexample"]


COMMANDS = [
    ["simulate", "--algorithm", "bht-hybrid", "--M", "4", "--N", "4", "--c", "2", "--q", "2"],
    ["trace", "--algorithm", "grover", "--M", "4", "--N", "4", "--q", "2"],
    ["sweep", "--problem", "collision", "--M", "4", "--N", "3", "--c", "0..2", "--q", "0,2"],
    ["verify", "--suite", "indistinguishability", "--trials", "5", "--seed", "7"],
    ["verify", "--suite", "sampl", "--M", "3", "--N", "3", "--c", "1", "--q", "1", "--trials", "10"],
    ["verify", "--suite", "hdpred"],
]


def test_c9_determinism(tmp_path):
    same = 0
    for i, argv in enumerate(COMMANDS):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{i}_{rep}.out"
            assert cli.main(argv + ["--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same += outs[0] == outs[1] and len(outs[0]) > 0
    report(9, "repeated commands give byte-identical output", same == len(COMMANDS),
           f"{same}/{len(COMMANDS)} commands identical")
    assert same == len(COMMANDS)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
