"""Experiment commands behind the CLI: simulate, verify, trace, sweep.

Each ``cmd_*`` takes an :class:`ExperimentConfig` and returns
``(exit_code, text)``; the CLI writes the text to ``--out`` or stdout.
Exit codes: 0 pass, 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, fields

import numpy as np

from hco import inequalities
from hco.algorithms import (
    BUILTINS,
    ENUM_LIMIT_BITS,
    HybridProgram,
    build,
    builtin_bht_hybrid,
    builtin_hybrid_search,
    enumeration_oracle,
    random_program,
    run,
    success_probability,
)
from hco.errors import ParamError
from hco.oracles import (
    apply_S_all,
    apply_compressed_classical,
    apply_compressed_quantum,
    apply_standard_classical,
    apply_standard_quantum,
)
from hco.progress import (
    CollC,
    CollH,
    CollQ,
    CollQQ,
    CollX,
    PreC,
    PreQ,
    check_hd_predicate,
    cross_term,
    project,
)
from hco.statecore import OracleParams, SparseState, enumerate_consistent, is_consistent, random_state_in_A

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

VERIFY_SUITES = (
    "record-lemmas", "indistinguishability", "consistency", "ortho", "sampl",
    "progress-search", "progress-collision", "recurrence", "hdpred", "generic",
)
SIMULATE_HEADER = ["algorithm", "M", "N", "c", "q", "success", "oracle_success", "abs_diff"]
TRACE_HEADER = ["step", "kind", "psi", "norm_C", "norm_H_not_C", "norm_Q_not_H_not_C",
                "delta", "cross_HC", "cross_QH", "recurrence_ok"]
SWEEP_HEADER = ["problem", "algorithm", "M", "N", "c", "q", "c_used", "q_used",
                "success", "oracle_success", "reference", "note"]


@dataclass
class ExperimentConfig:
    command: str = "simulate"
    suite: str | None = None
    algorithm: str | None = None
    problem: str | None = None
    M: int | None = None
    N: int | None = None
    c: object = None  # int, or a list of ints for sweep
    q: object = None
    w_dim: int = 1
    seed: int = 0
    trials: int | None = None
    tol: float = 1e-9
    out: str | None = None
    picture: str = "compressed"
    trace: bool = False
    prune_eps: float | None = None
    convert_cq: bool = False

    def validate(self) -> None:
        if not self.tol > 0:
            raise ParamError(f"tolerance must be positive, got {self.tol}")
        if self.trials is not None and self.trials < 1:
            raise ParamError(f"trials must be at least 1, got {self.trials}")
        if self.picture not in ("standard", "compressed"):
            raise ParamError(f"picture must be standard or compressed, got {self.picture!r}")
        for name in ("M", "N"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ParamError(f"{name} must be positive")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def fmt(x) -> str:
    """CSV cell: floats with 17 significant digits, None as empty."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def to_json(records: list[dict]) -> str:
    return json.dumps(records, indent=1, sort_keys=True) + "\n"


def _need(cfg: ExperimentConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ParamError(f"{cfg.command} needs --{' --'.join(missing)}")


def oracle_feasible(M: int, N: int) -> bool:
    return M * math.log2(N) <= ENUM_LIMIT_BITS + 1e-12


# -- simulate ---------------------------------------------------------------------


def _program(cfg: ExperimentConfig) -> HybridProgram:
    _need(cfg, "algorithm", "M", "N")
    return build(cfg.algorithm, cfg.M, cfg.N, int(cfg.c or 0), int(cfg.q or 0), cfg.convert_cq)


def cmd_simulate(cfg: ExperimentConfig) -> tuple[int, str, str | None]:
    prog = _program(cfg)
    traj = run(prog, cfg.picture, prune_eps=cfg.prune_eps)
    succ = success_probability(traj)
    c, q = prog.counts
    oracle = enumeration_oracle(prog) if oracle_feasible(cfg.M, cfg.N) else None
    diff = None if oracle is None else abs(succ - oracle)
    text = to_csv(SIMULATE_HEADER, [[cfg.algorithm, cfg.M, cfg.N, c, q, succ, oracle, diff]])
    trace_text = None
    code = EXIT_OK if diff is None or diff <= cfg.tol else EXIT_FAIL
    if cfg.trace:
        rows, ok = trace_rows(prog, cfg.tol)
        trace_text = to_csv(TRACE_HEADER, rows)
        code = max(code, EXIT_OK if ok else EXIT_FAIL)
    return code, text, trace_text


# -- trace ------------------------------------------------------------------------

SEARCH_QNC = PreQ & ~PreC
COLL_HNC = CollH & ~CollC
COLL_QNHNC = CollQ & ~CollH & ~CollC


def trace_rows(prog: HybridProgram, tol: float = 1e-9, mode: str = "fastpath") -> tuple[list[list], bool]:
    """One row per query of the compressed trajectory, with the recurrence flag.

    Norm columns hold squared norms. For preimage programs the search
    potential is used: ``norm_Q_not_H_not_C`` holds ``PreQ.~PreC``, ``cross_QH``
    the transfer into ``PreC``, and the collision-only columns stay empty.
    """
    traj = run(prog, "compressed", mode=mode)
    N = prog.params.N
    rows, all_ok = [], True
    c = q = 0
    for step, idx in enumerate(traj.query_steps, start=1):
        kind = traj.schedule[step - 1]
        before, after = traj.states[idx - 1], traj.states[idx]
        if prog.problem == "preimage":
            nc0, nq0 = project(before, PreC).norm2(), project(before, SEARCH_QNC).norm2()
            nc1, nq1 = project(after, PreC).norm2(), project(after, SEARCH_QNC).norm2()
            psi0, psi1 = nc0 + 2 * nq0, nc1 + 2 * nq1
            cross_qh = cross_term(PreC, SEARCH_QNC, before, kind, mode)
            if kind == "C":
                ok = psi1 <= psi0 + inequalities.CONST["rec_search_c"] / N + tol
            else:
                ok = math.sqrt(psi1) <= math.sqrt(psi0) + inequalities.CONST["rec_search_q"] / math.sqrt(N) + tol
            row = [step, kind, psi1, nc1, None, nq1, psi1 - psi0, None, cross_qh, ok]
        else:
            parts0 = [project(before, P).norm2() for P in (CollC, COLL_HNC, COLL_QNHNC)]
            parts1 = [project(after, P).norm2() for P in (CollC, COLL_HNC, COLL_QNHNC)]
            psi0 = parts0[0] + 2 * parts0[1] + 4 * parts0[2]
            psi1 = parts1[0] + 2 * parts1[1] + 4 * parts1[2]
            cross_hc = cross_term(CollC, COLL_HNC, before, kind, mode)
            cross_qh = cross_term(COLL_HNC, COLL_QNHNC, before, kind, mode)
            if kind == "Q":
                bound = inequalities.CONST["rec_coll_q"] * math.sqrt((c + q) / N)
                ok = math.sqrt(psi1) <= math.sqrt(psi0) + bound + tol
            else:
                slack = inequalities.collision_classical_slack(
                    c, q, N, project(before, CollQ).norm(), project(before, CollQ & CollH).norm())
                ok = psi1 <= psi0 + slack + tol
            row = [step, kind, psi1, parts1[0], parts1[1], parts1[2], psi1 - psi0, cross_hc, cross_qh, ok]
        rows.append(row)
        all_ok &= ok
        c += kind == "C"
        q += kind == "Q"
    return rows, all_ok


def cmd_trace(cfg: ExperimentConfig) -> tuple[int, str]:
    if cfg.picture != "compressed":
        raise ParamError("trace runs on the compressed picture only")
    prog = _program(cfg)
    rows, ok = trace_rows(prog, cfg.tol)
    return (EXIT_OK if ok else EXIT_FAIL), to_csv(TRACE_HEADER, rows)


# -- sweep ------------------------------------------------------------------------


def _sweep_program(problem: str, M: int, N: int, c: int, q: int, convert_cq: bool) -> HybridProgram:
    if problem == "preimage":
        return builtin_hybrid_search(M, N, c, q)
    return builtin_bht_hybrid(M, N, c, q, convert_cq)


def reference_curve(problem: str, N: int, c: int, q: int) -> float:
    if problem == "preimage":
        return (c + q * q) / N
    return (c * c + c * q * q + q**3) / N


def cmd_sweep(cfg: ExperimentConfig) -> tuple[int, str]:
    _need(cfg, "M", "N")
    problem = cfg.problem or ("collision" if cfg.algorithm in ("bht-hybrid", "classical-birthday") else "preimage")
    if problem not in ("preimage", "collision"):
        raise ParamError(f"problem must be preimage or collision, got {problem!r}")
    cs = _as_list(cfg.c, [0, 1, 2])
    qs = _as_list(cfg.q, [0])
    rows = []
    for c, q in itertools.product(cs, qs):
        ref = reference_curve(problem, cfg.N, c, q)
        try:
            prog = _sweep_program(problem, cfg.M, cfg.N, c, q, cfg.convert_cq)
        except ParamError as exc:
            rows.append([problem, "", cfg.M, cfg.N, c, q, None, None, None, None, ref, f"skipped: {exc}"])
            continue
        succ = success_probability(run(prog, cfg.picture, prune_eps=cfg.prune_eps))
        oracle = enumeration_oracle(prog) if oracle_feasible(cfg.M, cfg.N) else None
        cu, qu = prog.counts
        rows.append([problem, prog.name, cfg.M, cfg.N, c, q, cu, qu, succ, oracle, ref, ""])
    return EXIT_OK, to_csv(SWEEP_HEADER, rows)


def _as_list(v, default: list[int]) -> list[int]:
    if v is None:
        return default
    if isinstance(v, (list, tuple)):
        return [int(x) for x in v]
    return [int(v)]


def parse_range(text: str) -> list[int]:
    """``"2"``, ``"0,1,2"`` or ``"0..2"`` as a list of ints."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


# -- verify -----------------------------------------------------------------------


def _rec(suite, name, params, trials, worst, tol, **extra) -> dict:
    rec = {"suite": suite, "predicate": name, "params": params, "trials": trials,
           "max_lhs_minus_rhs": worst, "pass": bool(worst <= tol)}
    rec.update(extra)
    return rec


def _point_grid(cfg, Ms, Ns, cs, qs):
    Ms = [cfg.M] if cfg.M is not None else Ms
    Ns = [cfg.N] if cfg.N is not None else Ns
    cs = _as_list(cfg.c, cs)
    qs = _as_list(cfg.q, qs)
    return list(itertools.product(Ms, Ns, cs, qs))


SALL_LIMIT = 1_000_000


def verify_record_lemmas(cfg: ExperimentConfig) -> list[dict]:
    """Fastpath against composed ``S^dagger O S`` on every basis state of ``A_{c,q}``,
    plus ``S_all`` conjugation on random states where the expansion stays under ``SALL_LIMIT``."""
    out = []
    for M, N, c, q in _point_grid(cfg, [2, 3, 4], [2, 3, 4], [0, 1, 2], [0, 1, 2]):
        params = OracleParams(M, N, c_max=c + 1)
        pts = {"M": M, "N": N, "c": c, "q": q}
        worst = {"Q": 0.0, "C": 0.0}
        n = 0
        for b in enumerate_consistent(params, c, q):
            s = SparseState.basis(params, b)
            n += 1
            worst["Q"] = max(worst["Q"], apply_compressed_quantum(s, "fastpath").max_abs_diff(
                apply_compressed_quantum(s, "composed")))
            worst["C"] = max(worst["C"], apply_compressed_classical(s, "fastpath").max_abs_diff(
                apply_compressed_classical(s, "composed")))
        out.append(_rec("record-lemmas", "R^Q fastpath vs composed", pts, n, worst["Q"], cfg.tol))
        out.append(_rec("record-lemmas", "R^C fastpath vs composed", pts, n, worst["C"], cfg.tol))
        size = n * N**M  # terms touched by the standard-picture expansion
        if size > SALL_LIMIT:
            note = f"skipped: standard-picture expansion {size} > {SALL_LIMIT}"
            for name in ("R^Q vs S_all O^Q S_all", "R^C vs S_all O^C S_all"):
                out.append({"suite": "record-lemmas", "predicate": name, "params": pts, "trials": 0,
                            "max_lhs_minus_rhs": None, "pass": None, "note": note})
            continue
        trials = cfg.trials or 1
        wq = wc = 0.0
        for sd in range(cfg.seed, cfg.seed + trials):
            s = random_state_in_A(params, c, q, sd)
            via_all = apply_S_all(apply_standard_quantum(apply_S_all(s)))
            wq = max(wq, via_all.distance(apply_compressed_quantum(s)))
            via_all = apply_S_all(apply_standard_classical(apply_S_all(s)))
            wc = max(wc, via_all.distance(apply_compressed_classical(s)))
        out.append(_rec("record-lemmas", "R^Q vs S_all O^Q S_all", pts, trials, wq, cfg.tol))
        out.append(_rec("record-lemmas", "R^C vs S_all O^C S_all", pts, trials, wc, cfg.tol))
    return out


def random_corpus(seed: int, trials: int) -> list[HybridProgram]:
    return [random_program(s) for s in range(seed, seed + trials)]


def verify_indistinguishability(cfg: ExperimentConfig) -> list[dict]:
    out = []
    for prog in random_corpus(cfg.seed, cfg.trials or 50):
        comp = run(prog, "compressed")
        std = run(prog, "standard")
        worst = max((apply_S_all(a).distance(b) for a, b in zip(comp.after_queries(), std.after_queries())),
                    default=0.0)
        worst = max(worst, apply_S_all(comp.final).distance(std.final))
        prm = prog.params
        out.append(_rec("indistinguishability", f"{prog.name} {prog.schedule}",
                        {"M": prm.M, "N": prm.N, "c": prog.counts[0], "q": prog.counts[1]}, 1, worst, cfg.tol))
    return out


def consistency_violations(prog: HybridProgram) -> tuple[int, int]:
    """``(violations, terms checked)`` over the compressed states after each query."""
    traj = run(prog, "compressed")
    bad = total = 0
    c = q = 0
    for kind, idx in zip(traj.schedule, traj.query_steps):
        c += kind == "C"
        q += kind == "Q"
        for b in traj.states[idx].terms:
            total += 1
            bad += not is_consistent(b, c, q)
    return bad, total


def verify_consistency(cfg: ExperimentConfig) -> list[dict]:
    out = []
    for prog in random_corpus(cfg.seed, cfg.trials or 50):
        bad, total = consistency_violations(prog)
        prm = prog.params
        out.append(_rec("consistency", f"{prog.name} {prog.schedule}",
                        {"M": prm.M, "N": prm.N, "c": prog.counts[0], "q": prog.counts[1]},
                        total, float(bad), 0.0, violations=bad))
    return out


def verify_inequalities(cfg: ExperimentConfig, suite: str) -> list[dict]:
    if suite == "ortho":
        grid = _point_grid(cfg, [3, 4, 5], [3, 4, 5], [1, 2], [1, 2])
    else:
        grid = _point_grid(cfg, [3, 4, 5], [3, 4, 5], [0, 1, 2], [0, 1, 2])
    return inequalities.run_suite(grid, cfg.trials or 100, cfg.seed, cfg.tol, (suite,))


TRAJECTORY_CASES = (
    ("classical-search", 4, 4, 3, 0),
    ("grover", 4, 2, 0, 2),
    ("grover", 4, 4, 0, 2),
    ("grover", 4, 4, 0, 4),
    ("classical-birthday", 4, 4, 3, 0),
    ("bht-hybrid", 4, 4, 2, 2),
    ("bht-hybrid", 4, 4, 1, 4),
    ("bht-hybrid", 4, 3, 2, 2),
)


def verify_trajectory_recurrences(cfg: ExperimentConfig) -> list[dict]:
    out = []
    cases = TRAJECTORY_CASES
    if cfg.algorithm is not None:
        cases = [(cfg.algorithm, cfg.M or 4, cfg.N or 4, int(cfg.c or 0), int(cfg.q or 0))]
    for name, M, N, c, q in cases:
        prog = build(name, M, N, c, q, cfg.convert_cq)
        rows, ok = trace_rows(prog, cfg.tol)
        cu, qu = prog.counts
        out.append({"suite": "recurrence", "predicate": f"trajectory {name}",
                    "params": {"M": M, "N": N, "c": cu, "q": qu}, "trials": len(rows),
                    "max_lhs_minus_rhs": None, "pass": bool(ok),
                    "failed_steps": [r[0] for r in rows if not r[-1]]})
    return out


HD_EXPECT = (
    ("CollQ", CollQ, True), ("CollQQ", CollQQ, True), ("CollH", CollH, True),
    ("CollQ+CollH", CollQ | CollH, True), ("CollQQ+CollQ.CollH", CollQQ | (CollQ & CollH), True),
    ("~(CollH+CollC)", ~(CollH | CollC), False),
)


def verify_hdpred(cfg: ExperimentConfig) -> list[dict]:
    M, N = cfg.M or 3, cfg.N or 3
    c, q = int(cfg.c if cfg.c is not None else 1), int(cfg.q if cfg.q is not None else 2)
    params = OracleParams(M, N, c_max=c)
    cases = [(name, P, exp, params, c, q) for name, P, exp in HD_EXPECT]
    if cfg.M is None and cfg.N is None:
        cases.append(("CollX", CollX, False, OracleParams(3, 2, c_max=1), 1, 2))
    out = []
    for name, P, expected, prm, cc, qq in cases:
        rep = check_hd_predicate(P, prm, cc, qq)
        got = rep.is_hd_predicate
        rec = {"suite": "hdpred", "predicate": name,
               "params": {"M": prm.M, "N": prm.N, "c": cc, "q": qq}, "trials": rep.states_checked,
               "max_lhs_minus_rhs": None, "pass": got == expected and (expected or bool(rep.counterexamples)),
               "expected_hd_predicate": expected, "history_invariant": rep.history_invariant,
               "database_monotone": rep.database_monotone,
               "counterexample": _describe(rep.counterexamples[0], prm) if rep.counterexamples else None}
        out.append(rec)
    return out


def _describe(ce: dict, params: OracleParams) -> str:
    from hco.statecore import serialize

    if ce["kind"] == "database-monotone":
        return f"fill {ce['fill']} into {serialize(ce['state'], params.c_max)}"
    return "histories " + "; ".join(f"{h}->{v}" for h, v in ce["histories"])


def cmd_verify(cfg: ExperimentConfig) -> tuple[int, str]:
    _need(cfg, "suite")
    suites = VERIFY_SUITES if cfg.suite == "all" else (cfg.suite,)
    records: list[dict] = []
    for suite in suites:
        if suite not in VERIFY_SUITES:
            raise ParamError(f"unknown suite {suite!r}; choose from {', '.join(VERIFY_SUITES)} or all")
        if suite == "record-lemmas":
            records += verify_record_lemmas(cfg)
        elif suite == "indistinguishability":
            records += verify_indistinguishability(cfg)
        elif suite == "consistency":
            records += verify_consistency(cfg)
        elif suite == "hdpred":
            records += verify_hdpred(cfg)
        elif suite == "recurrence":
            records += verify_inequalities(cfg, "recurrence")
            records += verify_trajectory_recurrences(cfg)
        else:
            records += verify_inequalities(cfg, suite)
    failed = any(r["pass"] is False for r in records)
    return (EXIT_FAIL if failed else EXIT_OK), to_json(records)


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "trace": cmd_trace, "sweep": cmd_sweep}
