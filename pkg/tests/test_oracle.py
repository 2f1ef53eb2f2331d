"""Oracle client tests: builtin and subprocess backends, wire-protocol parsing,
probe, and the failure paths (unsat, garbage output, missing binary, timeout)."""

import os
import stat
import sys
import textwrap

import pytest

from caspr.core import atom
from caspr.parser import parse_program, parse_quantified
from caspr.oracle import (
    SolveStatus,
    SolverConfig,
    SolverProtocolError,
    SolverSpawnError,
    enumerate_optimal,
    probe,
    solve_optimal,
)
from caspr.transform import ctr, fix

EXTERNAL = SolverConfig(command=f"{sys.executable} -m caspr.solver_cli")


def fake_solver(tmp_path, body: str) -> SolverConfig:
    path = tmp_path / "fake-solver"
    path.write_text("#!/bin/sh\n" + body + "\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return SolverConfig(command=str(path), timeout=2.0)


def test_solve_optimal_countermove_program(appc, cfg):
    p = ctr(appc) + fix(appc.p1, frozenset({atom("na"), atom("nb")}))
    out = solve_optimal(p, cfg)
    assert out.status is SolveStatus.OPTIMUM_FOUND
    names = {str(a) for a in out.models[0]}
    assert {"na", "nb", "nc", "caspr_v"} <= names
    assert "caspr_unsat" not in names


def test_solve_optimal_unsat(cfg):
    out = solve_optimal(parse_program("a. :- a."), cfg)
    assert out.status is SolveStatus.UNSAT
    assert out.models == []


def test_solve_optimal_prefers_low_cost(cfg):
    out = solve_optimal(parse_program("a :- not b. b :- not a. :~ a. [1@1]"), cfg)
    model = {str(a) for a in out.models[0]}
    assert "b" in model and "a" not in model


def test_enumerate_example_first_program(ex1, cfg):
    out = enumerate_optimal(ex1.p1, cfg)
    assert out.status is SolveStatus.OPTIMUM_FOUND
    models = sorted(sorted(str(a) for a in m) for m in out.models)
    assert models == [["a", "b"], ["a", "nb"], ["b", "na"], ["na", "nb"]]


def test_enumerate_inner_program_unique_optimum(ex1, cfg):
    p = ex1.p2 + fix(ex1.p1, frozenset({atom("a"), atom("nb")}))
    out = enumerate_optimal(p, cfg)
    kept = [sorted(str(a) for a in m if not str(a).startswith("caspr_")) for m in out.models]
    assert kept == [["a", "c", "nb"]]


def test_enumerate_inner_program_two_optima(ex1, cfg):
    p = ex1.p2 + fix(ex1.p1, frozenset({atom("a"), atom("b")}))
    out = enumerate_optimal(p, cfg)
    kept = sorted(sorted(str(a) for a in m if not str(a).startswith("caspr_")) for m in out.models)
    assert kept == [["a", "b", "c"], ["a", "b", "nc"]]


def test_external_backend_agrees_with_builtin(ex1, cfg):
    for prog in (ex1.p1, ex1.p2 + fix(ex1.p1, frozenset({atom("a"), atom("b")}))):
        builtin = enumerate_optimal(prog, cfg)
        external = enumerate_optimal(prog, EXTERNAL)
        assert builtin.status == external.status
        assert builtin.models == external.models


def test_external_unsat(cfg):
    out = solve_optimal(parse_program("a. :- a."), EXTERNAL)
    assert out.status is SolveStatus.UNSAT


def test_model_limit_trims_enumeration(ex1):
    out = enumerate_optimal(ex1.p1, SolverConfig(model_limit=2))
    assert len(out.models) == 2


def test_probe_builtin(cfg):
    assert "caspr" in probe(cfg)


def test_probe_external():
    assert probe(EXTERNAL).startswith("caspr-solver")


def test_probe_missing_binary():
    with pytest.raises(SolverSpawnError):
        probe(SolverConfig(command="/nonexistent-solver"))


def test_probe_garbage_output(tmp_path):
    cfg = fake_solver(tmp_path, "echo 'hello world'; echo 'more noise'")
    with pytest.raises(SolverProtocolError):
        probe(cfg)


def test_garbage_output_is_protocol_error(tmp_path):
    cfg = fake_solver(tmp_path, "echo 'Answer: 1'; echo '???bad atom???'; echo SATISFIABLE")
    with pytest.raises(SolverProtocolError):
        solve_optimal(parse_program("a."), cfg)


def test_missing_status_is_protocol_error(tmp_path):
    cfg = fake_solver(tmp_path, "echo 'Answer: 1'; echo 'a'")
    with pytest.raises(SolverProtocolError):
        solve_optimal(parse_program("a."), cfg)


def test_timeout_yields_unknown(tmp_path):
    cfg = fake_solver(tmp_path, "sleep 30")
    cfg.timeout = 0.3
    out = solve_optimal(parse_program("a."), cfg)
    assert out.status is SolveStatus.UNKNOWN
    assert out.models == []


def test_env_variable_overrides_command(monkeypatch, ex1):
    monkeypatch.setenv("CASPR_SOLVER", f"{sys.executable} -m caspr.solver_cli")
    out = enumerate_optimal(ex1.p1, SolverConfig())
    assert len(out.models) == 4


def test_optn_retention_drops_improving_models(tmp_path):
    # blocks before the final Optimization value are discarded
    script = textwrap.dedent(
        """\
        cat > /dev/null
        echo "fake version 1"
        echo "Answer: 1"
        echo "a b"
        echo "Optimization: 2"
        echo "Answer: 2"
        echo "b"
        echo "Optimization: 1"
        echo "Answer: 3"
        echo "c"
        echo "Optimization: 1"
        echo "OPTIMUM FOUND"
        """
    )
    cfg = fake_solver(tmp_path, script)
    out = enumerate_optimal(parse_program("a."), cfg)
    models = sorted(sorted(map(str, m)) for m in out.models)
    assert models == [["b"], ["c"]]
    assert out.raw_cost_lines[-1] == "Optimization: 1"


def test_models_all_satisfy_constraints_and_optimality(cfg):
    import random

    from support import brute_optimal_answer_sets, random_ground_program

    rng = random.Random(5)
    for _ in range(40):
        p = random_ground_program(rng)
        out = enumerate_optimal(p, cfg)
        opt = {frozenset(m) for m in brute_optimal_answer_sets(p)}
        assert {frozenset(m) for m in out.models} == opt
        assert len(set(out.models)) == len(out.models)
