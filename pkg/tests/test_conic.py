import concurrent.futures
import math
import os

import numpy as np
import pytest

from sigcert import (
    Aff,
    BackendFailure,
    ClarabelBackend,
    ConicProgram,
    ScsBackend,
    SolverOptions,
    add_relative_entropy_epigraph,
    default_backend,
)
from sigcert.conic import INFEASIBLE, OPTIMAL, UNBOUNDED, _exp_cone_violation, solve


def test_aff_arithmetic():
    e = 2.0 * Aff.var(0) + Aff.var(1) - 3.0
    e = e + Aff.var(0)
    assert e.terms == {0: 3.0, 1: 1.0}
    assert e.const == -3.0
    assert (-e).terms[0] == -3.0
    assert e.value(np.array([1.0, 2.0])) == pytest.approx(2.0)


def test_min_t_exp_cone(backend):
    # min t s.t. (0, 1, t) in Kexp  ->  t* = e^0 = 1
    prog = ConicProgram()
    t = prog.add_var()
    prog.add_exp_cone(Aff.constant(0.0), Aff.constant(1.0), Aff.var(t))
    prog.minimize(Aff.var(t))
    result = backend.solve(prog)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(1.0, abs=1e-8)


def test_min_t_soc(backend):
    prog = ConicProgram()
    t = prog.add_var()
    prog.add_soc(Aff.var(t), [Aff.constant(3.0), Aff.constant(4.0)])
    prog.minimize(Aff.var(t))
    result = backend.solve(prog)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(5.0, abs=1e-8)


def test_infeasible_linear_system(backend):
    prog = ConicProgram()
    x = prog.add_var()
    prog.add_ineq(Aff.var(x), 0.0)  # x <= 0
    prog.add_ineq(-Aff.var(x), -1.0)  # x >= 1
    prog.minimize(Aff.var(x))
    assert backend.solve(prog).status == INFEASIBLE


def test_unbounded(backend):
    prog = ConicProgram()
    x = prog.add_var()
    prog.add_ineq(Aff.var(x), 5.0)
    prog.minimize(Aff.var(x))
    assert backend.solve(prog).status == UNBOUNDED


def test_maximize_sense(backend):
    prog = ConicProgram()
    x = prog.add_var()
    prog.add_ineq(Aff.var(x), 5.0)
    prog.maximize(Aff.var(x))
    result = backend.solve(prog)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(5.0, abs=1e-9)


# -- relative entropy epigraph ------------------------------------------------


def test_relative_entropy_examples_feasibility():
    # (v, c, u) = (1, 1, 0): 1*ln(1/1) = 0 <= 0, exactly feasible
    assert _exp_cone_violation(0.0, 1.0, 1.0) == 0.0
    # (v, c, u) = (1, e, -1): boundary, ln(1/e) = -1
    assert _exp_cone_violation(1.0, 1.0, math.e) == pytest.approx(0.0, abs=1e-15)
    # (v, c, u) = (2, 1, 1): 2 ln 2 ~ 1.386 > 1, infeasible
    assert _exp_cone_violation(-1.0, 2.0, 1.0) > 0.1


def test_relative_entropy_boundary_via_solver(backend):
    # min u s.t. u >= v ln(v/c) with (v, c) = (1, e)  ->  u* = -1
    prog = ConicProgram()
    u = prog.add_var()
    add_relative_entropy_epigraph(prog, Aff.constant(1.0), Aff.constant(math.e), Aff.var(u))
    prog.minimize(Aff.var(u))
    result = backend.solve(prog)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(-1.0, abs=1e-8)


def test_relative_entropy_infeasible_point(backend):
    # (v, c, u) = (2, 1, 1): fixing all three makes the program infeasible
    prog = ConicProgram()
    u = prog.add_var()
    prog.add_eq(Aff.var(u), 1.0)
    add_relative_entropy_epigraph(prog, Aff.constant(2.0), Aff.constant(1.0), Aff.var(u))
    prog.minimize(Aff.constant(0.0))
    assert backend.solve(prog).status == INFEASIBLE


def test_relative_entropy_scalar_oracle(backend):
    # u pinned at the scalar value v*ln(v/c) is always feasible (within 1e-9)
    rng = np.random.default_rng(123)
    pairs = rng.uniform(0.1, 10.0, size=(100, 2))
    for v, c in pairs:
        u = v * math.log(v / c)
        assert _exp_cone_violation(-u, v, c) <= 1e-9
    for v, c in pairs[:5]:
        u = v * math.log(v / c)
        prog = ConicProgram()
        uv = prog.add_var()
        prog.add_eq(Aff.var(uv), u + 1e-12)
        add_relative_entropy_epigraph(prog, Aff.constant(v), Aff.constant(c), Aff.var(uv))
        prog.minimize(Aff.constant(0.0))
        assert backend.solve(prog).status == OPTIMAL


def test_zero_log_zero_convention(backend):
    # v = 0 with c = 0 sits in the cone closure: minimizing u must reach 0
    prog = ConicProgram()
    u = prog.add_var()
    prog.add_ineq(-Aff.var(u))  # u >= 0
    add_relative_entropy_epigraph(prog, Aff.constant(0.0), Aff.constant(0.0), Aff.var(u))
    prog.minimize(Aff.var(u))
    result = backend.solve(prog)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(0.0, abs=1e-9)


# -- contract -------------------------------------------------------------------


def _sample_program():
    prog = ConicProgram()
    x, y, t = prog.add_vars(3)
    prog.add_eq(Aff.var(x) + Aff.var(y), 2.0)
    prog.add_ineq(Aff.var(x), 1.5)
    prog.add_soc(Aff.var(t), [Aff.var(x), Aff.var(y)])
    prog.add_exp_cone(Aff.var(x) - 1.0, Aff.constant(1.0), Aff.var(t))
    prog.minimize(Aff.var(t))
    return prog


def test_optimal_residual_within_tolerance(backend):
    opts = SolverOptions()
    result = backend.solve(_sample_program(), opts)
    assert result.status == OPTIMAL
    assert result.residual <= opts.feas_tol


def test_program_json_roundtrip(backend):
    prog = _sample_program()
    again = ConicProgram.loads(prog.dumps())
    assert again.to_json_dict() == prog.to_json_dict()
    a = backend.solve(prog)
    b = backend.solve(again)
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_variable_index_validation():
    prog = ConicProgram()
    prog.add_var()
    with pytest.raises(ValueError):
        prog.add_eq(Aff.var(3), 0.0)


def test_backend_selection_env(monkeypatch):
    monkeypatch.setenv("SIGCERT_SOLVER", "scs")
    assert default_backend().name == "scs"
    monkeypatch.delenv("SIGCERT_SOLVER")
    assert default_backend().name == "clarabel"
    with pytest.raises(BackendFailure):
        default_backend("grapefruit")


def test_scs_backend_agrees_with_clarabel():
    prog = _sample_program()
    opts = SolverOptions(feas_tol=1e-6, gap_tol=1e-6, solve_tol=1e-9)
    a = ClarabelBackend().solve(prog, opts)
    b = ScsBackend().solve(prog, opts)
    assert a.status == OPTIMAL
    assert b.status == OPTIMAL
    assert a.objective == pytest.approx(b.objective, abs=1e-5)


def test_concurrent_solves_match_sequential(backend):
    progs = []
    for k in range(8):
        prog = ConicProgram()
        t = prog.add_var()
        prog.add_soc(Aff.var(t), [Aff.constant(3.0 + k), Aff.constant(4.0)])
        prog.minimize(Aff.var(t))
        progs.append(prog)
    sequential = [backend.solve(p).objective for p in progs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        concurrent_results = list(pool.map(lambda p: backend.solve(p).objective, progs))
    assert sequential == pytest.approx(concurrent_results, abs=1e-12)
    assert sequential == pytest.approx(
        [math.hypot(3.0 + k, 4.0) for k in range(8)], abs=1e-8
    )


def test_solve_helper(backend):
    result = solve(_sample_program())
    assert result.status == OPTIMAL
