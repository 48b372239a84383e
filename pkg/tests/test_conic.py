import numpy as np
import pytest

from dnekit import conic
from dnekit.conic import (Backend, BackendCapabilityError, ConicError, ProgramBuilder,
                          SolveSettings, dump_program, load_program, register_backend,
                          solve, verify)


def lower_bound_program():
    pb = ProgramBuilder()
    x = pb.add_var(lb=3.0)
    pb.add_objective({x: 1.0})
    return pb.build()


def soc_norm_program():
    # min t s.t. ||(1, 1)|| <= t
    pb = ProgramBuilder()
    t = pb.add_var()
    pb.add_soc_affine(({t: 1.0}, 0.0), [({}, 1.0), ({}, 1.0)])
    pb.add_objective({t: 1.0})
    return pb.build()


def psd_program():
    # min x s.t. [[x, 1], [1, x]] >> 0  ->  x = 1
    pb = ProgramBuilder()
    x = pb.add_var()
    pb.add_psd(np.array([[0.0, 1.0], [1.0, 0.0]]), {x: np.eye(2)})
    pb.add_objective({x: 1.0})
    return pb.build()


def test_linear_bound():
    sol = solve(lower_bound_program())
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_soc_norm():
    sol = solve(soc_norm_program())
    assert sol.objective == pytest.approx(np.sqrt(2.0), abs=1e-7)


@pytest.mark.parametrize("backend", ["clarabel", "scs"])
def test_psd_identity(backend):
    sol = solve(psd_program(), SolveSettings(backend=backend))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0, abs=1e-6)


def test_backends_agree_on_psd():
    a = solve(psd_program(), SolveSettings(backend="clarabel")).objective
    b = solve(psd_program(), SolveSettings(backend="scs")).objective
    assert a == pytest.approx(b, abs=1e-6)


def test_quadratic_epigraph_tight():
    pb = ProgramBuilder()
    x = pb.add_var(lb=3.0, ub=3.0)
    q, unit = pb.add_quadratic_epigraph(x, 1.0, magnitude=9.0)
    pb.add_objective({q: unit})
    sol = solve(pb.build())
    assert sol.objective == pytest.approx(9.0, abs=1e-6)


def test_verify_passes_on_optimal():
    for prog in (lower_bound_program(), soc_norm_program(), psd_program()):
        sol = solve(prog)
        assert verify(prog, sol.primal, 1e-6).passed


def test_verify_flags_perturbed_primal():
    prog = soc_norm_program()
    sol = solve(prog)
    bad = sol.primal.copy()
    bad[0] += 1.0  # t no longer matches its pinned aux row
    report = verify(prog, bad, 1e-6)
    assert not report.passed
    assert report.max_residual > 1e-6


def test_verify_names_offending_psd_block():
    pb = ProgramBuilder()
    x = pb.add_var()
    pb.add_psd(np.zeros((2, 2)), {x: np.eye(2)})
    prog = pb.build()
    report = verify(prog, np.array([-1e-3]), 1e-6)
    assert not report.passed
    assert report.min_psd_eig == pytest.approx(-1e-3, rel=1e-9)
    assert "psd block 0" in report.worst_label


def test_redundant_row_does_not_move_objective():
    pb = ProgramBuilder()
    x = pb.add_var()
    pb.add_ineq({x: -1.0}, -3.0)
    pb.add_objective({x: 1.0})
    base = solve(pb.build()).objective
    pb.add_ineq({x: -1.0}, -3.0)  # duplicate
    again = solve(pb.build()).objective
    assert abs(base - again) <= 1e-8


def test_solve_is_deterministic():
    prog = psd_program()
    a = solve(prog)
    b = solve(prog)
    assert np.array_equal(a.primal, b.primal)
    assert a.objective == b.objective


def test_infeasible_detected():
    pb = ProgramBuilder()
    x = pb.add_var(lb=3.0, ub=2.0)
    pb.add_objective({x: 1.0})
    assert solve(pb.build()).status == "infeasible"


def test_unbounded_detected():
    pb = ProgramBuilder()
    x = pb.add_var()
    pb.add_objective({x: 1.0})
    assert solve(pb.build()).status == "unbounded"


def test_unknown_backend_rejected():
    with pytest.raises(ConicError, match="unknown backend"):
        solve(lower_bound_program(), SolveSettings(backend="nope"))


def test_soc_only_backend_refuses_psd():
    register_backend(Backend("soc-only-test", supports_psd=False,
                             solve_fn=conic._solve_clarabel))
    with pytest.raises(BackendCapabilityError):
        solve(psd_program(), SolveSettings(backend="soc-only-test"))
    # still fine for a pure SOC program
    sol = solve(soc_norm_program(), SolveSettings(backend="soc-only-test"))
    assert sol.status == "optimal"


def test_invalid_soc_tuple_rejected():
    pb = ProgramBuilder()
    x = pb.add_var()
    pb.add_soc(x, [])
    with pytest.raises(ConicError, match="length >= 2"):
        pb.build()


def test_out_of_range_index_rejected():
    pb = ProgramBuilder()
    x = pb.add_var()
    pb.add_soc(x, [5])
    with pytest.raises(ConicError, match="outside"):
        pb.build()


def test_dump_load_round_trip():
    pb = ProgramBuilder()
    x = pb.add_var(lb=0.0)
    y = pb.add_var()
    pb.add_eq({x: 1.0, y: -2.0}, 0.5)
    pb.add_ineq({y: 1.0}, 4.0)
    pb.add_soc_affine(({y: 1.0}, 0.0), [({x: 1.0}, 0.0)])
    pb.add_psd(np.array([[0.0, 1.0], [1.0, 0.0]]), {x: np.eye(2)})
    pb.add_objective({x: 2.0, y: 1.0}, offset=0.25)
    prog = pb.build()
    loaded = load_program(dump_program(prog))
    assert loaded.num_vars == prog.num_vars
    assert np.array_equal(loaded.objective, prog.objective)
    assert loaded.offset == prog.offset
    assert loaded.soc == prog.soc
    assert np.array_equal(loaded.lower, prog.lower)
    a = solve(prog)
    b = solve(loaded)
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_optimal_solutions_carry_iterations_and_time():
    sol = solve(psd_program())
    assert sol.iterations > 0
    assert sol.wall_time > 0.0
