import numpy as np
import pytest

from critsos.critical import Problem
from critsos.sdpsolve import (
    UNBOUNDED_DIAGNOSTIC, SdpProblem, SolverSettings, Status, reference_ipm, solve,
)
from critsos.sosrelax import relaxation_for


def sym_rows(dim):
    """Equality rows picking each upper-triangular entry of a dim x dim block."""
    rows, idx = [], []
    for i in range(dim):
        for j in range(i, dim):
            a = np.zeros((dim, dim))
            a[i, j] = a[j, i] = 1.0 if i == j else 0.5
            rows.append(a)
            idx.append((i, j))
    return np.array(rows), idx


def gamma_below(M):
    """max Gamma s.t. M - Gamma*I = Q PSD."""
    dim = M.shape[0]
    A, idx = sym_rows(dim)
    F = np.array([[1.0 if i == j else 0.0] for i, j in idx])
    b = np.array([M[i, j] for i, j in idx])
    return SdpProblem(["Q"], [dim], ["Gamma"], [A], F, b, [1.0])


def independent_checks(sdp, sol, settings):
    assert sol.status is Status.OPTIMAL
    res = np.max(np.abs(sdp.apply(sol.block_values, sol.free_values) - sdp.b), initial=0.0)
    assert res <= 10 * settings.feas_tol
    for X in sol.block_values:
        # separate routine from the solver's own eigvalsh-based step control
        assert np.min(np.linalg.eigvals(X).real) >= -10 * settings.eig_tol


def test_diagonal_lp():
    sdp = gamma_below(np.diag([1.0, 2.0]))
    sol = solve(sdp)
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    independent_checks(sdp, sol, SolverSettings())


def test_min_eigenvalue_matches_eigensolver():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((3, 3))
    M = (B + B.T) / 2
    sol = solve(gamma_below(M))
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-7)


def test_paraboloid_is_zero(paraboloid):
    relax = relaxation_for(paraboloid, 1)
    sol = solve(relax.sdp)
    assert sol.objective == pytest.approx(0.0, abs=1e-6)
    independent_checks(relax.sdp, sol, SolverSettings())


def test_weak_duality_at_optimum(paraboloid):
    settings = SolverSettings()
    sol = solve(relaxation_for(paraboloid, 2).sdp, settings)
    assert sol.objective <= sol.dual_objective + settings.gap_tol * (1 + abs(sol.objective))


def test_infeasible_toy():
    sdp = SdpProblem(["Q"], [1], [], [np.zeros((1, 1, 1))], np.zeros((1, 0)), [1.0], [])
    assert solve(sdp).status is Status.INFEASIBLE


def test_strictly_infeasible_block():
    # Q11 = -1 cannot hold for PSD Q
    sdp = SdpProblem(["Q"], [1], [], [np.ones((1, 1, 1))], np.zeros((1, 0)), [-1.0], [])
    assert solve(sdp).status is Status.INFEASIBLE


def test_unbounded_when_one_is_a_generator():
    prob = Problem.from_strings("x", "x")
    sol = solve(relaxation_for(prob, 1).sdp)
    assert sol.status is Status.UNBOUNDED
    assert UNBOUNDED_DIAGNOSTIC in sol.message


def test_no_constraints():
    # maximise -tr(X): optimum 0 at X = 0
    sdp = SdpProblem(["Q"], [2], [], [np.zeros((0, 2, 2))], np.zeros((0, 0)), [], [],
                     C=[-np.eye(2)])
    sol = solve(sdp)
    assert sol.optimal and sol.objective == pytest.approx(0.0, abs=1e-7)


def test_determinism(motzkin):
    sdp = relaxation_for(motzkin, 5).sdp
    a, b = solve(sdp), solve(sdp)
    assert a.status == b.status
    assert a.objective == b.objective
    assert np.array_equal(a.free_values, b.free_values)


def test_iteration_limit_is_reported():
    sdp = gamma_below(np.diag([1.0, 2.0, 3.0]))
    sol = reference_ipm(sdp, SolverSettings(max_iterations=1, regularization=0.0))
    assert sol.status is Status.MAX_ITERATIONS


def test_pluggable_solver():
    calls = []

    def fake(sdp, settings):
        calls.append(sdp.num_rows)
        return reference_ipm(sdp, settings)

    sol = solve(gamma_below(np.eye(2)), solver=fake)
    assert calls == [3] and sol.optimal


def test_problem_validation():
    with pytest.raises(ValueError):
        SdpProblem(["Q"], [2], [], [np.array([[[0.0, 1.0], [0.0, 0.0]]])], np.zeros((1, 0)), [0.0], [])
    with pytest.raises(ValueError):
        SolverSettings(feas_tol=0)


def test_matches_external_solver(paraboloid):
    cp = pytest.importorskip("cvxpy")
    sdp = relaxation_for(paraboloid, 2).sdp
    Xs = [cp.Variable((d, d), PSD=True) for d in sdp.block_dims]
    u = cp.Variable(sdp.num_free)
    lhs = sdp.F @ u
    for A, X in zip(sdp.A, Xs):
        lhs = lhs + cp.hstack([cp.trace(A[i] @ X) for i in range(sdp.num_rows)])
    prob = cp.Problem(cp.Maximize(sdp.c @ u), [lhs == sdp.b])
    try:
        prob.solve(solver="CLARABEL" if "CLARABEL" in cp.installed_solvers() else None)
    except cp.error.SolverError:
        pytest.skip("no SDP-capable solver installed for cvxpy")
    assert solve(sdp).objective == pytest.approx(prob.value, abs=1e-5)
