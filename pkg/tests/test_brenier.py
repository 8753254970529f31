import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gifkit.brenier import (
    ActionProblem,
    FinalConfiguration,
    SolveOptions,
    action,
    classical_flow_energy,
    constraint_matrix,
    constraint_rhs,
    endpoint_coupling,
    enumerate_paths,
    eta_from_map,
    exact_min_action,
    independent_coupling,
    kinetic_energy,
    path_costs,
    solve_min_action,
)
from gifkit.constructors import DiscreteClassicalFlow, from_classical_flow, random_gif
from gifkit.errors import EnumerationCapError, GifError, InfeasibleError, ModeError
from gifkit.path_measure import Observable, PathMeasure, StateSpace, TimeGrid, check_incompressible, mix

import oracles

S4 = StateSpace("circle", 4)
W2 = TimeGrid(1.0, 2)


def test_eta_from_map():
    assert np.array_equal(eta_from_map([0, 1, 2, 3], S4).coupling, np.eye(4) / 4)
    rot = eta_from_map([1, 2, 3, 0], S4)
    assert rot.coupling[0, 1] == 0.25 and rot.coupling.sum() == 1.0
    with pytest.raises(GifError):
        eta_from_map([0, 0, 1, 2], S4)
    with pytest.raises(InfeasibleError):
        FinalConfiguration(np.full((2, 2), 0.3))


def test_kinetic_energy_single_crossing_atom():
    q = PathMeasure.delta(S4, W2, [0, 1, 2])
    assert kinetic_energy(q) == pytest.approx(math.pi ** 2 / 2)
    assert kinetic_energy(q) == pytest.approx(oracles.kinetic_energy(q))
    assert kinetic_energy(PathMeasure.delta(S4, W2, [3, 3, 3])) == 0.0


def test_energy_is_linear_in_weights():
    a = PathMeasure.delta(S4, W2, [0, 1, 2])
    b = PathMeasure.delta(S4, W2, [0, 3, 3])
    m = mix([a, b], [0.25, 0.75])
    assert kinetic_energy(m) == pytest.approx(0.25 * kinetic_energy(a) + 0.75 * kinetic_energy(b))


def test_action_with_constant_potential():
    T = 2.5
    G = TimeGrid(T, 5)
    q = from_classical_flow(DiscreteClassicalFlow.identity(S4), None, G)
    prob = ActionProblem(S4, G, eta_from_map([0, 1, 2, 3], S4), potential=np.full(4, 0.7))
    assert action(q, prob) == pytest.approx(-0.7 * T)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 5), N=st.integers(1, 5))
def test_action_matches_independent_evaluator(seed, n, N):
    rng = np.random.default_rng(seed)
    S, G = StateSpace("circle", n), TimeGrid(float(rng.uniform(0.5, 3)), N)
    q = random_gif(rng, S, G)
    U = rng.normal(size=(N + 1, n))
    rho = rng.uniform(0.5, 2, n)
    prob = ActionProblem(S, G, independent_coupling(S), potential=U, rho=Observable(rho))
    assert action(q, prob) == pytest.approx(oracles.action(q, U, rho), rel=1e-12, abs=1e-12)
    assert kinetic_energy(q, rho) == pytest.approx(oracles.kinetic_energy(q, rho), rel=1e-12, abs=1e-12)


def test_constraint_system_matches_dense_rebuild():
    eta = eta_from_map([1, 0, 2, 3], S4)
    prob = ActionProblem(S4, W2, eta)
    paths = enumerate_paths(S4, W2)
    ref_paths, rows, rhs, cost = oracles.path_lp(S4, W2, eta.coupling)
    assert [tuple(p) for p in paths.tolist()] == ref_paths
    assert np.array_equal(constraint_matrix(S4, W2, paths).toarray(), np.array(rows))
    assert np.allclose(constraint_rhs(prob), [float(v) for v in rhs], atol=0)
    assert np.allclose(path_costs(prob, paths), [float(c) for c in cost], rtol=1e-14)


def test_problem_preconditions():
    with pytest.raises(ModeError):
        ActionProblem(S4, TimeGrid(1.0, 2, "periodic"), independent_coupling(S4))
    with pytest.raises(GifError):
        ActionProblem(S4, W2, independent_coupling(StateSpace("circle", 3)))
    with pytest.raises(GifError):
        ActionProblem(S4, W2, independent_coupling(S4), potential=np.ones(3))
    with pytest.raises(EnumerationCapError):
        solve_min_action(ActionProblem(S4, TimeGrid(1.0, 6), independent_coupling(S4)),
                         SolveOptions(enumeration_cap=1000))


# -----------------------------------------------------------------------------
# solver examples
# -----------------------------------------------------------------------------
def test_identity_coupling_gives_zero():
    rep = solve_min_action(ActionProblem(S4, TimeGrid(1.0, 3), eta_from_map([0, 1, 2, 3], S4)))
    assert rep.value == 0.0
    assert all(len(set(p)) == 1 for p, _ in rep.measure.atoms)
    assert rep.incompressibility_residual <= 1e-9 and rep.coupling_residual <= 1e-9


def test_swap_on_two_cells_matches_vertex_enumeration():
    S, G = StateSpace("circle", 2), TimeGrid(1.0, 1)
    eta = eta_from_map([1, 0], S)
    rep = solve_min_action(ActionProblem(S, G, eta), SolveOptions(oracle=True))
    _, rows, rhs, cost = oracles.path_lp(S, G, eta.coupling)
    expect = oracles.lp_by_vertex_enumeration(rows, rhs, cost)
    assert rep.value == pytest.approx(float(expect), rel=1e-12)
    assert rep.oracle_value == pytest.approx(float(expect), rel=1e-15)


def test_rotation_coupling_reaches_rigid_energy():
    h = [1, 2, 3, 0]
    rep = solve_min_action(ActionProblem(S4, W2, eta_from_map(h, S4)), SolveOptions(oracle=True))
    rigid = classical_flow_energy(h, S4, W2)
    assert rigid.incompressible == (True,)
    assert rep.value == pytest.approx(rigid.energy, rel=1e-12)
    assert rep.value == pytest.approx(math.pi ** 2 / 4, rel=1e-12)
    assert rep.oracle_gap <= 1e-12


@pytest.mark.parametrize("n,N", [(2, 3), (3, 2), (3, 3), (4, 2), (5, 2)])
def test_lp_matches_exact_oracle_on_random_couplings(n, N):
    rng = np.random.default_rng(n * 10 + N)
    S, G = StateSpace("circle", n), TimeGrid(1.0, N)
    perms = [rng.permutation(n) for _ in range(3)]
    lam = rng.dirichlet(np.ones(3))
    eta = FinalConfiguration(sum(l * np.eye(n)[p] / n for l, p in zip(lam, perms)))
    U = rng.normal(size=(N + 1, n))
    prob = ActionProblem(S, G, eta, potential=U)
    rep = solve_min_action(prob, SolveOptions(oracle=True))
    exact = float(exact_min_action(prob))
    assert abs(rep.value - exact) <= 1e-9 * max(1.0, abs(exact))
    assert rep.incompressibility_residual <= 1e-9 and rep.coupling_residual <= 1e-9
    assert np.allclose(endpoint_coupling(rep.measure), eta.coupling, atol=1e-9)


def test_infeasible_coupling_raises():
    # total mass 1 + 5e-10 passes the coupling tolerance but cannot match the
    # interior marginals, which carry mass exactly 1
    eta = FinalConfiguration(np.array([[0.5, 0.0], [0.0, 0.5 + 5e-10]]), tol=1e-9)
    prob = ActionProblem(StateSpace("circle", 2), TimeGrid(1.0, 2), eta)
    with pytest.raises(InfeasibleError):
        solve_min_action(prob)


def test_warm_start_bound_and_notes():
    h = [1, 2, 3, 0]
    prob = ActionProblem(S4, W2, eta_from_map(h, S4))
    rigid = classical_flow_energy(h, S4, W2).measures[0]
    rep = solve_min_action(prob, SolveOptions(warm_start=rigid))
    assert rep.value <= rep.warm_start_value + 1e-12 and rep.notes == []
    bad = from_classical_flow(DiscreteClassicalFlow.identity(S4), None, W2)
    rep = solve_min_action(prob, SolveOptions(warm_start=bad))
    assert "warm start is not feasible" in rep.notes


def test_report_dict_keys():
    rep = solve_min_action(ActionProblem(S4, W2, independent_coupling(S4)))
    d = rep.to_dict()
    assert {"value", "residuals", "degenerate", "status", "measure"} <= set(d)
    assert set(d["residuals"]) == {"incompressibility_tv", "coupling_tv"}
    assert rep.degenerate


# -----------------------------------------------------------------------------
# properties
# -----------------------------------------------------------------------------
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 4))
def test_zero_value_iff_diagonal(seed, n):
    rng = np.random.default_rng(seed)
    S, G = StateSpace("circle", n), TimeGrid(1.0, 2)
    d = rng.dirichlet(np.ones(3))
    diag = FinalConfiguration(np.eye(n) / n)
    assert solve_min_action(ActionProblem(S, G, diag)).value == 0.0
    p = rng.permutation(n)
    if np.all(p == np.arange(n)):
        p = np.roll(p, 1)
    mixed = FinalConfiguration(d[0] * np.eye(n) / n + (d[1] + d[2]) * np.eye(n)[p] / n)
    assert not mixed.is_diagonal()
    assert solve_min_action(ActionProblem(S, G, mixed)).value > 0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6), lam=st.floats(0, 1))
def test_value_is_convex_in_the_coupling(seed, lam):
    rng = np.random.default_rng(seed)
    S, G = StateSpace("circle", 3), TimeGrid(1.0, 2)
    eta = eta_from_map(rng.permutation(3), S)
    ind = independent_coupling(S)
    v = lambda c: solve_min_action(ActionProblem(S, G, FinalConfiguration(c)),
                                   SolveOptions(probe_degeneracy=False)).value
    mid = v(lam * eta.coupling + (1 - lam) * ind.coupling)
    assert mid <= lam * v(eta.coupling) + (1 - lam) * v(ind.coupling) + 1e-9


def test_lp_never_exceeds_an_incompressible_classical_flow():
    rng = np.random.default_rng(3)
    for n in (3, 4, 5, 6):
        S = StateSpace("circle", n)
        for _ in range(4):
            h = rng.permutation(n)
            c = classical_flow_energy(h, S, W2)
            v = solve_min_action(ActionProblem(S, W2, eta_from_map(h, S)),
                                 SolveOptions(probe_degeneracy=False)).value
            for e, ok in zip(c.energies, c.incompressible):
                if ok:
                    assert v <= e + 1e-9


def test_classical_interpolation_can_undercut_the_lp():
    """
    Swapping two antipodal cells on four cells sends both atoms through the
    same midpoint cell, so the geodesic interpolation is not incompressible
    and is not a competitor.  The LP optimum is twice its energy.
    """
    h = [0, 3, 2, 1]
    c = classical_flow_energy(h, S4, W2)
    assert c.ambiguous and c.incompressible == (False, False)
    rep = solve_min_action(ActionProblem(S4, W2, eta_from_map(h, S4)), SolveOptions(oracle=True))
    assert rep.value == pytest.approx(2 * c.energy, rel=1e-12)
    assert rep.oracle_gap <= 1e-12


def test_classical_energy_examples():
    assert classical_flow_energy([0, 1, 2, 3], S4, W2).energy == 0.0
    rot = classical_flow_energy([1, 2, 3, 0], S4, TimeGrid(1.0, 1))
    assert rot.energy == pytest.approx(oracles.kinetic_energy(rot.measures[0]))
    assert rot.energy == pytest.approx((math.pi / 2) ** 2 / 2)
