import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gifkit.constructors import (
    DiscreteClassicalFlow,
    from_classical_flow,
    krylov_bogolioubov_average,
    orbit_measure,
    perturb,
    random_gif,
    random_invariant_gif,
    round_half_down,
    stopping_index,
    stopping_rotation,
)
from gifkit.errors import GifError, ModeError, PreconditionError
from gifkit.path_measure import (
    Marginal,
    StateSpace,
    TimeGrid,
    check_incompressible,
    marginal_array,
    shift,
)

import oracles


def test_round_half_down():
    assert round_half_down(Fraction(1, 2)) == 0
    assert round_half_down(Fraction(3, 2)) == 1
    assert round_half_down(Fraction(-1, 2)) == -1
    assert round_half_down(Fraction(7, 5)) == 1
    assert round_half_down(Fraction(8, 5)) == 2


def test_identity_and_rotation():
    S = StateSpace("circle", 5)
    G = TimeGrid(1.0, 4, "window")
    q = from_classical_flow(DiscreteClassicalFlow.identity(S), None, G)
    assert all(len(set(p)) == 1 for p, _ in q.atoms)
    r = from_classical_flow(DiscreteClassicalFlow.rotation(S, 2), None, G)
    for p, w in r.atoms:
        assert w == 0.2
        assert all((b - a) % 5 == 2 for a, b in zip(p[:-1], p[1:]))


def test_torus_rotation():
    T = StateSpace("torus2d", 3)
    q = from_classical_flow(DiscreteClassicalFlow.rotation(T, (1, 2)), None, TimeGrid(1.0, 3, "periodic"))
    assert check_incompressible(q).max_tv_deviation == 0.0
    with pytest.raises(GifError):
        DiscreteClassicalFlow.rotation(T, 1)


def test_non_preserving_flow_rejected():
    S = StateSpace("circle", 4)
    collapse = DiscreteClassicalFlow(S, np.array([0, 0, 1, 2]))
    assert not collapse.invertible
    with pytest.raises(PreconditionError):
        from_classical_flow(collapse, None, TimeGrid(1.0, 2))


def test_non_uniform_invariant_marginal():
    S = StateSpace("circle", 4)
    swap = DiscreteClassicalFlow(S, np.array([1, 0, 2, 3]))
    mu = Marginal([0.1, 0.1, 0.3, 0.5])
    q = from_classical_flow(swap, mu, TimeGrid(1.0, 3))
    assert check_incompressible(q).passed
    with pytest.raises(PreconditionError):
        from_classical_flow(swap, Marginal([0.2, 0.0, 0.3, 0.5]), TimeGrid(1.0, 3))


def test_rule_based_flow():
    S = StateSpace("circle", 6)
    flow = DiscreteClassicalFlow(S, rule=lambda x, t: (x + int(round(t))) % 6)
    q = from_classical_flow(flow, None, TimeGrid(3.0, 3))
    assert q.atoms[0][0] == (0, 1, 2, 3)


def test_stopping_rotation_example_instance():
    S, G = StateSpace("circle", 8), TimeGrid(math.pi, 16)
    q = stopping_rotation(S, G)
    # quarter turn = two cells; stopping time pi/2 is grid index 8
    assert stopping_index(S, G) == 8
    assert q.atoms[0][0] == (0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2)
    assert np.all(marginal_array(q) == 1 / 8)


@pytest.mark.parametrize("n,N,T", [(8, 16, math.pi), (6, 7, 2.0), (5, 3, 3.0), (12, 10, 4.0)])
def test_stopping_rotation_always_uniform(n, N, T):
    q = stopping_rotation(StateSpace("circle", n), TimeGrid(T, N))
    assert check_incompressible(q).max_tv_deviation == 0.0
    final = [p[-1] for p, _ in q.atoms]
    start = [p[0] for p, _ in q.atoms]
    offset = round_half_down(Fraction(n, 4))
    assert all((b - a) % n == offset % n for a, b in zip(start, final))


def test_stopping_rotation_preconditions():
    with pytest.raises(PreconditionError):
        stopping_rotation(StateSpace("circle", 8), TimeGrid(1.0, 4))
    with pytest.raises(ModeError):
        stopping_rotation(StateSpace("circle", 8), TimeGrid(4.0, 4, "periodic"))
    with pytest.raises(GifError):
        stopping_rotation(StateSpace("torus2d", 4), TimeGrid(4.0, 4))


def test_kb_average_matches_definition():
    rng = np.random.default_rng(2)
    S, G = StateSpace("circle", 3), TimeGrid(1.0, 5, "periodic")
    from gifkit.constructors import random_periodic_measure

    w = random_periodic_measure(rng, S, G, n_atoms=3)
    q3 = krylov_bogolioubov_average(w, 3)
    expect = {}
    for s in range(3):
        for p, wt in oracles.atoms(shift(w, s)):
            expect[p] = expect.get(p, 0.0) + wt / 3
    assert {p: pytest.approx(v) for p, v in expect.items()} == dict(q3.atoms)
    qN = krylov_bogolioubov_average(w, 5)
    assert all(shift(qN, s) == qN for s in range(5))
    with pytest.raises(GifError):
        krylov_bogolioubov_average(w, 6)
    with pytest.raises(ModeError):
        krylov_bogolioubov_average(random_periodic_measure(rng, S, TimeGrid(1.0, 5)), 2)


def test_orbit_measure_is_invariant():
    S, G = StateSpace("circle", 4), TimeGrid(1.0, 6, "periodic")
    q = orbit_measure(S, G, [0, 1, 1, 2, 3, 3])
    assert shift(q, 1) == q


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 7), N=st.integers(1, 10),
       mode=st.sampled_from(["window", "periodic"]))
def test_random_families(seed, n, N, mode):
    rng = np.random.default_rng(seed)
    S, G = StateSpace("circle", n), TimeGrid(1.0, N, mode)
    q = random_gif(rng, S, G)
    assert check_incompressible(q).passed
    if n >= 2 and G.path_length >= 2:
        assert not check_incompressible(perturb(rng, q)).passed
    if mode == "periodic":
        inv = random_invariant_gif(rng, S, G)
        assert shift(inv, 1) == inv
