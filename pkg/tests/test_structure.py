import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gifkit.constructors import (
    DiscreteClassicalFlow,
    from_classical_flow,
    orbit_measure,
    random_gif,
    random_invariant_gif,
    random_periodic_measure,
    stopping_rotation,
)
from gifkit.errors import GifError, ModeError, NotIncompressibleError, NotShiftInvariantError, PreconditionError
from gifkit.path_measure import (
    PathEvent,
    PathMeasure,
    StateSpace,
    TimeGrid,
    check_incompressible,
    event_mass,
    mix,
)
from gifkit.structure import (
    admissible_decompositions,
    cell_components,
    check_support_ergodicity,
    decompose,
    event_defect,
    initial_event_invariant,
    is_ergodic,
    is_shift_invariant,
    is_strictly_invariant,
    is_weak_ergodic,
    lemma53_check,
    path_ergodicity,
    shift_invariance_defect,
    shift_orbit_partition,
    strict_invariant_hull,
    symmetric_difference_mass,
)

import oracles

S4 = StateSpace("circle", 4)
P4 = TimeGrid(1.0, 4, "periodic")


def test_shift_invariance():
    q = orbit_measure(S4, P4, [0, 1, 2, 2])
    assert is_shift_invariant(q)
    assert shift_invariance_defect(q) == 0.0
    w = PathMeasure.delta(S4, P4, [0, 1, 2, 2])
    assert not is_shift_invariant(w)
    assert shift_invariance_defect(w) == 1.0
    assert not is_shift_invariant(PathMeasure.delta(S4, TimeGrid(1.0, 3), [0, 0, 0, 0]))
    with pytest.raises(NotShiftInvariantError):
        is_ergodic(w)


def test_orbit_partition():
    a = orbit_measure(S4, P4, [0, 1, 2, 3])
    b = orbit_measure(S4, P4, [1, 3, 1, 3])
    q = mix([a, b], [0.5, 0.5])
    orbits = shift_orbit_partition(q)
    assert sorted(len(o) for o in orbits) == [2, 4]
    v = is_ergodic(q)
    assert not v.ergodic and v.n_orbits == 2
    assert v.witness.defect == 0.0 and 0 < v.witness.mass < 1
    assert not v.invariant_functions_constant


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 4), N=st.integers(1, 5))
def test_ergodic_iff_no_witness_by_brute_force(seed, n, N):
    rng = np.random.default_rng(seed)
    q = random_invariant_gif(rng, StateSpace("circle", n), TimeGrid(1.0, N, "periodic"), max_orbits=3)
    if q.n_atoms > 12:
        return
    verdict = is_ergodic(q)
    assert verdict.ergodic == (len(oracles.invariant_witnesses(q)) == 0)
    assert verdict.ergodic == verdict.invariant_functions_constant


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 4), N=st.integers(2, 5))
def test_strict_invariant_hull(seed, n, N):
    rng = np.random.default_rng(seed)
    G = TimeGrid(1.0, N, "periodic")
    q = random_invariant_gif(rng, StateSpace("circle", n), G)
    orbits = shift_orbit_partition(q)
    chosen = [i for o in orbits[: max(1, len(orbits) // 2)] for i in o]
    B = PathEvent.support_subset(q.paths[chosen].tolist())
    F = strict_invariant_hull(q, B)
    assert is_strictly_invariant(F, G)
    assert all(F.image(s, G) == F for s in range(N))
    diff = (F.paths ^ B.paths)
    assert sum(q.weight_of(p) for p in diff) == 0.0


def test_strict_hull_rejects_non_invariant_event():
    q = orbit_measure(S4, P4, [0, 1, 2, 3])
    B = PathEvent.support_subset([q.paths[0].tolist()])
    assert event_defect(q, B) > 0
    with pytest.raises(PreconditionError):
        strict_invariant_hull(q, B)
    assert symmetric_difference_mass(q, B, 1) == 0.5


# -----------------------------------------------------------------------------
# weak ergodicity and decomposition
# -----------------------------------------------------------------------------
def test_weak_ergodic_rotation():
    q = from_classical_flow(DiscreteClassicalFlow.rotation(S4, 1), None, P4)
    v = is_weak_ergodic(q)
    assert v.weak_ergodic and v.witness is None and v.n_candidates == 14


def test_split_measure_decomposes():
    a = PathMeasure(S4, P4, [[0, 1, 0, 1], [1, 0, 1, 0]], [0.5, 0.5])
    b = PathMeasure(S4, P4, [[2, 3, 2, 3], [3, 2, 3, 2]], [0.5, 0.5])
    q = mix([a, b], [0.5, 0.5])
    v = is_weak_ergodic(q)
    assert not v.weak_ergodic
    assert set(v.witness) in ({0, 1}, {2, 3})
    d = decompose(q, v.witness)
    assert d.p == 0.5 and d.q1 != d.q2
    assert d.q1_report.passed and d.q2_report.passed
    assert mix([d.q1, d.q2], [d.p, 1 - d.p]) == q
    assert admissible_decompositions(q) == [(0, 1), (2, 3)]
    assert cell_components(q) == [[0, 1], [2, 3]]
    assert not is_weak_ergodic(q, restricted=True).weak_ergodic


def test_decompose_preconditions():
    q = from_classical_flow(DiscreteClassicalFlow.rotation(S4, 1), None, P4)
    with pytest.raises(PreconditionError):
        decompose(q, [0, 1])
    ident = from_classical_flow(DiscreteClassicalFlow.identity(S4), None, P4)
    with pytest.raises(PreconditionError):
        decompose(ident, [0, 1, 2, 3])
    bad = PathMeasure.delta(S4, P4, [0, 1, 1, 1])
    with pytest.raises(NotIncompressibleError):
        is_weak_ergodic(bad)


def test_exhaustive_limit():
    big = StateSpace("circle", 17)
    q = from_classical_flow(DiscreteClassicalFlow.rotation(big, 1), None, TimeGrid(1.0, 3, "periodic"))
    with pytest.raises(GifError):
        is_weak_ergodic(q)
    assert is_weak_ergodic(q, restricted=True).weak_ergodic


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 6), N=st.integers(1, 6),
       mode=st.sampled_from(["window", "periodic"]))
def test_weak_ergodic_iff_no_decomposition(seed, n, N, mode):
    rng = np.random.default_rng(seed)
    q = random_gif(rng, StateSpace("circle", n), TimeGrid(1.0, N, mode), n_components=int(rng.integers(1, 4)))
    v = is_weak_ergodic(q)
    found = admissible_decompositions(q)
    assert v.weak_ergodic == (not found)
    assert v.weak_ergodic == is_weak_ergodic(q, restricted=True).weak_ergodic
    for cells in found[:3]:
        d = decompose(q, cells)
        assert d.q1_report.passed and d.q2_report.passed
        assert mix([d.q1, d.q2], [d.p, 1 - d.p]).isclose(q, 1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 5), reps=st.integers(1, 3))
def test_ergodic_implies_weak_ergodic(seed, n, reps):
    # a path visiting every cell equally often has an incompressible orbit
    rng = np.random.default_rng(seed)
    N = n * reps
    path = rng.permutation(np.repeat(np.arange(n), reps))
    q = orbit_measure(StateSpace("circle", n), TimeGrid(1.0, N, "periodic"), path)
    assert check_incompressible(q).passed
    assert is_ergodic(q).ergodic
    assert is_weak_ergodic(q).weak_ergodic


def test_weak_ergodic_measure_that_is_not_extreme():
    """
    Forward and backward rotations, mixed half and half, form an
    incompressible shift-invariant measure.  No initial event splits it, so it
    is weak ergodic, yet it is a proper convex combination of two distinct
    incompressible measures.  Extremality therefore needs more than the
    initial-event scan.
    """
    fwd = from_classical_flow(DiscreteClassicalFlow.rotation(S4, 1), None, P4)
    bwd = from_classical_flow(DiscreteClassicalFlow.rotation(S4, -1), None, P4)
    q = mix([fwd, bwd], [0.5, 0.5])
    assert check_incompressible(q).passed and is_shift_invariant(q)
    assert is_weak_ergodic(q).weak_ergodic
    assert admissible_decompositions(q) == []
    assert fwd != bwd and check_incompressible(fwd).passed and check_incompressible(bwd).passed
    assert not is_ergodic(q).ergodic


# -----------------------------------------------------------------------------
# support ergodicity
# -----------------------------------------------------------------------------
def test_path_ergodicity_flags():
    assert path_ergodicity([0, 1, 2, 3]) == (True, True, True)
    assert path_ergodicity([0, 0, 0]) == (True, True, True)
    assert path_ergodicity([0, 1, 0, 2]) == (False, False, True)


def test_support_ergodicity():
    q = orbit_measure(S4, P4, [0, 1, 0, 2])
    reps = check_support_ergodicity(q)
    assert len(reps) == 4 and all(r.ergodic for r in reps)
    assert not any(r.deterministic for r in reps)
    split = mix([orbit_measure(S4, P4, [0, 1, 0, 1]), orbit_measure(S4, P4, [2, 2, 2, 2])], [0.5, 0.5])
    with pytest.raises(PreconditionError):
        check_support_ergodicity(split)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 6), N=st.integers(1, 8))
def test_ergodic_orbits_have_ergodic_paths(seed, n, N):
    rng = np.random.default_rng(seed)
    q = orbit_measure(StateSpace("circle", n), TimeGrid(1.0, N, "periodic"), rng.integers(0, n, N))
    assert is_ergodic(q).ergodic
    assert all(r.ergodic for r in check_support_ergodicity(q))


# -----------------------------------------------------------------------------
# initial-event masses under shifts
# -----------------------------------------------------------------------------
def test_lemma53_on_stopping_rotation():
    q = stopping_rotation(StateSpace("circle", 8), TimeGrid(math.pi, 16))
    for s in range(1, 17):
        assert lemma53_check(q, [2], s).equal


def test_lemma53_on_rotation_both_modes():
    for mode in ("window", "periodic"):
        q = from_classical_flow(DiscreteClassicalFlow.rotation(S4, 1), None, TimeGrid(1.0, 4, mode))
        for s in range(1, q.grid.path_length):
            assert lemma53_check(q, [0, 2], s).equal


def test_lemma53_negative_control():
    q = PathMeasure.from_atoms(S4, TimeGrid(1.0, 2), [((0, 1, 1), 0.5), ((1, 1, 1), 0.5)])
    rep = lemma53_check(q, [0], 1)
    assert not rep.equal and rep.lhs == 0.0 and rep.rhs == 0.5


def test_initial_event_invariance_helper():
    q = PathMeasure(S4, P4, [[0, 1, 0, 1], [2, 3, 2, 3]], [0.5, 0.5])
    assert initial_event_invariant(q, [0, 1])
    assert not initial_event_invariant(q, [0])
    assert event_mass(q, PathEvent.cylinder(0, [0, 1])) == 0.5
