"""
Invariant events, ergodicity, and convex decomposition of path measures.

Shift-invariance questions are decided on the support of the measure: every
event off the support is null, so the finite support algebra already carries
all the information.  Shift-invariant measures live on periodic grids, where
the time shift rotates each sample sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from gifkit.errors import GifError, ModeError, NotIncompressibleError, NotShiftInvariantError, PreconditionError
from gifkit.path_measure import (
    NORMALIZATION_TOL,
    IncompressibilityReport,
    PathEvent,
    PathMeasure,
    check_incompressible,
    condition,
    event_mass,
    initial_event,
    marginal_at,
    max_weight_difference,
    shift,
)

EXHAUSTIVE_CELL_LIMIT = 16
MASS_EPS = 1e-12


# -----------------------------------------------------------------------------
# Shift invariance and orbits
# -----------------------------------------------------------------------------
def _require_periodic(q: PathMeasure) -> None:
    if not q.grid.periodic:
        raise ModeError("shift-invariance is only defined on periodic grids")


def shift_invariance_defect(q: PathMeasure) -> float:
    """Largest per-atom weight change under one shift step."""
    _require_periodic(q)
    return max_weight_difference(q, shift(q, 1))


def is_shift_invariant(q: PathMeasure, atol: float = 0.0) -> bool:
    if not q.grid.periodic:
        return False
    other = shift(q, 1)
    if atol == 0.0:
        return other == q
    return q.isclose(other, atol)


def _require_invariant(q: PathMeasure, atol: float) -> None:
    _require_periodic(q)
    if not is_shift_invariant(q, atol):
        raise NotShiftInvariantError(
            f"measure is not shift-invariant (defect {shift_invariance_defect(q):.3g})")


def shift_orbit_partition(q: PathMeasure, atol: float = 0.0) -> list[list[int]]:
    """
    Group support atoms into orbits of the shift; orbits listed by smallest atom index.

    Every shift-invariant event on the support is a union of orbits.
    """
    _require_invariant(q, atol)
    paths = q.paths.tolist()
    index = {tuple(p): i for i, p in enumerate(paths)}
    seen = np.zeros(q.n_atoms, dtype=bool)
    orbits = []
    for i, p in enumerate(paths):
        if seen[i]:
            continue
        orbit = []
        cur = tuple(p)
        while True:
            j = index[cur]
            if seen[j]:
                break
            seen[j] = True
            orbit.append(j)
            cur = cur[1:] + cur[:1]
        orbits.append(sorted(orbit))
    return orbits


@dataclass(frozen=True)
class InvariantWitness:
    """An invariant event together with its mass and shift defect."""

    event: PathEvent
    defect: float
    mass: float

    def to_dict(self) -> dict:
        paths = sorted(self.event.paths) if self.event.paths is not None else None
        return {"paths": [list(p) for p in paths] if paths is not None else None,
                "constraints": [[k, sorted(c)] for k, c in self.event.constraints],
                "negated": self.event.negated, "defect": self.defect, "mass": self.mass}


def symmetric_difference_mass(q: PathMeasure, event: PathEvent, s: int) -> float:
    """``q(shift^s(B) xor B)`` for a periodic grid."""
    _require_periodic(q)
    a = event.mask(q.paths, q.grid)
    b = event.image(s, q.grid).mask(q.paths, q.grid)
    return math.fsum(q.weights[a ^ b])


def event_defect(q: PathMeasure, event: PathEvent) -> float:
    """Largest ``q(shift^s B xor B)`` over all grid shifts."""
    return max((symmetric_difference_mass(q, event, s) for s in range(1, q.grid.n_steps)),
               default=0.0)


@dataclass(frozen=True)
class ErgodicityVerdict:
    ergodic: bool
    n_orbits: int
    witness: InvariantWitness | None
    invariant_functions_constant: bool

    def to_dict(self) -> dict:
        return {"ergodic": self.ergodic, "n_orbits": self.n_orbits,
                "invariant_functions_constant": self.invariant_functions_constant,
                "witness": self.witness.to_dict() if self.witness else None}


def _canonical_rotation(path: tuple[int, ...]) -> tuple[int, ...]:
    return min(path[s:] + path[:s] for s in range(len(path)))


def is_ergodic(q: PathMeasure, atol: float = 0.0) -> ErgodicityVerdict:
    """
    Ergodic iff the support is a single shift orbit.

    The second route checks that the shift-invariant function "smallest
    rotation of the path" is constant on the support.
    """
    orbits = shift_orbit_partition(q, atol)
    witness = None
    if len(orbits) > 1:
        first = orbits[0]
        event = PathEvent.support_subset(q.paths[first].tolist())
        witness = InvariantWitness(event, event_defect(q, event), math.fsum(q.weights[first]))
    reps = {_canonical_rotation(tuple(p)) for p in q.paths.tolist()}
    return ErgodicityVerdict(len(orbits) == 1, len(orbits), witness, len(reps) == 1)


def strict_invariant_hull(q: PathMeasure, event: PathEvent, atol: float = 0.0) -> PathEvent:
    """
    Strictly invariant version of an almost-invariant event.

    Returns the support atoms all of whose rotations lie in ``event``.  The
    support of a shift-invariant measure is closed under rotation, so the
    result is invariant under every shift as a set of paths and differs from
    ``event`` by a null set.
    """
    _require_invariant(q, 0.0)
    d = event_defect(q, event)
    if d > atol:
        raise PreconditionError(f"event is not almost invariant (defect {d:.3g})")
    N = q.grid.n_steps
    kept = []
    for p in q.paths.tolist():
        rots = np.array([p[s:] + p[:s] for s in range(N)])
        if event.mask(rots, q.grid).all():
            kept.append(p)
    return PathEvent.support_subset(kept)


def is_strictly_invariant(event: PathEvent, grid) -> bool:
    """Whether an explicit path set is closed under every shift."""
    if event.is_cylinder:
        raise GifError("strict invariance is checked on explicit path sets")
    if not grid.periodic:
        raise ModeError("strict invariance needs a periodic grid")
    return all(event.image(s, grid) == event for s in range(grid.n_steps))


# -----------------------------------------------------------------------------
# Weak ergodicity and decomposition
# -----------------------------------------------------------------------------
def _atom_cell_masks(q: PathMeasure) -> np.ndarray:
    """Bitmask of visited cells per atom (cells < 63 only)."""
    bits = np.left_shift(np.int64(1), q.paths.astype(np.int64))
    return np.bitwise_or.reduce(bits, axis=1)


def initial_event_invariant(q: PathMeasure, cells: Iterable[int]) -> bool:
    """
    Whether ``{z(0) in E}`` is shift-invariant on the support.

    That holds exactly when each support path stays inside ``E`` or outside it
    at every sample.
    """
    inside = np.isin(q.paths, sorted(set(int(c) for c in cells)))
    return bool(np.all(inside.all(axis=1) | ~inside.any(axis=1)))


def cell_components(q: PathMeasure) -> list[list[int]]:
    """Cells linked by a common support path (union-find); unvisited cells omitted."""
    parent = list(range(q.space.size))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    visited = set()
    for p in q.paths.tolist():
        visited.update(p)
        r = find(p[0])
        for c in p[1:]:
            rc = find(c)
            if rc != r:
                parent[rc] = r
    groups: dict[int, list[int]] = {}
    for c in sorted(visited):
        groups.setdefault(find(c), []).append(c)
    return sorted(groups.values())


@dataclass(frozen=True)
class WeakErgodicityVerdict:
    weak_ergodic: bool
    witness: tuple[int, ...] | None
    witness_mass: float | None
    n_candidates: int
    method: str

    def to_dict(self) -> dict:
        return {"weak_ergodic": self.weak_ergodic,
                "witness": list(self.witness) if self.witness is not None else None,
                "witness_mass": self.witness_mass, "n_candidates": self.n_candidates,
                "method": self.method}


def _require_incompressible(q: PathMeasure, tol: float) -> IncompressibilityReport:
    rep = check_incompressible(q, tol)
    if not rep.passed:
        raise NotIncompressibleError(
            f"measure is not incompressible (TV deviation {rep.max_tv_deviation:.3g})")
    return rep


def is_weak_ergodic(q: PathMeasure, restricted: bool = False, eps: float = MASS_EPS,
                    tol: float = NORMALIZATION_TOL) -> WeakErgodicityVerdict:
    """
    Search for a cell set ``E`` whose initial event is invariant with mass in (eps, 1-eps).

    With at most 16 cells every subset is scanned.  ``restricted=True`` scans
    unions of the cell components linked by support paths instead, which is
    complete because every invariant initial event is such a union up to
    null cells.
    """
    _require_incompressible(q, tol)
    n = q.space.size
    mu = marginal_at(q, 0).masses
    if not restricted:
        if n > EXHAUSTIVE_CELL_LIMIT:
            raise GifError(f"{n} cells exceed the exhaustive scan limit of "
                           f"{EXHAUSTIVE_CELL_LIMIT}; pass restricted=True")
        cand = np.arange(1, (1 << n) - 1, dtype=np.int64)
        ok = np.ones(len(cand), dtype=bool)
        for am in np.unique(_atom_cell_masks(q)):
            inter = cand & am
            ok &= (inter == 0) | (inter == am)
        bits = ((cand[:, None] >> np.arange(n)) & 1).astype(bool)
        masses = np.array([math.fsum(mu[b]) for b in bits[ok]])
        hits = np.flatnonzero((masses > eps) & (masses < 1 - eps))
        if len(hits):
            E = tuple(int(c) for c in np.flatnonzero(bits[ok][hits[0]]))
            return WeakErgodicityVerdict(False, E, float(masses[hits[0]]), len(cand), "exhaustive")
        return WeakErgodicityVerdict(True, None, None, len(cand), "exhaustive")
    comps = cell_components(q)
    for comp in comps:
        m = math.fsum(mu[comp])
        if eps < m < 1 - eps:
            return WeakErgodicityVerdict(False, tuple(comp), m, len(comps), "components")
    return WeakErgodicityVerdict(True, None, None, len(comps), "components")


@dataclass(frozen=True, eq=False)
class Decomposition:
    p: float
    q1: PathMeasure
    q2: PathMeasure
    cells: tuple[int, ...]
    q1_report: IncompressibilityReport
    q2_report: IncompressibilityReport

    def to_dict(self) -> dict:
        from gifkit.path_measure import measure_to_dict
        return {"p": self.p, "cells": list(self.cells),
                "q1": measure_to_dict(self.q1), "q2": measure_to_dict(self.q2),
                "q1_incompressible": self.q1_report.to_dict(),
                "q2_incompressible": self.q2_report.to_dict()}


def decompose(q: PathMeasure, cells: Iterable[int], eps: float = MASS_EPS,
              tol: float = NORMALIZATION_TOL) -> Decomposition:
    """
    Split ``q`` along an invariant initial event ``Phi = {z(0) in E}``.

    Returns ``p = q(Phi)``, ``q1 = q(.|Phi)`` and ``q2 = q(.|not Phi)``; both
    halves are incompressible and ``p*q1 + (1-p)*q2 = q``.
    """
    E = tuple(sorted(set(int(c) for c in cells)))
    if not initial_event_invariant(q, E):
        raise PreconditionError(f"initial event for cells {list(E)} is not shift-invariant")
    phi = initial_event(E)
    p = event_mass(q, phi)
    if not eps < p < 1 - eps:
        raise PreconditionError(f"event mass {p!r} is not strictly between 0 and 1")
    q1, q2 = condition(q, phi), condition(q, ~phi)
    return Decomposition(p, q1, q2, E, check_incompressible(q1, tol), check_incompressible(q2, tol))


def admissible_decompositions(q: PathMeasure, eps: float = MASS_EPS) -> list[tuple[int, ...]]:
    """All cell sets (exhaustive, at most 16 cells) for which :func:`decompose` succeeds."""
    n = q.space.size
    if n > EXHAUSTIVE_CELL_LIMIT:
        raise GifError("exhaustive decomposition scan is limited to 16 cells")
    found = []
    for code in range(1, (1 << n) - 1):
        E = tuple(c for c in range(n) if code >> c & 1)
        try:
            decompose(q, E, eps)
        except PreconditionError:
            continue
        found.append(E)
    return found


# -----------------------------------------------------------------------------
# Ergodicity of individual support paths
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class AtomErgodicity:
    atom: int
    weight: float
    deterministic: bool
    single_cycle: bool
    ergodic: bool

    def to_dict(self) -> dict:
        return {"atom": self.atom, "weight": self.weight, "deterministic": self.deterministic,
                "single_cycle": self.single_cycle, "ergodic": self.ergodic}


def path_ergodicity(path: Iterable[int]) -> tuple[bool, bool, bool]:
    """
    Ergodicity of the cell dynamics traced by one periodic path.

    Returns ``(deterministic, single_cycle, ergodic)``.  ``deterministic``:
    each visited cell has a unique successor, so the path defines a map on
    its image.  ``single_cycle``: that map is one cycle through the whole
    image.  ``ergodic``: every subset of the image closed under the path's
    transitions has empirical mass 0 or 1.
    """
    p = [int(c) for c in path]
    nxt = p[1:] + p[:1]
    succ: dict[int, set[int]] = {}
    for a, b in zip(p, nxt):
        succ.setdefault(a, set()).add(b)
    deterministic = all(len(v) == 1 for v in succ.values())
    single_cycle = False
    if deterministic:
        start, cur, seen = p[0], next(iter(succ[p[0]])), {p[0]}
        while cur != start and cur not in seen:
            seen.add(cur)
            cur = next(iter(succ[cur]))
        single_cycle = cur == start and seen == set(succ)
    # closed subsets: connected components of the transition graph
    image = sorted(succ)
    parent = {c: c for c in image}

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for a, b in zip(p, nxt):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    ergodic = len({find(c) for c in image}) == 1
    return deterministic, single_cycle, ergodic


def check_support_ergodicity(q: PathMeasure, atol: float = 0.0) -> list[AtomErgodicity]:
    """Per-atom ergodicity verdicts for an ergodic shift-invariant measure."""
    verdict = is_ergodic(q, atol)
    if not verdict.ergodic:
        raise PreconditionError(f"measure is not ergodic ({verdict.n_orbits} shift orbits)")
    out = []
    for i, (p, w) in enumerate(zip(q.paths.tolist(), q.weights)):
        det, cyc, erg = path_ergodicity(p)
        out.append(AtomErgodicity(i, float(w), det, cyc, erg))
    return out


# -----------------------------------------------------------------------------
# Invariance of initial-event masses
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class Lemma53Report:
    lhs: float
    rhs: float
    equal: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "equal": self.equal}


def lemma53_check(q: PathMeasure, cells: Iterable[int], s: int, tol: float = 0.0) -> Lemma53Report:
    """
    Compare ``q(shift^-s Phi)`` with ``q(Phi)`` for ``Phi = {z(0) in E}``.

    Equal for every incompressible measure; the input is not screened, so a
    compressible measure can serve as a negative control.
    """
    phi = initial_event(cells)
    lhs = event_mass(q, phi.preimage(s, q.grid))
    rhs = event_mass(q, phi)
    return Lemma53Report(lhs, rhs, abs(lhs - rhs) <= tol)
