"""
Builders for canonical incompressible path measures.

* :func:`from_classical_flow` -- one deterministic path per starting cell.
* :func:`stopping_rotation` -- rigid rotation of the circle that halts after a
  quarter turn; incompressible, yet almost no path ever returns to its start.
* :func:`krylov_bogolioubov_average` -- Cesaro average of shifted copies of a
  periodic measure; becomes exactly shift-invariant at ``n = N``.

Random families used by the property suite live at the bottom of the module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from gifkit.errors import GifError, ModeError, PreconditionError
from gifkit.path_measure import (
    CIRCLE,
    NORMALIZATION_TOL,
    Marginal,
    PathMeasure,
    StateSpace,
    TimeGrid,
    _grouped_fsum,
    mix,
    tv_distance,
)


def round_half_down(x: Fraction) -> int:
    """Nearest integer; exact halves go to the smaller neighbour."""
    return math.ceil(x - Fraction(1, 2))


@dataclass(frozen=True, eq=False)
class DiscreteClassicalFlow:
    """
    Deterministic cell dynamics.

    Give either ``step_map`` (the cell reached after one grid step, applied
    repeatedly) or ``rule(cell, t) -> cell`` giving the position at grid time
    ``t`` of the trajectory started in ``cell``.
    """

    space: StateSpace
    step_map: np.ndarray | None = None
    rule: Callable[[int, float], int] | None = None

    def __post_init__(self):
        if (self.step_map is None) == (self.rule is None):
            raise GifError("give exactly one of step_map or rule")
        if self.step_map is not None:
            m = np.asarray(self.step_map, dtype=np.int64)
            if m.shape != (self.space.size,) or m.min() < 0 or m.max() >= self.space.size:
                raise GifError("step_map must send every cell to a valid cell")
            m.setflags(write=False)
            object.__setattr__(self, "step_map", m)

    @classmethod
    def identity(cls, space: StateSpace) -> "DiscreteClassicalFlow":
        return cls(space, np.arange(space.size))

    @classmethod
    def rotation(cls, space: StateSpace, shift: int | Sequence[int]) -> "DiscreteClassicalFlow":
        """Rigid translation by ``shift`` cells (a pair of offsets on the torus)."""
        offs = (shift,) if np.isscalar(shift) else tuple(shift)
        if len(offs) != space.dim:
            raise GifError(f"rotation needs {space.dim} offset(s)")
        table = [space.cell_at([c + o for c, o in zip(space.coords(x), offs)])
                 for x in range(space.size)]
        return cls(space, np.array(table))

    @property
    def invertible(self) -> bool:
        if self.step_map is None:
            return False
        return len(np.unique(self.step_map)) == self.space.size

    def positions(self, grid: TimeGrid) -> np.ndarray:
        """Array (n_cells, path_length): position at each grid time per start cell."""
        n, L = self.space.size, grid.path_length
        out = np.empty((n, L), dtype=np.int64)
        if self.step_map is not None:
            out[:, 0] = np.arange(n)
            for k in range(1, L):
                out[:, k] = self.step_map[out[:, k - 1]]
        else:
            times = grid.times()
            for x in range(n):
                for k in range(L):
                    out[x, k] = int(self.rule(x, float(times[k])))
            if out.min() < 0 or out.max() >= n:
                raise GifError("flow rule produced an invalid cell index")
        return out


def from_classical_flow(flow: DiscreteClassicalFlow, mu: Marginal | None, grid: TimeGrid,
                        tol: float = NORMALIZATION_TOL) -> PathMeasure:
    """
    Path measure induced by a deterministic flow and an initial distribution.

    The flow must carry ``mu`` to itself at every grid time; the resulting
    measure then has ``mu`` as every marginal.
    """
    space = flow.space
    mu = Marginal.uniform(space) if mu is None else mu
    if len(mu) != space.size:
        raise GifError("marginal length does not match the state space")
    pos = flow.positions(grid)
    for k in range(grid.path_length):
        pushed = _grouped_fsum(pos[:, k], mu.masses, space.size)
        if tv_distance(pushed, mu) > tol:
            raise PreconditionError(f"flow does not preserve mu at time index {k}")
    return PathMeasure(space, grid, pos, mu.masses)


def stopping_rotation(space: StateSpace, grid: TimeGrid) -> PathMeasure:
    """
    Uniform mixture of unit-speed rotations frozen after a quarter turn.

    Atom ``x`` starts at the centre of cell ``x``; its position at ``t_k`` is
    ``x + min(t_k, C/4)`` snapped to the nearest cell centre (exact halves
    round down).  Every atom is moved by the same offset at each time, so the
    marginal stays uniform whatever the ratio of ``dt`` to the cell width.
    """
    if space.kind != CIRCLE:
        raise GifError("stopping_rotation is defined on the circle")
    if grid.periodic:
        raise ModeError("stopping_rotation needs a window grid")
    quarter = Fraction(1, 4)
    if Fraction(grid.horizon) / Fraction(space.circumference) <= quarter:
        raise PreconditionError("horizon must exceed the quarter-turn stopping time")
    n, N = space.n_cells, grid.n_steps
    ratio = Fraction(grid.horizon) / (N * Fraction(space.circumference))
    offsets = [round_half_down(n * min(k * ratio, quarter)) for k in range(N + 1)]
    paths = (np.arange(n)[:, None] + np.array(offsets)[None, :]) % n
    return PathMeasure(space, grid, paths, np.full(n, 1.0 / n))


def stopping_index(space: StateSpace, grid: TimeGrid) -> int:
    """First grid index at or after the quarter-turn stopping time."""
    stop = Fraction(space.circumference) / 4
    return math.ceil(stop / Fraction(grid.dt))


def krylov_bogolioubov_average(omega: PathMeasure, n: int) -> PathMeasure:
    """``(1/n) * sum_{s<n} shift(omega, s)`` on a periodic grid."""
    if not omega.grid.periodic:
        raise ModeError("averaging over shifts needs a periodic grid")
    n = int(n)
    if not 1 <= n <= omega.grid.n_steps:
        raise GifError(f"n must lie in 1..{omega.grid.n_steps}")
    paths = np.concatenate([np.roll(omega.paths, -s, axis=1) for s in range(n)])
    weights = np.concatenate([omega.weights / n] * n)
    return PathMeasure(omega.space, omega.grid, paths, weights)


def orbit_measure(space: StateSpace, grid: TimeGrid, path: Sequence[int]) -> PathMeasure:
    """Uniform measure on all cyclic rotations of one periodic path."""
    if not grid.periodic:
        raise ModeError("orbit measures need a periodic grid")
    N = grid.n_steps
    base = np.asarray(path, dtype=np.int64)
    return PathMeasure(space, grid, np.stack([np.roll(base, -s) for s in range(N)]),
                       np.full(N, 1.0 / N))


# -----------------------------------------------------------------------------
# Random families (seeded through a numpy Generator)
# -----------------------------------------------------------------------------
def random_bijection(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.permutation(n)


def random_gif(rng: np.random.Generator, space: StateSpace, grid: TimeGrid,
               n_components: int = 3, stay_prob: float = 0.3) -> PathMeasure:
    """
    Random incompressible measure.

    Each component picks a random cell subset ``S`` and a random permutation
    of ``S`` at every step; its ``|S|`` paths share the component weight
    equally, so each cell of ``S`` carries the same mass at every time.
    """
    n = space.size
    lam = rng.dirichlet(np.ones(n_components))
    paths, weights = [], []
    for w in lam:
        size = int(rng.integers(1, n + 1))
        subset = np.sort(rng.choice(n, size=size, replace=False))
        cur = subset.copy()
        cols = [cur]
        for _ in range(grid.path_length - 1):
            if rng.random() >= stay_prob:
                cur = cur[rng.permutation(size)]
            cols.append(cur)
        paths.append(np.stack(cols, axis=1))
        weights.append(np.full(size, w / size))
    return PathMeasure(space, grid, np.concatenate(paths), np.concatenate(weights))


def random_periodic_measure(rng: np.random.Generator, space: StateSpace, grid: TimeGrid,
                            n_atoms: int = 3) -> PathMeasure:
    """Random atoms with random paths; generally neither invariant nor incompressible."""
    paths = rng.integers(0, space.size, size=(n_atoms, grid.path_length))
    return PathMeasure(space, grid, paths, rng.dirichlet(np.ones(n_atoms)))


def random_invariant_gif(rng: np.random.Generator, space: StateSpace, grid: TimeGrid,
                         max_orbits: int = 3) -> PathMeasure:
    """
    Random exactly shift-invariant measure on a periodic grid.

    A mixture of orbit measures; each orbit's path wanders inside a random
    cell subset, so some members split into invariant pieces and others not.
    """
    k = int(rng.integers(1, max_orbits + 1))
    lam = rng.dirichlet(np.ones(k))
    parts = []
    for _ in range(k):
        size = int(rng.integers(1, space.size + 1))
        subset = rng.choice(space.size, size=size, replace=False)
        parts.append(orbit_measure(space, grid, rng.choice(subset, size=grid.n_steps)))
    return mix(parts, lam)


def perturb(rng: np.random.Generator, q: PathMeasure) -> PathMeasure:
    """
    Move one atom to a different cell at one time ``k >= 1``.

    The marginal at that time then differs from the time-0 marginal by the
    atom's weight, so the result is never incompressible.
    """
    if q.space.size < 2 or q.grid.path_length < 2:
        raise GifError("perturbation needs two cells and two times")
    paths = np.array(q.paths)
    i = int(rng.integers(q.n_atoms))
    k = int(rng.integers(1, q.grid.path_length))
    paths[i, k] = (paths[i, k] + int(rng.integers(1, q.space.size))) % q.space.size
    return PathMeasure(q.space, q.grid, paths, q.weights)


def staircase_gif(space: StateSpace, n_blocks: int) -> PathMeasure:
    """
    Incompressible measure with a large maximal function for ``f = 1_{cell 0}``.

    Uses the window grid with ``N = 2**n_blocks - 1`` steps and unit horizon
    per step.  Atom ``b`` occupies cell 0 during the dyadic block of times
    ``2**b - 1 .. 2**(b+1) - 2``, so its running average of ``f`` exceeds
    ``1/2`` at the end of that block.  At every time the atoms occupy distinct
    cells, hence all marginals are uniform.  The mass with ``f* > 1/2`` is
    ``n_blocks / n`` while ``||f||_1 = 1/n``, so the ratio in the maximal
    inequality grows like ``log2 N``.
    """
    n = space.size
    if not 1 <= n_blocks < n:
        raise GifError("need 1 <= n_blocks < number of cells")
    N = 2 ** n_blocks - 1
    grid = TimeGrid(float(N), N, "window")
    paths = np.empty((n, N + 1), dtype=np.int64)
    for t in range(N + 1):
        # the final sample is never averaged; a spare atom holds cell 0 there
        active = (t + 1).bit_length() - 1 if t < N else n - 1
        others = iter(range(1, n))
        for atom in range(n):
            paths[atom, t] = 0 if atom == active else next(others)
    return PathMeasure(space, grid, paths, np.full(n, 1.0 / n))
