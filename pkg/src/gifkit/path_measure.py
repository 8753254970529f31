"""
Discrete path measures on grid discretizations of the circle and flat torus.

A path measure is a finitely supported probability measure on cell sequences
sampled at the times of a :class:`TimeGrid`.  It is incompressible when every
single-time marginal equals the time-0 marginal.

Two grid modes exist:

* ``window``   -- paths on ``[0, T]`` with ``N + 1`` samples ``t_k = k * dt``.
* ``periodic`` -- paths on a time circle with ``N`` samples; the time shift
  acts as an exact cyclic rotation of the sample sequence.

All objects are immutable.  Masses are accumulated with :func:`math.fsum`,
which is correctly rounded and therefore independent of summation order;
two identical multisets of weights always produce bit-identical masses.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from gifkit.errors import GifError, ModeError, PreconditionError

NORMALIZATION_TOL = 1e-12

WINDOW = "window"
PERIODIC = "periodic"
CIRCLE = "circle"
TORUS2D = "torus2d"


# -----------------------------------------------------------------------------
# State space and time grid
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class StateSpace:
    """
    Uniform cell grid on the circle or the flat two-torus.

    Parameters
    ----------
    kind : {"circle", "torus2d"}
    n_cells : int
        Cells per dimension.  A torus has ``n_cells ** 2`` cells in total,
        indexed row-major as ``i * n_cells + j``.
    circumference : float
        Length of each periodic dimension (default ``2 * pi``).
    """

    kind: str = CIRCLE
    n_cells: int = 8
    circumference: float = 2.0 * math.pi

    def __post_init__(self):
        if self.kind not in (CIRCLE, TORUS2D):
            raise GifError(f"unknown state space kind {self.kind!r}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise GifError("n_cells must be a positive integer")
        if not (self.circumference > 0 and math.isfinite(self.circumference)):
            raise GifError("circumference must be positive and finite")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "circumference", float(self.circumference))

    @property
    def dim(self) -> int:
        return 1 if self.kind == CIRCLE else 2

    @property
    def size(self) -> int:
        """Total number of cells."""
        return self.n_cells ** self.dim

    @property
    def cell_width(self) -> float:
        return self.circumference / self.n_cells

    @property
    def cell_volume(self) -> float:
        return self.cell_width ** self.dim

    @property
    def total_volume(self) -> float:
        return self.circumference ** self.dim

    def coords(self, cell: int) -> tuple[int, ...]:
        if not 0 <= cell < self.size:
            raise IndexError(f"cell {cell} out of range for {self.size} cells")
        if self.kind == CIRCLE:
            return (int(cell),)
        return divmod(int(cell), self.n_cells)

    def cell_at(self, coords: Sequence[int]) -> int:
        n = self.n_cells
        if self.kind == CIRCLE:
            return int(coords[0]) % n
        return (int(coords[0]) % n) * n + int(coords[1]) % n

    @cached_property
    def _coord_table(self) -> np.ndarray:
        cells = np.arange(self.size)
        if self.kind == CIRCLE:
            return cells[:, None]
        return np.stack([cells // self.n_cells, cells % self.n_cells], axis=1)

    @cached_property
    def squared_steps(self) -> np.ndarray:
        """Integer matrix of squared minimal-image displacements, in cell units."""
        c = self._coord_table
        diff = np.abs(c[:, None, :] - c[None, :, :])
        diff = np.minimum(diff, self.n_cells - diff)
        out = np.sum(diff * diff, axis=-1).astype(np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        out = self.cell_width * np.sqrt(self.squared_steps.astype(float))
        out.setflags(write=False)
        return out

    def geodesic_distance(self, i: int, j: int) -> float:
        self.coords(i), self.coords(j)
        return float(self.distance_matrix[i, j])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_cells": self.n_cells, "circumference": self.circumference}


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with ``n_steps`` steps of size ``horizon / n_steps``."""

    horizon: float
    n_steps: int
    mode: str = WINDOW

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise GifError("horizon must be positive and finite")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GifError("n_steps must be a positive integer")
        if self.mode not in (WINDOW, PERIODIC):
            raise GifError(f"unknown grid mode {self.mode!r}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def periodic(self) -> bool:
        return self.mode == PERIODIC

    @property
    def path_length(self) -> int:
        """Number of samples per path."""
        return self.n_steps if self.periodic else self.n_steps + 1

    @property
    def last_index(self) -> int:
        return self.path_length - 1

    def times(self) -> np.ndarray:
        return np.arange(self.path_length) * self.dt

    def time_index(self, k: int) -> int:
        """Validate ``k``; in periodic mode it is reduced modulo ``n_steps``."""
        k = int(k)
        if self.periodic:
            return k % self.n_steps
        if not 0 <= k <= self.n_steps:
            raise IndexError(f"time index {k} outside 0..{self.n_steps}")
        return k

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "n_steps": self.n_steps, "mode": self.mode}


# -----------------------------------------------------------------------------
# Marginals and observables
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Marginal:
    """Cell masses of a single-time distribution."""

    masses: np.ndarray

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.ndim != 1 or np.any(m < 0) or not np.all(np.isfinite(m)):
            raise GifError("marginal masses must be a finite nonnegative vector")
        if abs(math.fsum(m) - 1.0) > NORMALIZATION_TOL:
            raise GifError(f"marginal masses sum to {math.fsum(m)!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @classmethod
    def uniform(cls, space: StateSpace) -> "Marginal":
        return cls(np.full(space.size, 1.0 / space.size))

    def mass(self, cells: Iterable[int]) -> float:
        return math.fsum(self.masses[sorted(set(int(c) for c in cells))])

    def __eq__(self, other):
        return isinstance(other, Marginal) and np.array_equal(self.masses, other.masses)

    def __len__(self):
        return len(self.masses)


def tv_distance(a: Marginal | np.ndarray, b: Marginal | np.ndarray) -> float:
    """Total-variation distance ``0.5 * sum |a - b|``."""
    a = a.masses if isinstance(a, Marginal) else np.asarray(a, dtype=float)
    b = b.masses if isinstance(b, Marginal) else np.asarray(b, dtype=float)
    return 0.5 * math.fsum(np.abs(a - b))


@dataclass(frozen=True, eq=False)
class Observable:
    """Real function on cells."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise GifError("observable values must be a finite vector")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator(cls, space: StateSpace, cells: Iterable[int]) -> "Observable":
        v = np.zeros(space.size)
        v[sorted(set(int(c) for c in cells))] = 1.0
        return cls(v)

    @classmethod
    def zero(cls, space: StateSpace) -> "Observable":
        return cls(np.zeros(space.size))

    def integral(self, mu: Marginal) -> float:
        return math.fsum(self.values * mu.masses)

    def l1_norm(self, mu: Marginal) -> float:
        return math.fsum(np.abs(self.values) * mu.masses)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def __len__(self):
        return len(self.values)


# -----------------------------------------------------------------------------
# Path events
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class PathEvent:
    """
    Measurable set of discrete paths.

    Either a cylinder (conjunction of ``z(t_k) in cells`` constraints; no
    constraints means the whole path space) or an explicit set of paths.
    ``negated`` takes the complement.
    """

    constraints: tuple[tuple[int, frozenset[int]], ...] = ()
    paths: frozenset[tuple[int, ...]] | None = None
    negated: bool = False

    @classmethod
    def whole(cls) -> "PathEvent":
        return cls()

    @classmethod
    def empty(cls) -> "PathEvent":
        return cls(negated=True)

    @classmethod
    def cylinder(cls, k: int, cells: Iterable[int]) -> "PathEvent":
        return cls(constraints=((int(k), frozenset(int(c) for c in cells)),))

    @classmethod
    def cylinders(cls, items: Iterable[tuple[int, Iterable[int]]]) -> "PathEvent":
        return cls(constraints=tuple((int(k), frozenset(int(c) for c in cs)) for k, cs in items))

    @classmethod
    def support_subset(cls, paths: Iterable[Sequence[int]]) -> "PathEvent":
        return cls(paths=frozenset(tuple(int(c) for c in p) for p in paths))

    @property
    def is_cylinder(self) -> bool:
        return self.paths is None

    def complement(self) -> "PathEvent":
        return PathEvent(self.constraints, self.paths, not self.negated)

    def __invert__(self) -> "PathEvent":
        return self.complement()

    def __and__(self, other: "PathEvent") -> "PathEvent":
        if self.negated or other.negated:
            raise GifError("intersection of complemented events is not representable")
        if self.is_cylinder and other.is_cylinder:
            return PathEvent(constraints=self.constraints + other.constraints)
        if not self.is_cylinder and not other.is_cylinder:
            return PathEvent(paths=self.paths & other.paths)
        explicit, cyl = (self, other) if not self.is_cylinder else (other, self)
        kept = [p for p in explicit.paths if cyl.contains(p)]
        return PathEvent(paths=frozenset(kept))

    def contains(self, path: Sequence[int]) -> bool:
        path = tuple(int(c) for c in path)
        if self.is_cylinder:
            n = len(path)
            inside = all(path[k % n] in cells for k, cells in self.constraints)
        else:
            inside = path in self.paths
        return inside != self.negated

    def mask(self, paths: np.ndarray, grid: TimeGrid) -> np.ndarray:
        """Boolean membership of each row of ``paths``."""
        paths = np.asarray(paths)
        if self.is_cylinder:
            out = np.ones(len(paths), dtype=bool)
            for k, cells in self.constraints:
                col = paths[:, grid.time_index(k)]
                out &= np.isin(col, np.fromiter(cells, dtype=np.int64, count=len(cells)))
        else:
            out = np.fromiter((tuple(p) in self.paths for p in paths.tolist()),
                              dtype=bool, count=len(paths))
        return ~out if self.negated else out

    def preimage(self, s: int, grid: TimeGrid) -> "PathEvent":
        """Event ``{z : shift(z, s) in self}``."""
        s = int(s)
        if self.is_cylinder:
            cons = tuple((grid.time_index(k + s), cells) for k, cells in self.constraints)
            return PathEvent(constraints=cons, negated=self.negated)
        if not grid.periodic:
            raise ModeError("shifting an explicit path set requires a periodic grid")
        rolled = frozenset(tuple(np.roll(p, s).tolist()) for p in self.paths)
        return PathEvent(paths=rolled, negated=self.negated)

    def image(self, s: int, grid: TimeGrid) -> "PathEvent":
        """Event ``{shift(z, s) : z in self}`` (periodic grids)."""
        if not grid.periodic:
            raise ModeError("event images under the shift require a periodic grid")
        return self.preimage(-int(s), grid)


def initial_event(cells: Iterable[int]) -> PathEvent:
    """The cylinder ``{z : z(0) in cells}``."""
    return PathEvent.cylinder(0, cells)


# -----------------------------------------------------------------------------
# Path measure
# -----------------------------------------------------------------------------
def _grouped_fsum(keys: np.ndarray, values: np.ndarray, n_groups: int) -> np.ndarray:
    out = np.zeros(n_groups)
    if len(keys) == 0:
        return out
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    sv = values[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
    ends = np.r_[starts[1:], len(sk)]
    for a, b in zip(starts, ends):
        out[sk[a]] = sv[a] if b - a == 1 else math.fsum(sv[a:b])
    return out


@dataclass(frozen=True, eq=False)
class PathMeasure:
    """
    Finitely supported probability measure on discrete paths.

    Construction canonicalizes: zero-weight atoms are dropped, duplicate
    paths merged (weights combined with ``fsum``), and atoms sorted
    lexicographically by cell sequence.

    Parameters
    ----------
    space : StateSpace
    grid : TimeGrid
    paths : array-like of int, shape (M, grid.path_length)
    weights : array-like of float, shape (M,)
    """

    space: StateSpace
    grid: TimeGrid
    paths: np.ndarray
    weights: np.ndarray
    _index: dict = field(default=None, repr=False)

    def __post_init__(self):
        L = self.grid.path_length
        paths = np.asarray(self.paths, dtype=np.int64)
        if paths.size == 0:
            paths = paths.reshape(0, L)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if paths.ndim != 2 or paths.shape[1] != L:
            raise GifError(f"paths must have shape (M, {L}), got {paths.shape}")
        if len(weights) != len(paths):
            raise GifError("one weight per path is required")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise GifError("weights must be finite and nonnegative")
        if paths.size and (paths.min() < 0 or paths.max() >= self.space.size):
            raise GifError(f"cell indices must lie in 0..{self.space.size - 1}")
        keep = weights > 0
        paths, weights = paths[keep], weights[keep]
        if len(paths) == 0:
            raise GifError("a path measure needs at least one positive atom")

        uniq, inverse = np.unique(paths, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        if len(uniq) == len(paths):
            merged = np.empty(len(uniq))
            merged[inverse] = weights
        else:
            merged = _grouped_fsum(inverse, weights, len(uniq))
        total = math.fsum(merged)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise GifError(f"weights sum to {total!r}, not 1 within {NORMALIZATION_TOL}")
        uniq = np.ascontiguousarray(uniq)
        uniq.setflags(write=False)
        merged.setflags(write=False)
        object.__setattr__(self, "paths", uniq)
        object.__setattr__(self, "weights", merged)

    @classmethod
    def from_atoms(cls, space: StateSpace, grid: TimeGrid,
                   atoms: Iterable[tuple[Sequence[int], float]]) -> "PathMeasure":
        atoms = list(atoms)
        paths = np.array([list(p) for p, _ in atoms], dtype=np.int64).reshape(len(atoms), -1)
        weights = np.array([w for _, w in atoms], dtype=float)
        return cls(space, grid, paths, weights)

    @classmethod
    def delta(cls, space: StateSpace, grid: TimeGrid, path: Sequence[int]) -> "PathMeasure":
        return cls.from_atoms(space, grid, [(path, 1.0)])

    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    @property
    def atoms(self) -> list[tuple[tuple[int, ...], float]]:
        return [(tuple(p), float(w)) for p, w in zip(self.paths.tolist(), self.weights)]

    def atom_index(self, path: Sequence[int]) -> int | None:
        if self._index is None:
            object.__setattr__(self, "_index", {tuple(p): i for i, p in enumerate(self.paths.tolist())})
        return self._index.get(tuple(int(c) for c in path))

    def weight_of(self, path: Sequence[int]) -> float:
        i = self.atom_index(path)
        return 0.0 if i is None else float(self.weights[i])

    def same_frame(self, other: "PathMeasure") -> bool:
        return self.space == other.space and self.grid == other.grid

    def __eq__(self, other):
        if not isinstance(other, PathMeasure):
            return NotImplemented
        return (self.same_frame(other) and self.paths.shape == other.paths.shape
                and np.array_equal(self.paths, other.paths)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    def isclose(self, other: "PathMeasure", atol: float = NORMALIZATION_TOL) -> bool:
        """Same support and weights within ``atol`` (null atoms ignored)."""
        if not self.same_frame(other):
            return False
        return max_weight_difference(self, other) <= atol

    def __repr__(self):
        return (f"PathMeasure({self.space.kind}, n_cells={self.space.n_cells}, "
                f"N={self.grid.n_steps}, mode={self.grid.mode}, atoms={self.n_atoms})")


def max_weight_difference(a: PathMeasure, b: PathMeasure) -> float:
    """Largest per-path weight difference between two measures on the same frame."""
    if not a.same_frame(b):
        raise GifError("measures live on different spaces or grids")
    keys = {p for p, _ in a.atoms} | {p for p, _ in b.atoms}
    return max((abs(a.weight_of(p) - b.weight_of(p)) for p in keys), default=0.0)


# -----------------------------------------------------------------------------
# Operations
# -----------------------------------------------------------------------------
def marginal_at(q: PathMeasure, k: int) -> Marginal:
    """Distribution of ``z(t_k)`` under ``q``."""
    k = q.grid.time_index(k)
    return Marginal(_grouped_fsum(q.paths[:, k], q.weights, q.space.size))


def marginal_array(q: PathMeasure) -> np.ndarray:
    """All marginals stacked, shape (path_length, n_cells)."""
    return np.stack([_grouped_fsum(q.paths[:, k], q.weights, q.space.size)
                     for k in range(q.grid.path_length)])


@dataclass(frozen=True)
class IncompressibilityReport:
    max_tv_deviation: float
    worst_time: int
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {"max_tv_deviation": self.max_tv_deviation, "worst_time": self.worst_time,
                "pass": self.passed, "tol": self.tol}


def check_incompressible(q: PathMeasure, tol: float = NORMALIZATION_TOL) -> IncompressibilityReport:
    """
    Compare every marginal with the time-0 marginal in total variation.

    Agreement on all cell indicators is the discrete form of the
    incompressibility condition; TV bounds the gap for every observable
    with sup norm at most one.
    """
    margs = marginal_array(q)
    devs = [tv_distance(margs[k], margs[0]) for k in range(len(margs))]
    worst = int(np.argmax(devs))
    return IncompressibilityReport(float(devs[worst]), worst, bool(devs[worst] <= tol), tol)


def is_incompressible(q: PathMeasure, tol: float = NORMALIZATION_TOL) -> bool:
    return check_incompressible(q, tol).passed


def shift(q: PathMeasure, s: int) -> PathMeasure:
    """Push ``q`` forward by the time shift of ``s`` steps (periodic grids only)."""
    if not q.grid.periodic:
        raise ModeError("shift is only exact on periodic grids")
    s = int(s) % q.grid.n_steps
    if s == 0:
        return q
    return PathMeasure(q.space, q.grid, np.roll(q.paths, -s, axis=1), q.weights)


def event_mass(q: PathMeasure, event: PathEvent) -> float:
    return math.fsum(q.weights[event.mask(q.paths, q.grid)])


def shift_defect(q: PathMeasure, event: PathEvent, s: int) -> float:
    """``|q(preimage of event under shift s) - q(event)|``."""
    return abs(event_mass(q, event.preimage(s, q.grid)) - event_mass(q, event))


def mix(measures: Sequence[PathMeasure], weights: Sequence[float]) -> PathMeasure:
    """Convex combination of measures on a common space and grid."""
    if len(measures) == 0 or len(measures) != len(weights):
        raise GifError("need one weight per measure and at least one measure")
    lam = np.asarray(weights, dtype=float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise GifError("mixing weights must be finite and nonnegative")
    if abs(math.fsum(lam) - 1.0) > NORMALIZATION_TOL:
        raise GifError("mixing weights must sum to 1")
    first = measures[0]
    if any(not first.same_frame(m) for m in measures[1:]):
        raise GifError("measures live on different spaces or grids")
    paths = np.concatenate([m.paths for m in measures])
    w = np.concatenate([l * m.weights for l, m in zip(lam, measures)])
    return PathMeasure(first.space, first.grid, paths, w)


def condition(q: PathMeasure, event: PathEvent) -> PathMeasure:
    """``q(. | event)``; requires positive event mass."""
    m = event.mask(q.paths, q.grid)
    p = math.fsum(q.weights[m])
    if p <= 0:
        raise PreconditionError("cannot condition on a null event")
    return PathMeasure(q.space, q.grid, q.paths[m], q.weights[m] / p)


# -----------------------------------------------------------------------------
# JSON serialization
# -----------------------------------------------------------------------------
def measure_to_dict(q: PathMeasure) -> dict:
    return {
        "space": q.space.to_dict(),
        "grid": q.grid.to_dict(),
        "atoms": [{"cells": list(p), "weight": w} for p, w in q.atoms],
    }


def measure_from_dict(data: dict) -> PathMeasure:
    try:
        space = StateSpace(**data["space"])
        grid = TimeGrid(**data["grid"])
        atoms = [(a["cells"], a["weight"]) for a in data["atoms"]]
    except (KeyError, TypeError) as exc:
        raise GifError(f"malformed path measure document: {exc}") from exc
    return PathMeasure.from_atoms(space, grid, atoms)


def dump_measure(q: PathMeasure, path: str | Path) -> None:
    Path(path).write_text(json.dumps(measure_to_dict(q), indent=1) + "\n")


def load_measure(path: str | Path) -> PathMeasure:
    return measure_from_dict(json.loads(Path(path).read_text()))
