"""
Time averages along paths, maximal functions, and covering arguments.

Running averages use the left-endpoint rule, so the average over the first
``k`` steps is the plain mean of the samples ``z(t_0) .. z(t_{k-1})``.  The
supremum over horizons is taken over ``k = 1 .. N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from gifkit.errors import GifError, ModeError, PreconditionError
from gifkit.path_measure import (
    NORMALIZATION_TOL,
    Observable,
    PathEvent,
    PathMeasure,
    check_incompressible,
    event_mass,
    marginal_at,
)


def _values(f: Observable | Sequence[float]) -> np.ndarray:
    return f.values if isinstance(f, Observable) else np.asarray(f, dtype=float)


# -----------------------------------------------------------------------------
# Averages
# -----------------------------------------------------------------------------
def running_averages(paths: np.ndarray, f: Observable, n_steps: int) -> np.ndarray:
    """Array (M, n_steps); column ``k-1`` holds the average over the first ``k`` samples."""
    samples = _values(f)[np.asarray(paths)[:, :n_steps]]
    return np.cumsum(samples, axis=1) / np.arange(1, n_steps + 1)


@dataclass(frozen=True, eq=False)
class AverageProfile:
    """Per-atom running averages ``A_k`` for ``k = 1..N``."""

    measure: PathMeasure
    averages: np.ndarray

    @classmethod
    def of(cls, q: PathMeasure, f: Observable) -> "AverageProfile":
        return cls(q, running_averages(q.paths, f, q.grid.n_steps))

    @property
    def horizons(self) -> np.ndarray:
        return np.arange(1, self.averages.shape[1] + 1)

    def at(self, k: int) -> np.ndarray:
        return self.averages[:, k - 1]

    def maximal(self) -> np.ndarray:
        return self.averages.max(axis=1)


def ergodic_average(z: Sequence[int], f: Observable, k: int) -> float:
    z = np.asarray(z)
    if not 1 <= k <= len(z):
        raise GifError(f"horizon k={k} outside 1..{len(z)}")
    return float(running_averages(z[None, :k], f, k)[0, -1])


def maximal_function(z: Sequence[int], f: Observable, n_steps: int | None = None) -> float:
    """Largest running average over horizons ``1..n_steps`` (default: whole path)."""
    z = np.asarray(z)
    n = len(z) if n_steps is None else n_steps
    return float(running_averages(z[None, :], f, n).max())


def maximal_level_mass(q: PathMeasure, f: Observable, alpha: float) -> float:
    """Mass of atoms whose maximal function exceeds ``alpha``."""
    fstar = AverageProfile.of(q, f).maximal()
    return math.fsum(q.weights[fstar > alpha])


@dataclass(frozen=True)
class MaximalReport:
    alpha: float
    lhs: float
    bound1: float
    bound3: float
    pass1: bool
    pass3: bool

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lhs": self.lhs, "bound1": self.bound1,
                "bound3": self.bound3, "pass1": self.pass1, "pass3": self.pass3}


def check_maximal_inequality(q: PathMeasure, f: Observable, alphas: Iterable[float],
                             tol: float = NORMALIZATION_TOL) -> list[MaximalReport]:
    """
    Evaluate ``alpha * q(f* > alpha)`` against ``3 ||f||_1`` and ``||f||_1``.

    The L1 norm is taken against the time-0 marginal.  ``tol`` is a rounding
    allowance on the comparisons only.
    """
    inc = check_incompressible(q, tol)
    if not inc.passed:
        raise PreconditionError(
            f"measure is not incompressible (TV deviation {inc.max_tv_deviation:.3g})")
    if np.any(f.values < 0):
        raise PreconditionError("the maximal inequality is stated for nonnegative f")
    norm = f.l1_norm(marginal_at(q, 0))
    fstar = AverageProfile.of(q, f).maximal()
    out = []
    for alpha in alphas:
        alpha = float(alpha)
        if alpha <= 0:
            raise GifError("alpha must be positive")
        lhs = alpha * math.fsum(q.weights[fstar > alpha])
        out.append(MaximalReport(alpha, lhs, norm, 3 * norm,
                                 lhs <= norm + tol, lhs <= 3 * norm + tol))
    return out


# -----------------------------------------------------------------------------
# Vitali covering
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class Interval:
    """Closed interval ``[a, a + length]``."""

    a: float
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise GifError("interval length must be positive")

    @property
    def b(self) -> float:
        return self.a + self.length

    def expanded(self) -> tuple[Fraction, Fraction]:
        """Exact endpoints of ``[a - l, a + 2l]``."""
        a, l = Fraction(self.a), Fraction(self.length)
        return a - l, a + 2 * l


def _exact(iv: Interval) -> tuple[Fraction, Fraction]:
    a = Fraction(iv.a)
    return a, a + Fraction(iv.length)


def vitali_select(intervals: Sequence[Interval]) -> list[int]:
    """
    Greedy disjoint subcollection whose threefold enlargements cover the input.

    Intervals are visited by decreasing length (ties: smaller left endpoint,
    then input order); one is kept when it is disjoint from all kept ones.
    Every rejected interval meets a kept interval at least as long, hence
    lies in that interval's enlargement.
    """
    if len(intervals) == 0:
        raise GifError("need at least one interval")
    order = sorted(range(len(intervals)),
                   key=lambda i: (-Fraction(intervals[i].length), Fraction(intervals[i].a), i))
    chosen: list[int] = []
    spans: list[tuple[Fraction, Fraction]] = []
    for i in order:
        lo, hi = _exact(intervals[i])
        if all(hi < a or b < lo for a, b in spans):
            chosen.append(i)
            spans.append((lo, hi))
    return sorted(chosen)


def pairwise_disjoint(intervals: Sequence[Interval], selected: Iterable[int]) -> bool:
    spans = sorted(_exact(intervals[i]) for i in selected)
    return all(spans[j][1] < spans[j + 1][0] for j in range(len(spans) - 1))


def enlargements_cover(intervals: Sequence[Interval], selected: Iterable[int]) -> bool:
    """Exact check that every input lies in the union of the enlarged selection."""
    spans = sorted(intervals[i].expanded() for i in selected)
    merged: list[list[Fraction]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    for iv in intervals:
        lo, hi = _exact(iv)
        if not any(m[0] <= lo and hi <= m[1] for m in merged):
            return False
    return True


def uncovered_probes(intervals: Sequence[Interval], selected: Iterable[int],
                     per_min_length: int = 100) -> int:
    """
    Count probe points of the input union missed by the enlarged selection.

    Probes are laid on every input interval at spacing ``min length / per_min_length``
    (endpoints included).
    """
    spans = np.array([[float(lo), float(hi)] for lo, hi in
                      (intervals[i].expanded() for i in selected)])
    h = min(iv.length for iv in intervals) / per_min_length
    missed = 0
    for iv in intervals:
        m = int(math.floor(iv.length / h))
        probes = np.append(iv.a + h * np.arange(m + 1), iv.b)
        inside = np.any((probes[:, None] >= spans[None, :, 0]) & (probes[:, None] <= spans[None, :, 1]),
                        axis=1)
        missed += int(np.count_nonzero(~inside))
    return missed


# -----------------------------------------------------------------------------
# Pointwise and L1 behaviour of averages
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PointwiseLimit:
    limits: np.ndarray
    integral_check: float
    tail_oscillation: np.ndarray
    tail_start: int

    def to_dict(self) -> dict:
        return {"limits": self.limits.tolist(), "integral_check": self.integral_check,
                "tail_oscillation": self.tail_oscillation.tolist(), "tail_start": self.tail_start}


def pointwise_limit(q: PathMeasure, f: Observable, tail_start: int | None = None,
                    min_steps: int = 1) -> PointwiseLimit:
    """
    Estimate the almost-sure limit of the averages by ``A_N``.

    Reports ``|int A_N dq - int f dmu|`` and, per atom, the tail oscillation
    ``max_{k >= K} |A_k - A_N|`` with ``K = tail_start`` (default ``N // 2``).
    """
    if q.grid.periodic:
        raise ModeError("pointwise limits are estimated on window grids")
    N = q.grid.n_steps
    if N < min_steps:
        raise GifError(f"grid has {N} steps, fewer than the required {min_steps}")
    K = max(1, N // 2) if tail_start is None else int(tail_start)
    if not 1 <= K <= N:
        raise GifError("tail_start must lie in 1..N")
    prof = AverageProfile.of(q, f)
    limits = prof.at(N)
    check = abs(math.fsum(q.weights * limits) - f.integral(marginal_at(q, 0)))
    tail = np.abs(prof.averages[:, K - 1:] - limits[:, None]).max(axis=1)
    return PointwiseLimit(limits, check, tail, K)


@dataclass(frozen=True, eq=False)
class L1Diagnostic:
    horizons: np.ndarray
    deltas: np.ndarray
    monotone_from: int | None

    def to_dict(self) -> dict:
        return {"horizons": self.horizons.tolist(), "deltas": self.deltas.tolist(),
                "monotone_from": self.monotone_from}


def l1_convergence_diagnostic(q: PathMeasure, f: Observable,
                              horizons: Sequence[int] | None = None) -> L1Diagnostic:
    """
    Pairwise ``||A_k - A_k'||`` in ``L1(q)`` for the listed horizons.

    ``monotone_from`` is the smallest listed horizon from which the distance
    to the final horizon is nonincreasing, or None when the list is empty.
    """
    if q.grid.periodic:
        raise ModeError("the L1 diagnostic runs on window grids")
    N = q.grid.n_steps
    hs = np.arange(1, N + 1) if horizons is None else np.asarray(sorted(set(int(h) for h in horizons)))
    if len(hs) and (hs[0] < 1 or hs[-1] > N):
        raise GifError("horizons must lie in 1..N")
    prof = AverageProfile.of(q, f)
    cols = prof.averages[:, hs - 1]
    D = np.array([[math.fsum(q.weights * np.abs(cols[:, i] - cols[:, j])) for j in range(len(hs))]
                  for i in range(len(hs))]).reshape(len(hs), len(hs))
    monotone_from = None
    if len(hs):
        to_last = D[:, -1]
        start = len(hs) - 1
        while start > 0 and to_last[start - 1] >= to_last[start]:
            start -= 1
        monotone_from = int(hs[start])
    return L1Diagnostic(hs, D, monotone_from)


# -----------------------------------------------------------------------------
# Recurrence
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class RecurrenceReport:
    weak_witness: int | None
    witness_mass: float
    phi_mass: float
    pointwise_recurrent_mass: float
    t_min: float

    @property
    def recurrent_fraction(self) -> float:
        return self.pointwise_recurrent_mass / self.phi_mass

    def to_dict(self) -> dict:
        return {"weak_witness": self.weak_witness, "witness_mass": self.witness_mass,
                "phi_mass": self.phi_mass, "pointwise_recurrent_mass": self.pointwise_recurrent_mass,
                "recurrent_fraction": self.recurrent_fraction, "t_min": self.t_min}


def recurrence_report(q: PathMeasure, cells: Iterable[int], t_min: float | None = None,
                      max_shift: int | None = None) -> RecurrenceReport:
    """
    Weak and pointwise recurrence of ``Phi = {z(0) in E}``.

    The weak witness is the first shift ``s >= 1`` (in steps) with
    ``q(Phi & shift^-s Phi) > 0``; None when the scan finds none.  The
    pointwise mass counts atoms of ``Phi`` that are back in ``E`` at some grid
    time ``t_k >= t_min`` (default one step).
    """
    E = sorted(set(int(c) for c in cells))
    grid = q.grid
    phi = PathEvent.cylinder(0, E)
    phi_mass = event_mass(q, phi)
    if phi_mass <= 0:
        raise PreconditionError("the initial event has zero mass")
    top = grid.last_index if max_shift is None else min(int(max_shift), grid.last_index)
    witness, wmass = None, 0.0
    for s in range(1, top + 1):
        m = event_mass(q, phi & phi.preimage(s, grid))
        if m > 0:
            witness, wmass = s, m
            break
    dt = grid.dt
    t_min = dt if t_min is None else float(t_min)
    k_min = max(1, math.ceil(t_min / dt - 1e-9))
    inE = np.isin(q.paths, E)
    later = inE[:, k_min:].any(axis=1) if k_min <= grid.last_index else np.zeros(q.n_atoms, bool)
    rec = math.fsum(q.weights[inE[:, 0] & later])
    return RecurrenceReport(witness, wmass, phi_mass, rec, t_min)
