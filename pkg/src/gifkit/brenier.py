"""
Minimum-action incompressible path measures with a prescribed endpoint coupling.

Every path of the window grid is enumerated and gets one LP weight.  The
constraints pin each interior-time marginal to the uniform distribution and
the joint law of ``(z(0), z(T))`` to the coupling ``eta``; the endpoint
marginals follow from the row and column sums of ``eta``.

Kinetic energy uses forward differences: a step between cells at geodesic
distance ``d`` costs ``d**2 / (2 dt)``.  The potential term is a left-endpoint
Riemann sum over ``k = 0 .. N-1``.

:func:`exact_min_action` re-solves the same problem with an exact rational
simplex and an independent cost evaluator; it is the oracle for
:func:`solve_min_action`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csc_matrix

from gifkit.constructors import round_half_down
from gifkit.errors import EnumerationCapError, GifError, InfeasibleError, ModeError
from gifkit.exact_lp import ExactInfeasible, solve_exact
from gifkit.path_measure import (
    CIRCLE,
    Observable,
    PathMeasure,
    StateSpace,
    TimeGrid,
    check_incompressible,
)

COUPLING_TOL = 1e-9
DEFAULT_CAP = 10 ** 6


# -----------------------------------------------------------------------------
# Final configurations
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FinalConfiguration:
    """Doubly stochastic coupling: all row and column sums equal ``1/n``."""

    coupling: np.ndarray
    tol: float = COUPLING_TOL

    def __post_init__(self):
        eta = np.array(self.coupling, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise GifError("coupling must be a square matrix")
        if not np.all(np.isfinite(eta)) or np.any(eta < 0):
            raise GifError("coupling entries must be finite and nonnegative")
        n = eta.shape[0]
        dev = max(np.abs(eta.sum(axis=1) - 1.0 / n).max(), np.abs(eta.sum(axis=0) - 1.0 / n).max())
        if dev > self.tol:
            raise InfeasibleError(f"coupling is not doubly stochastic (deviation {dev:.3g})")
        eta.setflags(write=False)
        object.__setattr__(self, "coupling", eta)

    @property
    def n(self) -> int:
        return self.coupling.shape[0]

    def is_diagonal(self, tol: float = 0.0) -> bool:
        off = self.coupling - np.diag(np.diag(self.coupling))
        return bool(np.all(off <= tol))


def _check_bijection(h: Sequence[int], n: int) -> np.ndarray:
    h = np.asarray(h, dtype=np.int64)
    if h.shape != (n,) or sorted(h.tolist()) != list(range(n)):
        raise GifError("h must be a bijection of the cells")
    return h


def eta_from_map(h: Sequence[int], space: StateSpace) -> FinalConfiguration:
    """Deterministic coupling ``eta(x, y) = [y = h(x)] / n``."""
    n = space.size
    h = _check_bijection(h, n)
    eta = np.zeros((n, n))
    eta[np.arange(n), h] = 1.0 / n
    return FinalConfiguration(eta)


def independent_coupling(space: StateSpace) -> FinalConfiguration:
    n = space.size
    return FinalConfiguration(np.full((n, n), 1.0 / (n * n)))


# -----------------------------------------------------------------------------
# Energy and action
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ActionProblem:
    """
    Parameters
    ----------
    space, grid : window grid required
    eta : FinalConfiguration
    potential : optional array (n_cells,) or (N + 1, n_cells); default 0
    rho : optional initial-density observable; default 1
    """

    space: StateSpace
    grid: TimeGrid
    eta: FinalConfiguration
    potential: np.ndarray | None = None
    rho: np.ndarray | None = None

    def __post_init__(self):
        if self.grid.periodic:
            raise ModeError("the action problem lives on a window grid")
        n, L = self.space.size, self.grid.path_length
        if self.eta.n != n:
            raise GifError("coupling size does not match the state space")
        U = np.zeros((L, n)) if self.potential is None else np.array(self.potential, dtype=float)
        if U.shape == (n,):
            U = np.tile(U, (L, 1))
        if U.shape != (L, n) or not np.all(np.isfinite(U)):
            raise GifError(f"potential must have shape ({n},) or ({L}, {n}) with finite entries")
        rho = np.ones(n) if self.rho is None else np.array(
            self.rho.values if isinstance(self.rho, Observable) else self.rho, dtype=float)
        if rho.shape != (n,) or not np.all(np.isfinite(rho)):
            raise GifError("rho must be a finite vector over cells")
        U.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "potential", U)
        object.__setattr__(self, "rho", rho)

    @property
    def step_cost(self) -> float:
        """Energy of one unit-cell step: ``cell_width**2 / (2 dt)``."""
        return self.space.cell_width ** 2 / (2.0 * self.grid.dt)


def _path_energy(space: StateSpace, grid: TimeGrid, paths: np.ndarray) -> np.ndarray:
    sq = space.squared_steps[paths[:, :-1], paths[:, 1:]].sum(axis=1)
    return sq * (space.cell_width ** 2 / (2.0 * grid.dt))


def kinetic_energy(q: PathMeasure, rho: Observable | np.ndarray | None = None) -> float:
    """``sum_atoms w * rho(z0) * sum_k d(z_k, z_{k+1})**2 / (2 dt)``."""
    if q.grid.periodic:
        raise ModeError("kinetic energy is evaluated on window grids")
    r = np.ones(q.space.size) if rho is None else np.asarray(
        rho.values if isinstance(rho, Observable) else rho, dtype=float)
    e = _path_energy(q.space, q.grid, q.paths)
    return math.fsum(q.weights * r[q.paths[:, 0]] * e)


def path_costs(problem: ActionProblem, paths: np.ndarray) -> np.ndarray:
    """Action of each path, including the ``rho(z0)`` factor."""
    dt = problem.grid.dt
    N = problem.grid.n_steps
    e = _path_energy(problem.space, problem.grid, paths)
    pot = problem.potential[np.arange(N)[None, :], paths[:, :N]].sum(axis=1) * dt
    return problem.rho[paths[:, 0]] * (e - pot)


def action(q: PathMeasure, problem: ActionProblem) -> float:
    if not (q.space == problem.space and q.grid == problem.grid):
        raise GifError("measure and problem live on different frames")
    return math.fsum(q.weights * path_costs(problem, q.paths))


def endpoint_coupling(q: PathMeasure) -> np.ndarray:
    n = q.space.size
    out = np.zeros((n, n))
    np.add.at(out, (q.paths[:, 0], q.paths[:, -1]), q.weights)
    return out


# -----------------------------------------------------------------------------
# LP solve
# -----------------------------------------------------------------------------
def enumerate_paths(space: StateSpace, grid: TimeGrid, cap: int = DEFAULT_CAP) -> np.ndarray:
    n, L = space.size, grid.path_length
    count = n ** L
    if count > cap:
        raise EnumerationCapError(
            f"{n}^{L} = {count} paths exceed the cap of {cap}; use a coarser grid")
    idx = np.arange(count, dtype=np.int64)
    return np.stack(np.unravel_index(idx, (n,) * L), axis=1).astype(np.int64)


def constraint_matrix(space: StateSpace, grid: TimeGrid, paths: np.ndarray):
    """Sparse equality constraints and row labels for the path LP."""
    n, N = space.size, grid.n_steps
    P = len(paths)
    rows, cols = [], []
    for k in range(1, N):
        rows.append((k - 1) * n + paths[:, k])
        cols.append(np.arange(P))
    off = (N - 1) * n
    rows.append(off + paths[:, 0] * n + paths[:, -1])
    cols.append(np.arange(P))
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    A = csc_matrix((np.ones(len(r)), (r, c)), shape=(off + n * n, P))
    return A


def constraint_rhs(problem: ActionProblem) -> np.ndarray:
    n, N = problem.space.size, problem.grid.n_steps
    return np.concatenate([np.full((N - 1) * n, 1.0 / n), problem.eta.coupling.ravel()])


@dataclass
class SolveOptions:
    enumeration_cap: int = DEFAULT_CAP
    tol: float = COUPLING_TOL
    probe_degeneracy: bool = True
    oracle: bool = False
    oracle_cap: int = 4096
    warm_start: PathMeasure | None = None
    seed: int = 0


@dataclass(eq=False)
class SolveReport:
    measure: PathMeasure
    value: float
    lp_objective: float
    status: str
    incompressibility_residual: float
    coupling_residual: float
    n_paths: int
    degenerate: bool | None = None
    oracle_value: float | None = None
    oracle_gap: float | None = None
    warm_start_value: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == "optimal"

    def to_dict(self) -> dict:
        from gifkit.path_measure import measure_to_dict
        return {
            "value": self.value,
            "lp_objective": self.lp_objective,
            "status": self.status,
            "residuals": {"incompressibility_tv": self.incompressibility_residual,
                          "coupling_tv": self.coupling_residual},
            "degenerate": self.degenerate,
            "oracle_value": self.oracle_value,
            "oracle_gap": self.oracle_gap,
            "warm_start_value": self.warm_start_value,
            "n_paths": self.n_paths,
            "notes": list(self.notes),
            "measure": measure_to_dict(self.measure),
        }


_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _polish(A, b, x, support_tol=1e-12):
    """Re-solve the equality system on the LP support to remove solver slack."""
    S = np.flatnonzero(x > support_tol)
    if len(S) == 0:
        return x
    sub = A[:, S].toarray()
    xs, *_ = np.linalg.lstsq(sub, b, rcond=None)
    if np.all(xs >= -1e-14) and np.abs(sub @ xs - b).max() <= np.abs(A @ x - b).max() + 1e-15:
        out = np.zeros_like(x)
        out[S] = np.clip(xs, 0.0, None)
        return out
    return np.clip(x, 0.0, None)


def _coupling_tv(q: PathMeasure, eta: FinalConfiguration) -> float:
    return 0.5 * math.fsum(np.abs(endpoint_coupling(q) - eta.coupling).ravel())


def solve_min_action(problem: ActionProblem, options: SolveOptions | None = None) -> SolveReport:
    """
    Minimize the action over incompressible path measures reaching ``eta``.

    Returns an optimal basic solution of the path LP (dual simplex).
    """
    opts = options or SolveOptions()
    space, grid = problem.space, problem.grid
    paths = enumerate_paths(space, grid, opts.enumeration_cap)
    cost = path_costs(problem, paths)
    A = constraint_matrix(space, grid, paths)
    b = constraint_rhs(problem)
    res = linprog(cost, A_eq=A, b_eq=b, bounds=(0, None), method="highs-ds", options=_HIGHS)
    if res.status == 2:
        raise InfeasibleError("no incompressible path measure reaches this coupling")
    if res.status != 0:
        raise GifError(f"LP solver failed: {res.message}")
    x = _polish(A, b, res.x)
    x = x / math.fsum(x)
    q = PathMeasure(space, grid, paths, x)
    report = SolveReport(
        measure=q,
        value=action(q, problem),
        lp_objective=float(res.fun),
        status="optimal",
        incompressibility_residual=check_incompressible(q).max_tv_deviation,
        coupling_residual=_coupling_tv(q, problem.eta),
        n_paths=len(paths),
    )
    if report.incompressibility_residual > opts.tol or report.coupling_residual > opts.tol:
        report.notes.append("constraint residual above tolerance")
    if opts.probe_degeneracy:
        report.degenerate = _probe_degeneracy(cost, A, b, x, report.value, opts.seed)
    if opts.warm_start is not None:
        ws = opts.warm_start
        report.warm_start_value = action(ws, problem)
        if check_incompressible(ws, opts.tol).passed and _coupling_tv(ws, problem.eta) <= opts.tol:
            if report.value > report.warm_start_value + opts.tol * max(1.0, abs(report.warm_start_value)):
                report.notes.append("optimum exceeds the feasible warm start")
        else:
            report.notes.append("warm start is not feasible")
    if opts.oracle and len(paths) <= opts.oracle_cap:
        # support first, then the columns the float duals price closest to zero
        reduced = cost - A.T @ res.eqlin.marginals
        order = np.lexsort((reduced, -x))
        hint = [paths[j] for j in order]
        exact = exact_min_action(problem, cap=opts.oracle_cap, hint=hint)
        report.oracle_value = float(exact)
        report.oracle_gap = abs(report.value - float(exact)) / max(1.0, abs(float(exact)))
    return report


def _probe_degeneracy(cost, A, b, x, value, seed) -> bool:
    """
    Look for a second optimal vertex.

    Minimize and maximize a random direction over the optimal face; distinct
    solutions mean the optimum is not unique.
    """
    rng = np.random.default_rng(seed)
    r = rng.standard_normal(len(cost))
    slack = 1e-9 * max(1.0, abs(value))
    sols = []
    for sign in (1.0, -1.0):
        res = linprog(sign * r, A_ub=cost[None, :], b_ub=[value + slack], A_eq=A, b_eq=b,
                      bounds=(0, None), method="highs-ds", options=_HIGHS)
        if res.status != 0:
            return False
        sols.append(res.x)
    return bool(np.abs(sols[0] - sols[1]).max() > 1e-7 or np.abs(sols[0] - x).max() > 1e-7)


# -----------------------------------------------------------------------------
# Exact oracle
# -----------------------------------------------------------------------------
def _exact_path_cost(problem: ActionProblem, path: Sequence[int]) -> Fraction:
    space = problem.space
    n = space.n_cells
    step = Fraction(space.cell_width ** 2 / (2.0 * problem.grid.dt))
    dt = Fraction(problem.grid.dt)
    sq = 0
    for a, b in zip(path[:-1], path[1:]):
        for ca, cb in zip(space.coords(a), space.coords(b)):
            d = abs(ca - cb)
            d = min(d, n - d)
            sq += d * d
    pot = sum((Fraction(float(problem.potential[k, c])) for k, c in enumerate(path[:-1])), Fraction(0))
    return Fraction(float(problem.rho[path[0]])) * (sq * step - dt * pot)


def exact_min_action(problem: ActionProblem, cap: int = 4096,
                     hint: Iterable[Sequence[int]] | None = None) -> Fraction:
    """
    Exact optimum of the path LP over rationals.

    Paths, costs and constraints are rebuilt here without the floating-point
    pipeline; every float input is converted exactly to a fraction.  ``hint``
    is an optional set of paths expected in an optimal support; it seeds the
    starting basis and never affects the returned value.
    """
    space, grid = problem.space, problem.grid
    n, N = space.size, grid.n_steps
    if n ** (N + 1) > cap:
        raise EnumerationCapError(f"{n ** (N + 1)} paths exceed the oracle cap of {cap}")
    paths = list(itertools.product(range(n), repeat=N + 1))
    columns, costs = [], []
    off = (N - 1) * n
    for p in paths:
        col = {(k - 1) * n + p[k]: 1 for k in range(1, N)}
        col[off + p[0] * n + p[-1]] = 1
        columns.append(col)
        costs.append(_exact_path_cost(problem, p))
    eta = [Fraction(float(v)) for v in problem.eta.coupling.ravel()]
    # interior marginals carry the exact total mass of eta, which keeps the
    # system consistent when 1/n has no exact binary representation
    b = [sum(eta, Fraction(0)) / n] * off + eta
    cols = None
    if hint is not None:
        where = {p: j for j, p in enumerate(paths)}
        cols = [where[tuple(int(c) for c in p)] for p in hint]
    try:
        return solve_exact(columns, b, costs, hint=cols).value
    except ExactInfeasible as exc:
        raise InfeasibleError(str(exc)) from exc


# -----------------------------------------------------------------------------
# Classical baseline
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ClassicalFlowEnergy:
    """Energies of the geodesic interpolations of a bijection (one per branch)."""

    energies: tuple[float, ...]
    measures: tuple[PathMeasure, ...]
    incompressible: tuple[bool, ...]
    ambiguous: bool

    @property
    def energy(self) -> float:
        return min(self.energies)

    def to_dict(self) -> dict:
        return {"energies": list(self.energies), "incompressible": list(self.incompressible),
                "ambiguous": self.ambiguous}


def _signed_displacement(a: int, b: int, n: int) -> tuple[int, bool]:
    m = (b - a) % n
    if 2 * m > n:
        m -= n
    return m, 2 * abs(m) == n and m != 0


def classical_flow_energy(h: Sequence[int], space: StateSpace, grid: TimeGrid) -> ClassicalFlowEnergy:
    """
    Energy of the deterministic flow moving each cell to ``h(x)`` along a geodesic.

    Each coordinate advances by ``round_half_down(k * m / N)`` cells at step
    ``k``, where ``m`` is the signed minimal displacement.  Antipodal
    displacements are ambiguous on even grids; the two branches (all
    ambiguous moves forward, or all backward) are both reported.  The
    interpolated measure need not be incompressible at interior times; the
    flag per branch says whether it is.
    """
    if grid.periodic:
        raise ModeError("classical flow energy is evaluated on window grids")
    n_all = space.size
    h = _check_bijection(h, n_all)
    n, N = space.n_cells, grid.n_steps
    disp, ambiguous = [], False
    for x in range(n_all):
        pairs = [_signed_displacement(a, b, n) for a, b in zip(space.coords(x), space.coords(int(h[x])))]
        disp.append(pairs)
        ambiguous |= any(amb for _, amb in pairs)
    branches = (1, -1) if ambiguous else (1,)
    energies, measures, flags = [], [], []
    for sign in branches:
        paths = np.empty((n_all, N + 1), dtype=np.int64)
        for x in range(n_all):
            start = space.coords(x)
            ms = [(-m if (amb and sign < 0) else m) for m, amb in disp[x]]
            for k in range(N + 1):
                paths[x, k] = space.cell_at([c + round_half_down(Fraction(k * m, N))
                                             for c, m in zip(start, ms)])
        q = PathMeasure(space, grid, paths, np.full(n_all, 1.0 / n_all))
        energies.append(kinetic_energy(q))
        measures.append(q)
        flags.append(check_incompressible(q).passed)
    return ClassicalFlowEnergy(tuple(energies), tuple(measures), tuple(flags), ambiguous)
