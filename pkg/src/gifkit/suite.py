"""
Seeded property battery covering the acceptance criteria.

Each ``criterion_*`` function draws its own generator from the suite seed and
returns a :class:`CriterionResult`.  Results hold only deterministic
quantities (no timings), so reports from equal seeds are byte-identical.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from gifkit.brenier import (
    ActionProblem,
    FinalConfiguration,
    SolveOptions,
    classical_flow_energy,
    eta_from_map,
    solve_min_action,
)
from gifkit.constructors import (
    DiscreteClassicalFlow,
    from_classical_flow,
    krylov_bogolioubov_average,
    orbit_measure,
    perturb,
    random_gif,
    random_invariant_gif,
    random_periodic_measure,
    stopping_rotation,
)
from gifkit.ergodic import (
    Interval,
    check_maximal_inequality,
    enlargements_cover,
    l1_convergence_diagnostic,
    pairwise_disjoint,
    pointwise_limit,
    recurrence_report,
    uncovered_probes,
    vitali_select,
)
from gifkit.path_measure import (
    Observable,
    PathEvent,
    PathMeasure,
    StateSpace,
    TimeGrid,
    check_incompressible,
    event_mass,
    marginal_array,
    mix,
    shift,
)
from gifkit.structure import (
    admissible_decompositions,
    check_support_ergodicity,
    decompose,
    is_ergodic,
    is_weak_ergodic,
)

EXACT_TOL = 1e-12
LP_TOL = 1e-9


@dataclass
class CriterionResult:
    criterion: str
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def summary(self) -> str:
        return "; ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items()
                         if not isinstance(v, (list, dict)))

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": self.passed,
                "metrics": self.metrics}


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def _circle(n: int) -> StateSpace:
    return StateSpace("circle", n)


# -----------------------------------------------------------------------------
# 1. incompressibility of constructors
# -----------------------------------------------------------------------------
def criterion_1(seed: int) -> CriterionResult:
    rng = _rng(seed, 1)
    built: list[tuple[str, PathMeasure]] = []
    for n in (4, 8):
        S = _circle(n)
        for mode in ("window", "periodic"):
            G = TimeGrid(1.0, 8, mode)
            built.append((f"identity n={n} {mode}", from_classical_flow(DiscreteClassicalFlow.identity(S), None, G)))
            for r in range(1, n):
                built.append((f"rotation n={n} r={r} {mode}",
                              from_classical_flow(DiscreteClassicalFlow.rotation(S, r), None, G)))
    T2 = StateSpace("torus2d", 3)
    built.append(("torus rotation (1,2)", from_classical_flow(
        DiscreteClassicalFlow.rotation(T2, (1, 2)), None, TimeGrid(1.0, 6, "periodic"))))
    built.append(("stopping rotation n=8 T=pi N=16",
                  stopping_rotation(_circle(8), TimeGrid(math.pi, 16, "window"))))
    for i in range(10):
        n, N = int(rng.integers(2, 9)), int(rng.integers(2, 13))
        base = random_gif(rng, _circle(n), TimeGrid(1.0, N, "periodic"))
        for m in sorted({1, int(rng.integers(1, N + 1)), N}):
            built.append((f"kb-average #{i} n={m}", krylov_bogolioubov_average(base, m)))
    classical = []
    for i in range(50):
        n, N = int(rng.integers(2, 9)), int(rng.integers(1, 17))
        h = rng.permutation(n)
        mode = "periodic" if i % 2 else "window"
        q = from_classical_flow(DiscreteClassicalFlow(_circle(n), h), None, TimeGrid(1.0, N, mode))
        built.append((f"classical bijection #{i}", q))
        classical.append(q)
    deviations = [check_incompressible(q, EXACT_TOL).max_tv_deviation for _, q in built]
    failed = [name for (name, _), d in zip(built, deviations) if d > EXACT_TOL]
    perturbed_pass = 0
    for q in classical:
        if q.space.size < 2 or q.grid.path_length < 2:
            q = from_classical_flow(DiscreteClassicalFlow.rotation(_circle(3), 1), None,
                                    TimeGrid(1.0, 3, "window"))
        if check_incompressible(perturb(rng, q), EXACT_TOL).passed:
            perturbed_pass += 1
    return CriterionResult("1", "incompressibility of constructors", not failed and perturbed_pass == 0, {
        "n_constructed": len(built),
        "max_deviation": max(deviations),
        "failed": failed,
        "n_perturbed": len(classical),
        "perturbed_passing": perturbed_pass,
    })


# -----------------------------------------------------------------------------
# 2. stopping rotation: weak recurrence without pointwise recurrence
# -----------------------------------------------------------------------------
def criterion_2(seed: int) -> CriterionResult:
    S, G = _circle(8), TimeGrid(math.pi, 16, "window")
    q = stopping_rotation(S, G)
    dev = float(np.abs(marginal_array(q) - 1.0 / 8).max())
    t_min = math.pi / 2
    single = [recurrence_report(q, [c], t_min=t_min).pointwise_recurrent_mass for c in range(8)]
    arcs_missing = []
    n_arcs = 0
    for start in range(8):
        for length in range(2, 8):
            n_arcs += 1
            rep = recurrence_report(q, [(start + i) % 8 for i in range(length)], t_min=t_min)
            if rep.weak_witness is None or rep.witness_mass <= 0:
                arcs_missing.append([start, length])
    ok = dev == 0.0 and all(m == 0 for m in single) and not arcs_missing
    return CriterionResult("2", "stopping rotation recurrence", ok, {
        "marginal_deviation": dev,
        "max_single_cell_pointwise_mass": max(single),
        "n_arcs": n_arcs,
        "arcs_without_witness": arcs_missing,
    })


# -----------------------------------------------------------------------------
# 3. maximal ergodic inequality
# -----------------------------------------------------------------------------
def criterion_3(seed: int) -> CriterionResult:
    rng = _rng(seed, 3)
    total = v1 = v3 = 0
    worst = 0.0
    for i in range(200):
        n, N = int(rng.integers(2, 9)), int(rng.integers(1, 33))
        mode = "periodic" if i % 2 else "window"
        q = random_gif(rng, _circle(n), TimeGrid(1.0, N, mode),
                       n_components=int(rng.integers(1, 5)))
        for _ in range(5):
            f = Observable(rng.random(n) * (rng.random(n) < 0.6))
            top = f.sup_norm() if f.sup_norm() > 0 else 1.0
            alphas = top * np.linspace(0.05, 1.0, 20)
            for r in check_maximal_inequality(q, f, alphas):
                total += 1
                v1 += not r.pass1
                v3 += not r.pass3
                if r.bound1 > 0:
                    worst = max(worst, r.lhs / r.bound1)
    return CriterionResult("3", "maximal ergodic inequality", v3 == 0, {
        "n_cases": total,
        "violations_factor3": v3,
        "violations_factor1": v1,
        "pass_rate_factor1": (total - v1) / total,
        "max_lhs_over_l1": worst,
    })


# -----------------------------------------------------------------------------
# 4. Vitali covering
# -----------------------------------------------------------------------------
def criterion_4(seed: int) -> CriterionResult:
    rng = _rng(seed, 4)
    not_disjoint = not_covered = probes_missed = 0
    for _ in range(1000):
        m = int(rng.integers(1, 26))
        ivs = [Interval(float(a), float(l)) for a, l in
               zip(rng.uniform(0.0, 10.0, m), rng.uniform(0.05, 1.0, m))]
        sel = vitali_select(ivs)
        not_disjoint += not pairwise_disjoint(ivs, sel)
        not_covered += not enlargements_cover(ivs, sel)
        probes_missed += uncovered_probes(ivs, sel, per_min_length=100)
    ok = not_disjoint == 0 and not_covered == 0 and probes_missed == 0
    return CriterionResult("4", "Vitali covering", ok, {
        "n_collections": 1000,
        "not_disjoint": not_disjoint,
        "exact_cover_failures": not_covered,
        "uncovered_probes": probes_missed,
    })


# -----------------------------------------------------------------------------
# 5. pointwise and L1 behaviour of averages
# -----------------------------------------------------------------------------
def criterion_5(seed: int) -> CriterionResult:
    rng = _rng(seed, 5)
    cases = []
    for n in (4, 6, 8):
        S = _circle(n)
        for r in range(n):
            cases.append((f"rotation n={n} r={r}", from_classical_flow(
                DiscreteClassicalFlow.rotation(S, r), None, TimeGrid(1.0, 16, "window"))))
    cases.append(("stopping rotation n=8 T=pi N=16",
                  stopping_rotation(_circle(8), TimeGrid(math.pi, 16, "window"))))
    integral_fail = cauchy_fail = 0
    worst_integral = worst_cauchy = 0.0
    per_case = []
    for name, q in cases:
        N = q.grid.n_steps
        case_worst = 0.0
        for _ in range(10):
            f = Observable(rng.uniform(-1.0, 1.0, q.space.size))
            m = f.sup_norm()
            pl = pointwise_limit(q, f)
            ri = pl.integral_check / (2 * m / N)
            worst_integral = max(worst_integral, ri)
            integral_fail += ri > 1
            D = l1_convergence_diagnostic(q, f)
            bound = 4 * m / np.minimum.outer(D.horizons, D.horizons)
            ratio = float((D.deltas / bound).max())
            case_worst = max(case_worst, ratio)
            cauchy_fail += ratio > 1
        worst_cauchy = max(worst_cauchy, case_worst)
        per_case.append({"case": name, "max_cauchy_ratio": case_worst})
    return CriterionResult("5", "pointwise and L1 ergodic identity", integral_fail == 0 and cauchy_fail == 0, {
        "n_cases": len(cases) * 10,
        "integral_violations": integral_fail,
        "max_integral_ratio": worst_integral,
        "cauchy_violations": cauchy_fail,
        "max_cauchy_ratio": worst_cauchy,
        "per_case": per_case,
    })


# -----------------------------------------------------------------------------
# 6. structure theorems
# -----------------------------------------------------------------------------
def _split_gif(rng: np.random.Generator, S: StateSpace, G: TimeGrid) -> PathMeasure:
    """Mixture of two GIFs living on complementary cell sets."""
    n = S.size
    cells = rng.permutation(n)
    cut = int(rng.integers(1, n))
    parts = []
    for block in (np.sort(cells[:cut]), np.sort(cells[cut:])):
        size = len(block)
        rows = [block]
        for _ in range(G.path_length - 1):
            rows.append(rows[-1][rng.permutation(size)])
        parts.append(PathMeasure(S, G, np.stack(rows, axis=1), np.full(size, 1.0 / size)))
    return mix(parts, [cut / n, (n - cut) / n])


def criterion_6(seed: int) -> CriterionResult:
    rng = _rng(seed, 6)
    # (a) convexity
    mix_fail = 0
    for _ in range(50):
        n, N = int(rng.integers(2, 9)), int(rng.integers(1, 13))
        S, G = _circle(n), TimeGrid(1.0, N, "periodic")
        lam = float(rng.random())
        q = mix([random_gif(rng, S, G), random_gif(rng, S, G)], [lam, 1 - lam])
        mix_fail += not check_incompressible(q, EXACT_TOL).passed
    # (b), (c) extreme points among GIFs
    family = []
    for i in range(50):
        n, N = int(rng.integers(2, 7)), int(rng.integers(2, 9))
        S, G = _circle(n), TimeGrid(1.0, N, "periodic")
        family.append(_split_gif(rng, S, G) if i % 2 else
                      random_gif(rng, S, G, n_components=int(rng.integers(1, 4))))
    n_weak = n_split = decompose_fail = recombine_fail = scan_fail = agree_fail = 0
    max_recombine = 0.0
    for q in family:
        v = is_weak_ergodic(q)
        found = admissible_decompositions(q)
        agree_fail += v.weak_ergodic != (len(found) == 0)
        if v.weak_ergodic:
            n_weak += 1
            scan_fail += len(found) > 0
            continue
        n_split += 1
        try:
            d = decompose(q, v.witness)
        except Exception:
            decompose_fail += 1
            continue
        if not (d.q1_report.passed and d.q2_report.passed) or d.q1 == d.q2:
            decompose_fail += 1
        back = mix([d.q1, d.q2], [d.p, 1 - d.p])
        err = _atom_gap(back, q)
        max_recombine = max(max_recombine, err)
        recombine_fail += err > EXACT_TOL
    # (d) ergodic invariant measures have ergodic support paths
    n_ergodic = support_fail = 0
    for i in range(50):
        n, N = int(rng.integers(2, 7)), int(rng.integers(2, 9))
        S, G = _circle(n), TimeGrid(1.0, N, "periodic")
        q = (orbit_measure(S, G, rng.integers(0, n, N)) if i % 2
             else random_invariant_gif(rng, S, G))
        if not is_ergodic(q).ergodic:
            continue
        n_ergodic += 1
        support_fail += not all(a.ergodic for a in check_support_ergodicity(q))
    ok = (mix_fail == 0 and decompose_fail == 0 and recombine_fail == 0
          and scan_fail == 0 and agree_fail == 0 and support_fail == 0)
    return CriterionResult("6", "structure theorems", ok, {
        "mix_failures": mix_fail,
        "family_size": len(family),
        "weak_ergodic": n_weak,
        "decomposable": n_split,
        "decompose_failures": decompose_fail,
        "recombine_failures": recombine_fail,
        "max_recombine_error": max_recombine,
        "weak_ergodic_with_decomposition": scan_fail,
        "verdict_scan_disagreements": agree_fail,
        "ergodic_checked": n_ergodic,
        "support_ergodicity_failures": support_fail,
    })


def _atom_gap(a: PathMeasure, b: PathMeasure) -> float:
    wa = dict(a.atoms)
    wb = dict(b.atoms)
    return max(abs(wa.get(k, 0.0) - wb.get(k, 0.0)) for k in set(wa) | set(wb))


# -----------------------------------------------------------------------------
# 7. Krylov-Bogolioubov averages
# -----------------------------------------------------------------------------
def _cylinder_defect(q: PathMeasure, qs: PathMeasure) -> float:
    """Largest gap between ``q`` and ``qs`` over one- and two-time cylinders."""
    n, L = q.space.size, q.grid.path_length
    worst = 0.0
    for k in range(L):
        a = np.zeros(n)
        b = np.zeros(n)
        np.add.at(a, q.paths[:, k], q.weights)
        np.add.at(b, qs.paths[:, k], qs.weights)
        d = a - b
        worst = max(worst, math.fsum(d[d > 0]), math.fsum(-d[d < 0]))
    for k1, k2 in itertools.combinations(range(L), 2):
        a = np.zeros((n, n))
        b = np.zeros((n, n))
        np.add.at(a, (q.paths[:, k1], q.paths[:, k2]), q.weights)
        np.add.at(b, (qs.paths[:, k1], qs.paths[:, k2]), qs.weights)
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


def criterion_7(seed: int) -> CriterionResult:
    rng = _rng(seed, 7)
    bound_fail = exact_fail = 0
    worst_ratio = 0.0
    for _ in range(20):
        n, N = int(rng.integers(2, 7)), int(rng.integers(4, 11))
        S, G = _circle(n), TimeGrid(1.0, N, "periodic")
        omega = random_periodic_measure(rng, S, G, n_atoms=int(rng.integers(2, 6)))
        for m in range(1, N + 1):
            qm = krylov_bogolioubov_average(omega, m)
            for s in range(1, 5):
                d = _cylinder_defect(qm, shift(qm, s))
                ratio = d / (2 * s / m)
                worst_ratio = max(worst_ratio, ratio)
                bound_fail += ratio > 1 + EXACT_TOL
        qN = krylov_bogolioubov_average(omega, N)
        exact_fail += not all(shift(qN, s) == qN for s in range(1, N))
    return CriterionResult("7", "Krylov-Bogolioubov averaging", bound_fail == 0 and exact_fail == 0, {
        "n_measures": 20,
        "bound_violations": bound_fail,
        "max_defect_over_bound": worst_ratio,
        "n_equals_N_not_invariant": exact_fail,
    })


# -----------------------------------------------------------------------------
# 8. minimum-action solver
# -----------------------------------------------------------------------------
ORACLE_INSTANCES = ((2, 1), (2, 3), (2, 6), (3, 2), (3, 3), (4, 2), (4, 3), (5, 2), (5, 3),
                    (6, 2), (7, 2), (8, 2), (8, 3), (4, 5), (3, 6))


def _random_coupling(rng: np.random.Generator, n: int) -> FinalConfiguration:
    k = int(rng.integers(1, 4))
    lam = rng.dirichlet(np.ones(k))
    eta = np.zeros((n, n))
    for w in lam:
        eta[np.arange(n), rng.permutation(n)] += w / n
    return FinalConfiguration(eta)


def criterion_8(seed: int) -> CriterionResult:
    rng = _rng(seed, 8)
    residuals = []
    # (a) identity coupling
    zero_values = []
    for n, N in ((2, 1), (4, 2), (6, 3), (8, 2)):
        S = _circle(n)
        rep = solve_min_action(ActionProblem(S, TimeGrid(1.0, N, "window"), eta_from_map(np.arange(n), S)))
        zero_values.append(rep.value)
        residuals += [rep.incompressibility_residual, rep.coupling_residual]
    # (b) exact oracle
    gaps = []
    for i, (n, N) in enumerate(ORACLE_INSTANCES):
        S, G = _circle(n), TimeGrid(float(rng.uniform(0.5, 2.0)), N, "window")
        eta = eta_from_map(rng.permutation(n), S) if i % 2 == 0 else _random_coupling(rng, n)
        U = rng.normal(size=(N + 1, n)) if i % 3 == 0 else None
        rep = solve_min_action(ActionProblem(S, G, eta, potential=U),
                               SolveOptions(oracle=True, probe_degeneracy=False))
        gaps.append(rep.oracle_gap)
        residuals += [rep.incompressibility_residual, rep.coupling_residual]
    # (c) classical baseline
    above = []
    above_feasible = 0
    for i in range(20):
        n, N = int(rng.integers(3, 9)), int(rng.integers(2, 4))
        S, G = _circle(n), TimeGrid(1.0, N, "window")
        h = rng.permutation(n)
        rep = solve_min_action(ActionProblem(S, G, eta_from_map(h, S)), SolveOptions(probe_degeneracy=False))
        residuals += [rep.incompressibility_residual, rep.coupling_residual]
        cl = classical_flow_energy(h, S, G)
        feasible = [e for e, ok in zip(cl.energies, cl.incompressible) if ok]
        if feasible and rep.value > min(feasible) * (1 + LP_TOL) + LP_TOL:
            above_feasible += 1
        if rep.value > cl.energy * (1 + LP_TOL) + LP_TOL:
            above.append({"n": n, "N": N, "h": h.tolist(), "lp": rep.value, "classical": cl.energy,
                          "classical_incompressible": list(cl.incompressible)})
    a_ok = all(v == 0.0 for v in zero_values)
    b_ok = max(gaps) <= LP_TOL
    c_ok = not above
    d_ok = max(residuals) <= LP_TOL
    return CriterionResult("8", "minimum-action solver", a_ok and b_ok and c_ok and d_ok, {
        "a_identity_values": zero_values,
        "a_pass": a_ok,
        "b_instances": len(gaps),
        "b_max_relative_gap": max(gaps),
        "b_pass": b_ok,
        "c_bijections": 20,
        "c_lp_above_classical": len(above),
        "c_pass": c_ok,
        "c_above_an_incompressible_classical": above_feasible,
        "c_cases_above": above,
        "d_max_residual": max(residuals),
        "d_pass": d_ok,
    })


CRITERIA: dict[str, Callable[[int], CriterionResult]] = {
    "1": criterion_1,
    "2": criterion_2,
    "3": criterion_3,
    "4": criterion_4,
    "5": criterion_5,
    "6": criterion_6,
    "7": criterion_7,
    "8": criterion_8,
}


def run_suite(seed: int = 7, only: list[str] | None = None) -> list[CriterionResult]:
    keys = list(CRITERIA) if only is None else [k for k in CRITERIA if k in set(only)]
    return [CRITERIA[k](seed) for k in keys]
