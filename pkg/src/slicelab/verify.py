"""Acceptance checks, each returning a pass flag plus deterministic details.

Wall-clock figures live in ``Criterion.timing`` and never enter reports.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .analysis import exponent_table, heavy_part_cover
from .constructions import (BlockParams, build_block, build_R, cantor_digits, direction_covering,
                            direction_set, frostman_measure, product_set, uniform_test_tree,
                            verify_P1, verify_P2)
from .dyadic import CubeSet, Scale, ScaleSequence, TubeSet
from .incidence import (coarse_incidences, coarsen, count_incidences, count_incidences_bruteforce,
                        incidence_count, incidence_count_bruteforce)
from .uniformity import decompose_subuniform, subuniformity_constant

__all__ = ["Criterion", "LOCKS", "CONVERSE_WITNESS", "CRITERIA", "run_criterion", "run_all"]

# Regression locks, frozen from the first verified run.
LOCKS = {
    "p1_fiber_constant": 1.4142135623730951,
    "p2_constant": 1.40234375,
    "farey_c": 0.625,
    "frostman_max_ratio": (1.0, 1.0),
}

# P = {p}, T = {T} at 2^-6: no incidence, yet their 2^-3 parents are incident.
CONVERSE_WITNESS = {"k": 6, "cube": (0, 0), "tube": (0, 15), "coarse_k": 3}


@dataclass
class Criterion:
    id: int
    title: str
    passed: bool
    tolerance: str
    details: dict
    timing: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "passed": self.passed,
                "tolerance": self.tolerance, "details": self.details}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id}. {self.title} ({self.tolerance})"


def _rng(seed: int, cid: int) -> np.random.Generator:
    return np.random.default_rng([seed, cid])


def _random_cells(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    N = 1 << k
    n = min(n, N * N)
    flat = rng.choice(N * N, size=n, replace=False)
    return np.stack([flat // N, flat % N], axis=1).astype(np.int64)


# ---------------------------------------------------------------- 1 coarsening


def check_coarsening(seed: int = 0, instances: int = 200) -> Criterion:
    rng = _rng(seed, 1)
    violations, checks, pairs = 0, 0, 0
    first_bad = None
    for i in range(instances):
        k = 6 if i % 2 == 0 else 8
        P = CubeSet(k, _random_cells(rng, k, int(rng.integers(1, 300))))
        Ts = TubeSet(k, _random_cells(rng, k, int(rng.integers(1, 100))))
        I = count_incidences(P, Ts)
        pairs += len(I)
        for j in range(k + 1):
            D = Scale(j)
            miss = coarsen(I, D).missing_from(coarse_incidences(P, Ts, D))
            checks += 1
            if len(miss):
                violations += len(miss)
                first_bad = first_bad or {"instance": i, "scale": str(D)}
    w = CONVERSE_WITNESS
    P = CubeSet(w["k"], [w["cube"]])
    Ts = TubeSet(w["k"], [w["tube"]])
    D = Scale(w["coarse_k"])
    fine = incidence_count(P, Ts)
    coarse = incidence_count(P.at(D), Ts.at(D))
    witness_ok = fine == 0 and coarse > 0
    details = {"instances": instances, "scale_checks": checks, "fine_incidences": pairs,
               "violations": violations, "first_violation": first_bad,
               "converse_witness": {"cube": f"Q:{w['k']}:{w['cube'][0]}:{w['cube'][1]}",
                                    "tube": f"T:{w['k']}:{w['tube'][0]}:{w['tube'][1]}",
                                    "coarse_scale": str(D), "fine_count": fine,
                                    "coarse_count": coarse, "converse_fails": witness_ok}}
    return Criterion(1, "coarsened incidences are incidences of the coarsened families",
                     violations == 0 and witness_ok,
                     "zero violations over every dyadic scale; stored converse witness", details)


# ---------------------------------------------------------------- 2 incidence counting


def check_counting(seed: int = 0, instances: int = 40, min_speedup: float = 20.0) -> Criterion:
    rng = _rng(seed, 2)
    cases = []
    for i in range(instances):
        k = int(rng.integers(3, 10))
        cap = min(4096, 1 << (2 * k))
        nP, nT = int(rng.integers(1, cap + 1)), int(rng.integers(1, cap + 1))
        A = [Fraction(1), Fraction(2), Fraction(1, 2), Fraction(3, 10)][i % 4]
        cases.append((CubeSet(k, _random_cells(rng, k, nP)), TubeSet(k, _random_cells(rng, k, nT)), A))
    cases.append((CubeSet.full(6), TubeSet.full(6), Fraction(1)))
    cases.append((CubeSet.full(5), TubeSet.full(5), Fraction(1, 4)))
    mismatches, total = 0, 0
    for P, Ts, A in cases:
        fast = count_incidences(P, Ts, A)
        slow = count_incidences_bruteforce(P, Ts, A)
        total += len(slow)
        mismatches += fast != slow
    P = CubeSet.full(9)
    Ts = TubeSet(9, _random_cells(rng, 9, 256))
    t0 = time.perf_counter()
    n_fast = incidence_count(P, Ts)
    t_fast = time.perf_counter() - t0
    t0 = time.perf_counter()
    n_slow = incidence_count_bruteforce(P, Ts)
    t_slow = time.perf_counter() - t0
    speedup = t_slow / max(t_fast, 1e-9)
    details = {"instances": len(cases), "total_incidences": total, "mismatches": int(mismatches),
               "benchmark": {"delta": "2^-9", "cubes": len(P), "tubes": len(Ts),
                             "count": n_fast, "counts_agree": n_fast == n_slow,
                             "speedup_at_least": min_speedup,
                             "speedup_ok": speedup >= min_speedup}}
    timing = {"fast_s": t_fast, "all_pairs_s": t_slow, "speedup": speedup}
    return Criterion(2, "bucketed counter matches the all-pairs oracle and is faster",
                     mismatches == 0 and n_fast == n_slow and speedup >= min_speedup,
                     f"exact equality; >= {min_speedup:g}x at 2^-9", details, timing)


# ---------------------------------------------------------------- 3 decomposition


def _random_tree(rng: np.random.Generator, k: int, step: int, skew: float) -> np.ndarray:
    """Nested random family: each cell keeps a skewed random number of its 4^step children."""
    cells = np.zeros((1, 2), dtype=np.int64)
    side = 1 << step
    sub = np.stack(np.meshgrid(np.arange(side), np.arange(side), indexing="ij"), -1).reshape(-1, 2)
    for _ in range(k // step):
        out = []
        for c in cells:
            n = max(1, int(len(sub) * rng.random() ** skew))
            pick = rng.choice(len(sub), size=n, replace=False)
            out.append((c << step) + sub[pick])
        cells = np.concatenate(out)
        if len(cells) > 6000:
            cells = cells[rng.choice(len(cells), size=6000, replace=False)]
    return cells


def check_decomposition(seed: int = 0, families: int = 100) -> Criterion:
    rng = _rng(seed, 3)
    bad_partition, bad_constant, bad_count = 0, 0, 0
    worst = Fraction(0)
    max_parts = 0
    for i in range(families):
        k, step = [(4, 1), (4, 2), (6, 1), (6, 2), (6, 3), (8, 2)][i % 6]
        skew = float(rng.uniform(0.5, 4.0))
        idx = _random_tree(rng, k, step, skew)
        fam = (CubeSet if i % 3 else TubeSet)(k, idx)
        ladder = ScaleSequence(Scale(k), step)
        part = decompose_subuniform(fam, ladder, verify=False)
        joined = np.concatenate([p.idx for p in part.parts])
        if len(joined) != len(fam) or type(fam)(k, joined) != fam:
            bad_partition += 1
        for p in part.parts:
            c = subuniformity_constant(p, ladder).constant
            worst = max(worst, c)
            bad_constant += c > 2
        bad_count += len(part) > part.count_bound
        max_parts = max(max_parts, len(part))
    details = {"families": families, "partition_failures": bad_partition,
               "constant_failures": int(bad_constant), "count_failures": bad_count,
               "worst_constant": worst, "max_parts": max_parts}
    return Criterion(3, "sub-uniform decomposition partitions with constant at most 2",
                     bad_partition == 0 and bad_constant == 0 and bad_count == 0,
                     "exact rational constants <= 2; parts <= (2 step + 1)^n", details)


# ---------------------------------------------------------------- 4, 5, 6 building block


def _block(k: int, tau: float = 1.5, s: float = 0.5):
    return build_block(BlockParams(Scale(k), tau, s, allow_rounding=True))


def check_P1(seed: int = 0) -> Criterion:
    r = verify_P1(_block(8))
    lock = LOCKS["p1_fiber_constant"]
    step_ok = r.step == 16 and r.required >= 8
    const_ok = r.fiber_constant <= lock * (1 + 1e-12)
    details = {**r.as_dict(), "locked_fiber_constant": lock}
    return Criterion(4, "every block column holds a long progression",
                     r.ok and step_ok and const_ok,
                     "step 2^-4, length >= 8; fiber constant <= locked value", details)


def check_P2(seed: int = 0) -> Criterion:
    lock = LOCKS["p2_constant"]
    r8 = verify_P2(_block(8))
    bound_ok = all(c <= lock * r8.bound * (1 + 1e-12) for c in r8.counts + r8.perturbed_counts)
    ks, maxima = [8, 10, 12], []
    for k in ks:
        r = r8 if k == 8 else verify_P2(_block(k))
        maxima.append(r.max_count)
    slope = float(np.polyfit(np.array(ks, dtype=float), np.log2(maxima), 1)[0])
    slope_ok = abs(slope - 1.0) <= 0.15
    details = {"delta_2^-8": r8.as_dict(), "locked_constant": lock,
               "slope_scales": [str(Scale(k)) for k in ks], "max_counts": maxima,
               "slope": slope, "target_slope": 1.0}
    return Criterion(5, "block projections stay below the (s + tau)/2 bound",
                     bound_ok and slope_ok and r8.kernel_ok,
                     "counts <= locked C bound; slope within 0.15 of 1.0", details)


def check_farey(seed: int = 0) -> Criterion:
    lock = LOCKS["farey_c"]
    rows, ok = [], True
    for k in (8, 10, 12):
        p = BlockParams(Scale(k), 1.5, 0.5, allow_rounding=True)
        dirs, _, raw = direction_set(p)
        sep = Fraction(1, 1 << round(k * p.s))
        gap = min((b - a for a, b in zip(dirs, dirs[1:])), default=None)
        cnt, ratio = direction_covering(dirs, k, p.s)
        row_ok = (gap is None or gap >= sep) and ratio >= lock - 1e-12
        ok &= row_ok
        rows.append({"delta": str(Scale(k)), "directions": len(dirs), "raw": raw,
                     "min_gap": gap, "separation": sep, "cover_count": cnt, "c": ratio,
                     "ok": row_ok})
    return Criterion(6, "shifted Farey directions are separated and spread",
                     ok, "exact rational gaps >= delta^s; c >= locked value",
                     {"locked_c": lock, "scales": rows})


# ---------------------------------------------------------------- 7 Frostman


def check_frostman(seed: int = 0) -> Criterion:
    depth = 5
    levels = uniform_test_tree(depth)
    mu = frostman_measure(levels, 1.0)
    exact = all(bool((d == 4 ** m).all()) for m, d in enumerate(mu.denominators))
    uni_ok = exact and mu.total_mass == 1
    trees, tree_ok = [], True
    for ex, lock in zip(([0, 2, 6, 8, 12], [0, 1, 5, 7, 11]), LOCKS["frostman_max_ratio"]):
        R = build_R(ex, 1.5, 0.5, enforce_decay=False)
        a = frostman_measure(R.levels, 1.4)
        b = frostman_measure(R.levels, 1.4)
        same = a.max_ratio == b.max_ratio and a.witness == b.witness and a.total_mass == b.total_mass
        ok = a.total_mass == 1 and math.isfinite(a.max_ratio) and same and a.max_ratio <= lock * (1 + 1e-12)
        tree_ok &= ok
        trees.append({"exponents": ex, "u": 1.4, "total_mass": a.total_mass, "max_ratio": a.max_ratio,
                      "locked_max_ratio": lock, "witness": str(a.witness), "reproducible": same,
                      "ok": ok})
    details = {"uniform_tree": {"depth": depth, "masses_exact": exact, "total_mass": mu.total_mass,
                                "max_ratio": mu.max_ratio},
               "built_trees": trees}
    return Criterion(7, "equal-split measure is exact and reproducible",
                     uni_ok and tree_ok, "exact rational masses; finite locked ratios", details)


# ---------------------------------------------------------------- 8 exponents


def _closed_forms(t: Fraction, s: Fraction) -> dict:
    thr = (2 * t - 1) / 3
    return {"furstenbergLB": min(s + t, (3 * s + t) / 2, s + 1), "heavyThreshold": thr,
            "borelHeavyBound": Fraction(0) if s > thr else min(2 * t - 3 * s, t),
            "subuniformBound": max(t - s, Fraction(0)), "lineFamilyBound": 2 - t,
            "lineFamilySBound": 1 - s}


def check_exponents(seed: int = 0) -> Criterion:
    tol = 1e-12
    points = [("1.8", "0.7", "borelHeavyBound", Fraction(3, 2)),
              ("1.8", "0.9", "borelHeavyBound", Fraction(0)),
              ("1", "0.5", "furstenbergLB", Fraction(5, 4)),
              ("1.5", "0.8", "subuniformBound", Fraction(7, 10))]
    rows, ok = [], True
    for ts, ss, name, want in points:
        t, s = Fraction(ts), Fraction(ss)
        row = exponent_table(float(t), float(s)).as_dict()
        forms = _closed_forms(t, s)
        err = max(abs(row[f] - float(v)) for f, v in forms.items())
        row_ok = err <= tol and abs(row[name] - float(want)) <= tol
        ok &= row_ok
        rows.append({"t": ts, "s": ss, "field": name, "expected": want, "value": row[name],
                     "max_error": err, "ok": row_ok})
    grid, zero_ok = 0, True
    for i in range(10):
        t = Fraction(1 + 2 * i, 10)
        thr = max((2 * t - 1) / 3, Fraction(0))
        for j in range(10):
            s = thr + (1 - thr) * Fraction(j + 1, 11)
            if s <= (2 * t - 1) / 3:
                continue
            grid += 1
            zero_ok &= exponent_table(float(t), float(s)).borelHeavyBound == 0
    ok &= zero_ok and grid == 100
    return Criterion(8, "exponent table matches the closed forms",
                     ok, "1e-12 at the four example points; zero above the threshold on 100 points",
                     {"points": rows, "grid_points": grid, "grid_all_zero": zero_ok})


# ---------------------------------------------------------------- 9 heavy parts


HEAVY_SCALES = ("2^-6", "2^-8", "2^-10")


def cantor_instance() -> CubeSet:
    """C x C with C the base-4 Cantor set of digits {0, 3}, at 2^-10 (dimension 1)."""
    C = cantor_digits((0, 3), 5)
    return product_set(C, C, 10)


def instance_directions() -> list:
    base = [Fraction(j, 4) for j in range(5)]
    dirs = set(base) | {-e for e in base} | {1 / e for e in base if e} | {-1 / e for e in base if e}
    return sorted(dirs) + [math.inf]


def check_heavy(seed: int = 0) -> Criterion:
    K = cantor_instance()
    dirs = instance_directions()
    a = heavy_part_cover(K, dirs, 1.0, 0.75, 0.08, None, HEAVY_SCALES)
    decreasing = all(x > y for x, y in zip(a.average, a.average[1:]))
    a_ok = all(all(o) for o in a.covers_ok)
    b = heavy_part_cover(K, dirs, 1.0, 0.3, 0.05, None, HEAVY_SCALES)
    i0 = dirs.index(0)
    full = [row[i0] for row in b.covered_fraction]
    b_ok = all(f == 1.0 for f in full) and all(row[i0] for row in b.covers_ok)
    details = {"product_cantor": {"t": 1.0, "s": 0.75, "eta": 0.08, "exponent": a.exponent,
                                  "scales": list(HEAVY_SCALES), "average_content": list(a.average),
                                  "strictly_decreasing": decreasing, "covers_contain_heavy": a_ok},
               "axis_aligned": {"t": 1.0, "s": 0.3, "eta": 0.05, "direction": "0",
                                "covered_fraction": full, "heavy_tubes": [h[i0] for h in b.heavy_counts],
                                "full_measure": b_ok}}
    return Criterion(9, "heavy-part content sums shrink and the axis direction covers everything",
                     decreasing and a_ok and b_ok,
                     "strict decrease over 2^-6, 2^-8, 2^-10; covered fraction exactly 1", details)


CRITERIA: dict[int, Callable[..., Criterion]] = {
    1: check_coarsening, 2: check_counting, 3: check_decomposition, 4: check_P1,
    5: check_P2, 6: check_farey, 7: check_frostman, 8: check_exponents, 9: check_heavy,
}


def run_criterion(cid: int, seed: int = 0) -> Criterion:
    t0 = time.perf_counter()
    c = CRITERIA[cid](seed)
    c.timing["elapsed_s"] = time.perf_counter() - t0
    return c


def run_all(seed: int = 0, only=None, progress: Callable[[Criterion], None] | None = None
            ) -> list[Criterion]:
    out = []
    for cid in sorted(only or CRITERIA):
        c = run_criterion(cid, seed)
        if progress:
            progress(c)
        out.append(c)
    return out
