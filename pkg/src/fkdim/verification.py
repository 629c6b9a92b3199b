"""Randomised oracle suites: brute-force matching, metric axioms, exact versus
greedy covers and the finite-union sandwich for spanning numbers."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from fkdim.covering import (
    BallOracle,
    cover_from_matrix,
    prop32_sandwich,
    separated_from_distances,
)
from fkdim.estimators import Report
from fkdim.orbit_metrics import (
    DistanceMatrix,
    MistakeFunction,
    fk_distance,
    fk_distance_bisect,
    max_match_size,
    pairwise_distances,
)
from fkdim.systems import (
    CubeShift,
    DoublingMap,
    FullShiftFinite,
    SampleParams,
    System,
    TentMap,
    derive_seed,
    sample_points,
)


def brute_force_match_size(A: np.ndarray) -> int:
    """Largest order-preserving match in the boolean matrix A by exhaustive
    search over which columns each row uses."""
    A = np.asarray(A, dtype=bool)
    n, m = A.shape

    @lru_cache(maxsize=None)
    def best(i: int, j: int) -> int:
        # rows >= i may only use columns >= j
        if i == n:
            return 0
        out = best(i + 1, j)
        for jj in range(j, m):
            if A[i, jj]:
                out = max(out, 1 + best(i + 1, jj + 1))
        return out

    return best(0, 0)


def _random_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    # coarse values create ties, which is where breakpoint logic is fragile
    if rng.random() < 0.5:
        return rng.integers(0, 6, size=(n, n)) / 5.0
    return rng.random((n, n))


def oracle_suite(count: int = 500, n_max: int = 6, seed: int = 0, tol: float = 1e-9) -> Report:
    """Matching DP against exhaustive search, and the FK breakpoint search
    against bisection, on random distance matrices with n <= n_max."""
    rng = np.random.default_rng(derive_seed(seed, "oracles"))
    rep = Report("oracles")
    mismatches = 0
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(1, n_max + 1))
        D = DistanceMatrix(_random_matrix(rng, n))
        for delta in (*rng.random(3), 0.2, 0.6, 1.0):
            if max_match_size(D, float(delta)).size != brute_force_match_size(D.entries < delta):
                mismatches += 1
        worst = max(worst, abs(fk_distance(D) - fk_distance_bisect(D, tol / 10)))
    rep.add("match size mismatches", mismatches, 0, mismatches == 0)
    rep.add("max |fk - fk_bisect|", worst, tol, worst <= tol)
    return rep


def builtin_systems() -> list[System]:
    return [FullShiftFinite(2), FullShiftFinite(3), CubeShift(1), CubeShift(2), DoublingMap(), TentMap()]


def metric_suite(systems=None, count: int = 1000, n: int = 16, seed: int = 0, tol: float = 1e-9) -> Report:
    """FK symmetry, triangle inequality and d_FK <= min(d_n, 1) on random triples."""
    rep = Report("metrics")
    for sys in systems or builtin_systems():
        name = sys.describe()
        params = SampleParams(period=6)
        pts = [sample_points(sys, count, derive_seed(seed, "metrics", name, k), params).points for k in range(3)]
        X, Y, Z = pts
        # distances between aligned triples only: row i of each block
        def pair(a, b):
            out = {"fk": np.empty(count), "bowen": np.empty(count)}
            for i in range(count):
                d = pairwise_distances(sys, ("fk", "bowen"), [a[i]], [b[i]], n)
                out["fk"][i] = d["fk"][0, 0]
                out["bowen"][i] = d["bowen"][0, 0]
            return out

        xy, yx, yz, xz = pair(X, Y), pair(Y, X), pair(Y, Z), pair(X, Z)
        asym = int(np.count_nonzero(xy["fk"] != yx["fk"]))
        tri = float(np.max(xz["fk"] - xy["fk"] - yz["fk"]))
        dom = int(np.count_nonzero(xy["fk"] > np.minimum(xy["bowen"], 1.0)))
        rep.add(f"{name}: asymmetric pairs", asym, 0, asym == 0)
        rep.add(f"{name}: max triangle excess", tri, tol, tri <= tol)
        rep.add(f"{name}: domination violations", dom, 0, dom == 0)
    return rep


def _small_instance(rng: np.random.Generator, seed: int, k: int):
    systems = builtin_systems()
    sys = systems[int(rng.integers(len(systems)))]
    size = int(rng.integers(4, 21))
    pts = sample_points(sys, size, derive_seed(seed, "cover", k), SampleParams(period=int(rng.integers(2, 7)))).points
    n = int(rng.integers(1, 6))
    kind = ("fk", "bowen", "mean")[int(rng.integers(3))]
    eps = float(rng.choice([0.05, 0.1, 0.2, 0.3, 0.5]))
    return sys, list(pts), n, kind, eps


def cover_oracle_suite(count: int = 200, seed: int = 0) -> Report:
    """Greedy within (1 + ln N) of exact, and separated(2 eps) <= exact
    spanning(eps) <= separated(eps), on small instances."""
    rng = np.random.default_rng(derive_seed(seed, "covers"))
    rep = Report("covers")
    ratio_fail = sandwich_fail = 0
    worst = 0.0
    for k in range(count):
        sys, pts, n, kind, eps = _small_instance(rng, seed, k)
        dist = BallOracle(kind, n, eps, sys).distances(pts, pts)
        exact = cover_from_matrix(dist < eps, "exact").cardinality
        greedy = cover_from_matrix(dist < eps, "greedy").cardinality
        N = len(pts)
        worst = max(worst, greedy / exact)
        if greedy > (1 + math.log(N)) * exact:
            ratio_fail += 1
        lo = len(separated_from_distances(dist, 2 * eps))
        hi = len(separated_from_distances(dist, eps))
        if not lo <= exact <= hi:
            sandwich_fail += 1
    rep.add("greedy above (1 + ln N) * exact", ratio_fail, 0, ratio_fail == 0)
    rep.add("worst greedy / exact", worst, 1 + math.log(20), worst <= 1 + math.log(20))
    rep.add("separated sandwich violations", sandwich_fail, 0, sandwich_fail == 0)
    return rep


def prop32_suite(count: int = 50, seed: int = 0, max_pieces: int = 4, max_size: int = 24,
                 max_n: int = 10) -> Report:
    """max_j r(Z_j) <= r(union) <= sum_j r(Z_j) with exact covers on random partitions."""
    rng = np.random.default_rng(derive_seed(seed, "prop32"))
    rep = Report("prop32")
    violations = 0
    systems = builtin_systems()
    for k in range(count):
        sys = systems[int(rng.integers(len(systems)))]
        size = int(rng.integers(2, max_size + 1))
        pts = list(sample_points(sys, size, derive_seed(seed, "prop32", k), SampleParams(period=5)).points)
        m = int(rng.integers(1, min(max_pieces, size) + 1))
        labels = rng.permutation(np.arange(size) % m)
        pieces = [[p for p, lab in zip(pts, labels) if lab == j] for j in range(m)]
        n = int(rng.integers(1, max_n + 1))
        kind = ("fk", "bowen", "mean", "mistake")[int(rng.integers(4))]
        eps = float(rng.choice([0.05, 0.1, 0.25, 0.5]))
        counts, total = prop32_sandwich(sys, kind, pieces, pts, n, eps, MistakeFunction())
        if not max(counts) <= total <= sum(counts):
            violations += 1
    rep.add("sandwich violations", violations, 0, violations == 0)
    return rep
