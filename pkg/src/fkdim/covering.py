"""Spanning, separated and partial-cover numbers over finite samples.

Balls are open: a candidate center c covers a universe point u iff
``dist(c, u) < eps`` in the chosen orbit metric (or, for mistake balls, iff
u lies in B_n(g; c, eps)).  Centers are drawn from a finite candidate sample.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from fkdim import _kernels
from fkdim.orbit_metrics import KINDS, MistakeFunction, base_distances, pairwise_distances
from fkdim.systems import (
    Product,
    SampleParams,
    Scalar,
    System,
    interval_like,
    pairwise_blocks,
    sample_points,
)

EXACT_CAP = 24


class InfeasibleCoverError(ValueError):
    """Some universe point lies in no candidate ball."""

    def __init__(self, orphan: int, msg: str | None = None):
        self.orphan = orphan
        super().__init__(msg or f"universe point {orphan} is covered by no candidate ball")


class DensityError(ValueError):
    """A sample is not dense enough for the requested cover."""


@dataclass(frozen=True)
class BallOracle:
    """Open balls of radius ``eps`` in one orbit metric (``kind`` is one of
    fk, bowen, mean, mistake, base) for length-``n`` orbits."""

    kind: str
    n: int
    eps: float
    system: System
    mistake: MistakeFunction = field(default_factory=MistakeFunction)

    def __post_init__(self):
        if self.kind not in ("fk", "bowen", "mean", "mistake", "base"):
            raise ValueError(f"unknown ball kind {self.kind!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")

    def distances(self, centers: Sequence, points: Sequence) -> np.ndarray:
        if self.kind == "base":
            return base_distances(self.system, centers, points)
        return pairwise_distances(self.system, [self.kind], centers, points, self.n, self.mistake)[self.kind]

    def coverage(self, centers: Sequence, points: Sequence) -> np.ndarray:
        return self.distances(centers, points) < self.eps

    def contains(self, center, y) -> bool:
        return bool(self.coverage([center], [y])[0, 0])

    def with_eps(self, eps: float) -> "BallOracle":
        return BallOracle(self.kind, self.n, eps, self.system, self.mistake)


@dataclass(frozen=True)
class CoverResult:
    cardinality: int
    method: str
    lower_bound: int
    centers: tuple

    def __post_init__(self):
        if self.method not in ("exact", "greedy"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "exact" and self.lower_bound != self.cardinality:
            raise ValueError("exact covers carry lower_bound == cardinality")


# ---------------------------------------------------------------------------
# coverage matrices
# ---------------------------------------------------------------------------


class Coverage:
    """Packed boolean matrix; row c is the set of universe points covered by candidate c."""

    def __init__(self, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        self.n_candidates, self.n_universe = mask.shape
        width = -(-self.n_universe // 64) * 64
        padded = np.zeros((self.n_candidates, width), dtype=bool)
        padded[:, : self.n_universe] = mask
        self.bits = np.packbits(padded, axis=1, bitorder="little").view(np.uint64)
        self.sizes = np.bitwise_count(self.bits).sum(axis=1).astype(np.int64)

    @classmethod
    def from_bits(cls, bits: np.ndarray, n_universe: int) -> "Coverage":
        self = cls.__new__(cls)
        self.n_candidates = bits.shape[0]
        self.n_universe = n_universe
        self.bits = bits
        self.sizes = np.bitwise_count(bits).sum(axis=1).astype(np.int64)
        return self

    def full(self) -> np.ndarray:
        words = np.zeros(self.bits.shape[1], dtype=np.uint64)
        flat = np.packbits(np.pad(np.ones(self.n_universe, bool), (0, self.bits.shape[1] * 64 - self.n_universe)),
                           bitorder="little").view(np.uint64)
        words[:] = flat
        return words

    def covered_by_any(self) -> np.ndarray:
        return np.bitwise_or.reduce(self.bits, axis=0) if self.n_candidates else np.zeros(self.bits.shape[1], np.uint64)

    def as_ints(self) -> list[int]:
        return [int.from_bytes(row.tobytes(), "little") for row in self.bits]


def _pack_rows(mask: np.ndarray, words: int) -> np.ndarray:
    padded = np.zeros((mask.shape[0], words * 64), dtype=bool)
    padded[:, : mask.shape[1]] = mask
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


_DIAG_CODE = {"bowen": 0, "mean": 1, "mistake": 2}


def pairwise_coverage(sys: System, kinds: Sequence[str], candidates: Sequence, universe: Sequence, n: int,
                      eps_grid: Sequence[float], mistake: MistakeFunction | None = None,
                      max_bytes: int = 1 << 25) -> dict:
    """Packed ball-membership matrices keyed by (kind, eps), built block by block.

    Only O(|candidates| * |universe| / 64) words are held per key.  When
    ``n * eps <= 1`` the FK ball of radius eps equals the Bowen ball (a
    mismatch fraction below 1/n forces a perfect diagonal match), so the full
    distance tensor is only formed for coarser radii.
    """
    kinds = list(kinds)
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown metric kind {k!r}")
    eps_grid = [float(e) for e in eps_grid]
    g = (mistake or MistakeFunction())(n)
    fk_direct = [e for e in eps_grid if Fraction(e) * n > 1] if "fk" in kinds else []
    diag_kinds = [k for k in kinds if k != "fk"]
    if "fk" in kinds and len(fk_direct) < len(eps_grid) and "bowen" not in diag_kinds:
        diag_kinds.append("bowen")
    words = -(-len(universe) // 64)
    bits = {(k, e): np.zeros((len(candidates), words), np.uint64) for k in kinds for e in eps_grid}
    full = bool(fk_direct)
    for sl, T in pairwise_blocks(sys, candidates, universe, n, diagonal=not full, max_bytes=max_bytes):
        diag = _kernels.diagonal_of(T) if full else T
        radii = {k: _kernels.reduce_diag(diag, _DIAG_CODE[k], g) for k in diag_kinds}
        for k in kinds:
            for e in eps_grid:
                if k != "fk":
                    mask = radii[k] < e
                elif e in fk_direct:
                    mask = _kernels.within_fk(T, e)
                else:
                    mask = radii["bowen"] < e
                bits[(k, e)][sl] = _pack_rows(mask, words)
    return {key: Coverage.from_bits(b, len(universe)) for key, b in bits.items()}


def _popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum())


def _first_orphan(cov: Coverage) -> int | None:
    any_cov = cov.covered_by_any()
    missing = cov.full() & ~any_cov
    if not missing.any():
        return None
    w = int(np.flatnonzero(missing)[0])
    word = int(missing[w])
    return w * 64 + (word & -word).bit_length() - 1


def required_count(n_universe: int, delta: float) -> int:
    """Smallest integer strictly greater than (1 - delta) * n_universe.

    ``delta`` is read as the decimal it prints as, so 0.1 means exactly 1/10.
    """
    need = (1 - Fraction(repr(float(delta)))) * n_universe
    return math.floor(need) + 1


# ---------------------------------------------------------------------------
# greedy
# ---------------------------------------------------------------------------


def greedy_cover(cov: Coverage, target: int | None = None) -> list[int]:
    """Lazy greedy: repeatedly take the candidate covering most uncovered
    points, ties to the lowest index, until ``target`` points are covered."""
    target = cov.n_universe if target is None else target
    uncovered = cov.full()
    heap = [(-int(s), c) for c, s in enumerate(cov.sizes) if s > 0]
    heapq.heapify(heap)
    chosen = []
    covered = 0
    while covered < target and heap:
        neg, c = heapq.heappop(heap)
        gain = _popcount(cov.bits[c] & uncovered)
        if gain == 0:
            continue
        if gain < -neg and heap and (-gain, c) > heap[0]:
            heapq.heappush(heap, (-gain, c))
            continue
        chosen.append(c)
        uncovered &= ~cov.bits[c]
        covered += gain
    return chosen


def _harmonic(k: int) -> float:
    return sum(1.0 / i for i in range(1, k + 1))


# ---------------------------------------------------------------------------
# exact branch and bound
# ---------------------------------------------------------------------------


def _dominance_filter(sets: list[int]) -> list[int]:
    """Indices of sets not contained in another (ties keep the lowest index)."""
    keep = []
    for i, s in enumerate(sets):
        if s == 0:
            continue
        dominated = False
        for j, t in enumerate(sets):
            if j != i and s | t == t and (s != t or j < i):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def exact_cover(sets: list[int], universe: int, incumbent: list[int]) -> list[int]:
    """Minimum number of sets whose union contains ``universe`` (bitmasks).

    ``incumbent`` is any feasible cover; it seeds the upper bound.
    """
    idx = _dominance_filter([s & universe for s in sets])
    live = [sets[i] & universe for i in idx]
    state = {"size": len(incumbent), "best": None}
    by_elem: dict[int, list[int]] = {}

    def covering(e):
        if e not in by_elem:
            bit = 1 << e
            by_elem[e] = [k for k, s in enumerate(live) if s & bit]
        return by_elem[e]

    def recurse(uncovered: int, chosen: list[int]):
        if uncovered == 0:
            if len(chosen) < state["size"]:
                state["size"] = len(chosen)
                state["best"] = list(chosen)
            return
        widest = max((s & uncovered).bit_count() for s in live)
        if len(chosen) + -(-uncovered.bit_count() // widest) >= state["size"]:
            return
        # branch on the uncovered element with the fewest covering sets
        best_opts = None
        u = uncovered
        while u:
            low = u & -u
            opts = covering(low.bit_length() - 1)
            if best_opts is None or len(opts) < len(best_opts):
                best_opts = opts
                if len(opts) <= 1:
                    break
            u ^= low
        for k in sorted(best_opts, key=lambda k: (-(live[k] & uncovered).bit_count(), k)):
            chosen.append(k)
            recurse(uncovered & ~live[k], chosen)
            chosen.pop()

    recurse(universe, [])
    if state["best"] is None:
        return sorted(incumbent)
    return sorted(idx[k] for k in state["best"])


def exact_partial_cover(sets: list[int], universe: int, target: int, incumbent: list[int]) -> list[int]:
    """Minimum number of sets whose union meets at least ``target`` universe points."""
    order = sorted(range(len(sets)), key=lambda k: (-(sets[k] & universe).bit_count(), k))
    masks = [sets[k] & universe for k in order]
    state = {"size": len(incumbent), "best": [order.index(k) for k in incumbent]}

    def recurse(pos: int, covered: int, chosen: list[int]):
        have = covered.bit_count()
        if have >= target:
            if len(chosen) < state["size"]:
                state["size"] = len(chosen)
                state["best"] = list(chosen)
            return
        if len(chosen) + 1 >= state["size"] or pos >= len(masks):
            return
        gains = sorted(((m & ~covered).bit_count() for m in masks[pos:]), reverse=True)
        need = target - have
        k, acc = 0, 0
        while acc < need and k < len(gains):
            acc += gains[k]
            k += 1
        if acc < need or len(chosen) + k >= state["size"]:
            return
        chosen.append(pos)
        recurse(pos + 1, covered | masks[pos], chosen)
        chosen.pop()
        recurse(pos + 1, covered, chosen)

    recurse(0, 0, [])
    return sorted(order[k] for k in state["best"])


# ---------------------------------------------------------------------------
# cover numbers from coverage matrices
# ---------------------------------------------------------------------------


def cover_from_matrix(mask, mode: str = "greedy", exact_cap: int = EXACT_CAP,
                      target: int | None = None) -> CoverResult:
    """Cover ``target`` universe points (all by default) using rows of ``mask``."""
    cov = mask if isinstance(mask, Coverage) else Coverage(mask)
    if cov.n_universe == 0:
        raise ValueError("universe must be non-empty")
    full_cover = target is None or target >= cov.n_universe
    target = cov.n_universe if target is None else target
    if target < 1 or target > cov.n_universe:
        raise ValueError(f"cannot cover {target} of {cov.n_universe} points")
    if full_cover:
        orphan = _first_orphan(cov)
        if orphan is not None:
            raise InfeasibleCoverError(orphan)
    elif _popcount(cov.covered_by_any()) < target:
        raise InfeasibleCoverError(-1, f"candidates cover fewer than the required {target} points")

    greedy = greedy_cover(cov, target)
    if mode == "greedy":
        widest = int(cov.sizes.max())
        lb = -(-target // widest)
        if full_cover:
            lb = max(lb, math.ceil(len(greedy) / _harmonic(widest) - 1e-9))
        lb = min(lb, len(greedy))
        return CoverResult(len(greedy), "greedy", lb, tuple(greedy))
    if mode != "exact":
        raise ValueError(f"unknown cover mode {mode!r}")
    if min(cov.n_universe, cov.n_candidates) > exact_cap:
        raise ValueError(f"exact cover needs at most {exact_cap} universe points or candidates; got "
                         f"{cov.n_universe} and {cov.n_candidates}")
    sets = cov.as_ints()
    universe = (1 << cov.n_universe) - 1
    if full_cover:
        best = exact_cover(sets, universe, greedy)
    else:
        best = exact_partial_cover(sets, universe, target, greedy)
    return CoverResult(len(best), "exact", len(best), tuple(best))


def separated_from_distances(dist: np.ndarray, eps: float) -> list[int]:
    """Greedy maximal eps-separated subset in index order (pairwise >= eps)."""
    chosen: list[int] = []
    for i in range(dist.shape[0]):
        if all(dist[j, i] >= eps and dist[i, j] >= eps for j in chosen):
            chosen.append(i)
    return chosen


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def spanning_number(universe: Sequence, candidates: Sequence, oracle: BallOracle,
                    mode: str = "greedy", exact_cap: int = EXACT_CAP) -> CoverResult:
    if len(universe) == 0:
        raise ValueError("universe must be non-empty")
    return cover_from_matrix(oracle.coverage(list(candidates), list(universe)), mode, exact_cap)


def separated_number(sample: Sequence, oracle: BallOracle, eps: float | None = None) -> int:
    if len(sample) == 0:
        raise ValueError("sample must be non-empty")
    eps = oracle.eps if eps is None else eps
    dist = oracle.distances(list(sample), list(sample))
    return len(separated_from_distances(dist, eps))


def partial_cover_number(universe: Sequence, candidates: Sequence, oracle: BallOracle, delta: float,
                         mode: str = "greedy", exact_cap: int = EXACT_CAP) -> CoverResult:
    """Fewest centers whose balls hold strictly more than (1 - delta) of the
    universe (empirical measure)."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    target = required_count(len(universe), delta)
    return cover_from_matrix(oracle.coverage(list(candidates), list(universe)), mode, exact_cap, target)


def interval_cover_count(eps: float) -> int:
    """#([0,1], eps) for open balls centred in [0,1]: the smallest k with 2*eps*k > 1."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return math.floor(Fraction(1) / (2 * Fraction(repr(float(eps))))) + 1


def _analytic_dims(space: System) -> int | None:
    """Number of interval factors if ``space`` is a max-product of intervals."""
    if interval_like(space):
        return 1
    if isinstance(space, Product) and space.combiner == "max":
        a, b = _analytic_dims(space.left), _analytic_dims(space.right)
        if a is not None and b is not None:
            return a + b
    return None


def base_covering_number(space: System, eps: float, density: int = 2000, seed: int = 0,
                         params: SampleParams | None = None) -> CoverResult:
    """#(X, d, eps).  Exact for [0,1] and max-products of intervals (grid
    points spaced >= 2 eps apart give the matching lower bound); otherwise a
    greedy cover of a sample of ``density`` points."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    dims = _analytic_dims(space)
    if dims is not None:
        k = interval_cover_count(eps) ** dims
        return CoverResult(k, "exact", k, ())
    sample = sample_points(space, density, seed, params).points
    mask = base_distances(space, sample, sample) < eps
    res = cover_from_matrix(mask, "greedy")
    return CoverResult(res.cardinality, "greedy", res.lower_bound, res.centers)


@dataclass(frozen=True)
class Lemma31Cover:
    centers: tuple
    radius: float
    eps: float
    size: int
    diameter_bound: float
    lebesgue_bound: float


def lemma31_cover(space: System, eps: float, sample: Sequence | None = None,
                  probes: Sequence | None = None) -> Lemma31Cover:
    """Open cover by balls of radius eps/2 around an eps/4-net.

    The cover has diameter <= eps and Lebesgue number >= eps/4.  On intervals
    the net is the evenly spaced optimal one; otherwise it is a greedy net of
    ``sample``, and ``probes`` (if given) must all lie within eps/4 of it.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    quarter = eps / 4.0
    if sample is None:
        if not interval_like(space):
            raise ValueError("a sample is required outside interval spaces")
        k = interval_cover_count(quarter)
        centers = tuple(Scalar((2 * i + 1) / (2 * k)) for i in range(k))
    else:
        sample = list(sample)
        if interval_like(space):
            _check_interval_density(space, sample, quarter)
        mask = base_distances(space, sample, sample) < quarter
        res = cover_from_matrix(mask, "greedy")
        centers = tuple(sample[c] for c in res.centers)
    if probes is not None:
        d = base_distances(space, list(probes), list(centers))
        bad = np.flatnonzero(~(d < quarter).any(axis=1))
        if bad.size:
            raise DensityError(f"probe {int(bad[0])} is not within eps/4 of the net")
    return Lemma31Cover(centers, eps / 2.0, eps, len(centers), eps, quarter)


def _check_interval_density(space: System, sample: list, radius: float):
    vals = np.sort([p.value for p in sample])
    if getattr(space, "circle", False):
        gaps = np.diff(np.concatenate([vals, [vals[0] + 1.0]]))
        worst = gaps.max() / 2.0
    else:
        worst = max(vals[0], 1.0 - vals[-1], (np.diff(vals).max() / 2.0) if len(vals) > 1 else 0.0)
    if not worst < radius:
        raise DensityError(f"sample leaves a point {worst:.6g} away from every sample point (need < {radius:.6g})")


@dataclass(frozen=True)
class TameGrowthTable:
    theta: float
    rows: tuple  # (eps, covering number, eps**theta * log covering number)
    decreasing: bool


def tame_growth_diagnostic(space: System, theta: float, eps_grid: Sequence[float], **kw) -> TameGrowthTable:
    if not theta > 0:
        raise ValueError("theta must be positive")
    eps_grid = list(eps_grid)
    if any(b >= a for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be strictly decreasing")
    rows = []
    for eps in eps_grid:
        count = base_covering_number(space, eps, **kw).cardinality
        rows.append((eps, count, eps ** theta * math.log(count)))
    tail = [r[2] for r in rows[-3:]]
    decreasing = len(tail) == 3 and tail[0] > tail[1] > tail[2]
    return TameGrowthTable(theta, tuple(rows), decreasing)


def prop32_sandwich(sys: System, kind: str, pieces: Sequence[Sequence], candidates: Sequence, n: int,
                    eps: float, mistake: MistakeFunction | None = None, exact_cap: int = EXACT_CAP):
    """Exact r(Z_j) for each piece and for the union, with a shared candidate pool.

    Returns (per-piece counts, union count); max_j <= union <= sum_j must hold.
    """
    oracle = BallOracle(kind, n, eps, sys, mistake or MistakeFunction())
    union = [p for piece in pieces for p in piece]
    mask = oracle.coverage(list(candidates), union)
    counts, start = [], 0
    for piece in pieces:
        sub = mask[:, start:start + len(piece)]
        counts.append(cover_from_matrix(sub, "exact", exact_cap).cardinality)
        start += len(piece)
    total = cover_from_matrix(mask, "exact", exact_cap).cardinality
    return counts, total


__all__ = [
    "BallOracle", "CoverResult", "Coverage", "InfeasibleCoverError", "DensityError",
    "spanning_number", "separated_number", "partial_cover_number", "base_covering_number",
    "lemma31_cover", "tame_growth_diagnostic", "prop32_sandwich", "cover_from_matrix",
    "greedy_cover", "exact_cover", "required_count", "interval_cover_count"
]
