"""Orbit metrics: (n, delta)-matches, the Feldman-Katok distance, Bowen and
mean metrics, and mistake Bowen balls.

All comparisons against delta / epsilon are strict.  A pair (i, j) is
admissible for an (n, delta)-match iff ``d(T^i x, T^j y) < delta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from fkdim import _kernels
from fkdim.systems import OrbitSegment, System, pairwise_blocks

KINDS = ("fk", "bowen", "mean", "mistake")


@dataclass(frozen=True)
class DistanceMatrix:
    """entries[i, j] = d(a_i, b_j) for two orbit segments a, b of length n."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.ascontiguousarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] == 0:
            raise ValueError(f"distance matrix must be square and non-empty, got {e.shape}")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValueError("distance matrix entries must be finite and non-negative")
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def T(self) -> "DistanceMatrix":
        return DistanceMatrix(self.entries.T)

    def diagonal(self) -> np.ndarray:
        return np.ascontiguousarray(np.diagonal(self.entries))


@dataclass(frozen=True)
class MatchOutcome:
    size: int
    n: int
    witness: tuple | None = None

    @property
    def fbar(self) -> float:
        return (self.n - self.size) / self.n

    @property
    def fbar_exact(self) -> Fraction:
        return Fraction(self.n - self.size, self.n)


@dataclass(frozen=True)
class MistakeFunction:
    """Sublinear mistake budget.

    ``PowerLaw`` gives floor(n**alpha); ``Logarithmic`` gives floor(log2(n + 1)).
    Values are clamped to n - 1 so that at least one time is always checked.
    """

    kind: str = "power"
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in ("power", "log"):
            raise ValueError(f"unknown mistake function {self.kind!r}")
        if self.kind == "power" and not 0.0 < self.alpha < 1.0:
            raise ValueError("power-law exponent must lie in (0, 1)")

    @classmethod
    def power(cls, alpha: float = 0.5) -> "MistakeFunction":
        return cls("power", alpha)

    @classmethod
    def logarithmic(cls) -> "MistakeFunction":
        return cls("log", 0.0)

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ValueError("mistake function is defined for n >= 1")
        if self.kind == "log":
            g = (n + 1).bit_length() - 1
        else:
            # largest k with k**q <= n**p where alpha = p/q, in exact integers
            frac = Fraction(repr(self.alpha))
            p, q = frac.numerator, frac.denominator
            target = n ** p
            k = int(n ** self.alpha)
            while k > 0 and k ** q > target:
                k -= 1
            while (k + 1) ** q <= target:
                k += 1
            g = k
        return min(g, n - 1)

    def describe(self) -> str:
        return "log()" if self.kind == "log" else f"power({self.alpha!r})"


# ---------------------------------------------------------------------------
# single-pair operations
# ---------------------------------------------------------------------------


def distance_matrix(sys: System, a: OrbitSegment, b: OrbitSegment) -> DistanceMatrix:
    if a.n != b.n:
        raise ValueError(f"orbit lengths differ: {a.n} != {b.n}")
    n = a.n
    ea, eb = sys.encode([list(a.points), list(b.points)], 1)
    # each orbit point is encoded as its own length-1 orbit, so the full
    # tensor over (point, point) pairs is the distance matrix
    return DistanceMatrix(sys.tensor(ea, eb, 1, diagonal=True)[:, :, 0])


def orbit_distance_matrix(sys: System, x, y, n: int) -> DistanceMatrix:
    """Distance matrix of the length-n orbits of x and y, via the batch kernels."""
    ea, eb = sys.encode([[x], [y]], n)
    return DistanceMatrix(sys.tensor(ea, eb, n)[0, 0])


def max_match_size(D: DistanceMatrix, delta: float, witness: bool = False) -> MatchOutcome:
    """Largest order-preserving match using only pairs with entries < delta."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    E = D.entries
    size = int(_kernels.match_size(E, float(delta), True))
    if not witness:
        return MatchOutcome(size, D.n)
    return MatchOutcome(size, D.n, _witness(E < delta, size))


def _witness(A: np.ndarray, size: int) -> tuple:
    """Recover a maximum match, matching each row as early as possible to the
    smallest feasible column."""
    n, m = A.shape
    S = np.zeros((n + 1, m + 1), dtype=np.int64)  # S[i, j]: best using rows >= i, cols >= j
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            S[i, j] = max(S[i + 1, j], S[i, j + 1], S[i + 1, j + 1] + A[i, j])
    pairs = []
    i, j = 0, 0
    need = size
    while need > 0:
        for jj in range(j, m):
            if A[i, jj] and S[i + 1, jj + 1] == need - 1:
                pairs.append((i, jj))
                j = jj + 1
                need -= 1
                break
        i += 1
    return tuple(pairs)


def fk_distance(D: DistanceMatrix) -> float:
    """inf{delta > 0 : fbar_{n,delta} < delta} by exact breakpoint search.

    The infimum never exceeds 1 because every delta > 1 qualifies.
    """
    return float(_kernels.fk_breakpoint(D.entries))


def fk_distance_bisect(D: DistanceMatrix, tol: float = 1e-10) -> float:
    """Cross-check for :func:`fk_distance` by bisection on the monotone
    predicate ``fbar_{n,delta} < delta``; the result is within ``tol`` above
    the infimum."""
    return float(_kernels.fk_bisect(D.entries, float(tol)))


def bowen_distance(D: DistanceMatrix) -> float:
    return float(_kernels.diag_max(D.diagonal()))


def mean_distance(D: DistanceMatrix) -> float:
    return float(_kernels.diag_mean(D.diagonal()))


def mistake_radius(D: DistanceMatrix, g: MistakeFunction) -> float:
    """Smallest threshold eps' such that y is in B_n(g; x, eps) for all eps > eps'."""
    return float(_kernels.diag_mistake(D.diagonal(), g(D.n)))


def mistake_ball_contains(D: DistanceMatrix, epsilon: float, g: MistakeFunction) -> bool:
    """True iff at most g(n) times j have d(T^j x, T^j y) >= epsilon."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    violations = int(np.count_nonzero(D.diagonal() >= epsilon))
    return violations <= g(D.n)


def kind_distance(D: DistanceMatrix, kind: str, g: MistakeFunction | None = None) -> float:
    if kind == "fk":
        return fk_distance(D)
    if kind == "bowen":
        return bowen_distance(D)
    if kind == "mean":
        return mean_distance(D)
    if kind == "mistake":
        return mistake_radius(D, g or MistakeFunction())
    raise ValueError(f"unknown metric kind {kind!r}")


# ---------------------------------------------------------------------------
# batch operations
# ---------------------------------------------------------------------------

_DIAG_CODE = {"bowen": 0, "mean": 1, "mistake": 2}


def pairwise_distances(sys: System, kinds: Iterable[str], A: Sequence, B: Sequence, n: int,
                       mistake: MistakeFunction | None = None, base: bool = False) -> dict:
    """Distances between all length-n orbits of A x B for several metric kinds.

    For ``mistake`` the returned value is the mistake radius, so that ball
    membership is ``value < eps`` for every kind.  With ``base=True`` the
    base-space metric is returned under the key ``"base"``.
    """
    kinds = list(kinds)
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown metric kind {k!r}")
    g = (mistake or MistakeFunction())(n)
    out = {k: np.empty((len(A), len(B))) for k in kinds}
    if base:
        out["base"] = np.empty((len(A), len(B)))
    full = "fk" in kinds
    for sl, T in pairwise_blocks(sys, A, B, n, diagonal=not full):
        if full:
            out["fk"][sl] = _kernels.reduce_fk(T)
            diag = _kernels.diagonal_of(T) if len(kinds) > 1 or base else None
        else:
            diag = T
        for k in kinds:
            if k != "fk":
                out[k][sl] = _kernels.reduce_diag(diag, _DIAG_CODE[k], g)
        if base:
            out["base"][sl] = diag[:, :, 0]
    return out


def base_distances(sys: System, A: Sequence, B: Sequence) -> np.ndarray:
    out = np.empty((len(A), len(B)))
    for sl, T in pairwise_blocks(sys, A, B, 1, diagonal=True):
        out[sl] = T[:, :, 0]
    return out
