"""State spaces, maps, metrics and samplers for the built-in dynamical systems.

Shift spaces are represented by periodic sequences so that the shift is exact
and the two-sided weighted metric

    d(x, y) = sum_{i in Z} base**(-|i|) * rho(x_i, y_i)

has a closed form.  For sequences of common period L the sum folds onto the
residues mod L with weights

    w_r = (base**(-r) + base**(-(L - r))) / (1 - base**(-L)),   0 <= r < L.

Interval maps act on 64-bit floats; doubling and tent steps are exact in
binary floating point, so orbits are exact for the first ~50 iterates.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Sequence, Union

import numpy as np

from fkdim import _kernels


class IncompatiblePointError(TypeError):
    """A point variant does not belong to the state space of a system."""


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolicPeriodic:
    period: int
    symbols: tuple

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if self.period < 1 or self.period != len(syms):
            raise ValueError(f"period {self.period} does not match {len(syms)} symbols")
        if any(s < 0 for s in syms):
            raise ValueError("symbols must be non-negative")


@dataclass(frozen=True)
class CubePeriodic:
    period: int
    vectors: tuple

    def __post_init__(self):
        vecs = tuple(tuple(float(c) for c in v) for v in self.vectors)
        object.__setattr__(self, "vectors", vecs)
        if self.period < 1 or self.period != len(vecs):
            raise ValueError(f"period {self.period} does not match {len(vecs)} vectors")
        dims = {len(v) for v in vecs}
        if len(dims) != 1 or 0 in dims:
            raise ValueError("all vectors must share one positive dimension")
        if any(not 0.0 <= c <= 1.0 for v in vecs for c in v):
            raise ValueError("cube coordinates must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return len(self.vectors[0])


@dataclass(frozen=True)
class Scalar:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"scalar {self.value} outside [0, 1]")


@dataclass(frozen=True)
class ProductPoint:
    left: "Point"
    right: "Point"


Point = Union[SymbolicPeriodic, CubePeriodic, Scalar, ProductPoint]


@dataclass(frozen=True)
class OrbitSegment:
    points: tuple

    @property
    def n(self) -> int:
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


@dataclass(frozen=True)
class SampleParams:
    """Sampling family: ``mode`` is ``"random"`` or ``"grid"``; ``period`` is
    the period of sampled shift points; ``weights`` is an optional symbol
    distribution (Bernoulli measure) for finite full shifts."""

    mode: str = "random"
    period: int = 8
    weights: tuple | None = None


@dataclass(frozen=True)
class SampleSet:
    points: tuple
    seed: int
    system: "System"

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]


def derive_seed(master: int, *cell) -> int:
    """64-bit seed for a cell, derived by hashing the master seed and the cell key."""
    h = hashlib.blake2b(repr((int(master),) + tuple(cell)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@lru_cache(maxsize=256)
def shift_weights(L: int, base: float) -> np.ndarray:
    r = np.arange(L, dtype=np.float64)
    w = (base ** (-r) + base ** (-(L - r))) / (1.0 - base ** (-float(L)))
    w.setflags(write=False)
    return w


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------


class System:
    """Base class: a compact metric space with a forward map."""

    def apply(self, p):
        raise NotImplementedError

    def distance(self, p, q) -> float:
        ea, eb = self.encode([[p], [q]], 1)
        return float(self.tensor(ea, eb, 1, diagonal=True)[0, 0, 0])

    def check(self, p):
        raise NotImplementedError

    # batch interface used by the orbit-metric kernels
    def encode(self, groups, n):
        raise NotImplementedError

    def take(self, enc, sl):
        return enc[sl]

    def size(self, enc) -> int:
        return len(enc)

    def tensor(self, ea, eb, n, diagonal=False) -> np.ndarray:
        raise NotImplementedError

    def sample(self, count, rng, params: SampleParams):
        raise NotImplementedError

    def sample_ball(self, x, radius, count, rng, params: SampleParams):
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError


class _IntervalSystem(System):
    circle = False

    def check(self, p):
        if not isinstance(p, Scalar):
            raise IncompatiblePointError(f"{self.describe()} expects Scalar, got {type(p).__name__}")

    def step_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, p):
        self.check(p)
        return Scalar(float(self.step_array(np.array([p.value]))[0]))

    def encode(self, groups, n):
        encs = []
        for pts in groups:
            for p in pts:
                self.check(p)
            x = np.array([p.value for p in pts], dtype=np.float64)
            orb = np.empty((len(pts), n))
            for i in range(n):
                orb[:, i] = x
                x = self.step_array(x)
            encs.append(orb)
        return encs

    def tensor(self, ea, eb, n, diagonal=False):
        if diagonal:
            return _kernels.scalar_diag(ea[:, :n], eb[:, :n], self.circle)
        return _kernels.scalar_full(ea[:, :n], eb[:, :n], self.circle)

    def sample(self, count, rng, params):
        if params.mode == "grid":
            return [Scalar((2 * i + 1) / (2 * count)) for i in range(count)]
        return [Scalar(v) for v in rng.random(count)]

    def sample_ball(self, x, radius, count, rng, params):
        self.check(x)
        m = count - 1
        if self.circle:
            if radius >= 0.5:
                vals = rng.random(m)
            else:
                vals = np.mod(x.value + rng.uniform(-radius, radius, m), 1.0)
        else:
            vals = rng.uniform(max(0.0, x.value - radius), min(1.0, x.value + radius), m)
        return [x] + [Scalar(float(v)) for v in vals]

    @property
    def diameter(self):
        return 0.5 if self.circle else 1.0


@dataclass(frozen=True)
class DoublingMap(_IntervalSystem):
    """x -> 2x mod 1 with the circle metric."""

    circle = True

    def step_array(self, x):
        return np.mod(2.0 * x, 1.0)

    def describe(self):
        return "doubling()"


@dataclass(frozen=True)
class TentMap(_IntervalSystem):
    """x -> min(2x, 2 - 2x) with |x - y|."""

    def step_array(self, x):
        return np.minimum(2.0 * x, 2.0 - 2.0 * x)

    def describe(self):
        return "tent()"


@dataclass(frozen=True)
class IdentityMap(_IntervalSystem):
    """The static system on [0, 1]; every orbit metric collapses to |x - y|."""

    def step_array(self, x):
        return x.copy()

    def describe(self):
        return "identity()"


class _ShiftSystem(System):
    discrete = False

    def _array(self, p) -> np.ndarray:
        raise NotImplementedError

    def encode(self, groups, n):
        for pts in groups:
            for p in pts:
                self.check(p)
        periods = [p.period for pts in groups for p in pts]
        L = reduce(math.lcm, periods, 1)
        encs = []
        for pts in groups:
            arr = np.empty((len(pts), L, self._width()))
            for k, p in enumerate(pts):
                a = self._array(p)
                arr[k] = np.tile(a, (L // p.period, 1))
            encs.append(arr)
        return encs

    def tensor(self, ea, eb, n, diagonal=False):
        L = ea.shape[1]
        w = shift_weights(L, self.base)
        idx = np.arange(n + L) % L
        xa, xb = ea[:, idx, :], eb[:, idx, :]
        if diagonal:
            return _kernels.shift_diag(xa, xb, w, n, self.discrete)
        return _kernels.shift_full(xa, xb, w, n, self.discrete)

    def total_weight(self) -> float:
        b = self.base
        return (b + 1.0) / (b - 1.0)

    @property
    def diameter(self):
        return self.total_weight()

    def _fixed_window(self, L: int, radius: float) -> np.ndarray:
        """Residues whose agreement keeps every sequence within ``radius``."""
        w = shift_weights(L, self.base)
        order = np.argsort(-w, kind="stable")
        free_weight = 0.0
        fixed = np.ones(L, dtype=bool)
        for r in order[::-1]:
            if free_weight + w[r] <= radius:
                free_weight += w[r]
                fixed[r] = False
            else:
                break
        return fixed


@dataclass(frozen=True)
class FullShiftFinite(_ShiftSystem):
    """Full shift on k symbols; rho is the discrete metric."""

    k: int = 2
    base: float = 2.0
    discrete = True

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("alphabet size must be >= 2")
        if self.base <= 1.0:
            raise ValueError("decay base must exceed 1")

    def describe(self):
        return f"full_shift(k={self.k}, base={self.base!r})"

    def check(self, p):
        if not isinstance(p, SymbolicPeriodic):
            raise IncompatiblePointError(f"{self.describe()} expects SymbolicPeriodic, got {type(p).__name__}")
        if any(s >= self.k for s in p.symbols):
            raise IncompatiblePointError(f"symbol outside alphabet of size {self.k}")

    def _width(self):
        return 1

    def _array(self, p):
        return np.asarray(p.symbols, dtype=np.float64)[:, None]

    def apply(self, p):
        self.check(p)
        return SymbolicPeriodic(p.period, p.symbols[1:] + p.symbols[:1])

    def sample(self, count, rng, params):
        P = params.period
        if params.mode == "grid":
            if count > self.k ** P:
                raise ValueError(f"grid of period {P} has only {self.k ** P} words")
            words = []
            for idx in range(count):
                digits = []
                for _ in range(P):
                    idx, dgt = divmod(idx, self.k)
                    digits.append(dgt)
                words.append(SymbolicPeriodic(P, digits[::-1]))
            return words
        p = None if params.weights is None else np.asarray(params.weights, dtype=float)
        draws = rng.choice(self.k, size=(count, P), p=p)
        return [SymbolicPeriodic(P, row) for row in draws]

    def sample_ball(self, x, radius, count, rng, params):
        self.check(x)
        L = x.period * max(1, -(-params.period // x.period))
        base = np.tile(np.asarray(x.symbols), L // x.period)
        fixed = self._fixed_window(L, radius)
        p = None if params.weights is None else np.asarray(params.weights, dtype=float)
        out = [SymbolicPeriodic(L, base)]
        for _ in range(count - 1):
            y = base.copy()
            free = ~fixed
            y[free] = rng.choice(self.k, size=int(free.sum()), p=p)
            out.append(SymbolicPeriodic(L, y))
        return out


@dataclass(frozen=True)
class CubeShift(_ShiftSystem):
    """Shift on ([0, 1]^D)^Z; rho is the max-coordinate metric."""

    D: int = 1
    base: float = 2.0

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("cube dimension must be >= 1")
        if self.base <= 1.0:
            raise ValueError("decay base must exceed 1")

    def describe(self):
        return f"cube_shift(D={self.D}, base={self.base!r})"

    def check(self, p):
        if not isinstance(p, CubePeriodic):
            raise IncompatiblePointError(f"{self.describe()} expects CubePeriodic, got {type(p).__name__}")
        if p.dim != self.D:
            raise IncompatiblePointError(f"expected dimension {self.D}, got {p.dim}")

    def _width(self):
        return self.D

    def _array(self, p):
        return np.asarray(p.vectors, dtype=np.float64)

    def apply(self, p):
        self.check(p)
        return CubePeriodic(p.period, p.vectors[1:] + p.vectors[:1])

    def sample(self, count, rng, params):
        P = params.period
        if params.mode == "grid":
            cells = P * self.D
            m = round(count ** (1.0 / cells))
            if m ** cells != count:
                raise ValueError(f"grid sampling needs count = m**{cells}")
            levels = (2 * np.arange(m) + 1) / (2 * m)
            idx = np.indices((m,) * cells).reshape(cells, -1).T
            return [CubePeriodic(P, levels[row].reshape(P, self.D)) for row in idx]
        draws = rng.random((count, P, self.D))
        return [CubePeriodic(P, row) for row in draws]

    def sample_ball(self, x, radius, count, rng, params):
        self.check(x)
        L = x.period * max(1, -(-params.period // x.period))
        base = np.tile(np.asarray(x.vectors), (L // x.period, 1))
        eta = min(1.0, radius / self.total_weight())
        out = [CubePeriodic(L, base)]
        for _ in range(count - 1):
            y = np.clip(base + rng.uniform(-eta, eta, base.shape), 0.0, 1.0)
            out.append(CubePeriodic(L, y))
        return out


@dataclass(frozen=True)
class Product(System):
    """Product system; the metric combines the factor metrics by max or sum."""

    left: System = field(default_factory=TentMap)
    right: System = field(default_factory=TentMap)
    combiner: str = "max"

    def __post_init__(self):
        if self.combiner not in ("max", "sum"):
            raise ValueError(f"unknown combiner {self.combiner!r}")

    def describe(self):
        return f"product({self.left.describe()}, {self.right.describe()}, {self.combiner})"

    def check(self, p):
        if not isinstance(p, ProductPoint):
            raise IncompatiblePointError(f"{self.describe()} expects ProductPoint, got {type(p).__name__}")
        self.left.check(p.left)
        self.right.check(p.right)

    def apply(self, p):
        self.check(p)
        return ProductPoint(self.left.apply(p.left), self.right.apply(p.right))

    def encode(self, groups, n):
        for pts in groups:
            for p in pts:
                self.check(p)
        le = self.left.encode([[p.left for p in pts] for pts in groups], n)
        re = self.right.encode([[p.right for p in pts] for pts in groups], n)
        return list(zip(le, re))

    def take(self, enc, sl):
        return (self.left.take(enc[0], sl), self.right.take(enc[1], sl))

    def size(self, enc):
        return self.left.size(enc[0])

    def tensor(self, ea, eb, n, diagonal=False):
        a = self.left.tensor(ea[0], eb[0], n, diagonal)
        b = self.right.tensor(ea[1], eb[1], n, diagonal)
        return np.maximum(a, b) if self.combiner == "max" else a + b

    def sample(self, count, rng, params):
        lrng, rrng = (np.random.default_rng(s) for s in rng.integers(0, 2**63, 2))
        return [ProductPoint(a, b) for a, b in zip(self.left.sample(count, lrng, params),
                                                   self.right.sample(count, rrng, params))]

    def sample_ball(self, x, radius, count, rng, params):
        self.check(x)
        r = radius if self.combiner == "max" else radius / 2.0
        lrng, rrng = (np.random.default_rng(s) for s in rng.integers(0, 2**63, 2))
        return [ProductPoint(a, b) for a, b in zip(self.left.sample_ball(x.left, r, count, lrng, params),
                                                   self.right.sample_ball(x.right, r, count, rrng, params))]

    @property
    def diameter(self):
        a, b = self.left.diameter, self.right.diameter
        return max(a, b) if self.combiner == "max" else a + b


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def evaluate_map(sys: System, p):
    return sys.apply(p)


def evaluate_metric(sys: System, p, q) -> float:
    """d(p, q); shift points of different periods are compared on their lcm."""
    return sys.distance(p, q)


def orbit(sys: System, p, n: int) -> OrbitSegment:
    if n < 1:
        raise ValueError("orbit length must be positive")
    pts = [p]
    for _ in range(n - 1):
        pts.append(sys.apply(pts[-1]))
    sys.check(p)
    return OrbitSegment(tuple(pts))


def sample_points(sys: System, count: int, seed: int, params: SampleParams | None = None) -> SampleSet:
    if count < 1:
        raise ValueError("sample count must be positive")
    params = params or SampleParams()
    rng = np.random.default_rng(seed)
    return SampleSet(tuple(sys.sample(count, rng, params)), seed, sys)


def sample_ball(sys: System, x, radius: float, count: int, seed: int,
                params: SampleParams | None = None) -> SampleSet:
    """Sample a closed neighbourhood of ``x`` lying inside the closed ball of ``radius``.

    The first point is ``x`` itself.
    """
    if count < 1:
        raise ValueError("sample count must be positive")
    params = params or SampleParams()
    rng = np.random.default_rng(seed)
    return SampleSet(tuple(sys.sample_ball(x, radius, count, rng, params)), seed, sys)


def interval_like(sys: System) -> bool:
    return isinstance(sys, _IntervalSystem)


def parse_point(sys: System, text: str):
    """Parse a point literal.

    Scalars are plain numbers (``0.25``); symbolic words are comma-separated
    symbols (``0,1,1``); cube points are ``;``-separated vectors of
    comma-separated coordinates; product points join factors with ``|``.
    """
    text = text.strip()
    if isinstance(sys, Product):
        left, _, right = text.partition("|")
        if not right:
            raise ValueError(f"product point needs 'left|right', got {text!r}")
        return ProductPoint(parse_point(sys.left, left), parse_point(sys.right, right))
    if isinstance(sys, _IntervalSystem):
        return Scalar(float(text))
    if isinstance(sys, FullShiftFinite):
        syms = [int(s) for s in text.split(",") if s.strip()]
        p = SymbolicPeriodic(len(syms), syms)
        sys.check(p)
        return p
    if isinstance(sys, CubeShift):
        vecs = [[float(c) for c in v.split(",")] for v in text.split(";") if v.strip()]
        p = CubePeriodic(len(vecs), vecs)
        sys.check(p)
        return p
    raise ValueError(f"cannot parse points for {sys!r}")


def format_point(p) -> str:
    if isinstance(p, Scalar):
        return repr(p.value)
    if isinstance(p, SymbolicPeriodic):
        return ",".join(map(str, p.symbols))
    if isinstance(p, CubePeriodic):
        return ";".join(",".join(repr(c) for c in v) for v in p.vectors)
    return f"{format_point(p.left)}|{format_point(p.right)}"


def pairwise_blocks(sys: System, A: Sequence, B: Sequence, n: int, diagonal: bool, max_bytes: int = 1 << 25):
    """Yield ``(row_slice, tensor)`` blocks of orbit distance tensors for A x B."""
    ea, eb = sys.encode([list(A), list(B)], n)
    R, C = sys.size(ea), sys.size(eb)
    per_row = C * n * (1 if diagonal else n) * 8
    step = max(1, max_bytes // max(per_row, 1))
    for start in range(0, R, step):
        sl = slice(start, min(R, start + step))
        yield sl, sys.tensor(sys.take(ea, sl), eb, n, diagonal)
