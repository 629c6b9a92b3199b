"""Growth rates, metric mean dimension, FK Katok entropy and FK local entropy
estimates from finite (n, eps) cover counts, plus the checks that compare them.

Rates are finite-n surrogates of a limsup: the least-squares slope of
log(count) against n over a window, reported next to the max (and min) of
log(count)/n over the same window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from fkdim.covering import (
    EXACT_CAP,
    cover_from_matrix,
    greedy_cover,
    pairwise_coverage,
    prop32_sandwich,
    required_count,
)
from fkdim.orbit_metrics import KINDS, MistakeFunction
from fkdim.systems import SampleParams, System, derive_seed, sample_ball, sample_points

DEFAULT_SEED = 0xFE1DCA70


@dataclass(frozen=True)
class SamplingPlan:
    """How cover counts are sampled.

    ``universe`` points are drawn once per experiment (seeded from ``seed``)
    and shared by every metric kind, n and eps, so counts at different cells
    are comparable.  ``extra`` additional candidate centers join the universe
    as candidates.
    """

    universe: int = 400
    extra: int = 0
    period: int = 8
    seed: int = DEFAULT_SEED
    mode: str = "random"
    cover: str = "greedy"
    exact_cap: int = EXACT_CAP
    n_step: int = 1
    weights: tuple | None = None

    def params(self, weights=None) -> SampleParams:
        return SampleParams(self.mode, self.period, self.weights if weights is None else weights)

    def n_values(self, n_window: Sequence[int]) -> list[int]:
        lo, hi = n_window
        if not 1 <= lo < hi:
            raise ValueError(f"n window must satisfy 1 <= n_min < n_max, got {n_window}")
        ns = list(range(lo, hi + 1, self.n_step))
        if ns[-1] != hi:
            ns.append(hi)
        return ns


@dataclass(frozen=True)
class MeasureSampler:
    """A finite stand-in for a Borel probability measure: ``uniform`` (Lebesgue
    or the uniform Bernoulli measure), ``bernoulli`` with symbol ``weights``,
    or ``point`` (a point mass at ``point``)."""

    name: str = "uniform"
    kind: str = "uniform"
    weights: tuple | None = None
    point: object = None

    def draw(self, sys: System, count: int, seed: int, plan: SamplingPlan) -> list:
        if self.kind == "point":
            return [self.point] * count
        params = SampleParams("random", plan.period, self.weights if self.kind == "bernoulli" else None)
        return list(sample_points(sys, count, seed, params).points)


# ---------------------------------------------------------------------------
# growth rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    rate: float
    r2: float
    tail_max: float
    tail_min: float


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    sxy = float(((x - xm) * (y - ym)).sum())
    syy = float(((y - ym) ** 2).sum())
    slope = sxy / sxx
    r2 = 1.0 if syy == 0.0 else sxy * sxy / (sxx * syy)
    return slope, r2


def growth_rate(counts: Iterable[tuple[int, int]], window: Sequence[int] | None = None) -> RateFit:
    """Slope of log(count) against n over ``window`` = (n_min, n_max)."""
    pts = sorted((int(n), c) for n, c in counts)
    if window is not None:
        lo, hi = window
        pts = [(n, c) for n, c in pts if lo <= n <= hi]
    if len(pts) < 3 or len({n for n, _ in pts}) < 2:
        raise ValueError("growth rate needs at least 3 points in the window")
    if any(c < 1 for _, c in pts):
        raise ValueError("counts must be >= 1")
    n = np.array([p[0] for p in pts], dtype=np.float64)
    logc = np.log(np.array([p[1] for p in pts], dtype=np.float64))
    slope, r2 = _linfit(n, logc)
    per_n = logc / n
    return RateFit(slope, r2, float(per_n.max()), float(per_n.min()))


@dataclass(frozen=True)
class RateRow:
    eps: float
    counts: tuple  # (n, count, method)
    fit: RateFit

    @property
    def rate(self) -> float:
        return max(self.fit.rate, 0.0)


@dataclass(frozen=True)
class RateCurve:
    kind: str
    rows: tuple


@dataclass(frozen=True)
class MdimEstimate:
    kind: str
    flavor: str
    curve: RateCurve
    slope: float
    slope_r2: float
    tail_slope: float

    @property
    def eps(self) -> list[float]:
        return [r.eps for r in self.curve.rows]

    @property
    def rates(self) -> list[float]:
        return [r.rate for r in self.curve.rows]

    @property
    def tail_rates(self) -> list[float]:
        return [r.fit.tail_max if self.flavor == "upper" else r.fit.tail_min for r in self.curve.rows]

    @property
    def ratios(self) -> list[float]:
        return [r.rate / math.log(1.0 / r.eps) for r in self.curve.rows]

    @property
    def ratio_at_smallest(self) -> float:
        return self.ratios[-1]


def _check_eps_grid(eps_grid: Sequence[float], minimum: int = 1) -> list[float]:
    eps = [float(e) for e in eps_grid]
    if len(eps) < minimum:
        raise ValueError(f"eps grid needs at least {minimum} values")
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps grid must be positive and strictly decreasing")
    return eps


def slope_vs_log_inv_eps(eps: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    x = np.log(1.0 / np.asarray(eps, dtype=np.float64))
    return _linfit(x, np.asarray(values, dtype=np.float64))


# ---------------------------------------------------------------------------
# count tables
# ---------------------------------------------------------------------------


def universe_and_candidates(sys: System, plan: SamplingPlan, tag: str = "universe"):
    universe = list(sample_points(sys, plan.universe, derive_seed(plan.seed, tag), plan.params()).points)
    candidates = list(universe)
    if plan.extra:
        candidates += sample_points(sys, plan.extra, derive_seed(plan.seed, tag, "extra"), plan.params()).points
    return universe, candidates


def count_table(sys: System, kinds: Sequence[str], universe: Sequence, candidates: Sequence,
                n_values: Sequence[int], eps_grid: Sequence[float], mistake: MistakeFunction | None = None,
                mode: str = "greedy", exact_cap: int = EXACT_CAP, delta: float | None = None) -> dict:
    """Cover counts keyed by (kind, eps, n).

    Each value is ``(full CoverResult, partial count or None)``; the partial
    count (strictly more than (1 - delta) of the universe) is the greedy prefix
    of the full greedy cover, so it never exceeds the full count.
    """
    mistake = mistake or MistakeFunction()
    target = None if delta is None else required_count(len(universe), delta)
    out = {}
    for n in n_values:
        covs = pairwise_coverage(sys, kinds, candidates, universe, n, eps_grid, mistake)
        for kind in kinds:
            for eps in eps_grid:
                cov = covs[(kind, float(eps))]
                full = cover_from_matrix(cov, mode, exact_cap)
                partial = None
                if target is not None:
                    if mode == "greedy":
                        partial = len(greedy_cover(cov, target))
                    else:
                        partial = cover_from_matrix(cov, mode, exact_cap, target).cardinality
                out[(kind, eps, n)] = (full, partial)
    return out


def _curve(kind: str, table: dict, eps_grid, n_values, window, partial: bool = False) -> RateCurve:
    rows = []
    for eps in eps_grid:
        counts = []
        for n in n_values:
            full, part = table[(kind, eps, n)]
            counts.append((n, part if partial else full.cardinality, full.method))
        rows.append(RateRow(eps, tuple(counts), growth_rate([(n, c) for n, c, _ in counts], window)))
    return RateCurve(kind, tuple(rows))


def _mdim_from_curve(curve: RateCurve, flavor: str) -> MdimEstimate:
    eps = [r.eps for r in curve.rows]
    slope, r2 = slope_vs_log_inv_eps(eps, [r.rate for r in curve.rows])
    tails = [r.fit.tail_max if flavor == "upper" else r.fit.tail_min for r in curve.rows]
    tail_slope, _ = slope_vs_log_inv_eps(eps, tails)
    return MdimEstimate(curve.kind, flavor, curve, slope, r2, tail_slope)


def mdim_estimates(kinds: Sequence[str], sys: System, plan: SamplingPlan, eps_grid: Sequence[float],
                   n_window: Sequence[int], mistake: MistakeFunction | None = None,
                   flavor: str = "upper") -> dict:
    """Metric mean dimension estimates for several kinds on one shared sample."""
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"unknown metric kind {k!r}")
    if flavor not in ("upper", "lower"):
        raise ValueError("flavor must be 'upper' or 'lower'")
    eps_grid = _check_eps_grid(eps_grid, 4)
    ns = plan.n_values(n_window)
    universe, candidates = universe_and_candidates(sys, plan)
    table = count_table(sys, kinds, universe, candidates, ns, eps_grid, mistake, plan.cover, plan.exact_cap)
    return {k: _mdim_from_curve(_curve(k, table, eps_grid, ns, n_window), flavor) for k in kinds}


def mdim_estimate(kind: str, sys: System, plan: SamplingPlan, eps_grid: Sequence[float],
                  n_window: Sequence[int], mistake: MistakeFunction | None = None,
                  flavor: str = "upper") -> MdimEstimate:
    return mdim_estimates([kind], sys, plan, eps_grid, n_window, mistake, flavor)[kind]


# ---------------------------------------------------------------------------
# Katok entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KatokEstimate:
    delta: float
    measure: str
    curve: RateCurve          # partial-cover counts
    full_curve: RateCurve     # full spanning counts on the same sample
    slope: float

    @property
    def rates(self) -> list[float]:
        return [r.rate for r in self.curve.rows]

    def cells(self):
        """(eps, n, partial count, full count) for every cell."""
        for row, frow in zip(self.curve.rows, self.full_curve.rows):
            for (n, c, _), (_, f, _) in zip(row.counts, frow.counts):
                yield row.eps, n, c, f


def katok_entropy_estimate(sys: System, measure: MeasureSampler, delta: float, eps_grid: Sequence[float],
                           n_window: Sequence[int], plan: SamplingPlan) -> KatokEstimate:
    """FK Katok eps-entropy: growth of the fewest FK balls holding mass > 1 - delta."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    eps_grid = _check_eps_grid(eps_grid)
    ns = plan.n_values(n_window)
    pts = measure.draw(sys, plan.universe, derive_seed(plan.seed, "measure", measure.name), plan)
    table = count_table(sys, ["fk"], pts, pts, ns, eps_grid, None, plan.cover, plan.exact_cap, delta)
    curve = _curve("fk", table, eps_grid, ns, n_window, partial=True)
    full = _curve("fk", table, eps_grid, ns, n_window)
    slope = slope_vs_log_inv_eps(eps_grid, [r.rate for r in curve.rows])[0] if len(eps_grid) > 1 else float("nan")
    return KatokEstimate(delta, measure.name, curve, full, slope)


# ---------------------------------------------------------------------------
# local entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalEntropyEstimate:
    point: object
    eps: float
    radii: tuple          # finite radii, then inf for K = X
    rates: tuple
    curves: tuple         # per-radius RateRow

    @property
    def inf_rate(self) -> float:
        return min(self.rates)


def _local_rows(sys: System, x, eps_grid, radii, n_window, plan: SamplingPlan, probe_id=0,
                global_curve: RateCurve | None = None) -> dict:
    """Per-eps lists of (radius, RateRow); radius inf is K = X."""
    ns = plan.n_values(n_window)
    out = {eps: [] for eps in eps_grid}
    for rho in radii:
        seed = derive_seed(plan.seed, "local", probe_id, float(rho))
        K = list(sample_ball(sys, x, rho, plan.universe, seed, plan.params()).points)
        table = count_table(sys, ["fk"], K, K, ns, eps_grid, None, plan.cover, plan.exact_cap)
        curve = _curve("fk", table, eps_grid, ns, n_window)
        for row in curve.rows:
            out[row.eps].append((float(rho), row))
    if global_curve is None:
        universe, candidates = universe_and_candidates(sys, plan)
        table = count_table(sys, ["fk"], universe, candidates, ns, eps_grid, None, plan.cover, plan.exact_cap)
        global_curve = _curve("fk", table, eps_grid, ns, n_window)
    for row in global_curve.rows:
        out[row.eps].append((math.inf, row))
    return out


def local_entropy_estimate(sys: System, x, eps: float, radii: Sequence[float], n_window: Sequence[int],
                           plan: SamplingPlan, probe_id=0, global_curve: RateCurve | None = None
                           ) -> LocalEntropyEstimate:
    """inf over closed neighbourhoods K of x of the FK spanning rate of K.

    Neighbourhoods are sampled inside closed balls of the given radii; X
    itself is always included as the largest neighbourhood.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be positive and strictly decreasing")
    rows = _local_rows(sys, x, [float(eps)], radii, n_window, plan, probe_id, global_curve)[float(eps)]
    rows = [rows[-1]] + rows[:-1]
    return LocalEntropyEstimate(x, float(eps), tuple(r for r, _ in rows), tuple(row.rate for _, row in rows),
                                tuple(row for _, row in rows))


# ---------------------------------------------------------------------------
# consistency checks
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    bound: float
    passed: bool


@dataclass
class Report:
    name: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, bound: float, passed: bool):
        self.checks.append(Check(name, float(value), float(bound), bool(passed)))

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'} {self.name}: {c.name} = {c.value:.6g} (bound {c.bound:.6g})"
                for c in self.checks]


def verify_theorem_1_1(sys: System, plan: SamplingPlan, eps_grid, n_window, mistake: MistakeFunction | None = None,
                       tolerance: float = 0.1, slope_range: tuple | None = None) -> Report:
    """FK, Bowen, mean and mistake-ball mdim slopes should coincide."""
    est = mdim_estimates(KINDS, sys, plan, eps_grid, n_window, mistake)
    rep = Report("thm11", tables={"mdim": est})
    kinds = list(KINDS)
    for i, a in enumerate(kinds):
        for b in kinds[i + 1:]:
            diff = abs(est[a].slope - est[b].slope)
            rep.add(f"|slope_{a} - slope_{b}|", diff, tolerance, diff <= tolerance)
    if slope_range is not None:
        lo, hi = slope_range
        common = float(np.mean([e.slope for e in est.values()]))
        rep.add("common slope >= low", common, lo, common >= lo)
        rep.add("common slope <= high", common, hi, common <= hi)
    return rep


def verify_theorem_1_2(sys: System, measures: Sequence[MeasureSampler], delta: float, plan: SamplingPlan,
                       eps_grid, n_window, tolerance: float = 0.1) -> Report:
    """sup over measures of the Katok slope against the FK mdim slope."""
    eps_grid = _check_eps_grid(eps_grid, 2)
    fk = mdim_estimate("fk", sys, plan, eps_grid, n_window)
    rep = Report("thm12", tables={"mdim": {"fk": fk}, "katok": {}})
    worst_cell = 0
    best = -math.inf
    for m in measures:
        k = katok_entropy_estimate(sys, m, delta, eps_grid, n_window, plan)
        rep.tables["katok"][m.name] = k
        for _eps, _n, part, full in k.cells():
            worst_cell = max(worst_cell, part - full)
        best = max(best, k.slope)
    rep.add("max cell (partial - full count)", worst_cell, 0, worst_cell <= 0)
    rep.add("sup_mu Katok slope - FK mdim slope", best - fk.slope, tolerance, best <= fk.slope + tolerance)
    rep.tables["summary"] = {"katok_slope": best, "fk_slope": fk.slope}
    return rep


def verify_theorem_1_3(sys: System, probes: Sequence, eps_grid, radii, plan: SamplingPlan, n_window,
                       gap_tolerance: float | None = 0.15, partition_pieces: int = 3,
                       partition_size: int = 18, partition_n: int = 6) -> Report:
    """sup over probes of the FK local entropy against the global FK rate."""
    eps_grid = _check_eps_grid(eps_grid)
    ns = plan.n_values(n_window)
    universe, candidates = universe_and_candidates(sys, plan)
    table = count_table(sys, ["fk"], universe, candidates, ns, eps_grid, None, plan.cover, plan.exact_cap)
    global_curve = _curve("fk", table, eps_grid, ns, n_window)
    per_probe = [_local_rows(sys, x, eps_grid, radii, n_window, plan, i, global_curve) for i, x in enumerate(probes)]
    rep = Report("thm13", tables={"global": global_curve, "local": per_probe})
    sups = []
    for row in global_curve.rows:
        local_infs = [min(r.rate for _, r in rows[row.eps]) for rows in per_probe]
        sup = max(local_infs)
        sups.append(sup)
        rep.add(f"sup_x local - global at eps={row.eps:.6g}", sup - row.rate, 0.0, sup <= row.rate)
    if gap_tolerance is not None:
        gap = global_curve.rows[-1].rate - sups[-1]
        rep.add("global - sup local at smallest eps", gap, gap_tolerance, gap <= gap_tolerance)
    rep.tables["sup_local"] = sups
    # finite-n union bound on a partition of a small sample
    size = min(partition_size, len(universe))
    small = universe[:size]
    pieces = [small[i::partition_pieces] for i in range(partition_pieces)]
    violations = 0
    for eps in eps_grid:
        counts, total = prop32_sandwich(sys, "fk", pieces, small, partition_n, eps)
        if not max(counts) <= total <= sum(counts):
            violations += 1
    rep.add("partition sandwich violations", violations, 0, violations == 0)
    return rep
