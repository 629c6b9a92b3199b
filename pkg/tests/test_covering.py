import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fkdim.covering import (
    BallOracle,
    Coverage,
    CoverResult,
    DensityError,
    InfeasibleCoverError,
    base_covering_number,
    cover_from_matrix,
    interval_cover_count,
    lemma31_cover,
    pairwise_coverage,
    partial_cover_number,
    prop32_sandwich,
    required_count,
    separated_number,
    spanning_number,
    tame_growth_diagnostic,
)
from fkdim.orbit_metrics import MistakeFunction, pairwise_distances
from fkdim.systems import (
    CubeShift,
    DoublingMap,
    FullShiftFinite,
    IdentityMap,
    Product,
    SampleParams,
    Scalar,
    TentMap,
    sample_points,
)

INTERVAL = TentMap()


def brute_cover(mask, target=None):
    mask = np.asarray(mask, bool)
    C, U = mask.shape
    target = U if target is None else target
    for k in range(1, C + 1):
        for rows in itertools.combinations(range(C), k):
            if mask[list(rows)].any(axis=0).sum() >= target:
                return k
    raise AssertionError("infeasible")


def scalars(*vals):
    return [Scalar(v) for v in vals]


feasible = st.integers(1, 7).flatmap(lambda c: st.integers(1, 9).flatmap(
    lambda u: arrays(bool, (c, u), elements=st.booleans()))).map(lambda m: np.vstack([m, np.eye(m.shape[1], dtype=bool)]))


# --- spanning --------------------------------------------------------------


def test_spanning_examples():
    pts = scalars(0.1, 0.3, 0.5, 0.7, 0.9)
    wide = BallOracle("base", 1, 2.0, INTERVAL)
    assert spanning_number(pts, pts, wide, "exact").cardinality == 1
    tiny = BallOracle("base", 1, 0.01, INTERVAL)
    assert spanning_number(pts, pts, tiny, "exact").cardinality == 5
    quarter = BallOracle("base", 1, 0.25, INTERVAL)
    res = spanning_number(pts, pts, quarter, "exact")
    assert res.cardinality == 2 == brute_cover(quarter.coverage(pts, pts))
    assert [pts[c].value for c in res.centers] == [0.3, 0.7]


def test_spanning_reports_orphan():
    with pytest.raises(InfeasibleCoverError) as err:
        spanning_number(scalars(0.1, 0.9), scalars(0.1), BallOracle("base", 1, 0.2, INTERVAL))
    assert err.value.orphan == 1
    with pytest.raises(ValueError):
        spanning_number([], scalars(0.1), BallOracle("base", 1, 0.2, INTERVAL))


@given(feasible)
def test_exact_cover_is_optimal_and_greedy_bounded(mask):
    exact = cover_from_matrix(mask, "exact")
    greedy = cover_from_matrix(mask, "greedy")
    assert exact.cardinality == brute_cover(mask)
    assert exact.lower_bound == exact.cardinality
    assert greedy.lower_bound <= exact.cardinality <= greedy.cardinality
    assert greedy.cardinality <= (1 + math.log(mask.shape[1])) * exact.cardinality
    for res in (exact, greedy):
        assert mask[list(res.centers)].any(axis=0).all()


@given(feasible, st.integers(1, 9))
def test_partial_exact_cover_is_optimal(mask, target):
    target = min(target, mask.shape[1])
    exact = cover_from_matrix(mask, "exact", target=target)
    assert exact.cardinality == brute_cover(mask, target)
    assert exact.cardinality <= cover_from_matrix(mask, "exact").cardinality


def test_exact_cap_enforced():
    mask = np.eye(30, dtype=bool)
    with pytest.raises(ValueError):
        cover_from_matrix(mask, "exact", exact_cap=24)
    assert cover_from_matrix(mask, "exact", exact_cap=30).cardinality == 30


def test_cover_result_invariant():
    with pytest.raises(ValueError):
        CoverResult(3, "exact", 2, ())
    with pytest.raises(ValueError):
        CoverResult(3, "lp", 2, ())


# --- separated -------------------------------------------------------------


def test_separated_examples():
    o = BallOracle("base", 1, 0.3, INTERVAL)
    assert separated_number(scalars(0.4), o) == 1
    assert separated_number(scalars(0.4, 0.5), o) == 1
    assert separated_number(scalars(0.4, 0.75), o) == 2


@pytest.mark.parametrize("sys", [FullShiftFinite(2), CubeShift(1), DoublingMap()], ids=lambda s: s.describe())
def test_separated_sandwich(sys):
    pts = list(sample_points(sys, 18, 5, SampleParams(period=4)).points)
    for kind in ("fk", "bowen", "mean"):
        for eps in (0.1, 0.25, 0.5):
            o = BallOracle(kind, 4, eps, sys)
            exact = spanning_number(pts, pts, o, "exact").cardinality
            assert separated_number(pts, o, 2 * eps) <= exact <= separated_number(pts, o, eps)


# --- partial covers --------------------------------------------------------


def test_required_count_examples():
    assert required_count(10, 0.25) == 8
    assert required_count(10, 0.1) == 10
    assert required_count(10, 0.999) == 1
    assert required_count(400, 0.1) == 361


def test_partial_cover_examples():
    pts = list(sample_points(INTERVAL, 10, 2024).points)
    o = BallOracle("base", 1, 0.15, INTERVAL)
    exact = partial_cover_number(pts, pts, o, 0.25, "exact")
    greedy = partial_cover_number(pts, pts, o, 0.25, "greedy")
    assert exact.cardinality == brute_cover(o.coverage(pts, pts), 8) == 2
    assert greedy.cardinality <= (1 + math.log(10)) * exact.cardinality
    assert partial_cover_number(pts, pts, o, 0.999, "exact").cardinality == 1
    assert partial_cover_number(pts, pts, o, 0.05, "exact") == spanning_number(pts, pts, o, "exact")
    with pytest.raises(ValueError):
        partial_cover_number(pts, pts, o, 1.0)


# --- base covering numbers -------------------------------------------------


def test_interval_counts():
    # open balls of radius eps centred in [0,1]: need 2 eps k > 1
    assert interval_cover_count(0.25) == 3
    assert interval_cover_count(0.1) == 6
    assert interval_cover_count(0.3) == 2
    assert interval_cover_count(2 ** -9) == 257
    assert base_covering_number(INTERVAL, 0.1).cardinality == 6
    assert base_covering_number(Product(INTERVAL, INTERVAL, "max"), 0.25).cardinality == 9


def test_interval_count_matches_exhaustive_grid_search():
    # fine grid as a stand-in for [0,1]: no k-1 balls cover it
    grid = np.linspace(0, 1, 401)
    for eps in (0.25, 0.2, 0.15, 0.1):
        k = interval_cover_count(eps)
        centers = (2 * np.arange(k) + 1) / (2 * k)
        assert (np.abs(grid[:, None] - centers[None, :]) < eps).any(axis=1).all()
        assert 2 * eps * (k - 1) <= 1


def test_symbolic_period8_golden():
    sys = FullShiftFinite(2)
    params = SampleParams(mode="grid", period=8)
    pts = sample_points(sys, 256, 0, params).points
    assert len(set(pts)) == 256
    assert base_covering_number(sys, 0.5, density=256, params=params).cardinality == 16


# --- small-diameter covers --------------------------------------------------


def test_net_cover_interval():
    cov = lemma31_cover(INTERVAL, 1.0)
    assert [c.value for c in cov.centers] == pytest.approx([1 / 6, 1 / 2, 5 / 6])
    assert cov.radius == 0.5 and cov.diameter_bound == 1.0 and cov.lebesgue_bound == 0.25
    grid = np.linspace(0, 1, 1001)
    centers = np.array([c.value for c in cov.centers])
    # every point's eps/4 ball sits inside some member of the cover
    assert ((np.abs(grid[:, None] - centers[None, :]) + 0.25) <= cov.radius + 1e-12).any(axis=1).all()


def test_net_cover_sampled():
    sys = FullShiftFinite(2)
    sample = list(sample_points(sys, 300, 1, SampleParams(period=6)).points)
    cov = lemma31_cover(sys, 1.0, sample, probes=sample)
    assert cov.size == len(cov.centers) <= len(sample)
    with pytest.raises(DensityError):
        lemma31_cover(INTERVAL, 0.4, scalars(0.05, 0.95))
    with pytest.raises(ValueError):
        lemma31_cover(sys, 1.0)


# --- tame growth -----------------------------------------------------------


def test_tame_growth_interval():
    grid = [2.0 ** -k for k in range(3, 10)]
    table = tame_growth_diagnostic(INTERVAL, 1.0, grid)
    assert table.decreasing
    eps, count, prod = table.rows[-1]
    assert count == 257
    assert prod == pytest.approx(2 ** -9 * math.log(257))
    eps, count, prod = tame_growth_diagnostic(INTERVAL, 1.0, [0.02, 0.01]).rows[-1]
    assert count == 51 and prod == pytest.approx(0.01 * math.log(51))


def test_tame_growth_finite_space_bounded():
    table = tame_growth_diagnostic(FullShiftFinite(2), 1.0, [0.5, 0.25, 0.125], density=64,
                                   params=SampleParams(mode="grid", period=6))
    for eps, count, prod in table.rows:
        assert prod <= eps * math.log(64) + 1e-12
    with pytest.raises(ValueError):
        tame_growth_diagnostic(INTERVAL, 1.0, [0.1, 0.2])


# --- streaming coverage ----------------------------------------------------


@pytest.mark.parametrize("sys", [FullShiftFinite(2), CubeShift(1), DoublingMap(), IdentityMap()],
                         ids=lambda s: s.describe())
@pytest.mark.parametrize("n", [1, 3, 6])
def test_pairwise_coverage_matches_dense(sys, n):
    pts = list(sample_points(sys, 70, 9, SampleParams(period=5)).points)
    eps_grid = [0.5, 0.3, 0.2, 0.125, 0.05]
    g = MistakeFunction.power(0.5)
    kinds = ("fk", "bowen", "mean", "mistake")
    covs = pairwise_coverage(sys, kinds, pts, pts, n, eps_grid, g, max_bytes=1 << 12)
    dense = pairwise_distances(sys, kinds, pts, pts, n, g)
    for kind in kinds:
        for eps in eps_grid:
            np.testing.assert_array_equal(covs[(kind, eps)].bits, Coverage(dense[kind] < eps).bits)


# --- finite unions ---------------------------------------------------------


@pytest.mark.parametrize("kind", ["fk", "bowen", "mean", "mistake"])
def test_prop32_sandwich(kind):
    sys = CubeShift(1)
    pts = list(sample_points(sys, 16, 3, SampleParams(period=4)).points)
    pieces = [pts[0::3], pts[1::3], pts[2::3]]
    for eps in (0.1, 0.3, 0.6):
        counts, total = prop32_sandwich(sys, kind, pieces, pts, 5, eps)
        assert max(counts) <= total <= sum(counts)
