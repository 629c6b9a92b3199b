import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fkdim.orbit_metrics import (
    DistanceMatrix,
    MistakeFunction,
    bowen_distance,
    distance_matrix,
    fk_distance,
    fk_distance_bisect,
    kind_distance,
    max_match_size,
    mean_distance,
    mistake_ball_contains,
    mistake_radius,
    orbit_distance_matrix,
    pairwise_distances,
)
from fkdim.systems import (
    CubeShift,
    DoublingMap,
    FullShiftFinite,
    SampleParams,
    Scalar,
    SymbolicPeriodic,
    TentMap,
    orbit,
    sample_points,
)
from fkdim.verification import brute_force_match_size


def line_matrix(a, b):
    return DistanceMatrix(np.abs(np.subtract.outer(np.asarray(a, float), np.asarray(b, float))))


def fbar_brute(D, delta):
    """Match size by enumerating every order-preserving partial bijection."""
    n = D.n
    A = D.entries < delta
    best = 0
    for k in range(n, 0, -1):
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.combinations(range(n), k):
                if all(A[r, c] for r, c in zip(rows, cols)):
                    return k
    return best


square = st.integers(1, 6).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.9, 1.0, 1.5])))


# --- distance matrices -----------------------------------------------------


def test_distance_matrix_examples():
    seg = orbit(DoublingMap(), Scalar(0.1), 4)
    D = distance_matrix(DoublingMap(), seg, seg)
    assert np.all(D.diagonal() == 0)
    a = orbit(DoublingMap(), Scalar(0.1), 2)
    b = orbit(DoublingMap(), Scalar(0.3), 2)
    # circle distances between (0.1, 0.2) and (0.3, 0.6)
    np.testing.assert_allclose(distance_matrix(DoublingMap(), a, b).entries, [[0.2, 0.5], [0.1, 0.4]])
    one = distance_matrix(DoublingMap(), orbit(DoublingMap(), Scalar(0.1), 1), orbit(DoublingMap(), Scalar(0.4), 1))
    np.testing.assert_allclose(one.entries, [[0.3]])


def test_distance_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        DistanceMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        distance_matrix(DoublingMap(), orbit(DoublingMap(), Scalar(0.1), 2), orbit(DoublingMap(), Scalar(0.1), 3))


@pytest.mark.parametrize("sys", [FullShiftFinite(2), CubeShift(2), DoublingMap(), TentMap()],
                         ids=lambda s: s.describe())
def test_batch_matrix_agrees_with_pointwise(sys):
    pts = sample_points(sys, 6, 3, SampleParams(period=5)).points
    for x, y in zip(pts, pts[1:]):
        a, b = orbit(sys, x, 7), orbit(sys, y, 7)
        np.testing.assert_allclose(orbit_distance_matrix(sys, x, y, 7).entries, distance_matrix(sys, a, b).entries,
                                   rtol=1e-12, atol=1e-15)


# --- matching --------------------------------------------------------------


def test_match_examples():
    D = line_matrix([0, 1, 2], [1, 2, 3])
    out = max_match_size(D, 1.5, witness=True)
    assert out.size == 3 and out.fbar == 0.0
    assert out.witness == ((0, 0), (1, 1), (2, 2))
    assert max_match_size(DistanceMatrix(np.full((3, 3), 2.0)), 1.0).fbar == 1.0
    same = line_matrix([0, 5, 9], [0, 5, 9])
    assert max_match_size(same, 1e-9).size == 3


def test_match_uses_strict_threshold():
    D = DistanceMatrix(np.array([[0.5]]))
    assert max_match_size(D, 0.5).size == 0
    assert max_match_size(D, np.nextafter(0.5, 1)).size == 1


def test_match_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        max_match_size(DistanceMatrix(np.zeros((1, 1))), 0.0)


@given(square, st.sampled_from([0.05, 0.2, 0.3, 0.6, 1.0, 1.2, 2.0]))
def test_match_size_equals_subset_enumeration(E, delta):
    D = DistanceMatrix(E)
    assert max_match_size(D, delta).size == fbar_brute(D, delta) == brute_force_match_size(E < delta)


@given(square, st.sampled_from([0.05, 0.2, 0.3, 0.6, 1.0, 1.2]))
def test_witness_is_a_valid_maximum_match(E, delta):
    D = DistanceMatrix(E)
    out = max_match_size(D, delta, witness=True)
    assert len(out.witness) == out.size
    rows = [i for i, _ in out.witness]
    cols = [j for _, j in out.witness]
    assert rows == sorted(set(rows)) and cols == sorted(set(cols))
    assert all(E[i, j] < delta for i, j in out.witness)


@given(square)
def test_fbar_is_nonincreasing_in_delta(E):
    D = DistanceMatrix(E)
    sizes = [max_match_size(D, d).size for d in (0.01, 0.1, 0.3, 0.7, 1.1, 2.0)]
    assert sizes == sorted(sizes)


def test_wide_matrices_use_same_answer_as_dp():
    rng = np.random.default_rng(4)
    for n in (63, 64, 65, 90):
        E = rng.integers(0, 4, size=(n, n)) / 4.0
        D = DistanceMatrix(E)
        dp = brute_force_match_size(E < 0.5) if n <= 64 else None
        got = max_match_size(D, 0.5).size
        if dp is not None:
            assert got == dp
        # a transpose has the same longest common subsequence
        assert got == max_match_size(D.T, 0.5).size


# --- FK distance -----------------------------------------------------------


def test_fk_examples():
    assert fk_distance(line_matrix([1, 2, 3], [1, 2, 3])) == 0.0
    assert fk_distance(DistanceMatrix(np.array([[0.37]]))) == pytest.approx(0.37)
    assert fk_distance(DistanceMatrix(np.array([[4.0]]))) == 1.0
    assert fk_distance(line_matrix([0, 10, 20, 30], [10, 20, 30, 40])) == pytest.approx(0.25)
    assert bowen_distance(line_matrix([0, 10, 20, 30], [10, 20, 30, 40])) == 10.0


@given(square)
def test_fk_matches_bisection(E):
    D = DistanceMatrix(E)
    assert abs(fk_distance(D) - fk_distance_bisect(D, 1e-11)) <= 1e-9


@given(square)
def test_fk_symmetric_and_dominated(E):
    D = DistanceMatrix(E)
    f = fk_distance(D)
    assert f == fk_distance(D.T)
    assert 0.0 <= f <= min(bowen_distance(D), 1.0)


@given(square)
def test_fk_is_the_infimum(E):
    D = DistanceMatrix(E)
    f = fk_distance(D)
    above = f + 1e-9
    assert max_match_size(D, above).fbar < above
    if f > 1e-9:
        below = f - 1e-9
        assert not max_match_size(D, below).fbar < below


# --- Bowen, mean, mistake --------------------------------------------------


def test_diagonal_metrics():
    D = DistanceMatrix(np.diag([0.2, 0.4]))
    assert bowen_distance(D) == pytest.approx(0.4)
    assert mean_distance(D) == pytest.approx(0.3)
    same = DistanceMatrix(np.zeros((3, 3)))
    assert bowen_distance(same) == mean_distance(same) == 0.0


def test_mistake_ball_examples():
    g = MistakeFunction.power(0.5)
    assert g(4) == 2
    g1 = MistakeFunction.power(0.1)
    assert g1(4) == 1
    assert mistake_ball_contains(DistanceMatrix(np.diag([0.0, 0.0, 0.9, 0.0])), 0.5, g1)
    assert not mistake_ball_contains(DistanceMatrix(np.diag([0.0, 0.9, 0.9, 0.0])), 0.5, g1)
    assert mistake_ball_contains(DistanceMatrix(np.zeros((4, 4))), 1e-9, g1)


@given(square, st.sampled_from([0.05, 0.25, 0.5, 0.95, 1.3]))
def test_mistake_radius_agrees_with_membership(E, eps):
    D = DistanceMatrix(E)
    g = MistakeFunction.power(0.5)
    assert (mistake_radius(D, g) < eps) == mistake_ball_contains(D, eps, g)
    if bowen_distance(D) < eps:
        assert mistake_ball_contains(D, eps, g)


def test_mistake_function_invariants():
    for g in (MistakeFunction.power(0.5), MistakeFunction.power(0.1), MistakeFunction.power(0.9),
              MistakeFunction.logarithmic()):
        ns = np.unique(np.geomspace(1, 2 ** 20, 400).astype(int))
        vals = [g(int(n)) for n in ns]
        assert vals == sorted(vals)
        assert all(v < n for v, n in zip(vals, ns))
        assert vals[-1] >= 4 > vals[0]
        assert vals[-1] / 2 ** 20 < 0.7


def test_mistake_power_is_exact_at_perfect_powers():
    g = MistakeFunction.power(0.5)
    assert [g(n) for n in (1, 3, 4, 8, 9, 15, 16, 10 ** 6)] == [0, 1, 2, 2, 3, 3, 4, 1000]
    assert MistakeFunction.logarithmic()(7) == 3


def test_mistake_function_rejects_bad_parameters():
    with pytest.raises(ValueError):
        MistakeFunction.power(1.0)
    with pytest.raises(ValueError):
        MistakeFunction("cubic")
    with pytest.raises(ValueError):
        MistakeFunction()(0)


# --- batch -----------------------------------------------------------------


@pytest.mark.parametrize("sys", [FullShiftFinite(2), CubeShift(1), DoublingMap()], ids=lambda s: s.describe())
def test_pairwise_matches_single_pair(sys):
    pts = list(sample_points(sys, 9, 8, SampleParams(period=4)).points)
    A, B = pts[:4], pts[4:]
    g = MistakeFunction.power(0.5)
    out = pairwise_distances(sys, ("fk", "bowen", "mean", "mistake"), A, B, 9, g)
    for i, x in enumerate(A):
        for j, y in enumerate(B):
            D = orbit_distance_matrix(sys, x, y, 9)
            for kind in ("fk", "bowen", "mean", "mistake"):
                assert out[kind][i, j] == pytest.approx(kind_distance(D, kind, g), rel=1e-12, abs=1e-15)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        kind_distance(DistanceMatrix(np.zeros((1, 1))), "hamming")
    with pytest.raises(ValueError):
        pairwise_distances(DoublingMap(), ["hamming"], [Scalar(0.1)], [Scalar(0.2)], 2)


def test_shift_fk_at_most_bowen():
    sys = FullShiftFinite(2)
    x = SymbolicPeriodic(4, [0, 1, 1, 0])
    y = SymbolicPeriodic(4, [1, 1, 0, 0])
    D = orbit_distance_matrix(sys, x, y, 12)
    assert fk_distance(D) <= min(bowen_distance(D), 1.0)
    # y is a shift of x, so the shifted match leaves one unmatched time
    assert fk_distance(D) == pytest.approx(1 / 12)
