import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fkdim.systems import FullShiftFinite, TentMap
from fkdim.verification import (
    brute_force_match_size,
    cover_oracle_suite,
    metric_suite,
    oracle_suite,
    prop32_suite,
)


def test_brute_force_examples():
    assert brute_force_match_size(np.eye(4, dtype=bool)) == 4
    assert brute_force_match_size(np.zeros((3, 3), bool)) == 0
    # anti-diagonal admits only one order-preserving pair
    assert brute_force_match_size(np.eye(4, dtype=bool)[::-1]) == 1


@given(st.integers(1, 5).flatmap(lambda n: arrays(bool, (n, n))))
def test_brute_force_is_symmetric_under_transpose(A):
    assert brute_force_match_size(A) == brute_force_match_size(A.T)


def test_oracle_suite_small():
    rep = oracle_suite(count=60, seed=3)
    assert rep.passed, rep.lines()


def test_metric_suite_small():
    rep = metric_suite([FullShiftFinite(2), TentMap()], count=40, n=8, seed=1)
    assert rep.passed, rep.lines()
    assert len(rep.checks) == 6


def test_cover_and_prop32_suites_small():
    assert cover_oracle_suite(count=30, seed=2).passed
    assert prop32_suite(count=8, seed=2).passed


def test_report_lines_format():
    rep = oracle_suite(count=5, seed=0)
    assert all(line.startswith(("PASS oracles:", "FAIL oracles:")) for line in rep.lines())
