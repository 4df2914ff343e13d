import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_eta, exact_tail
from regenplan.errors import InvalidArgument, NoSolution
from regenplan.reliability import (
    AvailabilityModel,
    RetrieveTarget,
    blocks_required,
    replicas_required,
    retrieve_probability,
)


def test_known_block_count():
    assert blocks_required(20, 0.75, 0.999999) == 47


@pytest.mark.parametrize("k,a,p", [(5, 0.5, 0.999), (10, 0.75, 0.99), (3, 0.9, 0.999999), (7, 0.3, 0.95)])
def test_blocks_required_matches_linear_scan(k, a, p):
    assert blocks_required(k, a, p) == brute_eta(k, a, p)


def test_retrieve_probability_small_cases():
    assert retrieve_probability(1, 1, 0.3) == pytest.approx(0.3)
    assert retrieve_probability(2, 1, 0.5) == pytest.approx(0.75)
    assert retrieve_probability(3, 3, 0.5) == pytest.approx(0.125)


def test_retrieve_probability_extremes():
    assert retrieve_probability(10, 4, 1.0) == 1.0
    assert retrieve_probability(10, 4, 0.0) == 0.0


def test_tiny_complement_keeps_precision():
    # 1 - 0.5**200 rounds to 1; the complement side must still be exact.
    q = retrieve_probability(200, 1, 0.5)
    assert q == 1.0
    assert blocks_required(1, 0.5, 1 - 1e-15) == 50


def test_full_availability_needs_only_k():
    assert blocks_required(13, 1.0, 0.999999) == 13


def test_zero_availability_has_no_solution():
    with pytest.raises(NoSolution):
        blocks_required(3, 0.0, 0.9)


def test_ceiling_exceeded():
    with pytest.raises(NoSolution):
        blocks_required(1, 1e-3, 0.999999)
    with pytest.raises(NoSolution):
        blocks_required(20, 0.75, 0.999999, ceiling=46)
    assert blocks_required(20, 0.75, 0.999999, ceiling=47) == 47


@pytest.mark.parametrize("args", [(0, 0.5, 0.9), (3, 1.5, 0.9), (3, 0.5, 1.0), (3, 0.5, 0.0)])
def test_invalid_arguments(args):
    with pytest.raises(InvalidArgument):
        blocks_required(*args)


def test_retrieve_probability_rejects_bad_k():
    with pytest.raises(InvalidArgument):
        retrieve_probability(3, 4, 0.5)


def test_exact_boundary_target():
    # 1 - 0.1**2 is met exactly by two replicas at a=0.9.
    assert replicas_required(0.9, 0.99) == 2


@pytest.mark.parametrize("a", [0.5, 0.75, 0.9, 0.99])
@pytest.mark.parametrize("p", [0.9, 0.99, 0.999999])
def test_replicas_closed_form(a, p):
    expected = math.ceil(math.log(1 - p) / math.log(1 - a) - 1e-9)
    assert replicas_required(a, p) == max(1, expected)


def test_availability_model():
    m = AvailabilityModel.from_base_time(24.0, 0.75)
    assert m.mean_online == 18.0
    assert m.mean_offline == 6.0
    assert m.availability == 0.75
    with pytest.raises(InvalidArgument):
        AvailabilityModel(0.0, 1.0)


def test_retrieve_target_validation():
    RetrieveTarget(0.999, 0.99)
    with pytest.raises(InvalidArgument):
        RetrieveTarget(0.99, 0.999)
    with pytest.raises(InvalidArgument):
        RetrieveTarget(1.0)


@settings(max_examples=150, deadline=None)
@given(
    n=st.integers(1, 40),
    data=st.data(),
    a=st.floats(0.01, 0.99),
)
def test_probability_against_exact_sum(n, data, a):
    k = data.draw(st.integers(1, n))
    exact = float(exact_tail(n, k, Fraction(a)))
    assert retrieve_probability(n, k, a) == pytest.approx(exact, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(k=st.integers(1, 40), a=st.floats(0.3, 0.99), p=st.sampled_from([0.9, 0.99, 0.999, 0.999999]))
def test_eta_is_minimal(k, a, p):
    n = blocks_required(k, a, p)
    assert n >= k
    assert retrieve_probability(n, k, a) >= p - 1e-12
    if n > k:
        assert retrieve_probability(n - 1, k, a) < p


@settings(max_examples=100, deadline=None)
@given(k=st.integers(1, 30), a=st.floats(0.3, 0.95), p=st.sampled_from([0.9, 0.99, 0.999]))
def test_eta_monotone(k, a, p):
    n = blocks_required(k, a, p)
    assert blocks_required(k + 1, a, p) >= n
    assert blocks_required(k, min(0.99, a + 0.04), p) <= n
    assert blocks_required(k, a, 1 - (1 - p) / 10) >= n
