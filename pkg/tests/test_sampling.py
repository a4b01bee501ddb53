from fractions import Fraction
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriml.protocol.sampling import (
    Challenge,
    all_genuine_probability,
    client_sample_challenges,
    detection_probability,
    genuine_count,
    relaxed_soundness_bound,
    required_challenges,
    storage_cost,
)


@given(st.integers(1, 300), st.fractions(0, 1), st.data())
def test_all_genuine_matches_binomial_ratio(N, t, data):
    c = data.draw(st.integers(0, N))
    g = genuine_count(N, t)
    assert all_genuine_probability(N, t, c) == Fraction(comb(g, c), comb(N, c))


def test_required_challenges_exact_minimum():
    for conf, want in (("0.99", 13), ("0.95", 9)):
        c = required_challenges(100_000, Fraction("0.7"), Fraction(conf))
        assert c == want
        assert detection_probability(100_000, Fraction("0.7"), c) >= Fraction(conf)
        assert detection_probability(100_000, Fraction("0.7"), c - 1) < Fraction(conf)


@given(st.integers(10, 2000), st.fractions(0, Fraction(99, 100)), st.fractions(0, Fraction(99, 100)))
def test_required_challenges_is_minimal(N, t, conf):
    c = required_challenges(N, t, conf)
    assert detection_probability(N, t, c) >= conf
    assert c == 0 or detection_probability(N, t, c - 1) < conf


def test_edge_cases():
    with pytest.raises(ValueError):
        required_challenges(10, 1, "0.5")
    with pytest.raises(ValueError):
        genuine_count(10, Fraction(3, 2))
    with pytest.raises(ValueError):
        all_genuine_probability(5, "0.5", 6)
    assert relaxed_soundness_bound("0.5", 1) == 1


def test_storage_cost():
    assert storage_cost(32, 13, 10_000, 50) == 83_200
    with pytest.raises(ValueError):
        storage_cost(32, 13, 10, 0)


@given(st.integers(1, 500), st.integers(0, 2**64))
def test_challenge_sampling(N, seed):
    c = 1 + seed % N
    ch = client_sample_challenges(N, c, seed)
    assert len(ch.indices) == c == len(set(ch.indices))
    assert list(ch.indices) == sorted(ch.indices)
    assert all(1 <= i <= N for i in ch.indices)
    assert Challenge.from_json(ch.to_json()) == ch


def test_challenge_json_rejects_duplicates():
    with pytest.raises(ValueError):
        Challenge.from_json({"indices": [3, 3]})
