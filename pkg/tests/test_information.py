from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.models.analysis import DOUBLE, RATIONAL, JointDistribution
from app.models.errors import ConfigurationError, DomainError, InsufficientSamplesError
from app.services.bounds import leak_exact
from app.services.information import (
    binomial_entropy_approx,
    binomial_entropy_exact,
    conditional_entropy,
    empirical_mi,
    entropy,
    mutual_information,
    weight_prefix_joint,
)


def test_entropy_of_uniform():
    assert entropy([0.25] * 4) == pytest.approx(2.0)
    assert entropy(JointDistribution.uniform(("A",), [(i,) for i in range(8)])) == pytest.approx(3.0)
    assert entropy([1.0, 0.0]) == 0.0


def test_rational_table_must_sum_to_one():
    with pytest.raises(ConfigurationError):
        JointDistribution(("A",), {(0,): Fraction(1, 3), (1,): Fraction(1, 3)}, RATIONAL)


def test_independent_rational_table_has_exactly_zero_mi():
    a = {0: Fraction(1, 3), 1: Fraction(2, 3)}
    b = {0: Fraction(1, 5), 1: Fraction(1, 5), 2: Fraction(3, 5)}
    table = {(x, y): a[x] * b[y] for x in a for y in b}
    joint = JointDistribution(("A", "B"), table, RATIONAL)
    assert mutual_information(joint, "A", "B") == 0.0


def test_copied_bit_has_one_bit_of_mi():
    joint = JointDistribution.uniform(("A", "B"), [(0, 0), (1, 1)])
    assert mutual_information(joint, "A", "B") == pytest.approx(1.0)
    assert conditional_entropy(joint, "A", "B") == pytest.approx(0.0)


@settings(max_examples=50, deadline=None)
@given(weights=st.lists(st.integers(1, 50), min_size=6, max_size=6))
def test_mi_symmetric_and_nonnegative(weights):
    table = {(i // 3, i % 3): w for i, w in enumerate(weights)}
    joint = JointDistribution.from_weights(("A", "B"), table, DOUBLE)
    ab = mutual_information(joint, "A", "B")
    ba = mutual_information(joint, "B", "A")
    assert ab >= -1e-12
    assert ab == pytest.approx(ba, abs=1e-12)


def test_binomial_entropy_approximation():
    assert abs(binomial_entropy_exact(20, 0.5) - binomial_entropy_approx(20, 0.5)) < 3.4e-4
    with pytest.raises(DomainError):
        binomial_entropy_exact(0, 0.5)
    with pytest.raises(DomainError):
        binomial_entropy_approx(10, 1.0)


def test_weight_prefix_joint_matches_leak():
    joint = weight_prefix_joint(2, 6)
    assert mutual_information(joint, "X", "W") == pytest.approx(leak_exact(2, 4), abs=1e-9)
    assert sorted(joint.arities.items()) == [("W", 7), ("X", 4)]


def test_empirical_mi_independent(rng):
    pairs = list(zip(rng.integers(0, 2, 10000), rng.integers(0, 2, 10000)))
    estimate = empirical_mi(pairs, resamples=100)
    assert estimate.plug_in < 0.01
    assert estimate.ci_low <= estimate.ci_high < 0.01
    assert estimate.samples == 10000


def test_empirical_mi_copied(rng):
    bits = rng.integers(0, 2, 5000)
    estimate = empirical_mi(list(zip(bits, bits)), resamples=100)
    assert estimate.plug_in == pytest.approx(1.0, abs=0.01)


def test_empirical_mi_is_seeded(rng):
    pairs = list(zip(rng.integers(0, 3, 2000), rng.integers(0, 2, 2000)))
    assert empirical_mi(pairs, resamples=50, seed=4) == empirical_mi(pairs, resamples=50, seed=4)


def test_empirical_mi_needs_samples():
    with pytest.raises(InsufficientSamplesError):
        empirical_mi([(0, 0)] * 10)


def test_conditional_values():
    joint = JointDistribution.uniform(("A", "B"), [(0, 0), (0, 1), (1, 1)])
    assert joint.conditional_values("A", "B")[0] == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    assert joint.conditional_values("A", "B")[1] == {1: Fraction(1)}
    assert np.isclose(float(joint.marginal("B").table[(1,)]), 2 / 3)


def test_joint_from_samples():
    joint = JointDistribution.from_samples(("A", "B"), [(0, 0), (1, 1)] * 50)
    assert joint.mode == DOUBLE
    assert mutual_information(joint, "A", "B") == pytest.approx(1.0)
