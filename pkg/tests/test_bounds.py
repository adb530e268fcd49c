import math
from fractions import Fraction
from math import comb

import pytest

from app.models.errors import DomainError
from app.services import bounds


class TestLeakage:
    def test_leak_bound_at_four(self):
        assert bounds.leak_bound(4) == pytest.approx(0.292481, abs=1e-6)
        with pytest.raises(DomainError):
            bounds.leak_bound(2)

    def test_leak_exact_small_n(self):
        assert bounds.leak_exact(1, 4) == pytest.approx(0.3113, abs=1e-4)

    def test_leak_exact_approaches_bound(self):
        assert abs(bounds.leak_exact(1000, 4) - bounds.leak_bound(4)) < 1e-3

    def test_leak_exact_needs_integer_kn(self):
        with pytest.raises(DomainError):
            bounds.leak_exact(1, 4.5)
        with pytest.raises(DomainError):
            bounds.leak_exact(2, 1)

    def test_expected_leak_ignores_short_rounds(self):
        assert bounds.expected_leak(2, [6, 6]) == pytest.approx(bounds.leak_for_measured(2, 6))
        assert bounds.expected_leak(2, [1, 6]) == pytest.approx(bounds.leak_for_measured(2, 6))
        mixed = bounds.expected_leak(2, [4, 6])
        assert mixed == pytest.approx(0.5 * (bounds.leak_for_measured(2, 4) + bounds.leak_for_measured(2, 6)))
        with pytest.raises(DomainError):
            bounds.expected_leak(3, [1, 2])


class TestEntropy:
    def test_info_set_sizes(self):
        assert bounds.info_set_size(4, 0.0) == 6
        assert bounds.info_set_size(4, 0.5) == 14
        assert bounds.info_set_size(4, 1.0) == 16
        assert bounds.info_set_size(40, 0.5) == sum(comb(40, w) for w in range(10, 31))

    def test_gap_bound_at_forty(self):
        bound = bounds.entropy_gap_bound(40, 0.5)
        assert bound == pytest.approx(0.02917, abs=1e-5)
        assert bounds.entropy_gap(40, 0.5) <= bound

    def test_gap_bound_threshold(self):
        assert bounds.entropy_gap_threshold(0.5) == pytest.approx(math.log(16) / 0.25)
        with pytest.raises(DomainError):
            bounds.entropy_gap_bound(11, 0.5)
        with pytest.raises(DomainError):
            bounds.entropy_gap_threshold(0.0)

    @pytest.mark.parametrize("epsilon", [0.5, 1.0])
    def test_gap_stays_below_bound(self, epsilon):
        start = math.floor(bounds.entropy_gap_threshold(epsilon)) + 1
        for n in range(start, 80):
            assert 0.0 <= bounds.entropy_gap(n, epsilon) <= bounds.entropy_gap_bound(n, epsilon)

    def test_asymptote(self):
        assert bounds.entropy_eps0_asymptote(1024) == pytest.approx(math.log2(comb(1024, 512)), abs=0.01)
        with pytest.raises(DomainError):
            bounds.entropy_eps0_asymptote(5)


class TestAbortAndHoeffding:
    def test_abort_constants(self):
        k1, k2 = bounds.abort_constants(0.5, 0.3, 0.1)
        assert k1 == pytest.approx(0.002222, abs=1e-6)
        assert k2 == pytest.approx(0.048828, abs=1e-6)

    def test_abort_constants_ordering(self):
        with pytest.raises(DomainError):
            bounds.abort_constants(0.5, 0.3, 0.3)
        with pytest.raises(DomainError):
            bounds.abort_constants(0.3, 0.5, 0.1)

    def test_abort_bound_decays(self):
        values = [bounds.abort_bound(n, 0.5, 0.3, 0.1) for n in (16, 256, 4096)]
        assert values[0] > values[1] > values[2]
        assert values[2] < 1e-3

    def test_hoeffding(self):
        assert bounds.hoeffding(0.0, 10) == 1.0
        assert bounds.hoeffding(0.5, 8) == pytest.approx(0.0183, abs=1e-4)
        assert bounds.hoeffding(0.0, 10, two_sided=True) == 1.0
        with pytest.raises(DomainError):
            bounds.hoeffding(-0.1, 10)


class TestCombinatorics:
    def test_counts(self):
        assert bounds.perm_count(4, 2) == 12
        assert bounds.q_count(2, 2, 1) == 4
        assert bounds.x_count(2, 2, 1) == 2
        with pytest.raises(DomainError):
            bounds.q_count(2, 4, 1)

    def test_conditional_probabilities(self):
        assert bounds.q_given_y_probability(2, 2) == Fraction(1, 12)
        assert bounds.q_given_y_probability(3, 4) == Fraction(1, 360)
        assert bounds.x_given_y_probability(2) == Fraction(1, 6)


def test_closed_forms_mark_undefined_entries():
    values = bounds.closed_forms(11, 0.5, 0.5, 0.3, 4.0)
    assert values['entropy_gap_bound'].startswith("undefined")
    assert values['entropy_eps0_asymptote'].startswith("undefined")
    assert values['leak_bound'] == pytest.approx(bounds.leak_bound(4))
    # epsilon above delta' leaves the abort bound outside its domain
    assert values['abort_bound'].startswith("undefined")


def test_closed_forms_inside_abort_domain():
    values = bounds.closed_forms(40, 0.1, 0.5, 0.3, 4.0)
    assert isinstance(values['abort_bound'], float)
    assert values['abort_bound'] == pytest.approx(bounds.abort_bound(40, 0.5, 0.3, 0.1))
    assert isinstance(values['entropy_eps0_asymptote'], float)
