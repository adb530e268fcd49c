from collections import Counter
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from app.models.errors import ConfigurationError, InsufficientBalancedBits
from app.services.info_selection import (
    balanced_indices,
    in_info_set,
    info_weight_window,
    sample_info_string,
    select_info_step7prime,
)


def test_weight_window():
    assert info_weight_window(4, 0.5) == range(1, 4)
    assert info_weight_window(4, 0.0) == range(2, 3)
    assert info_weight_window(4, 1.0) == range(0, 5)
    with pytest.raises(ConfigurationError):
        info_weight_window(4, 1.5)


def test_membership():
    assert in_info_set([0, 1, 1, 0], 0.0)
    assert not in_info_set([1, 1, 1, 0], 0.0)
    assert in_info_set([1, 1, 1, 0], 0.5)


def test_balanced_indices():
    assert balanced_indices([0, 0, 0, 0, 1, 1], 2) == [1, 2, 5, 6]
    with pytest.raises(InsufficientBalancedBits):
        balanced_indices([0, 0, 0, 0, 0, 1], 2)


def test_sampled_weights_follow_binomial_share(rng):
    draws = Counter(sum(sample_info_string(4, 0.5, rng)) for _ in range(5000))
    observed = [draws[w] for w in (1, 2, 3)]
    expected = [5000 * c / 14 for c in (4, 6, 4)]
    assert set(draws) <= {1, 2, 3}
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_full_window_draws_every_string_uniformly(rng):
    draws = Counter(tuple(sample_info_string(4, 1.0, rng)) for _ in range(3200))
    assert len(draws) == 16
    assert stats.chisquare([draws[s] for s in sorted(draws)]).pvalue > 1e-3


@settings(max_examples=50, deadline=None)
@given(v=st.lists(st.integers(0, 1), min_size=6, max_size=20), seed=st.integers(0, 10 ** 6))
def test_selection_reproduces_info_string(v, seed):
    n, epsilon = 2, 1.0
    if v.count(0) < 2 or v.count(1) < 2:
        with pytest.raises(InsufficientBalancedBits):
            select_info_step7prime(v, n, epsilon, np.random.default_rng(seed))
        return
    selection = select_info_step7prime(v, n, epsilon, np.random.default_rng(seed))
    assert [v[i - 1] for i in selection.q] == selection.y
    assert len(set(selection.q)) == n
    assert set(selection.q) <= set(selection.e_indices)
    assert selection.x.count(0) == selection.x.count(1) == 2


def test_index_tuple_distribution(rng):
    # h = 2, n = 2, v = 0011: y is uniform over all four strings, q uniform among the matching tuples
    v = [0, 0, 1, 1]
    draws = Counter(tuple(select_info_step7prime(v, 2, 1.0, rng).q) for _ in range(6000))
    pairs = list(permutations(range(1, 5), 2))
    expected = [6000 / 8 if v[a - 1] == v[b - 1] else 6000 / 16 for a, b in pairs]
    assert set(draws) <= set(pairs)
    assert stats.chisquare([draws[p] for p in pairs], expected).pvalue > 1e-3
