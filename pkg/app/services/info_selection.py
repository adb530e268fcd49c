from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import List, Sequence

import numpy as np

from app.models.errors import ConfigurationError, InsufficientBalancedBits
from app.models.protocol import balance_h


@dataclass(frozen=True)
class InfoSelection:
    """Step 7' choice; all indices are 1-based positions in v"""
    e_indices: List[int]
    x: List[int]
    y: List[int]
    q: List[int]


def info_weight_window(n: int, epsilon: float) -> range:
    """Hamming weights allowed in I_{n,eps}: | w/n - 1/2 | <= eps/2"""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError(f"epsilon must lie in [0, 1], got {epsilon}")
    h = balance_h(n, epsilon)
    return range(n - h, h + 1)


def in_info_set(y: Sequence[int], epsilon: float) -> bool:
    return sum(y) in info_weight_window(len(y), epsilon)


def sample_info_string(n: int, epsilon: float, rng: np.random.Generator) -> List[int]:
    """Uniform draw from I_{n,eps}: weight w with probability C(n,w)/|I|, then a uniform string of weight w"""
    weights = list(info_weight_window(n, epsilon))
    counts = [comb(n, w) for w in weights]
    total = sum(counts)
    probs = np.array([float(Fraction(c, total)) for c in counts])
    w = int(rng.choice(weights, p=probs / probs.sum()))
    y = np.zeros(n, dtype=int)
    y[rng.choice(n, size=w, replace=False)] = 1
    return [int(b) for b in y]


def balanced_indices(v: Sequence[int], h: int) -> List[int]:
    """Positions (1-based) of the first h zeros and the first h ones of v, ascending"""
    zeros = [i + 1 for i, b in enumerate(v) if b == 0][:h]
    ones = [i + 1 for i, b in enumerate(v) if b == 1][:h]
    if len(zeros) < h or len(ones) < h:
        raise InsufficientBalancedBits(
            f"v holds {len(zeros)} zeros and {len(ones)} ones, need {h} of each"
        )
    return sorted(zeros + ones)


def select_info_step7prime(v: Sequence[int], n: int, epsilon: float,
                           rng: np.random.Generator) -> InfoSelection:
    """Pick the balanced substring x, draw y from I_{n,eps} and a uniform q with x_q = y"""
    h = balance_h(n, epsilon)
    e_indices = balanced_indices(v, h)
    y = sample_info_string(n, epsilon, rng)

    pools = {
        0: [int(i) for i in rng.permutation([i for i in e_indices if v[i - 1] == 0])],
        1: [int(i) for i in rng.permutation([i for i in e_indices if v[i - 1] == 1])],
    }
    q = [pools[bit].pop() for bit in y]
    return InfoSelection(
        e_indices=e_indices,
        x=[int(v[i - 1]) for i in e_indices],
        y=y,
        q=q,
    )
