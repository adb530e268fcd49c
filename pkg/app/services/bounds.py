import math
from fractions import Fraction
from math import comb, factorial, perm
from typing import Dict, Sequence, Tuple

import numpy as np

from app.models.errors import DomainError
from app.services.information import binomial_entropy
from app.services.info_selection import info_weight_window

_INTEGER_SLACK = 1e-9


def leak_bound(k: float) -> float:
    """1/2 lg(1 + 1/(k - 2)), the leading term of Eve's information on the INFO string"""
    if k <= 2:
        raise DomainError(f"leak bound needs k > 2, got k={k}")
    return 0.5 * math.log2(1.0 + 1.0 / (k - 2.0))


def leak_for_measured(n: int, measured: int) -> float:
    """I(W; X) when W is the weight of `measured` uniform bits of which X is n"""
    if n < 0 or measured < n:
        raise DomainError(f"need 0 <= n <= measured, got n={n}, measured={measured}")
    return binomial_entropy(measured, 0.5) - binomial_entropy(measured - n, 0.5)


def leak_exact(n: int, k: float) -> float:
    """H(Bin(kn - n, 1/2)) - H(Bin(kn - 2n, 1/2))"""
    kn = k * n
    if abs(kn - round(kn)) > _INTEGER_SLACK:
        raise DomainError(f"k*n must be an integer, got k={k}, n={n}")
    kn = int(round(kn))
    if n < 1 or kn - 2 * n < 0:
        raise DomainError(f"need n >= 1 and kn - 2n >= 0, got n={n}, k={k}")
    return leak_for_measured(n, kn - n)


def expected_leak(n: int, measured_counts: Sequence[int]) -> float:
    """leak averaged over an empirical distribution of Bob's measured-bit count"""
    usable = [m for m in measured_counts if m >= n]
    if not usable:
        raise DomainError(f"no measured count reaches n={n}")
    values, counts = np.unique(usable, return_counts=True)
    weights = counts / counts.sum()
    return float(sum(w * leak_for_measured(n, int(m)) for m, w in zip(values, weights)))


def info_set_size(n: int, epsilon: float) -> int:
    """|I_{n,eps}| as an exact integer"""
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    return sum(comb(n, w) for w in info_weight_window(n, epsilon))


def info_set_entropy(n: int, epsilon: float) -> float:
    return math.log2(info_set_size(n, epsilon))


def entropy_gap(n: int, epsilon: float) -> float:
    return n - info_set_entropy(n, epsilon)


def entropy_gap_threshold(epsilon: float) -> float:
    """Smallest n (exclusive) for which the exponential gap bound holds"""
    if epsilon <= 0:
        raise DomainError(f"gap bound needs epsilon > 0, got {epsilon}")
    return math.log(16.0) / epsilon ** 2


def entropy_gap_bound(n: int, epsilon: float) -> float:
    """(3 / ln 2) exp(-eps^2 n / 2), valid for n > ln(16) / eps^2"""
    threshold = entropy_gap_threshold(epsilon)
    if not n > threshold:
        raise DomainError(f"gap bound needs n > ln(16)/eps^2 = {threshold:.4f}, got n={n}")
    return 3.0 / math.log(2.0) * math.exp(-epsilon ** 2 * n / 2.0)


def entropy_eps0_asymptote(n: int) -> float:
    """n - 0.5 lg n - 0.5 (lg pi - 1)"""
    if n < 2 or n % 2:
        raise DomainError(f"asymptote needs an even n >= 2, got {n}")
    return n - 0.5 * math.log2(n) - 0.5 * (math.log2(math.pi) - 1.0)


def abort_constants(delta: float, delta_prime: float, epsilon: float) -> Tuple[float, float]:
    if not (0.0 <= epsilon < delta_prime < delta and epsilon <= 1.0):
        raise DomainError(
            f"need 0 <= epsilon < delta' < delta and epsilon <= 1, "
            f"got epsilon={epsilon}, delta'={delta_prime}, delta={delta}"
        )
    k1 = ((delta_prime - delta) / (1.0 + delta)) ** 2 / 8.0
    k2 = 0.5 * ((2.0 * delta_prime - epsilon) / (1.0 + 2.0 * delta_prime)) ** 2
    return k1, k2


def abort_bound(n: int, delta: float, delta_prime: float, epsilon: float) -> float:
    """e^{-k1 n} + 2e^{-k2 n} - 2e^{-(k1+k2) n}"""
    k1, k2 = abort_constants(delta, delta_prime, epsilon)
    return math.exp(-k1 * n) + 2.0 * math.exp(-k2 * n) - 2.0 * math.exp(-(k1 + k2) * n)


def hoeffding(kappa: float, n: int, two_sided: bool = False) -> float:
    if kappa < 0 or n < 1:
        raise DomainError(f"need kappa >= 0 and n >= 1, got kappa={kappa}, n={n}")
    one_sided = math.exp(-2.0 * kappa ** 2 * n)
    return min(1.0, 2.0 * one_sided) if two_sided else one_sided


def hoeffding_monte_carlo(kappa: float, n: int, trials: int, two_sided: bool,
                          rng: np.random.Generator) -> float:
    """Fraction of Bernoulli(1/2) sample means deviating by at least kappa"""
    deviation = rng.binomial(n, 0.5, size=trials) / n - 0.5
    if two_sided:
        deviation = np.abs(deviation)
    return float(np.mean(deviation >= kappa - _INTEGER_SLACK))


def perm_count(e_size: int, k: int) -> int:
    """|P(E, k)| = |E|! / (|E| - k)!"""
    if not 0 <= k <= e_size:
        raise DomainError(f"need 0 <= k <= |E|, got |E|={e_size}, k={k}")
    return perm(e_size, k)


def _check_q_range(h: int, n: int, wy: int) -> None:
    if not (0 <= wy <= n and h - n + wy >= 0 and h - wy >= 0):
        raise DomainError(f"need h - n + |y| >= 0 and h - |y| >= 0, got h={h}, n={n}, |y|={wy}")


def q_count(h: int, n: int, wy: int) -> int:
    """|Q(x, y)| = h!^2 / ((h - n + |y|)! (h - |y|)!)"""
    _check_q_range(h, n, wy)
    return factorial(h) ** 2 // (factorial(h - n + wy) * factorial(h - wy))


def x_count(h: int, n: int, wy: int) -> int:
    """Number of balanced x with x_q = y for a fixed q: C(2h - n, h - |y|)"""
    _check_q_range(h, n, wy)
    return comb(2 * h - n, h - wy)


def x_given_y_probability(h: int) -> Fraction:
    """p(x | y, r) = h!^2 / (2h)!"""
    return Fraction(factorial(h) ** 2, factorial(2 * h))


def q_given_y_probability(h: int, n: int) -> Fraction:
    """p(q | y, r) = (2h - n)! / (2h)!"""
    if not 0 <= n <= 2 * h:
        raise DomainError(f"need 0 <= n <= 2h, got h={h}, n={n}")
    return Fraction(factorial(2 * h - n), factorial(2 * h))


def closed_forms(n: int, epsilon: float, delta: float, delta_prime: float, k: float) -> Dict[str, object]:
    """Every closed form at one parameter point; out-of-domain entries hold the error text"""
    entries = {
        'leak_bound': lambda: leak_bound(k),
        'leak_exact': lambda: leak_exact(n, k),
        'info_set_size': lambda: info_set_size(n, epsilon),
        'info_set_entropy': lambda: info_set_entropy(n, epsilon),
        'entropy_gap': lambda: entropy_gap(n, epsilon),
        'entropy_gap_bound': lambda: entropy_gap_bound(n, epsilon),
        'entropy_eps0_asymptote': lambda: entropy_eps0_asymptote(n),
        'abort_bound': lambda: abort_bound(n, delta, delta_prime, epsilon),
    }
    values: Dict[str, object] = {}
    for name, compute in entries.items():
        try:
            values[name] = compute()
        except DomainError as e:
            values[name] = f"undefined: {str(e)}"
    return values
