import math
from typing import Hashable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from app.config import Config
from app.models.analysis import MIEstimate, JointDistribution, Probability
from app.models.errors import DomainError, InsufficientSamplesError
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

Variables = Union[str, Sequence[str]]


def _plogp(p: Probability) -> float:
    return float(p) * math.log2(p) if p > 0 else 0.0


def entropy(dist: Union[JointDistribution, Iterable[Probability]]) -> float:
    """Shannon entropy in bits, with 0 lg 0 = 0"""
    probs = dist.probabilities() if isinstance(dist, JointDistribution) else list(dist)
    return 0.0 - sum(_plogp(p) for p in probs)


def _names(variables: Variables) -> Tuple[str, ...]:
    return (variables,) if isinstance(variables, str) else tuple(variables)


def mutual_information(joint: JointDistribution, var_a: Variables, var_b: Variables) -> float:
    """I(A;B) = sum p(a,b) lg(p(a,b) / p(a)p(b)); exactly 0 for independent rational tables"""
    names_a, names_b = _names(var_a), _names(var_b)
    pa = joint.marginal(names_a).table
    pb = joint.marginal(names_b).table
    pab = joint.marginal(names_a + names_b).table
    k = len(names_a)
    total = 0.0
    for key, p in pab.items():
        if p <= 0:
            continue
        ratio = p / (pa[key[:k]] * pb[key[k:]])
        total += float(p) * math.log2(ratio)
    return total


def conditional_entropy(joint: JointDistribution, target: Variables, given: Variables) -> float:
    names_t, names_g = _names(target), _names(given)
    return entropy(joint.marginal(names_t + names_g)) - entropy(joint.marginal(names_g))


def binomial_entropy(trials: int, p: float) -> float:
    """H(Bin(trials, p)) in bits; zero trials carry no entropy"""
    if trials == 0:
        return 0.0
    k = np.arange(trials + 1)
    log_pmf = stats.binom.logpmf(k, trials, p)
    pmf = np.exp(log_pmf)
    return float(-np.sum(pmf * log_pmf) / math.log(2.0))


def binomial_entropy_exact(n: int, p: float) -> float:
    """H(Bin(n, p)) in bits, summed from the log-space pmf"""
    if n < 1 or not 0.0 < p < 1.0:
        raise DomainError(f"binomial entropy needs n >= 1 and 0 < p < 1, got n={n}, p={p}")
    return binomial_entropy(int(n), p)


def binomial_entropy_approx(n: int, p: float) -> float:
    """1/2 lg(2 pi e p(1-p) n)"""
    if n < 1 or not 0.0 < p < 1.0:
        raise DomainError(f"binomial entropy needs n >= 1 and 0 < p < 1, got n={n}, p={p}")
    return 0.5 * math.log2(2.0 * math.pi * math.e * p * (1.0 - p) * n)


def _encode(values: Sequence[Hashable]) -> Tuple[np.ndarray, int]:
    index = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        codes[i] = index.setdefault(v, len(index))
    return codes, len(index)


def _plug_in_mi(a: np.ndarray, b: np.ndarray, kb: int) -> Tuple[float, int, int, int]:
    """Plug-in MI in bits, plus the number of occupied cells of A, B and (A, B)"""
    n = len(a)
    joint = np.unique(a * kb + b, return_counts=True)[1]
    ca = np.bincount(a)
    ca = ca[ca > 0]
    cb = np.bincount(b)
    cb = cb[cb > 0]

    def h(counts: np.ndarray) -> float:
        p = counts / n
        return float(-np.sum(p * np.log2(p)))

    return h(ca) + h(cb) - h(joint), len(ca), len(cb), len(joint)


def empirical_mi(pairs: Sequence[Tuple[Hashable, Hashable]], resamples: Optional[int] = None,
                 confidence: Optional[float] = None, seed: int = 0,
                 min_samples: Optional[int] = None) -> MIEstimate:
    """Plug-in MI between the two coordinates of `pairs` with a seeded bootstrap interval"""
    minimum = Config.MIN_MI_SAMPLES if min_samples is None else min_samples
    if len(pairs) < minimum:
        raise InsufficientSamplesError(f"{len(pairs)} samples, need at least {minimum}")
    resamples = Config.BOOTSTRAP_RESAMPLES if resamples is None else resamples
    level = Config.CONFIDENCE if confidence is None else confidence

    a, _ = _encode([p[0] for p in pairs])
    b, kb = _encode([p[1] for p in pairs])
    n = len(pairs)
    plug_in, ka_used, kb_used, kab_used = _plug_in_mi(a, b, kb)
    correction = ((ka_used - 1) + (kb_used - 1) - (kab_used - 1)) / (2.0 * n * math.log(2.0))

    rng = np.random.default_rng(seed)
    boot = np.empty(resamples)
    for r in range(resamples):
        idx = rng.integers(0, n, size=n)
        boot[r] = _plug_in_mi(a[idx], b[idx], kb)[0]
    alpha = 1.0 - level
    low, high = np.quantile(boot, [alpha / 2.0, 1.0 - alpha / 2.0]) if resamples else (plug_in, plug_in)
    logger.debug(f"Plug-in MI {plug_in:.4f} bits from {n} samples, {resamples} bootstrap resamples")

    return MIEstimate(
        plug_in=max(0.0, plug_in),
        ci_low=max(0.0, float(low)),
        ci_high=max(0.0, float(high)),
        miller_madow=max(0.0, plug_in + correction),
        samples=n,
    )


def weight_prefix_joint(n: int, total_bits: int, mode: str = "double") -> JointDistribution:
    """Exhaustive joint of X = first n bits and W = weight of all `total_bits` uniform bits"""
    if not 0 <= n <= total_bits:
        raise DomainError(f"need 0 <= n <= total_bits, got n={n}, total_bits={total_bits}")
    values = np.arange(2 ** total_bits, dtype=np.int64)
    weight = np.zeros_like(values)
    for j in range(total_bits):
        weight += (values >> j) & 1
    prefix = values >> (total_bits - n)
    cells, counts = np.unique(np.stack([prefix, weight], axis=1), axis=0, return_counts=True)
    weights = {
        (format(int(x), f'0{n}b') if n else '', int(w)): int(c)
        for (x, w), c in zip(cells, counts)
    }
    return JointDistribution.from_weights(("X", "W"), weights, mode)
