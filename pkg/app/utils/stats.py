from typing import Optional, Tuple

from scipy import stats

from app.config import Config


def wilson_interval(successes: int, total: int, confidence: Optional[float] = None) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion; (0, 1) when there is no data"""
    if total <= 0:
        return 0.0, 1.0
    level = Config.CONFIDENCE if confidence is None else confidence
    ci = stats.binomtest(int(successes), int(total)).proportion_ci(
        confidence_level=level, method="wilson"
    )
    return float(ci.low), float(ci.high)
