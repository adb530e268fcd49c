from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Hashable, Iterable, List, Sequence, Tuple, Union

from app.models.errors import ConfigurationError

Probability = Union[Fraction, float]

RATIONAL = "rational"
DOUBLE = "double"

_DOUBLE_TOTAL_TOLERANCE = 1e-12


@dataclass
class JointDistribution:
    """Finite joint probability table keyed by outcome tuples, one entry per variable"""
    variables: Tuple[str, ...]
    table: Dict[Tuple[Hashable, ...], Probability]
    mode: str = RATIONAL

    def __post_init__(self):
        self.variables = tuple(self.variables)
        if len(set(self.variables)) != len(self.variables):
            raise ConfigurationError(f"variable names must be distinct, got {self.variables}")
        if self.mode not in (RATIONAL, DOUBLE):
            raise ConfigurationError(f"mode must be '{RATIONAL}' or '{DOUBLE}', got {self.mode!r}")
        total: Probability = Fraction(0) if self.mode == RATIONAL else 0.0
        for key, p in self.table.items():
            if len(key) != len(self.variables):
                raise ConfigurationError(f"outcome {key} does not match variables {self.variables}")
            if p < 0:
                raise ConfigurationError(f"negative probability {p} at {key}")
            total += p
        if self.mode == RATIONAL and total != 1:
            raise ConfigurationError(f"rational table sums to {total}, expected exactly 1")
        if self.mode == DOUBLE and abs(float(total) - 1.0) > _DOUBLE_TOTAL_TOLERANCE:
            raise ConfigurationError(f"table sums to {float(total)}, expected 1")

    @classmethod
    def from_weights(cls, variables: Sequence[str], weights: Dict[Tuple[Hashable, ...], Any],
                     mode: str = RATIONAL) -> "JointDistribution":
        """Normalize non-negative weights (integers for exact tables) into a distribution"""
        total = sum(weights.values())
        if total <= 0:
            raise ConfigurationError("weights must have a positive sum")
        if mode == RATIONAL:
            table = {k: Fraction(w) / Fraction(total) for k, w in weights.items() if w}
        else:
            table = {k: float(w) / float(total) for k, w in weights.items() if w}
        return cls(tuple(variables), table, mode)

    @classmethod
    def from_samples(cls, variables: Sequence[str], samples: Iterable[Tuple[Hashable, ...]],
                     mode: str = DOUBLE) -> "JointDistribution":
        counts: Dict[Tuple[Hashable, ...], int] = {}
        for s in samples:
            key = tuple(s)
            counts[key] = counts.get(key, 0) + 1
        return cls.from_weights(variables, counts, mode)

    @classmethod
    def uniform(cls, variables: Sequence[str], outcomes: Iterable[Tuple[Hashable, ...]],
                mode: str = RATIONAL) -> "JointDistribution":
        return cls.from_weights(variables, {tuple(o): 1 for o in outcomes}, mode)

    def index(self, variable: str) -> int:
        try:
            return self.variables.index(variable)
        except ValueError:
            raise ConfigurationError(f"unknown variable {variable!r}; have {self.variables}") from None

    @property
    def arities(self) -> Dict[str, int]:
        return {v: len({key[i] for key in self.table}) for i, v in enumerate(self.variables)}

    def marginal(self, variables: Union[str, Sequence[str]]) -> "JointDistribution":
        names = (variables,) if isinstance(variables, str) else tuple(variables)
        positions = [self.index(v) for v in names]
        table: Dict[Tuple[Hashable, ...], Probability] = {}
        for key, p in self.table.items():
            sub = tuple(key[i] for i in positions)
            table[sub] = table.get(sub, 0) + p
        return JointDistribution(names, table, self.mode)

    def probabilities(self) -> List[Probability]:
        return list(self.table.values())

    def conditional_values(self, given: str, target: str) -> Dict[Hashable, Dict[Hashable, Probability]]:
        """p(target | given) for every value of `given`"""
        joint = self.marginal((given, target))
        weights: Dict[Hashable, Probability] = {}
        for (g, _), p in joint.table.items():
            weights[g] = weights.get(g, 0) + p
        out: Dict[Hashable, Dict[Hashable, Probability]] = {}
        for (g, t), p in joint.table.items():
            out.setdefault(g, {})[t] = p / weights[g]
        return out


@dataclass
class BoundReport:
    """One checked claim: computed value against its bound in the stated direction"""
    name: str
    parameters: Dict[str, Any]
    computed_value: Any
    bound: Any
    satisfied: bool
    margin: float
    direction: str = "le"
    skipped: bool = False
    note: str = ""

    @classmethod
    def evaluate(cls, name: str, parameters: Dict[str, Any], computed: Any, bound: Any,
                 direction: str = "le", tolerance: float = 0.0, note: str = "") -> "BoundReport":
        if direction == "le":
            satisfied = computed <= bound + tolerance
            margin = float(bound - computed)
        elif direction == "ge":
            satisfied = computed >= bound - tolerance
            margin = float(computed - bound)
        elif direction == "eq":
            difference = abs(computed - bound)
            satisfied = difference <= tolerance
            margin = float(tolerance - difference)
        else:
            raise ConfigurationError(f"direction must be 'le', 'ge' or 'eq', got {direction!r}")
        return cls(name, dict(parameters), computed, bound, bool(satisfied), margin, direction, note=note)

    @classmethod
    def skip(cls, name: str, parameters: Dict[str, Any], reason: str) -> "BoundReport":
        return cls(name, dict(parameters), None, None, True, 0.0, skipped=True, note=reason)

    @staticmethod
    def _json_value(value: Any) -> Any:
        if isinstance(value, Fraction):
            return str(value)
        if isinstance(value, int) and not isinstance(value, bool) and abs(value) > 2 ** 53:
            return str(value)
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'parameters': self.parameters,
            'computed_value': self._json_value(self.computed_value),
            'bound': self._json_value(self.bound),
            'direction': self.direction,
            'satisfied': self.satisfied,
            'margin': self.margin,
            'skipped': self.skipped,
            'note': self.note,
        }


@dataclass
class MIEstimate:
    """Plug-in mutual information with a bootstrap interval, in bits"""
    plug_in: float
    ci_low: float
    ci_high: float
    miller_madow: float
    samples: int
