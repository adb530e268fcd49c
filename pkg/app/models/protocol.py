import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.config import Config
from app.models.errors import ConfigurationError
from app.models.quantum import BasisState, MeasurementBasis

# Guards ceil/floor of products such as 8 * n * (1 + delta) against float noise
_ROUNDING_SLACK = 1e-9


class ProtocolKind(str, Enum):
    MOCK = "mock"
    P1 = "p1"
    P1_PRIME = "p1prime"
    P2 = "p2"


class Schedule(str, Enum):
    PARALLEL = "Parallel"
    SEQUENTIAL = "Sequential"


class BobModel(str, Enum):
    """How Bob's Protocol-2 measurement is simulated"""
    IMMEDIATE = "immediate"
    REGISTER = "register"


class BobAction(str, Enum):
    SIFT = "SIFT"
    CTRL = "CTRL"


class AbortReason(str, Enum):
    CTRL_ERROR_RATE = "CtrlErrorRate"
    TEST_ERROR_RATE = "TestErrorRate"
    INSUFFICIENT_BALANCED_BITS = "InsufficientBalancedBits"


class OutcomeStatus(str, Enum):
    COMPLETED = "Completed"
    ABORTED = "Aborted"


class ProtocolParams(BaseModel):
    n: int = Field(..., gt=0, description="INFO string length, even")
    delta: float = Field(0.5, gt=0.0)
    epsilon: float = Field(0.0, ge=0.0, le=1.0, description="Step 7' balance slack")
    delta_prime: Optional[float] = Field(None, description="Only used by the abort-probability analysis")
    p_ctrl_threshold: float = Field(Config.DEFAULT_P_CTRL, ge=0.0, le=1.0)
    p_test_threshold: float = Field(Config.DEFAULT_P_TEST, ge=0.0, le=1.0)
    schedule: Schedule = Schedule.PARALLEL
    bob_model: BobModel = BobModel.IMMEDIATE
    master_seed: int = 0
    mock_rounds: Optional[int] = Field(None, gt=0)

    @field_validator('n')
    @classmethod
    def n_must_be_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"n must be even, got {v}")
        return v

    @model_validator(mode='after')
    def check_delta_prime(self) -> "ProtocolParams":
        if self.delta_prime is not None and not self.epsilon < self.delta_prime < self.delta:
            raise ValueError(
                f"need epsilon < delta_prime < delta, got {self.epsilon}, {self.delta_prime}, {self.delta}"
            )
        return self

    @property
    def num_qubits(self) -> int:
        """N = ceil(8n(1 + delta))"""
        return math.ceil(8 * self.n * (1.0 + self.delta) - _ROUNDING_SLACK)

    @property
    def balance_h(self) -> int:
        """h = floor((1 + epsilon) n / 2)"""
        return balance_h(self.n, self.epsilon)

    @property
    def rounds(self) -> int:
        """Number of qubits the mock protocol sends"""
        return self.mock_rounds if self.mock_rounds is not None else self.num_qubits


def balance_h(n: int, epsilon: float) -> int:
    return math.floor((1.0 + epsilon) * n / 2.0 + _ROUNDING_SLACK)


@dataclass(frozen=True)
class CtrlResult:
    position: int
    basis: str
    sent: int
    received: int

    @property
    def error(self) -> bool:
        return self.sent != self.received


@dataclass
class PublicView:
    """Everything announced over the classical channel during one run"""
    protocol: str
    num_qubits: int
    z_positions: List[int]
    ctrl_positions: List[int]
    reflect_order: Optional[List[int]] = None
    measured_set: Optional[List[int]] = None
    sift_positions: List[int] = field(default_factory=list)
    test_indices: List[int] = field(default_factory=list)
    test_values: List[int] = field(default_factory=list)
    info_indices_q: List[int] = field(default_factory=list)
    info_positions: List[int] = field(default_factory=list)
    abort: Optional[str] = None


ANNOUNCEMENTS: Tuple[str, ...] = (
    'z_positions', 'ctrl_positions', 'reflect_order', 'measured_set', 'sift_positions',
    'test_indices', 'test_values', 'info_indices_q', 'info_positions', 'abort',
)
_OPTIONAL_ANNOUNCEMENTS = frozenset({'reflect_order', 'measured_set', 'abort'})


@dataclass
class Transcript:
    """Full classical record of a run; positions are 1-based"""
    protocol: str
    alice_bases: List[str]
    alice_bits: List[int]
    bob_actions: List[str]
    reflect_order_s: Optional[List[int]] = None
    measured_set_m: Optional[List[int]] = None
    bob_measured_bits: List[int] = field(default_factory=list)
    ctrl_results: List[CtrlResult] = field(default_factory=list)
    sift_positions: List[int] = field(default_factory=list)
    test_indices: List[int] = field(default_factory=list)
    test_values_bob: List[int] = field(default_factory=list)
    v_positions: List[int] = field(default_factory=list)
    sift_string_v: List[int] = field(default_factory=list)
    balanced_indices_e: List[int] = field(default_factory=list)
    info_indices_q: List[int] = field(default_factory=list)
    info_positions: List[int] = field(default_factory=list)
    info_string_y: List[int] = field(default_factory=list)
    abort: Optional[str] = None

    @property
    def num_qubits(self) -> int:
        return len(self.alice_bases)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))

    def public_view(self, fields: Optional[Sequence[str]] = None) -> PublicView:
        """Announcements of this run; with `fields`, the ones not listed are left blank"""
        ctrl = [k + 1 for k, a in enumerate(self.bob_actions) if a == BobAction.CTRL.value]
        view = PublicView(
            protocol=self.protocol,
            num_qubits=self.num_qubits,
            z_positions=[k + 1 for k, b in enumerate(self.alice_bases) if b == "Z"],
            ctrl_positions=ctrl,
            reflect_order=list(self.reflect_order_s) if self.reflect_order_s is not None else None,
            measured_set=list(self.measured_set_m) if self.measured_set_m is not None else None,
            sift_positions=list(self.sift_positions),
            test_indices=list(self.test_indices),
            test_values=list(self.test_values_bob),
            info_indices_q=list(self.info_indices_q),
            info_positions=list(self.info_positions),
            abort=self.abort,
        )
        if fields is None:
            return view
        unknown = set(fields) - set(ANNOUNCEMENTS)
        if unknown:
            raise ConfigurationError(f"unknown announcements {sorted(unknown)}; have {ANNOUNCEMENTS}")
        for name in ANNOUNCEMENTS:
            if name not in fields:
                setattr(view, name, None if name in _OPTIONAL_ANNOUNCEMENTS else [])
        return view


@dataclass
class Outcome:
    status: OutcomeStatus
    transcript: Transcript
    abort_reason: Optional[AbortReason] = None
    alice_info: str = ""
    bob_info: str = ""
    ctrl_err_z: float = 0.0
    ctrl_err_x: float = 0.0
    test_err: Optional[float] = None
    ctrl_bits_z: int = 0
    ctrl_errors_z: int = 0
    ctrl_bits_x: int = 0
    ctrl_errors_x: int = 0
    category_counts: Dict[str, int] = field(default_factory=dict)
    eve_record: Any = None

    @property
    def completed(self) -> bool:
        return self.status == OutcomeStatus.COMPLETED

    @property
    def status_label(self) -> str:
        if self.completed:
            return OutcomeStatus.COMPLETED.value
        return f"{OutcomeStatus.ABORTED.value}:{self.abort_reason.value}"

    @property
    def threshold_abort(self) -> bool:
        return self.abort_reason in (AbortReason.CTRL_ERROR_RATE, AbortReason.TEST_ERROR_RATE)


@dataclass(frozen=True)
class PostProcessingPlan:
    """Step 8 parameters (error-correcting code rank and final key length); never executed"""
    rank_R: int
    key_len_l: int

    def __post_init__(self):
        if not 0 <= self.key_len_l <= self.rank_R:
            raise ConfigurationError(
                f"key length {self.key_len_l} must lie in 0..rank {self.rank_R}"
            )


@dataclass(frozen=True)
class RoundChoices:
    """Alice's and Bob's private random choices for one run"""
    alice_bases: Tuple[MeasurementBasis, ...]
    alice_bits: Tuple[int, ...]
    bob_actions: Tuple[BobAction, ...]
    reflect_order: Tuple[int, ...]

    def __post_init__(self):
        n = len(self.alice_bases)
        if len(self.alice_bits) != n or len(self.bob_actions) != n:
            raise ConfigurationError("bases, bits and Bob's actions must have the same length")
        if any(b not in (0, 1) for b in self.alice_bits):
            raise ConfigurationError("Alice's bits must be 0 or 1")
        if sorted(self.reflect_order) != self.ctrl_positions:
            raise ConfigurationError("reflect order must be a permutation of the CTRL positions")

    @classmethod
    def build(cls, alice_bases: Sequence[Any], alice_bits: Sequence[int],
              bob_actions: Sequence[Any], reflect_order: Optional[Sequence[int]] = None) -> "RoundChoices":
        actions = tuple(BobAction(a) for a in bob_actions)
        if reflect_order is None:
            reflect_order = [k + 1 for k, a in enumerate(actions) if a == BobAction.CTRL]
        return cls(
            alice_bases=tuple(MeasurementBasis(b) for b in alice_bases),
            alice_bits=tuple(int(b) for b in alice_bits),
            bob_actions=actions,
            reflect_order=tuple(int(k) for k in reflect_order),
        )

    @classmethod
    def draw(cls, num_qubits: int, rng: np.random.Generator, reorder: bool = False) -> "RoundChoices":
        bases = rng.integers(0, 2, size=num_qubits)
        bits = rng.integers(0, 2, size=num_qubits)
        actions = rng.integers(0, 2, size=num_qubits)
        ctrl = [k + 1 for k in range(num_qubits) if actions[k] == 1]
        order = [int(k) for k in rng.permutation(ctrl)] if reorder else ctrl
        return cls.build(
            alice_bases=[MeasurementBasis.X if b else MeasurementBasis.Z for b in bases],
            alice_bits=[int(b) for b in bits],
            bob_actions=[BobAction.CTRL if a else BobAction.SIFT for a in actions],
            reflect_order=order,
        )

    @property
    def num_qubits(self) -> int:
        return len(self.alice_bases)

    @property
    def ctrl_positions(self) -> List[int]:
        return [k + 1 for k, a in enumerate(self.bob_actions) if a == BobAction.CTRL]

    @property
    def measured_positions(self) -> List[int]:
        """Positions Bob measures (his SIFT choices), ascending"""
        return [k + 1 for k, a in enumerate(self.bob_actions) if a == BobAction.SIFT]

    @property
    def sift_positions(self) -> List[int]:
        """SIFT bits: Alice sent in Z and Bob measured"""
        return [k for k in self.measured_positions if self.alice_bases[k - 1] == MeasurementBasis.Z]

    def basis_state(self, position: int) -> BasisState:
        return BasisState.from_basis_bit(self.alice_bases[position - 1], self.alice_bits[position - 1])

    def states(self) -> List[BasisState]:
        return [self.basis_state(k) for k in range(1, self.num_qubits + 1)]

    def category_counts(self) -> Dict[str, int]:
        counts = {'Z-SIFT': 0, 'Z-CTRL': 0, 'X-SIFT': 0, 'X-CTRL': 0}
        for basis, action in zip(self.alice_bases, self.bob_actions):
            counts[f"{basis.value}-{action.value}"] += 1
        return counts
