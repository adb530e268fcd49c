import json
import math
from itertools import combinations
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from app.models.attack import (
    AttackSpec,
    EveRecord,
    EveSession,
    PerQubitAttack,
    ProbeOp,
    QubitRef,
    RoundCoupling,
    WeightShift,
)
from app.models.errors import ConfigurationError
from app.models.protocol import PublicView, Schedule
from app.models.quantum import PROBE_AXIS, DensityMatrix, UnitaryMatrix
from app.services.quantum_phase import QuantumPhase, input_bits, input_label
from app.services.state_engine import StateEngine, controlled, pauli_x, ry
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


def no_attack() -> AttackSpec:
    return PerQubitAttack("no_attack", RoundCoupling(probe_dim=1))


def cnot_mirror() -> AttackSpec:
    """cNOT into a fresh probe qubit on the way in and again on the way back.

    The probe qubit is read as soon as Eve learns a qubit will not return.
    """
    cnot = controlled(pauli_x())
    return PerQubitAttack(
        "cnot_mirror",
        RoundCoupling(probe_dim=2, forward=cnot, backward=cnot, read_probe_on_no_return=True),
    )


def cnot_forward_only() -> AttackSpec:
    return PerQubitAttack("cnot_forward_only", RoundCoupling(probe_dim=2, forward=controlled(pauli_x())))


def intercept_resend_z() -> AttackSpec:
    """Measure every qubit in Z on its way to Bob and resend the result"""
    return PerQubitAttack(
        "intercept_resend_z",
        RoundCoupling(probe_dim=2, forward=controlled(pauli_x()), measure_after_forward=True),
    )


def rotation_probe(theta: float) -> AttackSpec:
    """Controlled rotation of a fresh probe qubit by 2*theta; theta=0 is the identity, pi/2 a full flip"""
    theta = float(theta)
    if not 0.0 <= theta <= math.pi / 2 + 1e-12:
        raise ConfigurationError(f"theta must lie in [0, pi/2], got {theta}")
    return PerQubitAttack(
        "rotation_probe",
        RoundCoupling(probe_dim=2, forward=controlled(ry(2.0 * theta))),
        params={'theta': theta},
    )


def individual_qubit_attack(forward: Optional[UnitaryMatrix], backward: Optional[UnitaryMatrix] = None,
                            probe_dim: int = 2, name: str = "individual_qubit") -> AttackSpec:
    """Restricted sequential family U_k = U_E^(k) U_F^(k-1) built from per-qubit gates"""
    return PerQubitAttack(name, RoundCoupling(probe_dim=probe_dim, forward=forward, backward=backward))


def matrix_attack(forward: UnitaryMatrix, backward: Optional[UnitaryMatrix] = None,
                  name: str = "matrix") -> AttackSpec:
    if forward.dim % 2:
        raise ConfigurationError(f"attack matrices act on (qubit, probe); dimension {forward.dim} is odd")
    return individual_qubit_attack(forward, backward, probe_dim=forward.dim // 2, name=name)


def load_attack_file(path: Union[str, Path]) -> AttackSpec:
    """Read a user attack: either {dim, entries} or {forward: {...}, backward: {...}}"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read attack file {path}: {e}") from e

    if 'forward' in payload:
        forward = UnitaryMatrix.from_json(payload['forward'])
        backward = UnitaryMatrix.from_json(payload['backward']) if payload.get('backward') else None
    else:
        forward, backward = UnitaryMatrix.from_json(payload), None
    logger.info(f"Loaded attack matrix of dimension {forward.dim} from {path}")
    return matrix_attack(forward, backward, name=Path(path).stem)


class HammingWeightAttack(AttackSpec):
    """Counter probe of dimension N+1: U_E adds |i|, U_F subtracts the weight of the returned block"""

    name = "hamming_weight"
    listens_to = ('ctrl_positions',)

    def __init__(self, num_qubits: Optional[int] = None):
        self.num_qubits = num_qubits

    @property
    def params(self) -> Dict[str, Any]:
        return {'num_qubits': self.num_qubits}

    def _check(self, num_qubits: int) -> None:
        if self.num_qubits is not None and num_qubits != self.num_qubits:
            raise ConfigurationError(
                f"attack was built for N={self.num_qubits}, protocol uses N={num_qubits}"
            )

    def probe_dim(self, num_qubits: int) -> int:
        self._check(num_qubits)
        return num_qubits + 1

    def parallel_forward(self, num_qubits: int) -> List[ProbeOp]:
        self._check(num_qubits)
        qubits = tuple(QubitRef(k) for k in range(1, num_qubits + 1))
        return [WeightShift(num_qubits + 1, qubits, sign=1)]

    def parallel_backward(self, num_qubits: int, returned: int) -> List[ProbeOp]:
        self._check(num_qubits)
        if returned == 0:
            return []
        slots = tuple(QubitRef(j, returned=True) for j in range(1, returned + 1))
        return [WeightShift(num_qubits + 1, slots, sign=-1)]

    def conclude(self, session: EveSession, view: PublicView) -> EveRecord:
        outcome = session.probe_outcome or 0
        measured = view.num_qubits - len(view.ctrl_positions)
        return EveRecord(
            probe_outcome=outcome,
            metadata={'claimed_weight': outcome, 'measured_count': measured},
            context=measured,
        )


def hamming_weight_attack(num_qubits: Optional[int] = None) -> AttackSpec:
    return HammingWeightAttack(num_qubits)


class ParallelAsSequential(AttackSpec):
    """Runs an attack's (U_E, U_F) pair through the sequential schedule as U_1 = U_E, U_{N+1} = U_F"""

    def __init__(self, inner: AttackSpec):
        self.inner = inner
        self.name = f"{inner.name}_as_sequential"
        self.listens_to = inner.listens_to

    @property
    def params(self) -> Dict[str, Any]:
        return self.inner.params

    def probe_dim(self, num_qubits: int) -> int:
        return self.inner.probe_dim(num_qubits)

    def parallel_forward(self, num_qubits: int) -> List[ProbeOp]:
        return self.inner.parallel_forward(num_qubits)

    def parallel_backward(self, num_qubits: int, returned: int) -> List[ProbeOp]:
        return self.inner.parallel_backward(num_qubits, returned)

    def sequential_family(self, num_qubits: int) -> List[List[ProbeOp]]:
        return AttackSpec.sequential_family(self, num_qubits)

    def new_session(self, num_qubits: int) -> EveSession:
        return self.inner.new_session(num_qubits)

    def conclude(self, session: EveSession, view: PublicView) -> EveRecord:
        return self.inner.conclude(session, view)


def parallel_as_sequential(attack: AttackSpec) -> AttackSpec:
    return ParallelAsSequential(attack)


AttackFactory = Callable[..., AttackSpec]

ATTACKS: Dict[str, AttackFactory] = {
    'no_attack': lambda num_qubits=None: no_attack(),
    'cnot_mirror': lambda num_qubits=None: cnot_mirror(),
    'cnot_forward_only': lambda num_qubits=None: cnot_forward_only(),
    'intercept_resend_z': lambda num_qubits=None: intercept_resend_z(),
    'rotation_probe': lambda num_qubits=None, theta=0.0: rotation_probe(theta),
    'hamming_weight': lambda num_qubits=None: hamming_weight_attack(num_qubits),
    'matrix': lambda num_qubits=None, path=None: load_attack_file(_require(path, 'path')),
}


def _require(value: Any, key: str) -> Any:
    if value is None:
        raise ConfigurationError(f"attack parameter '{key}' is required")
    return value


def get_attack(name: str, num_qubits: Optional[int] = None, **params: Any) -> AttackSpec:
    """Build a registered attack by name"""
    key = name.strip().lower()
    if key == 'hamming_weight_attack':
        key = 'hamming_weight'
    if key not in ATTACKS:
        raise ConfigurationError(f"unknown attack '{name}'; choose from {sorted(ATTACKS)}")
    try:
        return ATTACKS[key](num_qubits=num_qubits, **params)
    except TypeError as e:
        raise ConfigurationError(f"bad parameters for attack '{name}': {e}") from e


# -- probe-state analysis ------------------------------------------------

def protocol2_probe_states(attack: AttackSpec, num_qubits: int, measured_set: Sequence[int],
                           schedule: Schedule = Schedule.PARALLEL,
                           engine: Optional[StateEngine] = None) -> Dict[str, DensityMatrix]:
    """Eve's reduced probe state after Protocol 2 for every computational input"""
    phase = QuantumPhase(engine)
    states: Dict[str, DensityMatrix] = {}
    for index in range(2 ** num_qubits):
        bits = input_bits(index, num_qubits)
        final = phase.coherent_protocol2(attack, bits, measured_set, schedule)
        states[input_label(bits)] = phase.engine.reduced_density(final, [PROBE_AXIS])
    return states


def protocol1_probe_states(attack: AttackSpec, num_qubits: int, reflect_order: Sequence[int],
                           engine: Optional[StateEngine] = None) -> Dict[str, DensityMatrix]:
    """Eve's reduced probe state after Protocol 1 for every computational input"""
    phase = QuantumPhase(engine)
    states: Dict[str, DensityMatrix] = {}
    for index in range(2 ** num_qubits):
        bits = input_bits(index, num_qubits)
        final = phase.coherent_protocol1(attack, bits, reflect_order)
        states[input_label(bits)] = phase.engine.reduced_density(final, [PROBE_AXIS])
    return states


def max_pairwise_distance(states: Dict[str, DensityMatrix],
                          engine: Optional[StateEngine] = None) -> Tuple[float, Optional[Tuple[str, str]]]:
    """Largest trace distance between any two probe states, with the pair that attains it"""
    engine = engine or StateEngine()
    worst, pair = 0.0, None
    for a, b in combinations(sorted(states), 2):
        distance = engine.trace_distance(states[a], states[b])
        if distance > worst:
            worst, pair = distance, (a, b)
    return worst, pair
