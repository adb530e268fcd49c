from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.errors import ConfigurationError, DimensionError
from app.models.protocol import ANNOUNCEMENTS, PublicView
from app.models.quantum import PROBE_AXIS, StateVector, SubsystemLayout, UnitaryMatrix
from app.services.state_engine import lift_to_probe_factor

PROBE = "probe"


@dataclass(frozen=True)
class QubitRef:
    """A protocol qubit as Eve addresses it.

    With returned=False, index is the position k in 1..N. With returned=True,
    index is the slot j in the returned block and resolves to the position
    Bob announced for that slot.
    """
    index: int
    returned: bool = False


Target = Union[str, QubitRef]


def resolve_axis(target: Target, layout: SubsystemLayout,
                 slots: Optional[Sequence[int]] = None) -> int:
    if target == PROBE:
        return PROBE_AXIS
    if not isinstance(target, QubitRef):
        raise ConfigurationError(f"unknown attack target {target!r}")
    if not target.returned:
        return layout.qubit_axis(target.index)
    if slots is None or not 1 <= target.index <= len(slots):
        raise ConfigurationError(f"returned slot {target.index} is not part of the returned block")
    return layout.qubit_axis(slots[target.index - 1])


class ProbeOp(ABC):
    """One unitary step of an attack over the probe and the qubits in transit"""

    targets: Tuple[Target, ...]

    def axes(self, layout: SubsystemLayout, slots: Optional[Sequence[int]] = None) -> List[int]:
        return [resolve_axis(t, layout, slots) for t in self.targets]

    @abstractmethod
    def apply(self, engine, state: StateVector, slots: Optional[Sequence[int]] = None) -> StateVector:
        pass


@dataclass(frozen=True)
class MatrixOp(ProbeOp):
    matrix: UnitaryMatrix
    targets: Tuple[Target, ...]

    def apply(self, engine, state, slots=None):
        return engine.apply_unitary(state, self.matrix, self.axes(state.layout, slots))


@lru_cache(maxsize=64)
def weight_shift_permutation(modulus: int, num_bits: int, sign: int) -> np.ndarray:
    """Basis map |c>|b> -> |c + sign*|b| mod modulus>|b> over (counter, num_bits qubits)"""
    block = 2 ** num_bits
    index = np.arange(modulus * block, dtype=np.int64)
    counter, bits = np.divmod(index, block)
    weight = np.zeros_like(bits)
    for j in range(num_bits):
        weight += (bits >> j) & 1
    perm = ((counter + sign * weight) % modulus) * block + bits
    perm.setflags(write=False)
    return perm


@dataclass(frozen=True)
class WeightShift(ProbeOp):
    """Adds (sign=+1) or subtracts (sign=-1) the Hamming weight of `qubits` to a counter probe"""
    modulus: int
    qubits: Tuple[QubitRef, ...]
    sign: int = 1

    @property
    def targets(self) -> Tuple[Target, ...]:
        return (PROBE,) + tuple(self.qubits)

    def apply(self, engine, state, slots=None):
        if state.layout.probe_dim != self.modulus:
            raise DimensionError(
                f"counter modulo {self.modulus} needs a probe of that dimension, got {state.layout.probe_dim}"
            )
        perm = weight_shift_permutation(self.modulus, len(self.qubits), self.sign)
        return engine.apply_local_permutation(state, perm, self.axes(state.layout, slots))


@dataclass(frozen=True)
class RoundCoupling:
    """Per-qubit attack acting on one transit qubit and its own fresh probe.

    forward/backward act on (qubit, probe) with the qubit as the first target.
    """
    probe_dim: int = 2
    forward: Optional[UnitaryMatrix] = None
    backward: Optional[UnitaryMatrix] = None
    read_probe_on_no_return: bool = False
    measure_after_forward: bool = False

    @property
    def acts_backward(self) -> bool:
        return self.backward is not None and not _is_identity(self.backward)

    @property
    def is_identity(self) -> bool:
        """No probe and no effect on the qubit"""
        return (self.probe_dim == 1 and not self.measure_after_forward and not self.acts_backward
                and (self.forward is None or _is_identity(self.forward)))

    def __post_init__(self):
        for label, gate in (('forward', self.forward), ('backward', self.backward)):
            if gate is not None and gate.dim != 2 * self.probe_dim:
                raise DimensionError(
                    f"{label} gate has dimension {gate.dim}, expected {2 * self.probe_dim}"
                )


@dataclass
class EveRecord:
    probe_outcome: int = 0
    guesses: Optional[str] = None
    position_guesses: Dict[int, int] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    context: Optional[Any] = None

    def observable(self) -> Any:
        """What Eve ends up holding, as a hashable value; public side information is paired with the reading"""
        if self.guesses is not None:
            return self.guesses
        if self.context is not None:
            return (self.probe_outcome, self.context)
        return self.probe_outcome


@dataclass
class EveSession:
    """Trial-local attack state; holds probe readings until the announcements are public"""
    num_qubits: int
    round_outcomes: Dict[int, int] = field(default_factory=dict)
    early_reads: Dict[int, int] = field(default_factory=dict)
    probe_outcome: Optional[int] = None

    def record_round(self, position: int, outcome: int) -> None:
        self.round_outcomes[position] = outcome

    def record_early_read(self, position: int, outcome: int) -> None:
        self.early_reads[position] = outcome

    def record_probe(self, outcome: int) -> None:
        self.probe_outcome = outcome

    def position_outcomes(self, factor_dim: int) -> Dict[int, int]:
        """Reading of each per-qubit probe factor, keyed by position"""
        if self.probe_outcome is not None:
            digits: Dict[int, int] = {}
            rest = self.probe_outcome
            for k in range(self.num_qubits, 0, -1):
                rest, digits[k] = divmod(rest, factor_dim)
            return digits
        merged = dict(self.round_outcomes)
        merged.update(self.early_reads)
        return merged

    def combined_outcome(self, factor_dim: int) -> int:
        if self.probe_outcome is not None:
            return self.probe_outcome
        if factor_dim == 1:
            return 0
        outcomes = self.position_outcomes(factor_dim)
        value = 0
        for k in range(1, self.num_qubits + 1):
            value = value * factor_dim + outcomes.get(k, 0)
        return value


class AttackSpec(ABC):
    """Eve's strategy: unitaries at the interception points plus a final probe reading.

    Attacks never see private protocol data; they receive the qubits in
    transit and, at the end, the PublicView restricted to `listens_to`.
    """

    name: str = "attack"
    listens_to: Tuple[str, ...] = ANNOUNCEMENTS

    @property
    def params(self) -> Dict[str, Any]:
        return {}

    def coupling(self) -> Optional[RoundCoupling]:
        """Per-qubit form of the attack, if it has one"""
        return None

    @abstractmethod
    def probe_dim(self, num_qubits: int) -> int:
        pass

    @abstractmethod
    def parallel_forward(self, num_qubits: int) -> List[ProbeOp]:
        """U_E over the probe and qubits 1..N"""
        pass

    @abstractmethod
    def parallel_backward(self, num_qubits: int, returned: int) -> List[ProbeOp]:
        """U_F over the probe and the returned slots 1..returned"""
        pass

    def sequential_family(self, num_qubits: int) -> List[List[ProbeOp]]:
        """U_1..U_{N+1}; by default the parallel pair as U_1 = U_E, identities, U_{N+1} = U_F"""
        family: List[List[ProbeOp]] = [self.parallel_forward(num_qubits)]
        family += [[] for _ in range(num_qubits - 1)]
        family.append(self.parallel_backward(num_qubits, num_qubits))
        return family

    def new_session(self, num_qubits: int) -> EveSession:
        return EveSession(num_qubits=num_qubits)

    @abstractmethod
    def conclude(self, session: EveSession, view: PublicView) -> EveRecord:
        pass


class PerQubitAttack(AttackSpec):
    """Attack built from one RoundCoupling applied to every qubit with its own probe factor"""

    listens_to = ('sift_positions', 'info_positions', 'abort')

    def __init__(self, name: str, coupling: RoundCoupling, params: Optional[Dict[str, Any]] = None):
        self.name = name
        self._coupling = coupling
        self._params = dict(params or {})

    @property
    def params(self) -> Dict[str, Any]:
        return dict(self._params)

    def coupling(self) -> RoundCoupling:
        return self._coupling

    def probe_dim(self, num_qubits: int) -> int:
        return self._coupling.probe_dim ** num_qubits

    def _lifted(self, gate: Optional[UnitaryMatrix], num_qubits: int, k: int,
                returned: bool) -> List[ProbeOp]:
        if gate is None or _is_identity(gate):
            return []
        if self._coupling.measure_after_forward:
            raise ConfigurationError(f"{self.name} measures mid-channel and has no unitary global form")
        lifted = lift_to_probe_factor(gate, self._coupling.probe_dim, num_qubits, k)
        return [MatrixOp(lifted, (QubitRef(k, returned=returned), PROBE))]

    def parallel_forward(self, num_qubits: int) -> List[ProbeOp]:
        ops: List[ProbeOp] = []
        for k in range(1, num_qubits + 1):
            ops += self._lifted(self._coupling.forward, num_qubits, k, returned=False)
        return ops

    def parallel_backward(self, num_qubits: int, returned: int) -> List[ProbeOp]:
        ops: List[ProbeOp] = []
        for j in range(1, returned + 1):
            ops += self._lifted(self._coupling.backward, num_qubits, j, returned=True)
        return ops

    def sequential_family(self, num_qubits: int) -> List[List[ProbeOp]]:
        """U_1 = U_E^(1), U_k = U_E^(k) U_F^(k-1), U_{N+1} = U_F^(N)"""
        forward = [self._lifted(self._coupling.forward, num_qubits, k, returned=False)
                   for k in range(1, num_qubits + 1)]
        backward = [self._lifted(self._coupling.backward, num_qubits, k, returned=False)
                    for k in range(1, num_qubits + 1)]
        family = [forward[0]]
        for k in range(2, num_qubits + 1):
            family.append(backward[k - 2] + forward[k - 1])
        family.append(backward[num_qubits - 1])
        return family

    def conclude(self, session: EveSession, view: PublicView) -> EveRecord:
        d = self._coupling.probe_dim
        record = EveRecord(probe_outcome=session.combined_outcome(d))
        if d == 1:
            return record
        readings = session.position_outcomes(d)
        record.position_guesses = {k: readings[k] % 2 for k in view.sift_positions if k in readings}
        if view.abort is None and view.info_positions:
            record.guesses = ''.join(str(readings.get(k, 0) % 2) for k in view.info_positions)
        return record


def _is_identity(gate: UnitaryMatrix) -> bool:
    return bool(np.allclose(gate.entries, np.eye(gate.dim)))
