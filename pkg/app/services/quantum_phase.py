from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.models.attack import AttackSpec, EveSession, ProbeOp, RoundCoupling
from app.models.errors import ConfigurationError
from app.models.protocol import BobModel, RoundChoices, Schedule
from app.models.quantum import (
    PROBE_AXIS,
    BasisState,
    MeasurementBasis,
    StateVector,
    SubsystemLayout,
)
from app.services.state_engine import StateEngine, controlled, pauli_x
from app.utils.logger import setup_logger

CNOT = controlled(pauli_x())

BobStep = Callable[[StateVector, int], StateVector]


@dataclass
class QuantumResult:
    """Measurement record of the quantum part of one run"""
    bob_bits: Dict[int, int] = field(default_factory=dict)
    returned_bits: Dict[int, int] = field(default_factory=dict)
    session: Optional[EveSession] = None
    path: str = "local"


class QuantumPhase:
    """Runs the qubit exchange of each protocol against an attack.

    Attacks with a per-qubit coupling keep the global state a product over
    rounds, so each round is simulated on its own (probe, qubit) pair.
    Everything else runs on the dense global state.
    """

    def __init__(self, engine: Optional[StateEngine] = None):
        self.logger = setup_logger(__name__)
        self.engine = engine or StateEngine()

    # -- per-round path -------------------------------------------------

    def _local_round(self, coupling: RoundCoupling, position: int, choices: RoundChoices,
                     returns: bool, sift: bool, rng: np.random.Generator, session: EveSession,
                     result: QuantumResult, no_return_signal: bool = False,
                     bob_model: BobModel = BobModel.IMMEDIATE) -> None:
        engine = self.engine
        register = sift and bob_model == BobModel.REGISTER
        if coupling.is_identity and not register:
            self._identity_round(position, choices, returns, sift, rng, result)
            return
        layout = SubsystemLayout(coupling.probe_dim, 1, 1 if register else 0)
        state = engine.prepare(layout, 0, [choices.basis_state(position)])
        qubit = layout.qubit_axis(1)

        probe_read: Optional[int] = None
        if coupling.forward is not None:
            state = engine.apply_unitary(state, coupling.forward, [qubit, PROBE_AXIS])
        if coupling.measure_after_forward:
            probe_read, state = engine.measure_probe(state, rng)

        if sift:
            if register:
                state = engine.apply_unitary(state, CNOT, [qubit, layout.bob_axis(1)])
            else:
                result.bob_bits[position], state = engine.measure_qubit(state, 1, MeasurementBasis.Z, rng)

        if returns:
            if coupling.backward is not None:
                state = engine.apply_unitary(state, coupling.backward, [qubit, PROBE_AXIS])
            basis = choices.alice_bases[position - 1]
            result.returned_bits[position], state = engine.measure_qubit(state, 1, basis, rng)
        elif no_return_signal and coupling.read_probe_on_no_return and probe_read is None:
            probe_read, state = engine.measure_probe(state, rng)
            session.record_early_read(position, probe_read)

        if register:
            result.bob_bits[position], state = engine.measure_subsystem(state, layout.bob_axis(1), rng)
        if probe_read is None and coupling.probe_dim > 1:
            probe_read, state = engine.measure_probe(state, rng)
        if probe_read is not None:
            session.record_round(position, probe_read)

    @staticmethod
    def _identity_round(position: int, choices: RoundChoices, returns: bool, sift: bool,
                        rng: np.random.Generator, result: QuantumResult) -> None:
        """Untouched channel: Born-rule outcomes follow from the basis states directly"""
        prepared = choices.basis_state(position)
        z_bit: Optional[int] = prepared.bit if prepared.basis == MeasurementBasis.Z else None
        if sift:
            if z_bit is None:
                z_bit = int(rng.integers(0, 2))
            result.bob_bits[position] = z_bit
        if returns:
            if not sift:
                result.returned_bits[position] = prepared.bit
            elif prepared.basis == MeasurementBasis.Z:
                result.returned_bits[position] = z_bit
            else:
                result.returned_bits[position] = int(rng.integers(0, 2))

    def _require_coupling(self, attack: AttackSpec) -> RoundCoupling:
        coupling = attack.coupling()
        if coupling is None:
            raise ConfigurationError(
                f"attack {attack.name} has no per-qubit form; the mock protocol sends one qubit per round"
            )
        return coupling

    # -- global path ----------------------------------------------------

    def _apply_ops(self, state: StateVector, ops: Sequence[ProbeOp],
                   slots: Optional[Sequence[int]] = None) -> StateVector:
        for op in ops:
            state = op.apply(self.engine, state, slots)
        return state

    def _global_layout(self, attack: AttackSpec, num_qubits: int, register_len: int = 0) -> SubsystemLayout:
        layout = SubsystemLayout(attack.probe_dim(num_qubits), num_qubits, register_len)
        self.engine.check_layout(layout)
        return layout

    def _evolve_protocol2(self, state: StateVector, attack: AttackSpec, schedule: Schedule,
                          bob_step: BobStep) -> StateVector:
        n = state.layout.num_qubits
        slots = list(range(1, n + 1))
        if Schedule(schedule) == Schedule.PARALLEL:
            state = self._apply_ops(state, attack.parallel_forward(n), slots)
            for k in range(1, n + 1):
                state = bob_step(state, k)
            return self._apply_ops(state, attack.parallel_backward(n, n), slots)

        family = attack.sequential_family(n)
        if len(family) != n + 1:
            raise ConfigurationError(f"sequential family must hold {n + 1} steps, got {len(family)}")
        for k in range(1, n + 1):
            state = self._apply_ops(state, family[k - 1], slots)
            state = bob_step(state, k)
        return self._apply_ops(state, family[n], slots)

    def _register_step(self, measured: Sequence[int]) -> BobStep:
        """M_m: copies each measured qubit into its own Bob register qubit"""
        register_index = {k: j + 1 for j, k in enumerate(measured)}

        def step(state: StateVector, k: int) -> StateVector:
            if k not in register_index:
                return state
            axes = [state.layout.qubit_axis(k), state.layout.bob_axis(register_index[k])]
            return self.engine.apply_unitary(state, CNOT, axes)

        return step

    def coherent_protocol2(self, attack: AttackSpec, bits: Sequence[int], measured: Sequence[int],
                           schedule: Schedule = Schedule.PARALLEL) -> StateVector:
        """Final |F_i>|i>|i_m> for a computational input i, Bob acting as M_m"""
        n = len(bits)
        measured = sorted(measured)
        layout = self._global_layout(attack, n, len(measured))
        state = self.engine.prepare(layout, 0, [BasisState.from_basis_bit(MeasurementBasis.Z, b) for b in bits])
        return self._evolve_protocol2(state, attack, schedule, self._register_step(measured))

    def coherent_protocol1(self, attack: AttackSpec, bits: Sequence[int],
                           reflect_order: Sequence[int]) -> StateVector:
        """Final state for a computational input i when Bob reflects `reflect_order` and keeps the rest in M"""
        n = len(bits)
        measured = sorted(set(range(1, n + 1)) - set(reflect_order))
        layout = self._global_layout(attack, n, len(measured))
        state = self.engine.prepare(layout, 0, [BasisState.from_basis_bit(MeasurementBasis.Z, b) for b in bits])
        state = self._apply_ops(state, attack.parallel_forward(n))
        step = self._register_step(measured)
        for k in measured:
            state = step(state, k)
        return self._apply_ops(state, attack.parallel_backward(n, len(reflect_order)), list(reflect_order))

    def _finish_global(self, state: StateVector, choices: RoundChoices, returned: Sequence[int],
                       rng: np.random.Generator, result: QuantumResult) -> StateVector:
        for k in sorted(returned):
            basis = choices.alice_bases[k - 1]
            result.returned_bits[k], state = self.engine.measure_qubit(state, k, basis, rng)
        return state

    # -- protocols ------------------------------------------------------

    def run_mock(self, attack: AttackSpec, choices: RoundChoices, rng: np.random.Generator) -> QuantumResult:
        coupling = self._require_coupling(attack)
        session = attack.new_session(choices.num_qubits)
        result = QuantumResult(session=session)
        ctrl = set(choices.ctrl_positions)
        for k in range(1, choices.num_qubits + 1):
            self._local_round(coupling, k, choices, returns=k in ctrl, sift=k not in ctrl,
                              rng=rng, session=session, result=result, no_return_signal=True)
        return result

    def run_randomization(self, attack: AttackSpec, choices: RoundChoices,
                          rng: np.random.Generator) -> QuantumResult:
        """Protocol 1 family: Bob measures his SIFT qubits and reflects the rest in his announced order"""
        n = choices.num_qubits
        session = attack.new_session(n)
        coupling = attack.coupling()
        if coupling is not None and not coupling.acts_backward:
            result = QuantumResult(session=session)
            ctrl = set(choices.ctrl_positions)
            for k in range(1, n + 1):
                self._local_round(coupling, k, choices, returns=k in ctrl, sift=k not in ctrl,
                                  rng=rng, session=session, result=result)
            return result

        result = QuantumResult(session=session, path="global")
        layout = self._global_layout(attack, n)
        self.logger.debug(f"Global randomization run of {attack.name} on dimension {layout.total_dim}")
        state = self.engine.prepare(layout, 0, choices.states())
        state = self._apply_ops(state, attack.parallel_forward(n))
        for k in choices.measured_positions:
            result.bob_bits[k], state = self.engine.measure_qubit(state, k, MeasurementBasis.Z, rng)
        slots = list(choices.reflect_order)
        state = self._apply_ops(state, attack.parallel_backward(n, len(slots)), slots)
        state = self._finish_global(state, choices, slots, rng, result)
        outcome, _ = self.engine.measure_probe(state, rng)
        session.record_probe(outcome)
        return result

    def run_measure_resend(self, attack: AttackSpec, choices: RoundChoices, rng: np.random.Generator,
                           schedule: Schedule = Schedule.PARALLEL,
                           bob_model: BobModel = BobModel.IMMEDIATE) -> QuantumResult:
        """Protocol 2: every qubit returns; Bob measures and resends his SIFT qubits"""
        n = choices.num_qubits
        session = attack.new_session(n)
        measured = choices.measured_positions
        coupling = attack.coupling()
        if coupling is not None:
            result = QuantumResult(session=session)
            sift = set(measured)
            for k in range(1, n + 1):
                self._local_round(coupling, k, choices, returns=True, sift=k in sift, rng=rng,
                                  session=session, result=result, bob_model=bob_model)
            return result

        result = QuantumResult(session=session, path="global")
        register = BobModel(bob_model) == BobModel.REGISTER
        layout = self._global_layout(attack, n, len(measured) if register else 0)
        self.logger.debug(f"Global measure-resend run of {attack.name} on dimension {layout.total_dim}")
        state = self.engine.prepare(layout, 0, choices.states())

        if register:
            bob_step = self._register_step(measured)
        else:
            sift = set(measured)

            def bob_step(s: StateVector, k: int) -> StateVector:
                if k not in sift:
                    return s
                result.bob_bits[k], s = self.engine.measure_qubit(s, k, MeasurementBasis.Z, rng)
                return s

        state = self._evolve_protocol2(state, attack, schedule, bob_step)
        state = self._finish_global(state, choices, range(1, n + 1), rng, result)
        if register:
            for j, k in enumerate(measured, start=1):
                result.bob_bits[k], state = self.engine.measure_subsystem(state, layout.bob_axis(j), rng)
        outcome, _ = self.engine.measure_probe(state, rng)
        session.record_probe(outcome)
        return result


def input_bits(index: int, num_qubits: int) -> List[int]:
    """Bits of a computational input, qubit 1 first"""
    return [(index >> (num_qubits - k)) & 1 for k in range(1, num_qubits + 1)]


def input_label(bits: Sequence[int]) -> str:
    return ''.join(str(b) for b in bits)

