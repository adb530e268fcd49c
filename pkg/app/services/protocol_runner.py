from abc import ABC, abstractmethod
from typing import List, Optional

import numpy as np

from app.models.attack import AttackSpec
from app.models.errors import ConfigurationError, InsufficientBalancedBits
from app.models.protocol import (
    AbortReason,
    BobModel,
    CtrlResult,
    Outcome,
    OutcomeStatus,
    ProtocolKind,
    ProtocolParams,
    RoundChoices,
    Schedule,
    Transcript,
)
from app.models.quantum import MeasurementBasis
from app.services.info_selection import select_info_step7prime
from app.services.quantum_phase import QuantumPhase, QuantumResult
from app.services.state_engine import StateEngine
from app.utils.logger import setup_logger


def _bits(values: List[int]) -> str:
    return ''.join(str(b) for b in values)


class ProtocolRunner(ABC):
    """Shared classical part of every protocol: CTRL check, TEST check, INFO selection"""

    kind: ProtocolKind
    reorder: bool = False

    def __init__(self, engine: Optional[StateEngine] = None):
        self.logger = setup_logger(__name__)
        self.phase = QuantumPhase(engine)

    def num_qubits(self, params: ProtocolParams) -> int:
        return params.num_qubits

    def check_params(self, params: ProtocolParams) -> None:
        pass

    @abstractmethod
    def quantum(self, params: ProtocolParams, attack: AttackSpec, choices: RoundChoices,
                rng: np.random.Generator) -> QuantumResult:
        pass

    def record_announcements(self, transcript: Transcript, choices: RoundChoices,
                             quantum: QuantumResult) -> None:
        measured = choices.measured_positions
        transcript.bob_measured_bits = [quantum.bob_bits[k] for k in measured]

    def select_info(self, params: ProtocolParams, transcript: Transcript,
                    rng: np.random.Generator) -> List[int]:
        """Step 7: the first n bits of v; returns INFO positions"""
        if len(transcript.v_positions) < params.n:
            raise InsufficientBalancedBits(
                f"v holds {len(transcript.v_positions)} bits, INFO needs {params.n}"
            )
        transcript.info_indices_q = list(range(1, params.n + 1))
        return transcript.v_positions[:params.n]

    def run(self, params: ProtocolParams, attack: AttackSpec, rng: np.random.Generator,
            choices: Optional[RoundChoices] = None) -> Outcome:
        self.check_params(params)
        if choices is None:
            choices = RoundChoices.draw(self.num_qubits(params), rng, reorder=self.reorder)

        quantum = self.quantum(params, attack, choices, rng)
        transcript = Transcript(
            protocol=self.kind.value,
            alice_bases=[b.value for b in choices.alice_bases],
            alice_bits=list(choices.alice_bits),
            bob_actions=[a.value for a in choices.bob_actions],
        )
        self.record_announcements(transcript, choices, quantum)
        outcome = self._classical(params, choices, quantum, transcript, rng)
        outcome.eve_record = attack.conclude(quantum.session, transcript.public_view(attack.listens_to))
        self.logger.debug(
            f"{self.kind.value} run with {attack.name} on N={choices.num_qubits}: {outcome.status_label}"
        )
        return outcome

    def _classical(self, params: ProtocolParams, choices: RoundChoices, quantum: QuantumResult,
                   transcript: Transcript, rng: np.random.Generator) -> Outcome:
        outcome = Outcome(status=OutcomeStatus.COMPLETED, transcript=transcript,
                          category_counts=choices.category_counts())

        # Step 5: CTRL bits, Z and X error rates checked separately
        for k in choices.ctrl_positions:
            basis = choices.alice_bases[k - 1]
            result = CtrlResult(k, basis.value, choices.alice_bits[k - 1], quantum.returned_bits[k])
            transcript.ctrl_results.append(result)
            if basis == MeasurementBasis.Z:
                outcome.ctrl_bits_z += 1
                outcome.ctrl_errors_z += int(result.error)
            else:
                outcome.ctrl_bits_x += 1
                outcome.ctrl_errors_x += int(result.error)
        if outcome.ctrl_bits_z:
            outcome.ctrl_err_z = outcome.ctrl_errors_z / outcome.ctrl_bits_z
        if outcome.ctrl_bits_x:
            outcome.ctrl_err_x = outcome.ctrl_errors_x / outcome.ctrl_bits_x
        if max(outcome.ctrl_err_z, outcome.ctrl_err_x) > params.p_ctrl_threshold:
            return self._abort(outcome, AbortReason.CTRL_ERROR_RATE)

        # Step 6: TEST bits, a uniform n-subset of the SIFT bits
        sift = choices.sift_positions
        transcript.sift_positions = list(sift)
        if len(sift) < params.n:
            return self._abort(outcome, AbortReason.INSUFFICIENT_BALANCED_BITS)
        test = sorted(int(k) for k in rng.choice(sift, size=params.n, replace=False))
        transcript.test_indices = test
        transcript.test_values_bob = [quantum.bob_bits[k] for k in test]
        mismatches = sum(quantum.bob_bits[k] != choices.alice_bits[k - 1] for k in test)
        outcome.test_err = mismatches / params.n
        if outcome.test_err > params.p_test_threshold:
            return self._abort(outcome, AbortReason.TEST_ERROR_RATE)

        # Step 7: INFO string from the remaining SIFT bits v
        tested = set(test)
        transcript.v_positions = [k for k in sift if k not in tested]
        transcript.sift_string_v = [choices.alice_bits[k - 1] for k in transcript.v_positions]
        try:
            info_positions = self.select_info(params, transcript, rng)
        except InsufficientBalancedBits as e:
            self.logger.debug(f"INFO selection failed: {str(e)}")
            return self._abort(outcome, AbortReason.INSUFFICIENT_BALANCED_BITS)

        transcript.info_positions = info_positions
        alice_info = [choices.alice_bits[k - 1] for k in info_positions]
        transcript.info_string_y = alice_info
        outcome.alice_info = _bits(alice_info)
        outcome.bob_info = _bits([quantum.bob_bits[k] for k in info_positions])
        return outcome

    @staticmethod
    def _abort(outcome: Outcome, reason: AbortReason) -> Outcome:
        outcome.status = OutcomeStatus.ABORTED
        outcome.abort_reason = reason
        outcome.transcript.abort = reason.value
        return outcome


class MockProtocol(ProtocolRunner):
    """One qubit per round; SIFT qubits are consumed by Bob and never return"""

    kind = ProtocolKind.MOCK

    def num_qubits(self, params: ProtocolParams) -> int:
        return params.rounds

    def quantum(self, params, attack, choices, rng):
        return self.phase.run_mock(attack, choices, rng)


class RandomizationProtocol(ProtocolRunner):
    """Protocol 1 (first-n INFO rule) and Protocol 1' (balanced INFO rule)"""

    reorder = True

    def __init__(self, balanced_info: bool = False, engine: Optional[StateEngine] = None):
        super().__init__(engine)
        self.balanced_info = balanced_info
        self.kind = ProtocolKind.P1_PRIME if balanced_info else ProtocolKind.P1

    def check_params(self, params: ProtocolParams) -> None:
        if self.balanced_info and not params.epsilon < params.delta:
            raise ConfigurationError(
                f"Protocol 1' needs epsilon < delta, got epsilon={params.epsilon}, delta={params.delta}"
            )

    def quantum(self, params, attack, choices, rng):
        return self.phase.run_randomization(attack, choices, rng)

    def record_announcements(self, transcript, choices, quantum):
        super().record_announcements(transcript, choices, quantum)
        transcript.reflect_order_s = list(choices.reflect_order)

    def select_info(self, params, transcript, rng):
        if not self.balanced_info:
            return super().select_info(params, transcript, rng)
        selection = select_info_step7prime(transcript.sift_string_v, params.n, params.epsilon, rng)
        transcript.balanced_indices_e = selection.e_indices
        transcript.info_indices_q = selection.q
        return [transcript.v_positions[i - 1] for i in selection.q]


class MeasureResendProtocol(ProtocolRunner):
    """Protocol 2: Bob measures his SIFT qubits in Z and resends what he saw"""

    kind = ProtocolKind.P2

    def __init__(self, bob_model: Optional[BobModel] = None, engine: Optional[StateEngine] = None):
        super().__init__(engine)
        self.bob_model = bob_model

    def quantum(self, params, attack, choices, rng):
        bob_model = self.bob_model or params.bob_model
        return self.phase.run_measure_resend(attack, choices, rng, Schedule(params.schedule), bob_model)

    def record_announcements(self, transcript, choices, quantum):
        super().record_announcements(transcript, choices, quantum)
        transcript.measured_set_m = choices.measured_positions


def run_mock(params: ProtocolParams, attack: AttackSpec, rng: np.random.Generator,
             choices: Optional[RoundChoices] = None) -> Outcome:
    return MockProtocol().run(params, attack, rng, choices)


def run_protocol1(params: ProtocolParams, attack: AttackSpec, rng: np.random.Generator,
                  choices: Optional[RoundChoices] = None) -> Outcome:
    return RandomizationProtocol().run(params, attack, rng, choices)


def run_protocol1_prime(params: ProtocolParams, attack: AttackSpec, rng: np.random.Generator,
                        choices: Optional[RoundChoices] = None) -> Outcome:
    return RandomizationProtocol(balanced_info=True).run(params, attack, rng, choices)


def run_protocol2(params: ProtocolParams, attack: AttackSpec, rng: np.random.Generator,
                  choices: Optional[RoundChoices] = None) -> Outcome:
    return MeasureResendProtocol().run(params, attack, rng, choices)


def get_runner(protocol: ProtocolKind, engine: Optional[StateEngine] = None) -> ProtocolRunner:
    protocol = ProtocolKind(protocol)
    if protocol == ProtocolKind.MOCK:
        return MockProtocol(engine)
    if protocol == ProtocolKind.P1:
        return RandomizationProtocol(engine=engine)
    if protocol == ProtocolKind.P1_PRIME:
        return RandomizationProtocol(balanced_info=True, engine=engine)
    return MeasureResendProtocol(engine=engine)


def run_protocol(protocol: ProtocolKind, params: ProtocolParams, attack: AttackSpec,
                 rng: np.random.Generator, engine: Optional[StateEngine] = None) -> Outcome:
    return get_runner(protocol, engine).run(params, attack, rng)
