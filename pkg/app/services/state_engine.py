import json
from functools import reduce
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app.config import Config
from app.models.errors import (
    ConfigurationError,
    DimensionError,
    NonBijectiveError,
)
from app.models.quantum import (
    PROBE_AXIS,
    BasisState,
    DensityMatrix,
    MeasurementBasis,
    StateVector,
    SubsystemLayout,
    UnitaryMatrix,
)
from app.utils.logger import setup_logger


def identity(dim: int) -> UnitaryMatrix:
    return UnitaryMatrix(np.eye(dim, dtype=complex))


def hadamard() -> UnitaryMatrix:
    return UnitaryMatrix(np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0))


def pauli_x() -> UnitaryMatrix:
    return UnitaryMatrix(np.array([[0, 1], [1, 0]], dtype=complex))


def ry(angle: float) -> UnitaryMatrix:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return UnitaryMatrix(np.array([[c, -s], [s, c]], dtype=complex))


def controlled(gate: UnitaryMatrix) -> UnitaryMatrix:
    """Controlled gate on (control qubit, target); the control is the first target"""
    d = gate.dim
    matrix = np.eye(2 * d, dtype=complex)
    matrix[d:, d:] = gate.entries
    return UnitaryMatrix(matrix)


def controlled_on_probe_bit(gate: UnitaryMatrix, probe_bits: int, bit: int) -> UnitaryMatrix:
    """Gate on targets (transit qubit, probe) applying `gate` to one probe bit when the qubit is 1.

    The probe holds `probe_bits` qubits; bit 1 is the most significant.
    """
    if gate.dim != 2:
        raise DimensionError(f"expected a single-qubit gate, got dimension {gate.dim}")
    return lift_to_probe_factor(controlled(gate), 2, probe_bits, bit)


def lift_to_probe_factor(gate: UnitaryMatrix, factor_dim: int, num_factors: int,
                         index: int) -> UnitaryMatrix:
    """Lift a gate on (qubit, one probe factor) to (qubit, whole probe).

    The probe is a product of `num_factors` factors of dimension `factor_dim`,
    factor 1 being the slowest-varying.
    """
    if gate.dim != 2 * factor_dim:
        raise DimensionError(f"gate of dimension {gate.dim} does not act on a qubit and a {factor_dim}-level factor")
    if not 1 <= index <= num_factors:
        raise ConfigurationError(f"probe factor {index} outside 1..{num_factors}")
    left = np.eye(factor_dim ** (index - 1))
    right = np.eye(factor_dim ** (num_factors - index))
    g = gate.entries.reshape(2, factor_dim, 2, factor_dim)
    lifted = np.einsum('abcd,ij,kl->aibkcjdl', g, left, right)
    size = 2 * factor_dim ** num_factors
    return UnitaryMatrix(lifted.reshape(size, size))


HADAMARD = hadamard()


class StateEngine:
    """Exact statevector operations over probe x N qubits x Bob register"""

    def __init__(self, max_dim: Optional[int] = None):
        self.logger = setup_logger(__name__)
        self.max_dim = Config.MAX_STATE_DIM if max_dim is None else int(max_dim)

    def check_layout(self, layout: SubsystemLayout) -> None:
        if layout.total_dim > self.max_dim:
            raise DimensionError(
                f"layout {layout.to_dict()} has dimension {layout.total_dim}, "
                f"above the configured maximum {self.max_dim}"
            )

    def prepare(self, layout: SubsystemLayout, probe_init: int,
                qubit_states: Sequence[BasisState], bob_init: int = 0) -> StateVector:
        """|probe_init> (x) |phi> (x) |0...0>"""
        if len(qubit_states) != layout.num_qubits:
            raise ConfigurationError(
                f"{len(qubit_states)} qubit states for a layout of {layout.num_qubits} qubits"
            )
        if not 0 <= probe_init < layout.probe_dim:
            raise ConfigurationError(f"probe_init {probe_init} outside 0..{layout.probe_dim - 1}")
        if bob_init != 0:
            raise ConfigurationError("Bob's register always starts in |0...0>")
        self.check_layout(layout)

        probe = np.zeros(layout.probe_dim, dtype=complex)
        probe[probe_init] = 1.0
        register = np.zeros(2 ** layout.bob_register_len, dtype=complex)
        register[0] = 1.0
        factors = [probe] + [BasisState(s).vector for s in qubit_states] + [register]
        return StateVector(layout, reduce(np.kron, factors))

    def _target_dims(self, layout: SubsystemLayout, targets: Sequence[int]) -> List[int]:
        if len(set(targets)) != len(targets):
            raise ConfigurationError(f"targets must be distinct, got {list(targets)}")
        return [layout.axis_dim(a) for a in targets]

    def apply_unitary(self, state: StateVector, u: UnitaryMatrix, targets: Sequence[int]) -> StateVector:
        targets = list(targets)
        t_dims = self._target_dims(state.layout, targets)
        if u.dim != int(np.prod(t_dims)):
            raise DimensionError(f"matrix of dimension {u.dim} cannot act on targets of dims {t_dims}")

        k = len(targets)
        gate = u.entries.reshape(t_dims + t_dims)
        out = np.tensordot(gate, state.tensor, axes=(list(range(k, 2 * k)), targets))
        out = np.moveaxis(out, list(range(k)), targets)
        return StateVector(state.layout, out.reshape(-1))

    @staticmethod
    def _check_bijection(perm: np.ndarray, size: int) -> np.ndarray:
        perm = np.asarray(perm, dtype=np.int64).reshape(-1)
        if perm.size != size:
            raise NonBijectiveError(f"map has {perm.size} entries, expected {size}")
        if perm.size and (perm.min() < 0 or perm.max() >= size):
            raise NonBijectiveError("map leaves the index range")
        if np.any(np.bincount(perm, minlength=size) != 1):
            raise NonBijectiveError("map is not a bijection")
        return perm

    def apply_basis_permutation(self, state: StateVector, perm: np.ndarray) -> StateVector:
        """New amplitude at perm[b] is the old amplitude at b"""
        perm = self._check_bijection(perm, state.layout.total_dim)
        out = np.empty_like(state.amplitudes)
        out[perm] = state.amplitudes
        return StateVector(state.layout, out)

    def apply_local_permutation(self, state: StateVector, perm: np.ndarray,
                                targets: Sequence[int]) -> StateVector:
        """Basis permutation acting on the joint standard basis of `targets` only"""
        targets = list(targets)
        t_dims = self._target_dims(state.layout, targets)
        size = int(np.prod(t_dims))
        perm = self._check_bijection(perm, size)

        k = len(targets)
        moved = np.moveaxis(state.tensor, targets, list(range(k)))
        rest_shape = moved.shape[k:]
        rows = moved.reshape(size, -1)
        out = np.empty_like(rows)
        out[perm] = rows
        out = np.moveaxis(out.reshape(tuple(t_dims) + rest_shape), list(range(k)), targets)
        return StateVector(state.layout, out.reshape(-1))

    def outcome_probabilities(self, state: StateVector, axis: int) -> np.ndarray:
        dims = state.layout.dims
        d = state.layout.axis_dim(axis)
        view = state.amplitudes.reshape(int(np.prod(dims[:axis])), d, -1)
        return (np.abs(view) ** 2).sum(axis=(0, 2))

    def measure_subsystem(self, state: StateVector, axis: int,
                          rng: np.random.Generator) -> Tuple[int, StateVector]:
        """Standard-basis measurement of one subsystem; returns (outcome, collapsed state)"""
        probs = self.outcome_probabilities(state, axis)
        allowed = np.where(probs < Config.IMPOSSIBLE_OUTCOME, 0.0, probs)
        cumulative = np.cumsum(allowed / allowed.sum())
        outcome = int(np.searchsorted(cumulative, rng.random(), side='right'))
        if outcome >= len(probs) or allowed[outcome] == 0.0:
            outcome = int(np.flatnonzero(allowed)[-1])

        dims = state.layout.dims
        view = state.amplitudes.reshape(int(np.prod(dims[:axis])), dims[axis], -1)
        collapsed = np.zeros_like(view)
        collapsed[:, outcome, :] = view[:, outcome, :] / np.sqrt(probs[outcome])
        return outcome, StateVector(state.layout, collapsed.reshape(-1))

    def measure_qubit(self, state: StateVector, qubit_index: int, basis: MeasurementBasis,
                      rng: np.random.Generator) -> Tuple[int, StateVector]:
        axis = state.layout.qubit_axis(qubit_index)
        if MeasurementBasis(basis) == MeasurementBasis.Z:
            return self.measure_subsystem(state, axis, rng)
        rotated = self.apply_unitary(state, HADAMARD, [axis])
        bit, collapsed = self.measure_subsystem(rotated, axis, rng)
        return bit, self.apply_unitary(collapsed, HADAMARD, [axis])

    def measure_probe(self, state: StateVector, rng: np.random.Generator) -> Tuple[int, StateVector]:
        return self.measure_subsystem(state, PROBE_AXIS, rng)

    def reduced_density(self, state: StateVector, keep: Sequence[int]) -> DensityMatrix:
        keep = list(keep)
        if not keep:
            raise ConfigurationError("reduced_density needs at least one subsystem to keep")
        dims = self._target_dims(state.layout, keep)
        moved = np.moveaxis(state.tensor, keep, list(range(len(keep))))
        rows = moved.reshape(int(np.prod(dims)), -1)
        rho = rows @ rows.conj().T
        return DensityMatrix(rho / np.trace(rho).real)

    def trace_distance(self, a: DensityMatrix, b: DensityMatrix) -> float:
        if a.dim != b.dim:
            raise DimensionError(f"cannot compare density matrices of dims {a.dim} and {b.dim}")
        eigenvalues = linalg.eigvalsh(a.entries - b.entries)
        return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(eigenvalues)))))

    def state_to_debug_json(self, state: StateVector) -> str:
        payload: Dict[str, Any] = {
            'layout': state.layout.to_dict(),
            'amplitudes': [list(entry) for entry in state.nonzero_entries()],
        }
        return json.dumps(payload, sort_keys=True)
