from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np

from app.config import Config
from app.models.errors import ConfigurationError, InvalidStateError, NonUnitaryError

# Axis of Eve's probe in every state tensor; qubit k (1-based) sits on axis k and
# Bob register qubit j on axis num_qubits + j.
PROBE_AXIS = 0

_SQRT_HALF = 1.0 / np.sqrt(2.0)


class MeasurementBasis(str, Enum):
    Z = "Z"
    X = "X"


class BasisState(str, Enum):
    """Single-qubit preparations used by Alice"""
    Z0 = "Z0"
    Z1 = "Z1"
    X_PLUS = "XPlus"
    X_MINUS = "XMinus"

    @classmethod
    def from_basis_bit(cls, basis: MeasurementBasis, bit: int) -> "BasisState":
        if MeasurementBasis(basis) == MeasurementBasis.Z:
            return cls.Z1 if bit else cls.Z0
        return cls.X_MINUS if bit else cls.X_PLUS

    @property
    def basis(self) -> MeasurementBasis:
        return MeasurementBasis.Z if self in (BasisState.Z0, BasisState.Z1) else MeasurementBasis.X

    @property
    def bit(self) -> int:
        return 1 if self in (BasisState.Z1, BasisState.X_MINUS) else 0

    @property
    def vector(self) -> np.ndarray:
        if self == BasisState.Z0:
            return np.array([1.0, 0.0], dtype=complex)
        if self == BasisState.Z1:
            return np.array([0.0, 1.0], dtype=complex)
        if self == BasisState.X_PLUS:
            return np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex)
        return np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex)


@dataclass(frozen=True)
class SubsystemLayout:
    """Eve probe (dimension probe_dim) x N qubits x r Bob register qubits"""
    probe_dim: int
    num_qubits: int
    bob_register_len: int = 0

    def __post_init__(self):
        if self.probe_dim < 1:
            raise ConfigurationError(f"probe_dim must be positive, got {self.probe_dim}")
        if self.num_qubits < 0 or self.bob_register_len < 0:
            raise ConfigurationError(
                f"qubit counts must be non-negative, got N={self.num_qubits}, r={self.bob_register_len}"
            )

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.probe_dim,) + (2,) * (self.num_qubits + self.bob_register_len)

    @property
    def total_dim(self) -> int:
        return self.probe_dim * 2 ** (self.num_qubits + self.bob_register_len)

    @property
    def num_axes(self) -> int:
        return 1 + self.num_qubits + self.bob_register_len

    def qubit_axis(self, k: int) -> int:
        if not 1 <= k <= self.num_qubits:
            raise ConfigurationError(f"qubit index {k} outside 1..{self.num_qubits}")
        return k

    def bob_axis(self, j: int) -> int:
        if not 1 <= j <= self.bob_register_len:
            raise ConfigurationError(f"register index {j} outside 1..{self.bob_register_len}")
        return self.num_qubits + j

    def axis_dim(self, axis: int) -> int:
        if not 0 <= axis < self.num_axes:
            raise ConfigurationError(f"subsystem {axis} outside 0..{self.num_axes - 1}")
        return self.probe_dim if axis == PROBE_AXIS else 2

    def to_dict(self) -> Dict[str, int]:
        return {
            'probe_dim': self.probe_dim,
            'num_qubits': self.num_qubits,
            'bob_register_len': self.bob_register_len,
        }


@dataclass(frozen=True)
class UnitaryMatrix:
    """Square matrix checked for unitarity on construction"""
    entries: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.entries, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise NonUnitaryError(f"expected a square matrix, got shape {matrix.shape}")
        product = matrix.conj().T @ matrix
        deviation = np.max(np.abs(product - np.eye(matrix.shape[0]))) if matrix.size else 0.0
        if deviation > Config.UNITARITY_TOLERANCE:
            raise NonUnitaryError(f"U^dagger U deviates from identity by {deviation:.3e}")
        object.__setattr__(self, 'entries', matrix)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self.entries.conj().T)

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "UnitaryMatrix":
        """Parse {dim, entries: [[re, im], ...]} with entries in row-major order"""
        try:
            dim = int(payload['dim'])
            flat = [complex(float(re), float(im)) for re, im in payload['entries']]
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigurationError(f"malformed matrix payload: {e}") from e
        if len(flat) != dim * dim:
            raise ConfigurationError(f"expected {dim * dim} entries, got {len(flat)}")
        return cls(np.array(flat, dtype=complex).reshape(dim, dim))

    def to_json(self) -> Dict[str, Any]:
        return {
            'dim': self.dim,
            'entries': [[float(z.real), float(z.imag)] for z in self.entries.reshape(-1)],
        }


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > Config.HERMITIAN_TOLERANCE:
            raise InvalidStateError("density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > Config.NORM_TOLERANCE:
            raise InvalidStateError(f"density matrix trace is {trace}, expected 1")
        smallest = np.linalg.eigvalsh(rho).min()
        if smallest < Config.PSD_TOLERANCE:
            raise InvalidStateError(f"density matrix has negative eigenvalue {smallest:.3e}")
        object.__setattr__(self, 'entries', rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass
class StateVector:
    """Pure state; index order is probe (slowest), qubits 1..N, then Bob's register"""
    layout: SubsystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.layout.total_dim:
            raise InvalidStateError(
                f"{self.amplitudes.size} amplitudes for a layout of dimension {self.layout.total_dim}"
            )
        norm = self.norm()
        if abs(norm - 1.0) > Config.NORM_TOLERANCE:
            raise InvalidStateError(f"state norm is {norm}, expected 1")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.amplitudes.copy())

    def nonzero_entries(self, cutoff: float = Config.DUMP_AMPLITUDE_CUTOFF) -> List[Tuple[int, float, float]]:
        indices = np.flatnonzero(np.abs(self.amplitudes) > cutoff)
        return [(int(b), float(self.amplitudes[b].real), float(self.amplitudes[b].imag)) for b in indices]
