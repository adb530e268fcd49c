import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from app.models.errors import (
    ConfigurationError,
    DimensionError,
    InvalidStateError,
    NonBijectiveError,
    NonUnitaryError,
)
from app.models.quantum import PROBE_AXIS, BasisState, MeasurementBasis, StateVector, SubsystemLayout, UnitaryMatrix
from app.services.state_engine import (
    HADAMARD,
    StateEngine,
    controlled,
    controlled_on_probe_bit,
    lift_to_probe_factor,
    pauli_x,
    ry,
)

basis_states = st.sampled_from(list(BasisState))


def random_state(layout: SubsystemLayout, seed: int) -> StateVector:
    gen = np.random.default_rng(seed)
    amps = gen.normal(size=layout.total_dim) + 1j * gen.normal(size=layout.total_dim)
    return StateVector(layout, amps / np.linalg.norm(amps))


def test_prepare_product_state(engine):
    layout = SubsystemLayout(3, 2)
    state = engine.prepare(layout, 1, [BasisState.Z1, BasisState.X_PLUS])
    assert state.tensor.shape == (3, 2, 2)
    assert state.norm() == pytest.approx(1.0)
    # |1>_probe |1> |+>
    assert abs(state.tensor[1, 1, 0]) == pytest.approx(2 ** -0.5)
    assert abs(state.tensor[1, 1, 1]) == pytest.approx(2 ** -0.5)
    assert np.sum(np.abs(state.amplitudes) ** 2) == pytest.approx(1.0)


def test_prepare_rejects_bad_input(engine):
    with pytest.raises(ConfigurationError):
        engine.prepare(SubsystemLayout(2, 2), 0, [BasisState.Z0])
    with pytest.raises(ConfigurationError):
        engine.prepare(SubsystemLayout(2, 1), 2, [BasisState.Z0])


def test_layout_over_memory_budget():
    small = StateEngine(max_dim=16)
    with pytest.raises(DimensionError):
        small.prepare(SubsystemLayout(4, 3), 0, [BasisState.Z0] * 3)


def test_unnormalized_state_rejected():
    with pytest.raises(InvalidStateError):
        StateVector(SubsystemLayout(1, 1), np.array([1.0, 1.0]))


def test_non_unitary_rejected():
    with pytest.raises(NonUnitaryError):
        UnitaryMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_matrix_dimension_mismatch(engine):
    state = engine.prepare(SubsystemLayout(2, 2), 0, [BasisState.Z0, BasisState.Z1])
    with pytest.raises(DimensionError):
        engine.apply_unitary(state, HADAMARD, [1, 2])
    with pytest.raises(ConfigurationError):
        engine.apply_unitary(state, controlled(pauli_x()), [1, 1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), probe_dim=st.integers(1, 3), num_qubits=st.integers(1, 3))
def test_unitary_preserves_norm(seed, probe_dim, num_qubits):
    engine = StateEngine()
    layout = SubsystemLayout(probe_dim, num_qubits)
    state = random_state(layout, seed)
    gen = np.random.default_rng(seed)
    k = int(gen.integers(1, num_qubits + 1))
    u = UnitaryMatrix(stats.unitary_group.rvs(2 * probe_dim, random_state=seed))
    out = engine.apply_unitary(state, u, [k, PROBE_AXIS])
    assert out.norm() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), num_qubits=st.integers(1, 4))
def test_outcome_probabilities_complete(seed, num_qubits):
    engine = StateEngine()
    state = random_state(SubsystemLayout(3, num_qubits), seed)
    for axis in range(state.layout.num_axes):
        probs = engine.outcome_probabilities(state, axis)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(probs >= 0)


@settings(max_examples=30, deadline=None)
@given(states=st.lists(basis_states, min_size=1, max_size=4))
def test_hadamard_is_an_involution(states):
    engine = StateEngine()
    state = engine.prepare(SubsystemLayout(1, len(states)), 0, states)
    out = state
    for _ in range(2):
        out = engine.apply_unitary(out, HADAMARD, [1])
    assert np.allclose(out.amplitudes, state.amplitudes)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_permutation_keeps_amplitude_multiset(seed):
    engine = StateEngine()
    state = random_state(SubsystemLayout(2, 3), seed)
    perm = np.random.default_rng(seed).permutation(state.layout.total_dim)
    out = engine.apply_basis_permutation(state, perm)
    assert np.allclose(np.sort_complex(out.amplitudes), np.sort_complex(state.amplitudes))
    assert np.allclose(out.amplitudes[perm], state.amplitudes)


def test_non_bijective_map_rejected(engine):
    state = engine.prepare(SubsystemLayout(1, 2), 0, [BasisState.Z0, BasisState.Z0])
    with pytest.raises(NonBijectiveError):
        engine.apply_basis_permutation(state, np.array([0, 0, 1, 2]))
    with pytest.raises(NonBijectiveError):
        engine.apply_basis_permutation(state, np.array([0, 1, 2]))


def test_local_permutation_matches_unitary(engine):
    state = random_state(SubsystemLayout(2, 2), 7)
    by_perm = engine.apply_local_permutation(state, np.array([1, 0]), [2])
    by_gate = engine.apply_unitary(state, pauli_x(), [2])
    assert np.allclose(by_perm.amplitudes, by_gate.amplitudes)


def test_measurement_of_eigenstates_is_deterministic(engine, rng):
    state = engine.prepare(SubsystemLayout(1, 2), 0, [BasisState.Z1, BasisState.X_MINUS])
    for _ in range(20):
        z, _ = engine.measure_qubit(state, 1, MeasurementBasis.Z, rng)
        x, collapsed = engine.measure_qubit(state, 2, MeasurementBasis.X, rng)
        assert (z, x) == (1, 1)
        assert np.allclose(collapsed.amplitudes, state.amplitudes)


def test_plus_state_in_z_is_fair_coin(engine, rng):
    state = engine.prepare(SubsystemLayout(1, 1), 0, [BasisState.X_PLUS])
    outcomes = [engine.measure_qubit(state, 1, MeasurementBasis.Z, rng)[0] for _ in range(2000)]
    counts = np.bincount(outcomes, minlength=2)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_x_measurement_matches_hadamard_then_z(engine, rng):
    state = engine.prepare(SubsystemLayout(1, 1), 0, [BasisState.Z0])
    state = engine.apply_unitary(state, ry(1.0), [1])
    rotated = engine.apply_unitary(state, HADAMARD, [1])
    direct = [engine.measure_qubit(state, 1, MeasurementBasis.X, rng)[0] for _ in range(3000)]
    via_z = [engine.measure_qubit(rotated, 1, MeasurementBasis.Z, rng)[0] for _ in range(3000)]
    table = np.array([np.bincount(direct, minlength=2), np.bincount(via_z, minlength=2)])
    assert stats.chi2_contingency(table)[1] > 1e-3
    # P(+) = (1 + sin 1) / 2
    assert np.mean(direct) == pytest.approx((1 - np.sin(1.0)) / 2, abs=0.02)

    # H then X reads what Z reads on the unrotated state
    z_reads = [engine.measure_qubit(state, 1, MeasurementBasis.Z, rng)[0] for _ in range(3000)]
    x_after_h = [engine.measure_qubit(rotated, 1, MeasurementBasis.X, rng)[0] for _ in range(3000)]
    table = np.array([np.bincount(z_reads, minlength=2), np.bincount(x_after_h, minlength=2)])
    assert stats.chi2_contingency(table)[1] > 1e-3


def test_collapse_renormalizes(engine, rng):
    state = engine.prepare(SubsystemLayout(1, 1), 0, [BasisState.X_PLUS])
    bit, collapsed = engine.measure_qubit(state, 1, MeasurementBasis.Z, rng)
    assert collapsed.norm() == pytest.approx(1.0)
    assert abs(collapsed.amplitudes[bit]) == pytest.approx(1.0)


def test_reduced_density_of_entangled_probe(engine):
    state = engine.prepare(SubsystemLayout(2, 1), 0, [BasisState.X_PLUS])
    state = engine.apply_unitary(state, controlled(pauli_x()), [1, PROBE_AXIS])
    rho = engine.reduced_density(state, [PROBE_AXIS])
    assert np.allclose(rho.entries, np.eye(2) / 2)


def test_probe_reading_collapses_entangled_qubit(engine, rng):
    state = engine.prepare(SubsystemLayout(2, 1), 0, [BasisState.X_PLUS])
    state = engine.apply_unitary(state, controlled(pauli_x()), [1, PROBE_AXIS])
    for _ in range(10):
        probe, collapsed = engine.measure_probe(state, rng)
        qubit, _ = engine.measure_qubit(collapsed, 1, MeasurementBasis.Z, rng)
        assert qubit == probe


def test_trace_distance(engine):
    zero = engine.reduced_density(engine.prepare(SubsystemLayout(2, 1), 0, [BasisState.Z0]), [PROBE_AXIS])
    one = engine.reduced_density(engine.prepare(SubsystemLayout(2, 1), 1, [BasisState.Z0]), [PROBE_AXIS])
    assert engine.trace_distance(zero, one) == pytest.approx(1.0)
    assert engine.trace_distance(zero, zero) == pytest.approx(0.0, abs=1e-12)


def test_rotation_gate():
    assert np.allclose(ry(0.0).entries, np.eye(2))
    assert np.allclose(np.abs(ry(np.pi).entries), np.abs(pauli_x().entries))


def test_lift_to_probe_factor_acts_on_one_factor(engine):
    gate = lift_to_probe_factor(controlled(pauli_x()), 2, 3, 2)
    assert gate.dim == 16
    state = engine.prepare(SubsystemLayout(8, 1), 0, [BasisState.Z1])
    out = engine.apply_unitary(state, gate, [1, PROBE_AXIS])
    # factor 2 of (f1, f2, f3) flips: probe index 0b010
    assert abs(out.tensor[2, 1]) == pytest.approx(1.0)


def test_controlled_on_probe_bit_flips_the_named_bit():
    gate = controlled_on_probe_bit(pauli_x(), 2, 1)
    assert gate.dim == 8
    # basis index = 4*q + 2*p1 + p2; only q = 1 rows move
    assert gate.entries[6, 4] == 1
    assert gate.entries[5, 7] == 1
    assert gate.entries[1, 1] == 1
    with pytest.raises(DimensionError):
        controlled_on_probe_bit(controlled(pauli_x()), 2, 1)


def test_debug_json(engine):
    state = engine.prepare(SubsystemLayout(2, 1), 1, [BasisState.Z0])
    payload = json.loads(engine.state_to_debug_json(state))
    assert payload['layout'] == {'probe_dim': 2, 'num_qubits': 1, 'bob_register_len': 0}
    assert payload['amplitudes'] == [[2, 1.0, 0.0]]
