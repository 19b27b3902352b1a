import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import unitary_group

import qcore
from eigenbasis import EigenbasisSpec, Family, eigenbasis
from errors import ParameterError, ResourceError, StructuralError
from qcore import Gate, Party, QubitRef


def test_make_state_sets_labelled_amplitude(two_qubits):
    state = qcore.make_state(two_qubits, "01")
    assert state.amplitudes[1] == 1
    assert np.count_nonzero(state.amplitudes) == 1


def test_make_state_rejects_wrong_length(two_qubits):
    with pytest.raises(StructuralError):
        qcore.make_state(two_qubits, "010")


def test_register_cap():
    register = [QubitRef(f"q{i}", Party.ALICE) for i in range(15)]
    with pytest.raises(ResourceError):
        qcore.make_state(register, "0" * 15)


def test_duplicate_names_rejected():
    with pytest.raises(StructuralError):
        qcore.make_state([QubitRef("A", Party.ALICE), QubitRef("A", Party.BOB)], "00")


def test_sigma_x_flips_zero():
    register = [QubitRef("A", Party.ALICE)]
    state = qcore.apply_gate(qcore.make_state(register, "0"), Gate(qcore.pauli("x"), ("A",)))
    assert np.allclose(state.amplitudes, [0, 1])


def test_controlled_sigma_y_on_one_zero():
    register = [QubitRef("b", Party.BOB), QubitRef("B", Party.BOB)]
    state = qcore.make_state(register, "10")
    out = qcore.apply_gate(state, Gate(qcore.controlled(qcore.pauli("y")), ("b", "B")))
    assert np.allclose(out.amplitudes, [0, 0, 0, 1j])


def test_quarter_rotations_compose():
    register = [QubitRef("B", Party.BOB)]
    state = qcore.make_state(register, "0")
    gate = Gate(qcore.rotation("y", math.pi / 4), ("B",))
    out = qcore.apply_gate(qcore.apply_gate(state, gate), gate)
    assert np.allclose(out.amplitudes, [0, -1], atol=1e-12)


@pytest.mark.parametrize("axis", ["x", "y", "z"])
@pytest.mark.parametrize("angle", [0.0, 0.3, math.pi / 8, 2.1])
def test_rotation_matches_matrix_exponential(axis, angle):
    assert np.allclose(qcore.rotation(axis, angle), expm(1j * angle * qcore.pauli(axis)), atol=1e-12)


def test_gate_targets_act_in_register_order(two_qubits):
    state = qcore.make_state(two_qubits, "10")
    out = qcore.apply_gate(state, Gate(qcore.controlled(qcore.pauli("x")), ("B", "A")))
    assert np.allclose(out.amplitudes, state.amplitudes)
    out = qcore.apply_gate(state, Gate(qcore.controlled(qcore.pauli("x")), ("A", "B")))
    assert out.amplitudes[3] == 1


def test_non_unitary_gate_rejected(two_qubits):
    state = qcore.make_state(two_qubits, "00")
    with pytest.raises(ParameterError):
        qcore.apply_gate(state, Gate(np.array([[1, 1], [0, 1]]), ("A",)))


def test_duplicate_targets_rejected(two_qubits):
    state = qcore.make_state(two_qubits, "00")
    with pytest.raises(StructuralError):
        qcore.apply_gate(state, Gate(np.eye(4), ("A", "A")))


@pytest.mark.parametrize("seed", range(5))
def test_random_unitaries_preserve_norm(seed, two_qubits):
    rng = np.random.default_rng(seed)
    amplitudes = rng.normal(size=4) + 1j * rng.normal(size=4)
    state = qcore.from_amplitudes(two_qubits, amplitudes, normalize=True)
    out = qcore.apply_gate(state, Gate(unitary_group.rvs(4, random_state=rng), ("B", "A")))
    assert abs(out.norm() ** 2 - 1) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_gate_then_inverse_restores(seed, two_qubits):
    rng = np.random.default_rng(seed)
    state = qcore.from_amplitudes(two_qubits, rng.normal(size=4) + 1j * rng.normal(size=4), normalize=True)
    unitary = unitary_group.rvs(4, random_state=rng)
    there = qcore.apply_gate(state, Gate(unitary, ("B", "A")))
    back = qcore.apply_gate(there, Gate(unitary.conj().T, ("B", "A")))
    assert np.max(np.abs(back.amplitudes - state.amplitudes)) < 1e-12


def test_explicit_zero_tolerance_is_honoured():
    gate = Gate(np.diag([1.0, 1.0 + 1e-13]), ("A",))
    assert gate.is_unitary()
    assert not gate.is_unitary(tolerance=0.0)
    rho = qcore.DensityMatrix(("A",), np.diag([0.5, 0.5 + 1e-13]))
    rho.validate()
    with pytest.raises(StructuralError):
        rho.validate(tolerance=0.0)


@pytest.mark.parametrize("axis", ["x", "y", "z"])
@pytest.mark.parametrize("target", ["A", "B"])
def test_measurement_dephases(axis, target, two_qubits, rng):
    state = qcore.from_amplitudes(two_qubits, rng.normal(size=4) + 1j * rng.normal(size=4), normalize=True)
    rho = np.outer(state.amplitudes, state.amplitudes.conj())
    ensemble = sum(
        branch.probability * np.outer(branch.post_state.amplitudes, branch.post_state.amplitudes.conj())
        for branch in qcore.measure_branches(state, axis, target)
    )
    dephased = np.zeros((4, 4), dtype=complex)
    for sign in (1, -1):
        local = (np.eye(2) + sign * qcore.pauli(axis)) / 2
        projector = np.kron(local, np.eye(2)) if target == "A" else np.kron(np.eye(2), local)
        dephased += projector @ rho @ projector
    assert np.max(np.abs(ensemble - dephased)) < 1e-10


def test_sigma_z_on_zero_has_one_branch():
    state = qcore.make_state([QubitRef("A", Party.ALICE)], "0")
    branches = qcore.measure_branches(state, "z", "A")
    assert [(b.outcome, b.probability) for b in branches] == [(1, 1.0)]


def test_sigma_x_on_zero_splits_evenly():
    state = qcore.make_state([QubitRef("A", Party.ALICE)], "0")
    plus, minus = qcore.measure_branches(state, "x", "A")
    assert (plus.outcome, minus.outcome) == (1, -1)
    assert plus.probability == pytest.approx(0.5, abs=1e-12)
    assert minus.probability == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(plus.post_state.amplitudes, [1 / math.sqrt(2), 1 / math.sqrt(2)])
    assert np.allclose(minus.post_state.amplitudes, [1 / math.sqrt(2), -1 / math.sqrt(2)])


def test_measure_and_discard_compacts_register(two_qubits):
    state = qcore.from_amplitudes(two_qubits, [1, 0, 0, 1], normalize=True)
    branches = qcore.measure_and_discard(state, "z", "A")
    assert [b.post_state.names for b in branches] == [("B",), ("B",)]
    assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(branches[1].post_state.amplitudes, [0, 1])


def test_partial_trace_of_bell_pair_is_maximally_mixed(two_qubits):
    state = qcore.from_amplitudes(two_qubits, [1, 0, 0, 1], normalize=True)
    rho = qcore.partial_trace(state, ["A"])
    assert np.allclose(rho.matrix, np.eye(2) / 2)
    assert rho.distance_to_maximally_mixed() < 1e-12


def test_partial_trace_keeping_everything_is_the_projector(two_qubits, rng):
    state = qcore.from_amplitudes(two_qubits, rng.normal(size=4) + 1j * rng.normal(size=4), normalize=True)
    rho = qcore.partial_trace(state, ["A", "B"]).validate()
    assert np.allclose(rho.matrix, np.outer(state.amplitudes, state.amplitudes.conj()))


def test_partial_trace_follows_keep_order(two_qubits):
    state = qcore.make_state(two_qubits, "01")
    rho = qcore.partial_trace(state, ["B", "A"])
    assert rho.matrix[2, 2] == pytest.approx(1.0)


def test_partial_trace_of_nonmaximal_state():
    spec = EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3)
    rho = qcore.partial_trace(eigenbasis(spec)[0], ["A"])
    assert np.allclose(rho.matrix, np.diag([0.75, 0.25]), atol=1e-12)


def test_partial_trace_needs_a_kept_qubit(two_qubits):
    with pytest.raises(StructuralError):
        qcore.partial_trace(qcore.make_state(two_qubits, "00"), [])


def test_inner_products(two_qubits):
    zero, one = qcore.make_state(two_qubits, "00"), qcore.make_state(two_qubits, "01")
    assert qcore.inner_product(zero, zero) == 1
    assert qcore.inner_product(zero, one) == 0


def test_inner_product_register_mismatch(two_qubits):
    other = [QubitRef("A", Party.ALICE), QubitRef("C", Party.BOB)]
    with pytest.raises(StructuralError):
        qcore.inner_product(qcore.make_state(two_qubits, "00"), qcore.make_state(other, "00"))


def test_nonmax_basis_is_orthonormal():
    basis = eigenbasis(EigenbasisSpec(Family.NONMAX_GENERAL, alpha=math.pi / 5, beta=0.4, phi1=0.3, phi2=1.1))
    gram = np.array([[qcore.inner_product(x, y) for y in basis] for x in basis])
    assert np.allclose(gram, np.eye(4), atol=1e-12)


def test_bell_pair_carries_one_ebit(two_qubits):
    state = qcore.from_amplitudes(two_qubits, [1, 0, 0, 1], normalize=True)
    assert qcore.entanglement_entropy(state, ["A"]) == pytest.approx(1.0, abs=1e-12)
    assert qcore.entanglement_entropy(qcore.make_state(two_qubits, "01"), ["A"]) == pytest.approx(0.0, abs=1e-12)
