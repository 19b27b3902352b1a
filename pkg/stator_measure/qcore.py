"""
Dense statevector engine.

The register order fixes bit significance: the first qubit of a register is
the most significant bit of the amplitude index. Every operation returns a
new immutable value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from config import simulation_config
from errors import ParameterError, ResourceError, StructuralError


class Party(str, Enum):
    ALICE = "alice"
    BOB = "bob"

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE

    @property
    def letter(self) -> str:
        """Lower-case letter used for this party's ebit halves in record labels."""
        return "a" if self is Party.ALICE else "b"


class Role(str, Enum):
    SYSTEM = "system"
    EBIT_HALF = "ebit_half"


@dataclass(frozen=True)
class QubitRef:
    """
    Identity of a qubit. Position in a register is derived from the register
    order, so a QubitRef stays valid when measured ancillas are compacted away.
    """
    name: str
    party: Party
    role: Role = Role.SYSTEM
    partner: Optional[str] = None

    def __post_init__(self):
        if self.role is Role.EBIT_HALF and not self.partner:
            raise StructuralError(f"ebit half {self.name!r} needs a declared partner")


QubitLike = Union[QubitRef, str]


def _name(qubit: QubitLike) -> str:
    return qubit.name if isinstance(qubit, QubitRef) else qubit


IDENTITY = np.eye(2, dtype=complex)
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PROJECTOR = {
    0: np.array([[1, 0], [0, 0]], dtype=complex),
    1: np.array([[0, 0], [0, 1]], dtype=complex),
}
_SQRT_HALF = 1 / math.sqrt(2)
EIGENVECTOR = {
    ("z", 1): np.array([1, 0], dtype=complex),
    ("z", -1): np.array([0, 1], dtype=complex),
    ("x", 1): np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
    ("x", -1): np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex),
    ("y", 1): np.array([_SQRT_HALF, 1j * _SQRT_HALF], dtype=complex),
    ("y", -1): np.array([_SQRT_HALF, -1j * _SQRT_HALF], dtype=complex),
}


def pauli(axis: str) -> np.ndarray:
    if axis not in PAULI:
        raise ParameterError(f"unknown Pauli axis {axis!r}")
    return PAULI[axis]


def rotation(axis: str, angle: float) -> np.ndarray:
    """e^{i angle sigma_axis} = cos(angle) I + i sin(angle) sigma_axis."""
    return math.cos(angle) * IDENTITY + 1j * math.sin(angle) * pauli(axis)


def controlled(operator: np.ndarray) -> np.ndarray:
    """|0><0| (x) I + |1><1| (x) operator, control first."""
    return np.kron(PROJECTOR[0], np.eye(operator.shape[0])) + np.kron(PROJECTOR[1], operator)


def phase_gate(phi: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * phi)]).astype(complex)


def _check_register(register: Sequence[QubitRef]) -> tuple[QubitRef, ...]:
    register = tuple(register)
    names = [q.name for q in register]
    if len(set(names)) != len(names):
        raise StructuralError(f"duplicate qubit names in register {names}")
    owners = {q.name: q.party for q in register}
    for qubit in register:
        if qubit.role is Role.EBIT_HALF and qubit.partner in owners:
            if owners[qubit.partner] is qubit.party:
                raise StructuralError(f"ebit halves {qubit.name!r}/{qubit.partner!r} share an owner")
    cap = simulation_config["engine"]["max_qubits"]
    if len(register) > cap:
        raise ResourceError(f"register of {len(register)} qubits exceeds the {cap}-qubit cap")
    return register


@dataclass(frozen=True, eq=False)
class StateVector:
    register: tuple[QubitRef, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        register = _check_register(self.register)
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != 2 ** len(register):
            raise StructuralError(
                f"{amplitudes.size} amplitudes for a {len(register)}-qubit register"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "register", register)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def n_qubits(self) -> int:
        return len(self.register)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(q.name for q in self.register)

    def index_of(self, qubit: QubitLike) -> int:
        name = _name(qubit)
        for position, ref in enumerate(self.register):
            if ref.name == name:
                return position
        raise StructuralError(f"qubit {name!r} not in register {self.names}")

    def qubit(self, qubit: QubitLike) -> QubitRef:
        return self.register[self.index_of(qubit)]

    def __contains__(self, qubit: QubitLike) -> bool:
        return _name(qubit) in self.names

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    names: tuple[str, ...]
    matrix: np.ndarray

    @property
    def dims(self) -> int:
        return self.matrix.shape[0]

    def validate(self, tolerance: Optional[float] = None) -> "DensityMatrix":
        tol = simulation_config["tolerances"]["linear_algebra"] if tolerance is None else tolerance
        if not np.allclose(self.matrix, self.matrix.conj().T, atol=tol, rtol=0):
            raise StructuralError("density matrix is not Hermitian")
        if abs(np.trace(self.matrix) - 1) > tol:
            raise StructuralError(f"density matrix trace {np.trace(self.matrix)} != 1")
        if np.linalg.eigvalsh(self.matrix).min() < -simulation_config["tolerances"]["psd"]:
            raise StructuralError("density matrix is not positive semidefinite")
        return self

    def distance_to_maximally_mixed(self) -> float:
        """Operator-norm distance to I/d."""
        return float(np.linalg.norm(self.matrix - np.eye(self.dims) / self.dims, ord=2))


@dataclass(frozen=True, eq=False)
class Gate:
    matrix: np.ndarray
    targets: tuple[str, ...]

    def __post_init__(self):
        targets = tuple(_name(t) for t in self.targets)
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.shape != (2 ** len(targets), 2 ** len(targets)):
            raise StructuralError(f"gate of shape {matrix.shape} for {len(targets)} targets")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "matrix", matrix)

    def is_unitary(self, tolerance: Optional[float] = None) -> bool:
        tol = simulation_config["tolerances"]["linear_algebra"] if tolerance is None else tolerance
        product = self.matrix @ self.matrix.conj().T
        return bool(np.max(np.abs(product - np.eye(product.shape[0]))) <= tol)


@dataclass(frozen=True, eq=False)
class MeasurementBranch:
    outcome: int
    probability: float
    post_state: StateVector


def make_state(register: Sequence[QubitRef], basis_label: str) -> StateVector:
    register = tuple(register)
    if len(basis_label) != len(register) or set(basis_label) - {"0", "1"}:
        raise StructuralError(f"label {basis_label!r} does not fit a {len(register)}-qubit register")
    amplitudes = np.zeros(2 ** len(register), dtype=complex)
    amplitudes[int(basis_label, 2) if basis_label else 0] = 1.0
    return StateVector(register, amplitudes)


def from_amplitudes(register: Sequence[QubitRef], amplitudes: Iterable[complex], normalize: bool = False) -> StateVector:
    amplitudes = np.array(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes, dtype=complex)
    if normalize:
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise ParameterError("cannot normalize the zero vector")
        amplitudes = amplitudes / norm
    return StateVector(tuple(register), amplitudes)


def tensor_product(state: StateVector, other: StateVector) -> StateVector:
    """Append other's qubits after state's qubits."""
    return StateVector(state.register + other.register, np.kron(state.amplitudes, other.amplitudes))


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    if len(set(gate.targets)) != len(gate.targets):
        raise StructuralError(f"duplicate gate targets {gate.targets}")
    if not gate.is_unitary():
        raise ParameterError("gate matrix is not unitary")
    positions = [state.index_of(t) for t in gate.targets]
    t = len(positions)
    operator = gate.matrix.reshape((2,) * (2 * t))
    out = np.tensordot(operator, state.tensor(), axes=(list(range(t, 2 * t)), positions))
    out = np.moveaxis(out, list(range(t)), positions)
    return StateVector(state.register, out.reshape(-1))


def _contract(state: StateVector, position: int, axis: str, outcome: int) -> np.ndarray:
    vector = EIGENVECTOR[(axis, outcome)]
    return np.tensordot(vector.conj(), state.tensor(), axes=([0], [position]))


def measure_and_discard(state: StateVector, axis: str, target: QubitLike) -> list[MeasurementBranch]:
    """Projective measurement of sigma_axis on target; the target leaves the register."""
    pauli(axis)
    position = state.index_of(target)
    remaining = state.register[:position] + state.register[position + 1:]
    threshold = simulation_config["engine"]["prune_threshold"]
    branches = []
    for outcome in (1, -1):
        reduced = _contract(state, position, axis, outcome)
        probability = float(np.vdot(reduced, reduced).real)
        if probability < threshold:
            continue
        post = StateVector(remaining, reduced.reshape(-1) / math.sqrt(probability))
        branches.append(MeasurementBranch(outcome, probability, post))
    return branches


def measure_branches(state: StateVector, axis: str, target: QubitLike) -> list[MeasurementBranch]:
    """Projective measurement of sigma_axis on target, keeping the target in place."""
    position = state.index_of(target)
    branches = []
    for branch in measure_and_discard(state, axis, target):
        vector = EIGENVECTOR[(axis, branch.outcome)]
        grown = np.multiply.outer(vector, branch.post_state.tensor())
        grown = np.moveaxis(grown, 0, position)
        branches.append(MeasurementBranch(
            branch.outcome, branch.probability, StateVector(state.register, grown.reshape(-1))
        ))
    return branches


def partial_trace(state: StateVector, keep: Sequence[QubitLike]) -> DensityMatrix:
    if not keep:
        raise StructuralError("partial trace needs at least one kept qubit")
    keep_positions = [state.index_of(q) for q in keep]
    if len(set(keep_positions)) != len(keep_positions):
        raise StructuralError("duplicate qubits in keep list")
    traced = [p for p in range(state.n_qubits) if p not in keep_positions]
    psi = state.tensor()
    rho = np.tensordot(psi, psi.conj(), axes=(traced, traced))
    m = len(keep_positions)
    ascending = sorted(keep_positions)
    order = [ascending.index(p) for p in keep_positions]
    rho = rho.transpose(order + [m + i for i in order]).reshape(2 ** m, 2 ** m)
    return DensityMatrix(tuple(_name(q) for q in keep), rho)


def density_matrix(state: StateVector) -> DensityMatrix:
    return DensityMatrix(state.names, np.outer(state.amplitudes, state.amplitudes.conj()))


def mixture(weights: Sequence[float], densities: Sequence[DensityMatrix]) -> DensityMatrix:
    if not densities:
        raise StructuralError("empty mixture")
    names = densities[0].names
    if any(d.names != names for d in densities):
        raise StructuralError("mixture over mismatched registers")
    total = sum(w * d.matrix for w, d in zip(weights, densities))
    return DensityMatrix(names, total)


def inner_product(x: StateVector, y: StateVector) -> complex:
    if x.names != y.names:
        raise StructuralError(f"register mismatch {x.names} vs {y.names}")
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def overlap(x: StateVector, y: StateVector) -> float:
    """|<x|y>|, phase-insensitive comparison."""
    return abs(inner_product(x, y))


def entanglement_entropy(state: StateVector, part: Sequence[QubitLike]) -> float:
    """Von Neumann entropy (in ebits) of the reduced state on part."""
    eigenvalues = np.linalg.eigvalsh(partial_trace(state, part).matrix)
    eigenvalues = eigenvalues[eigenvalues > 1e-15]
    return float(-np.sum(eigenvalues * np.log2(eigenvalues)))
