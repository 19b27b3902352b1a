"""
Stator primitives: ebit preparation, stator construction, remote rotation,
remote CNOT and remote Bell measurement.

A stator ties the rotating party's remaining ebit half to the coupling party's
system qubit through the eigenoperator relation
    sigma_x(control) S = branch_sign * sigma_axis(target) S.
Local operations on the control half therefore act on the remote target.
Pauli corrections are never undone physically; the induced operator of each
branch is returned so inference can fold it in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

import qcore
from errors import LocalityError, ProtocolError, ResourceError, StructuralError
from locality import LocalityContext
from qcore import IDENTITY, Party, QubitLike, QubitRef, Role, StateVector, controlled, pauli

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stator:
    branch_sign: int
    control: QubitRef
    target: QubitRef
    target_axis: str
    stage: str


@dataclass(frozen=True, eq=False)
class InducedOperator:
    """
    Net operator a remote step induced on the coupled system qubit(s) in one
    branch: correction (if any) times the intended transformation.
    """
    targets: tuple[str, ...]
    matrix: np.ndarray
    description: str
    corrected: bool

    def apply(self, state: StateVector) -> StateVector:
        return qcore.apply_gate(state, qcore.Gate(self.matrix, self.targets))


@dataclass(frozen=True)
class BellLabels:
    """Record labels written by one remote Bell measurement."""
    stage: str

    def label(self, parity: str, party: Party) -> str:
        return f"{self.stage}.{parity}.sigma_z_{party.letter}"


# Alice's local half of the ZZ / XX parity readout: CNOT(system -> half) and its
# Hadamard-conjugated version
_PARITY_GATES = {
    "zz": controlled(pauli("x")),
    "xx": np.kron(np.array([[1, 1], [1, 1]]) / 2, IDENTITY)
    + np.kron(np.array([[1, -1], [-1, 1]]) / 2, pauli("x")),
}


def prepare_ebit(ctx: LocalityContext, state: StateVector) -> tuple[StateVector, QubitRef, QubitRef]:
    return ctx.prepare_ebit(state)


def build_stator(ctx: LocalityContext, state: StateVector, half: QubitLike, target: QubitLike,
                 axis: str, *, stage: str = "stator") -> tuple[StateVector, Stator]:
    """
    Couple an ebit half to a system qubit of the same party with
    U = |0><0| (x) I + |1><1| (x) sigma_axis, then measure sigma_x of the half.

    Args:
        half: the coupling party's ebit half
        target: the coupling party's system qubit
        axis: Pauli axis acted on the target
        stage: record label prefix

    Returns:
        Post-measurement state (half discarded) and the stator
    """
    half_ref, target_ref = state.qubit(half), state.qubit(target)
    if half_ref.role is not Role.EBIT_HALF:
        raise StructuralError(f"{half_ref.name!r} is not an ebit half")
    if half_ref.party is not target_ref.party:
        raise LocalityError(f"stator coupling {half_ref.name!r} with {target_ref.name!r} spans parties")
    party = half_ref.party
    state = ctx.apply(party, state, controlled(pauli(axis)), (half_ref.name, target_ref.name),
                      name=f"couple[{axis}]")
    sign, state = ctx.measure(party, state, half_ref.name, "x", f"{stage}.sigma_x_{party.letter}")
    ctx.mark_remote_target(target_ref.name)
    control = state.qubit(half_ref.partner)
    return state, Stator(sign, control, target_ref, axis, stage)


def idle_half(ctx: LocalityContext, state: StateVector, half: QubitLike, *, stage: str) -> StateVector:
    """Retire an ebit half without coupling it: measure its sigma_z."""
    ref = state.qubit(half)
    _, state = ctx.measure(ref.party, state, ref.name, "z", f"{stage}.sigma_z_{ref.party.letter}")
    return state


def rotate_half(ctx: LocalityContext, state: StateVector, half: QubitLike, angle: float, *, stage: str,
                system_control: Optional[tuple[str, str]] = None) -> tuple[int, StateVector]:
    """
    The rotating party's local step: e^{i angle sigma_x} on its half (or
    e^{i angle P (x) sigma_x} with P a Pauli on one of its own system qubits),
    then sigma_z of the half.
    """
    ref = state.qubit(half)
    if system_control is None:
        matrix, targets = qcore.rotation("x", angle), (ref.name,)
    else:
        qubit, axis = system_control
        matrix = math.cos(angle) * np.eye(4) + 1j * math.sin(angle) * np.kron(pauli(axis), pauli("x"))
        targets = (qubit, ref.name)
    state = ctx.apply(ref.party, state, matrix, targets, name="rotate")
    return ctx.measure(ref.party, state, ref.name, "z", f"{stage}.sigma_z_{ref.party.letter}")


def _check_live(state: StateVector, stator: Stator) -> None:
    if stator.control.name not in state:
        raise ProtocolError(f"stator control {stator.control.name!r} was already consumed")


def remote_rotation(ctx: LocalityContext, state: StateVector, stator: Stator, angle: float,
                    *, system_control: Optional[tuple[str, str]] = None) -> tuple[StateVector, InducedOperator]:
    """
    Rotate the stator's target from the other side. The induced operator is
    e^{i angle s sigma_axis} (s = branch sign), preceded by P when a system
    control is given, and multiplied by s sigma_axis when the half reads -1.
    """
    _check_live(state, stator)
    if not math.isfinite(angle):
        raise ProtocolError(f"angle {angle} is not finite")
    z, state = rotate_half(ctx, state, stator.control, angle, stage=stator.stage,
                           system_control=system_control)
    s = stator.branch_sign
    sigma = pauli(stator.target_axis)
    if system_control is None:
        targets = (stator.target.name,)
        generator, correction = sigma, sigma
    else:
        qubit, axis = system_control
        targets = (qubit, stator.target.name)
        generator, correction = np.kron(pauli(axis), sigma), np.kron(IDENTITY, sigma)
    dim = generator.shape[0]
    matrix = math.cos(angle) * np.eye(dim) + 1j * math.sin(angle) * s * generator
    if z == -1:
        matrix = s * correction @ matrix
    description = f"exp(i*{angle:.6g}*({s:+d})*sigma_{stator.target_axis})" + (
        f" then {s:+d}*sigma_{stator.target_axis}" if z == -1 else "")
    return state, InducedOperator(targets, matrix, description, z == -1)


def conditional_remote_rotation(ctx: LocalityContext, state: StateVector, stator: Stator,
                                reads: Sequence[str], predicate: Callable[[Mapping[str, int]], bool],
                                angle: float) -> tuple[StateVector, InducedOperator]:
    """
    Rotate by angle when the predicate over the rotating party's own record
    entries holds, by zero otherwise. Reads go through the context firewall.
    """
    _check_live(state, stator)
    party = stator.control.party
    values = {label: ctx.read(party, label) for label in reads}
    chosen = angle if predicate(values) else 0.0
    logger.debug("conditional rotation on %s: %s -> angle %s", stator.target.name, values, chosen)
    return remote_rotation(ctx, state, stator, chosen)


def remote_cnot(ctx: LocalityContext, state: StateVector, stator: Stator,
                control_qubit: QubitLike) -> tuple[StateVector, InducedOperator]:
    """
    CNOT from the rotating party's system qubit onto the stator target. The
    local gate exp(-i pi/4 (1 - sigma_z)(1 - sigma_x)) is a CNOT onto the half.
    """
    _check_live(state, stator)
    if stator.target_axis != "x":
        raise ProtocolError(f"remote CNOT needs an x-axis stator, got {stator.target_axis!r}")
    control_ref = state.qubit(control_qubit)
    if control_ref.party is not stator.control.party:
        raise LocalityError(f"{control_ref.name!r} is not held by the stator's rotating party")
    party = control_ref.party
    state = ctx.apply(party, state, controlled(pauli("x")), (control_ref.name, stator.control.name),
                      name="cnot")
    z, state = ctx.measure(party, state, stator.control.name, "z", f"{stator.stage}.sigma_z_{party.letter}")
    s = stator.branch_sign
    matrix = controlled(s * pauli("x"))
    if z == -1:
        matrix = np.kron(IDENTITY, s * pauli("x")) @ matrix
    description = f"CNOT({control_ref.name}->{stator.target.name}) with sign {s:+d}" + (
        f" then {s:+d}*sigma_x" if z == -1 else "")
    return state, InducedOperator((control_ref.name, stator.target.name), matrix, description, z == -1)


def remote_bell_measurement(ctx: LocalityContext, state: StateVector, first: QubitLike, second: QubitLike,
                            *, stage: str = "bell") -> tuple[StateVector, BellLabels]:
    """
    Nondemolition readout of Z(x)Z and X(x)X on two system qubits held by
    different parties, one fresh ebit per parity. Each party entangles its
    system qubit with its own half and measures the half's sigma_z; the
    product of the two values is the parity.
    """
    if ctx.remaining_ebits is not None and ctx.remaining_ebits < 2:
        raise ResourceError("remote Bell measurement needs two fresh ebits")
    refs = {state.qubit(first).party: state.qubit(first), state.qubit(second).party: state.qubit(second)}
    if len(refs) != 2:
        raise LocalityError("remote Bell measurement needs one qubit on each side")
    labels = BellLabels(stage)
    for parity, gate in _PARITY_GATES.items():
        state, a, b = ctx.prepare_ebit(state)
        halves = {Party.ALICE: a, Party.BOB: b}
        for party in (Party.ALICE, Party.BOB):
            state = ctx.apply(party, state, gate, (refs[party].name, halves[party].name), name=f"parity[{parity}]")
        for party in (Party.ALICE, Party.BOB):
            _, state = ctx.measure(party, state, halves[party].name, "z", labels.label(parity, party))
    ctx.mark_remote_target(refs[Party.ALICE].name, refs[Party.BOB].name)
    return state, labels
