"""
End-to-end measurement protocols.

Every protocol body is a single-trajectory function of a LocalityContext and
the input state; the branch explorer replays it over every outcome path and
the results are collected into a ProtocolRun.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

import qcore
import stator
from branching import Leaf, enumerate_branches, sample_branch
from correction import LoopPlan, run_correction_loop
from eigenbasis import EigenbasisSpec, Family, system_register
from errors import StructuralError
from inference import infer_outcome
from locality import GateEvent, LocalityContext, RecordEntry
from qcore import DensityMatrix, Party, StateVector

logger = logging.getLogger(__name__)

ProtocolBody = Callable[[LocalityContext, StateVector], StateVector]


@dataclass(frozen=True, eq=False)
class Branch:
    probability: float
    alice_record: tuple[RecordEntry, ...]
    bob_record: tuple[RecordEntry, ...]
    post_state: StateVector
    inferred: Optional[int]
    path: tuple[int, ...] = ()
    alice_gates: tuple[GateEvent, ...] = ()
    bob_gates: tuple[GateEvent, ...] = ()
    violations: tuple[str, ...] = ()
    cross_reads: int = 0

    @property
    def failed(self) -> bool:
        return self.inferred is None

    def record(self, party: Party) -> dict[str, int]:
        entries = self.alice_record if party is Party.ALICE else self.bob_record
        return {entry.label: entry.value for entry in entries}

    def gates(self, party: Party) -> tuple[GateEvent, ...]:
        return self.alice_gates if party is Party.ALICE else self.bob_gates


@dataclass(frozen=True, eq=False)
class ProtocolRun:
    spec: EigenbasisSpec
    input_state: StateVector
    branches: tuple[Branch, ...]
    ebits_consumed: int
    remote_targets: tuple[str, ...] = ()
    sampled: bool = False

    @property
    def total_probability(self) -> float:
        return float(sum(branch.probability for branch in self.branches))

    @property
    def success_probability(self) -> float:
        return float(sum(branch.probability for branch in self.branches if not branch.failed))

    def outcome_distribution(self, conditioned: bool = True) -> np.ndarray:
        """Probability of each inferred index, optionally conditioned on success."""
        distribution = np.zeros(self.spec.size)
        for branch in self.branches:
            if not branch.failed:
                distribution[branch.inferred - 1] += branch.probability
        success = distribution.sum()
        if conditioned and success > 0:
            distribution = distribution / success
        return distribution

    def record_marginal(self, party: Party) -> dict[tuple[tuple[str, int], ...], float]:
        marginal: dict[tuple[tuple[str, int], ...], float] = {}
        for branch in self.branches:
            entries = branch.alice_record if party is Party.ALICE else branch.bob_record
            key = tuple((entry.label, entry.value) for entry in entries)
            marginal[key] = marginal.get(key, 0.0) + branch.probability
        return marginal

    def reduced_state(self, qubit: str) -> DensityMatrix:
        """Ensemble-averaged post-protocol state of one system qubit."""
        return qcore.mixture(
            [branch.probability / self.total_probability for branch in self.branches],
            [qcore.partial_trace(branch.post_state, [qubit]) for branch in self.branches],
        )

    @property
    def residual_entanglement(self) -> float:
        """Average entanglement (ebits) left between Alice's and Bob's system qubits."""
        alice = [q.name for q in self.input_state.register if q.party is Party.ALICE]
        return float(sum(
            branch.probability * qcore.entanglement_entropy(branch.post_state, alice)
            for branch in self.branches
        ) / self.total_probability)


def _check_input(spec: EigenbasisSpec, state: StateVector) -> None:
    expected = tuple((q.name, q.party) for q in system_register(spec.family))
    if tuple((q.name, q.party) for q in state.register) != expected:
        raise StructuralError(
            f"{spec.family.value} expects register {[name for name, _ in expected]}, got {list(state.names)}"
        )


def _branch(leaf: Leaf, spec: EigenbasisSpec, infer: bool) -> Branch:
    ctx = leaf.context
    alice, bob = ctx.records[Party.ALICE], ctx.records[Party.BOB]
    inferred = infer_outcome(alice, bob, spec) if infer else None
    return Branch(
        probability=leaf.probability,
        alice_record=tuple(alice.entries),
        bob_record=tuple(bob.entries),
        post_state=leaf.result,
        inferred=inferred,
        path=leaf.path,
        alice_gates=tuple(ctx.gate_log[Party.ALICE]),
        bob_gates=tuple(ctx.gate_log[Party.BOB]),
        violations=tuple(ctx.violations),
        cross_reads=sum(1 for read in ctx.reads if read.reader is not read.owner),
    )


def execute(spec: EigenbasisSpec, input_state: StateVector, body: ProtocolBody, *, strict: bool = True,
            infer: bool = True, seed: Optional[int] = None) -> ProtocolRun:
    """Enumerate every branch of body on input_state (or sample one when a seed is given)."""
    run = lambda ctx: body(ctx, input_state)
    if seed is None:
        leaves = enumerate_branches(run, strict=strict, ebit_budget=spec.total_ebits)
    else:
        leaves = [sample_branch(run, seed, strict=strict, ebit_budget=spec.total_ebits)]
    branches = tuple(_branch(leaf, spec, infer) for leaf in leaves)
    consumed = max(leaf.context.ebits_consumed for leaf in leaves)
    targets = []
    for leaf in leaves:
        targets.extend(name for name in leaf.context.remote_targets if name not in targets)
    logger.debug("%s: %d branches, %d ebits, success %.12f", spec.family.value, len(branches), consumed,
                 sum(b.probability for b in branches if not b.failed))
    return ProtocolRun(spec, input_state, branches, consumed, tuple(targets), sampled=seed is not None)


# Protocol bodies

def _measure_system(ctx: LocalityContext, state: StateVector, party: Party, qubit: str, label: str) -> StateVector:
    _, state = ctx.measure(party, state, qubit, "z", label, discard=False)
    return state


def _local_z_body(ctx: LocalityContext, state: StateVector) -> StateVector:
    state = _measure_system(ctx, state, Party.ALICE, "A", "sigma_z_A")
    return _measure_system(ctx, state, Party.BOB, "B", "sigma_z_B")


def _twisted_product_body(ctx: LocalityContext, state: StateVector) -> StateVector:
    state = _measure_system(ctx, state, Party.ALICE, "A", "sigma_z_A")
    state, _, b = stator.prepare_ebit(ctx, state)
    state, coupling = stator.build_stator(ctx, state, b, "B", "y", stage="untwist.1")
    state, _ = stator.conditional_remote_rotation(
        ctx, state, coupling, reads=("sigma_z_A",),
        predicate=lambda values: values["sigma_z_A"] == -1, angle=math.pi / 4,
    )
    return _measure_system(ctx, state, Party.BOB, "B", "sigma_z_B")


def _general_product_body(spec: EigenbasisSpec) -> ProtocolBody:
    def body(ctx: LocalityContext, state: StateVector) -> StateVector:
        state = _measure_system(ctx, state, Party.ALICE, "A", "sigma_z_A")
        twisted = ctx.read(Party.ALICE, "sigma_z_A") == -1
        plan = LoopPlan(
            stage="untwist", coupler=Party.BOB, target="B", axis="y",
            candidates=(spec.alpha / 2,), budget=spec.n_ebits,
            rotator_angle=spec.alpha / 2 if twisted else 0.0,
        )
        state = run_correction_loop(ctx, state, plan)
        return _measure_system(ctx, state, Party.BOB, "B", "sigma_z_B")
    return body


def _remote_cnot_stage(ctx: LocalityContext, state: StateVector) -> StateVector:
    state, _, b = stator.prepare_ebit(ctx, state)
    state, coupling = stator.build_stator(ctx, state, b, "B", "x", stage="cnot")
    state, _ = stator.remote_cnot(ctx, state, coupling, "A")
    return state


def _nonmax_equal_body(spec: EigenbasisSpec) -> ProtocolBody:
    def body(ctx: LocalityContext, state: StateVector) -> StateVector:
        state = _remote_cnot_stage(ctx, state)
        s_b = ctx.read(Party.BOB, "cnot.sigma_x_b")
        plan = LoopPlan(
            stage="untwist", coupler=Party.ALICE, target="A", axis="y",
            candidates=(spec.alpha / 2,), budget=spec.n_ebits - 1,
            rotator_angle=s_b * spec.alpha / 2,
        )
        state = run_correction_loop(ctx, state, plan)
        return _local_z_body(ctx, state)
    return body


def _nonmax_bell_body(spec: EigenbasisSpec) -> ProtocolBody:
    theta = spec.loop_twist

    def body(ctx: LocalityContext, state: StateVector) -> StateVector:
        # Bob's rotation exp(i theta sigma_x_B sigma_y_A) maps the basis onto the Bell basis
        plan = LoopPlan(
            stage="rotate", coupler=Party.ALICE, target="A", axis="y",
            candidates=(theta,), budget=spec.n_ebits - 2,
            rotator_angle=theta, system_control=("B", "x"),
        )
        state = run_correction_loop(ctx, state, plan)
        state, _ = stator.remote_bell_measurement(ctx, state, "A", "B")
        return state
    return body


def _nonmax_general_body(spec: EigenbasisSpec) -> ProtocolBody:
    def body(ctx: LocalityContext, state: StateVector) -> StateVector:
        # local phase gates absorb phi1 on |11> and phi2 on |10>
        alice_phase = (spec.phi1 + spec.phi2) / 2
        bob_phase = (spec.phi1 - spec.phi2) / 2
        if alice_phase:
            state = ctx.apply(Party.ALICE, state, qcore.phase_gate(-alice_phase), ("A",), name="phase")
        if bob_phase:
            state = ctx.apply(Party.BOB, state, qcore.phase_gate(-bob_phase), ("B",), name="phase")
        state = _remote_cnot_stage(ctx, state)
        state = _measure_system(ctx, state, Party.BOB, "B", "sigma_z_B")
        s_b = ctx.read(Party.BOB, "cnot.sigma_x_b")
        z_b = ctx.read(Party.BOB, "sigma_z_B")
        first = LoopPlan(
            stage="untwist", coupler=Party.ALICE, target="A", axis="y",
            candidates=(spec.alpha / 2, spec.beta / 2), budget=spec.n_ebits - 1,
            rotator_angle=s_b * (spec.alpha if z_b == 1 else spec.beta) / 2,
        )
        state = run_correction_loop(ctx, state, first)
        second = LoopPlan(
            stage="residual", coupler=Party.ALICE, target="A", axis="y",
            candidates=(spec.gamma,), budget=spec.n_ebits - 1,
            rotator_angle=-s_b * z_b * spec.gamma,
            engaged=ctx.read(Party.ALICE, "cnot.sigma_z_a") == -1,
        )
        state = run_correction_loop(ctx, state, second)
        return _measure_system(ctx, state, Party.ALICE, "A", "sigma_z_A")
    return body


def _twist_body(spec: EigenbasisSpec) -> ProtocolBody:
    theta = spec.loop_twist

    def body(ctx: LocalityContext, state: StateVector) -> StateVector:
        state = _measure_system(ctx, state, Party.ALICE, "A_s", "sigma_z_As")
        state = _measure_system(ctx, state, Party.BOB, "B_s", "sigma_z_Bs")
        alice_upper = ctx.read(Party.ALICE, "sigma_z_As") == -1
        plan = LoopPlan(
            stage="untwist", coupler=Party.BOB, target="B_q", axis=spec.u_axis,
            candidates=(theta,), budget=spec.n_ebits - 2,
            rotator_angle=theta if alice_upper else 0.0,
            engaged=ctx.read(Party.BOB, "sigma_z_Bs") == -1,
        )
        state = run_correction_loop(ctx, state, plan)
        state, _ = stator.remote_bell_measurement(ctx, state, "A_q", "B_q")
        return state
    return body


def protocol_body(spec: EigenbasisSpec) -> ProtocolBody:
    if spec.family is Family.TWISTED_PRODUCT:
        return _twisted_product_body
    if spec.family is Family.GENERAL_PRODUCT:
        return _general_product_body(spec)
    if spec.degenerate:
        return _local_z_body
    builders = {
        Family.NONMAX_EQUAL: _nonmax_equal_body,
        Family.NONMAX_BELL: _nonmax_bell_body,
        Family.NONMAX_GENERAL: _nonmax_general_body,
        Family.TWIST_4X4: _twist_body,
    }
    return builders[spec.family](spec)


def run_protocol(spec: EigenbasisSpec, input_state: StateVector, *, seed: Optional[int] = None) -> ProtocolRun:
    _check_input(spec, input_state)
    return execute(spec, input_state, protocol_body(spec), seed=seed)


# Public entry points, one per family

def measure_twisted_product(input_state: StateVector, *, seed: Optional[int] = None) -> ProtocolRun:
    return run_protocol(EigenbasisSpec(Family.TWISTED_PRODUCT), input_state, seed=seed)


def measure_general_product(input_state: StateVector, alpha: float, n_ebits: int,
                            *, seed: Optional[int] = None) -> ProtocolRun:
    return run_protocol(EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=alpha, n_ebits=n_ebits), input_state, seed=seed)


def measure_nonmax_equal(input_state: StateVector, alpha: float, n_ebits: int,
                         *, seed: Optional[int] = None) -> ProtocolRun:
    return run_protocol(EigenbasisSpec(Family.NONMAX_EQUAL, alpha=alpha, n_ebits=n_ebits), input_state, seed=seed)


def measure_nonmax_bell_variant(input_state: StateVector, alpha: float, n_ebits: int,
                                *, seed: Optional[int] = None) -> ProtocolRun:
    return run_protocol(EigenbasisSpec(Family.NONMAX_BELL, alpha=alpha, n_ebits=n_ebits), input_state, seed=seed)


def measure_nonmax_general(input_state: StateVector, alpha: float, beta: float, phi1: float = 0.0,
                           phi2: float = 0.0, n_ebits: int = 2, *, seed: Optional[int] = None) -> ProtocolRun:
    spec = EigenbasisSpec(Family.NONMAX_GENERAL, alpha=alpha, beta=beta, phi1=phi1, phi2=phi2, n_ebits=n_ebits)
    return run_protocol(spec, input_state, seed=seed)


def measure_4x4_twist(input_state: StateVector, u_b: np.ndarray, n_ebits: int,
                      *, seed: Optional[int] = None) -> ProtocolRun:
    return run_protocol(EigenbasisSpec.twist_from_unitary(u_b, n_ebits=n_ebits), input_state, seed=seed)
