"""
Probabilistic untwisting loop.

A coupling party holds a system qubit twisted by an unknown sign of a known
angle; a rotating party holds the angle schedule. Step k spends one ebit: the
coupler builds a stator on its qubit (or idles once it is done), the rotator
rotates its half by 2^(k-1) times the first angle. A coupled step with branch
sign +1 removes the twist; a -1 doubles it. Once the doubled twist is a
multiple of pi/2 the loop has closed and only a Pauli flip remains.

The rotator never learns how the coupler fared, so its schedule is fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import stator
from config import simulation_config
from locality import LocalityContext
from qcore import Party, StateVector

logger = logging.getLogger(__name__)

QUARTER_TURN = math.pi / 2


def is_closed(angle: float, tolerance: Optional[float] = None) -> bool:
    """True when angle is an integer multiple of pi/2."""
    tol = simulation_config["tolerances"]["closure"] if tolerance is None else tolerance
    turns = angle / QUARTER_TURN
    return abs(turns - round(turns)) < tol


def quarter_turns(angle: float) -> int:
    return int(round(angle / QUARTER_TURN))


def closing_step(first_angle: float, horizon: int) -> Optional[int]:
    """Smallest number of failed steps f <= horizon after which 2^f * first_angle closes."""
    for failures in range(horizon + 1):
        if is_closed(first_angle * 2 ** failures):
            return failures
    return None


@dataclass(frozen=True)
class LoopPlan:
    """
    stage: record label prefix
    coupler: party that couples its system qubit
    target / axis: coupled qubit and Pauli axis of the twist
    candidates: twist magnitudes the coupler considers possible; it stops on
        closure only when every candidate has closed
    budget: ebits available to the loop
    rotator_angle: first angle of the rotator's schedule (0 means it only
        plays along)
    engaged: coupler takes part at all
    system_control: (qubit, axis) when the rotator's generator includes a
        Pauli on one of its own system qubits
    """
    stage: str
    coupler: Party
    target: str
    axis: str
    candidates: tuple[float, ...]
    budget: int
    rotator_angle: float
    engaged: bool = True
    system_control: Optional[tuple[str, str]] = None

    @property
    def rotator(self) -> Party:
        return self.coupler.other

    @property
    def skipped(self) -> bool:
        """Both parties know the loop is unnecessary when every candidate twist is already closed."""
        return all(is_closed(angle) for angle in self.candidates)


def run_correction_loop(ctx: LocalityContext, state: StateVector, plan: LoopPlan) -> StateVector:
    if plan.skipped:
        logger.debug("loop %s skipped: twist already closed", plan.stage)
        return state
    done = not plan.engaged
    for step in range(1, plan.budget + 1):
        stage = f"{plan.stage}.{step}"
        state, a, b = ctx.prepare_ebit(state)
        halves = {Party.ALICE: a.name, Party.BOB: b.name}
        coupled = not done
        if coupled:
            state, _ = stator.build_stator(ctx, state, halves[plan.coupler], plan.target, plan.axis, stage=stage)
        else:
            state = stator.idle_half(ctx, state, halves[plan.coupler], stage=stage)
        angle = plan.rotator_angle * 2 ** (step - 1)
        _, state = stator.rotate_half(ctx, state, halves[plan.rotator], angle, stage=stage,
                                      system_control=plan.system_control)
        if coupled:
            sign = ctx.read(plan.coupler, f"{stage}.sigma_x_{plan.coupler.letter}")
            if sign == 1:
                done = True
            elif all(is_closed(candidate * 2 ** step) for candidate in plan.candidates):
                done = True
        logger.debug("loop %s step %d coupled=%s done=%s", plan.stage, step, coupled, done)
    return state


@dataclass(frozen=True)
class LoopSettlement:
    """
    Record-side summary of one loop.

    residual: twist left on the target after the loop
    flips: parity of corrections sigma_axis picked up on coupled steps
    idle_flips: parity of system-control Paulis picked up on idle steps
    """
    residual: float
    flips: int
    idle_flips: int

    @property
    def closed(self) -> bool:
        return is_closed(self.residual)

    @property
    def closure_flip(self) -> int:
        return quarter_turns(self.residual) % 2


def settle_loop(alice: Mapping[str, int], bob: Mapping[str, int], *, stage: str, coupler: Party,
                budget: int, twist: float, rotator_angle: float) -> LoopSettlement:
    """
    Replay a loop from the two records. twist is the target's actual twist
    (its state is e^{-i twist sigma} times an aligned state); every coupled
    step with rotator angle t and branch sign s turns it into twist - t*s.
    """
    values = {Party.ALICE: alice, Party.BOB: bob}
    coupler_values, rotator_values = values[coupler], values[coupler.other]
    c, r = coupler.letter, coupler.other.letter
    residual, flips, idle_flips = twist, 0, 0
    for step in range(1, budget + 1):
        prefix = f"{stage}.{step}"
        rotated = rotator_values.get(f"{prefix}.sigma_z_{r}")
        if rotated is None:
            break
        sign = coupler_values.get(f"{prefix}.sigma_x_{c}")
        if sign is not None:
            residual -= rotator_angle * 2 ** (step - 1) * sign
            flips ^= int(rotated == -1)
        else:
            idle = coupler_values[f"{prefix}.sigma_z_{c}"]
            idle_flips ^= int(idle != rotated)
    return LoopSettlement(residual, flips, idle_flips)

