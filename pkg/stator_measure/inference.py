"""
Post-hoc reconciliation of the two parties' records into an eigenstate index.

Each family reads only (alice record, bob record, spec): loop corrections and
closures are replayed from the record trail, never from the hidden state.
"""

from __future__ import annotations

import math
from typing import Callable, Mapping, Optional

import numpy as np

from correction import LoopSettlement, settle_loop
from eigenbasis import BELL_NAMES, EigenbasisSpec, Family, eigenbasis
from errors import StructuralError
from locality import record_values
from qcore import Party

# (zz, xx) parities of phi+, phi-, psi+, psi-
BELL_PARITIES = {(1, 1): 0, (1, -1): 1, (-1, 1): 2, (-1, -1): 3}

# Outcome tables as originally printed: block (v(sigma_z_a), v(sigma_x_b)) ->
# rows (eigenstate index, final (bit_A, bit_B)). The twisted-product block
# (+1, +1) repeats eigenstate 3 where eigenstate 4 belongs.
REFERENCE_TABLES = {
    Family.TWISTED_PRODUCT: {
        (1, 1): [(1, (0, 0)), (2, (0, 1)), (3, (1, 0)), (3, (1, 1))],
        (1, -1): [(1, (0, 0)), (2, (0, 1)), (3, (1, 1)), (4, (1, 0))],
        (-1, 1): [(1, (0, 1)), (2, (0, 0)), (3, (1, 1)), (4, (1, 0))],
        (-1, -1): [(1, (0, 1)), (2, (0, 0)), (3, (1, 0)), (4, (1, 1))],
    },
    Family.NONMAX_EQUAL: {
        (1, 1): [(1, (0, 0)), (2, (1, 0)), (3, (0, 1)), (4, (1, 1))],
        (1, -1): [(1, (0, 0)), (2, (1, 0)), (3, (0, 1)), (4, (1, 1))],
        (-1, 1): [(1, (0, 1)), (2, (1, 1)), (3, (0, 0)), (4, (1, 0))],
        (-1, -1): [(1, (0, 1)), (2, (1, 1)), (3, (0, 0)), (4, (1, 0))],
    },
}
REFERENCE_TABLES[Family.NONMAX_GENERAL] = REFERENCE_TABLES[Family.NONMAX_EQUAL]


def bit(value: int) -> int:
    return 0 if value == 1 else 1


def _entry(values: Mapping[str, int], label: str, party: Party) -> int:
    try:
        return values[label]
    except KeyError:
        raise StructuralError(f"{party.value}'s record is missing {label!r}") from None


def bell_parities(alice: Mapping[str, int], bob: Mapping[str, int], stage: str = "bell") -> tuple[int, int]:
    zz = _entry(alice, f"{stage}.zz.sigma_z_a", Party.ALICE) * _entry(bob, f"{stage}.zz.sigma_z_b", Party.BOB)
    xx = _entry(alice, f"{stage}.xx.sigma_z_a", Party.ALICE) * _entry(bob, f"{stage}.xx.sigma_z_b", Party.BOB)
    return zz, xx


def bell_outcome(alice: Mapping[str, int], bob: Mapping[str, int], stage: str = "bell") -> str:
    """Name of the Bell state a remote Bell measurement found."""
    return BELL_NAMES[BELL_PARITIES[bell_parities(record_values(alice), record_values(bob), stage)]]


def _computational_index(spec: EigenbasisSpec, bit_a: int, bit_b: int) -> int:
    """Degenerate nonmaximal bases are computational; find the eigenstate holding |bit_a bit_b>."""
    amplitudes = [abs(state.amplitudes[2 * bit_a + bit_b]) for state in eigenbasis(spec)]
    return int(np.argmax(amplitudes)) + 1


def _final_bits(alice: Mapping[str, int], bob: Mapping[str, int]) -> tuple[int, int]:
    return bit(_entry(alice, "sigma_z_A", Party.ALICE)), bit(_entry(bob, "sigma_z_B", Party.BOB))


def _infer_product(alice, bob, spec: EigenbasisSpec) -> Optional[int]:
    twisted = _entry(alice, "sigma_z_A", Party.ALICE) == -1
    twist = spec.alpha / 2 if twisted else 0.0
    loop = settle_loop(alice, bob, stage="untwist", coupler=Party.BOB, budget=spec.n_ebits,
                       twist=twist, rotator_angle=twist)
    if not loop.closed:
        return None
    bit_b = bit(_entry(bob, "sigma_z_B", Party.BOB)) ^ loop.flips ^ loop.closure_flip
    return (3 if twisted else 1) + bit_b


def _unflipped_a(loop: LoopSettlement, bit_a: int) -> int:
    return bit_a ^ loop.flips ^ loop.closure_flip


def _infer_nonmax_equal(alice, bob, spec: EigenbasisSpec) -> Optional[int]:
    bit_a, bit_b = _final_bits(alice, bob)
    if spec.degenerate:
        return _computational_index(spec, bit_a, bit_b)
    s_b = _entry(bob, "cnot.sigma_x_b", Party.BOB)
    b_eff = bit_b ^ bit(_entry(alice, "cnot.sigma_z_a", Party.ALICE))
    twist = s_b * spec.alpha / 2
    loop = settle_loop(alice, bob, stage="untwist", coupler=Party.ALICE, budget=spec.n_ebits - 1,
                       twist=twist, rotator_angle=twist)
    if not loop.closed:
        return None
    return 1 + _unflipped_a(loop, bit_a) + 2 * b_eff


def _infer_nonmax_general(alice, bob, spec: EigenbasisSpec) -> Optional[int]:
    bit_a, bit_b = _final_bits(alice, bob)
    if spec.degenerate:
        return _computational_index(spec, bit_a, bit_b)
    s_b = _entry(bob, "cnot.sigma_x_b", Party.BOB)
    z_b = _entry(bob, "sigma_z_B", Party.BOB)
    b_eff = bit_b ^ bit(_entry(alice, "cnot.sigma_z_a", Party.ALICE))
    twist = s_b * (spec.alpha if b_eff == 0 else spec.beta) / 2
    first = settle_loop(alice, bob, stage="untwist", coupler=Party.ALICE, budget=spec.n_ebits - 1,
                        twist=twist, rotator_angle=s_b * (spec.alpha if z_b == 1 else spec.beta) / 2)
    second = settle_loop(alice, bob, stage="residual", coupler=Party.ALICE, budget=spec.n_ebits - 1,
                         twist=first.residual, rotator_angle=-s_b * z_b * spec.gamma)
    if not second.closed:
        return None
    bit_a ^= first.flips ^ second.flips ^ second.closure_flip
    return 1 + bit_a + 2 * b_eff


def _infer_nonmax_bell(alice, bob, spec: EigenbasisSpec) -> Optional[int]:
    if spec.degenerate:
        return _computational_index(spec, *_final_bits(alice, bob))
    theta = spec.alpha / 2 - math.pi / 4
    loop = settle_loop(alice, bob, stage="rotate", coupler=Party.ALICE, budget=spec.n_ebits - 2,
                       twist=theta, rotator_angle=theta)
    if not loop.closed:
        return None
    zz, xx = bell_parities(alice, bob)
    # sigma_y_A flips both parities, sigma_x_B flips zz, the closing
    # sigma_x_B sigma_y_A flips xx
    if loop.flips ^ loop.idle_flips:
        zz = -zz
    if loop.flips ^ loop.closure_flip:
        xx = -xx
    return 1 + BELL_PARITIES[(zz, xx)]


_PARITY_FLIPS = {"x": (True, False), "z": (False, True), "y": (True, True)}


def _infer_twist(alice, bob, spec: EigenbasisSpec) -> Optional[int]:
    alice_sub = bit(_entry(alice, "sigma_z_As", Party.ALICE))
    bob_sub = bit(_entry(bob, "sigma_z_Bs", Party.BOB))
    theta = -spec.u_angle
    twist = theta if alice_sub and bob_sub else 0.0
    loop = settle_loop(alice, bob, stage="untwist", coupler=Party.BOB, budget=spec.n_ebits - 2,
                       twist=twist, rotator_angle=theta if alice_sub else 0.0)
    if not loop.closed:
        return None
    zz, xx = bell_parities(alice, bob)
    if loop.flips ^ loop.closure_flip:
        flip_zz, flip_xx = _PARITY_FLIPS[spec.u_axis]
        zz, xx = (-zz if flip_zz else zz), (-xx if flip_xx else xx)
    return 1 + 4 * (2 * alice_sub + bob_sub) + BELL_PARITIES[(zz, xx)]


_INFERENCE: dict[Family, Callable] = {
    Family.TWISTED_PRODUCT: _infer_product,
    Family.GENERAL_PRODUCT: _infer_product,
    Family.NONMAX_EQUAL: _infer_nonmax_equal,
    Family.NONMAX_BELL: _infer_nonmax_bell,
    Family.NONMAX_GENERAL: _infer_nonmax_general,
    Family.TWIST_4X4: _infer_twist,
}


def infer_outcome(alice_record, bob_record, spec: EigenbasisSpec) -> Optional[int]:
    """Eigenstate index (1-based) named by the records, or None when the run failed."""
    return _INFERENCE[spec.family](record_values(alice_record), record_values(bob_record), spec)
