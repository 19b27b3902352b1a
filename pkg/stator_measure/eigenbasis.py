"""
Measured observables, described by their eigenbases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

import qcore
from config import simulation_config
from correction import is_closed
from errors import ParameterError
from qcore import Party, QubitRef, StateVector


class Family(str, Enum):
    TWISTED_PRODUCT = "twisted-product"
    GENERAL_PRODUCT = "general-product"
    NONMAX_EQUAL = "nonmax-equal"
    NONMAX_BELL = "nonmax-bell"
    NONMAX_GENERAL = "nonmax-general"
    TWIST_4X4 = "twist-4x4"


NONMAX_FAMILIES = (Family.NONMAX_EQUAL, Family.NONMAX_BELL, Family.NONMAX_GENERAL)

# Fewest ebits each protocol can be run with when its loop needs no step
MIN_EBITS = {
    Family.TWISTED_PRODUCT: 1,
    Family.GENERAL_PRODUCT: 1,
    Family.NONMAX_EQUAL: 2,
    Family.NONMAX_BELL: 2,
    Family.NONMAX_GENERAL: 2,
    Family.TWIST_4X4: 2,
}

TWO_QUBIT_REGISTER = (QubitRef("A", Party.ALICE), QubitRef("B", Party.BOB))
FOUR_BY_FOUR_REGISTER = (
    QubitRef("A_s", Party.ALICE), QubitRef("A_q", Party.ALICE),
    QubitRef("B_s", Party.BOB), QubitRef("B_q", Party.BOB),
)

# Bell coefficient matrices psi[a, b], ordered phi+, phi-, psi+, psi-
BELL_COEFFICIENTS = [
    np.array([[1, 0], [0, 1]]) / math.sqrt(2),
    np.array([[1, 0], [0, -1]]) / math.sqrt(2),
    np.array([[0, 1], [1, 0]]) / math.sqrt(2),
    np.array([[0, 1], [-1, 0]]) / math.sqrt(2),
]
BELL_NAMES = ("phi+", "phi-", "psi+", "psi-")


def system_register(family: Family) -> tuple[QubitRef, ...]:
    return FOUR_BY_FOUR_REGISTER if family is Family.TWIST_4X4 else TWO_QUBIT_REGISTER


def is_degenerate(angle: float) -> bool:
    """alpha = 0 or pi collapses a nonmaximal family onto the computational basis."""
    tol = simulation_config["tolerances"]["linear_algebra"]
    return abs(angle) < tol or abs(angle - math.pi) < tol


def loop_twist(family: Family, alpha: float, u_angle: float = 0.0) -> Optional[float]:
    """First angle of the untwisting loop that runs ahead of a remote Bell measurement."""
    if family is Family.NONMAX_BELL:
        return alpha / 2 - math.pi / 4
    if family is Family.TWIST_4X4:
        return -u_angle
    return None


def min_ebits(family: Family, alpha: float = math.pi / 2, u_angle: float = 0.0) -> int:
    """
    The remote Bell measurement spends two ebits, so its loop gets n - 2.
    That loop needs at least one step unless its twist is already a multiple
    of pi/2 (or the family collapses onto local measurements).
    """
    family = Family(family)
    twist = loop_twist(family, alpha, u_angle)
    if twist is None or is_closed(twist):
        return MIN_EBITS[family]
    if family is Family.NONMAX_BELL and is_degenerate(alpha):
        return MIN_EBITS[family]
    return MIN_EBITS[family] + 1


@dataclass(frozen=True)
class EigenbasisSpec:
    """
    family: protocol family
    alpha, beta: Schmidt angles (beta only for nonmax-general)
    phi1, phi2: relative phases of nonmax-general
    u_axis, u_angle: U_B = exp(i u_angle sigma_u_axis) for twist-4x4
    n_ebits: total ebit budget of the protocol
    """
    family: Family
    alpha: float = math.pi / 2
    beta: Optional[float] = None
    phi1: float = 0.0
    phi2: float = 0.0
    u_axis: str = "y"
    u_angle: float = 0.0
    n_ebits: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.TWISTED_PRODUCT:
            if abs(self.alpha - math.pi / 2) > simulation_config["tolerances"]["linear_algebra"]:
                raise ParameterError(
                    f"twisted-product is fixed at alpha = pi/2, got {self.alpha}; use general-product for other angles"
                )
            if self.n_ebits not in (None, 1):
                raise ParameterError(f"twisted-product uses exactly 1 ebit, got {self.n_ebits}")
        if self.n_ebits is None:
            default = simulation_config["protocols"]["default_n_ebits"][self.family.value]
            object.__setattr__(self, "n_ebits", default)
        if self.beta is None:
            object.__setattr__(self, "beta", self.alpha)
        self._validate()

    def _validate(self):
        for name in ("alpha", "beta", "phi1", "phi2", "u_angle"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.family is Family.GENERAL_PRODUCT and not 0 < self.alpha < math.pi:
            raise ParameterError(f"general-product needs 0 < alpha < pi, got {self.alpha}")
        if self.family in NONMAX_FAMILIES:
            for name in ("alpha", "beta"):
                value = getattr(self, name)
                if not -1e-15 <= value <= math.pi + 1e-15:
                    raise ParameterError(f"{name} must lie in [0, pi], got {value}")
        if self.family is Family.TWIST_4X4 and self.u_axis not in qcore.PAULI:
            raise ParameterError(
                f"U_B must be exp(i theta sigma_T) with T in x, y, z; got axis {self.u_axis!r}"
            )
        minimum = self.min_ebits
        if not isinstance(self.n_ebits, int) or self.n_ebits < minimum:
            detail = ""
            if minimum > MIN_EBITS[self.family]:
                detail = " (2 for the remote Bell measurement, 1 for the untwisting loop)"
            raise ParameterError(f"{self.family.value} needs at least {minimum} ebits{detail}, got {self.n_ebits}")

    @property
    def loop_twist(self) -> Optional[float]:
        return loop_twist(self.family, self.alpha, self.u_angle)

    @property
    def min_ebits(self) -> int:
        return min_ebits(self.family, self.alpha, self.u_angle)

    @property
    def gamma(self) -> float:
        return (self.alpha - self.beta) / 2

    @property
    def total_ebits(self) -> int:
        """Ebits a run may prepare; nonmax-general spends n - 1 in each of its two loops."""
        if self.family is Family.NONMAX_GENERAL:
            return 1 + 2 * (self.n_ebits - 1)
        return self.n_ebits

    @property
    def u_b(self) -> np.ndarray:
        return qcore.rotation(self.u_axis, self.u_angle)

    @property
    def size(self) -> int:
        return 16 if self.family is Family.TWIST_4X4 else 4

    @property
    def degenerate(self) -> bool:
        if self.family in (Family.NONMAX_EQUAL, Family.NONMAX_BELL):
            return is_degenerate(self.alpha)
        if self.family is Family.NONMAX_GENERAL:
            return is_degenerate(self.alpha) and is_degenerate(self.beta)
        return False

    @classmethod
    def twist_from_unitary(cls, u_b: np.ndarray, n_ebits: Optional[int] = None) -> "EigenbasisSpec":
        """
        Accept U_B as a matrix. Only rotations about one coordinate axis (up
        to global phase) are supported: the correction Paulis of any other
        axis would not map Bell states onto Bell states.
        """
        u_b = np.asarray(u_b, dtype=complex)
        if u_b.shape != (2, 2) or not np.allclose(u_b @ u_b.conj().T, np.eye(2), atol=1e-12):
            raise ParameterError("U_B must be a 2x2 unitary")
        special = u_b / np.sqrt(np.linalg.det(u_b))
        cosine = float(np.trace(special).real / 2)
        components = np.array([np.trace(special @ qcore.PAULI[a]).imag / 2 for a in "xyz"])
        tol = 1e-12
        nonzero = np.flatnonzero(np.abs(components) > tol)
        if nonzero.size == 0:
            return cls(Family.TWIST_4X4, u_axis="y", u_angle=0.0 if cosine > 0 else math.pi, n_ebits=n_ebits)
        if nonzero.size > 1:
            raise ParameterError("U_B must rotate about a single coordinate axis")
        axis = "xyz"[int(nonzero[0])]
        return cls(Family.TWIST_4X4, u_axis=axis, u_angle=math.atan2(components[nonzero[0]], cosine),
                   n_ebits=n_ebits)


def _two_qubit(coefficients: np.ndarray) -> StateVector:
    return qcore.from_amplitudes(TWO_QUBIT_REGISTER, np.asarray(coefficients, dtype=complex).reshape(-1))


def _nonmax_states(alpha: float, beta: float, phi1: float, phi2: float) -> list[StateVector]:
    ca, sa = math.cos(alpha / 2), math.sin(alpha / 2)
    cb, sb = math.cos(beta / 2), math.sin(beta / 2)
    e1, e2 = np.exp(1j * phi1), np.exp(1j * phi2)
    return [
        _two_qubit([ca, 0, 0, e1 * sa]),
        _two_qubit([sa, 0, 0, -e1 * ca]),
        _two_qubit([0, cb, e2 * sb, 0]),
        _two_qubit([0, sb, -e2 * cb, 0]),
    ]


def _product_states(alpha: float) -> list[StateVector]:
    c, s = math.cos(alpha / 2), math.sin(alpha / 2)
    return [
        _two_qubit([1, 0, 0, 0]),
        _two_qubit([0, 1, 0, 0]),
        _two_qubit([0, 0, c, s]),
        _two_qubit([0, 0, s, -c]),
    ]


def _twist_states(u_b: np.ndarray) -> list[StateVector]:
    states = []
    for cell in range(4):
        alice_sub, bob_sub = divmod(cell, 2)
        for bell in BELL_COEFFICIENTS:
            pair = bell @ u_b.T if cell == 3 else bell
            amplitudes = np.zeros((2, 2, 2, 2), dtype=complex)
            amplitudes[alice_sub, :, bob_sub, :] = pair
            states.append(qcore.from_amplitudes(FOUR_BY_FOUR_REGISTER, amplitudes.reshape(-1)))
    return states


def eigenbasis(spec: EigenbasisSpec) -> list[StateVector]:
    """Orthonormal eigenstates, index k of the list is eigenstate k+1."""
    if spec.family in (Family.TWISTED_PRODUCT, Family.GENERAL_PRODUCT):
        return _product_states(spec.alpha)
    if spec.family in (Family.NONMAX_EQUAL, Family.NONMAX_BELL):
        return _nonmax_states(spec.alpha, spec.alpha, 0.0, 0.0)
    if spec.family is Family.NONMAX_GENERAL:
        return _nonmax_states(spec.alpha, spec.beta, spec.phi1, spec.phi2)
    return _twist_states(spec.u_b)
