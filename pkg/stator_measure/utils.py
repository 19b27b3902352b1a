import logging
import math
import re
from fractions import Fraction
from typing import Union

import numpy as np

import qcore
from config import enable_debug
from eigenbasis import EigenbasisSpec, eigenbasis, system_register
from errors import ParameterError, StructuralError
from qcore import StateVector
from structure_outputs import AngleOutput

# "pi", "-pi/4", "3pi/16", "3*pi/8", "pi*3/8"
_PI_FRACTION = re.compile(
    r"^\s*(?P<sign>[+-]?)\s*(?:(?P<num>\d+)\s*\*?\s*)?pi(?:\s*\*\s*(?P<num2>\d+))?(?:\s*/\s*(?P<den>\d+))?\s*$"
)


def configure_logging(debug: bool = None) -> None:
    """DEBUG when enabled (config or STATOR_MEASURE_DEBUG), WARNING otherwise."""
    debug = enable_debug["DEBUG"] if debug is None else debug
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def parse_angle(text: Union[str, float, int]) -> AngleOutput:
    """Radians, or a fraction of pi written symbolically. The symbolic tag is kept."""
    if isinstance(text, (int, float)):
        value = float(text)
        if not math.isfinite(value):
            raise ParameterError(f"angle {text!r} is not finite")
        return AngleOutput(value=value)
    match = _PI_FRACTION.match(text)
    if match:
        numerator = int(match["num"] or 1) * int(match["num2"] or 1)
        denominator = int(match["den"] or 1)
        if denominator == 0:
            raise ParameterError(f"angle {text!r} divides by zero")
        sign = -1 if match["sign"] == "-" else 1
        return AngleOutput(value=sign * numerator * math.pi / denominator, symbolic=text.strip().replace(" ", ""))
    try:
        value = float(text)
    except ValueError:
        raise ParameterError(f"cannot parse angle {text!r}") from None
    if not math.isfinite(value):
        raise ParameterError(f"angle {text!r} is not finite")
    return AngleOutput(value=value)


def angle_label(value: float, max_denominator: int = 256) -> str:
    """pi/8-style label when value is a small fraction of pi, else the float."""
    fraction = Fraction(value / math.pi).limit_denominator(max_denominator)
    if abs(float(fraction) * math.pi - value) > 1e-12:
        return f"{value:.10g}"
    if fraction == 0:
        return "0"
    numerator = "" if abs(fraction.numerator) == 1 else str(abs(fraction.numerator))
    sign = "-" if fraction < 0 else ""
    head = f"{sign}{numerator}pi"
    return head if fraction.denominator == 1 else f"{head}/{fraction.denominator}"


def parse_input(text: str, spec: EigenbasisSpec) -> StateVector:
    """
    Input state on the family's system register:
        eigen:k      k-th eigenstate (1-based)
        0110         computational basis label
        a,b,c,d      amplitude list; complex entries as Python literals (1j, 0.5-0.5j)
    """
    register = system_register(spec.family)
    text = text.strip()
    if text.startswith("eigen:"):
        try:
            index = int(text.split(":", 1)[1])
        except ValueError:
            raise ParameterError(f"bad eigenstate index in {text!r}") from None
        if not 1 <= index <= spec.size:
            raise ParameterError(f"eigenstate index {index} outside 1..{spec.size}")
        return eigenbasis(spec)[index - 1]
    if text and set(text) <= {"0", "1"}:
        return qcore.make_state(register, text)
    try:
        amplitudes = np.array([complex(part.replace(" ", "")) for part in text.split(",")])
    except ValueError:
        raise ParameterError(f"cannot parse input {text!r}") from None
    if amplitudes.size != 2 ** len(register):
        raise StructuralError(f"{amplitudes.size} amplitudes for a {len(register)}-qubit register")
    return qcore.from_amplitudes(register, amplitudes, normalize=True)


def draw_graph(graph) -> str:
    """Mermaid source of a compiled LangGraph graph."""
    return graph.get_graph().draw_mermaid()
