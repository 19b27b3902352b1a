"""
Exception hierarchy shared by the engine, the protocols and the CLI.
"""


class SimulationError(Exception):
    """Base class for every error raised by stator_measure."""


class StructuralError(SimulationError):
    """Register, bitstring or record shape does not match what an operation needs."""


class ParameterError(SimulationError, ValueError):
    """A value is out of its allowed range (angles, unitarity, unsupported U_B)."""


class LocalityError(SimulationError):
    """A party touched a qubit or read a record entry it does not own."""


class ProtocolError(SimulationError):
    """A protocol invariant broke: stale stator, replay divergence, non-bijective table."""


class ResourceError(SimulationError):
    """Ebit budget or register capacity exhausted."""
