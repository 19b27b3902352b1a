"""
Party discipline for protocol execution: per-party outcome records, gate
logs and the read firewall between the two parties.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Protocol, Sequence

import numpy as np

import qcore
from errors import LocalityError, ProtocolError, ResourceError, StructuralError
from qcore import Gate, Party, QubitLike, QubitRef, Role, StateVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecordEntry:
    label: str
    value: int


@dataclass
class OutcomeRecord:
    """Append-only log of one party's measurement results v(.) in {+1, -1}."""
    party: Party
    entries: list[RecordEntry] = field(default_factory=list)

    def append(self, label: str, value: int) -> None:
        if value not in (1, -1):
            raise StructuralError(f"record value {value} for {label!r} is not +1/-1")
        if label in self:
            raise StructuralError(f"record label {label!r} already written by {self.party.value}")
        self.entries.append(RecordEntry(label, value))

    def __contains__(self, label: str) -> bool:
        return any(entry.label == label for entry in self.entries)

    def value(self, label: str) -> int:
        for entry in self.entries:
            if entry.label == label:
                return entry.value
        raise StructuralError(f"{self.party.value}'s record has no entry {label!r}")

    def as_dict(self) -> dict[str, int]:
        return {entry.label: entry.value for entry in self.entries}

    def signature(self) -> tuple[tuple[str, int], ...]:
        return tuple((entry.label, entry.value) for entry in self.entries)


def record_values(record: "OutcomeRecord | Mapping[str, int] | Sequence") -> dict[str, int]:
    """Normalize a record given as OutcomeRecord, mapping or (label, value) pairs."""
    if isinstance(record, OutcomeRecord):
        return record.as_dict()
    if isinstance(record, Mapping):
        return dict(record)
    values = {}
    for item in record:
        label, value = (item.label, item.value) if isinstance(item, RecordEntry) else item
        values[label] = value
    return values


class OutcomeChooser(Protocol):
    def choose(self, label: str, options: Sequence[tuple[int, float]]) -> int:
        ...


class FirstOutcomeChooser:
    """Always follows the first surviving outcome (+1 when available)."""

    def choose(self, label: str, options: Sequence[tuple[int, float]]) -> int:
        return options[0][0]


class ScriptedChooser:
    """Forces outcomes by record label; unscripted labels take the first surviving outcome."""

    def __init__(self, outcomes: Mapping[str, int]):
        self.outcomes = dict(outcomes)

    def choose(self, label: str, options: Sequence[tuple[int, float]]) -> int:
        available = [outcome for outcome, _ in options]
        wanted = self.outcomes.get(label, available[0])
        if wanted not in available:
            raise ProtocolError(f"scripted outcome {wanted} for {label!r} has zero probability")
        return wanted


@dataclass(frozen=True)
class GateEvent:
    name: str
    targets: tuple[str, ...]
    fingerprint: bytes


@dataclass(frozen=True)
class ReadEvent:
    reader: Party
    owner: Party
    label: str


class LocalityContext:
    """
    Single-trajectory execution context. Outcomes of measurements are picked by
    the chooser; the running weight is the product of the chosen probabilities.

    In strict mode every cross-party gate or read raises LocalityError; in
    audit mode the violation is recorded and execution continues.

    A memo shared between contexts that replay the same protocol keys every
    state computation by (outcome path so far, operation index); replays
    reuse the states of the prefix they share. Party checks, records and
    logs are still written by every context.
    """

    def __init__(self, chooser: Optional[OutcomeChooser] = None, *, strict: bool = True,
                 ebit_budget: Optional[int] = None, memo: Optional[dict] = None):
        self.chooser = chooser or FirstOutcomeChooser()
        self.strict = strict
        self.ebit_budget = ebit_budget
        self.memo = memo
        self.path: list[int] = []
        self._operations = 0
        self.records = {Party.ALICE: OutcomeRecord(Party.ALICE), Party.BOB: OutcomeRecord(Party.BOB)}
        self.gate_log: dict[Party, list[GateEvent]] = {Party.ALICE: [], Party.BOB: []}
        self.reads: list[ReadEvent] = []
        self.violations: list[str] = []
        self.remote_targets: list[str] = []
        self.discarded: set[str] = set()
        self.weight = 1.0
        self.ebits_prepared = 0
        self.ebits_consumed = 0

    # Locality bookkeeping
    def _violation(self, message: str) -> None:
        if self.strict:
            raise LocalityError(message)
        logger.debug("locality violation recorded: %s", message)
        self.violations.append(message)

    def _check_owner(self, party: Party, state: StateVector, targets: Sequence[QubitLike]) -> None:
        for target in targets:
            ref = state.qubit(target)
            if ref.party is not party:
                self._violation(f"{party.value} acted on {ref.name!r} owned by {ref.party.value}")

    def mark_remote_target(self, *names: str) -> None:
        for name in names:
            if name not in self.remote_targets:
                self.remote_targets.append(name)

    def _memoised(self, compute: Callable[[], Any]) -> Any:
        key = (tuple(self.path), self._operations)
        self._operations += 1
        if self.memo is None:
            return compute()
        if key not in self.memo:
            self.memo[key] = compute()
        return self.memo[key]

    @property
    def remaining_ebits(self) -> Optional[int]:
        if self.ebit_budget is None:
            return None
        return self.ebit_budget - self.ebits_prepared

    # Operations
    def apply(self, party: Party, state: StateVector, matrix: np.ndarray, targets: Sequence[QubitLike],
              name: str = "U") -> StateVector:
        self._check_owner(party, state, targets)

        def compute():
            gate = Gate(matrix, tuple(targets))
            return GateEvent(name, gate.targets, gate.matrix.tobytes()), qcore.apply_gate(state, gate)

        event, out = self._memoised(compute)
        self.gate_log[party].append(event)
        return out

    def measure(self, party: Party, state: StateVector, target: QubitLike, axis: str, label: str,
                *, discard: bool = True) -> tuple[int, StateVector]:
        self._check_owner(party, state, [target])
        ref = state.qubit(target)
        measure = qcore.measure_and_discard if discard else qcore.measure_branches
        branches = self._memoised(lambda: measure(state, axis, target))
        options = [(branch.outcome, branch.probability) for branch in branches]
        outcome = self.chooser.choose(label, options)
        chosen = next(branch for branch in branches if branch.outcome == outcome)
        self.path.append(outcome)
        self.weight *= chosen.probability
        self.records[party].append(label, outcome)
        if discard:
            self.discarded.add(ref.name)
            if ref.role is Role.EBIT_HALF and ref.partner in self.discarded:
                self.ebits_consumed += 1
        return outcome, chosen.post_state

    def read(self, reader: Party, label: str) -> int:
        """Conditional read of a record entry; the reader must own the entry."""
        for owner, record in self.records.items():
            if label in record:
                self.reads.append(ReadEvent(reader, owner, label))
                if owner is not reader:
                    self._violation(f"{reader.value} read {owner.value}'s entry {label!r}")
                return record.value(label)
        raise StructuralError(f"no record holds {label!r}")

    def prepare_ebit(self, state: StateVector) -> tuple[StateVector, QubitRef, QubitRef]:
        if self.remaining_ebits is not None and self.remaining_ebits <= 0:
            raise ResourceError(f"ebit budget of {self.ebit_budget} exhausted")
        index = self.ebits_prepared + 1
        a = QubitRef(f"a{index}", Party.ALICE, Role.EBIT_HALF, partner=f"b{index}")
        b = QubitRef(f"b{index}", Party.BOB, Role.EBIT_HALF, partner=f"a{index}")
        pair = qcore.from_amplitudes((a, b), np.array([1, 0, 0, 1]) / np.sqrt(2))
        state = self._memoised(lambda: qcore.tensor_product(state, pair))
        self.ebits_prepared += 1
        return state, a, b
