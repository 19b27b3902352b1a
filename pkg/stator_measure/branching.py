"""
Exhaustive branch exploration by replay.

A protocol is an ordinary single-trajectory function of a LocalityContext.
Every measurement asks the context's chooser for an outcome; the replay
chooser follows a forced prefix and queues the untaken siblings, so rerunning
the protocol once per queued prefix visits every leaf of the outcome tree.
The replays of one enumeration share a memo, so the states along a shared
prefix are computed once.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from errors import ProtocolError
from locality import LocalityContext

logger = logging.getLogger(__name__)


@dataclass
class Leaf:
    path: tuple[int, ...]
    probability: float
    context: LocalityContext
    result: Any


class ReplayChooser:

    def __init__(self, prefix: tuple[int, ...]):
        self.prefix = prefix
        self.path: list[int] = []
        self.siblings: list[tuple[int, ...]] = []

    def choose(self, label: str, options: Sequence[tuple[int, float]]) -> int:
        available = [outcome for outcome, _ in options]
        depth = len(self.path)
        if depth < len(self.prefix):
            outcome = self.prefix[depth]
            if outcome not in available:
                raise ProtocolError(f"replay diverged at {label!r}: {outcome} no longer possible")
        else:
            outcome = available[0]
            for other in available[1:]:
                self.siblings.append(tuple(self.path) + (other,))
        self.path.append(outcome)
        return outcome


class SampledChooser:
    """Draws each outcome from its Born probability with a seeded generator."""

    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.path: list[int] = []

    def choose(self, label: str, options: Sequence[tuple[int, float]]) -> int:
        probabilities = np.array([p for _, p in options])
        pick = self.rng.choice(len(options), p=probabilities / probabilities.sum())
        outcome = options[int(pick)][0]
        self.path.append(outcome)
        return outcome


def _path_key(leaf: Leaf) -> tuple[int, ...]:
    return tuple(0 if outcome == 1 else 1 for outcome in leaf.path)


def enumerate_branches(run: Callable[[LocalityContext], Any], *, strict: bool = True,
                       ebit_budget: Optional[int] = None) -> list[Leaf]:
    """Run every outcome path once; leaves come back ordered with +1 before -1 at each level."""
    pending: list[tuple[int, ...]] = [()]
    leaves: list[Leaf] = []
    memo: dict = {}
    while pending:
        prefix = pending.pop()
        chooser = ReplayChooser(prefix)
        ctx = LocalityContext(chooser, strict=strict, ebit_budget=ebit_budget, memo=memo)
        result = run(ctx)
        leaves.append(Leaf(tuple(chooser.path), ctx.weight, ctx, result))
        pending.extend(chooser.siblings)
    leaves.sort(key=_path_key)
    logger.debug("enumerated %d branches", len(leaves))
    return leaves


def sample_branch(run: Callable[[LocalityContext], Any], seed: int, *, strict: bool = True,
                  ebit_budget: Optional[int] = None) -> Leaf:
    chooser = SampledChooser(seed)
    ctx = LocalityContext(chooser, strict=strict, ebit_budget=ebit_budget)
    result = run(ctx)
    return Leaf(tuple(chooser.path), ctx.weight, ctx, result)
