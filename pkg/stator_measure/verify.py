"""
Oracles and audits over protocol runs.

The Born oracle is computed from the eigenbasis by direct inner products; the
audits look only at finished branch trees (records, gate logs, post-states),
so nothing here shares a code path with the protocol bodies under test.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

import qcore
import stator
from config import simulation_config
from correction import closing_step
from eigenbasis import EigenbasisSpec, Family, eigenbasis, min_ebits, system_register
from errors import ProtocolError, StructuralError
from inference import REFERENCE_TABLES, bit
from locality import LocalityContext, ScriptedChooser
from protocols import ProtocolRun, execute, protocol_body, run_protocol
from qcore import Party, QubitRef, StateVector
from structure_outputs import OracleReport, SweepRow
from utils import angle_label, parse_angle

logger = logging.getLogger(__name__)


def _tolerance(kind: str) -> float:
    return simulation_config["tolerances"][kind]


# Random inputs

def random_state(register: Sequence[QubitRef], rng: np.random.Generator) -> StateVector:
    dim = 2 ** len(register)
    amplitudes = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return qcore.from_amplitudes(register, amplitudes, normalize=True)


def apply_local_unitary(state: StateVector, party: Party, rng: np.random.Generator) -> StateVector:
    """Haar-random unitary on every system qubit of one party."""
    names = tuple(q.name for q in state.register if q.party is party)
    unitary = unitary_group.rvs(2 ** len(names), random_state=rng)
    return qcore.apply_gate(state, qcore.Gate(unitary, names))


def acceptance_specs() -> list[EigenbasisSpec]:
    """The observables every suite covers by default."""
    cfg = simulation_config["verify"]
    alpha = parse_angle(cfg["nonmax_alpha"]).value
    beta = parse_angle(cfg["nonmax_beta"]).value
    specs = [EigenbasisSpec(Family.TWISTED_PRODUCT)]
    specs += [EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=parse_angle(a).value)
              for a in cfg["general_product_alphas"]]
    specs += [
        EigenbasisSpec(Family.NONMAX_EQUAL, alpha=alpha),
        EigenbasisSpec(Family.NONMAX_BELL, alpha=alpha),
        EigenbasisSpec(Family.NONMAX_GENERAL, alpha=alpha, beta=beta),
        EigenbasisSpec(Family.TWIST_4X4, u_axis="y", u_angle=0.0),
        EigenbasisSpec(Family.TWIST_4X4, u_axis="y", u_angle=cfg["twist_angle"]),
    ]
    return specs


def describe(spec: EigenbasisSpec) -> str:
    if spec.family is Family.TWIST_4X4:
        return f"{spec.family.value}[{spec.u_axis}:{angle_label(spec.u_angle)}, n={spec.n_ebits}]"
    if spec.family is Family.NONMAX_GENERAL:
        return f"{spec.family.value}[{angle_label(spec.alpha)},{angle_label(spec.beta)}, n={spec.n_ebits}]"
    return f"{spec.family.value}[{angle_label(spec.alpha)}, n={spec.n_ebits}]"


# Born rule

def born_oracle(spec: EigenbasisSpec, input_state: StateVector) -> np.ndarray:
    """p_k = |<Psi_k|psi>|^2."""
    return np.array([abs(qcore.inner_product(state, input_state)) ** 2 for state in eigenbasis(spec)])


def eigenstate_success(spec: EigenbasisSpec) -> np.ndarray:
    """Success probability of the protocol on each eigenstate."""
    return np.array([run_protocol(spec, state).success_probability for state in eigenbasis(spec)])


def purified_input(spec: EigenbasisSpec) -> tuple[StateVector, tuple[str, ...]]:
    """The system register maximally entangled with an untouched copy of itself."""
    register = system_register(spec.family)
    reference = tuple(QubitRef(f"{q.name}_ref", q.party) for q in register)
    dim = 2 ** len(register)
    state = qcore.from_amplitudes(register + reference, np.eye(dim).reshape(-1) / math.sqrt(dim))
    return state, tuple(q.name for q in reference)


def effect_operators(spec: EigenbasisSpec) -> np.ndarray:
    """
    E_k with P(infer k | psi) = <psi|E_k|psi> for every input, read off one
    enumeration on the purified input: a branch of weight w that leaves the
    reference in rho contributes d w rho^T to the effect of its inferred index.
    """
    state, reference = purified_input(spec)
    run = execute(spec, state, protocol_body(spec))
    dim = spec.size
    effects = np.zeros((dim, dim, dim), dtype=complex)
    for branch in run.branches:
        if branch.failed:
            continue
        rho = qcore.partial_trace(branch.post_state, reference).matrix
        effects[branch.inferred - 1] += dim * branch.probability * rho.T
    return effects


def effect_distribution(effects: np.ndarray, input_state: StateVector) -> np.ndarray:
    psi = input_state.amplitudes
    return np.einsum("i,kij,j->k", psi.conj(), effects, psi).real


def effect_success(spec: EigenbasisSpec, effects: np.ndarray) -> np.ndarray:
    """s_k = <Psi_k|E_k|Psi_k>, the same numbers eigenstate_success gets from k separate runs."""
    return np.array([effect_distribution(effects, state)[index] for index, state in enumerate(eigenbasis(spec))])


def effect_reports(spec: EigenbasisSpec, success: np.ndarray,
                   effects: Optional[np.ndarray] = None) -> list[OracleReport]:
    """E_k = s_k |Psi_k><Psi_k| as operators, which is the Born rule on every input at once."""
    effects = effect_operators(spec) if effects is None else effects
    tol = _tolerance("protocol")
    reports = []
    for index, state in enumerate(eigenbasis(spec)):
        projector = np.outer(state.amplitudes, state.amplitudes.conj())
        deviation = float(np.linalg.norm(effects[index] - success[index] * projector, ord=2))
        reports.append(OracleReport.check(f"born {describe(spec)} effect {index + 1}: ||E_k - s_k P_k||",
                                          0.0, deviation, tol))
    return reports


def born_reports(spec: EigenbasisSpec, inputs: Iterable[StateVector],
                 success: Optional[np.ndarray] = None, effects: Optional[np.ndarray] = None,
                 direct: Optional[int] = None) -> list[OracleReport]:
    """
    Each successful branch projects onto one eigenstate, so the probability of
    inferring k is p_k times the success rate of eigenstate k. Dividing that
    rate out gives the distribution the oracle predicts; when every rate is
    equal this is the success-conditioned distribution.

    Input distributions come from the effect operators; the first `direct`
    inputs are also run through the protocol and must agree with them.
    """
    effects = effect_operators(spec) if effects is None else effects
    success = effect_success(spec, effects) if success is None else success
    direct = simulation_config["verify"]["direct_born_inputs"] if direct is None else direct
    tol = _tolerance("protocol")
    reports = []
    for i, input_state in enumerate(inputs):
        expected = born_oracle(spec, input_state)
        observed = effect_distribution(effects, input_state)
        if i < direct:
            ran = run_protocol(spec, input_state).outcome_distribution(conditioned=False)
            reports.append(OracleReport.check(f"born {describe(spec)} input {i}: direct run vs effects",
                                              0.0, float(np.max(np.abs(ran - observed))), tol))
        corrected = np.divide(observed, success, out=np.zeros_like(observed), where=success > 0)
        deviation = float(np.max(np.abs(corrected - expected)))
        reports.append(OracleReport.check(f"born {describe(spec)} input {i}: max |p_k - oracle|", 0.0, deviation, tol))
    return reports


# Eigenstate certainty

def eigen_certainty_reports(spec: EigenbasisSpec) -> list[OracleReport]:
    tol = _tolerance("protocol")
    reports = []
    for index, state in enumerate(eigenbasis(spec), start=1):
        run = run_protocol(spec, state)
        wrong = sum(b.probability for b in run.branches if not b.failed and b.inferred != index)
        reports.append(OracleReport.check(f"certainty {describe(spec)} eigenstate {index}: wrong-index mass",
                                          0.0, wrong, tol))
        reports.append(OracleReport.check(f"certainty {describe(spec)} eigenstate {index}: total probability",
                                          1.0, run.total_probability, tol))
    return reports


# No-signaling

def record_marginal_distance(first: ProtocolRun, second: ProtocolRun, party: Party) -> float:
    """Total-variation distance between one party's record marginals in two runs."""
    p, q = first.record_marginal(party), second.record_marginal(party)
    return 0.5 * sum(abs(p.get(key, 0.0) - q.get(key, 0.0)) for key in set(p) | set(q))


def _party_density(state: StateVector, party: Party) -> np.ndarray:
    names = [q.name for q in state.register if q.party is party]
    return qcore.partial_trace(state, names).matrix


def _is_eigenstate(spec: EigenbasisSpec, state: StateVector) -> bool:
    return float(np.max(born_oracle(spec, state))) > 1 - _tolerance("protocol")


def no_signaling_audit(runs: Sequence[ProtocolRun]) -> list[OracleReport]:
    """
    (i) For each party, any two runs of the same observable whose inputs give
    that party the same reduced state must give it the same record marginal.
    (ii) On eigenstate inputs, every qubit that was the target of a remote
    operation ends maximally mixed.
    """
    tol = _tolerance("protocol")
    reports = []
    if any(run.sampled for run in runs):
        raise ProtocolError("no-signaling audit needs complete branch trees, not sampled runs")
    for first, second in combinations(range(len(runs)), 2):
        a, b = runs[first], runs[second]
        if a.spec != b.spec:
            continue
        for party in Party:
            reduced_a = _party_density(a.input_state, party)
            reduced_b = _party_density(b.input_state, party)
            if not np.allclose(reduced_a, reduced_b, atol=tol, rtol=0):
                continue
            distance = record_marginal_distance(a, b, party)
            reports.append(OracleReport.check(
                f"no-signaling {describe(a.spec)} runs {first}/{second}: {party.value} record marginal TV",
                0.0, distance, tol))
    for i, run in enumerate(runs):
        if not _is_eigenstate(run.spec, run.input_state):
            continue
        for qubit in run.remote_targets:
            distance = run.reduced_state(qubit).distance_to_maximally_mixed()
            reports.append(OracleReport.check(
                f"erasure {describe(run.spec)} run {i}: ||rho_{qubit} - I/2||", 0.0, distance, tol))
    return reports


def no_signaling_runs(spec: EigenbasisSpec, rng: np.random.Generator, pairs: int = 2) -> list[ProtocolRun]:
    """Eigenstate runs plus, for each party, inputs differing only by the other party's local unitary."""
    runs = [run_protocol(spec, state) for state in eigenbasis(spec)]
    register = system_register(spec.family)
    for _ in range(pairs):
        for party in Party:
            base = random_state(register, rng)
            runs.append(run_protocol(spec, base))
            runs.append(run_protocol(spec, apply_local_unitary(base, party.other, rng)))
    return runs


# Locality

def locality_audit(run: ProtocolRun) -> list[OracleReport]:
    violations = sum(len(branch.violations) for branch in run.branches)
    cross_reads = sum(branch.cross_reads for branch in run.branches)
    return [
        OracleReport.check(f"locality {describe(run.spec)}: cross-party operations", 0.0, violations, 0.0),
        OracleReport.check(f"locality {describe(run.spec)}: cross-party record reads", 0.0, cross_reads, 0.0),
    ]


def fixed_schedule_audit(run: ProtocolRun, party: Party) -> OracleReport:
    """A party's gate sequence must be a function of its own record alone."""
    schedules: dict[tuple, set] = {}
    for branch in run.branches:
        own = tuple(sorted(branch.record(party).items()))
        gates = tuple((g.name, g.targets, g.fingerprint) for g in branch.gates(party))
        schedules.setdefault(own, set()).add(gates)
    ambiguous = sum(1 for variants in schedules.values() if len(variants) > 1)
    return OracleReport.check(f"fixed schedule {describe(run.spec)}: {party.value} records with several gate logs",
                              0.0, ambiguous, 0.0)


def cross_conditioned_run(input_state: StateVector) -> ProtocolRun:
    """
    Deliberately broken protocol: Bob measures sigma_z_B, Alice flips A on
    Bob's outcome, then measures sigma_z_A. Run in audit mode so the illegal
    read is recorded instead of raised.
    """
    spec = EigenbasisSpec(Family.TWISTED_PRODUCT)

    def body(ctx: LocalityContext, state: StateVector) -> StateVector:
        _, state = ctx.measure(Party.BOB, state, "B", "z", "sigma_z_B", discard=False)
        if ctx.read(Party.ALICE, "sigma_z_B") == -1:
            state = ctx.apply(Party.ALICE, state, qcore.pauli("x"), ("A",), name="flip")
        _, state = ctx.measure(Party.ALICE, state, "A", "z", "sigma_z_A", discard=False)
        return state

    return execute(spec, input_state, body, strict=False, infer=False)


def negative_control_audits() -> dict[str, list[OracleReport]]:
    """Audits of the cross-conditioned protocol; each of them should contain a failing report."""
    register = system_register(Family.TWISTED_PRODUCT)
    superposed = qcore.from_amplitudes(register, [1, 1, 1, 1], normalize=True)
    runs = [cross_conditioned_run(qcore.make_state(register, "00")),
            cross_conditioned_run(qcore.make_state(register, "01"))]
    return {
        "no-signaling": no_signaling_audit(runs),
        "locality": locality_audit(runs[0]),
        "fixed schedule": [fixed_schedule_audit(cross_conditioned_run(superposed), Party.ALICE)],
    }


def negative_control_reports() -> list[OracleReport]:
    """One report per audit; it passes when the audit caught the broken protocol."""
    return [
        OracleReport.check(f"negative control: {name} audit flags the cross-conditioned protocol",
                           1.0, float(any(not report.passed for report in reports)), 0.0)
        for name, reports in negative_control_audits().items()
    ]


# Stator algebra

def stator_algebra_reports(samples: int, rng: np.random.Generator) -> list[OracleReport]:
    """
    sigma_x(a) S = s sigma_axis(B) S on the post-measurement stator state, for
    random two-qubit inputs, both branch signs and the x and y axes.
    """
    tol = _tolerance("linear_algebra")
    register = system_register(Family.TWISTED_PRODUCT)
    worst = {"x": 0.0, "y": 0.0}
    for _ in range(samples):
        state = random_state(register, rng)
        for axis in worst:
            for sign in (1, -1):
                ctx = LocalityContext(ScriptedChooser({"stator.sigma_x_b": sign}))
                prepared, a, b = ctx.prepare_ebit(state)
                built, coupling = stator.build_stator(ctx, prepared, b, "B", axis)
                if coupling.branch_sign != sign:
                    raise ProtocolError("scripted stator sign was not honoured")
                left = qcore.apply_gate(built, qcore.Gate(qcore.pauli("x"), (a.name,)))
                right = qcore.apply_gate(built, qcore.Gate(qcore.pauli(axis), ("B",)))
                deviation = float(np.max(np.abs(left.amplitudes - sign * right.amplitudes)))
                worst[axis] = max(worst[axis], deviation)
    return [OracleReport.check(f"stator eigenoperator identity, axis {axis}, {samples} samples", 0.0, value, tol)
            for axis, value in worst.items()]


# Success sweep

# family -> (eigenstate used, loop budget offset n - budget, twist of the loop)
_SWEEP_PROFILES = {
    Family.GENERAL_PRODUCT: (3, 0, lambda alpha: alpha / 2),
    Family.NONMAX_EQUAL: (1, 1, lambda alpha: alpha / 2),
    Family.NONMAX_BELL: (1, 2, lambda alpha: alpha / 2 - math.pi / 4),
}
SWEEP_FAMILIES = tuple(_SWEEP_PROFILES)


def closing_n(family: Family, alpha: float, n_max: int) -> Optional[int]:
    """Smallest ebit budget (up to n_max) at which the loop of this family can no longer fail."""
    _, offset, twist = _SWEEP_PROFILES[family]
    failures = closing_step(twist(alpha), n_max - offset)
    if failures is None:
        return None
    return max(failures + offset, min_ebits(family, alpha))


def loop_form(family: Family, alpha: float, n: int) -> float:
    _, offset, twist = _SWEEP_PROFILES[family]
    budget = n - offset
    if closing_step(twist(alpha), budget) is not None:
        return 1.0
    return 1.0 - 2.0 ** -budget


def quoted_form(n: int) -> float:
    return 1.0 - 1.0 / 2 ** (n - 1)


def sweep_alphas(steps: int) -> list[float]:
    """Open grid pi*j/steps, j = 1..steps-1."""
    return [math.pi * j / steps for j in range(1, steps)]


def success_sweep(family: Family, alphas: Iterable[float], ns: Iterable[int]) -> list[SweepRow]:
    family = Family(family)
    if family not in _SWEEP_PROFILES:
        raise StructuralError(f"no success sweep for {family.value}")
    eigen_index, _, _ = _SWEEP_PROFILES[family]
    ns = list(ns)
    rows = []
    for alpha in alphas:
        for n in (n for n in ns if n >= min_ebits(family, alpha)):
            spec = EigenbasisSpec(family, alpha=alpha, n_ebits=n)
            enumerated = run_protocol(spec, eigenbasis(spec)[eigen_index - 1]).success_probability
            rows.append(SweepRow(
                family=family.value, alpha=alpha, alpha_label=angle_label(alpha), n=n, stage_label=n - 1,
                enumerated=enumerated, loop_form=loop_form(family, alpha, n), quoted_form=quoted_form(n),
                closing_n=closing_n(family, alpha, max(ns)),
            ))
            logger.debug("sweep %s alpha=%s n=%d -> %.12f", family.value, angle_label(alpha), n, enumerated)
    return rows


def sweep_reports(rows: Iterable[SweepRow]) -> list[OracleReport]:
    tol = _tolerance("protocol")
    return [OracleReport.check(f"success {row.family} alpha={row.alpha_label} n={row.n}: enumerated vs loop form",
                               row.loop_form, row.enumerated, tol) for row in rows]


# (angle, ebits, success) pinned for general-product: two stages at a generic
# angle give 3/4; the listed angles close one step after their stage label
PINNED_SUCCESS = (
    ("1.0", 2, 0.75),
    ("0.3", 2, 0.75),
    ("pi/8", 3, 1.0),
    ("3pi/8", 3, 1.0),
    ("pi/16", 4, 1.0),
    ("3pi/16", 4, 1.0),
    ("5pi/16", 4, 1.0),
)


def pinned_sweep_reports() -> list[OracleReport]:
    tol = _tolerance("protocol")
    reports = []
    for text, n, expected in PINNED_SUCCESS:
        alpha = parse_angle(text).value
        row, = success_sweep(Family.GENERAL_PRODUCT, [alpha], [n])
        reports.append(OracleReport.check(f"success general-product alpha={text} n={n}", expected, row.enumerated, tol))
    return reports


# Map tables

@dataclass
class InferenceTable:
    """
    Record-keyed bijections from eigenstates to final computational outcomes.

    blocks: (v(sigma_z_a), v(sigma_x_b)) -> sorted rows (eigenstate index, (bit_A, bit_B))
    """
    family: Family
    blocks: dict[tuple[int, int], list[tuple[int, tuple[int, int]]]] = field(default_factory=dict)

    def divergences(self, reference: Optional[dict] = None) -> dict[tuple[int, int], list[str]]:
        reference = REFERENCE_TABLES.get(self.family) if reference is None else reference
        if reference is None:
            return {}
        found = {}
        for signature, rows in self.blocks.items():
            printed = reference.get(signature, [])
            notes = []
            for index, bits in rows:
                listed = [b for i, b in printed if i == index]
                if listed != [bits]:
                    shown = ", ".join(_ket(b) for b in listed) or "missing"
                    notes.append(f"Psi{index}: reference {shown}, derived {_ket(bits)}")
            if notes:
                found[signature] = notes
        return found


def _ket(bits: tuple[int, int]) -> str:
    return f"|{bits[0]}{bits[1]}>"


_TABLE_SIGNATURES = {
    Family.TWISTED_PRODUCT: ("untwist.1.sigma_z_a", "untwist.1.sigma_x_b"),
    Family.NONMAX_EQUAL: ("cnot.sigma_z_a", "cnot.sigma_x_b"),
    Family.NONMAX_GENERAL: ("cnot.sigma_z_a", "cnot.sigma_x_b"),
}


def _clean(alice: dict[str, int], bob: dict[str, int]) -> bool:
    """Every coupled loop step succeeded without a correction to fold in."""
    for stage in ("untwist", "residual"):
        step = 1
        while f"{stage}.{step}.sigma_z_b" in bob:
            coupled = alice.get(f"{stage}.{step}.sigma_x_a")
            if coupled is not None and (coupled != 1 or bob[f"{stage}.{step}.sigma_z_b"] != 1):
                return False
            step += 1
    return True


def derive_map_table(spec: EigenbasisSpec) -> InferenceTable:
    """
    Feed every eigenstate through the protocol and group the uncorrected
    branches by record signature. Within a signature every eigenstate must
    land on one outcome, and distinct eigenstates on distinct outcomes.
    """
    if spec.family not in _TABLE_SIGNATURES:
        raise StructuralError(f"no map table for {spec.family.value}")
    if spec.degenerate:
        raise StructuralError("degenerate angles have no remote stage to tabulate")
    alice_label, bob_label = _TABLE_SIGNATURES[spec.family]
    outcomes: dict[tuple[int, int], dict[int, set]] = {}
    for index, state in enumerate(eigenbasis(spec), start=1):
        for branch in run_protocol(spec, state).branches:
            alice, bob = branch.record(Party.ALICE), branch.record(Party.BOB)
            if not _clean(alice, bob):
                continue
            signature = (alice[alice_label], bob[bob_label])
            final = (bit(alice["sigma_z_A"]), bit(bob["sigma_z_B"]))
            outcomes.setdefault(signature, {}).setdefault(index, set()).add(final)
    table = InferenceTable(spec.family)
    for signature in sorted(outcomes, reverse=True):
        rows = []
        for index, finals in sorted(outcomes[signature].items()):
            if len(finals) != 1:
                raise ProtocolError(f"signature {signature} leaves eigenstate {index} undetermined: {sorted(finals)}")
            rows.append((index, finals.pop()))
        if len({bits for _, bits in rows}) != len(rows) or len(rows) != spec.size:
            raise ProtocolError(f"signature {signature} is not a bijection: {rows}")
        table.blocks[signature] = rows
    return table


# Reductions

def canonical_branches(run: ProtocolRun) -> list[tuple]:
    """Branches as (records, probability, amplitudes), ordered independently of measurement order."""
    keyed = []
    for branch in run.branches:
        key = (tuple(sorted(branch.record(Party.ALICE).items())), tuple(sorted(branch.record(Party.BOB).items())))
        keyed.append((key, branch.probability, branch.post_state))
    keyed.sort(key=lambda item: item[0])
    return keyed


def branch_tree_distance(first: ProtocolRun, second: ProtocolRun) -> float:
    """Largest per-branch probability / amplitude difference; inf when the record sets differ."""
    left, right = canonical_branches(first), canonical_branches(second)
    if [k for k, _, _ in left] != [k for k, _, _ in right]:
        return math.inf
    worst = 0.0
    for (_, p, x), (_, q, y) in zip(left, right):
        if x.names != y.names:
            return math.inf
        worst = max(worst, abs(p - q), float(np.max(np.abs(x.amplitudes - y.amplitudes))))
    return worst


def reduction_reports(rng: np.random.Generator, inputs: int = 3) -> list[OracleReport]:
    """
    general-product at alpha = pi/2 with one ebit is the twisted product;
    nonmax-general at alpha = beta is nonmax-equal.
    """
    tol = _tolerance("linear_algebra")
    alpha = parse_angle(simulation_config["verify"]["nonmax_alpha"]).value
    pairs = [
        (EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=math.pi / 2, n_ebits=1), EigenbasisSpec(Family.TWISTED_PRODUCT)),
        (EigenbasisSpec(Family.NONMAX_GENERAL, alpha=alpha, beta=alpha, n_ebits=2),
         EigenbasisSpec(Family.NONMAX_EQUAL, alpha=alpha, n_ebits=2)),
    ]
    reports = []
    for general, special in pairs:
        states = eigenbasis(special) + [random_state(system_register(special.family), rng) for _ in range(inputs)]
        worst = max(branch_tree_distance(run_protocol(general, s), run_protocol(special, s)) for s in states)
        reports.append(OracleReport.check(f"reduction {describe(general)} == {describe(special)}", 0.0, worst, tol))
    return reports
