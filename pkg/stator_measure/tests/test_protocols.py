import math

import numpy as np
import pytest
from scipy.linalg import expm

import protocols
import qcore
import verify
from correction import run_correction_loop
from eigenbasis import EigenbasisSpec, Family, eigenbasis, system_register
from errors import ParameterError, StructuralError
from locality import LocalityContext, ScriptedChooser
from protocols import measure_4x4_twist, measure_general_product, measure_twisted_product, run_protocol
from qcore import Party, QubitRef


SPECS = [
    EigenbasisSpec(Family.TWISTED_PRODUCT),
    EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=1.0, n_ebits=2),
    EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=math.pi / 8, n_ebits=3),
    EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3, n_ebits=2),
    EigenbasisSpec(Family.NONMAX_EQUAL, alpha=0.0),
    EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi / 3, n_ebits=3),
    EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi),
    EigenbasisSpec(Family.NONMAX_GENERAL, alpha=math.pi / 3, beta=math.pi / 7, phi1=0.4, phi2=-0.9, n_ebits=2),
    EigenbasisSpec(Family.NONMAX_GENERAL, alpha=0.0, beta=math.pi),
    EigenbasisSpec(Family.TWIST_4X4, u_axis="y", u_angle=0.4, n_ebits=3),
    EigenbasisSpec(Family.TWIST_4X4, u_axis="x", u_angle=math.pi / 8, n_ebits=4),
    EigenbasisSpec(Family.TWIST_4X4, u_axis="z", u_angle=0.4, n_ebits=3),
]


@pytest.mark.parametrize("spec", SPECS, ids=verify.describe)
def test_eigenstates_are_never_misidentified(spec):
    for index, state in enumerate(eigenbasis(spec), start=1):
        run = run_protocol(spec, state)
        assert run.total_probability == pytest.approx(1.0, abs=1e-10)
        assert {branch.inferred for branch in run.branches if not branch.failed} <= {index}
        assert run.success_probability > 0


EIGENSTATE_SUCCESS = [
    (SPECS[0], [1.0, 1.0, 1.0, 1.0]),
    (SPECS[1], [1.0, 1.0, 0.75, 0.75]),
    (SPECS[2], [1.0, 1.0, 1.0, 1.0]),
    (SPECS[3], [0.5, 0.5, 0.5, 0.5]),
]


@pytest.mark.parametrize("spec, expected", EIGENSTATE_SUCCESS)
def test_eigenstate_success(spec, expected):
    assert verify.eigenstate_success(spec) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("spec", SPECS, ids=verify.describe)
def test_born_rule_on_random_inputs(spec, rng):
    register = system_register(spec.family)
    inputs = [verify.random_state(register, rng) for _ in range(3)]
    assert all(report.passed for report in verify.born_reports(spec, inputs))


def test_nonmax_equal_on_product_input():
    spec = EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3)
    run = run_protocol(spec, qcore.make_state(system_register(spec.family), "00"))
    assert run.outcome_distribution() == pytest.approx([0.75, 0.25, 0.0, 0.0], abs=1e-10)


def test_twisted_product_measures_with_one_ebit():
    state = eigenbasis(EigenbasisSpec(Family.TWISTED_PRODUCT))[2]
    run = measure_twisted_product(state)
    assert run.ebits_consumed == 1
    assert run.success_probability == pytest.approx(1.0)
    assert run.remote_targets == ("B",)


@pytest.mark.parametrize("family, n", [(Family.GENERAL_PRODUCT, 3), (Family.NONMAX_BELL, 3), (Family.NONMAX_EQUAL, 4)])
def test_ebits_consumed(family, n):
    spec = EigenbasisSpec(family, alpha=math.pi / 3, n_ebits=n)
    run = run_protocol(spec, eigenbasis(spec)[0])
    assert run.ebits_consumed == n


def test_nonmax_general_spends_two_loops():
    spec = EigenbasisSpec(Family.NONMAX_GENERAL, alpha=math.pi / 3, beta=math.pi / 7, n_ebits=3)
    assert spec.total_ebits == 5
    run = run_protocol(spec, eigenbasis(spec)[2])
    assert run.ebits_consumed <= spec.total_ebits


def test_bell_variant_leaves_an_ebit_behind():
    spec = EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi / 3, n_ebits=3)
    run = run_protocol(spec, eigenbasis(spec)[0])
    assert run.residual_entanglement == pytest.approx(1.0, abs=1e-10)


def test_local_measurements_leave_no_entanglement():
    spec = EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3)
    run = run_protocol(spec, eigenbasis(spec)[0])
    assert run.residual_entanglement == pytest.approx(0.0, abs=1e-10)


def test_degenerate_angle_uses_no_ebits():
    spec = EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi)
    run = run_protocol(spec, eigenbasis(spec)[3])
    assert run.ebits_consumed == 0
    assert [branch.inferred for branch in run.branches] == [4]


def test_wrong_register_rejected():
    register = [QubitRef("X", Party.ALICE), QubitRef("B", Party.BOB)]
    with pytest.raises(StructuralError):
        run_protocol(EigenbasisSpec(Family.TWISTED_PRODUCT), qcore.make_state(register, "00"))


@pytest.mark.parametrize("kwargs", [
    {"family": Family.GENERAL_PRODUCT, "alpha": 0.0},
    {"family": Family.GENERAL_PRODUCT, "alpha": math.pi},
    {"family": Family.NONMAX_EQUAL, "alpha": 4.0},
    {"family": Family.NONMAX_EQUAL, "alpha": math.pi / 3, "n_ebits": 1},
    {"family": Family.TWIST_4X4, "u_axis": "w"},
    {"family": Family.NONMAX_GENERAL, "alpha": math.nan},
    {"family": Family.NONMAX_BELL, "alpha": 0.7, "n_ebits": 2},
    {"family": Family.TWIST_4X4, "u_axis": "y", "u_angle": 0.4, "n_ebits": 2},
    {"family": Family.TWISTED_PRODUCT, "alpha": 1.0},
    {"family": Family.TWISTED_PRODUCT, "n_ebits": 2},
])
def test_invalid_parameters(kwargs):
    with pytest.raises(ParameterError):
        EigenbasisSpec(**kwargs)


def test_bell_stage_families_need_a_loop_ebit():
    assert EigenbasisSpec(Family.NONMAX_BELL, alpha=0.7, n_ebits=3).min_ebits == 3
    assert EigenbasisSpec(Family.TWIST_4X4, u_angle=0.4, n_ebits=3).min_ebits == 3
    assert EigenbasisSpec(Family.NONMAX_EQUAL, alpha=0.7).min_ebits == 2


def test_closed_twists_keep_two_ebits():
    bell = EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi / 2, n_ebits=2)
    pauli_twist = EigenbasisSpec(Family.TWIST_4X4, u_angle=math.pi / 2, n_ebits=2)
    assert bell.min_ebits == pauli_twist.min_ebits == 2
    assert verify.eigenstate_success(bell) == pytest.approx([1.0] * 4, abs=1e-10)


def test_twisted_product_accepts_its_own_parameters():
    spec = EigenbasisSpec(Family.TWISTED_PRODUCT, alpha=math.pi / 2, n_ebits=1)
    assert (spec.alpha, spec.n_ebits) == (math.pi / 2, 1)


@pytest.mark.parametrize("index, sign", [(1, 1), (3, -1)])
def test_nonmax_general_residual_twist_before_second_loop(index, sign, monkeypatch):
    # with cnot.sigma_z_a = -1 Bob's first schedule uses the other Schmidt
    # angle, so Alice's qubit enters the second loop rotated by +-gamma
    spec = EigenbasisSpec(Family.NONMAX_GENERAL, alpha=math.pi / 3, beta=math.pi / 7, n_ebits=2)
    captured = {}

    def spy(ctx, state, plan):
        if plan.stage == "residual":
            captured["state"] = state
        return run_correction_loop(ctx, state, plan)

    monkeypatch.setattr(protocols, "run_correction_loop", spy)
    script = {"cnot.sigma_x_b": 1, "cnot.sigma_z_a": -1, "untwist.1.sigma_x_a": 1, "untwist.1.sigma_z_b": 1}
    ctx = LocalityContext(ScriptedChooser(script), ebit_budget=spec.total_ebits)
    protocols.protocol_body(spec)(ctx, eigenbasis(spec)[index - 1])

    rho = qcore.partial_trace(captured["state"], ["A"]).matrix
    assert np.trace(rho @ qcore.pauli("z")).real == pytest.approx(math.cos(2 * spec.gamma), abs=1e-10)
    assert np.trace(rho @ qcore.pauli("x")).real == pytest.approx(sign * math.sin(2 * spec.gamma), abs=1e-10)


def test_twist_from_unitary_recovers_axis_and_angle():
    spec = EigenbasisSpec.twist_from_unitary(expm(0.4j * qcore.pauli("y")), n_ebits=3)
    assert (spec.u_axis, spec.n_ebits) == ("y", 3)
    assert spec.u_angle == pytest.approx(0.4)
    phased = EigenbasisSpec.twist_from_unitary(np.exp(0.25j * math.pi) * expm(-0.3j * qcore.pauli("x")))
    assert (phased.u_axis, phased.u_angle) == ("x", pytest.approx(-0.3))


def test_twist_from_unitary_rejects_tilted_axis():
    tilted = expm(0.4j * (qcore.pauli("x") + qcore.pauli("z")) / math.sqrt(2))
    with pytest.raises(ParameterError):
        EigenbasisSpec.twist_from_unitary(tilted)


def test_measure_4x4_twist_entry_point():
    u_b = expm(0.4j * qcore.pauli("y"))
    spec = EigenbasisSpec.twist_from_unitary(u_b, n_ebits=3)
    run = measure_4x4_twist(eigenbasis(spec)[13], u_b, n_ebits=3)
    assert {branch.inferred for branch in run.branches if not branch.failed} == {14}


def test_sampled_run_is_one_enumerated_branch(rng):
    spec = EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=1.0, n_ebits=2)
    state = verify.random_state(system_register(spec.family), rng)
    first = measure_general_product(state, 1.0, 2, seed=42)
    second = measure_general_product(state, 1.0, 2, seed=42)
    assert first.sampled and len(first.branches) == 1
    assert first.branches[0].path == second.branches[0].path
    enumerated = {branch.path: branch for branch in measure_general_product(state, 1.0, 2).branches}
    sampled = first.branches[0]
    assert sampled.probability == pytest.approx(enumerated[sampled.path].probability, abs=1e-12)
    assert sampled.inferred == enumerated[sampled.path].inferred
    assert np.allclose(sampled.post_state.amplitudes, enumerated[sampled.path].post_state.amplitudes)


def test_branches_are_ordered_plus_before_minus():
    spec = EigenbasisSpec(Family.TWISTED_PRODUCT)
    run = run_protocol(spec, verify.random_state(system_register(spec.family), np.random.default_rng(5)))
    keys = [tuple(0 if v == 1 else 1 for v in branch.path) for branch in run.branches]
    assert keys == sorted(keys)


def test_reductions_agree(rng):
    assert all(report.passed for report in verify.reduction_reports(rng, inputs=2))
