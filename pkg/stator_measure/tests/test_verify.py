import math

import numpy as np
import pytest
from pydantic import ValidationError

import qcore
import verify
from eigenbasis import EigenbasisSpec, Family, eigenbasis, system_register
from errors import ProtocolError, StructuralError
from inference import REFERENCE_TABLES
from protocols import run_protocol
from qcore import Party
from structure_outputs import OracleReport


TWISTED = EigenbasisSpec(Family.TWISTED_PRODUCT)


def test_oracle_is_one_hot_on_eigenstates():
    spec = EigenbasisSpec(Family.NONMAX_GENERAL, alpha=0.7, beta=0.3, phi1=0.2)
    for index, state in enumerate(eigenbasis(spec)):
        assert verify.born_oracle(spec, state) == pytest.approx(np.eye(4)[index], abs=1e-12)


def test_oracle_on_product_input():
    spec = EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3)
    state = qcore.make_state(system_register(spec.family), "00")
    assert verify.born_oracle(spec, state) == pytest.approx([0.75, 0.25, 0.0, 0.0], abs=1e-12)


def test_born_reports_use_per_eigenstate_success(rng):
    spec = EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=1.0, n_ebits=2)
    inputs = [verify.random_state(system_register(spec.family), rng) for _ in range(4)]
    reports = verify.born_reports(spec, inputs, success=np.array([1.0, 1.0, 0.75, 0.75]), direct=0)
    assert len(reports) == 4
    assert all(report.passed for report in reports)


def test_born_reports_cross_check_direct_runs(rng):
    spec = EigenbasisSpec(Family.NONMAX_GENERAL, alpha=math.pi / 3, beta=math.pi / 7, phi1=0.5)
    inputs = [verify.random_state(system_register(spec.family), rng) for _ in range(3)]
    reports = verify.born_reports(spec, inputs, direct=2)
    assert len(reports) == 5
    assert sum("direct run" in report.quantity for report in reports) == 2
    assert all(report.passed for report in reports)


@pytest.mark.parametrize("spec", [
    EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=1.0, n_ebits=2),
    EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi / 3, n_ebits=3),
    EigenbasisSpec(Family.TWIST_4X4, u_angle=0.4, n_ebits=3),
], ids=verify.describe)
def test_effect_operators_reproduce_protocol_statistics(spec, rng):
    effects = verify.effect_operators(spec)
    assert effects.shape == (spec.size, spec.size, spec.size)
    success = verify.effect_success(spec, effects)
    assert success == pytest.approx(verify.eigenstate_success(spec), abs=1e-10)
    assert all(report.passed for report in verify.effect_reports(spec, success, effects))
    state = verify.random_state(system_register(spec.family), rng)
    direct = run_protocol(spec, state).outcome_distribution(conditioned=False)
    assert verify.effect_distribution(effects, state) == pytest.approx(direct, abs=1e-10)


def test_effect_success_of_general_product():
    spec = EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=1.0, n_ebits=2)
    success = verify.effect_success(spec, verify.effect_operators(spec))
    assert success == pytest.approx([1.0, 1.0, 0.75, 0.75], abs=1e-10)


def test_eigen_certainty_reports_pass():
    reports = verify.eigen_certainty_reports(EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3))
    assert len(reports) == 8
    assert all(report.passed for report in reports)


def test_record_marginals_hide_the_twist_from_bob():
    psi1, psi2 = eigenbasis(TWISTED)[:2]
    distance = verify.record_marginal_distance(run_protocol(TWISTED, psi1), run_protocol(TWISTED, psi2), Party.BOB)
    assert distance == pytest.approx(0.0, abs=1e-12)


def test_no_signaling_audit_passes_on_protocols(rng):
    for spec in (TWISTED, EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi / 3)):
        reports = verify.no_signaling_audit(verify.no_signaling_runs(spec, rng, pairs=1))
        assert reports
        assert all(report.passed for report in reports)
        assert any(report.quantity.startswith("erasure") for report in reports)


def test_no_signaling_audit_rejects_sampled_runs():
    run = run_protocol(TWISTED, eigenbasis(TWISTED)[0], seed=3)
    with pytest.raises(ProtocolError):
        verify.no_signaling_audit([run])


def test_negative_control_is_caught_by_every_audit():
    audits = verify.negative_control_audits()
    assert set(audits) == {"no-signaling", "locality", "fixed schedule"}
    for reports in audits.values():
        assert any(not report.passed for report in reports)
    assert all(report.passed for report in verify.negative_control_reports())


@pytest.mark.parametrize("spec", [
    TWISTED,
    EigenbasisSpec(Family.NONMAX_GENERAL, alpha=math.pi / 3, beta=math.pi / 7, phi1=0.5),
    EigenbasisSpec(Family.TWIST_4X4, u_angle=0.4),
], ids=verify.describe)
def test_locality_and_schedule_audits_pass(spec, rng):
    run = run_protocol(spec, verify.random_state(system_register(spec.family), rng))
    assert all(report.passed for report in verify.locality_audit(run))
    for party in Party:
        assert verify.fixed_schedule_audit(run, party).passed


def test_stator_algebra_reports(rng):
    reports = verify.stator_algebra_reports(5, rng)
    assert [report.passed for report in reports] == [True, True]


@pytest.mark.parametrize("n, expected", [(1, 0.5), (2, 0.75), (3, 0.875)])
def test_general_product_sweep_generic_angle(n, expected):
    row, = verify.success_sweep(Family.GENERAL_PRODUCT, [1.0], [n])
    assert row.enumerated == pytest.approx(expected, abs=1e-10)
    assert row.loop_form == pytest.approx(expected)
    assert row.quoted_form == pytest.approx(1 - 1 / 2 ** (n - 1))
    assert row.closing_n is None


def test_sweep_closes_on_dyadic_angles():
    rows = verify.success_sweep(Family.GENERAL_PRODUCT, [math.pi / 4], [1, 2, 3])
    assert [row.enumerated for row in rows] == pytest.approx([0.5, 1.0, 1.0], abs=1e-10)
    assert [row.closing_n for row in rows] == [2, 2, 2]
    assert rows[0].alpha_label == "pi/4"


def test_sweep_skips_budgets_below_minimum():
    rows = verify.success_sweep(Family.NONMAX_BELL, [math.pi / 3], [1, 2, 3])
    assert [row.n for row in rows] == [3]
    assert rows[0].enumerated == pytest.approx(0.5, abs=1e-10)


def test_sweep_keeps_two_ebits_when_already_bell():
    rows = verify.success_sweep(Family.NONMAX_BELL, [math.pi / 2], [1, 2, 3])
    assert [row.n for row in rows] == [2, 3]
    assert [row.enumerated for row in rows] == pytest.approx([1.0, 1.0], abs=1e-10)
    assert [row.closing_n for row in rows] == [2, 2]


def test_sweep_family_must_have_a_loop():
    with pytest.raises(StructuralError):
        verify.success_sweep(Family.TWIST_4X4, [0.4], [3])


def test_sweep_alphas():
    assert verify.sweep_alphas(4) == pytest.approx([math.pi / 4, math.pi / 2, 3 * math.pi / 4])


def test_pinned_success_values():
    assert all(report.passed for report in verify.pinned_sweep_reports())


def test_twisted_table_diverges_only_in_first_block():
    table = verify.derive_map_table(TWISTED)
    assert list(table.blocks) == [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    assert table.blocks[(1, 1)] == [(1, (0, 0)), (2, (0, 1)), (3, (1, 0)), (4, (1, 1))]
    divergences = table.divergences()
    assert list(divergences) == [(1, 1)]
    assert len(divergences[(1, 1)]) == 2
    assert all(table.blocks[s] == REFERENCE_TABLES[Family.TWISTED_PRODUCT][s] for s in [(1, -1), (-1, 1), (-1, -1)])


@pytest.mark.parametrize("spec", [
    EigenbasisSpec(Family.NONMAX_EQUAL, alpha=math.pi / 3),
    EigenbasisSpec(Family.NONMAX_GENERAL, alpha=0.7, beta=0.3),
], ids=verify.describe)
def test_nonmax_tables_match_reference(spec):
    table = verify.derive_map_table(spec)
    assert table.blocks == REFERENCE_TABLES[Family.NONMAX_EQUAL]
    assert table.divergences() == {}


def test_table_needs_a_tabulated_family():
    with pytest.raises(StructuralError):
        verify.derive_map_table(EigenbasisSpec(Family.NONMAX_BELL, alpha=math.pi / 3))
    with pytest.raises(StructuralError):
        verify.derive_map_table(EigenbasisSpec(Family.NONMAX_EQUAL, alpha=0.0))


def test_branch_tree_distance_detects_different_records():
    first = run_protocol(TWISTED, eigenbasis(TWISTED)[0])
    second = run_protocol(TWISTED, eigenbasis(TWISTED)[2])
    assert verify.branch_tree_distance(first, first) == 0.0
    assert verify.branch_tree_distance(first, second) == math.inf


def test_oracle_report_serializes_pass_alias():
    report = OracleReport.check("x", 1.0, 1.0 + 1e-13, 1e-12)
    dumped = report.model_dump(by_alias=True)
    assert dumped["pass"] is True
    assert OracleReport.model_validate(dumped) == report


def test_oracle_report_rejects_inconsistent_flag():
    with pytest.raises(ValidationError):
        OracleReport(quantity="x", expected=0.0, observed=1.0, tolerance=0.1, passed=True)
