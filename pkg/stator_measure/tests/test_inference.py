import math

import pytest

from eigenbasis import EigenbasisSpec, Family
from errors import StructuralError
from inference import REFERENCE_TABLES, bell_outcome, bit, infer_outcome
from locality import OutcomeRecord
from qcore import Party


TWISTED = EigenbasisSpec(Family.TWISTED_PRODUCT)


def test_bit():
    assert (bit(1), bit(-1)) == (0, 1)


def test_reference_twisted_table_repeats_an_index():
    indices = [index for index, _ in REFERENCE_TABLES[Family.TWISTED_PRODUCT][(1, 1)]]
    assert indices == [1, 2, 3, 3]


@pytest.mark.parametrize("z_a, rotated, sign, z_b, expected", [
    (1, -1, 1, -1, 1),
    (1, 1, 1, 1, 1),
    (1, 1, 1, -1, 2),
    (-1, 1, 1, 1, 3),
    (-1, -1, 1, 1, 4),
    (-1, 1, -1, 1, 4),
    (-1, 1, -1, -1, 3),
])
def test_twisted_product_inference(z_a, rotated, sign, z_b, expected):
    alice = {"sigma_z_A": z_a, "untwist.1.sigma_z_a": rotated}
    bob = {"untwist.1.sigma_x_b": sign, "sigma_z_B": z_b}
    assert infer_outcome(alice, bob, TWISTED) == expected


def test_inference_accepts_outcome_records():
    alice, bob = OutcomeRecord(Party.ALICE), OutcomeRecord(Party.BOB)
    alice.append("sigma_z_A", 1)
    alice.append("untwist.1.sigma_z_a", 1)
    bob.append("untwist.1.sigma_x_b", 1)
    bob.append("sigma_z_B", 1)
    assert infer_outcome(alice, bob, TWISTED) == 1


def test_general_product_failure_is_none():
    spec = EigenbasisSpec(Family.GENERAL_PRODUCT, alpha=0.6, n_ebits=1)
    alice = {"sigma_z_A": -1, "untwist.1.sigma_z_a": 1}
    bob = {"untwist.1.sigma_x_b": -1, "sigma_z_B": 1}
    assert infer_outcome(alice, bob, spec) is None


def test_missing_record_entry():
    with pytest.raises(StructuralError):
        infer_outcome({}, {"sigma_z_B": 1}, TWISTED)


@pytest.mark.parametrize("family", [Family.NONMAX_EQUAL, Family.NONMAX_BELL])
@pytest.mark.parametrize("bits, expected", [((1, 1), 1), ((-1, -1), 2), ((1, -1), 3), ((-1, 1), 4)])
def test_degenerate_nonmax_reads_computational_basis(family, bits, expected):
    spec = EigenbasisSpec(family, alpha=0.0)
    assert infer_outcome({"sigma_z_A": bits[0]}, {"sigma_z_B": bits[1]}, spec) == expected


@pytest.mark.parametrize("zz, xx, name", [(1, 1, "phi+"), (1, -1, "phi-"), (-1, 1, "psi+"), (-1, -1, "psi-")])
def test_bell_outcome_from_parities(zz, xx, name):
    alice = {"bell.zz.sigma_z_a": zz, "bell.xx.sigma_z_a": 1}
    bob = {"bell.zz.sigma_z_b": 1, "bell.xx.sigma_z_b": xx}
    assert bell_outcome(alice, bob) == name


def test_twist_inference_folds_sub_block():
    spec = EigenbasisSpec(Family.TWIST_4X4, u_angle=math.pi / 2, n_ebits=2)
    alice = {"sigma_z_As": -1, "bell.zz.sigma_z_a": 1, "bell.xx.sigma_z_a": 1}
    bob = {"sigma_z_Bs": 1, "bell.zz.sigma_z_b": 1, "bell.xx.sigma_z_b": -1}
    assert infer_outcome(alice, bob, spec) == 1 + 4 * 2 + 1
