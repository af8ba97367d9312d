import pytest
from hypothesis import given
from hypothesis import strategies as st

from attrseg.attributes import MODES, ConfusionCounts, attribute_f1, confusion_counts
from attrseg.errors import ContractError

A = 294

id_sets = st.frozensets(st.integers(0, A - 1), max_size=12)


def test_confusion_counts_examples():
    assert confusion_counts({1, 2, 3}, {2, 3, 4}, A) == ConfusionCounts(2, 1, 1, 290)
    assert confusion_counts(set(), set(), A) == ConfusionCounts(0, 0, 0, A)
    assert confusion_counts({5}, {5}, A) == ConfusionCounts(1, 0, 0, 293)


@pytest.mark.parametrize("gt,pred", [({A}, set()), (set(), {A + 5}), ({-1}, set())])
def test_ids_out_of_universe_rejected(gt, pred):
    with pytest.raises(ContractError):
        confusion_counts(gt, pred, A)


def test_unknown_mode_rejected():
    with pytest.raises(ContractError):
        attribute_f1({1}, {1}, A, "weighted")


def test_f1_examples():
    g4 = {10, 20, 30, 40}
    assert attribute_f1(g4, g4, A, "binary-macro") == 1.0
    assert attribute_f1(g4, set(), A, "binary-macro") == pytest.approx((0 + 580 / 584) / 2, abs=1e-12)
    assert attribute_f1({1, 2, 3}, {2, 3, 4}, A, "micro") == pytest.approx(4 / 6, abs=1e-12)
    assert attribute_f1({1, 2, 3}, {2, 3, 4}, A, "binary-micro") == pytest.approx(292 / 294, abs=1e-12)
    assert attribute_f1({1, 2, 3}, {1, 2, 3}, A, "macro") == pytest.approx(3 / 294, abs=1e-12)


def test_empty_sets_agree_perfectly_except_macro():
    assert attribute_f1(set(), set(), A, "micro") == 1.0
    assert attribute_f1(set(), set(), A, "binary-micro") == 1.0
    assert attribute_f1(set(), set(), A, "binary-macro") == 1.0
    assert attribute_f1(set(), set(), A, "macro") == 0.0


def test_default_mode_is_binary_macro():
    assert attribute_f1({1}, {2}, A) == attribute_f1({1}, {2}, A, "binary-macro")


@given(id_sets, id_sets, st.sampled_from(MODES))
def test_symmetric_and_bounded(g, p, mode):
    v = attribute_f1(g, p, A, mode)
    assert v == attribute_f1(p, g, A, mode)
    assert 0.0 <= v <= 1.0


@given(id_sets, id_sets)
def test_binary_micro_is_bit_accuracy(g, p):
    assert attribute_f1(g, p, A, "binary-micro") == (A - len(g ^ p)) / A


@given(id_sets.filter(bool))
def test_perfect_match(g):
    for mode in ("micro", "binary-micro", "binary-macro"):
        assert attribute_f1(g, g, A, mode) == 1.0
    assert attribute_f1(g, g, A, "macro") == len(g) / A


@given(id_sets, st.frozensets(st.integers(0, A - 1), max_size=8))
def test_small_hamming_keeps_binary_micro_high(g, flips):
    p = g ^ flips
    assert attribute_f1(g, p, A, "binary-micro") >= 0.97


def test_counts_sum_to_universe():
    c = confusion_counts({0, 1, 2}, {2, 3}, 10)
    assert c.tp + c.fp + c.fn + c.tn == 10
