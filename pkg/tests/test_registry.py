from fractions import Fraction

import pytest

from raresim.exceptions import DuplicateEntryError, NotFoundError, ValidationError
from raresim.registry import (
    BOHR_RADIUS,
    RydbergState,
    StateRegistry,
    Transition,
    default_registry,
    detuning,
    load_registry,
    lookup_transition,
    mean_radius,
    multiband_registry,
    quantum_defect_frequency,
    register_transition,
)


def test_parse_and_label_roundtrip():
    s = RydbergState.parse("60D5/2")
    assert (s.n, s.l, s.j) == (60, 2, Fraction(5, 2))
    assert s.label == "60D5/2"
    assert RydbergState.parse("5P_{3/2}") == RydbergState(5, 1, Fraction(3, 2))


@pytest.mark.parametrize("label", ["47S5/2", "52F3/2", "3F5/2", "0S1/2"])
def test_invalid_states_rejected(label):
    # 47S5/2 and 52F3/2 appear in the source text but violate j = l +- 1/2
    with pytest.raises(ValidationError):
        RydbergState.parse(label)


def test_unparseable_label():
    with pytest.raises(ValidationError):
        RydbergState.parse("sixty D")


def test_transition_validation():
    with pytest.raises(ValidationError):
        Transition("60D5/2", "61P3/2", -1.0, 3e9)
    with pytest.raises(ValidationError):
        Transition("60D5/2", "61P3/2", 1e-26, float("nan"))
    with pytest.raises(ValidationError):
        Transition("60D5/2", "60D5/2", 1e-26, 3e9)


def test_register_is_persistent_and_rejects_duplicates():
    t = Transition("60D5/2", "61P3/2", 2.04e-26, 3.213e9)
    empty = StateRegistry()
    reg = register_transition(empty, t)
    assert len(empty) == 0 and len(reg) == 1
    with pytest.raises(DuplicateEntryError):
        register_transition(reg, t)
    assert lookup_transition(reg, "60D5/2", "61P3/2") is t
    with pytest.raises(NotFoundError):
        lookup_transition(reg, "60D5/2", "62P3/2")


def test_default_registry_stated_values():
    reg = default_registry()
    t = reg.lookup("60D5/2", "61P3/2")
    assert t.dipole_moment == 2.04e-26 and t.frequency == 3.213e9
    t2 = reg.lookup("60D5/2", "62P3/2")
    assert t2.dipole_moment == 6.24e-27 and t2.frequency == 30.618e9
    assert reg.lookup("56D5/2", "57P3/2").frequency == 12.01e9
    assert ("60D5/2", "61P3/2") in reg
    assert ("47S1/2", "48P3/2") not in reg


def test_by_frequency_and_without():
    reg = default_registry()
    assert reg.by_frequency(30.618e9).upper.label == "62P3/2"
    smaller = reg.without("60D5/2", "62P3/2")
    assert len(smaller) == len(reg) - 1
    with pytest.raises(NotFoundError):
        smaller.by_frequency(30.618e9)


def test_csv_roundtrip(tmp_path):
    reg = default_registry()
    path = tmp_path / "reg.csv"
    reg.to_csv(path)
    assert path.read_text().splitlines()[0] == "lower,upper,dipole_Cm,freq_Hz"
    back = load_registry(path)
    assert [t.key for t in back] == [t.key for t in reg]
    assert [t.dipole_moment for t in back] == [t.dipole_moment for t in reg]


def test_load_registry_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValidationError):
        load_registry(path)


def test_mean_radius_and_detuning():
    s = RydbergState.parse("60D5/2")
    assert mean_radius(s) == pytest.approx((3 * 3600 - 6) * BOHR_RADIUS / 2)
    t = default_registry().lookup("60D5/2", "61P3/2")
    assert detuning(t, 3.214e9) == pytest.approx(2 * 3.141592653589793 * 1e6)
    with pytest.raises(ValidationError):
        detuning(t, 0.0)


def test_quantum_defect_frequency_needs_defects():
    lo, up = RydbergState.parse("60D5/2"), RydbergState.parse("61P3/2")
    f = quantum_defect_frequency(lo, up, {1: 2.64, 2: 1.35}, 3.2898e15)
    # |R/(61-2.64)^2 - R/(60-1.35)^2| computed by hand
    expected = abs(3.2898e15 / (61 - 2.64) ** 2 - 3.2898e15 / (60 - 1.35) ** 2)
    assert f == pytest.approx(expected)
    with pytest.raises(NotFoundError):
        quantum_defect_frequency(lo, up, {1: 2.64}, 3.2898e15)


def test_multiband_registry_shares_lower_state():
    reg = multiband_registry()
    assert len(reg) == 5
    assert {t.lower.label for t in reg} == {"60D5/2"}
    assert sorted(t.frequency for t in reg) == [1.72e9, 12.11e9, 27.42e9, 65.11e9, 115.75e9]
