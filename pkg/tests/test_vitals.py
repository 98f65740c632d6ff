import pytest
from hypothesis import given, strategies as st

from clinnote.errors import NoData
from clinnote.vitals import (
    CanonicalVital,
    OutOfRange,
    PLAUSIBLE_RANGE,
    Unparseable,
    aggregate_admission,
    c_to_f,
    cm_to_in,
    f_to_c,
    in_to_cm,
    kg_to_lb,
    lb_to_kg,
    parse_vital,
)


def one(outcomes):
    assert len(outcomes) == 1
    return outcomes[0]


class TestConversions:
    def test_known_points(self):
        assert f_to_c(98.6) == pytest.approx(37.0)
        assert f_to_c(32.0) == pytest.approx(0.0)
        assert in_to_cm(1.0) == pytest.approx(2.54)
        assert lb_to_kg(1.0) == pytest.approx(0.45359237)

    @given(st.floats(min_value=-200, max_value=200,
                     allow_nan=False, allow_infinity=False))
    def test_temperature_round_trip(self, f):
        assert c_to_f(f_to_c(f)) == pytest.approx(f, abs=1e-9)

    @given(st.floats(min_value=0.1, max_value=500,
                     allow_nan=False, allow_infinity=False))
    def test_length_weight_round_trip(self, v):
        assert cm_to_in(in_to_cm(v)) == pytest.approx(v)
        assert kg_to_lb(lb_to_kg(v)) == pytest.approx(v)


class TestTemperature:
    @pytest.mark.parametrize("text,celsius,unit", [
        ("98.6 F", 37.0, "°F"),
        ("98.6F", 37.0, "°F"),
        ("98.6 °F", 37.0, "°F"),
        ("37.0 C", 37.0, "°C"),
        ("37", 37.0, "°C"),       # unmarked, <=45 -> Celsius
        ("101.2", 38.444444, "°F"),  # unmarked, >45 -> Fahrenheit
    ])
    def test_parsing(self, text, celsius, unit):
        v = one(parse_vital("temperature", text, "H1"))
        assert isinstance(v, CanonicalVital)
        assert v.value == pytest.approx(celsius, abs=1e-4)
        assert v.original_unit == unit

    def test_mixed_form_first_token_wins(self):
        v = one(parse_vital("temperature", "98.6F (37.0C)"))
        assert v.value == pytest.approx(37.0)

    def test_out_of_range(self):
        v = one(parse_vital("temperature", "12 C", "H1"))
        assert isinstance(v, OutOfRange)
        assert v.status == "out_of_range"

    def test_unparseable(self):
        v = one(parse_vital("temperature", "afebrile"))
        assert isinstance(v, Unparseable)


class TestHeight:
    @pytest.mark.parametrize("text,cm", [
        ("170 cm", 170.0),
        ("170", 170.0),            # unmarked > 90 -> cm
        ("67 in", 170.18),
        ("67", 170.18),            # unmarked <= 90 -> inches
        ("5'10\"", 177.8),
        ("5 ft 10 in", 177.8),
        ("6 feet", 182.88),
    ])
    def test_parsing(self, text, cm):
        v = one(parse_vital("height", text))
        assert isinstance(v, CanonicalVital)
        assert v.value == pytest.approx(cm, abs=0.01)

    def test_out_of_range(self):
        assert isinstance(one(parse_vital("height", "400 cm")), OutOfRange)


class TestWeight:
    @pytest.mark.parametrize("text,kg", [
        ("80 kg", 80.0),
        ("80", 80.0),              # unmarked <= 250 -> kg
        ("176 lbs", 79.832),
        ("176 lb", 79.832),
        ("300", 136.078),          # unmarked > 250 -> pounds
    ])
    def test_parsing(self, text, kg):
        v = one(parse_vital("weight", text))
        assert isinstance(v, CanonicalVital)
        assert v.value == pytest.approx(kg, abs=0.01)

    def test_out_of_range(self):
        assert isinstance(one(parse_vital("weight", "800 kg")), OutOfRange)


class TestBloodPressure:
    def test_split(self):
        sys_v, dia_v = parse_vital("blood_pressure", "130/80", "H1")
        assert (sys_v.variable, sys_v.value) == ("bp_sys", 130.0)
        assert (dia_v.variable, dia_v.value) == ("bp_dia", 80.0)
        assert sys_v.status == dia_v.status == "ok"

    def test_spaces_allowed(self):
        sys_v, dia_v = parse_vital("blood_pressure", "BP 130 / 80 mmHg")
        assert sys_v.value == 130.0 and dia_v.value == 80.0

    def test_inverted_flagged_inconsistent(self):
        sys_v, dia_v = parse_vital("blood_pressure", "80/130")
        assert sys_v.status == "inconsistent"
        assert dia_v.status == "inconsistent"

    def test_no_pair_unparseable(self):
        v = one(parse_vital("blood_pressure", "130"))
        assert isinstance(v, Unparseable)

    def test_out_of_range_component(self):
        sys_v, dia_v = parse_vital("blood_pressure", "320/80")
        assert isinstance(sys_v, OutOfRange)
        assert isinstance(dia_v, CanonicalVital)


class TestSimpleVitals:
    def test_hr_rr_spo2(self):
        assert one(parse_vital("heart_rate", "88 bpm")).value == 88.0
        assert one(parse_vital("respiration_rate", "18")).value == 18.0
        assert one(parse_vital("spo2", "97%")).value == 97.0

    @pytest.mark.parametrize("variable,text", [
        ("heart_rate", "350"), ("respiration_rate", "2"), ("spo2", "40"),
    ])
    def test_out_of_range(self, variable, text):
        assert isinstance(one(parse_vital(variable, text)), OutOfRange)

    def test_null_value(self):
        v = one(parse_vital("heart_rate", None, "H1"))
        assert isinstance(v, Unparseable)
        assert v.reason == "null value"

    def test_unknown_variable(self):
        with pytest.raises(KeyError):
            parse_vital("cholesterol", "200")


class TestPlausibleRanges:
    def test_frozen_bounds(self):
        assert PLAUSIBLE_RANGE == {
            "temperature": (30.0, 45.0),
            "hr": (20.0, 300.0),
            "rr": (4.0, 80.0),
            "spo2": (50.0, 100.0),
            "height": (100.0, 250.0),
            "weight": (20.0, 350.0),
            "bp_sys": (30.0, 300.0),
            "bp_dia": (30.0, 300.0),
        }

    @given(st.floats(min_value=-1000, max_value=1000,
                     allow_nan=False, allow_infinity=False))
    def test_hr_status_matches_bounds(self, value):
        outcome = one(parse_vital("hr", f"{value:.1f}"))
        in_range = 20.0 <= float(f"{value:.1f}") <= 300.0
        assert isinstance(outcome, CanonicalVital) == in_range


class TestAggregate:
    def test_odd_median(self):
        assert aggregate_admission([3.0, 1.0, 2.0]) == 2.0

    def test_even_mean_of_middle(self):
        assert aggregate_admission([1.0, 2.0, 3.0, 10.0]) == 2.5

    def test_empty_raises(self):
        with pytest.raises(NoData):
            aggregate_admission([], variable="hr")
