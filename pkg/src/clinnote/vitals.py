"""Free-text vital sign values -> numbers in canonical units.

Canonical units: temperature °C, height cm, weight kg, blood pressure
mmHg, heart rate bpm, respiration rate breaths/min, SpO2 %. Blood
pressure strings like "120/60" split into systolic and diastolic
components. Out-of-range values are flagged rather than corrected.
"""

from __future__ import annotations

import logging
import re
import statistics
from dataclasses import dataclass

from .errors import NoData

log = logging.getLogger(__name__)

LB_PER_KG = 0.45359237
CM_PER_IN = 2.54


def f_to_c(f):
    return (f - 32.0) * 5.0 / 9.0


def c_to_f(c):
    return c * 9.0 / 5.0 + 32.0


def in_to_cm(inches):
    return inches * CM_PER_IN


def cm_to_in(cm):
    return cm / CM_PER_IN


def lb_to_kg(lb):
    return lb * LB_PER_KG


def kg_to_lb(kg):
    return kg / LB_PER_KG


# Exclusion bounds in canonical units; values outside are flagged, not clipped.
PLAUSIBLE_RANGE = {
    "temperature": (30.0, 45.0),
    "hr": (20.0, 300.0),
    "rr": (4.0, 80.0),
    "spo2": (50.0, 100.0),
    "height": (100.0, 250.0),
    "weight": (20.0, 350.0),
    "bp_sys": (30.0, 300.0),
    "bp_dia": (30.0, 300.0),
}

# Extraction-schema variable -> canonical variable(s)
RAW_TO_CANONICAL = {
    "body_temperature": ("temperature",),
    "heart_rate": ("hr",),
    "respiration_rate": ("rr",),
    "spo2": ("spo2",),
    "height": ("height",),
    "weight": ("weight",),
    "blood_pressure": ("bp_sys", "bp_dia"),
}


@dataclass
class CanonicalVital:
    hadm_id: str
    variable: str
    value: float
    original_text: str
    original_unit: str
    status: str = "ok"  # ok | inconsistent


@dataclass
class Unparseable:
    hadm_id: str
    variable: str
    original_text: str
    reason: str
    status: str = "unparseable"


@dataclass
class OutOfRange:
    hadm_id: str
    variable: str
    original_text: str
    value: float
    original_unit: str
    status: str = "out_of_range"


_NUM = r"[-+]?\d+(?:\.\d+)?"
_NUM_RE = re.compile(_NUM)
_FEET_IN_RE = re.compile(rf"({_NUM})\s*(?:'|ft\.?|feet)\s*({_NUM})?\s*(?:\"|''|in\.?|inches)?")
_BP_RE = re.compile(rf"({_NUM})\s*/\s*({_NUM})")


def _first_number(text):
    m = _NUM_RE.search(text)
    return float(m.group()) if m else None


def _checked(hadm_id, variable, value, text, unit):
    lo, hi = PLAUSIBLE_RANGE[variable]
    if not (lo <= value <= hi):
        return OutOfRange(hadm_id, variable, text, value, unit)
    return CanonicalVital(hadm_id, variable, value, text, unit)


def _parse_temperature(hadm_id, text):
    m = re.search(rf"({_NUM})\s*(?:°\s*)?([FfCc])?\b", text)
    if not m:
        return [Unparseable(hadm_id, "temperature", text, "no numeric token")]
    value = float(m.group(1))
    unit = (m.group(2) or "").upper()
    if not unit:
        unit = "F" if value > 45 else "C"
    celsius = f_to_c(value) if unit == "F" else value
    # Mixed forms like "98.6F (37C)": first token wins; log disagreement.
    rest = text[m.end():]
    m2 = re.search(rf"({_NUM})\s*(?:°\s*)?([FfCc])\b", rest)
    if m2:
        other = float(m2.group(1))
        other_c = f_to_c(other) if m2.group(2).upper() == "F" else other
        if abs(other_c - celsius) > 0.5:
            log.warning("temperature units disagree in %r", text)
    return [_checked(hadm_id, "temperature", celsius, text, "°" + unit)]


def _parse_height(hadm_id, text):
    m = _FEET_IN_RE.search(text)
    lowered = text.lower()
    if m and ("'" in text or "ft" in lowered or "feet" in lowered):
        feet = float(m.group(1))
        inches = float(m.group(2) or 0.0)
        cm = in_to_cm(feet * 12 + inches)
        return [_checked(hadm_id, "height", cm, text, "ft-in")]
    value = _first_number(text)
    if value is None:
        return [Unparseable(hadm_id, "height", text, "no numeric token")]
    if "cm" in lowered:
        return [_checked(hadm_id, "height", value, text, "cm")]
    if re.search(r"\bin(?:ch(?:es)?)?\b|\"", lowered):
        return [_checked(hadm_id, "height", in_to_cm(value), text, "in")]
    if value > 90:
        return [_checked(hadm_id, "height", value, text, "cm")]
    return [_checked(hadm_id, "height", in_to_cm(value), text, "in")]


def _parse_weight(hadm_id, text):
    value = _first_number(text)
    if value is None:
        return [Unparseable(hadm_id, "weight", text, "no numeric token")]
    lowered = text.lower()
    if re.search(r"\blbs?\b|pounds?|#", lowered):
        return [_checked(hadm_id, "weight", lb_to_kg(value), text, "lb")]
    if "kg" in lowered or "kilo" in lowered:
        return [_checked(hadm_id, "weight", value, text, "kg")]
    if value > 250:
        return [_checked(hadm_id, "weight", lb_to_kg(value), text, "lb")]
    return [_checked(hadm_id, "weight", value, text, "kg")]


def _parse_bp(hadm_id, text):
    m = _BP_RE.search(text)
    if not m:
        return [Unparseable(hadm_id, "bp_sys", text, "no systolic/diastolic pair")]
    sys_v, dia_v = float(m.group(1)), float(m.group(2))
    out = [
        _checked(hadm_id, "bp_sys", sys_v, text, "mmHg"),
        _checked(hadm_id, "bp_dia", dia_v, text, "mmHg"),
    ]
    if sys_v < dia_v:
        for item in out:
            if isinstance(item, CanonicalVital):
                item.status = "inconsistent"
    return out


def _parse_simple(variable):
    def parse(hadm_id, text):
        value = _first_number(text)
        if value is None:
            return [Unparseable(hadm_id, variable, text, "no numeric token")]
        return [_checked(hadm_id, variable, value, text, _SIMPLE_UNIT[variable])]

    return parse


_SIMPLE_UNIT = {"hr": "bpm", "rr": "breaths/min", "spo2": "%"}

_PARSERS = {
    "temperature": _parse_temperature,
    "body_temperature": _parse_temperature,
    "hr": _parse_simple("hr"),
    "heart_rate": _parse_simple("hr"),
    "rr": _parse_simple("rr"),
    "respiration_rate": _parse_simple("rr"),
    "spo2": _parse_simple("spo2"),
    "height": _parse_height,
    "weight": _parse_weight,
    "blood_pressure": _parse_bp,
    "bp": _parse_bp,
}


def parse_vital(variable, text, hadm_id=""):
    """Parse one free-text vital value.

    Returns a list of outcomes (blood pressure yields two), each a
    CanonicalVital, Unparseable, or OutOfRange. Never drops silently.
    """
    if variable not in _PARSERS:
        raise KeyError(f"unknown vital variable: {variable}")
    if text is None:
        return [Unparseable(hadm_id, variable, "", "null value")]
    return _PARSERS[variable](hadm_id, str(text))


def canonicalize_record(record):
    """All vital outcomes for one ExtractionRecord."""
    out = []
    for raw_key in RAW_TO_CANONICAL:
        text = record.vitals_raw.get(raw_key)
        if text is None:
            continue
        out.extend(parse_vital(raw_key, text, hadm_id=record.hadm_id))
    return out


def aggregate_admission(values, variable=None):
    """Median of per-admission canonical values (even count: mean of middle two)."""
    if not values:
        raise NoData(f"no values to aggregate for {variable}")
    return statistics.median(values)
