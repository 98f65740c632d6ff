"""Synthetic 20-note discharge cohort for offline runs and tests.

Writes the three input CSVs plus truth tables into a directory. Content
is deterministic for a given seed, so two identical runs over the fixture
produce byte-identical pipeline outputs.
"""

from __future__ import annotations

import csv
import os
from datetime import datetime, timedelta

import numpy as np

_FIRST = ("shortness of breath and leg swelling", "worsening dyspnea on exertion",
          "chest discomfort and fatigue", "weight gain and orthopnea",
          "palpitations and lightheadedness")

_HX = ("chronic systolic heart failure", "diastolic heart failure",
       "ischemic cardiomyopathy", "atrial fibrillation and heart failure")

_DX_POOL = (
    ("42823", "Acute on chronic systolic heart failure"),
    ("42833", "Acute on chronic diastolic heart failure"),
    ("4280", "Congestive heart failure"),
    ("42731", "Atrial fibrillation"),
    ("4019", "Hypertension"),
    ("25000", "Diabetes mellitus"),
    ("5849", "Acute kidney failure"),
    ("2859", "Anemia"),
    ("486", "Pneumonia"),
    ("41401", "Coronary atherosclerosis"),
)

_MARITAL = ("Married", "Widowed", "Divorced", "Single")
_TOBACCO = ("never smoked", "quit 10 years ago", "current smoker, 1 ppd",
            "quit 3 months ago, 1 ppd x 35y")
_ALCOHOL = ("denies", "social use", "former heavy use, quit", "one glass of wine daily")
_EMPLOY = ("Retired", "Works as a school teacher", "Unemployed", "On disability")
_LANGS = ("English", "Spanish", "Russian")


def _note(p):
    social = []
    social.append(f"{p['marital']}.")
    social.append("Lives alone." if p["lives_alone"] else "Lives with wife and son.")
    social.append(f"{p['employment']}.")
    social.append(f"Tobacco: {p['tobacco']}.")
    social.append(f"Alcohol: {p['alcohol']}.")
    social.append("Drug use: denies.")
    if p["support"]:
        social.append("Supported by daughter who visits daily.")
    if p["transport"]:
        social.append("No longer drives, daughter provides rides.")

    vitals = (
        f"Temp {p['temp']:.1f} F, HR {p['hr']} bpm, RR {p['rr']}, "
        f"BP {p['sys']}/{p['dia']}, SpO2 {p['spo2']}%"
    )
    if p["weight"] is not None:
        vitals += f", Weight {p['weight']:.1f} kg"
    if p["height"] is not None:
        vitals += f", Height {p['height']} cm"

    lang = f" The patient primarily speaks {p['language']}." if p["language"] else ""
    dx_line = "; ".join(d for _, d in p["dx"])
    return f"""Admission Date: {p['admit']}  Discharge Date: {p['discharge']}
Service: MEDICINE

Chief Complaint: {p['cc']}

History of Present Illness: The patient is a {p['age']}-year-old {p['sex_word']} with a history of {p['hx']} who presented with {p['cc']}. The patient reported worsening lower extremity edema and dyspnea over the preceding week.{lang}

Social History: {' '.join(social)}

Vital Signs: {vitals}

Hospital Course: The patient was diuresed with improvement in edema and dyspnea. Electrolytes were monitored and repleted. The patient was counseled on a low sodium diet and daily weights.

Discharge Diagnosis: {dx_line}

Discharge Condition: Stable, discharged home.
"""


def build_fixture(seed=0):
    """In-memory fixture rows; 12 patients, 20 admissions, all with notes."""
    rng = np.random.default_rng(seed)
    base = datetime(2130, 1, 1)
    # (patient, n_admissions, gap_days between consecutive disch->admit)
    plan = [
        (1, 2, [20.0]), (2, 2, [45.0]), (3, 3, [10.0, 60.0]), (4, 2, [25.0]),
        (5, 2, [29.5]), (6, 2, [31.0]), (7, 2, [5.0]), (8, 2, [90.0]),
        (9, 2, [15.0]), (10, 1, []),
    ]
    admissions, diagnoses, notes, truth_v, truth_s = [], [], [], [], []
    hadm_counter = 0
    day_offset = 0.0
    for pid, n_adm, gaps in plan:
        subject = f"P{pid:02d}"
        sex = "M" if rng.random() < 0.5 else "F"
        age0 = int(rng.integers(55, 88))
        dob = base - timedelta(days=int(age0 * 365.25) + int(rng.integers(0, 300)))
        language = _LANGS[int(rng.integers(0, 3))] if rng.random() < 0.4 else None
        marital = _MARITAL[int(rng.integers(0, 4))]
        admit = base + timedelta(days=day_offset + float(rng.uniform(0, 40)))
        day_offset += 15.0
        for a in range(n_adm):
            hadm_counter += 1
            hadm = f"H{hadm_counter:03d}"
            los = float(rng.uniform(3, 12))
            discharge = admit + timedelta(days=los)
            age = int((admit - dob).days / 365.25)
            dx = [_DX_POOL[0] if pid % 2 else _DX_POOL[1]]
            extra = rng.choice(len(_DX_POOL), size=3, replace=False)
            dx += [_DX_POOL[i] for i in extra if _DX_POOL[i] not in dx][:3]
            p = {
                "admit": admit.strftime("%Y-%m-%d"),
                "discharge": discharge.strftime("%Y-%m-%d"),
                "cc": _FIRST[int(rng.integers(0, len(_FIRST)))],
                "age": age,
                "sex_word": "man" if sex == "M" else "woman",
                "hx": _HX[int(rng.integers(0, len(_HX)))],
                "marital": marital,
                "lives_alone": bool(rng.random() < 0.4),
                "employment": _EMPLOY[int(rng.integers(0, 4))],
                "tobacco": _TOBACCO[int(rng.integers(0, 4))],
                "alcohol": _ALCOHOL[int(rng.integers(0, 4))],
                "support": bool(rng.random() < 0.5),
                "transport": bool(rng.random() < 0.3),
                "language": language,
                "temp": float(rng.uniform(96.5, 100.5)),
                "hr": int(rng.integers(60, 110)),
                "rr": int(rng.integers(14, 24)),
                "sys": int(rng.integers(100, 165)),
                "dia": int(rng.integers(55, 95)),
                "spo2": int(rng.integers(90, 100)),
                "weight": float(rng.uniform(55, 110)) if rng.random() < 0.8 else None,
                "height": int(rng.integers(150, 190)) if rng.random() < 0.3 else None,
                "dx": dx,
            }
            admissions.append(
                {
                    "subject_id": subject,
                    "hadm_id": hadm,
                    "admit_time": admit.isoformat(),
                    "discharge_time": discharge.isoformat(),
                    "dob": dob.isoformat(),
                    "gender": sex,
                }
            )
            for code, _ in dx:
                diagnoses.append({"subject_id": subject, "hadm_id": hadm, "icd9_code": code})
            notes.append(
                {
                    "subject_id": subject,
                    "hadm_id": hadm,
                    "category": "Discharge summary",
                    "chart_date": discharge.isoformat(),
                    "text": _note(p),
                }
            )
            # structured truth: a few charted measurements around the note value
            for var, value, unit, jitter in (
                ("temperature", p["temp"], "F", 0.3),
                ("hr", p["hr"], "bpm", 3.0),
                ("rr", p["rr"], "breaths/min", 1.0),
                ("spo2", p["spo2"], "%", 1.0),
                ("bp_sys", p["sys"], "mmHg", 4.0),
                ("bp_dia", p["dia"], "mmHg", 3.0),
                ("weight", p["weight"], "kg", 1.0),
                ("height", p["height"], "cm", 1.0),
            ):
                if value is None:
                    continue
                for t in range(int(rng.integers(1, 4))):
                    truth_v.append(
                        {
                            "hadm_id": hadm,
                            "variable": var,
                            "value": f"{value + float(rng.normal(0, jitter)):.1f}",
                            "unit": unit,
                            "charttime": (admit + timedelta(hours=6 * t)).isoformat(),
                        }
                    )
            for var, value in (
                ("gender", "MALE" if sex == "M" else "FEMALE"),
                ("age", f"{(admit - dob).days / 365.25:.1f}"),
                ("language", language or ""),
                ("marital_status", marital.upper()),
            ):
                if value:
                    truth_s.append({"hadm_id": hadm, "variable": var, "value": value})
            if a < len(gaps):
                admit = discharge + timedelta(days=gaps[a])
    return admissions, diagnoses, notes, truth_v, truth_s


def write_fixture(out_dir, seed=0):
    """Write the fixture CSVs into out_dir; returns the path map."""
    os.makedirs(out_dir, exist_ok=True)
    admissions, diagnoses, notes, truth_v, truth_s = build_fixture(seed)
    paths = {}

    def dump(name, rows, fields):
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(rows)
        paths[name] = path

    dump("admissions.csv", admissions,
         ["subject_id", "hadm_id", "admit_time", "discharge_time", "dob", "gender"])
    dump("diagnoses.csv", diagnoses, ["subject_id", "hadm_id", "icd9_code"])
    dump("notes.csv", notes, ["subject_id", "hadm_id", "category", "chart_date", "text"])
    dump("truth_vitals.csv", truth_v, ["hadm_id", "variable", "value", "unit", "charttime"])
    dump("truth_sdoh.csv", truth_s, ["hadm_id", "variable", "value"])
    return paths
