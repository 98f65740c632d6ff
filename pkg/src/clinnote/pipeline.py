"""Stage orchestration: wiring the modules into reproducible runs.

Each stage reads its inputs from and writes its outputs into one run
directory, atomically, and records input/output content hashes in a run
manifest. Re-running a completed stage with unchanged inputs is a no-op,
which makes long live-LLM runs resumable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time

from . import cohort as cohort_mod
from . import stats as stats_mod
from .config import Config
from .errors import (
    DegeneratePredictor,
    DegenerateTable,
    DependencyMissing,
    InvalidInput,
    JudgeFailed,
    NoConvergence,
    SeparationDetected,
)
from .extraction import CHARTED_KEYS, ExtractionRecord, Extractor
from .fidelity import (
    corpus_judge_summary,
    evaluate_categorical,
    evaluate_vital,
    judge_diagnoses,
    load_truth_sdoh,
    load_truth_vitals,
)
from .gateway import LLMGateway
from .normalize import NORMALIZED_VARIABLES, normalize_variable
from .predict import evaluate_cv
from .prompts import prompt_hashes
from .summarize import Summarizer, render_structural
from .vitals import CanonicalVital, canonicalize_record

log = logging.getLogger(__name__)

STAGES = (
    "ingest",
    "extract",
    "canonicalize",
    "normalize",
    "evaluate-fidelity",
    "associate",
    "summarize",
    "predict",
)

# stage -> (prerequisite stage, file that must exist) pairs
_DEPENDENCIES = {
    "ingest": [],
    "extract": [("ingest", "cohort.jsonl"), ("ingest", "pairs.csv")],
    "canonicalize": [("extract", "extractions.jsonl")],
    "normalize": [("extract", "extractions.jsonl")],
    "evaluate-fidelity": [("canonicalize", "canonical_vitals.csv"),
                          ("extract", "extractions.jsonl")],
    "associate": [("canonicalize", "canonical_vitals.csv"),
                  ("normalize", "normalized_sdoh.csv"),
                  ("ingest", "pairs.csv")],
    "summarize": [("extract", "extractions.jsonl"), ("ingest", "cohort.jsonl")],
    "predict": [("summarize", "summaries.jsonl"), ("extract", "extractions.jsonl"),
                ("ingest", "pairs.csv")],
}

_STAGE_INPUTS = {
    "ingest": [],
    "extract": ["cohort.jsonl", "pairs.csv"],
    "canonicalize": ["extractions.jsonl"],
    "normalize": ["extractions.jsonl"],
    "evaluate-fidelity": ["canonical_vitals.csv", "extractions.jsonl"],
    "associate": ["canonical_vitals.csv", "normalized_sdoh.csv", "pairs.csv",
                  "extractions.jsonl"],
    "summarize": ["cohort.jsonl", "pairs.csv", "extractions.jsonl"],
    "predict": ["summaries.jsonl", "pairs.csv", "cohort.jsonl", "extractions.jsonl"],
}


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, obj):
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


class Runner:
    def __init__(self, config: Config, out_dir: str, gateway=None):
        self.config = config
        self.out = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self._gateway = gateway
        self.manifest_path = os.path.join(out_dir, "manifest.json")
        self.manifest = self._load_manifest()

    # -- manifest ----------------------------------------------------------

    def _config_hash(self):
        from dataclasses import asdict

        return hashlib.sha256(
            json.dumps(asdict(self.config), sort_keys=True).encode()
        ).hexdigest()

    def _load_manifest(self):
        if os.path.exists(self.manifest_path):
            with open(self.manifest_path) as fh:
                return json.load(fh)
        return {
            "run_id": hashlib.sha256(
                f"{self._config_hash()}:{self.config.seed}".encode()
            ).hexdigest()[:12],
            "config_hash": self._config_hash(),
            "prompt_hashes": prompt_hashes(),
            "seed": self.config.seed,
            "stages": {},
        }

    def _save_manifest(self):
        gw = self._gateway
        if gw is not None:
            self.manifest["gateway"] = {
                "network_calls": gw.network_calls,
                "cache_hits": gw.cache_hits,
            }
        _write_json(self.manifest_path, self.manifest)

    @property
    def gateway(self):
        if self._gateway is None:
            self._gateway = LLMGateway(self.config)
        return self._gateway

    def path(self, name):
        return os.path.join(self.out, name)

    # -- public API --------------------------------------------------------

    def run_stage(self, stage):
        """Run one stage; no-op if already complete with identical inputs."""
        if stage not in STAGES:
            raise InvalidInput(f"unknown stage: {stage}")
        for prereq, artifact in _DEPENDENCIES[stage]:
            if not os.path.exists(self.path(artifact)):
                raise DependencyMissing(prereq)

        input_hashes = {
            name: _sha256_file(self.path(name))
            for name in _STAGE_INPUTS[stage]
            if os.path.exists(self.path(name))
        }
        if stage == "ingest":
            for p in (self.config.admissions_path, self.config.diagnoses_path,
                      self.config.notes_path):
                if os.path.exists(p):
                    input_hashes[p] = _sha256_file(p)

        done = self.manifest["stages"].get(stage)
        if (
            done
            and done.get("input_hashes") == input_hashes
            and done.get("config_hash") == self._config_hash()
            and all(os.path.exists(self.path(f)) for f in done.get("output_hashes", {}))
        ):
            log.info("stage %s up to date; skipping", stage)
            return done

        started = time.time()
        outputs = getattr(self, "_stage_" + stage.replace("-", "_"))()
        entry = {
            "input_hashes": input_hashes,
            "output_hashes": {f: _sha256_file(self.path(f)) for f in outputs},
            "config_hash": self._config_hash(),
            "started": started,
            "finished": time.time(),
        }
        self.manifest["stages"][stage] = entry
        self._save_manifest()
        return entry

    def run_all(self):
        for stage in STAGES:
            self.run_stage(stage)
        return self.manifest

    # -- shared loaders ----------------------------------------------------

    def _load_cohort(self):
        records = {}
        with open(self.path("cohort.jsonl")) as fh:
            for line in fh:
                d = json.loads(line)
                records[d["hadm_id"]] = d
        return records

    def _load_pairs(self):
        pairs = []
        with open(self.path("pairs.csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                pairs.append(row)
        return pairs

    def _load_extractions(self):
        records = []
        with open(self.path("extractions.jsonl")) as fh:
            for line in fh:
                records.append(ExtractionRecord.from_dict(json.loads(line)))
        return records

    def _outcomes(self):
        """index hadm_id -> readmission label."""
        return {row["index_hadm_id"]: int(row["label"]) for row in self._load_pairs()}

    def _modeling_notes(self):
        """index hadm_id -> discharge note, for admissions that have one."""
        cohort = self._load_cohort()
        out = {}
        for row in self._load_pairs():
            rec = cohort.get(row["index_hadm_id"])
            if rec and rec.get("discharge_note"):
                out[row["index_hadm_id"]] = rec["discharge_note"]
        return out

    # -- stages ------------------------------------------------------------

    def _stage_ingest(self):
        store = cohort_mod.load_tables(
            self.config.admissions_path,
            self.config.diagnoses_path,
            self.config.notes_path,
        )
        store = cohort_mod.filter_hf_cohort(store)
        pairs = cohort_mod.build_readmission_pairs(store)
        summary = cohort_mod.summarize_cohort(store, pairs)
        cohort_mod.write_cohort_jsonl(store, self.path("cohort.jsonl"))
        cohort_mod.write_pairs_csv(pairs, self.path("pairs.csv"))
        _write_json(self.path("cohort_summary.json"), summary.to_dict())
        _write_json(self.path("rejects.json"), store.rejects)
        return ["cohort.jsonl", "pairs.csv", "cohort_summary.json", "rejects.json"]

    def _stage_extract(self):
        notes = self._modeling_notes()
        extractor = Extractor(self.gateway, temperature=self.config.temperature)
        records, quarantined = extractor.extract_many(notes)
        with open(self.path("extractions.jsonl") + ".tmp", "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        os.replace(self.path("extractions.jsonl") + ".tmp", self.path("extractions.jsonl"))
        with open(self.path("quarantine.jsonl") + ".tmp", "w") as fh:
            for q in quarantined:
                fh.write(
                    json.dumps(
                        {"hadm_id": q.hadm_id, "raw_text": q.raw_text, "reason": q.reason},
                        sort_keys=True,
                    )
                    + "\n"
                )
        os.replace(self.path("quarantine.jsonl") + ".tmp", self.path("quarantine.jsonl"))
        return ["extractions.jsonl", "quarantine.jsonl"]

    def _stage_canonicalize(self):
        rows = []
        for rec in self._load_extractions():
            for outcome in canonicalize_record(rec):
                value = getattr(outcome, "value", "")
                unit = getattr(outcome, "original_unit", "")
                rows.append(
                    [
                        outcome.hadm_id,
                        outcome.variable,
                        f"{value:.6f}" if isinstance(value, float) else value,
                        outcome.original_text,
                        unit,
                        outcome.status,
                    ]
                )
        rows.sort()
        tmp = self.path("canonical_vitals.csv") + ".tmp"
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hadm_id", "variable", "value", "original_text",
                             "original_unit", "status"])
            writer.writerows(rows)
        os.replace(tmp, self.path("canonical_vitals.csv"))
        return ["canonical_vitals.csv"]

    def _load_canonical_vitals(self):
        """variable -> hadm_id -> CanonicalVital (ok rows only)."""
        out: dict = {}
        with open(self.path("canonical_vitals.csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                if row["status"] != "ok":
                    continue
                out.setdefault(row["variable"], {})[row["hadm_id"]] = CanonicalVital(
                    hadm_id=row["hadm_id"],
                    variable=row["variable"],
                    value=float(row["value"]),
                    original_text=row["original_text"],
                    original_unit=row["original_unit"],
                )
        return out

    def _stage_normalize(self):
        records = self._load_extractions()
        os.makedirs(self.path("schemes"), exist_ok=True)
        all_rows = []
        scheme_files = []
        for variable in NORMALIZED_VARIABLES:
            entries = []
            for rec in records:
                value = rec.get(variable)
                if value is not None:
                    entries.append((rec.hadm_id, value))
            if len(set(t for _, t in entries)) < 2:
                log.info("normalize: skipping %s (%d distinct entries)",
                         variable, len(set(t for _, t in entries)))
                continue
            scheme, labeled, clustering = normalize_variable(
                self.gateway, variable, entries,
                k=self.config.k_medoids, seed=self.config.seed,
            )
            scheme_path = os.path.join("schemes", f"{variable}.json")
            _write_json(self.path(scheme_path), scheme.to_dict())
            scheme_files.append(scheme_path)
            log.info("normalize: %s cluster sizes %s", variable,
                     sorted(clustering.cluster_sizes(), reverse=True)[:10])
            for entry in labeled:
                all_rows.append(
                    [entry.hadm_id, entry.variable, entry.raw_text,
                     entry.assigned_category or "", entry.status]
                )
        all_rows.sort()
        tmp = self.path("normalized_sdoh.csv") + ".tmp"
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hadm_id", "variable", "raw_text", "category", "status"])
            writer.writerows(all_rows)
        os.replace(tmp, self.path("normalized_sdoh.csv"))
        return ["normalized_sdoh.csv"] + scheme_files

    def _stage_evaluate_fidelity(self):
        records = self._load_extractions()
        canon = self._load_canonical_vitals()
        report = {"vitals": [], "categorical": []}

        if self.config.truth_vitals_path and os.path.exists(self.config.truth_vitals_path):
            truth_vitals = load_truth_vitals(self.config.truth_vitals_path)
            for variable in ("temperature", "hr", "rr", "spo2", "height", "weight",
                             "bp_sys", "bp_dia"):
                row = evaluate_vital(
                    variable, canon.get(variable, {}), truth_vitals.get(variable, {})
                )
                if row:
                    report["vitals"].append(row)

        if self.config.truth_sdoh_path and os.path.exists(self.config.truth_sdoh_path):
            truth_sdoh = load_truth_sdoh(self.config.truth_sdoh_path)
            extracted_charted = {
                var: {r.hadm_id: r.charted_sdoh.get(var) for r in records}
                for var in CHARTED_KEYS
            }
            for variable in CHARTED_KEYS:
                row = evaluate_categorical(
                    variable, extracted_charted[variable], truth_sdoh.get(variable, {})
                )
                if row:
                    report["categorical"].append(row)

        _write_json(self.path("agreement_report.json"), report)

        cohort = self._load_cohort()
        verdicts = []
        failed = 0
        for rec in records:
            codes = cohort.get(rec.hadm_id, {}).get("icd9_codes", [])
            if not codes:
                continue
            try:
                verdict = judge_diagnoses(
                    self.gateway, rec.hadm_id,
                    [d["condition"] for d in rec.diagnoses], codes,
                )
            except JudgeFailed as exc:
                log.warning("judge failed: %s", exc)
                failed += 1
                continue
            verdicts.append(verdict)
        judge_report = {
            "per_patient": [v.to_dict() for v in verdicts],
            "summary": corpus_judge_summary(verdicts) if verdicts else None,
            "n_failed": failed,
        }
        _write_json(self.path("judge_report.json"), judge_report)
        return ["agreement_report.json", "judge_report.json"]

    def _stage_associate(self):
        outcomes = self._outcomes()
        canon = self._load_canonical_vitals()
        records = {r.hadm_id: r for r in self._load_extractions()}

        logistic = []
        numeric_vars = ["temperature", "hr", "rr", "spo2", "height", "weight",
                        "bp_sys", "bp_dia", "age"]
        for variable in numeric_vars:
            xs, ys = [], []
            for hadm_id, label in outcomes.items():
                if variable == "age":
                    rec = records.get(hadm_id)
                    age = rec.charted_sdoh.get("age") if rec else None
                    if age is None:
                        continue
                    import re as _re

                    m = _re.fullmatch(r"\d+(?:\.\d+)?", str(age).strip())
                    if not m:
                        continue
                    xs.append(float(m.group()))
                else:
                    vital = canon.get(variable, {}).get(hadm_id)
                    if vital is None:
                        continue
                    xs.append(vital.value)
                ys.append(label)
            try:
                fit = stats_mod.fit_univariate_logistic(
                    xs, ys, standardize=self.config.standardize, variable=variable
                )
                logistic.append(fit.to_dict())
            except (InvalidInput, DegeneratePredictor, SeparationDetected,
                    NoConvergence) as exc:
                logistic.append({"variable": variable, "skipped": str(exc), "n": len(xs)})

        chisq = []
        labeled_by_var: dict = {}
        with open(self.path("normalized_sdoh.csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                if row["status"] == "unlabeled" or not row["category"]:
                    continue
                labeled_by_var.setdefault(row["variable"], []).append(row)

        class _Entry:
            def __init__(self, hadm_id, cat):
                self.hadm_id = hadm_id
                self.assigned_category = cat

        # gender bypasses normalization but still gets a chi-square row
        gender_entries = [
            _Entry(h, r.charted_sdoh.get("gender"))
            for h, r in records.items()
            if r.charted_sdoh.get("gender") is not None
        ]
        variables = {"gender": gender_entries}
        for variable, rows in sorted(labeled_by_var.items()):
            variables[variable] = [_Entry(r["hadm_id"], r["category"]) for r in rows]

        for variable, entries in variables.items():
            uniq_raw = len(
                {r["raw_text"] for r in labeled_by_var.get(variable, [])}
            ) if variable != "gender" else len(
                {e.assigned_category for e in entries}
            )
            try:
                table = stats_mod.build_contingency(entries, outcomes)
                result = stats_mod.chi_square_test(table, variable=variable)
                result.unique_values = uniq_raw
                entry = result.to_dict()
                entry["contingency"] = {
                    "rows": table.rows,
                    "counts": table.counts.astype(int).tolist(),
                }
                chisq.append(entry)
            except DegenerateTable as exc:
                chisq.append({"variable": variable, "skipped": str(exc)})

        _write_json(
            self.path("association_report.json"),
            {"logistic": logistic, "chi_square": chisq},
        )
        return ["association_report.json"]

    def _stage_summarize(self):
        notes = self._modeling_notes()
        records = {r.hadm_id: r for r in self._load_extractions()}
        summarizer = Summarizer(self.gateway)
        out = []
        for hadm_id in sorted(notes):
            note = notes[hadm_id]
            out.append(summarizer.summarize(note, "overall", hadm_id))
            out.append(summarizer.summarize(note, "no_number", hadm_id))
            if hadm_id in records:
                out.append(render_structural(records[hadm_id], note))
        tmp = self.path("summaries.jsonl") + ".tmp"
        with open(tmp, "w") as fh:
            for rec in out:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        os.replace(tmp, self.path("summaries.jsonl"))
        return ["summaries.jsonl"]

    def _stage_predict(self):
        outcomes = self._outcomes()
        notes = self._modeling_notes()
        summaries: dict = {}
        with open(self.path("summaries.jsonl")) as fh:
            for line in fh:
                d = json.loads(line)
                summaries.setdefault(d["variant"], {})[d["hadm_id"]] = d

        corpora = {"raw": {h: n for h, n in notes.items()}}
        for variant in ("overall", "no_number", "structural"):
            docs = {}
            for hadm_id, d in summaries.get(variant, {}).items():
                if variant == "no_number" and d["status"] == "contains_numbers":
                    continue
                if d["status"] == "failed":
                    continue
                docs[hadm_id] = d["text"]
            corpora[variant] = docs

        report = {}
        for variant, docs in corpora.items():
            hadm_ids = sorted(h for h in docs if h in outcomes)
            texts = [docs[h] for h in hadm_ids]
            labels = [outcomes[h] for h in hadm_ids]
            try:
                result = evaluate_cv(
                    texts, labels,
                    n_folds=self.config.folds,
                    seed=self.config.seed,
                    l2_lambda=self.config.l2_lambda,
                    variant=variant,
                )
                report[variant] = result.to_dict()
            except InvalidInput as exc:
                report[variant] = {"input_variant": variant, "skipped": str(exc),
                                   "n_docs": len(texts)}
        _write_json(self.path("prediction_report.json"), report)
        return ["prediction_report.json"]


def report_files(out_dir):
    """The deterministic report outputs (excludes the timestamped manifest)."""
    names = [
        "cohort.jsonl", "pairs.csv", "cohort_summary.json", "extractions.jsonl",
        "canonical_vitals.csv", "normalized_sdoh.csv", "agreement_report.json",
        "judge_report.json", "association_report.json", "summaries.jsonl",
        "prediction_report.json",
    ]
    return [os.path.join(out_dir, n) for n in names if os.path.exists(os.path.join(out_dir, n))]


def report_hash(out_dir):
    """One hash over all report files, for determinism checks."""
    h = hashlib.sha256()
    for path in report_files(out_dir):
        h.update(os.path.basename(path).encode())
        h.update(_sha256_file(path).encode())
    return h.hexdigest()
