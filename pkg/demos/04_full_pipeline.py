"""End-to-end offline run: fixture data through all eight pipeline stages,
then a tour of the generated reports.

Run: python3 demos/04_full_pipeline.py
"""

import json
import os
import tempfile

from clinnote.config import Config
from clinnote.fixture import write_fixture
from clinnote.pipeline import Runner, report_hash


def main():
    with tempfile.TemporaryDirectory() as tmp:
        data = write_fixture(os.path.join(tmp, "data"), seed=0)
        config = Config(
            admissions_path=data["admissions.csv"],
            diagnoses_path=data["diagnoses.csv"],
            notes_path=data["notes.csv"],
            truth_vitals_path=data["truth_vitals.csv"],
            truth_sdoh_path=data["truth_sdoh.csv"],
            mock_mode=True,
            cache_dir=os.path.join(tmp, "cache"),
            folds=3,
            k_medoids=8,
        )
        out = os.path.join(tmp, "run")
        Runner(config, out).run_all()
        print(f"report hash: {report_hash(out)}\n")

        with open(os.path.join(out, "agreement_report.json")) as fh:
            agreement = json.load(fh)
        print("extraction agreement vs structured truth:")
        for row in agreement["vitals"] + agreement["categorical"]:
            cond = f"{row['cond_acc']:.0f}%" if row["cond_acc"] is not None else "n/a"
            print(f"  {row['variable']:12s} extracted {row['pct_extracted']:5.1f}%  "
                  f"cond acc {cond}")

        with open(os.path.join(out, "association_report.json")) as fh:
            assoc = json.load(fh)
        print("\nunivariate logistic fits (standardized):")
        for row in assoc["logistic"]:
            if "skipped" in row:
                print(f"  {row['variable']:12s} skipped: {row['skipped']}")
            else:
                print(f"  {row['variable']:12s} OR {row['odds_ratio']:5.2f}  "
                      f"p {row['p_value']:.3f}  n {row['n']}")

        with open(os.path.join(out, "prediction_report.json")) as fh:
            pred = json.load(fh)
        print("\nreadmission classifier (3-fold CV AUROC by input variant):")
        for variant, rep in pred.items():
            if "skipped" in rep:
                print(f"  {variant:10s} skipped: {rep['skipped']}")
            else:
                s = rep["summary"]["auroc"]
                print(f"  {variant:10s} {s['mean']:.3f} +/- {s['sd']:.3f}")


if __name__ == "__main__":
    main()
