"""Build the bundled synthetic cohort and walk through readmission labeling.

Run: python3 demos/01_cohort_and_labels.py
"""

import tempfile

from clinnote.cohort import (
    build_readmission_pairs,
    filter_hf_cohort,
    load_tables,
    summarize_cohort,
)
from clinnote.fixture import write_fixture


def main():
    with tempfile.TemporaryDirectory() as tmp:
        paths = write_fixture(tmp, seed=0)
        store = load_tables(
            paths["admissions.csv"], paths["diagnoses.csv"], paths["notes.csv"]
        )
        print(f"loaded {len(store.admissions)} admissions, "
              f"{store.n_notes_total} discharge notes")

        store = filter_hf_cohort(store)
        print(f"heart-failure cohort: {len(store.admissions)} admissions")

        pairs = build_readmission_pairs(store)
        print(f"\n{len(pairs)} readmission pairs (label = interval <= 30 days):")
        for p in sorted(pairs, key=lambda p: p.interval_days):
            print(f"  {p.index_hadm_id} -> {p.next_hadm_id}: "
                  f"{p.interval_days:5.1f} days  label={p.label}")

        summary = summarize_cohort(store, pairs)
        print(f"\nreadmission rate: {summary.readmission_rate:.2f}")
        print(f"median length of stay: {summary.median_los:.1f} days "
              f"(IQR {summary.los_iqr[0]:.1f}-{summary.los_iqr[1]:.1f})")


if __name__ == "__main__":
    main()
