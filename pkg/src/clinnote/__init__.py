"""clinnote: discharge-note risk factor mining and readmission prediction.

Subpackages cover the full pipeline: cohort construction from admission
tables, LLM-backed extraction/normalization/summarization agents, vital
sign canonicalization, fidelity evaluation against structured ground
truth, association statistics, and a TF-IDF readmission classifier.
"""

__version__ = "0.1.0"
