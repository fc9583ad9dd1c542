"""cohortkit: a desk-scale remote-monitoring platform kernel.

Schema-validated streaming ingestion into an append-only topic log, study
and questionnaire management, OAuth2 vendor collection against a bundled
mock vendor, a deterministic digital-biomarker feature pipeline, and
compliance reporting with partitioned export.
"""

__version__ = "0.1.0"
