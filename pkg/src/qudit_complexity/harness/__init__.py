"""Command-line runs, configuration, run records and table regeneration."""
from .cli import main, run_subcommand
from .records import RunRecord, canonical_json, load_record
from .suites import SUITES, ExperimentSuite, SuiteEntry
from .tables import TableConflict, regenerate_table

__all__ = [
    "main",
    "run_subcommand",
    "RunRecord",
    "canonical_json",
    "load_record",
    "SUITES",
    "ExperimentSuite",
    "SuiteEntry",
    "TableConflict",
    "regenerate_table",
]
