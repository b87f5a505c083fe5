from .config import SweepConfig, derive_seed
from .registry import format_spec, make_env, make_policy, parse_spec
from .report import (
    SUMMARY_COLUMNS,
    TRIAL_COLUMNS,
    SummaryRow,
    read_summary,
    read_trials,
    select,
    summarize,
    summarize_group,
    write_heatmap,
    write_summary,
    write_trials,
)
from .sweep import run_sweep, write_summaries
from .trials import TrialError, TrialFailure, TrialResult, Truth, compute_truth, run_block, run_trial

__all__ = [
    "SUMMARY_COLUMNS", "TRIAL_COLUMNS", "SummaryRow", "SweepConfig", "TrialError", "TrialFailure",
    "TrialResult", "Truth", "compute_truth", "derive_seed", "format_spec", "make_env", "make_policy",
    "parse_spec", "read_summary", "read_trials", "run_block", "run_sweep", "run_trial", "select",
    "summarize", "summarize_group", "write_heatmap", "write_summaries", "write_summary", "write_trials",
]
