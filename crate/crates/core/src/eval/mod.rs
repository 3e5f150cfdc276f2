//! Retrieval metrics, answer matching, sweeps and size budgets.

mod answer;
mod budget;
mod metrics;
mod sweep;

pub use answer::{answer_match, normalize_answer_text, NORMALIZATION_VERSION};
pub use budget::{params_to_bytes, system_size_report, SizeBudget, BYTES_PER_F32_PARAM};
pub use metrics::{
    evaluate_index, precision_at_k, precision_from_results, recall_vs_exact, retrieve, EvalMetrics,
    PassageStore, QuerySet, P_AT_K, RECALL_K,
};
pub use sweep::{
    filtered_passages, grid, parse_csv, run_config, run_sweep, to_csv, Storage, SweepConfig, SweepData,
    SweepFailure, SweepOutcome, SweepRow, CSV_COLUMNS,
};
