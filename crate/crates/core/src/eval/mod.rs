//! BSS Eval source-separation metrics and dataset-level reports.

mod bss;
mod cholesky;
mod report;

pub use bss::{
    decompose, sdr_sir_sar, Decomposition, Metrics, ReferenceSet, CLAMP_DB, DEFAULT_FILTER_LENGTH,
    GRAM_REGULARIZATION,
};
pub use cholesky::Cholesky;
pub use report::{comparison_csv, evaluate_dataset, evaluate_track, median, EvalReport, TrackPair, TrackReport};
