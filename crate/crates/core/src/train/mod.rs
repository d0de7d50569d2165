//! Splitting, training, calibration, metrics and experiment orchestration.

mod data;
mod experiment;
mod metrics;
mod split;
mod trainer;

pub use data::{encode_note, ensure_sentence, make_examples, prepare, sample_records, DataConfig, PreparedData};
pub use experiment::{
    results_csv, run_experiment, run_experiment_on, run_variant, ExperimentReport, Manifest, ResultRow, VariantRun,
    RESULTS_HEADER,
};
pub use metrics::{binarize, calibrate_threshold, f1_at, micro_f1, threshold_grid, Counts, MetricsReport};
pub use split::{split_dataset, split_indices, Split, SplitSpec};
pub use trainer::{evaluate, history_csv, predict_scores, targets, train, EpochRecord, Example, TrainConfig, TrainOutcome};
