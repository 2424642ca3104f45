//! Training loop, evaluation, sweeps and file exports.

mod config;
mod eval;
mod grid;
mod sweep;
mod train;

pub use config::{AuxParams, ExperimentConfig, Method, OptimizerParams, TestOodKind, TestOodParams};
pub use eval::{evaluate, write_scores_csv, RunResult, SetReport};
pub use grid::{export_score_grid, write_score_grid, Bounds};
pub use sweep::{
    parse_list, results_without_timing, MethodSpec, run_cell, run_sweep, write_results_csv, SweepCell, SweepRow,
    RESULTS_HEADER,
};
pub use train::{
    build_data, train, train_with_observer, write_history_csv, Datasets, HistoryRow, NoopObserver,
    TrainObserver,
};
