//! Benchmark harness: ingestion, batched runs and reporting.

pub mod experiment;
pub mod input;
pub mod report;

pub use experiment::{
    build_pool, geomean, make_graph, run_experiment, run_experiment_observed, run_th1_sweep, BatchReport,
    ExperimentReport, Format, Phase, RunSpec, Summary, SweepPoint, SWEEP_TH1,
};
pub use input::{gen_synthetic, load_snap, max_batch_degree, shuffle, synthetic_weight, EdgeList, InputEdge, SyntheticKind};
pub use report::{emit_report, emit_sweep, write_report, write_sweep, ReportFormat, COLUMNS, SWEEP_COLUMNS};
