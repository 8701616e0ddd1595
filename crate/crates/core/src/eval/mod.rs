//! Metrics, the ablation harness, CSV reports and SVG charts.

pub mod ablation;
pub mod metrics;
pub mod plot;
pub mod report;

pub use ablation::{run_ablation, AblationResult, Experiment};
pub use metrics::{bin_errors, mae, pearson_r, percentage_error, reference_table_check, BinStats, MetricsReport};
