//! Scoring against ground truth and the multi-seed benchmark runner.

mod bench;
mod metrics;

pub use bench::{benchmark_dataset, run_benchmark, BenchConfig, BenchRow, BenchmarkReport, Method, MethodSummary};
pub use metrics::{score, GraphMetrics};
