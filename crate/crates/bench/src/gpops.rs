//! Throughput accounting.

use stackgp::evolve::{EvolveError, RunStats};
use stackgp::interp::ConfigError;
use stackgp::problems::ProblemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("elapsed time must be positive, got {0} s")]
    ZeroElapsed(f64),
    #[error("stack table needs at least one genome")]
    EmptyCollection,
    #[error("{cell} diverged from {reference} at generation {generation} (repeat {repeat})")]
    Equivalence {
        cell: String,
        reference: String,
        repeat: usize,
        generation: usize,
    },
    #[error("no benchmark cells")]
    NoCells,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// GPop/s: evaluated tree nodes × fitness cases / wall seconds of the run.
///
/// Boolean problems pass their logical case count.
pub fn measure_gpops(stats: &RunStats, num_cases: usize) -> Result<f64, BenchError> {
    rate(stats.total_tree_nodes, num_cases, stats.wall_seconds)
}

/// Word-level rate of a bit-packed run: nodes × packed words per variable /
/// wall seconds, one word holding 32 cases.
pub fn measure_gpops_raw(stats: &RunStats, packed_words: usize) -> Result<f64, BenchError> {
    rate(stats.total_tree_nodes, packed_words, stats.wall_seconds)
}

fn rate(nodes: u64, cases: usize, seconds: f64) -> Result<f64, BenchError> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(BenchError::ZeroElapsed(seconds));
    }
    Ok(nodes as f64 * cases as f64 / seconds)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
