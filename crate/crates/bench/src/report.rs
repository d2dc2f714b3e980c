//! JSON and CSV report output.

use std::fmt::Write as _;

use serde::Serialize;
use stackgp::evolve::RunStats;

use crate::matrix::MatrixRow;
use crate::stack_table::StackRow;

/// Flags a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub problem: String,
    pub backends: Vec<String>,
    pub batch: Vec<usize>,
    pub registers: Vec<usize>,
    pub workers: Vec<usize>,
    pub pop: usize,
    pub generations: usize,
    pub seed: u64,
    pub repeats: usize,
    pub cases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_class: Option<String>,
    pub elitism: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub node_evals: u64,
    pub seconds: f64,
}

impl GenerationReport {
    pub fn from_stats(stats: &RunStats) -> Vec<Self> {
        stats
            .generations
            .iter()
            .map(|g| GenerationReport {
                best_fitness: g.best_fitness,
                mean_fitness: g.mean_fitness,
                node_evals: g.node_evals,
                seconds: g.seconds,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub cores: usize,
    pub build: String,
}

impl Environment {
    pub fn detect() -> Self {
        Environment {
            cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            build: format!(
                "{} {} ({})",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION"),
                if cfg!(debug_assertions) { "debug" } else { "release" }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: RunConfig,
    /// Mean over the reported runs.
    pub gpops: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gpops_raw_bitparallel: Option<f64>,
    pub wall_seconds: f64,
    pub total_node_evals: u64,
    /// Generations of the first run.
    pub generations: Vec<GenerationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stack_table: Option<Vec<StackRow>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<MatrixRow>,
    /// Statistic behind every `gpops_sd`.
    pub sd_statistic: &'static str,
    pub env: Environment,
}

pub const SD_STATISTIC: &str = "sample standard deviation";

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per cell: `backend,B,R,workers,gpops_mean,gpops_sd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("backend,B,R,workers,gpops_mean,gpops_sd\n");
        for row in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.backend, row.batch, row.registers, row.workers, row.gpops_mean, row.gpops_sd
            );
        }
        out
    }
}

/// `limit,rpn_pct,lgp_pct` rows.
pub fn stack_table_csv(rows: &[StackRow]) -> String {
    let mut out = String::from("limit,rpn_pct,lgp_pct\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.limit, r.rpn_pct, r.lgp_pct);
    }
    out
}
