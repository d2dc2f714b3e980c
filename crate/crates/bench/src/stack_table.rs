//! Cumulative stack-depth tables for the postfix and linear forms.

use serde::Serialize;
use stackgp::genome::TreeGenome;
use stackgp::lgp::rpn_to_lgp;

use crate::BenchError;

pub const DEFAULT_LIMITS: std::ops::RangeInclusive<usize> = 1..=12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StackRow {
    pub limit: usize,
    /// Percentage of genomes whose postfix stack never exceeds `limit`.
    pub rpn_pct: f64,
    /// Same for the linear form.
    pub lgp_pct: f64,
}

pub fn stack_limit_table<'a>(
    genomes: impl IntoIterator<Item = &'a TreeGenome>,
    limits: std::ops::RangeInclusive<usize>,
) -> Result<Vec<StackRow>, BenchError> {
    let depths: Vec<(usize, usize)> = genomes
        .into_iter()
        .map(|g| (g.rpn_max_stack_depth(), rpn_to_lgp(g).max_stack_depth()))
        .collect();
    if depths.is_empty() {
        return Err(BenchError::EmptyCollection);
    }
    let pct = |count: usize| 100.0 * count as f64 / depths.len() as f64;
    Ok(limits
        .map(|limit| StackRow {
            limit,
            rpn_pct: pct(depths.iter().filter(|d| d.0 <= limit).count()),
            lgp_pct: pct(depths.iter().filter(|d| d.1 <= limit).count()),
        })
        .collect())
}
