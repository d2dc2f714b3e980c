//! Backend sweeps with run-level equivalence checking.

use serde::Serialize;
use stackgp::evolve::{Evolution, GpParams, RunStats};
use stackgp::interp::{BackendRegistry, EvalConfig};
use stackgp::problems::{ProblemData, ProblemSpec};

use crate::gpops::{mean_sd, measure_gpops, measure_gpops_raw};
use crate::BenchError;

/// One benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub config: EvalConfig,
    pub workers: usize,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{} workers={}", self.config.label(), self.workers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRow {
    pub backend: String,
    #[serde(rename = "B")]
    pub batch: usize,
    #[serde(rename = "R")]
    pub registers: usize,
    pub workers: usize,
    /// GPop/s of each repeat.
    pub gpops: Vec<f64>,
    pub gpops_mean: f64,
    /// Sample standard deviation over repeats.
    pub gpops_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gpops_raw_bitparallel: Option<f64>,
}

/// Everything recorded for one cell.
#[derive(Debug, Clone)]
pub struct CellRuns {
    pub cell: Cell,
    pub row: MatrixRow,
    pub runs: Vec<RunStats>,
}

/// Seed of repeat `r`.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add(repeat as u64)
}

/// Runs every cell `repeats` times. Repeat `r` uses the same derived seed in
/// every cell, and each cell's best and mean fitness per generation must
/// equal the first cell's; otherwise the sweep aborts.
pub fn backend_matrix(
    problem: &ProblemSpec,
    params: &GpParams,
    cells: &[Cell],
    repeats: usize,
    registry: &BackendRegistry,
) -> Result<Vec<CellRuns>, BenchError> {
    let reference = cells.first().ok_or(BenchError::NoCells)?;
    let backends = cells
        .iter()
        .map(|c| registry.build(&c.config))
        .collect::<Result<Vec<_>, _>>()?;
    let mut runs: Vec<Vec<RunStats>> = vec![Vec::with_capacity(repeats); cells.len()];
    for repeat in 0..repeats.max(1) {
        let params = GpParams {
            seed: repeat_seed(params.seed, repeat),
            ..params.clone()
        };
        for (i, (cell, backend)) in cells.iter().zip(&backends).enumerate() {
            let stats = Evolution::new(params.clone(), problem, backend.as_ref())
                .workers(cell.workers)
                .run()?;
            if i > 0 {
                check_same_trajectory(&runs[0][repeat], &stats, cell, reference, repeat)?;
            }
            runs[i].push(stats);
        }
    }
    let packed_words = match problem.data() {
        ProblemData::Packed(p) => Some(p.words_per_var()),
        ProblemData::Real(_) => None,
    };
    cells
        .iter()
        .zip(runs)
        .map(|(cell, runs)| {
            let gpops = runs
                .iter()
                .map(|s| measure_gpops(s, problem.num_cases()))
                .collect::<Result<Vec<_>, _>>()?;
            let (gpops_mean, gpops_sd) = mean_sd(&gpops);
            let gpops_raw_bitparallel = match (packed_words, cell.config.backend) {
                (Some(words), stackgp::interp::BackendKind::BoolPacked) => {
                    let raw = runs
                        .iter()
                        .map(|s| measure_gpops_raw(s, words))
                        .collect::<Result<Vec<_>, _>>()?;
                    Some(mean_sd(&raw).0)
                }
                _ => None,
            };
            Ok(CellRuns {
                cell: *cell,
                row: MatrixRow {
                    backend: cell.config.backend.name().to_string(),
                    batch: cell.config.batch,
                    registers: cell.config.registers,
                    workers: cell.workers,
                    gpops,
                    gpops_mean,
                    gpops_sd,
                    gpops_raw_bitparallel,
                },
                runs,
            })
        })
        .collect()
}

fn check_same_trajectory(
    expected: &RunStats,
    got: &RunStats,
    cell: &Cell,
    reference: &Cell,
    repeat: usize,
) -> Result<(), BenchError> {
    let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
    let diverged = expected
        .generations
        .iter()
        .zip(&got.generations)
        .position(|(a, b)| !same(a.best_fitness, b.best_fitness) || !same(a.mean_fitness, b.mean_fitness))
        .or((expected.generations.len() != got.generations.len()).then_some(got.generations.len()));
    match diverged {
        None => Ok(()),
        Some(generation) => Err(BenchError::Equivalence {
            cell: cell.label(),
            reference: reference.label(),
            repeat,
            generation,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use stackgp::interp::BackendKind;
    use stackgp::problems::gen_sextic;

    fn cell(kind: BackendKind, workers: usize) -> Cell {
        Cell {
            config: EvalConfig::new(kind),
            workers,
        }
    }

    #[test]
    fn cells_agree_and_repeat_one_has_zero_sd() {
        let problem = gen_sextic(200, &mut ChaCha8Rng::seed_from_u64(5));
        let params = GpParams {
            population_size: 30,
            max_generations: 3,
            seed: 9,
            ..GpParams::default()
        };
        let cells = [cell(BackendKind::Rpn1d, 1), cell(BackendKind::Lgp2d, 2)];
        let out = backend_matrix(&problem, &params, &cells, 1, &BackendRegistry::with_defaults()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].runs[0].best_trajectory(), out[1].runs[0].best_trajectory());
        assert!(out.iter().all(|c| c.row.gpops_sd == 0.0 && c.row.gpops_mean > 0.0));
        assert_eq!(out[1].row.batch, 4);
    }

    #[test]
    fn divergence_is_reported() {
        let problem = gen_sextic(50, &mut ChaCha8Rng::seed_from_u64(5));
        let params = GpParams {
            population_size: 20,
            max_generations: 2,
            ..GpParams::default()
        };
        let backend = BackendRegistry::with_defaults()
            .build(&EvalConfig::new(BackendKind::Rpn1d))
            .unwrap();
        let a = Evolution::new(params.clone(), &problem, backend.as_ref()).run().unwrap();
        let b = Evolution::new(GpParams { seed: 77, ..params }, &problem, backend.as_ref())
            .run()
            .unwrap();
        let c = cell(BackendKind::Rpn1d, 1);
        assert!(check_same_trajectory(&a, &a, &c, &c, 0).is_ok());
        assert!(matches!(
            check_same_trajectory(&a, &b, &c, &c, 0),
            Err(BenchError::Equivalence { .. })
        ));
    }
}
