//! Generational tree GP: ramped half-and-half initialisation, tournament
//! selection, subtree crossover and subtree mutation.
//!
//! Every random decision draws from a stream keyed by `(seed, generation,
//! slot)`, so a run is reproducible regardless of worker count.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::genome::{
    generate_tree, validate, FunctionSet, InitMethod, Limits, Node, TreeGenome, MAX_TREE_DEPTH,
    MAX_TREE_SIZE,
};
use crate::interp::{Backend, DataRef, EvalError, ProgramRef};
use crate::lgp::{rpn_to_lgp, LgpProgram};
use crate::problems::{ProblemError, ProblemSpec};

/// Attempts after the first when an offspring violates the limits.
pub const VARIATION_RETRIES: usize = 5;
/// Probability that a crossover point is a function node.
pub const FUNCTION_POINT_PROB: f64 = 0.9;
/// Depth of subtrees grown by mutation.
pub const MUTATION_DEPTH: usize = 4;
pub const INIT_MIN_DEPTH: usize = 2;
pub const INIT_MAX_DEPTH: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct GpParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub max_tree_size: usize,
    pub max_tree_depth: usize,
    /// Copy the best individual unchanged into the next generation.
    pub elitism: bool,
    pub seed: u64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            population_size: 1000,
            max_generations: 50,
            tournament_size: 7,
            crossover_prob: 0.95,
            mutation_prob: 0.2,
            max_tree_size: MAX_TREE_SIZE,
            max_tree_depth: MAX_TREE_DEPTH,
            elitism: true,
            seed: 1,
        }
    }
}

impl GpParams {
    fn check(&self) -> Result<(), EvolveError> {
        let bad = |what: &str| Err(EvolveError::Params(what.to_string()));
        if self.population_size < 2 {
            return bad("population size must be at least 2");
        }
        if self.tournament_size == 0 {
            return bad("tournament size must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) || !(0.0..=1.0).contains(&self.mutation_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(INIT_MAX_DEPTH..=MAX_TREE_DEPTH).contains(&self.max_tree_depth) {
            return bad("max tree depth must cover the initial depth range");
        }
        if !(1..=MAX_TREE_SIZE).contains(&self.max_tree_size) {
            return bad("max tree size out of range");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("selection met an unevaluated individual")]
    Unevaluated,
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: TreeGenome,
    /// `None` until evaluated.
    pub fitness: Option<f64>,
    /// Linear form, filled in when a linear backend evaluates the genome.
    pub lgp_cache: Option<LgpProgram>,
}

impl Individual {
    pub fn new(genome: TreeGenome) -> Self {
        Self {
            genome,
            fitness: None,
            lgp_cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    /// Mean over individuals with finite fitness; `+∞` if there are none.
    pub mean_fitness: f64,
    /// Tree nodes × cases evaluated in this generation.
    pub node_evals: u64,
    /// Summed size of the programs evaluated in this generation.
    pub tree_nodes: u64,
    /// Individuals evaluated in this generation (copies are not re-evaluated).
    pub evaluated: usize,
    /// Wall time spent evaluating.
    pub eval_seconds: f64,
    /// Wall time of the whole generation, breeding included.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Generation 0 (the initial population) through `max_generations`.
    pub generations: Vec<GenerationStats>,
    pub best: TreeGenome,
    pub best_fitness: f64,
    pub total_node_evals: u64,
    pub total_tree_nodes: u64,
    pub eval_seconds: f64,
    pub wall_seconds: f64,
}

impl RunStats {
    /// Cumulative node evaluations after each generation.
    pub fn cumulative_node_evals(&self) -> Vec<u64> {
        self.generations
            .iter()
            .scan(0u64, |acc, g| {
                *acc += g.node_evals;
                Some(*acc)
            })
            .collect()
    }

    /// Best fitness of each generation, the run's trajectory.
    pub fn best_trajectory(&self) -> Vec<f64> {
        self.generations.iter().map(|g| g.best_fitness).collect()
    }
}

/// Random stream for one `(generation, slot)` of a seeded run.
pub fn stream_rng(seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

/// Picks `k` individuals uniformly with replacement and returns the index of
/// the fittest; ties go to the earliest draw.
pub fn tournament_select<R: Rng + ?Sized>(
    rng: &mut R,
    population: &[Individual],
    k: usize,
) -> Result<usize, EvolveError> {
    let mut best: Option<(usize, f64)> = None;
    for _ in 0..k {
        let i = rng.random_range(0..population.len());
        let f = population[i].fitness.ok_or(EvolveError::Unevaluated)?;
        if best.is_none_or(|(_, bf)| f < bf) {
            best = Some((i, f));
        }
    }
    best.map(|(i, _)| i).ok_or(EvolveError::Params("empty tournament".into()))
}

/// Chooses a crossover point: a function node with probability 0.9 (when the
/// tree has any), otherwise a terminal.
pub fn pick_crossover_point<R: Rng + ?Sized>(rng: &mut R, genome: &TreeGenome) -> usize {
    let (funcs, terms): (Vec<usize>, Vec<usize>) =
        (0..genome.size()).partition(|&i| matches!(genome.code()[i], Node::Func(_)));
    let pool = if !funcs.is_empty() && rng.random_bool(FUNCTION_POINT_PROB) {
        funcs
    } else {
        terms
    };
    pool[rng.random_range(0..pool.len())]
}

/// Swaps the subtree rooted at `pa` in `a` with the one rooted at `pb` in `b`.
pub fn crossover_at(a: &TreeGenome, pa: usize, b: &TreeGenome, pb: usize) -> (TreeGenome, TreeGenome) {
    let ra = a.subtree_range(pa);
    let rb = b.subtree_range(pb);
    (
        a.replace_subtree(ra.clone(), b, rb.clone()),
        b.replace_subtree(rb, a, ra),
    )
}

/// Replaces the subtree rooted at `point` with `replacement`.
pub fn mutate_at(genome: &TreeGenome, point: usize, replacement: &TreeGenome) -> TreeGenome {
    genome.replace_subtree(genome.subtree_range(point), replacement, 0..replacement.size())
}

/// Subtree crossover. Each child that violates `limits` is retried with
/// fresh points; `None` for a child that still violates them after
/// [`VARIATION_RETRIES`] retries (the caller copies that parent).
pub fn subtree_crossover<R: Rng + ?Sized>(
    rng: &mut R,
    a: &TreeGenome,
    b: &TreeGenome,
    limits: &Limits,
) -> (Option<TreeGenome>, Option<TreeGenome>) {
    let mut first = None;
    let mut second = None;
    for _ in 0..=VARIATION_RETRIES {
        let pa = pick_crossover_point(rng, a);
        let pb = pick_crossover_point(rng, b);
        let (x, y) = crossover_at(a, pa, b, pb);
        if first.is_none() && validate(&x, limits).is_ok() {
            first = Some(x);
        }
        if second.is_none() && validate(&y, limits).is_ok() {
            second = Some(y);
        }
        if first.is_some() && second.is_some() {
            break;
        }
    }
    (first, second)
}

/// Subtree mutation with a grown subtree of depth at most
/// [`MUTATION_DEPTH`]. `None` if every attempt violates `limits`.
pub fn subtree_mutation<R: Rng + ?Sized>(
    rng: &mut R,
    genome: &TreeGenome,
    fset: &FunctionSet,
    limits: &Limits,
) -> Option<TreeGenome> {
    for _ in 0..=VARIATION_RETRIES {
        let point = rng.random_range(0..genome.size());
        let replacement = generate_tree(rng, fset, InitMethod::Grow, MUTATION_DEPTH);
        let child = mutate_at(genome, point, &replacement);
        if validate(&child, limits).is_ok() {
            return Some(child);
        }
    }
    None
}

/// Ramped half-and-half over depths 2..=6: slot `i` uses depth
/// `2 + i mod 5` and alternates full and grow every five slots.
pub fn ramped_half_and_half(params: &GpParams, fset: &FunctionSet, limits: &Limits) -> Vec<Individual> {
    let span = INIT_MAX_DEPTH - INIT_MIN_DEPTH + 1;
    (0..params.population_size)
        .map(|i| {
            let depth = INIT_MIN_DEPTH + i % span;
            let method = if (i / span).is_multiple_of(2) {
                InitMethod::Full
            } else {
                InitMethod::Grow
            };
            let mut rng = stream_rng(params.seed, 0, i);
            loop {
                let g = generate_tree(&mut rng, fset, method, depth);
                if validate(&g, limits).is_ok() {
                    return Individual::new(g);
                }
            }
        })
        .collect()
}

type Observer<'a> = dyn FnMut(usize, &[Individual]) + 'a;

/// A configured run. `workers` only affects speed, never results.
pub struct Evolution<'a> {
    params: GpParams,
    problem: &'a ProblemSpec,
    backend: &'a dyn Backend,
    workers: usize,
    observer: Option<Box<Observer<'a>>>,
}

impl<'a> Evolution<'a> {
    pub fn new(params: GpParams, problem: &'a ProblemSpec, backend: &'a dyn Backend) -> Self {
        Self {
            params,
            problem,
            backend,
            workers: 1,
            observer: None,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    /// Called with each evaluated generation.
    pub fn observer(mut self, f: impl FnMut(usize, &[Individual]) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    pub fn run(mut self) -> Result<RunStats, EvolveError> {
        self.params.check()?;
        let params = self.params.clone();
        let fset = self.problem.function_set();
        let limits = Limits {
            max_size: params.max_tree_size,
            max_depth: params.max_tree_depth,
            stack_capacity: self.backend.config().stack_capacity,
        };
        let data = self.problem.data_for(self.backend.kind())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| EvolveError::Pool(e.to_string()))?;

        let start = Instant::now();
        let mut population = ramped_half_and_half(&params, fset, &limits);
        let mut generations = Vec::with_capacity(params.max_generations + 1);
        let mut best: Option<(TreeGenome, f64)> = None;
        let mut gen_start = start;
        for generation in 0..=params.max_generations {
            let eval_start = Instant::now();
            let Work {
                node_evals,
                tree_nodes,
                evaluated,
            } = pool.install(|| evaluate(&mut population, self.backend, data))?;
            let eval_seconds = eval_start.elapsed().as_secs_f64();

            let (best_idx, best_fitness) = fittest(&population);
            let mean_fitness = finite_mean(population.iter().filter_map(|ind| ind.fitness));
            if best.as_ref().is_none_or(|(_, f)| best_fitness < *f) {
                best = Some((population[best_idx].genome.clone(), best_fitness));
            }
            if let Some(obs) = self.observer.as_mut() {
                obs(generation, &population);
            }
            if generation < params.max_generations {
                population = breed(&params, generation + 1, &population, best_idx, fset, &limits)?;
            }
            let now = Instant::now();
            generations.push(GenerationStats {
                generation,
                best_fitness,
                mean_fitness,
                node_evals,
                tree_nodes,
                evaluated,
                eval_seconds,
                seconds: (now - gen_start).as_secs_f64(),
            });
            gen_start = now;
        }
        let (best, best_fitness) = best.expect("at least one generation");
        Ok(RunStats {
            total_node_evals: generations.iter().map(|g| g.node_evals).sum(),
            total_tree_nodes: generations.iter().map(|g| g.tree_nodes).sum(),
            eval_seconds: generations.iter().map(|g| g.eval_seconds).sum(),
            generations,
            best,
            best_fitness,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .filter(|f| f.is_finite())
        .fold((0.0, 0usize), |(s, n), f| (s + f, n + 1));
    if count == 0 {
        f64::INFINITY
    } else {
        sum / count as f64
    }
}

/// Lowest fitness, earliest index on ties.
fn fittest(population: &[Individual]) -> (usize, f64) {
    population
        .iter()
        .enumerate()
        .map(|(i, ind)| (i, ind.fitness.expect("evaluated")))
        .fold((0, f64::INFINITY), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc })
}

struct Work {
    node_evals: u64,
    tree_nodes: u64,
    evaluated: usize,
}

/// Scores every unevaluated individual.
fn evaluate(population: &mut [Individual], backend: &dyn Backend, data: DataRef<'_>) -> Result<Work, EvolveError> {
    let linear = backend.kind().is_linear();
    let results: Vec<Option<(u64, u64)>> = population
        .par_iter_mut()
        .map(|ind| -> Result<_, EvalError> {
            if ind.fitness.is_some() {
                return Ok(None);
            }
            let outcome = if linear {
                let program = ind.lgp_cache.get_or_insert_with(|| rpn_to_lgp(&ind.genome));
                backend.evaluate(ProgramRef::Linear(program), data)?
            } else {
                backend.evaluate(ProgramRef::Tree(&ind.genome), data)?
            };
            ind.fitness = Some(outcome.fitness);
            Ok(Some((outcome.nodes_evaluated, ind.genome.size() as u64)))
        })
        .collect::<Result<_, _>>()?;
    let mut work = Work {
        node_evals: 0,
        tree_nodes: 0,
        evaluated: 0,
    };
    for (evals, nodes) in results.into_iter().flatten() {
        work.node_evals += evals;
        work.tree_nodes += nodes;
        work.evaluated += 1;
    }
    Ok(work)
}

/// Builds generation `generation` from the evaluated `parents`.
fn breed(
    params: &GpParams,
    generation: usize,
    parents: &[Individual],
    best_idx: usize,
    fset: &FunctionSet,
    limits: &Limits,
) -> Result<Vec<Individual>, EvolveError> {
    let n = params.population_size;
    let mut next = Vec::with_capacity(n);
    if params.elitism {
        next.push(parents[best_idx].clone());
    }
    let mut pair = 0;
    while next.len() < n {
        let mut rng = stream_rng(params.seed, generation, pair);
        pair += 1;
        let a = &parents[tournament_select(&mut rng, parents, params.tournament_size)?];
        let b = &parents[tournament_select(&mut rng, parents, params.tournament_size)?];
        let (ca, cb) = if rng.random_bool(params.crossover_prob) {
            let (x, y) = subtree_crossover(&mut rng, &a.genome, &b.genome, limits);
            (
                x.map_or_else(|| a.clone(), Individual::new),
                y.map_or_else(|| b.clone(), Individual::new),
            )
        } else {
            (a.clone(), b.clone())
        };
        for child in [ca, cb] {
            if next.len() == n {
                break;
            }
            let child = if rng.random_bool(params.mutation_prob) {
                subtree_mutation(&mut rng, &child.genome, fset, limits).map_or(child, Individual::new)
            } else {
                child
            };
            next.push(child);
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{BackendKind, BackendRegistry, EvalConfig};
    use crate::problems::{gen_multiplexer, gen_sextic};

    fn evaluated(fitness: &[f64]) -> Vec<Individual> {
        let g = TreeGenome::parse_rpn("X0").unwrap();
        fitness
            .iter()
            .map(|&f| Individual {
                fitness: Some(f),
                ..Individual::new(g.clone())
            })
            .collect()
    }

    #[test]
    fn tournament_of_population_size_finds_a_minimum() {
        let pop = evaluated(&[3.0, 1.0, 2.0, 1.0]);
        let mut rng = stream_rng(9, 0, 0);
        for _ in 0..50 {
            let i = tournament_select(&mut rng, &pop, 64).unwrap();
            assert_eq!(pop[i].fitness, Some(1.0));
        }
        let mut fresh = pop.clone();
        fresh[2].fitness = None;
        let err = (0..20).any(|_| tournament_select(&mut rng, &fresh, 4).is_err());
        assert!(err);
    }

    #[test]
    fn tournament_ties_go_to_first_draw() {
        let pop = evaluated(&[1.0; 8]);
        let mut a = stream_rng(4, 1, 1);
        let mut b = stream_rng(4, 1, 1);
        let first = b.random_range(0..pop.len());
        assert_eq!(tournament_select(&mut a, &pop, 7).unwrap(), first);
    }

    #[test]
    fn crossover_swaps_subtrees() {
        let a = TreeGenome::parse_rpn("X0 X0 + X0 *").unwrap();
        let b = TreeGenome::parse_rpn("X0 sin X0 -").unwrap();
        let (x, y) = crossover_at(&a, 2, &b, 1);
        assert_eq!(x.to_string(), "X0 sin X0 *");
        assert_eq!(y.to_string(), "X0 X0 + X0 -");
        assert_eq!(x.size() + y.size(), a.size() + b.size());
        let m = mutate_at(&a, 4, &b);
        assert_eq!(m.to_string(), b.to_string());
    }

    #[test]
    fn variation_respects_limits() {
        let fset = crate::problems::sextic_function_set();
        let limits = Limits {
            max_size: 40,
            max_depth: 8,
            stack_capacity: 50,
        };
        let mut rng = stream_rng(5, 0, 0);
        for _ in 0..200 {
            let a = generate_tree(&mut rng, &fset, InitMethod::Grow, 6);
            let b = generate_tree(&mut rng, &fset, InitMethod::Full, 5);
            let (x, y) = subtree_crossover(&mut rng, &a, &b, &limits);
            for child in [x, y].into_iter().flatten() {
                assert!(validate(&child, &limits).is_ok());
            }
            if let Some(m) = subtree_mutation(&mut rng, &a, &fset, &limits) {
                assert!(validate(&m, &limits).is_ok());
            }
        }
    }

    #[test]
    fn ramped_initialisation_covers_depths() {
        let params = GpParams {
            population_size: 100,
            ..GpParams::default()
        };
        let fset = crate::problems::sextic_function_set();
        let pop = ramped_half_and_half(&params, &fset, &Limits::default());
        for (i, ind) in pop.iter().enumerate() {
            let limit = INIT_MIN_DEPTH + i % 5;
            assert!(ind.genome.depth() <= limit);
            if (i / 5) % 2 == 0 {
                assert_eq!(ind.genome.depth(), limit, "full tree {i}");
            }
        }
    }

    fn small_params(seed: u64) -> GpParams {
        GpParams {
            population_size: 60,
            max_generations: 4,
            seed,
            ..GpParams::default()
        }
    }

    #[test]
    fn run_is_reproducible_and_consistent() {
        let problem = gen_sextic(64, &mut stream_rng(3, 0, 0));
        let backend = BackendRegistry::with_defaults()
            .build(&EvalConfig::new(BackendKind::Rpn2d))
            .unwrap();
        let mut sizes = Vec::new();
        let stats = Evolution::new(small_params(11), &problem, backend.as_ref())
            .observer(|_, pop| {
                for ind in pop {
                    assert!(validate(&ind.genome, &Limits::default()).is_ok());
                }
                sizes.push(pop.iter().map(|i| i.genome.size() as u64).sum::<u64>());
            })
            .run()
            .unwrap();
        assert_eq!(stats.generations.len(), 5);
        assert_eq!(stats.generations[0].node_evals, sizes[0] * 64);
        assert_eq!(stats.generations[0].tree_nodes, sizes[0]);
        assert_eq!(stats.total_node_evals, stats.total_tree_nodes * 64);
        assert!(stats.generations.iter().skip(1).all(|g| g.node_evals <= sizes[g.generation] * 64));
        let cumulative = stats.cumulative_node_evals();
        assert!(cumulative.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*cumulative.last().unwrap(), stats.total_node_evals);
        // elitism keeps the best fitness non-increasing
        assert!(stats.best_trajectory().windows(2).all(|w| w[1] <= w[0]));

        let again = Evolution::new(small_params(11), &problem, backend.as_ref())
            .workers(3)
            .run()
            .unwrap();
        assert_eq!(again.best_trajectory(), stats.best_trajectory());
        assert_eq!(again.total_node_evals, stats.total_node_evals);
        assert_eq!(again.best, stats.best);
    }

    #[test]
    fn packed_backend_runs_boolean_problems() {
        let problem = gen_multiplexer(2).unwrap();
        let registry = BackendRegistry::with_defaults();
        let packed = registry.build(&EvalConfig::new(BackendKind::BoolPacked)).unwrap();
        let scalar = registry.build(&EvalConfig::new(BackendKind::Lgp2d)).unwrap();
        let a = Evolution::new(small_params(2), &problem, packed.as_ref()).run().unwrap();
        let b = Evolution::new(small_params(2), &problem, scalar.as_ref()).run().unwrap();
        assert_eq!(a.best_trajectory(), b.best_trajectory());
        let sextic = gen_sextic(8, &mut stream_rng(1, 0, 0));
        assert!(Evolution::new(small_params(2), &sextic, packed.as_ref()).run().is_err());
    }

    #[test]
    fn bad_params_are_rejected() {
        let problem = gen_sextic(8, &mut stream_rng(1, 0, 0));
        let backend = BackendRegistry::with_defaults()
            .build(&EvalConfig::new(BackendKind::Rpn1d))
            .unwrap();
        let params = GpParams {
            population_size: 1,
            ..GpParams::default()
        };
        assert!(matches!(
            Evolution::new(params, &problem, backend.as_ref()).run(),
            Err(EvolveError::Params(_))
        ));
    }
}
