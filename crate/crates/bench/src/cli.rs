//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stackgp::evolve::{Evolution, GpParams};
use stackgp::genome::TreeGenome;
use stackgp::interp::{BackendKind, BackendRegistry, EvalConfig};
use stackgp::problems::{
    gen_multiplexer, gen_sextic, gen_synthetic_classification, load_csv, FitnessKind, ProblemSpec,
};

use crate::gpops::{measure_gpops, BenchError};
use crate::matrix::{backend_matrix, Cell, CellRuns};
use crate::report::{stack_table_csv, BenchReport, Environment, GenerationReport, RunConfig, SD_STATISTIC};
use crate::stack_table::{stack_limit_table, DEFAULT_LIMITS};
use crate::verify::{run_all, Scale};

/// Input count of the synthetic classification problem.
const SYNTH_INPUTS: usize = 9;

#[derive(Debug, Parser)]
#[command(name = "stackgp", version, about = "Tree GP interpreter benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration.
    Run(Opts),
    /// Sweep backends, batch widths, register levels and worker counts.
    Matrix(Opts),
    /// Cumulative stack-depth table of an evolved population.
    Stacktable(Opts),
    /// Run the equivalence and property suite.
    Verify(VerifyOpts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
struct Opts {
    /// sextic, mux6, mux11, mux20, synth or csv:<path>
    #[arg(long, default_value = "sextic")]
    problem: String,
    /// Backend name; a comma-separated list for `matrix`.
    #[arg(long, value_delimiter = ',')]
    backend: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    batch: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    registers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pop: usize,
    #[arg(long, default_value_t = 10)]
    generations: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Runs per cell; 1 for `run` and `stacktable`, 5 for `matrix`.
    #[arg(long)]
    repeats: Option<usize>,
    /// Fitness cases for sextic and synth.
    #[arg(long, default_value_t = 10_000)]
    cases: usize,
    /// Positive class for CSV problems.
    #[arg(long)]
    target_class: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Disable copying the best individual into the next generation.
    #[arg(long)]
    no_elitism: bool,
}

#[derive(Debug, Clone, Args)]
struct VerifyOpts {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Smaller samples.
    #[arg(long)]
    quick: bool,
    /// Write the check results as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Run(e.to_string())
    }
}

/// Entry point of the `stackgp` binary.
pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

/// Parses `args` (program name first) and executes the command. Returns the
/// process exit status: 0 on success, 1 on failure, 2 on usage errors.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run(opts) => single(&opts, "run"),
        Command::Stacktable(opts) => single(&opts, "stacktable"),
        Command::Matrix(opts) => matrix(&opts),
        Command::Verify(opts) => verify(&opts),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn build_problem(opts: &Opts) -> Result<ProblemSpec, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    if opts.cases == 0 {
        return Err(Failure::Usage("--cases must be positive".into()));
    }
    let problem = match opts.problem.as_str() {
        "sextic" => gen_sextic(opts.cases, &mut rng),
        "mux6" => gen_multiplexer(2).map_err(|e| Failure::Run(e.to_string()))?,
        "mux11" => gen_multiplexer(3).map_err(|e| Failure::Run(e.to_string()))?,
        "mux20" => gen_multiplexer(4).map_err(|e| Failure::Run(e.to_string()))?,
        "synth" => gen_synthetic_classification(opts.cases, SYNTH_INPUTS, &mut rng),
        other => match other.strip_prefix("csv:") {
            Some(path) => {
                let target = opts
                    .target_class
                    .as_deref()
                    .ok_or_else(|| Failure::Usage("csv problems need --target-class".into()))?;
                let path = Path::new(path);
                load_csv(path, csv_inputs(path)?, target).map_err(|e| Failure::Run(e.to_string()))?
            }
            None => return Err(Failure::Usage(format!("unknown problem `{other}`"))),
        },
    };
    Ok(problem)
}

/// Input columns of a CSV file: fields on the first non-blank line minus the
/// label.
fn csv_inputs(path: &Path) -> Result<usize, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    let fields = text
        .lines()
        .map(|l| l.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).count())
        .find(|&n| n > 0)
        .ok_or_else(|| Failure::Run(format!("{} is empty", path.display())))?;
    if fields < 2 {
        return Err(Failure::Run(format!("{} has no input columns", path.display())));
    }
    Ok(fields - 1)
}

fn params(opts: &Opts) -> GpParams {
    GpParams {
        population_size: opts.pop,
        max_generations: opts.generations,
        seed: opts.seed,
        elitism: !opts.no_elitism,
        ..GpParams::default()
    }
}

fn parse_backend(name: &str) -> Result<BackendKind, Failure> {
    name.parse().map_err(|e: stackgp::interp::ConfigError| Failure::Usage(e.to_string()))
}

fn default_backends(problem: &ProblemSpec) -> Vec<BackendKind> {
    let mut kinds = vec![
        BackendKind::Rpn1d,
        BackendKind::Rpn2d,
        BackendKind::Lgp1d,
        BackendKind::Lgp2d,
        BackendKind::Lgp2dReg,
    ];
    if problem.fitness_kind() == FitnessKind::Boolean {
        kinds.push(BackendKind::BoolPacked);
    }
    kinds
}

/// Cells of a sweep. Batch widths only apply to batched backends and
/// register levels only to `lgp2d_reg`.
fn sweep_cells(opts: &Opts, problem: &ProblemSpec) -> Result<Vec<Cell>, Failure> {
    let kinds = if opts.backend.is_empty() {
        default_backends(problem)
    } else {
        opts.backend.iter().map(|b| parse_backend(b)).collect::<Result<_, _>>()?
    };
    let mut cells = Vec::new();
    for kind in kinds {
        let batches = match (kind.is_batched(), opts.batch.is_empty()) {
            (true, false) => opts.batch.clone(),
            _ => vec![kind.default_batch()],
        };
        let registers = match (kind, opts.registers.is_empty()) {
            (BackendKind::Lgp2dReg, false) => opts.registers.clone(),
            _ => vec![kind.default_registers()],
        };
        for &b in &batches {
            for &r in &registers {
                for &w in &opts.workers {
                    cells.push(checked_cell(EvalConfig::new(kind).with_batch(b).with_registers(r), w)?);
                }
            }
        }
    }
    Ok(cells)
}

fn checked_cell(config: EvalConfig, workers: usize) -> Result<Cell, Failure> {
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if workers == 0 {
        return Err(Failure::Usage("--workers must be positive".into()));
    }
    Ok(Cell { config, workers })
}

/// The one cell of `run` and `stacktable`; flags apply as given.
fn single_cell(opts: &Opts, problem: &ProblemSpec) -> Result<Cell, Failure> {
    let one = |n: usize, flag: &str| {
        if n > 1 {
            Err(Failure::Usage(format!("--{flag} takes a single value here; use `matrix` to sweep")))
        } else {
            Ok(())
        }
    };
    one(opts.backend.len(), "backend")?;
    one(opts.batch.len(), "batch")?;
    one(opts.registers.len(), "registers")?;
    one(opts.workers.len(), "workers")?;
    let kind = match opts.backend.first() {
        Some(name) => parse_backend(name)?,
        None if problem.fitness_kind() == FitnessKind::Boolean => BackendKind::BoolPacked,
        None => BackendKind::Lgp2d,
    };
    let mut config = EvalConfig::new(kind);
    if let Some(&b) = opts.batch.first() {
        config = config.with_batch(b);
    }
    if let Some(&r) = opts.registers.first() {
        config = config.with_registers(r);
    }
    checked_cell(config, opts.workers.first().copied().unwrap_or(1))
}

fn run_config(command: &str, opts: &Opts, cells: &[Cell], repeats: usize, problem: &ProblemSpec) -> RunConfig {
    let uniq = |f: &dyn Fn(&Cell) -> usize| {
        let mut v: Vec<usize> = cells.iter().map(f).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let batch = uniq(&|c| c.config.batch);
    let registers = uniq(&|c| c.config.registers);
    let workers = uniq(&|c| c.workers);
    let mut backends: Vec<String> = cells.iter().map(|c| c.config.backend.name().to_string()).collect();
    backends.dedup();
    RunConfig {
        command: command.to_string(),
        problem: opts.problem.clone(),
        backends,
        batch,
        registers,
        workers,
        pop: opts.pop,
        generations: opts.generations,
        seed: opts.seed,
        repeats,
        cases: problem.num_cases(),
        target_class: opts.target_class.clone(),
        elitism: !opts.no_elitism,
    }
}

fn report(command: &str, opts: &Opts, problem: &ProblemSpec, results: &[CellRuns], repeats: usize) -> BenchReport {
    let cells: Vec<Cell> = results.iter().map(|r| r.cell).collect();
    let first = &results[0];
    let n = results.len() as f64;
    BenchReport {
        config: run_config(command, opts, &cells, repeats, problem),
        gpops: results.iter().map(|r| r.row.gpops_mean).sum::<f64>() / n,
        gpops_raw_bitparallel: first.row.gpops_raw_bitparallel,
        wall_seconds: results.iter().flat_map(|r| &r.runs).map(|s| s.wall_seconds).sum(),
        total_node_evals: results.iter().flat_map(|r| &r.runs).map(|s| s.total_node_evals).sum(),
        generations: GenerationReport::from_stats(&first.runs[0]),
        stack_table: None,
        cells: results.iter().map(|r| r.row.clone()).collect(),
        sd_statistic: SD_STATISTIC,
        env: Environment::detect(),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Run(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn single(opts: &Opts, command: &str) -> Result<(), Failure> {
    let problem = build_problem(opts)?;
    let cell = single_cell(opts, &problem)?;
    let repeats = opts.repeats.unwrap_or(1).max(1);
    let registry = BackendRegistry::with_defaults();
    let report = if command == "stacktable" {
        let backend = registry.build(&cell.config).map_err(BenchError::from)?;
        let mut last: Vec<TreeGenome> = Vec::new();
        let final_gen = opts.generations;
        let stats = Evolution::new(params(opts), &problem, backend.as_ref())
            .workers(cell.workers)
            .observer(|g, pop| {
                if g == final_gen {
                    last = pop.iter().map(|i| i.genome.clone()).collect();
                }
            })
            .run()
            .map_err(BenchError::from)?;
        let table = stack_limit_table(&last, DEFAULT_LIMITS)?;
        let gpops = measure_gpops(&stats, problem.num_cases())?;
        eprintln!("{}: {} genomes in the final population", cell.label(), last.len());
        BenchReport {
            config: run_config(command, opts, &[cell], 1, &problem),
            gpops,
            gpops_raw_bitparallel: None,
            wall_seconds: stats.wall_seconds,
            total_node_evals: stats.total_node_evals,
            generations: GenerationReport::from_stats(&stats),
            stack_table: Some(table),
            cells: Vec::new(),
            sd_statistic: SD_STATISTIC,
            env: Environment::detect(),
        }
    } else {
        let results = backend_matrix(&problem, &params(opts), &[cell], repeats, &registry)?;
        eprintln!(
            "{}: {:.4e} GPop/s, best fitness {}",
            cell.label(),
            results[0].row.gpops_mean,
            results[0].runs[0].best_fitness
        );
        report(command, opts, &problem, &results, repeats)
    };
    let text = match (opts.format, &report.stack_table) {
        (Format::Json, _) => report.to_json(),
        (Format::Csv, Some(table)) => stack_table_csv(table),
        (Format::Csv, None) => report.to_csv(),
    };
    emit(&text, opts.out.as_deref())
}

fn matrix(opts: &Opts) -> Result<(), Failure> {
    let problem = build_problem(opts)?;
    let cells = sweep_cells(opts, &problem)?;
    let repeats = opts.repeats.unwrap_or(5).max(1);
    let results = backend_matrix(&problem, &params(opts), &cells, repeats, &BackendRegistry::with_defaults())?;
    for r in &results {
        eprintln!(
            "{:<32} {:.4e} ± {:.2e} GPop/s",
            r.cell.label(),
            r.row.gpops_mean,
            r.row.gpops_sd
        );
    }
    let report = report("matrix", opts, &problem, &results, repeats);
    let text = match opts.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    emit(&text, opts.out.as_deref())
}

fn verify(opts: &VerifyOpts) -> Result<(), Failure> {
    let scale = if opts.quick { Scale::QUICK } else { Scale::FULL };
    let checks = run_all(scale, opts.seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(path) = &opts.out {
        let json = serde_json::to_string_pretty(&checks).expect("checks serialize");
        emit(&json, Some(path))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Run(format!("{failed} verification checks failed")));
    }
    Ok(())
}
