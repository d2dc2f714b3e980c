//! Cross-backend and oracle verification suite, shared by the `verify`
//! subcommand and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stackgp::evolve::{INIT_MAX_DEPTH, INIT_MIN_DEPTH};
use stackgp::genome::{generate_tree, sextic_worked_example, FunctionSet, InitMethod, TreeGenome};
use stackgp::interp::{
    eval_oracle, fitness_classification, fitness_regression, BackendKind, BackendRegistry, DataRef,
    Dataset, EvalConfig, EvalError, ProgramRef, TargetKind, BATCH_WIDTHS,
};
use stackgp::lgp::rpn_to_lgp;
use stackgp::problems::{
    boolean_function_set, gen_multiplexer, gen_sextic, gen_synthetic_classification, sextic_function_set,
    ClassificationSet, ProblemData,
};

/// Sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub genomes: usize,
    pub cases: usize,
    pub bool_programs: usize,
}

impl Scale {
    pub const FULL: Scale = Scale {
        genomes: 10_000,
        cases: 256,
        bool_programs: 1_000,
    };
    pub const QUICK: Scale = Scale {
        genomes: 300,
        cases: 64,
        bool_programs: 100,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, failure: Option<String>, ok_detail: String) -> Self {
        Check {
            name: name.into(),
            passed: failure.is_none(),
            detail: failure.unwrap_or(ok_detail),
        }
    }
}

/// The configurations every real-valued program is checked on.
pub fn equivalence_configs() -> Vec<EvalConfig> {
    let mut cfgs = vec![EvalConfig::new(BackendKind::Rpn1d)];
    cfgs.extend([2, 3, 4, 6, 8].map(|b| EvalConfig::new(BackendKind::Rpn2d).with_batch(b)));
    cfgs.push(EvalConfig::new(BackendKind::Lgp1d));
    cfgs.push(EvalConfig::new(BackendKind::Lgp2d));
    cfgs.extend((1..=4).map(|r| EvalConfig::new(BackendKind::Lgp2dReg).with_registers(r)));
    cfgs
}

/// Ramped half-and-half genome number `i` of a sample.
pub fn sample_genome<R: Rng + ?Sized>(rng: &mut R, fset: &FunctionSet, i: usize) -> TreeGenome {
    let span = INIT_MAX_DEPTH - INIT_MIN_DEPTH + 1;
    let method = if (i / span).is_multiple_of(2) {
        InitMethod::Full
    } else {
        InitMethod::Grow
    };
    generate_tree(rng, fset, method, INIT_MIN_DEPTH + i % span)
}

/// A function set with matching random fitness cases.
pub struct Family {
    pub name: &'static str,
    pub fset: FunctionSet,
    pub data: Dataset,
}

pub fn families(cases: usize, seed: u64) -> Vec<Family> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = |spec: stackgp::problems::ProblemSpec| spec.scalar_dataset().clone();
    let shuttle = real(gen_synthetic_classification(cases, 9, &mut rng));
    let kdd = real(gen_synthetic_classification(cases, 41, &mut rng));
    let sextic = real(gen_sextic(cases, &mut rng));
    let bits: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..cases).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect())
        .collect();
    let targets = (0..cases).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
    let boolean = Dataset::from_columns(bits, targets, TargetKind::Classification).expect("equal columns");
    vec![
        Family {
            name: "sextic",
            fset: sextic_function_set(),
            data: sextic,
        },
        Family {
            name: "shuttle",
            fset: ClassificationSet::Shuttle.function_set(9).expect("valid"),
            data: shuttle,
        },
        Family {
            name: "kdd",
            fset: ClassificationSet::Kdd.function_set(41).expect("valid"),
            data: kdd,
        },
        Family {
            name: "boolean",
            fset: boolean_function_set(6),
            data: boolean,
        },
    ]
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

fn reference_fitness(outputs: &[f64], data: &Dataset) -> Result<f64, EvalError> {
    match data.kind() {
        TargetKind::Regression => fitness_regression(outputs, data.targets()),
        TargetKind::Classification => fitness_classification(outputs, data.targets()),
    }
}

/// Every backend's per-case outputs and fitness against the recursive
/// oracle, one check per family.
pub fn oracle_equivalence(scale: Scale, seed: u64) -> Vec<Check> {
    let registry = BackendRegistry::with_defaults();
    let configs = equivalence_configs();
    let backends = registry.build_all(&configs).expect("built-in configurations are valid");
    families(scale.cases, seed)
        .into_iter()
        .map(|family| {
            let policy = configs[0].policy;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            let mut failure = None;
            'genomes: for i in 0..scale.genomes {
                let g = sample_genome(&mut rng, &family.fset, i);
                let lgp = rpn_to_lgp(&g);
                let expected: Vec<f64> = (0..family.data.num_cases())
                    .map(|c| eval_oracle(&g, &family.data, c, &policy))
                    .collect();
                let expected_fitness = reference_fitness(&expected, &family.data).expect("non-empty");
                for backend in &backends {
                    let program = if backend.kind().is_linear() {
                        ProgramRef::Linear(&lgp)
                    } else {
                        ProgramRef::Tree(&g)
                    };
                    let result = backend.case_outputs(program, &family.data).and_then(|outs| {
                        let fit = backend.evaluate(program, DataRef::Real(&family.data))?;
                        Ok((outs, fit.fitness))
                    });
                    let mismatch = match result {
                        Err(e) => Some(format!("error {e}")),
                        Ok((outs, fitness)) => {
                            if let Some(c) = (0..expected.len()).find(|&c| !same(outs[c], expected[c])) {
                                Some(format!("case {c}: {} vs oracle {}", outs[c], expected[c]))
                            } else if !same(fitness, expected_fitness) {
                                Some(format!("fitness {fitness} vs oracle {expected_fitness}"))
                            } else {
                                None
                            }
                        }
                    };
                    if let Some(m) = mismatch {
                        failure = Some(format!("{} on `{g}`: {m}", backend.label()));
                        break 'genomes;
                    }
                }
            }
            Check::new(
                format!("oracle_equivalence/{}", family.name),
                failure,
                format!(
                    "{} genomes x {} cases x {} backends bit-identical",
                    scale.genomes,
                    scale.cases,
                    backends.len()
                ),
            )
        })
        .collect()
}

/// Packed fitness against scalar boolean fitness on exhaustive 6- and
/// 11-multiplexer cases, for both program forms.
pub fn packed_equivalence(scale: Scale, seed: u64) -> Vec<Check> {
    let registry = BackendRegistry::with_defaults();
    let packed = registry.build(&EvalConfig::new(BackendKind::BoolPacked)).expect("valid");
    let scalar = registry.build(&EvalConfig::new(BackendKind::Rpn1d)).expect("valid");
    [2, 3]
        .into_iter()
        .map(|k| {
            let problem = gen_multiplexer(k).expect("k in range");
            let ProblemData::Packed(bits) = problem.data() else {
                unreachable!("multiplexers are packed")
            };
            let unpacked = problem.scalar_dataset();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut failure = None;
            for i in 0..scale.bool_programs {
                let g = sample_genome(&mut rng, problem.function_set(), i);
                let lgp = rpn_to_lgp(&g);
                let want = scalar.evaluate(ProgramRef::Tree(&g), DataRef::Real(unpacked));
                let tree = packed.evaluate(ProgramRef::Tree(&g), DataRef::Packed(bits));
                let linear = packed.evaluate(ProgramRef::Linear(&lgp), DataRef::Packed(bits));
                let ok = match (&want, &tree, &linear) {
                    (Ok(w), Ok(t), Ok(l)) => same(w.fitness, t.fitness) && same(w.fitness, l.fitness),
                    _ => false,
                };
                if !ok {
                    failure = Some(format!("`{g}`: scalar {want:?}, packed {tree:?} / {linear:?}"));
                    break;
                }
            }
            Check::new(
                format!("packed_equivalence/{}", problem.name()),
                failure,
                format!("{} programs x {} cases", scale.bool_programs, problem.num_cases()),
            )
        })
        .collect()
}

/// Worked-example metrics of both representations.
pub fn worked_example() -> Check {
    let g = sextic_worked_example();
    let p = rpn_to_lgp(&g);
    let got = [
        g.size(),
        p.instruction_count(),
        g.rpn_stack_fetch_count(),
        p.stack_fetch_count(),
        g.rpn_max_stack_depth(),
        p.max_stack_depth(),
    ];
    let want = [15, 7, 14, 6, 4, 2];
    let detail = format!(
        "rpn length {}, lgp instructions {}, fetches {} vs {}, max stack {} vs {}",
        got[0], got[1], got[2], got[3], got[4], got[5]
    );
    Check::new(
        "worked_example",
        (got != want).then(|| format!("{detail}; expected {want:?}")),
        detail,
    )
}

/// Shape properties of random trees and their linear forms.
pub fn structural_properties(scale: Scale, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failure = None;
    let sets = [
        sextic_function_set(),
        ClassificationSet::Kdd.function_set(41).expect("valid"),
        boolean_function_set(6),
    ];
    'outer: for fset in &sets {
        // with ternary operators a shallow tree can need a deeper stack
        let binary = fset.max_arity() <= 2;
        for i in 0..scale.genomes {
            let g = sample_genome(&mut rng, fset, i);
            let p = rpn_to_lgp(&g);
            let functions = g.function_count();
            let problems = [
                (
                    binary && g.rpn_max_stack_depth() > g.depth(),
                    "rpn stack deeper than tree",
                ),
                (p.max_stack_depth() > g.rpn_max_stack_depth(), "lgp stack deeper than rpn"),
                (p.instruction_count() != functions.max(1), "instruction count"),
                (functions > 0 && p.stack_fetch_count() != functions - 1, "lgp fetch count"),
                (p.source_size() != g.size(), "source size"),
                (rpn_to_lgp(&g) != p, "conversion not deterministic"),
            ];
            if let Some((_, what)) = problems.iter().find(|(bad, _)| *bad) {
                failure = Some(format!("{what} for `{g}`"));
                break 'outer;
            }
        }
    }
    if failure.is_none() {
        let fset = boolean_function_set(3);
        for d in 1..=8 {
            let g = generate_tree(&mut rng, &fset, InitMethod::Full, d);
            if g.size() != (1 << d) - 1 {
                failure = Some(format!("full binary tree of depth {d} has {} nodes", g.size()));
                break;
            }
        }
    }
    Check::new(
        "structural_properties",
        failure,
        format!("{} genomes per function set", scale.genomes),
    )
}

/// Each case is evaluated exactly once for every batch width, including
/// tails and reduction-block boundaries.
pub fn chunk_coverage(seed: u64) -> Check {
    let registry = BackendRegistry::with_defaults();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![1, 2, 7, 4095, 4096, 4097, 8195];
    sizes.extend((0..4).map(|_| rng.random_range(1..10_000)));
    let identity = TreeGenome::parse_rpn("X0").expect("valid");
    let doubled = TreeGenome::parse_rpn("X0 X0 +").expect("valid");
    let mut cfgs = vec![EvalConfig::new(BackendKind::Rpn1d), EvalConfig::new(BackendKind::Lgp1d)];
    for b in BATCH_WIDTHS {
        cfgs.push(EvalConfig::new(BackendKind::Rpn2d).with_batch(b));
        cfgs.push(EvalConfig::new(BackendKind::Lgp2d).with_batch(b));
        cfgs.extend((1..=4).map(|r| EvalConfig::new(BackendKind::Lgp2dReg).with_batch(b).with_registers(r)));
    }
    let backends = registry.build_all(&cfgs).expect("valid");
    let mut failure = None;
    'sizes: for &n in &sizes {
        let index: Vec<f64> = (0..n).map(|c| c as f64).collect();
        let targets = index.iter().map(|c| c + 1.0).collect();
        let data = Dataset::from_columns(vec![index.clone()], targets, TargetKind::Regression).expect("valid");
        for backend in &backends {
            let outs = backend.case_outputs(ProgramRef::Tree(&doubled), &data);
            let mse = backend.evaluate(ProgramRef::Tree(&identity), DataRef::Real(&data));
            let ok = matches!(&outs, Ok(o) if o.iter().zip(&index).all(|(o, c)| *o == 2.0 * c) && o.len() == n)
                && matches!(&mse, Ok(m) if m.fitness == 1.0);
            if !ok {
                failure = Some(format!("{} with {n} cases", backend.label()));
                break 'sizes;
            }
        }
    }
    Check::new(
        "chunk_coverage",
        failure,
        format!("{} case counts x {} configurations", sizes.len(), cfgs.len()),
    )
}

/// Instrumented loop iterations and stack fetches on the worked example,
/// and capacity rejection.
pub fn dispatch_counts() -> Check {
    let registry = BackendRegistry::with_defaults();
    let g = sextic_worked_example();
    let mut failure = None;
    'n: for n in 1..=20usize {
        let xs: Vec<f64> = (0..n).map(|c| c as f64 / 20.0).collect();
        let data = Dataset::from_columns(vec![xs], vec![0.0; n], TargetKind::Regression).expect("valid");
        for b in BATCH_WIDTHS {
            // each full chunk and each tail case runs the whole program once
            let passes = (n / b + n % b) as u64;
            for (cfg, per_pass, fetches) in [
                (EvalConfig::new(BackendKind::Rpn2d).with_batch(b), 15, 14),
                (EvalConfig::new(BackendKind::Lgp2d).with_batch(b), 7, 6),
                (EvalConfig::new(BackendKind::Lgp2dReg).with_batch(b).with_registers(2), 7, 6),
            ] {
                let backend = registry.build(&cfg).expect("valid");
                match backend.evaluate_counted(ProgramRef::Tree(&g), DataRef::Real(&data)) {
                    Ok((_, c)) if c.dispatches == passes * per_pass && c.stack_fetches == passes * fetches => {}
                    other => {
                        failure = Some(format!("{} with {n} cases: {other:?}", cfg.label()));
                        break 'n;
                    }
                }
            }
        }
    }
    if failure.is_none() {
        let data = Dataset::from_columns(vec![vec![0.5]], vec![0.0], TargetKind::Regression).expect("valid");
        let mut rpn = EvalConfig::new(BackendKind::Rpn1d);
        rpn.stack_capacity = 3;
        let mut lgp = EvalConfig::new(BackendKind::Lgp1d);
        lgp.stack_capacity = 2;
        let rpn = registry.build(&rpn).expect("valid");
        let lgp = registry.build(&lgp).expect("valid");
        let rejected = matches!(
            rpn.evaluate(ProgramRef::Tree(&g), DataRef::Real(&data)),
            Err(EvalError::StackCapacity { required: 4, capacity: 3 })
        );
        if !rejected || lgp.evaluate(ProgramRef::Tree(&g), DataRef::Real(&data)).is_err() {
            failure = Some("stack capacity not enforced as expected".into());
        }
    }
    Check::new("dispatch_counts", failure, "n = 1..20, every batch width".into())
}

/// The whole suite.
pub fn run_all(scale: Scale, seed: u64) -> Vec<Check> {
    let mut checks = vec![worked_example()];
    checks.extend(oracle_equivalence(scale, seed));
    checks.extend(packed_equivalence(scale, seed));
    checks.push(structural_properties(scale, seed));
    checks.push(chunk_coverage(seed));
    checks.push(dispatch_counts());
    checks
}
