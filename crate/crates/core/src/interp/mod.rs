//! Evaluation backends.
//!
//! Every backend shares the protected-operator semantics in [`ops`] and the
//! fixed-order fitness reduction in [`fitness`], so for any program they
//! all produce bit-identical per-case outputs and fitness values. They differ
//! only in how the program is laid out and dispatched:
//!
//! | name          | program form | lanes per dispatch | stack                       |
//! |---------------|--------------|--------------------|-----------------------------|
//! | `rpn1d`       | postfix      | 1                  | array                       |
//! | `rpn2d`       | postfix      | B                  | array of B-lane levels      |
//! | `lgp1d`       | linear       | 1                  | array                       |
//! | `lgp2d`       | linear       | B                  | array of B-lane levels      |
//! | `lgp2d_reg`   | linear       | B                  | R register slots + spill    |
//! | `bool_packed` | either       | 32 (bits)          | array of words              |
//!
//! Backends are selected at run time by name through [`BackendRegistry`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::genome::{OpCode, TreeGenome, DEFAULT_STACK_CAPACITY};
use crate::lgp::LgpProgram;

mod backend;
mod data;
pub mod fitness;
mod linear;
pub mod ops;
mod oracle;
mod packed;
mod rpn;

pub use backend::{Backend, BackendFactory, BackendRegistry};
pub use data::{Dataset, PackedDataset, TargetKind};
pub use fitness::{
    fitness_classification, fitness_regression, Counters, EvalOutcome, REDUCTION_CHUNK,
};
pub use linear::{eval_lgp_1d, eval_lgp_2d, eval_lgp_2d_reg, MAX_REGISTER_LEVELS};
pub use ops::{apply_op, OpPolicy};
pub use oracle::{eval_oracle, eval_oracle_with};
pub use packed::eval_bool_packed;
pub use rpn::{eval_rpn_1d, eval_rpn_2d};

/// Supported batch widths.
pub const BATCH_WIDTHS: [usize; 7] = [1, 2, 3, 4, 5, 6, 8];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("dataset has no fitness cases")]
    EmptyDataset,
    #[error("program needs a stack of {required} but capacity is {capacity}")]
    StackCapacity { required: usize, capacity: usize },
    #[error("program reads variable {index} but the dataset has {num_vars}")]
    VariableOutOfRange { index: usize, num_vars: usize },
    #[error("operator {0} is not a bitwise boolean operator")]
    NonBoolean(OpCode),
    #[error("constants cannot be evaluated bit-parallel")]
    NonBooleanTerminal,
    #[error("backend {backend} cannot evaluate {what}")]
    Unsupported { backend: BackendKind, what: &'static str },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("batch width {0} is not one of 1, 2, 3, 4, 5, 6, 8")]
    BatchWidth(usize),
    #[error("backend {backend} does not batch; batch width must be 1, got {batch}")]
    Unbatched { backend: BackendKind, batch: usize },
    #[error("{registers} register levels are invalid for backend {backend}")]
    Registers { registers: usize, backend: BackendKind },
    #[error("stack capacity must be at least 1")]
    StackCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BackendKind {
    Rpn1d,
    Rpn2d,
    Lgp1d,
    Lgp2d,
    Lgp2dReg,
    BoolPacked,
}

impl BackendKind {
    pub const ALL: [BackendKind; 6] = [
        BackendKind::Rpn1d,
        BackendKind::Rpn2d,
        BackendKind::Lgp1d,
        BackendKind::Lgp2d,
        BackendKind::Lgp2dReg,
        BackendKind::BoolPacked,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            BackendKind::Rpn1d => "rpn1d",
            BackendKind::Rpn2d => "rpn2d",
            BackendKind::Lgp1d => "lgp1d",
            BackendKind::Lgp2d => "lgp2d",
            BackendKind::Lgp2dReg => "lgp2d_reg",
            BackendKind::BoolPacked => "bool_packed",
        }
    }

    /// Whether the backend evaluates the linear form.
    pub const fn is_linear(self) -> bool {
        matches!(self, BackendKind::Lgp1d | BackendKind::Lgp2d | BackendKind::Lgp2dReg)
    }

    pub const fn is_batched(self) -> bool {
        matches!(self, BackendKind::Rpn2d | BackendKind::Lgp2d | BackendKind::Lgp2dReg)
    }

    /// Batch width used when none is given.
    pub const fn default_batch(self) -> usize {
        if self.is_batched() {
            4
        } else {
            1
        }
    }

    pub const fn default_registers(self) -> usize {
        match self {
            BackendKind::Lgp2dReg => 2,
            _ => 0,
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BackendKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownBackend(s.to_string()))
    }
}

/// Backend selection and interpreter parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub backend: BackendKind,
    /// Fitness-case lanes per dispatch.
    pub batch: usize,
    /// Stack levels held in register slots (`lgp2d_reg` only).
    pub registers: usize,
    pub stack_capacity: usize,
    pub policy: OpPolicy,
}

impl EvalConfig {
    pub fn new(backend: BackendKind) -> Self {
        Self {
            backend,
            batch: backend.default_batch(),
            registers: backend.default_registers(),
            stack_capacity: DEFAULT_STACK_CAPACITY,
            policy: OpPolicy::default(),
        }
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    pub fn with_registers(mut self, registers: usize) -> Self {
        self.registers = registers;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !BATCH_WIDTHS.contains(&self.batch) {
            return Err(ConfigError::BatchWidth(self.batch));
        }
        if !self.backend.is_batched() && self.batch != 1 {
            return Err(ConfigError::Unbatched {
                backend: self.backend,
                batch: self.batch,
            });
        }
        let registers_ok = match self.backend {
            BackendKind::Lgp2dReg => (1..=MAX_REGISTER_LEVELS).contains(&self.registers),
            _ => self.registers == 0,
        };
        if !registers_ok {
            return Err(ConfigError::Registers {
                registers: self.registers,
                backend: self.backend,
            });
        }
        if self.stack_capacity == 0 {
            return Err(ConfigError::StackCapacity);
        }
        Ok(())
    }

    /// Short label such as `lgp2d_reg[B=4,R=2]`.
    pub fn label(&self) -> String {
        match (self.backend.is_batched(), self.backend) {
            (_, BackendKind::Lgp2dReg) => format!("{}[B={},R={}]", self.backend, self.batch, self.registers),
            (true, _) => format!("{}[B={}]", self.backend, self.batch),
            (false, _) => self.backend.to_string(),
        }
    }
}

/// A program in either representation.
#[derive(Debug, Clone, Copy)]
pub enum ProgramRef<'a> {
    Tree(&'a TreeGenome),
    Linear(&'a LgpProgram),
}

impl<'a> From<&'a TreeGenome> for ProgramRef<'a> {
    fn from(g: &'a TreeGenome) -> Self {
        ProgramRef::Tree(g)
    }
}

impl<'a> From<&'a LgpProgram> for ProgramRef<'a> {
    fn from(p: &'a LgpProgram) -> Self {
        ProgramRef::Linear(p)
    }
}

/// Fitness cases in the form a backend consumes.
#[derive(Debug, Clone, Copy)]
pub enum DataRef<'a> {
    Real(&'a Dataset),
    Packed(&'a PackedDataset),
}

impl DataRef<'_> {
    pub fn num_cases(&self) -> usize {
        match self {
            DataRef::Real(d) => d.num_cases(),
            DataRef::Packed(p) => p.num_cases(),
        }
    }
}

fn require_cases(data: &Dataset) -> Result<(), EvalError> {
    if data.num_cases() == 0 {
        Err(EvalError::EmptyDataset)
    } else {
        Ok(())
    }
}

fn check_inputs(max_index: Option<usize>, data: &Dataset) -> Result<(), EvalError> {
    match max_index {
        Some(index) if index >= data.num_vars() => Err(EvalError::VariableOutOfRange {
            index,
            num_vars: data.num_vars(),
        }),
        _ => Ok(()),
    }
}

/// Expands `$body` once per supported batch width with `$B` bound to the
/// width as a constant.
macro_rules! dispatch_batch {
    ($batch:expr, $B:ident => $body:expr) => {
        match $batch {
            1 => {
                const $B: usize = 1;
                $body
            }
            2 => {
                const $B: usize = 2;
                $body
            }
            3 => {
                const $B: usize = 3;
                $body
            }
            4 => {
                const $B: usize = 4;
                $body
            }
            5 => {
                const $B: usize = 5;
                $body
            }
            6 => {
                const $B: usize = 6;
                $body
            }
            8 => {
                const $B: usize = 8;
                $body
            }
            other => unreachable!("unsupported batch width {other}"),
        }
    };
}
pub(crate) use dispatch_batch;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::sextic_worked_example;
    use crate::lgp::rpn_to_lgp;

    fn sextic_data(xs: &[f64]) -> Dataset {
        let ys = xs.iter().map(|x| x.powi(6) - 2.0 * x.powi(4) + x * x).collect();
        Dataset::from_columns(vec![xs.to_vec()], ys, TargetKind::Regression).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::new(BackendKind::Lgp2dReg).validate().is_ok());
        assert_eq!(
            EvalConfig::new(BackendKind::Lgp2dReg).with_registers(0).validate(),
            Err(ConfigError::Registers {
                registers: 0,
                backend: BackendKind::Lgp2dReg
            })
        );
        assert!(EvalConfig::new(BackendKind::Lgp2d).with_registers(1).validate().is_err());
        assert!(EvalConfig::new(BackendKind::Rpn2d).with_batch(7).validate().is_err());
        assert!(EvalConfig::new(BackendKind::Rpn1d).with_batch(4).validate().is_err());
        assert!(EvalConfig::new(BackendKind::Rpn2d).with_batch(1).validate().is_ok());
        assert_eq!("lgp2d_reg".parse::<BackendKind>(), Ok(BackendKind::Lgp2dReg));
        assert!("gpu".parse::<BackendKind>().is_err());
        assert_eq!(EvalConfig::new(BackendKind::Lgp2dReg).label(), "lgp2d_reg[B=4,R=2]");
    }

    #[test]
    fn worked_example_fitness_matches_oracle_mse() {
        let xs: Vec<f64> = (0..37).map(|i| -1.0 + i as f64 / 18.0).collect();
        let d = sextic_data(&xs);
        let g = sextic_worked_example();
        let p = OpPolicy::default();
        let outputs: Vec<f64> = (0..xs.len()).map(|c| eval_oracle(&g, &d, c, &p)).collect();
        let expected = fitness_regression(&outputs, d.targets()).unwrap();
        let cfg = EvalConfig::new(BackendKind::Rpn1d);
        assert_eq!(eval_rpn_1d(&g, &d, &cfg).unwrap().fitness, expected);
        for b in BATCH_WIDTHS {
            let cfg = EvalConfig::new(BackendKind::Rpn2d).with_batch(b);
            assert_eq!(eval_rpn_2d(&g, &d, &cfg).unwrap().fitness, expected, "B={b}");
            assert_eq!(eval_lgp_2d(&rpn_to_lgp(&g), &d, &cfg).unwrap().fitness, expected);
            for r in 1..=4 {
                let cfg = cfg.with_registers(r);
                assert_eq!(eval_lgp_2d_reg(&rpn_to_lgp(&g), &d, &cfg).unwrap().fitness, expected);
            }
        }
        let outcome = eval_lgp_1d(&rpn_to_lgp(&g), &d, &cfg).unwrap();
        assert_eq!(outcome.fitness, expected);
        assert_eq!(outcome.nodes_evaluated, 15 * 37);
    }

    #[test]
    fn constant_program_and_empty_dataset() {
        let g = TreeGenome::parse_rpn("C(1.0)").unwrap();
        let d = Dataset::from_columns(vec![vec![0.3, 0.4]], vec![1.0, 1.0], TargetKind::Regression).unwrap();
        let cfg = EvalConfig::new(BackendKind::Rpn1d);
        assert_eq!(eval_rpn_1d(&g, &d, &cfg).unwrap().fitness, 0.0);
        let empty = Dataset::from_columns(vec![vec![]], vec![], TargetKind::Regression).unwrap();
        assert_eq!(eval_rpn_1d(&g, &empty, &cfg), Err(EvalError::EmptyDataset));
        assert_eq!(eval_lgp_1d(&rpn_to_lgp(&g), &empty, &cfg), Err(EvalError::EmptyDataset));
    }

    #[test]
    fn rejects_programs_beyond_capacity_or_inputs() {
        let g = sextic_worked_example();
        let d = sextic_data(&[0.5]);
        let mut cfg = EvalConfig::new(BackendKind::Rpn1d);
        cfg.stack_capacity = 3;
        assert_eq!(
            eval_rpn_1d(&g, &d, &cfg),
            Err(EvalError::StackCapacity { required: 4, capacity: 3 })
        );
        // The linear form needs only two levels.
        assert!(eval_lgp_1d(&rpn_to_lgp(&g), &d, &cfg).is_ok());
        let wide = TreeGenome::parse_rpn("X0 X3 +").unwrap();
        assert!(matches!(
            eval_rpn_1d(&wide, &d, &EvalConfig::new(BackendKind::Rpn1d)),
            Err(EvalError::VariableOutOfRange { index: 3, num_vars: 1 })
        ));
    }

    #[test]
    fn linear_operand_order() {
        let g = TreeGenome::parse_rpn("X C(0.5) -").unwrap();
        let d = Dataset::from_columns(vec![vec![2.0, -1.0, 0.0]], vec![0.0; 3], TargetKind::Regression).unwrap();
        let cfg = EvalConfig::new(BackendKind::Lgp1d);
        let reg = EvalConfig::new(BackendKind::Lgp2dReg);
        let p = rpn_to_lgp(&g);
        for backend in BackendRegistry::with_defaults().build_all(&[cfg, reg]).unwrap() {
            let outs = backend.case_outputs(ProgramRef::Linear(&p), &d).unwrap();
            assert_eq!(outs, vec![1.5, -1.5, -0.5]);
        }
    }
}
