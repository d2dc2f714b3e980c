//! Benchmark problems: the sextic polynomial, boolean multiplexers, CSV
//! classification datasets and a synthetic classification stand-in.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

use crate::genome::{FunctionSet, OpCode, TreeGenome};
use crate::interp::{BackendKind, DataRef, Dataset, PackedDataset, TargetKind};

/// Logical case count of the full-scale sextic problem.
pub const SEXTIC_PAPER_CASES: usize = 100_000;
/// Desk-scale default.
pub const SEXTIC_DESK_CASES: usize = 10_000;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Row {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitnessKind {
    Regression,
    Classification,
    Boolean,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemData {
    Real(Dataset),
    Packed(PackedDataset),
}

/// A function set bound to its fitness cases.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    name: String,
    function_set: FunctionSet,
    data: ProblemData,
    fitness_kind: FitnessKind,
    target_class: Option<String>,
    unpacked: OnceLock<Dataset>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        function_set: FunctionSet,
        data: ProblemData,
        fitness_kind: FitnessKind,
        target_class: Option<String>,
    ) -> Result<Self, ProblemError> {
        let num_vars = match &data {
            ProblemData::Real(d) => d.num_vars(),
            ProblemData::Packed(p) => p.num_vars(),
        };
        if function_set.num_inputs() != num_vars {
            return Err(ProblemError::Invalid(format!(
                "function set expects {} inputs but the dataset has {num_vars}",
                function_set.num_inputs()
            )));
        }
        let consistent = match (&data, fitness_kind) {
            (ProblemData::Packed(_), FitnessKind::Boolean) => true,
            (ProblemData::Real(d), FitnessKind::Regression) => d.kind() == TargetKind::Regression,
            (ProblemData::Real(d), FitnessKind::Classification) => {
                d.kind() == TargetKind::Classification
            }
            _ => false,
        };
        if !consistent {
            return Err(ProblemError::Invalid(format!(
                "{fitness_kind:?} fitness does not match the dataset form"
            )));
        }
        Ok(Self {
            name: name.into(),
            function_set,
            data,
            fitness_kind,
            target_class,
            unpacked: OnceLock::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn function_set(&self) -> &FunctionSet {
        &self.function_set
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn fitness_kind(&self) -> FitnessKind {
        self.fitness_kind
    }

    pub fn target_class(&self) -> Option<&str> {
        self.target_class.as_deref()
    }

    /// Logical fitness cases.
    pub fn num_cases(&self) -> usize {
        match &self.data {
            ProblemData::Real(d) => d.num_cases(),
            ProblemData::Packed(p) => p.num_cases(),
        }
    }

    /// Scalar dataset: the stored one, or the 0/1 view of a packed boolean
    /// problem (unpacked on first use).
    pub fn scalar_dataset(&self) -> &Dataset {
        match &self.data {
            ProblemData::Real(d) => d,
            ProblemData::Packed(p) => self.unpacked.get_or_init(|| p.unpack()),
        }
    }

    /// Data in the form `backend` consumes.
    pub fn data_for(&self, backend: BackendKind) -> Result<DataRef<'_>, ProblemError> {
        match (&self.data, backend) {
            (ProblemData::Packed(p), BackendKind::BoolPacked) => Ok(DataRef::Packed(p)),
            (ProblemData::Real(_), BackendKind::BoolPacked) => Err(ProblemError::Invalid(format!(
                "backend bool_packed needs a boolean problem, {} is not",
                self.name
            ))),
            _ => Ok(DataRef::Real(self.scalar_dataset())),
        }
    }
}

/// `x⁶ − 2x⁴ + x²`.
pub fn sextic_target(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 * x2 - 2.0 * x2 * x2 + x2
}

pub fn sextic_function_set() -> FunctionSet {
    use OpCode::*;
    FunctionSet::new(vec![Mul, Div, Add, Sub, Sin, Cos, Log, Exp], 1, None).expect("static set")
}

/// Operator set for a classification dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassificationSet {
    /// Arithmetic, comparison, logic and IF; constants in [−200, 200].
    Shuttle,
    /// The shuttle set plus the transcendental functions; constants in
    /// [−20000, 20000].
    Kdd,
}

impl ClassificationSet {
    /// The KDD set for 41-input data, the shuttle set otherwise.
    pub fn for_inputs(num_inputs: usize) -> Self {
        if num_inputs == 41 {
            ClassificationSet::Kdd
        } else {
            ClassificationSet::Shuttle
        }
    }

    pub fn function_set(self, num_inputs: usize) -> Result<FunctionSet, ProblemError> {
        use OpCode::*;
        let (ops, range) = match self {
            ClassificationSet::Shuttle => (vec![Mul, Div, Add, Sub, Gt, Lt, Eq, And, Or, If], 200.0),
            ClassificationSet::Kdd => (
                vec![Add, Sub, Mul, Div, Gt, Lt, Eq, And, Or, If, Sin, Cos, Log, Exp],
                20000.0,
            ),
        };
        FunctionSet::new(ops, num_inputs, Some((-range, range)))
            .map_err(|e| ProblemError::Invalid(e.to_string()))
    }
}

pub fn boolean_function_set(num_inputs: usize) -> FunctionSet {
    use OpCode::*;
    FunctionSet::new(vec![BoolAnd, BoolOr, BoolNand, BoolNor], num_inputs, None).expect("static set")
}

/// Sextic regression with `n` inputs drawn uniformly from [−1, 1].
pub fn gen_sextic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ProblemSpec {
    assert!(n >= 1, "sextic needs at least one case");
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let ys = xs.iter().map(|&x| sextic_target(x)).collect();
    let data = Dataset::from_columns(vec![xs], ys, TargetKind::Regression).expect("one column");
    ProblemSpec::new(
        "sextic",
        sextic_function_set(),
        ProblemData::Real(data),
        FitnessKind::Regression,
        None,
    )
    .expect("consistent by construction")
}

/// Variable count of the multiplexer with `k` address bits.
pub const fn multiplexer_inputs(k: usize) -> usize {
    k + (1 << k)
}

/// Value of variable `v` in case `case`: bit `v` of the case index.
/// Variables are ordered `A0..A(k−1), D0..D(2^k−1)`.
fn mux_bit(case: usize, v: usize) -> bool {
    (case >> v) & 1 == 1
}

/// Multiplexer output for case `case`: the data bit selected by the address
/// `Σ A_i·2^i`.
pub fn multiplexer_output(k: usize, case: usize) -> bool {
    let address = case & ((1 << k) - 1);
    mux_bit(case, k + address)
}

/// Exhaustive, bit-packed `k`-address-bit multiplexer (k = 2, 3, 4 for the
/// 6-, 11- and 20-multiplexer).
pub fn gen_multiplexer(k: usize) -> Result<ProblemSpec, ProblemError> {
    if !(2..=4).contains(&k) {
        return Err(ProblemError::Invalid(format!(
            "multiplexer address bits must be 2, 3 or 4, got {k}"
        )));
    }
    let num_vars = multiplexer_inputs(k);
    let num_cases = 1usize << num_vars;
    let data = PackedDataset::from_fn(num_vars, num_cases, |v, c| mux_bit(c, v), |c| multiplexer_output(k, c));
    ProblemSpec::new(
        format!("mux{num_vars}"),
        boolean_function_set(num_vars),
        ProblemData::Packed(data),
        FitnessKind::Boolean,
        None,
    )
}

/// A correct multiplexer program over `{AND, OR, NAND, NOR}`, built as a
/// chain of if-then-else selections on the address bits.
pub fn multiplexer_solution(k: usize) -> TreeGenome {
    // ite(a, x, y) = OR(AND(a, x), AND(NAND(a, a), y))
    fn select(k: usize, bit: usize, data: &[usize], out: &mut String) {
        if data.len() == 1 {
            let _ = write!(out, "X{} ", k + data[0]);
            return;
        }
        let half = data.len() / 2;
        let a = format!("X{}", bit - 1);
        // data ordered by address; the upper half has bit `bit-1` set
        let _ = write!(out, "{a} ");
        select(k, bit - 1, &data[half..], out);
        out.push_str("AND ");
        let _ = write!(out, "{a} {a} NAND ");
        select(k, bit - 1, &data[..half], out);
        out.push_str("AND OR ");
    }
    let data: Vec<usize> = (0..1usize << k).collect();
    let mut text = String::new();
    select(k, k, &data, &mut text);
    TreeGenome::parse_rpn(&text).expect("multiplexer solution is well formed")
}

/// Hidden rule behind the synthetic classification data: label 1 iff
/// `Σ wᵢ·xᵢ + bias > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRule {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearRule {
    /// Weights `1, −1/2, 1/3, −1/4, …`, zero bias.
    pub fn alternating(num_vars: usize) -> Self {
        let weights = (0..num_vars)
            .map(|i| {
                let w = 1.0 / (i + 1) as f64;
                if i % 2 == 0 {
                    w
                } else {
                    -w
                }
            })
            .collect();
        Self { weights, bias: 0.0 }
    }

    pub fn fires(&self, row: &[f64]) -> bool {
        let s: f64 = self.weights.iter().zip(row).map(|(w, x)| w * x).sum();
        s + self.bias > 0.0
    }
}

/// Desk-scale classification stand-in: inputs uniform in [−200, 200] and
/// labels from [`LinearRule::alternating`].
pub fn gen_synthetic_classification<R: Rng + ?Sized>(n: usize, num_vars: usize, rng: &mut R) -> ProblemSpec {
    gen_classification_with_rule(n, &LinearRule::alternating(num_vars), rng)
}

pub fn gen_classification_with_rule<R: Rng + ?Sized>(n: usize, rule: &LinearRule, rng: &mut R) -> ProblemSpec {
    let num_vars = rule.weights.len();
    assert!(n >= 1 && num_vars >= 1, "need at least one case and one variable");
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..num_vars).map(|_| rng.random_range(-200.0..=200.0)).collect())
        .collect();
    let targets = rows.iter().map(|r| f64::from(u8::from(rule.fires(r)))).collect();
    let data = Dataset::from_rows(&rows, targets, TargetKind::Classification).expect("rectangular rows");
    ProblemSpec::new(
        "synth",
        ClassificationSet::Shuttle
            .function_set(num_vars)
            .expect("valid input count"),
        ProblemData::Real(data),
        FitnessKind::Classification,
        Some("1".into()),
    )
    .expect("consistent by construction")
}

/// Loads a classification CSV: per line, `num_inputs` numeric fields then a
/// class label, separated by commas or whitespace. Blank lines are skipped.
/// Targets become 1 where the label equals `target_class`, else 0.
pub fn load_csv(path: &Path, num_inputs: usize, target_class: &str) -> Result<ProblemSpec, ProblemError> {
    load_csv_with(path, num_inputs, target_class, ClassificationSet::for_inputs(num_inputs))
}

pub fn load_csv_with(
    path: &Path,
    num_inputs: usize,
    target_class: &str,
    set: ClassificationSet,
) -> Result<ProblemSpec, ProblemError> {
    let text = fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let row_error = |row: usize, message: String| ProblemError::Row {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != num_inputs + 1 {
            return Err(row_error(
                row,
                format!("expected {} fields, found {}", num_inputs + 1, fields.len()),
            ));
        }
        let values = fields[..num_inputs]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| row_error(row, format!("non-numeric field `{f}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
        targets.push(f64::from(u8::from(label_matches(fields[num_inputs], target_class))));
    }
    if rows.is_empty() {
        return Err(ProblemError::Invalid(format!("{} holds no cases", path.display())));
    }
    let data = Dataset::from_rows(&rows, targets, TargetKind::Classification)
        .map_err(|e| ProblemError::Invalid(e.to_string()))?;
    ProblemSpec::new(
        format!("csv:{}", path.display()),
        set.function_set(num_inputs)?,
        ProblemData::Real(data),
        FitnessKind::Classification,
        Some(target_class.to_string()),
    )
}

fn label_matches(label: &str, target: &str) -> bool {
    let target = target.trim();
    if label == target {
        return true;
    }
    match (label.parse::<f64>(), target.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Writes `data` in the format [`load_csv`] reads, labels being the raw
/// target values.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<(), ProblemError> {
    let mut out = String::new();
    for case in 0..data.num_cases() {
        for v in 0..data.num_vars() {
            let _ = write!(out, "{:?},", data.value(v, case));
        }
        let _ = writeln!(out, "{:?}", data.targets()[case]);
    }
    fs::write(path, out).map_err(|source| ProblemError::Io {
        path: path.to_path_buf(),
        source,
    })
}
