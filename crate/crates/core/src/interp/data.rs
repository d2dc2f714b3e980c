//! Fitness-case storage.
//!
//! Inputs are variable-major: all cases of one variable are contiguous, so a
//! batch of consecutive cases for one variable is a single contiguous load.

use std::fmt::Write as _;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    /// Real targets, scored by mean squared error.
    Regression,
    /// 0/1 labels, scored by counting misclassified cases.
    Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    num_cases: usize,
    num_vars: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    kind: TargetKind,
}

impl Dataset {
    /// Builds a dataset from one vector per variable.
    pub fn from_columns(
        columns: Vec<Vec<f64>>,
        targets: Vec<f64>,
        kind: TargetKind,
    ) -> Result<Self, EvalError> {
        let num_cases = targets.len();
        if let Some(bad) = columns.iter().position(|c| c.len() != num_cases) {
            return Err(EvalError::Shape(format!(
                "variable {bad} has {} cases, targets have {num_cases}",
                columns[bad].len()
            )));
        }
        let num_vars = columns.len();
        Ok(Self {
            num_cases,
            num_vars,
            inputs: columns.concat(),
            targets,
            kind,
        })
    }

    /// Builds a dataset from case-major rows, transposing into variable-major
    /// storage.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>, kind: TargetKind) -> Result<Self, EvalError> {
        let num_vars = rows.first().map_or(0, Vec::len);
        if rows.len() != targets.len() {
            return Err(EvalError::Shape(format!(
                "{} rows but {} targets",
                rows.len(),
                targets.len()
            )));
        }
        let mut columns = vec![Vec::with_capacity(rows.len()); num_vars];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != num_vars {
                return Err(EvalError::Shape(format!(
                    "row {r} has {} values, expected {num_vars}",
                    row.len()
                )));
            }
            for (col, value) in columns.iter_mut().zip(row) {
                col.push(*value);
            }
        }
        Self::from_columns(columns, targets, kind)
    }

    pub fn num_cases(&self) -> usize {
        self.num_cases
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// All cases of variable `v`.
    pub fn var(&self, v: usize) -> &[f64] {
        &self.inputs[v * self.num_cases..(v + 1) * self.num_cases]
    }

    pub fn value(&self, v: usize, case: usize) -> f64 {
        self.inputs[v * self.num_cases + case]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Values of every variable for one case.
    pub fn row(&self, case: usize) -> Vec<f64> {
        (0..self.num_vars).map(|v| self.value(v, case)).collect()
    }
}

/// Boolean fitness cases packed 32 per word.
///
/// Bit `j` of word `w` of a variable is that variable's value in logical
/// case `32·w + j`. Padding bits past `num_cases` are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedDataset {
    num_cases: usize,
    num_vars: usize,
    words_per_var: usize,
    inputs: Vec<u32>,
    targets: Vec<u32>,
}

impl PackedDataset {
    pub const CASES_PER_WORD: usize = 32;

    /// Packs `num_cases` cases whose values are given by `input(var, case)`
    /// and `target(case)`.
    pub fn from_fn(
        num_vars: usize,
        num_cases: usize,
        input: impl Fn(usize, usize) -> bool,
        target: impl Fn(usize) -> bool,
    ) -> Self {
        let words_per_var = num_cases.div_ceil(Self::CASES_PER_WORD);
        let pack = |bit: &dyn Fn(usize) -> bool| -> Vec<u32> {
            (0..words_per_var)
                .map(|w| {
                    let base = w * Self::CASES_PER_WORD;
                    (0..Self::CASES_PER_WORD.min(num_cases - base))
                        .filter(|j| bit(base + j))
                        .fold(0u32, |word, j| word | (1 << j))
                })
                .collect()
        };
        let mut inputs = Vec::with_capacity(num_vars * words_per_var);
        for v in 0..num_vars {
            inputs.extend(pack(&|c| input(v, c)));
        }
        let targets = pack(&target);
        Self {
            num_cases,
            num_vars,
            words_per_var,
            inputs,
            targets,
        }
    }

    /// Packs a dataset whose inputs and targets are all 0.0 or 1.0.
    pub fn pack(data: &Dataset) -> Result<Self, EvalError> {
        let is_bit = |x: f64| x == 0.0 || x == 1.0;
        if !data.inputs.iter().chain(&data.targets).all(|x| is_bit(*x)) {
            return Err(EvalError::Shape("packing requires 0/1 values".into()));
        }
        Ok(Self::from_fn(
            data.num_vars,
            data.num_cases,
            |v, c| data.value(v, c) == 1.0,
            |c| data.targets[c] == 1.0,
        ))
    }

    /// Scalar view with 0.0/1.0 inputs and 0/1 classification targets.
    pub fn unpack(&self) -> Dataset {
        let columns = (0..self.num_vars)
            .map(|v| (0..self.num_cases).map(|c| f64::from(u8::from(self.bit(v, c)))).collect())
            .collect();
        let targets = (0..self.num_cases)
            .map(|c| f64::from(u8::from(self.target_bit(c))))
            .collect();
        Dataset::from_columns(columns, targets, TargetKind::Classification)
            .expect("columns match target length")
    }

    pub fn num_cases(&self) -> usize {
        self.num_cases
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn words_per_var(&self) -> usize {
        self.words_per_var
    }

    pub fn var_words(&self, v: usize) -> &[u32] {
        &self.inputs[v * self.words_per_var..(v + 1) * self.words_per_var]
    }

    /// All variables' words, variable-major.
    pub fn input_words(&self) -> &[u32] {
        &self.inputs
    }

    pub fn target_words(&self) -> &[u32] {
        &self.targets
    }

    pub fn bit(&self, v: usize, case: usize) -> bool {
        (self.var_words(v)[case / 32] >> (case % 32)) & 1 == 1
    }

    pub fn target_bit(&self, case: usize) -> bool {
        (self.targets[case / 32] >> (case % 32)) & 1 == 1
    }

    /// Mask of the logical cases held in word `w`.
    pub fn word_mask(&self, w: usize) -> u32 {
        let live = self.num_cases - w * Self::CASES_PER_WORD;
        if live >= 32 {
            u32::MAX
        } else {
            (1u32 << live) - 1
        }
    }

    /// Hex dump, one variable per line, then the targets.
    pub fn hex_dump(&self) -> String {
        let mut out = String::new();
        let mut line = |name: String, words: &[u32]| {
            let _ = write!(out, "{name}:");
            for w in words {
                let _ = write!(out, " {w:08x}");
            }
            out.push('\n');
        };
        for v in 0..self.num_vars {
            line(format!("X{v}"), self.var_words(v));
        }
        line("Y".into(), &self.targets);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_transposed() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let d = Dataset::from_rows(&rows, vec![0.0, 1.0, 0.0], TargetKind::Classification).unwrap();
        assert_eq!(d.inputs(), &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        assert_eq!(d.var(1), &[2.0, 4.0, 6.0]);
        assert_eq!(d.row(2), vec![5.0, 6.0]);
        assert!(Dataset::from_rows(&[vec![1.0], vec![]], vec![0.0, 0.0], TargetKind::Regression).is_err());
    }

    #[test]
    fn packing_layout_and_padding() {
        let p = PackedDataset::from_fn(2, 40, |v, c| (c >> v) & 1 == 1, |c| c % 3 == 0);
        assert_eq!(p.words_per_var(), 2);
        assert_eq!(p.var_words(0)[0], 0xaaaa_aaaa);
        assert_eq!(p.var_words(1)[0], 0xcccc_cccc);
        // cases 32..40: bit0 alternates; padding above bit 7 is zero
        assert_eq!(p.var_words(0)[1], 0xaa);
        assert_eq!(p.word_mask(1), 0xff);
        assert_eq!(p.word_mask(0), u32::MAX);
        for c in 0..40 {
            assert_eq!(p.target_bit(c), c % 3 == 0);
        }
        let round = PackedDataset::pack(&p.unpack()).unwrap();
        assert_eq!(round, p);
        assert!(p.hex_dump().starts_with("X0: aaaaaaaa 000000aa\n"));
    }
}
