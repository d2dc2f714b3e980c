//! Fitness reduction and interpreter instrumentation.
//!
//! Per-case errors are summed sequentially within fixed blocks of
//! [`REDUCTION_CHUNK`] cases and the block sums are added in ascending order.
//! Backends feed outputs in case order, so the fitness of a program does not
//! depend on batch width, backend or worker count.

use super::{Dataset, EvalError, TargetKind};

/// Cases per partial sum in the regression reduction.
pub const REDUCTION_CHUNK: usize = 4096;

/// Receives program outputs in case order.
pub(crate) trait Sink {
    fn push(&mut self, output: f64);

    #[inline(always)]
    fn push_lanes<const B: usize>(&mut self, lanes: &[f64; B]) {
        for out in lanes {
            self.push(*out);
        }
    }
}

#[derive(Debug)]
pub(crate) struct SquaredError<'a> {
    targets: &'a [f64],
    next: usize,
    block: f64,
    block_len: usize,
    total: f64,
    non_finite: bool,
}

impl<'a> SquaredError<'a> {
    pub(crate) fn new(targets: &'a [f64]) -> Self {
        Self {
            targets,
            next: 0,
            block: 0.0,
            block_len: 0,
            total: 0.0,
            non_finite: false,
        }
    }

    /// Returns the mean squared error and whether any output was non-finite.
    pub(crate) fn finish(self) -> (f64, bool) {
        debug_assert_eq!(self.next, self.targets.len());
        let total = self.total + self.block;
        let non_finite = self.non_finite || !total.is_finite();
        if non_finite {
            (f64::INFINITY, true)
        } else {
            (total / self.targets.len() as f64, false)
        }
    }
}

impl Sink for SquaredError<'_> {
    #[inline(always)]
    fn push(&mut self, output: f64) {
        let err = output - self.targets[self.next];
        self.next += 1;
        self.non_finite |= !output.is_finite();
        self.block += err * err;
        self.block_len += 1;
        if self.block_len == REDUCTION_CHUNK {
            self.total += self.block;
            self.block = 0.0;
            self.block_len = 0;
        }
    }
}

#[derive(Debug)]
pub(crate) struct Misclassified<'a> {
    targets: &'a [f64],
    next: usize,
    wrong: u64,
}

impl<'a> Misclassified<'a> {
    pub(crate) fn new(targets: &'a [f64]) -> Self {
        Self {
            targets,
            next: 0,
            wrong: 0,
        }
    }

    pub(crate) fn finish(self) -> f64 {
        self.wrong as f64
    }
}

impl Sink for Misclassified<'_> {
    #[inline(always)]
    fn push(&mut self, output: f64) {
        let positive = self.targets[self.next] == 1.0;
        self.next += 1;
        self.wrong += u64::from((output > 0.0) != positive);
    }
}

impl Sink for Vec<f64> {
    #[inline(always)]
    fn push(&mut self, output: f64) {
        Vec::push(self, output);
    }
}

/// Score of one program over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOutcome {
    /// Lower is better. `+∞` when `non_finite` is set.
    pub fitness: f64,
    /// Tree nodes × logical fitness cases.
    pub nodes_evaluated: u64,
    pub non_finite: bool,
}

/// A program compiled for one backend, runnable over a dataset.
pub(crate) trait Kernel {
    fn source_size(&self) -> usize;
    fn run<S: Sink, P: Probe>(&self, data: &Dataset, sink: &mut S, probe: &mut P);
}

/// Runs `kernel` against the sink matching `data`'s target kind.
pub(crate) fn score<K: Kernel, P: Probe>(kernel: &K, data: &Dataset, probe: &mut P) -> EvalOutcome {
    let nodes_evaluated = (kernel.source_size() * data.num_cases()) as u64;
    match data.kind() {
        TargetKind::Regression => {
            let mut sink = SquaredError::new(data.targets());
            kernel.run(data, &mut sink, probe);
            let (fitness, non_finite) = sink.finish();
            EvalOutcome {
                fitness,
                nodes_evaluated,
                non_finite,
            }
        }
        TargetKind::Classification => {
            let mut sink = Misclassified::new(data.targets());
            kernel.run(data, &mut sink, probe);
            EvalOutcome {
                fitness: sink.finish(),
                nodes_evaluated,
                non_finite: false,
            }
        }
    }
}

pub(crate) fn outputs<K: Kernel>(kernel: &K, data: &Dataset) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.num_cases());
    kernel.run(data, &mut out, &mut ());
    out
}

/// Mean squared error over paired outputs and targets.
pub fn fitness_regression(outputs: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    check_lengths(outputs, targets)?;
    let mut sink = SquaredError::new(targets);
    for out in outputs {
        sink.push(*out);
    }
    Ok(sink.finish().0)
}

/// Number of cases where `output > 0` disagrees with `target == 1`.
pub fn fitness_classification(outputs: &[f64], targets: &[f64]) -> Result<f64, EvalError> {
    check_lengths(outputs, targets)?;
    let mut sink = Misclassified::new(targets);
    for out in outputs {
        sink.push(*out);
    }
    Ok(sink.finish())
}

fn check_lengths(outputs: &[f64], targets: &[f64]) -> Result<(), EvalError> {
    if outputs.is_empty() || targets.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if outputs.len() != targets.len() {
        return Err(EvalError::Shape(format!(
            "{} outputs for {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Interpreter event counters for one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Iterations of the instruction dispatch loop.
    pub dispatches: u64,
    /// Values read back off the stack.
    pub stack_fetches: u64,
    /// Reads and writes that went to the indexed stack array rather than a
    /// register slot. Only the register-hybrid backend distinguishes the two.
    pub spill_touches: u64,
}

pub(crate) trait Probe {
    fn dispatch(&mut self);
    fn fetch(&mut self, n: usize);
    fn spill(&mut self);
}

impl Probe for () {
    #[inline(always)]
    fn dispatch(&mut self) {}
    #[inline(always)]
    fn fetch(&mut self, _: usize) {}
    #[inline(always)]
    fn spill(&mut self) {}
}

impl Probe for Counters {
    #[inline(always)]
    fn dispatch(&mut self) {
        self.dispatches += 1;
    }
    #[inline(always)]
    fn fetch(&mut self, n: usize) {
        self.stack_fetches += n as u64;
    }
    #[inline(always)]
    fn spill(&mut self) {
        self.spill_touches += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_examples() {
        assert_eq!(fitness_regression(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(fitness_regression(&[0.0, 0.0], &[1.0, 3.0]).unwrap(), 5.0);
        assert_eq!(fitness_regression(&[f64::NAN, 0.0], &[1.0, 3.0]).unwrap(), f64::INFINITY);
        assert_eq!(fitness_regression(&[1e300], &[-1e300]).unwrap(), f64::INFINITY);
        assert!(matches!(fitness_regression(&[], &[]), Err(EvalError::EmptyDataset)));
        assert!(fitness_regression(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn classification_examples() {
        assert_eq!(fitness_classification(&[1.0, -1.0], &[1.0, 0.0]).unwrap(), 0.0);
        let targets: Vec<f64> = (0..100).map(|i| f64::from(i % 2)).collect();
        assert_eq!(fitness_classification(&[1.0; 100], &targets).unwrap(), 50.0);
        assert_eq!(fitness_classification(&[-0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(fitness_classification(&[-0.0], &[0.0]).unwrap(), 0.0);
        assert!(fitness_classification(&[], &[]).is_err());
    }

    #[test]
    fn reduction_uses_fixed_blocks() {
        let n = REDUCTION_CHUNK * 2 + 17;
        let outputs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let targets = vec![0.1; n];
        let mut expected_total = 0.0;
        for block in outputs.chunks(REDUCTION_CHUNK).zip(targets.chunks(REDUCTION_CHUNK)) {
            let mut s = 0.0;
            for (o, t) in block.0.iter().zip(block.1) {
                s += (o - t) * (o - t);
            }
            expected_total += s;
        }
        let got = fitness_regression(&outputs, &targets).unwrap();
        assert_eq!(got.to_bits(), (expected_total / n as f64).to_bits());
    }
}
