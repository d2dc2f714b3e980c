//! Postfix stack interpreters.
//!
//! The batched form keeps a two-dimensional stack: each stack level holds
//! `B` lanes, one per fitness case, and every instruction is dispatched once
//! for all lanes. Lane `j` of the batch starting at `base` is case
//! `base + j`. Cases left over after the last full batch run through the
//! single-lane path.

use super::fitness::{score, Kernel, Probe, Sink};
use super::ops::{binary_lanes, ternary_lanes, unary_lanes, OpPolicy};
use super::{check_inputs, dispatch_batch, Dataset, EvalConfig, EvalError, EvalOutcome};
use crate::genome::{Node, OpCode, TreeGenome};

#[derive(Debug, Clone, Copy)]
enum Step {
    /// Offset of the variable's column in the input matrix.
    Input(usize),
    Const(f64),
    Unary(OpCode),
    Binary(OpCode),
    Ternary(OpCode),
}

#[derive(Debug, Clone)]
pub(crate) struct RpnKernel {
    steps: Vec<Step>,
    source_size: usize,
    batch: usize,
    stack_capacity: usize,
    policy: OpPolicy,
}

impl RpnKernel {
    pub(crate) fn compile(genome: &TreeGenome, data: &Dataset, batch: usize, cfg: &EvalConfig) -> Result<Self, EvalError> {
        check_inputs(genome.max_input_index(), data)?;
        let required = genome.rpn_max_stack_depth();
        if required > cfg.stack_capacity {
            return Err(EvalError::StackCapacity {
                required,
                capacity: cfg.stack_capacity,
            });
        }
        let n = data.num_cases();
        let steps = genome
            .code()
            .iter()
            .map(|node| match *node {
                Node::Input(v) => Step::Input(usize::from(v) * n),
                Node::Const(c) => Step::Const(genome.consts()[usize::from(c)]),
                Node::Func(op) => match op.arity() {
                    1 => Step::Unary(op),
                    2 => Step::Binary(op),
                    _ => Step::Ternary(op),
                },
            })
            .collect();
        Ok(Self {
            steps,
            source_size: genome.size(),
            batch,
            stack_capacity: cfg.stack_capacity,
            policy: cfg.policy,
        })
    }

    fn drive<const B: usize, S: Sink, P: Probe>(&self, data: &Dataset, sink: &mut S, probe: &mut P) {
        let n = data.num_cases();
        let inputs = data.inputs();
        let full = n / B * B;
        let mut wide = vec![[0.0; B]; self.stack_capacity];
        for base in (0..full).step_by(B) {
            let out = self.batch_of::<B, P>(inputs, base, &mut wide, probe);
            sink.push_lanes(&out);
        }
        if full < n {
            let mut narrow = vec![[0.0; 1]; self.stack_capacity];
            for case in full..n {
                let out = self.batch_of::<1, P>(inputs, case, &mut narrow, probe);
                sink.push_lanes(&out);
            }
        }
    }

    #[inline(always)]
    fn batch_of<const B: usize, P: Probe>(
        &self,
        inputs: &[f64],
        base: usize,
        stack: &mut [[f64; B]],
        probe: &mut P,
    ) -> [f64; B] {
        let policy = &self.policy;
        let mut sp = 0usize;
        for step in &self.steps {
            probe.dispatch();
            match *step {
                Step::Input(offset) => {
                    let column = &inputs[offset + base..offset + base + B];
                    stack[sp] = std::array::from_fn(|j| column[j]);
                    sp += 1;
                }
                Step::Const(value) => {
                    stack[sp] = [value; B];
                    sp += 1;
                }
                Step::Unary(op) => {
                    probe.fetch(1);
                    stack[sp - 1] = unary_lanes(op, &stack[sp - 1], policy);
                }
                Step::Binary(op) => {
                    probe.fetch(2);
                    sp -= 1;
                    stack[sp - 1] = binary_lanes(op, &stack[sp - 1], &stack[sp], policy);
                }
                Step::Ternary(op) => {
                    probe.fetch(3);
                    sp -= 2;
                    stack[sp - 1] = ternary_lanes(op, &stack[sp - 1], &stack[sp], &stack[sp + 1]);
                }
            }
        }
        debug_assert_eq!(sp, 1);
        stack[0]
    }
}

impl Kernel for RpnKernel {
    fn source_size(&self) -> usize {
        self.source_size
    }

    fn run<S: Sink, P: Probe>(&self, data: &Dataset, sink: &mut S, probe: &mut P) {
        dispatch_batch!(self.batch, B => self.drive::<B, S, P>(data, sink, probe));
    }
}

/// Evaluates a genome one fitness case at a time.
pub fn eval_rpn_1d(genome: &TreeGenome, data: &Dataset, cfg: &EvalConfig) -> Result<EvalOutcome, EvalError> {
    super::require_cases(data)?;
    let kernel = RpnKernel::compile(genome, data, 1, cfg)?;
    Ok(score(&kernel, data, &mut ()))
}

/// Evaluates a genome `cfg.batch` fitness cases per dispatch.
pub fn eval_rpn_2d(genome: &TreeGenome, data: &Dataset, cfg: &EvalConfig) -> Result<EvalOutcome, EvalError> {
    super::require_cases(data)?;
    let kernel = RpnKernel::compile(genome, data, cfg.batch, cfg)?;
    Ok(score(&kernel, data, &mut ()))
}
