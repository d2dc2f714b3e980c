//! Bit-parallel boolean evaluation: 32 fitness cases per machine word.

use super::fitness::{Counters, EvalOutcome, Probe};
use super::ops::packed;
use super::{EvalConfig, EvalError, PackedDataset, ProgramRef};
use crate::genome::{Node, OpClass, OpCode};
use crate::lgp::{LgpOp, Operand};

#[derive(Debug, Clone, Copy)]
enum Word {
    /// Word offset of the variable's column.
    Input(usize),
    Stack,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Push(usize),
    /// Postfix function: pops two, pushes one.
    Postfix(OpCode),
    /// Linear instruction with resolved operands.
    Linear(Option<OpCode>, Word, Word),
}

struct PackedKernel {
    steps: Vec<Step>,
    source_size: usize,
    stack_capacity: usize,
}

fn boolean_op(op: OpCode) -> Result<OpCode, EvalError> {
    if op.class() == OpClass::BooleanBitwise {
        Ok(op)
    } else {
        Err(EvalError::NonBoolean(op))
    }
}

impl PackedKernel {
    fn compile(program: ProgramRef<'_>, data: &PackedDataset, cfg: &EvalConfig) -> Result<Self, EvalError> {
        let wpv = data.words_per_var();
        let check_var = |v: u16| {
            let v = usize::from(v);
            if v < data.num_vars() {
                Ok(v * wpv)
            } else {
                Err(EvalError::VariableOutOfRange {
                    index: v,
                    num_vars: data.num_vars(),
                })
            }
        };
        let (steps, source_size, required) = match program {
            ProgramRef::Tree(genome) => {
                let steps = genome
                    .code()
                    .iter()
                    .map(|node| match *node {
                        Node::Input(v) => check_var(v).map(Step::Push),
                        Node::Const(_) => Err(EvalError::NonBooleanTerminal),
                        Node::Func(op) => boolean_op(op).map(Step::Postfix),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                (steps, genome.size(), genome.rpn_max_stack_depth())
            }
            ProgramRef::Linear(program) => {
                let word = |operand: Option<&Operand>| match operand {
                    Some(Operand::Input(v)) => check_var(*v).map(Word::Input),
                    Some(Operand::Stack) | None => Ok(Word::Stack),
                    Some(Operand::Const(_)) => Err(EvalError::NonBooleanTerminal),
                };
                let steps = program
                    .instructions()
                    .iter()
                    .map(|ins| {
                        let op = match ins.op() {
                            LgpOp::Copy => None,
                            LgpOp::Func(op) => Some(boolean_op(op)?),
                        };
                        let operands = ins.operands();
                        Ok(Step::Linear(op, word(operands.first())?, word(operands.get(1))?))
                    })
                    .collect::<Result<Vec<_>, EvalError>>()?;
                (steps, program.source_size(), program.max_stack_depth())
            }
        };
        if required > cfg.stack_capacity {
            return Err(EvalError::StackCapacity {
                required,
                capacity: cfg.stack_capacity,
            });
        }
        Ok(Self {
            steps,
            source_size,
            stack_capacity: cfg.stack_capacity,
        })
    }

    fn run<P: Probe>(&self, data: &PackedDataset, probe: &mut P) -> u64 {
        let words = data.input_words();
        let fetch = |offset: usize, w: usize| words[offset + w];
        let mut stack = vec![0u32; self.stack_capacity];
        let mut wrong = 0u64;
        for (w, target) in data.target_words().iter().enumerate() {
            let mut sp = 0usize;
            for step in &self.steps {
                probe.dispatch();
                match *step {
                    Step::Push(offset) => {
                        stack[sp] = fetch(offset, w);
                        sp += 1;
                    }
                    Step::Postfix(op) => {
                        probe.fetch(2);
                        sp -= 1;
                        stack[sp - 1] = packed(op, stack[sp - 1], stack[sp]);
                    }
                    Step::Linear(op, a, b) => {
                        let mut resolve = |word: Word| match word {
                            Word::Input(offset) => fetch(offset, w),
                            Word::Stack => {
                                probe.fetch(1);
                                sp -= 1;
                                stack[sp]
                            }
                        };
                        let value = match op {
                            None => resolve(a),
                            Some(op) => {
                                let rhs = resolve(b);
                                let lhs = resolve(a);
                                packed(op, lhs, rhs)
                            }
                        };
                        stack[sp] = value;
                        sp += 1;
                    }
                }
            }
            debug_assert_eq!(sp, 1);
            wrong += u64::from(((stack[0] ^ target) & data.word_mask(w)).count_ones());
        }
        wrong
    }
}

fn outcome(kernel: &PackedKernel, data: &PackedDataset, wrong: u64) -> EvalOutcome {
    EvalOutcome {
        fitness: wrong as f64,
        nodes_evaluated: (kernel.source_size * data.num_cases()) as u64,
        non_finite: false,
    }
}

/// Counts the logical cases where the program output differs from the target.
pub fn eval_bool_packed(
    program: ProgramRef<'_>,
    data: &PackedDataset,
    cfg: &EvalConfig,
) -> Result<EvalOutcome, EvalError> {
    if data.num_cases() == 0 {
        return Err(EvalError::EmptyDataset);
    }
    let kernel = PackedKernel::compile(program, data, cfg)?;
    let wrong = kernel.run(data, &mut ());
    Ok(outcome(&kernel, data, wrong))
}

pub(crate) fn eval_bool_packed_counted(
    program: ProgramRef<'_>,
    data: &PackedDataset,
    cfg: &EvalConfig,
) -> Result<(EvalOutcome, Counters), EvalError> {
    if data.num_cases() == 0 {
        return Err(EvalError::EmptyDataset);
    }
    let kernel = PackedKernel::compile(program, data, cfg)?;
    let mut counters = Counters::default();
    let wrong = kernel.run(data, &mut counters);
    Ok((outcome(&kernel, data, wrong), counters))
}
