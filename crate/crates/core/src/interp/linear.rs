//! Linear-GP interpreters, plain and register-hybrid.
//!
//! Each instruction resolves its operands directly (input column, constant,
//! or a pop from the stack), applies its function across `B` lanes, and
//! pushes one result. Stack operands are resolved right to left so that the
//! leftmost `S` operand receives the deepest value.
//!
//! With `R > 0` the lowest `R` stack levels live in named slots chosen by a
//! `match` on the stack pointer; deeper levels go to the indexed stack array.
//! `R = 0` is the plain two-dimensional stack.

use super::fitness::{score, Kernel, Probe, Sink};
use super::ops::{binary_lanes, ternary_lanes, unary_lanes, OpPolicy};
use super::{check_inputs, dispatch_batch, Dataset, EvalConfig, EvalError, EvalOutcome};
use crate::genome::OpCode;
use crate::lgp::{LgpOp, LgpProgram, Operand};

/// Upper bound on register-resident stack levels.
pub const MAX_REGISTER_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy)]
enum Src {
    Input(usize),
    Const(f64),
    Stack,
}

#[derive(Debug, Clone, Copy)]
enum Apply {
    Copy,
    Unary(OpCode),
    Binary(OpCode),
    Ternary(OpCode),
}

#[derive(Debug, Clone, Copy)]
struct Step {
    apply: Apply,
    a: Src,
    b: Src,
    c: Src,
}

#[derive(Debug, Clone)]
pub(crate) struct LgpKernel {
    steps: Vec<Step>,
    source_size: usize,
    batch: usize,
    registers: usize,
    stack_capacity: usize,
    policy: OpPolicy,
}

impl LgpKernel {
    pub(crate) fn compile(
        program: &LgpProgram,
        data: &Dataset,
        batch: usize,
        registers: usize,
        cfg: &EvalConfig,
    ) -> Result<Self, EvalError> {
        assert!(registers <= MAX_REGISTER_LEVELS);
        check_inputs(program.max_input_index(), data)?;
        let required = program.max_stack_depth();
        if required > cfg.stack_capacity {
            return Err(EvalError::StackCapacity {
                required,
                capacity: cfg.stack_capacity,
            });
        }
        let n = data.num_cases();
        let src = |operand: &Operand| match *operand {
            Operand::Input(v) => Src::Input(usize::from(v) * n),
            Operand::Const(c) => Src::Const(program.consts()[usize::from(c)]),
            Operand::Stack => Src::Stack,
        };
        let steps = program
            .instructions()
            .iter()
            .map(|ins| {
                let ops = ins.operands();
                let apply = match ins.op() {
                    LgpOp::Copy => Apply::Copy,
                    LgpOp::Func(op) => match op.arity() {
                        1 => Apply::Unary(op),
                        2 => Apply::Binary(op),
                        _ => Apply::Ternary(op),
                    },
                };
                Step {
                    apply,
                    a: src(&ops[0]),
                    b: ops.get(1).map_or(Src::Stack, src),
                    c: ops.get(2).map_or(Src::Stack, src),
                }
            })
            .collect();
        Ok(Self {
            steps,
            source_size: program.source_size(),
            batch,
            registers,
            stack_capacity: cfg.stack_capacity,
            policy: cfg.policy,
        })
    }

    fn drive<const B: usize, const R: usize, S: Sink, P: Probe>(
        &self,
        data: &Dataset,
        sink: &mut S,
        probe: &mut P,
    ) {
        let n = data.num_cases();
        let inputs = data.inputs();
        let full = n / B * B;
        let mut wide = vec![[0.0; B]; self.stack_capacity];
        for base in (0..full).step_by(B) {
            let out = self.batch_of::<B, R, P>(inputs, base, &mut wide, probe);
            sink.push_lanes(&out);
        }
        if full < n {
            let mut narrow = vec![[0.0; 1]; self.stack_capacity];
            for case in full..n {
                let out = self.batch_of::<1, R, P>(inputs, case, &mut narrow, probe);
                sink.push_lanes(&out);
            }
        }
    }

    #[inline(always)]
    fn batch_of<const B: usize, const R: usize, P: Probe>(
        &self,
        inputs: &[f64],
        base: usize,
        spill: &mut [[f64; B]],
        probe: &mut P,
    ) -> [f64; B] {
        let policy = &self.policy;
        let mut sp = 0usize;
        let mut r0 = [0.0; B];
        let mut r1 = [0.0; B];
        let mut r2 = [0.0; B];
        let mut r3 = [0.0; B];

        macro_rules! pop {
            () => {{
                sp -= 1;
                probe.fetch(1);
                match sp {
                    0 if R > 0 => r0,
                    1 if R > 1 => r1,
                    2 if R > 2 => r2,
                    3 if R > 3 => r3,
                    _ => {
                        if R > 0 {
                            probe.spill();
                        }
                        spill[sp]
                    }
                }
            }};
        }
        macro_rules! push {
            ($value:expr) => {{
                let value = $value;
                match sp {
                    0 if R > 0 => r0 = value,
                    1 if R > 1 => r1 = value,
                    2 if R > 2 => r2 = value,
                    3 if R > 3 => r3 = value,
                    _ => {
                        if R > 0 {
                            probe.spill();
                        }
                        spill[sp] = value;
                    }
                }
                sp += 1;
            }};
        }
        macro_rules! load {
            ($src:expr) => {
                match $src {
                    Src::Input(offset) => {
                        let column = &inputs[offset + base..offset + base + B];
                        std::array::from_fn(|j| column[j])
                    }
                    Src::Const(value) => [value; B],
                    Src::Stack => pop!(),
                }
            };
        }

        for step in &self.steps {
            probe.dispatch();
            let result: [f64; B] = match step.apply {
                Apply::Copy => load!(step.a),
                Apply::Unary(op) => {
                    let a = load!(step.a);
                    unary_lanes(op, &a, policy)
                }
                Apply::Binary(op) => {
                    let b = load!(step.b);
                    let a = load!(step.a);
                    binary_lanes(op, &a, &b, policy)
                }
                Apply::Ternary(op) => {
                    let c = load!(step.c);
                    let b = load!(step.b);
                    let a = load!(step.a);
                    ternary_lanes(op, &a, &b, &c)
                }
            };
            push!(result);
        }
        debug_assert_eq!(sp, 1);
        // Silence unused-assignment lints for slots above R.
        let _ = (r1, r2, r3);
        if R > 0 {
            r0
        } else {
            spill[0]
        }
    }
}

impl Kernel for LgpKernel {
    fn source_size(&self) -> usize {
        self.source_size
    }

    fn run<S: Sink, P: Probe>(&self, data: &Dataset, sink: &mut S, probe: &mut P) {
        dispatch_batch!(self.batch, B => match self.registers {
            0 => self.drive::<B, 0, S, P>(data, sink, probe),
            1 => self.drive::<B, 1, S, P>(data, sink, probe),
            2 => self.drive::<B, 2, S, P>(data, sink, probe),
            3 => self.drive::<B, 3, S, P>(data, sink, probe),
            4 => self.drive::<B, 4, S, P>(data, sink, probe),
            r => unreachable!("{r} register levels"),
        });
    }
}

/// Evaluates a linear program one fitness case at a time.
pub fn eval_lgp_1d(program: &LgpProgram, data: &Dataset, cfg: &EvalConfig) -> Result<EvalOutcome, EvalError> {
    super::require_cases(data)?;
    let kernel = LgpKernel::compile(program, data, 1, 0, cfg)?;
    Ok(score(&kernel, data, &mut ()))
}

/// Evaluates a linear program `cfg.batch` cases per dispatch.
pub fn eval_lgp_2d(program: &LgpProgram, data: &Dataset, cfg: &EvalConfig) -> Result<EvalOutcome, EvalError> {
    super::require_cases(data)?;
    let kernel = LgpKernel::compile(program, data, cfg.batch, 0, cfg)?;
    Ok(score(&kernel, data, &mut ()))
}

/// Evaluates a linear program `cfg.batch` cases per dispatch with the lowest
/// `cfg.registers` stack levels held in register slots.
pub fn eval_lgp_2d_reg(program: &LgpProgram, data: &Dataset, cfg: &EvalConfig) -> Result<EvalOutcome, EvalError> {
    super::require_cases(data)?;
    if !(1..=MAX_REGISTER_LEVELS).contains(&cfg.registers) {
        return Err(EvalError::Config(super::ConfigError::Registers {
            registers: cfg.registers,
            backend: super::BackendKind::Lgp2dReg,
        }));
    }
    let kernel = LgpKernel::compile(program, data, cfg.batch, cfg.registers, cfg)?;
    Ok(score(&kernel, data, &mut ()))
}
