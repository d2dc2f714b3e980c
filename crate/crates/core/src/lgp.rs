//! Prefix linear-GP form of a postfix tree.
//!
//! Conversion runs the postfix code against a symbolic stack: terminals push
//! a marker naming themselves, and each function pops its operands and emits
//! one instruction whose result is pushed back as a stack marker `S`. At run
//! time only function results ever live on the stack, so the linear form
//! needs fewer dispatches, fewer stack reads and a shallower stack than the
//! postfix form it came from.

use std::fmt;

use crate::genome::{Node, OpCode, TreeGenome};

/// Where an instruction reads one of its arguments from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Input(u16),
    Const(u16),
    /// Pop the top of the run-time stack.
    Stack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LgpOp {
    Func(OpCode),
    /// Pushes its single operand unchanged. Only emitted for leaf-only trees.
    Copy,
}

impl LgpOp {
    pub const fn arity(self) -> usize {
        match self {
            LgpOp::Func(op) => op.arity(),
            LgpOp::Copy => 1,
        }
    }
}

/// One function application. Operands are stored left to right; when several
/// operands are `Stack`, the leftmost one is the deepest on the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LgpInstruction {
    op: LgpOp,
    operands: [Operand; 3],
}

impl LgpInstruction {
    pub fn new(op: LgpOp, operands: &[Operand]) -> Self {
        assert_eq!(operands.len(), op.arity(), "operand count must equal arity");
        let mut slots = [Operand::Stack; 3];
        slots[..operands.len()].copy_from_slice(operands);
        Self { op, operands: slots }
    }

    pub fn op(&self) -> LgpOp {
        self.op
    }

    pub fn operands(&self) -> &[Operand] {
        &self.operands[..self.op.arity()]
    }

    pub fn stack_operands(&self) -> usize {
        self.operands().iter().filter(|o| **o == Operand::Stack).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LgpProgram {
    instructions: Vec<LgpInstruction>,
    consts: Vec<f64>,
    source_size: usize,
}

impl LgpProgram {
    pub fn instructions(&self) -> &[LgpInstruction] {
        &self.instructions
    }

    pub fn consts(&self) -> &[f64] {
        &self.consts
    }

    /// Node count of the tree this program was converted from.
    pub fn source_size(&self) -> usize {
        self.source_size
    }

    pub fn instruction_count(&self) -> usize {
        self.instructions.len()
    }

    pub fn stack_fetch_count(&self) -> usize {
        self.instructions.iter().map(|i| i.stack_operands()).sum()
    }

    /// Peak run-time stack height.
    pub fn max_stack_depth(&self) -> usize {
        let mut height = 0usize;
        let mut peak = 0;
        for ins in &self.instructions {
            height = height - ins.stack_operands() + 1;
            peak = peak.max(height);
        }
        peak
    }

    /// Opcodes plus operand descriptors.
    pub fn value_count(&self) -> usize {
        self.instructions.iter().map(|i| 1 + i.op.arity()).sum()
    }

    pub fn max_input_index(&self) -> Option<usize> {
        self.instructions
            .iter()
            .flat_map(|i| i.operands().iter())
            .filter_map(|o| match o {
                Operand::Input(v) => Some(usize::from(*v)),
                _ => None,
            })
            .max()
    }

    pub fn ops(&self) -> impl Iterator<Item = LgpOp> + '_ {
        self.instructions.iter().map(|i| i.op)
    }
}

/// Converts a postfix genome to its linear form.
pub fn rpn_to_lgp(genome: &TreeGenome) -> LgpProgram {
    let code = genome.code();
    let mut instructions = Vec::with_capacity(genome.function_count().max(1));
    let mut symbols: Vec<Operand> = Vec::with_capacity(genome.rpn_max_stack_depth());
    for node in code {
        match *node {
            Node::Input(v) => symbols.push(Operand::Input(v)),
            Node::Const(c) => symbols.push(Operand::Const(c)),
            Node::Func(op) => {
                let base = symbols.len() - op.arity();
                instructions.push(LgpInstruction::new(LgpOp::Func(op), &symbols[base..]));
                symbols.truncate(base);
                symbols.push(Operand::Stack);
            }
        }
    }
    debug_assert_eq!(symbols.len(), 1);
    if instructions.is_empty() {
        instructions.push(LgpInstruction::new(LgpOp::Copy, &symbols));
    }
    LgpProgram {
        instructions,
        consts: genome.consts().to_vec(),
        source_size: genome.size(),
    }
}

impl fmt::Display for LgpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LgpOp::Func(op) => write!(f, "{op}"),
            LgpOp::Copy => f.write_str("copy"),
        }
    }
}

/// `+(XS)` style by default; the alternate form (`{:#}`) spells out variable
/// indices and constant slots, e.g. `+(X0,S)`.
impl fmt::Display for LgpInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.op)?;
        for (i, operand) in self.operands().iter().enumerate() {
            if f.alternate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match operand {
                    Operand::Input(v) => write!(f, "X{v}")?,
                    Operand::Const(c) => write!(f, "C{c}")?,
                    Operand::Stack => f.write_str("S")?,
                }
            } else {
                f.write_str(match operand {
                    Operand::Input(_) => "X",
                    Operand::Const(_) => "C",
                    Operand::Stack => "S",
                })?;
            }
        }
        f.write_str(")")
    }
}

impl fmt::Display for LgpProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ins) in self.instructions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if f.alternate() {
                write!(f, "{ins:#}")?;
            } else {
                write!(f, "{ins}")?;
            }
        }
        Ok(())
    }
}
