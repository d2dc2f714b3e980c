//! Protected operator semantics shared by every backend.
//!
//! The scalar and lane-wise paths call the same per-element helpers so that
//! every backend produces bit-identical results.

use crate::genome::OpCode;

/// Parameters of the protected operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpPolicy {
    /// Division returns 1.0 when `|denominator| < div_epsilon`.
    pub div_epsilon: f64,
    /// Exponent is clamped to at most this value.
    pub exp_clamp: f64,
}

impl Default for OpPolicy {
    fn default() -> Self {
        Self {
            div_epsilon: 1e-9,
            exp_clamp: 80.0,
        }
    }
}

#[inline(always)]
fn truth(v: bool) -> f64 {
    if v {
        1.0
    } else {
        0.0
    }
}

#[inline(always)]
pub(crate) fn div(a: f64, b: f64, policy: &OpPolicy) -> f64 {
    if b.abs() < policy.div_epsilon {
        1.0
    } else {
        a / b
    }
}

#[inline(always)]
pub(crate) fn log(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().ln()
    }
}

#[inline(always)]
pub(crate) fn exp(x: f64, policy: &OpPolicy) -> f64 {
    x.min(policy.exp_clamp).exp()
}

#[inline(always)]
pub(crate) fn unary(op: OpCode, a: f64, policy: &OpPolicy) -> f64 {
    match op {
        OpCode::Sin => a.sin(),
        OpCode::Cos => a.cos(),
        OpCode::Log => log(a),
        OpCode::Exp => exp(a, policy),
        _ => unreachable!("{op} is not unary"),
    }
}

#[inline(always)]
pub(crate) fn binary(op: OpCode, a: f64, b: f64, policy: &OpPolicy) -> f64 {
    match op {
        OpCode::Add => a + b,
        OpCode::Sub => a - b,
        OpCode::Mul => a * b,
        OpCode::Div => div(a, b, policy),
        OpCode::Gt => truth(a > b),
        OpCode::Lt => truth(a < b),
        OpCode::Eq => truth(a == b),
        OpCode::And | OpCode::BoolAnd => truth(a > 0.0 && b > 0.0),
        OpCode::Or | OpCode::BoolOr => truth(a > 0.0 || b > 0.0),
        OpCode::BoolNand => truth(!(a > 0.0 && b > 0.0)),
        OpCode::BoolNor => truth(!(a > 0.0 || b > 0.0)),
        _ => unreachable!("{op} is not binary"),
    }
}

#[inline(always)]
pub(crate) fn ternary(op: OpCode, c: f64, t: f64, e: f64) -> f64 {
    debug_assert_eq!(op, OpCode::If);
    if c > 0.0 {
        t
    } else {
        e
    }
}

/// Applies `op` to `args`, which must hold exactly `op.arity()` values.
pub fn apply_op(op: OpCode, args: &[f64], policy: &OpPolicy) -> f64 {
    assert_eq!(args.len(), op.arity(), "wrong argument count for {op}");
    match args {
        [a] => unary(op, *a, policy),
        [a, b] => binary(op, *a, *b, policy),
        [c, t, e] => ternary(op, *c, *t, *e),
        _ => unreachable!(),
    }
}

macro_rules! lanewise {
    ($B:ident, |$j:ident| $body:expr) => {{
        let mut out = [0.0f64; $B];
        for $j in 0..$B {
            out[$j] = $body;
        }
        out
    }};
}

/// Lane-wise unary op. The opcode is matched once, outside the lane loop.
#[inline(always)]
pub(crate) fn unary_lanes<const B: usize>(op: OpCode, a: &[f64; B], policy: &OpPolicy) -> [f64; B] {
    match op {
        OpCode::Sin => lanewise!(B, |j| a[j].sin()),
        OpCode::Cos => lanewise!(B, |j| a[j].cos()),
        OpCode::Log => lanewise!(B, |j| log(a[j])),
        OpCode::Exp => lanewise!(B, |j| exp(a[j], policy)),
        _ => unreachable!("{op} is not unary"),
    }
}

#[inline(always)]
pub(crate) fn binary_lanes<const B: usize>(
    op: OpCode,
    a: &[f64; B],
    b: &[f64; B],
    policy: &OpPolicy,
) -> [f64; B] {
    match op {
        OpCode::Add => lanewise!(B, |j| a[j] + b[j]),
        OpCode::Sub => lanewise!(B, |j| a[j] - b[j]),
        OpCode::Mul => lanewise!(B, |j| a[j] * b[j]),
        OpCode::Div => lanewise!(B, |j| div(a[j], b[j], policy)),
        OpCode::Gt => lanewise!(B, |j| truth(a[j] > b[j])),
        OpCode::Lt => lanewise!(B, |j| truth(a[j] < b[j])),
        OpCode::Eq => lanewise!(B, |j| truth(a[j] == b[j])),
        OpCode::And | OpCode::BoolAnd => lanewise!(B, |j| truth(a[j] > 0.0 && b[j] > 0.0)),
        OpCode::Or | OpCode::BoolOr => lanewise!(B, |j| truth(a[j] > 0.0 || b[j] > 0.0)),
        OpCode::BoolNand => lanewise!(B, |j| truth(!(a[j] > 0.0 && b[j] > 0.0))),
        OpCode::BoolNor => lanewise!(B, |j| truth(!(a[j] > 0.0 || b[j] > 0.0))),
        _ => unreachable!("{op} is not binary"),
    }
}

#[inline(always)]
pub(crate) fn ternary_lanes<const B: usize>(
    op: OpCode,
    c: &[f64; B],
    t: &[f64; B],
    e: &[f64; B],
) -> [f64; B] {
    lanewise!(B, |j| ternary(op, c[j], t[j], e[j]))
}

#[inline(always)]
pub(crate) fn packed(op: OpCode, a: u32, b: u32) -> u32 {
    match op {
        OpCode::BoolAnd => a & b,
        OpCode::BoolOr => a | b,
        OpCode::BoolNand => !(a & b),
        OpCode::BoolNor => !(a | b),
        _ => unreachable!("{op} is not a bitwise boolean op"),
    }
}
