//! Recursive reference evaluator.

use super::ops::{apply_op, OpPolicy};
use super::Dataset;
use crate::genome::{Node, TreeGenome};

/// Evaluates `genome` on one fitness case by recursive descent over the tree.
/// Every backend must reproduce this value exactly.
pub fn eval_oracle(genome: &TreeGenome, data: &Dataset, case: usize, policy: &OpPolicy) -> f64 {
    assert!(case < data.num_cases(), "case {case} out of range");
    let root = genome.size() - 1;
    let (value, start) = eval_subtree(genome, root, &|v| data.value(v, case), policy);
    debug_assert_eq!(start, 0);
    value
}

/// Evaluates `genome` with variable values supplied by `input`.
pub fn eval_oracle_with(genome: &TreeGenome, input: &dyn Fn(usize) -> f64, policy: &OpPolicy) -> f64 {
    eval_subtree(genome, genome.size() - 1, input, policy).0
}

/// Returns the value of the subtree ending at `end` and the index where that
/// subtree starts.
fn eval_subtree(
    genome: &TreeGenome,
    end: usize,
    input: &dyn Fn(usize) -> f64,
    policy: &OpPolicy,
) -> (f64, usize) {
    match genome.code()[end] {
        Node::Input(v) => (input(usize::from(v)), end),
        Node::Const(c) => (genome.consts()[usize::from(c)], end),
        Node::Func(op) => {
            let arity = op.arity();
            let mut args = [0.0; 3];
            let mut cursor = end;
            // Children are laid out left to right, so walk them right to left.
            for slot in (0..arity).rev() {
                let (value, start) = eval_subtree(genome, cursor - 1, input, policy);
                args[slot] = value;
                cursor = start;
            }
            (apply_op(op, &args[..arity], policy), cursor)
        }
    }
}
