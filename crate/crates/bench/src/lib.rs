//! Benchmark harness for the stackgp interpreters: GPop/s measurement,
//! backend sweeps, stack-limit tables, the verification suite and reports.

pub mod cli;
pub mod gpops;
pub mod matrix;
pub mod report;
pub mod stack_table;
pub mod verify;

pub use gpops::{measure_gpops, measure_gpops_raw, BenchError};
pub use matrix::{backend_matrix, Cell, MatrixRow};
pub use stack_table::{stack_limit_table, StackRow};
