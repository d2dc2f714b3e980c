//! Tree-based genetic programming with interchangeable stack interpreters.
//!
//! Genomes are postfix trees ([`genome`]); they can be evaluated directly or
//! after conversion to a prefix instruction list ([`lgp`]) by any of the
//! backends in [`interp`]. [`evolve`] runs the generational loop and
//! [`problems`] builds the benchmark datasets.

pub mod evolve;
pub mod genome;
pub mod interp;
pub mod lgp;
pub mod problems;
