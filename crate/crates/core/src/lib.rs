//! Simulation and certification toolkit for the frog model on regular trees.
//!
//! The crate has two halves that check each other. The analytic half
//! evaluates every closed-form ingredient of the transience argument —
//! hitting probabilities, the six-region expected-weight bound, the
//! dominating-BRW growth constants — exactly, and emits machine-readable
//! certificates when the expected visited-set weight `alpha` drops below 1.
//! The simulation half runs the processes themselves (single-island visited
//! sets, the full activation cascade, the block recursion, the BRW coupling)
//! on implicit infinite trees with certified truncation bias, so Monte Carlo
//! estimates can be compared against the analytic bounds rather than against
//! folklore.

pub mod analytic;
pub mod blocks;
pub mod cli;
pub mod brw;
pub mod laws;
pub mod sim;
pub mod streams;
pub mod tree;
