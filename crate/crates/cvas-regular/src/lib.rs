//! Effective regularity for continuous vector addition systems.

pub mod automata;
pub mod cli;
pub mod cvas;
pub mod decider;
pub mod engine;
pub mod instance;
pub mod lifting;
pub mod linear;
pub mod lowerbound;
pub mod rational;
pub mod scheme;
