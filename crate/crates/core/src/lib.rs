//! Solvers and experiment tooling for power-minimizing VM assignment:
//! place divisible-in-number, indivisible-in-size VM loads onto identical
//! machines so that the summed machine power `mu * load^alpha + b` (zero
//! for idle machines) is as small as possible, with optional per-machine
//! capacity and machine-count bounds.

pub mod adversary;
pub mod bounds;
pub mod exact;
pub mod experiment;
pub mod instance;
pub mod offline;
pub mod online;
pub mod power;

pub use instance::{fits, Instance, Partition, Resources, Violation};
pub use power::PowerParams;
