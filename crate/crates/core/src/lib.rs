//! Self-healing by runtime execution profiling.
//!
//! Runs of an instrumented application are captured as signature-traces,
//! generalized into per-node knowledge stores that nodes share with each
//! other, and matched against fault models when a run fails. A feedback loop
//! then tries fixes until the application is stable again, and escalates to
//! an administrator when it cannot.

pub mod exchange;
pub mod fault;
pub mod harness;
pub mod heal;
pub mod meter;
pub mod model;
pub mod sim;
pub mod store;
