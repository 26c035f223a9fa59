//! Wildfire-aware public safety power shutoff planning.
//!
//! The crate builds mixed-integer models that choose which transmission lines
//! to de-energize so that wildfire ignition risk is minimized while enough
//! load is served, optionally while staying secure against single-line
//! outages. It ships its own branch-and-bound solver, a bridge to external
//! MILP solvers through MPS files, contingency evaluation of fixed plans,
//! parameter sweeps, a CLI and an HTTP service.

pub mod analysis;
pub mod case_io;
pub mod cli;
pub mod formulation;
pub mod milp;
pub mod network;
pub mod service;
pub mod solver;
