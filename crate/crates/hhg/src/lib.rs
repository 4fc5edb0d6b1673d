//! Runner for the complex-trajectory HHG model: configuration, parallel
//! FINCO runs over the initial manifold, the split-operator reference and
//! CSV output.

pub mod commands;
pub mod config;
pub mod finco;
pub mod output;
pub mod quantum;
