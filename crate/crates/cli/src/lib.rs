//! Library surface of the experiment runner, shared by the `coverlab`
//! binary and the acceptance suite.

pub mod manifest;
pub mod report;
pub mod runner;
pub mod scenarios;
