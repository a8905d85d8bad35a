//! Front end for the `trifree` binary: arguments, experiment runners, output
//! emission and the acceptance suite.

pub mod config;
pub mod emit;
pub mod experiments;
pub mod run;
pub mod selftest;
