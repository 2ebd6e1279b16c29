//! Experiment harness for the mixed-dimensional solver: geometry
//! generators, text I/O, configuration, and the convergence / iteration
//! studies exposed by the command-line tool.

pub mod config;
pub mod diagnose;
pub mod experiments;
pub mod gen;
pub mod io;
