//! Limited-memory influence diagrams compiled into mixed-integer linear
//! programs, together with native exact and heuristic solvers.

pub mod benchmarks;
pub mod diagram;
pub mod emit;
pub mod formulation;
pub mod io;
pub mod paths;
pub mod solvers;
pub mod strategy;
