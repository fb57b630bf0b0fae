//! Instrumented execution of test cases and per-target fitness.

mod distance;
mod fitness;
mod interp;

pub use distance::{branch_distance, normalize, K};
pub use fitness::{fitness_along, target_fitness};
pub use interp::{check_test, execute, ExecError, ExecutionTrace, Limits, PredicateRecord, TestCase, Termination};
