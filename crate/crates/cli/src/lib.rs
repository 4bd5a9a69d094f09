//! `gainpdf` command line: generate data, trace frontiers, match target
//! densities and price deviations as budget changes.
//!
//! Exit codes: 0 success, 1 file errors, 2 usage or validation, 3 infeasible
//! problems, 4 numerical failures.

mod args;
mod commands;
pub mod svg;

pub use args::{Cli, Command};
pub use commands::run;

use gainpdf::ErrorClass;

pub fn exit_code(e: &gainpdf::Error) -> i32 {
    match e.class() {
        ErrorClass::Io => 1,
        ErrorClass::Validation => 2,
        ErrorClass::Infeasible => 3,
        ErrorClass::Numerical => 4,
    }
}
