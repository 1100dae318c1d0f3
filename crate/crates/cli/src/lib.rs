//! Command-line front end: problem files, solver runs, and CSV/JSON results.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod problem_file;

use args::{Cli, Command};
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen(a) => commands::cmd_gen(a),
        Command::Actuator(a) => commands::cmd_actuator(a),
        Command::Complete(a) => commands::cmd_complete(a),
        Command::Sensor(a) => commands::cmd_sensor(a),
        Command::Greedy(a) => commands::cmd_greedy(a),
        Command::Bench(a) => commands::cmd_bench(a),
    }
}
