//! Command implementations behind the `outer-ppo` binary. Each subcommand
//! lives in its own module and returns an exit code; `main` only parses
//! arguments and reports errors.

pub mod args;
pub mod eval;
pub mod metrics;
pub mod plot;
pub mod presets;
pub mod svg;
pub mod sweep;
pub mod train;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

/// A problem with the inputs that was caught before any work started.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(e: impl fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(inner) = cause.downcast_ref::<outer_ppo::Error>() {
            return match inner {
                outer_ppo::Error::Config(_) | outer_ppo::Error::UnknownEnv(_) => EXIT_CONFIG,
                e if e.is_numerical() => EXIT_ABORTED,
                _ => EXIT_OTHER,
            };
        }
    }
    EXIT_OTHER
}

pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Train(a) => train::run(&a),
        Command::Sweep(a) => sweep::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Metrics(a) => metrics::run(&a),
        Command::Plot(a) => plot::run(&a),
        Command::Presets(a) => presets::run(&a),
    }
}

/// Writes `contents` to `path` through a temporary sibling and a rename, so
/// readers never see a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(contents)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
