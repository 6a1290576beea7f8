//! The `mript` command line: argument parsing, experiment configs and the
//! subcommands.

mod commands;
mod config;
pub mod harness;

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use crate::error::{Error, Result};

pub use commands::{run, Cli, Command};
pub use config::{DataSource, ExperimentConfig, ModelSection, TaskSet};

pub const LOCK_FILE: &str = ".mript.lock";
pub const THREADS_VAR: &str = "MRIPT_THREADS";

/// Exclusive claim on an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    /// Creates `dir` if needed and the lock file inside it; fails if
    /// another run holds the lock.
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Invalid(format!(
                "{} is locked by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(format!("creating {}", path.display()), e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Worker cap from `MRIPT_THREADS`: `Some(0)` asks for deterministic
/// single-threaded execution, `None` leaves the default pool.
pub fn thread_setting() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Invalid(format!("{THREADS_VAR}: {e}"))),
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Invalid(format!("{THREADS_VAR} must be a non-negative integer, got {v:?}"))),
    }
}

/// Writes through a temporary sibling, then renames into place.
pub(crate) fn commit(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming into {}", path.display()), e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    commit(path, |tmp| fs::write(tmp, text).map_err(|e| Error::io(format!("writing {}", path.display()), e)))
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
