//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or usage error,
//! 3 numerical divergence, 4 I/O or file-format error.

pub mod arrays;
pub mod artifacts;
pub mod config;
pub mod experiment;
pub mod phantom;
pub mod train;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{psnr, ssim, RangePolicy, SSIM_WINDOW};
use arrays::{write_png16, Array};
use phantom::{make_phantom, PhantomKind};

pub const OUTPUT_ROOT_ENV: &str = "DIFFPOST_OUTPUT_ROOT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "diffpost", version, about = "Posterior sampling for undersampled MRI with score-based priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a config file or a previous run's manifest.
    Run { config: PathBuf },
    /// Train a score network.
    Train { config: PathBuf },
    /// Write a synthetic phantom (.png for a magnitude image, anything else for an array file).
    Phantom { kind: PhantomKind, size: usize, out: PathBuf },
    /// PSNR and SSIM of image array `a` against reference `b`.
    Metrics { a: PathBuf, b: PathBuf },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Divergence { .. } | Error::NonFinite { .. } | Error::TrainingDiverged { .. } => EXIT_DIVERGED,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn output_root() -> Result<Option<PathBuf>> {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        None => Ok(None),
        Some(v) if v.is_empty() => Ok(None),
        Some(v) => {
            let p = PathBuf::from(v);
            Ok(Some(if p.is_relative() { std::env::current_dir()?.join(p) } else { p }))
        }
    }
}

fn metrics_report(a: &Path, b: &Path) -> Result<String> {
    let x = Array::load(a)?.to_image()?;
    let reference = Array::load(b)?.to_image()?;
    let p = psnr(&x, &reference, RangePolicy::PerSliceMax)?;
    let s = if x.height() >= SSIM_WINDOW && x.width() >= SSIM_WINDOW {
        format!("{:.10e}", ssim(&x, &reference, RangePolicy::PerSliceMax)?)
    } else {
        String::new()
    };
    Ok(format!("psnr_db,ssim\n{p:.10e},{s}"))
}

fn dispatch(command: Command) -> Result<Vec<String>> {
    match command {
        Command::Run { config } => {
            let (text, base) = artifacts::load_config_source(&config, "run")?;
            Ok(experiment::run_experiment(&text, &base, output_root()?.as_deref())?.lines)
        }
        Command::Train { config } => {
            let (text, base) = artifacts::load_config_source(&config, "train")?;
            Ok(train::run_training(&text, &base, output_root()?.as_deref())?.1)
        }
        Command::Phantom { kind, size, out } => {
            let img = make_phantom(kind, size).map_err(|e| Error::Config(e.to_string()))?;
            if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                write_png16(&out, &img.magnitude(), size, size)?;
            } else {
                Array::from_image(&img).save(&out)?;
            }
            Ok(vec![format!("wrote {kind} phantom ({size}x{size}) to {}", out.display())])
        }
        Command::Metrics { a, b } => Ok(vec![metrics_report(&a, &b)?]),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(lines) => {
            lines.iter().for_each(|l| println!("{l}"));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    run_with_args(std::env::args_os())
}
