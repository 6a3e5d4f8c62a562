//! The `wcs` command-line front end.
//!
//! Every run prints one JSON record on stdout:
//!
//! ```text
//! { "command": ..., "config": { resolved arguments }, "result": { ... },
//!   "metadata": { "version": ..., "unix_time": ... } }
//! ```
//!
//! Everything outside `metadata` is a deterministic function of the config.
//! With `--out-dir` (or `WCS_OUT_DIR`) the record is also written to
//! `<name>.json`, next to any CSV trace and, with `--plot`, an SVG plot.
//! Failures print `{"error": {"kind": ..., "message": ...}}` on stderr and
//! exit with 2 for usage or validation errors and 1 for numerical failures.

pub mod commands;
pub mod config;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use commands::*;

pub const OUT_DIR_ENV: &str = "WCS_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "wcs",
    version,
    about = "Weak coherent-state kernels, semigroups and path integrals"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for JSON, CSV and SVG artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,

    /// Artifact file stem; defaults to the subcommand name.
    #[arg(long, global = true)]
    pub name: Option<String>,

    /// Also emit an SVG plot where the command has one.
    #[arg(long, global = true)]
    pub plot: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
pub enum Command {
    /// Moments, spreads and admissibility of a fiducial vector.
    Fiducial(FiducialArgs),
    /// Overlap of two coherent states.
    Kernel(KernelArgs),
    /// Gram matrix spectrum of a point set.
    Gram(GramArgs),
    /// Resolution-of-unity check by cutoff doubling.
    Resolution(ResolutionArgs),
    /// Polarization residual of a kernel section.
    Polarize(PolarizeArgs),
    /// Grid evolution under the semigroup.
    Semigroup(SemigroupArgs),
    /// The one-dimensional Gaussian toy model.
    Toy(ToyArgs),
    /// Monte Carlo path integrals.
    Mc(McArgs),
    /// Closed-form affine dynamics and symbols.
    Dynamics(DynamicsArgs),
    /// Runs the acceptance suite.
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fiducial(_) => "fiducial",
            Command::Kernel(_) => "kernel",
            Command::Gram(_) => "gram",
            Command::Resolution(_) => "resolution",
            Command::Polarize(_) => "polarize",
            Command::Semigroup(_) => "semigroup",
            Command::Toy(_) => "toy",
            Command::Mc(_) => "mc",
            Command::Dynamics(_) => "dynamics",
            Command::Selftest(_) => "selftest",
        }
    }
}

/// A command's result plus optional side artifacts.
pub struct Output {
    pub result: Value,
    pub csv: Option<String>,
    pub svg: Option<String>,
    /// True when the command ran but its checks failed (exit status 1).
    pub failed: bool,
}

impl Output {
    pub fn new(result: impl Serialize) -> Self {
        Self {
            result: serde_json::to_value(result).expect("results serialize"),
            csv: None,
            svg: None,
            failed: false,
        }
    }
}

/// Raised for inputs that fail validation; maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn classify(e: &anyhow::Error) -> (&'static str, u8) {
    if e.downcast_ref::<UsageError>().is_some() {
        return ("usage", 2);
    }
    match e.downcast_ref::<wcs_core::Error>() {
        Some(wcs_core::Error::Domain(_)) | Some(wcs_core::Error::Config(_)) => ("usage", 2),
        Some(wcs_core::Error::Inadmissible(_)) => ("inadmissible", 1),
        Some(wcs_core::Error::Numeric(_)) => ("numeric", 1),
        None if e.downcast_ref::<std::io::Error>().is_some() => ("io", 1),
        None => ("internal", 1),
    }
}

pub fn error_record(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// The JSON record without metadata; this part is reproducible.
pub fn record(cli: &Cli, out: &Output) -> Value {
    json!({
        "command": cli.command.name(),
        "config": serde_json::to_value(&cli.command).expect("arguments serialize"),
        "result": out.result,
    })
}

fn with_metadata(mut rec: Value) -> Value {
    let unix_time = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    rec["metadata"] = json!({ "version": env!("CARGO_PKG_VERSION"), "unix_time": unix_time });
    rec
}

fn write_artifacts(cli: &Cli, out: &Output, text: &str) -> anyhow::Result<()> {
    let Some(dir) = &cli.out_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let stem = cli.name.clone().unwrap_or_else(|| cli.command.name().to_string());
    std::fs::write(dir.join(format!("{stem}.json")), text)?;
    if let Some(csv) = &out.csv {
        std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
    }
    if let (true, Some(svg)) = (cli.plot, &out.svg) {
        std::fs::write(dir.join(format!("{stem}.svg")), svg)?;
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with(args: Vec<String>) -> u8 {
    let args = match config::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}", error_record("usage", &format!("{e:#}")));
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.exit_code() == 0 {
                let _ = e.print();
                return 0;
            }
            let msg = e.render().to_string();
            eprintln!("{}", error_record("usage", msg.trim_end()));
            return 2;
        }
    };
    match run(&cli) {
        Ok(out) => {
            let rec = with_metadata(record(&cli, &out));
            let text = serde_json::to_string_pretty(&rec).expect("records serialize");
            println!("{text}");
            if let Err(e) = write_artifacts(&cli, &out, &text) {
                eprintln!("{}", error_record("io", &format!("{e:#}")));
                return 1;
            }
            u8::from(out.failed)
        }
        Err(e) => {
            let (kind, code) = classify(&e);
            eprintln!("{}", error_record(kind, &format!("{e:#}")));
            code
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Output> {
    match &cli.command {
        Command::Fiducial(a) => commands::fiducial(a),
        Command::Kernel(a) => commands::kernel_cmd(a),
        Command::Gram(a) => commands::gram_cmd(a),
        Command::Resolution(a) => commands::resolution(a),
        Command::Polarize(a) => commands::polarize(a),
        Command::Semigroup(a) => commands::semigroup(a),
        Command::Toy(a) => commands::toy(a),
        Command::Mc(a) => commands::mc(a),
        Command::Dynamics(a) => commands::dynamics(a),
        Command::Selftest(a) => commands::selftest(a),
    }
}
