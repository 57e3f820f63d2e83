//! `fracup`: runs one experiment from a JSON config and writes a
//! self-describing run directory.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.

mod config;
mod runs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use config::{EmbedRun, EvolveRun, StabilityRun, SweepRun, UncertaintyRun};
use fracup::extremal::MinimizeConfig;
use runs::Outputs;

#[derive(Parser, Debug)]
#[command(name = "fracup", version, about = "Fractional uncertainty experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config document for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parent directory of run directories.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the seeds of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Uncertainty runs: also report J with the weight at the |f|^p centroid.
    #[arg(long, global = true)]
    center: bool,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// J along a dilation sweep of one function.
    Uncertainty,
    /// Extremizer search on the unit L^p sphere.
    Minimize,
    /// Excess and distance along perturbations of a minimizer.
    Stability,
    /// Fractional Schrodinger evolution and decay rates.
    Evolve,
    /// Sobolev, HLS and Hausdorff-Young ratios over a corpus.
    Embed,
    /// Gaussian upper bounds for a list of exponent triples.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Uncertainty => "uncertainty",
            Command::Minimize => "minimize",
            Command::Stability => "stability",
            Command::Evolve => "evolve",
            Command::Embed => "embed",
            Command::Sweep => "sweep",
        }
    }
}

enum Failure {
    Invalid(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn classify(e: anyhow::Error) -> Self {
        match e.downcast_ref::<fracup::Error>() {
            Some(inner) if inner.is_numerical() => Failure::Numerical(e),
            _ => Failure::Invalid(e),
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Invalid(e) | Failure::Numerical(e) => e,
        }
    }
}

/// A validated config ready to run, with its echo.
struct Prepared {
    echo: Value,
    run: Box<dyn FnOnce() -> Result<Outputs>>,
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).context("config does not match the schema")
}

fn prepare(command: Command, text: &str, seed: Option<u64>, center: bool) -> Result<Prepared> {
    fn boxed<T: Serialize + 'static>(
        cfg: T,
        f: fn(&T) -> Result<Outputs>,
    ) -> Result<Prepared> {
        Ok(Prepared {
            echo: serde_json::to_value(&cfg)?,
            run: Box::new(move || f(&cfg)),
        })
    }
    match command {
        Command::Uncertainty => {
            let mut c: UncertaintyRun = parse(text)?;
            if let Some(s) = seed {
                c.apply_seed(s);
            }
            c.center |= center;
            c.validate()?;
            boxed(c, runs::uncertainty)
        }
        Command::Minimize => {
            let mut c: MinimizeConfig = parse(text)?;
            if let Some(s) = seed {
                config::seed_minimize(&mut c, s);
            }
            config::validate_minimize(&c)?;
            boxed(c, runs::minimize_run)
        }
        Command::Stability => {
            let mut c: StabilityRun = parse(text)?;
            if let Some(s) = seed {
                c.apply_seed(s);
            }
            c.validate()?;
            boxed(c, runs::stability)
        }
        Command::Evolve => {
            let mut c: EvolveRun = parse(text)?;
            if let Some(s) = seed {
                c.apply_seed(s);
            }
            c.validate()?;
            boxed(c, runs::evolve)
        }
        Command::Embed => {
            let mut c: EmbedRun = parse(text)?;
            c.materialize();
            if let Some(s) = seed {
                c.apply_seed(s);
            }
            c.validate()?;
            boxed(c, runs::embed)
        }
        Command::Sweep => {
            let c: SweepRun = parse(text)?;
            c.validate()?;
            boxed(c, runs::sweep)
        }
    }
}

/// Creates `<out>/<timestamp>-<name>`, adding `-2`, `-3`, ... on collision.
fn create_run_dir(out: &Path, stamp: &str, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let base = format!("{stamp}-{name}");
    for k in 1.. {
        let dir = if k == 1 {
            out.join(&base)
        } else {
            out.join(format!("{base}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("cannot create {}", dir.display())),
        }
    }
    unreachable!()
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s.into_bytes()
}

fn write_outputs(dir: &Path, name: &str, timestamp: &str, echo: &Value, out: Outputs) -> Result<()> {
    let mut files = out.files;
    files.push(("config.json".into(), pretty(echo)));
    files.push(("summary.json".into(), pretty(&out.summary)));
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut listed = Vec::new();
    for (file, bytes) in &files {
        fs::write(dir.join(file), bytes).with_context(|| format!("cannot write {file}"))?;
        listed.push(json!({
            "path": file,
            "bytes": bytes.len(),
            "sha256": hex::encode(Sha256::digest(bytes)),
        }));
    }
    let g = out.grid;
    let manifest = json!({
        "timestamp": timestamp,
        "subcommand": name,
        "version": concat!("fracup ", env!("CARGO_PKG_VERSION")),
        "config_echo": echo,
        "grid": {
            "n": g.dim(),
            "points": g.points(),
            "half_width": g.half_width(),
            "spacing": g.spacing(),
        },
        "seeds": out.seeds,
        "output_files": listed,
    });
    fs::write(dir.join("manifest.json"), pretty(&manifest)).context("cannot write manifest")
}

fn execute(cli: &Cli) -> std::result::Result<PathBuf, Failure> {
    let name = cli.command.name();
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Invalid(anyhow::anyhow!("--config <path> is required")))?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::Invalid)?;
    let prepared = prepare(cli.command, &text, cli.seed, cli.center).map_err(Failure::Invalid)?;

    let now = chrono::Utc::now();
    let dir = create_run_dir(&cli.out, &now.format("%Y%m%dT%H%M%SZ").to_string(), name)
        .map_err(Failure::Invalid)?;
    let timestamp = now.to_rfc3339();
    let result = (prepared.run)()
        .and_then(|out| write_outputs(&dir, name, &timestamp, &prepared.echo, out));
    if let Err(e) = result {
        let failure = Failure::classify(e);
        let _ = fs::write(dir.join("FAILED"), format!("{:#}\n", failure.error()));
        return Err(failure);
    }
    Ok(dir)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            if !cli.quiet {
                println!("{}", dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
