//! `glsim`: command-line driver for the gradient-field experiments.
//!
//! Every run writes CSV tables, `summary.json` and `manifest.json` into the
//! output directory. Exit status: 0 when every verdict passes, 1 when some
//! verdict fails, 2 on invalid input or a runtime error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use config::Settings;
use output::{write_manifest, write_outputs, Manifest, RunOutput};

#[derive(Parser, Debug)]
#[command(name = "glsim", version, about = "Langevin, random-walk and Gaussian experiments for gradient fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON document with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Stationary Langevin samples. samples.csv: sample, time, h_centre, mean_h, gradient_energy.
    Sample,
    /// Exact Gaussian free field draws. samples.csv: sample, h_I_J per interior site.
    Dgff,
    /// Random-walk covariance and mean at the centre. segments.csv: estimator, index, value.
    Hs,
    /// Torus gradients and the tilt estimate. eta.csv: sample, ddv_horizontal, ddv_vertical, eta_horizontal, eta_vertical.
    Gibbs,
    /// Fluctuation functional ξ(g). xi.csv: sample, xi_<test> per test function.
    Clt,
    /// Coupled chains with two boundary conditions. replicas.csv: size, replica, deviation, residual.
    Coupling,
    /// Harmonicity of the mean field. replicas.csv: size, replica, deviation, max_stderr, budget, ratio, underpowered.
    MeanHarm,
    /// Relative entropy bound. terms.csv: term, value, stderr.
    Entropy,
    /// Variance bound against the Gaussian comparison. cases.csv: case, variance, stderr, bound, passed.
    Bl,
    /// Escape probabilities past a half-line. escape.csv: d, p_hat, stderr, exact.
    Beurling,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Dgff => "dgff",
            Command::Hs => "hs",
            Command::Gibbs => "gibbs",
            Command::Clt => "clt",
            Command::Coupling => "coupling",
            Command::MeanHarm => "mean-harm",
            Command::Entropy => "entropy",
            Command::Bl => "bl",
            Command::Beurling => "beurling",
        }
    }

    fn run(self, s: &Settings) -> Result<RunOutput> {
        match self {
            Command::Sample => commands::sample(s),
            Command::Dgff => commands::dgff(s),
            Command::Hs => commands::hs(s),
            Command::Gibbs => commands::gibbs(s),
            Command::Clt => commands::clt(s),
            Command::Coupling => commands::coupling(s),
            Command::MeanHarm => commands::mean_harm(s),
            Command::Entropy => commands::entropy(s),
            Command::Bl => commands::bl(s),
            Command::Beurling => commands::beurling(s),
        }
    }
}

fn execute(cli: &Cli, out_dir: &mut PathBuf) -> Result<bool> {
    let start = Instant::now();
    let name = cli.command.name();
    let layered = config::load(cli.config.as_deref(), &cli.settings, name)?;
    let s = &layered.merged;
    if let Some(dir) = &s.out {
        *out_dir = dir.clone();
    }
    if let Some(t) = s.threads {
        if t == 0 {
            anyhow::bail!("threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let result = cli.command.run(s)?;
    let outputs = write_outputs(out_dir, name, &result)?;
    for v in &result.verdicts {
        println!("{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    let manifest = Manifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        passed: result.passed(),
        config_file: cli.config.clone(),
        from_config_file: Value::Object(layered.file),
        from_flags: Value::Object(layered.flags),
        resolved: result.resolved.clone(),
        seeds: result.seeds.clone(),
        outputs,
    };
    write_manifest(out_dir, &manifest)?;
    println!("outputs written to {}", out_dir.display());
    Ok(result.passed())
}

fn report_error(dir: &Path, command: &str, err: &anyhow::Error) {
    let chain: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
    let doc = json!({ "command": command, "error": err.to_string(), "causes": chain });
    eprintln!("{doc}");
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = std::fs::write(dir.join("error.json"), serde_json::to_vec_pretty(&doc).unwrap_or_default());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out_dir = cli.settings.out.clone().unwrap_or_else(|| PathBuf::from("glsim-out"));
    match execute(&cli, &mut out_dir) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report_error(&out_dir, cli.command.name(), &e);
            ExitCode::from(2)
        }
    }
}
