//! Run settings: JSON config file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use glsim_core::experiments::{BoundarySpec, CltSampler};
use glsim_core::{LatticeDomain, Potential};

/// Every tunable of a run. Each field can come from the `--config` document
/// (same name, snake_case) or from the matching flag; flags win.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Subcommand the document is meant for; checked against the one invoked.
    #[arg(skip)]
    pub command: Option<String>,

    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// `rect:WxH` or `disk:RADIUS`.
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// `quadratic` or `cosine`.
    #[arg(long, global = true)]
    pub potential: Option<String>,
    /// Tilt `u1,u2`.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    pub tilt: Option<Vec<f64>>,
    /// `tilt`, `sine:AMPLITUDE:WAVES` or `constant:VALUE`, added to the tilt.
    #[arg(long, global = true, value_parser = parse_boundary)]
    pub boundary: Option<BoundarySpec>,
    /// Second boundary condition (coupling, entropy), same syntax.
    #[arg(long, global = true, value_parser = parse_boundary)]
    pub boundary_tilde: Option<BoundarySpec>,

    /// Euler–Maruyama step; must not exceed `1/(8·A_V)`.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Burn-in in units of `R²`.
    #[arg(long, global = true)]
    pub burn: Option<f64>,
    /// Thinning gap in units of `R²` (EM steps for Langevin samplers).
    #[arg(long, global = true)]
    pub thin: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Independent stationary chains.
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    /// Batches for batch-means error bars.
    #[arg(long, global = true)]
    pub batches: Option<usize>,

    /// Square side lengths `R` (coupling, mean-harm, entropy).
    #[arg(long, global = true, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Lattice scale `n` of the CLT (domain is the `(n−1)²` square).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Torus side (gibbs).
    #[arg(long, global = true)]
    pub side: Option<usize>,
    /// Inner region `D(r)` with `r = r_fraction·R`.
    #[arg(long, global = true)]
    pub r_fraction: Option<f64>,
    /// Coupling threshold as a fraction of `osc(ψ − ψ̃)`.
    #[arg(long, global = true)]
    pub eps_fraction: Option<f64>,
    /// Time between coupling snapshots in units of `R²`.
    #[arg(long, global = true)]
    pub spacing: Option<f64>,
    /// EM steps between recorded configurations (mean-harm).
    #[arg(long, global = true)]
    pub record_every: Option<u64>,
    /// Antithetic `(ψ, −ψ)` pairs (mean-harm, zero tilt only).
    #[arg(long, global = true)]
    pub antithetic: Option<bool>,
    /// Test functions `PxQ` for `sin(pπx)sin(qπy)` (clt).
    #[arg(long, global = true, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,
    /// Boundary function `affine:C0:C1:C2` for `c0 + c1·x + c2·y` on the unit square (clt).
    #[arg(long, global = true)]
    pub boundary_fn: Option<String>,
    /// Weights `a1,a2` (clt); estimated on a torus when absent.
    #[arg(long, global = true, value_delimiter = ',', num_args = 2)]
    pub beta: Option<Vec<f64>>,
    /// `langevin` or `exact-gaussian` (clt).
    #[arg(long, global = true, value_parser = parse_sampler)]
    pub sampler: Option<CltSampler>,
    /// Walks (hs: per trajectory; beurling: total).
    #[arg(long, global = true)]
    pub walks: Option<usize>,
    /// Ball radius (beurling).
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Start-to-obstacle distances (beurling).
    #[arg(long, global = true, value_delimiter = ',')]
    pub distances: Option<Vec<u32>>,
}

fn parse_boundary(s: &str) -> Result<BoundarySpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    match parts.as_slice() {
        ["tilt"] => Ok(BoundarySpec::Tilt),
        ["sine", a, k] => Ok(BoundarySpec::Sine { amplitude: num(a)?, waves: num(k)? }),
        ["constant", c] => Ok(BoundarySpec::Constant { value: num(c)? }),
        _ => Err(format!("expected tilt, sine:A:K or constant:C, got {s:?}")),
    }
}

fn parse_sampler(s: &str) -> Result<CltSampler, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| format!("unknown sampler {s:?}"))
}

fn non_null(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

/// Settings as read from the config file and from flags, and the overlay.
#[derive(Clone, Debug)]
pub struct Layered {
    pub file: Map<String, Value>,
    pub flags: Map<String, Value>,
    pub merged: Settings,
}

pub fn load(path: Option<&Path>, flags: &Settings, command: &str) -> Result<Layered> {
    let file_settings = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str::<Settings>(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => Settings::default(),
    };
    if let Some(c) = &file_settings.command {
        if c != command {
            bail!("config document is for `{c}` but `{command}` was invoked");
        }
    }
    let file = non_null(serde_json::to_value(&file_settings)?);
    let flag_map = non_null(serde_json::to_value(flags)?);
    let mut merged = file.clone();
    merged.extend(flag_map.clone());
    merged.insert("command".into(), Value::String(command.into()));
    let merged: Settings = serde_json::from_value(Value::Object(merged))?;
    Ok(Layered { file, flags: flag_map, merged })
}

impl Settings {
    pub fn potential(&self, default: &str) -> Result<Potential> {
        Ok(Potential::by_name(self.potential.as_deref().unwrap_or(default))?)
    }

    pub fn tilt(&self) -> Result<[f64; 2]> {
        match self.tilt.as_deref() {
            None => Ok([0.0, 0.0]),
            Some([a, b]) if a.is_finite() && b.is_finite() => Ok([*a, *b]),
            Some(t) => bail!("tilt needs two finite components, got {t:?}"),
        }
    }

    /// Step size, checked against the stability cap of `p`.
    pub fn dt(&self, p: &Potential) -> Result<f64> {
        self.dt_or(p, p.default_dt())
    }

    pub fn dt_or(&self, p: &Potential, default: f64) -> Result<f64> {
        let dt = self.dt.unwrap_or(default);
        let cap = p.max_stable_dt();
        if !(dt > 0.0) || !dt.is_finite() {
            bail!("dt must be positive, got {dt}");
        }
        if dt > cap {
            bail!(
                "dt = {dt} exceeds the stability cap 1/(8·A_V) = {cap:.6} of the {} potential (A_V = {})",
                p.name(),
                p.a_upper()
            );
        }
        Ok(dt)
    }

    pub fn positive(value: Option<f64>, default: f64, name: &str) -> Result<f64> {
        let v = value.unwrap_or(default);
        if !(v > 0.0) || !v.is_finite() {
            bail!("{name} must be positive, got {v}");
        }
        Ok(v)
    }

    pub fn count(value: Option<usize>, default: usize, name: &str) -> Result<usize> {
        let v = value.unwrap_or(default);
        if v == 0 {
            bail!("{name} must be at least 1");
        }
        Ok(v)
    }

    pub fn domain(&self, default: &str) -> Result<LatticeDomain> {
        parse_domain(self.domain.as_deref().unwrap_or(default))
    }
}

pub fn parse_domain(spec: &str) -> Result<LatticeDomain> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| anyhow!("domain {spec:?}: expected rect:WxH or disk:R"))?;
    match kind {
        "rect" => {
            let (w, h) = rest.split_once('x').ok_or_else(|| anyhow!("domain {spec:?}: expected rect:WxH"))?;
            Ok(LatticeDomain::build_rectangle(w.parse()?, h.parse()?)?)
        }
        "disk" => Ok(LatticeDomain::build_disk(rest.parse()?)?),
        _ => bail!("domain {spec:?}: unknown kind {kind:?}"),
    }
}
