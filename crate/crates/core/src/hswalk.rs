//! Random walk in the dynamic environment `c_t(b) = V″(∇h_t(b))` and the
//! occupation-time and exit-law estimators of the field's covariance and mean.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harmonic::{harmonic_extend, Beta};
use crate::langevin::FieldState;
use crate::lattice::{check_len, LatticeDomain, Site};
use crate::potential::Potential;
use crate::rng::{derive_seed, stream_rng, SimRng};
use crate::stats::{mean_and_stderr, Estimate};

/// `20·R²/a_V`, the shortest environment horizon accepted for harvesting.
pub fn default_horizon(domain: &LatticeDomain, potential: &Potential) -> f64 {
    let r = f64::from(domain.diameter());
    20.0 * r * r / potential.a_lower()
}

struct Source {
    state: FieldState,
    rng: SimRng,
}

/// Piecewise-constant jump rates per interior site, in
/// [`crate::lattice::DIRECTIONS`] order: snapshot `k` holds on
/// `[k·spacing, (k+1)·spacing)`. A harvested environment extends itself by
/// running its field forward when a walk needs later snapshots.
pub struct EnvironmentTrajectory {
    domain: Arc<LatticeDomain>,
    spacing: f64,
    bound: f64,
    horizon: f64,
    snapshots: Vec<Vec<[f64; 4]>>,
    source: Option<Source>,
}

fn rates_of(state: &FieldState) -> Vec<[f64; 4]> {
    let domain = state.domain();
    let field = state.field();
    let p = state.potential();
    (0..domain.n_interior())
        .map(|k| {
            let nb = domain.neighbors(k);
            let c = field[k];
            [0, 1, 2, 3].map(|d| p.ddv(field[nb[d] as usize] - c))
        })
        .collect()
}

impl EnvironmentTrajectory {
    /// Time-independent rates on `[0, horizon)`.
    pub fn frozen(domain: Arc<LatticeDomain>, rates: Vec<[f64; 4]>, horizon: f64) -> Result<Self> {
        Self::from_snapshots(domain, f64::INFINITY, vec![rates]).map(|mut e| {
            e.horizon = horizon;
            e
        })
    }

    /// Fixed snapshots covering `[0, spacing·len)`.
    pub fn from_snapshots(domain: Arc<LatticeDomain>, spacing: f64, snapshots: Vec<Vec<[f64; 4]>>) -> Result<Self> {
        if snapshots.is_empty() || !(spacing > 0.0) {
            return Err(invalid("an environment needs a snapshot and a positive spacing"));
        }
        let mut bound: f64 = 0.0;
        for s in &snapshots {
            check_len(s, domain.n_interior())?;
            for r in s.iter().flatten() {
                if !(*r > 0.0) || !r.is_finite() {
                    return Err(invalid(format!("jump rate {r} is not positive")));
                }
                bound = bound.max(*r);
            }
        }
        let horizon = spacing * snapshots.len() as f64;
        Ok(EnvironmentTrajectory { domain, spacing, bound: 4.0 * bound, horizon, snapshots, source: None })
    }

    /// Lazily harvested environment of `state`, which should be stationary.
    /// Walks are flagged once they reach `horizon`.
    pub fn harvest(state: FieldState, rng: SimRng, spacing: f64, horizon: f64) -> Result<Self> {
        let min = default_horizon(state.domain(), state.potential());
        if horizon < min {
            return Err(invalid(format!("environment horizon {horizon} is below 20·R²/a_V = {min}")));
        }
        if !(spacing >= state.dt()) {
            return Err(invalid("snapshot spacing must be at least one time step"));
        }
        let snapshots = vec![rates_of(&state)];
        Ok(EnvironmentTrajectory {
            domain: state.domain().clone(),
            spacing,
            bound: 4.0 * state.potential().a_upper(),
            horizon,
            snapshots,
            source: Some(Source { state, rng }),
        })
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Snapshot times harvested so far.
    pub fn times(&self) -> Vec<f64> {
        (0..self.snapshots.len()).map(|k| k as f64 * self.spacing).collect()
    }

    pub fn snapshots(&self) -> &[Vec<[f64; 4]>] {
        &self.snapshots
    }

    /// Fixed environment with the snapshot order reversed.
    pub fn reversed(&self) -> Result<Self> {
        if self.source.is_some() {
            return Err(invalid("only fixed environments can be reversed"));
        }
        let mut snaps = self.snapshots.clone();
        snaps.reverse();
        let mut e = Self::from_snapshots(self.domain.clone(), self.spacing, snaps)?;
        e.horizon = self.horizon;
        Ok(e)
    }

    /// Advances the underlying field by `skip` past the last harvested
    /// snapshot and starts a fresh segment at time zero.
    pub fn restart(&mut self, skip: f64) -> Result<()> {
        let src = self.source.as_mut().ok_or_else(|| invalid("fixed environments cannot be restarted"))?;
        src.state.run(skip, &mut src.rng)?;
        self.snapshots = vec![rates_of(&src.state)];
        Ok(())
    }

    /// Rates in force at time `t`, or `None` past the horizon.
    pub fn rates_at(&mut self, t: f64) -> Result<Option<&[[f64; 4]]>> {
        if t >= self.horizon {
            return Ok(None);
        }
        let k = if self.spacing.is_infinite() { 0 } else { (t / self.spacing) as usize };
        while k >= self.snapshots.len() {
            match self.source.as_mut() {
                Some(src) => {
                    src.state.run(self.spacing, &mut src.rng)?;
                    self.snapshots.push(rates_of(&src.state));
                }
                None => return Ok(None),
            }
        }
        Ok(Some(&self.snapshots[k]))
    }
}

/// A walk from `start` to its exit from the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub start: Site,
    pub jump_times: Vec<f64>,
    /// `sites[0] = start`, then the site entered at each jump.
    pub sites: Vec<Site>,
    pub exit_time: Option<f64>,
    pub exit_site: Option<Site>,
    /// The environment ran out before the walk left the domain.
    pub flagged: bool,
}

enum Outcome {
    Exited { ext: usize },
    Flagged,
}

/// Thinning against `4·max rate`; `visit(k, t_enter, t_leave)` is called for
/// every holding interval, and `jump(t, ext)` for every accepted jump.
fn run_walk(
    env: &mut EnvironmentTrajectory,
    x0: usize,
    rng: &mut impl Rng,
    mut visit: impl FnMut(usize, f64, f64),
    mut jump: impl FnMut(f64, usize),
) -> Result<Outcome> {
    let n = env.domain.n_interior();
    let bound = env.bound;
    let (mut k, mut t, mut entered) = (x0, 0.0f64, 0.0f64);
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / bound;
        let Some(rates) = env.rates_at(t)? else {
            visit(k, entered, env.horizon);
            return Ok(Outcome::Flagged);
        };
        let row = rates[k];
        let u = rng.random::<f64>() * bound;
        let mut acc = 0.0;
        for (d, r) in row.iter().enumerate() {
            acc += r;
            if u < acc {
                let next = env.domain.neighbors(k)[d] as usize;
                visit(k, entered, t);
                jump(t, next);
                if next >= n {
                    return Ok(Outcome::Exited { ext: next });
                }
                k = next;
                entered = t;
                break;
            }
        }
    }
}

pub fn simulate_walk(env: &mut EnvironmentTrajectory, x0: Site, rng: &mut impl Rng) -> Result<WalkPath> {
    let k = env.domain.interior_index(x0).ok_or(Error::NotInterior(x0))?;
    let domain = env.domain.clone();
    let mut jump_times = Vec::new();
    let mut sites = vec![x0];
    let outcome = run_walk(
        env,
        k,
        rng,
        |_, _, _| {},
        |t, e| {
            jump_times.push(t);
            sites.push(domain.site(e));
        },
    )?;
    Ok(match outcome {
        Outcome::Exited { ext } => WalkPath {
            start: x0,
            exit_time: jump_times.last().copied(),
            exit_site: Some(domain.site(ext)),
            jump_times,
            sites,
            flagged: false,
        },
        Outcome::Flagged => WalkPath { start: x0, jump_times, sites, exit_time: None, exit_site: None, flagged: true },
    })
}

/// Time spent at `y` before exit; `None` if the walk was flagged.
pub fn occupation_time(env: &mut EnvironmentTrajectory, x0: Site, y: Site, rng: &mut impl Rng) -> Result<Option<f64>> {
    let k = env.domain.interior_index(x0).ok_or(Error::NotInterior(x0))?;
    let target = env.domain.interior_index(y);
    let mut occ = 0.0;
    let outcome = run_walk(
        env,
        k,
        rng,
        |s, a, b| {
            if Some(s) == target {
                occ += b - a;
            }
        },
        |_, _| {},
    )?;
    Ok(match outcome {
        Outcome::Exited { .. } => Some(occ),
        Outcome::Flagged => None,
    })
}

/// Extended index of the exit site; `None` if the walk was flagged.
pub fn exit_site(env: &mut EnvironmentTrajectory, x0: Site, rng: &mut impl Rng) -> Result<Option<usize>> {
    let k = env.domain.interior_index(x0).ok_or(Error::NotInterior(x0))?;
    Ok(match run_walk(env, k, rng, |_, _, _| {}, |_, _| {})? {
        Outcome::Exited { ext } => Some(ext),
        Outcome::Flagged => None,
    })
}

/// Settings for the stationary trajectories feeding the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsConfig {
    pub dt: f64,
    /// Burn-in per chain, in units of `R²`.
    pub burn_factor: f64,
    /// Field time skipped between consecutive segments, in units of `R²`.
    pub skip_factor: f64,
    pub spacing: f64,
    /// Environment horizon in units of `R²/a_V`; at least 20.
    pub horizon_factor: f64,
    /// Independent stationary chains the segments are split across.
    pub chains: usize,
    pub max_flagged_fraction: f64,
}

impl HsConfig {
    pub fn for_potential(p: &Potential) -> Self {
        HsConfig {
            dt: p.default_dt(),
            burn_factor: 20.0,
            skip_factor: 2.0,
            spacing: 0.5,
            horizon_factor: 20.0,
            chains: 4,
            max_flagged_fraction: 1e-3,
        }
    }
}

/// Estimator output with its per-segment (or per-node) values.
#[derive(Clone, Debug, Serialize)]
pub struct HsEstimate {
    pub estimate: Estimate,
    pub walks: usize,
    pub flagged: usize,
    pub batches: Vec<f64>,
}

/// Runs `n_traj` stationary segments split over `cfg.chains` chains and
/// evaluates `per_walk` on `walks_per_traj` walks from each.
#[allow(clippy::too_many_arguments)]
fn segment_means(
    domain: &Arc<LatticeDomain>,
    potential: &Arc<Potential>,
    boundary: &[f64],
    walks_per_traj: usize,
    n_traj: usize,
    cfg: &HsConfig,
    seed: u64,
    per_walk: &(dyn Fn(&mut EnvironmentTrajectory, &mut SimRng) -> Result<Option<f64>> + Sync),
) -> Result<(Vec<f64>, usize)> {
    if walks_per_traj == 0 || n_traj == 0 || cfg.chains == 0 {
        return Err(invalid("walks, trajectories and chains must be positive"));
    }
    if cfg.horizon_factor < 20.0 {
        return Err(invalid("environment horizon factor must be at least 20"));
    }
    let r2 = f64::from(domain.diameter()).powi(2);
    let horizon = cfg.horizon_factor * r2 / potential.a_lower();
    let chains = cfg.chains.min(n_traj);
    let start = harmonic_extend(domain, boundary, Beta::ISOTROPIC, 1e-10)?;
    let field_seed = derive_seed(seed, 0xF1E1D);
    let walk_seed = derive_seed(seed, 0x3A1C);

    let per_chain: Vec<Result<Vec<(f64, usize)>>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let segments: Vec<usize> = (c..n_traj).step_by(chains).collect();
            let mut rng = stream_rng(field_seed, c as u64);
            let mut state =
                FieldState::new(domain.clone(), potential.clone(), boundary, &start[..domain.n_interior()], cfg.dt)?;
            state.run(cfg.burn_factor * r2, &mut rng)?;
            let mut env = EnvironmentTrajectory::harvest(state, rng, cfg.spacing, horizon)?;
            let mut out = Vec::with_capacity(segments.len());
            for (i, &seg) in segments.iter().enumerate() {
                if i > 0 {
                    env.restart(cfg.skip_factor * r2)?;
                }
                let mut wrng = stream_rng(walk_seed, seg as u64);
                let (mut sum, mut ok, mut flagged) = (0.0, 0usize, 0usize);
                for _ in 0..walks_per_traj {
                    match per_walk(&mut env, &mut wrng)? {
                        Some(v) => {
                            sum += v;
                            ok += 1;
                        }
                        None => flagged += 1,
                    }
                }
                out.push((if ok > 0 { sum / ok as f64 } else { f64::NAN }, flagged));
            }
            Ok(out)
        })
        .collect();

    let mut means = vec![0.0; n_traj];
    let mut flagged = 0;
    for (c, res) in per_chain.into_iter().enumerate() {
        for (i, (m, f)) in res?.into_iter().enumerate() {
            means[c + i * chains] = m;
            flagged += f;
        }
    }
    let total = walks_per_traj * n_traj;
    if flagged as f64 > cfg.max_flagged_fraction * total as f64 {
        return Err(Error::TooManyFlagged { flagged, total });
    }
    Ok((means, flagged))
}

/// `Cov(h(x), h(y))` as the mean occupation time of `y` before exit for walks from `x`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_covariance(
    domain: &Arc<LatticeDomain>,
    potential: &Arc<Potential>,
    boundary: &[f64],
    x: Site,
    y: Site,
    walks_per_traj: usize,
    n_traj: usize,
    cfg: &HsConfig,
    seed: u64,
) -> Result<HsEstimate> {
    domain.interior_index(x).ok_or(Error::NotInterior(x))?;
    if domain.slot(y).is_none() {
        return Err(Error::UnknownSite(y));
    }
    let walk = |env: &mut EnvironmentTrajectory, rng: &mut SimRng| occupation_time(env, x, y, rng);
    let (means, flagged) = segment_means(domain, potential, boundary, walks_per_traj, n_traj, cfg, seed, &walk)?;
    Ok(HsEstimate { estimate: mean_and_stderr(&means), walks: walks_per_traj * n_traj, flagged, batches: means })
}

/// `E h^ψ(x) = ∫₀¹ E_x ψ(X_τ^{rψ}) dr` by the midpoint rule over `r_nodes` nodes.
#[allow(clippy::too_many_arguments)]
pub fn estimate_mean(
    domain: &Arc<LatticeDomain>,
    potential: &Arc<Potential>,
    psi: &[f64],
    x: Site,
    r_nodes: usize,
    walks_per_traj: usize,
    n_traj: usize,
    cfg: &HsConfig,
    seed: u64,
) -> Result<HsEstimate> {
    check_len(psi, domain.n_boundary())?;
    domain.interior_index(x).ok_or(Error::NotInterior(x))?;
    if r_nodes < 2 {
        return Err(invalid("at least two quadrature nodes are required"));
    }
    let n = domain.n_interior();
    let mut node_values = Vec::with_capacity(r_nodes);
    let mut var = 0.0;
    let mut flagged = 0;
    for m in 0..r_nodes {
        let r = (m as f64 + 0.5) / r_nodes as f64;
        if psi.iter().all(|&v| v == 0.0) {
            node_values.push(0.0);
            continue;
        }
        let scaled: Vec<f64> = psi.iter().map(|v| r * v).collect();
        let walk = |env: &mut EnvironmentTrajectory, rng: &mut SimRng| Ok(exit_site(env, x, rng)?.map(|e| psi[e - n]));
        let (means, f) =
            segment_means(domain, potential, &scaled, walks_per_traj, n_traj, cfg, derive_seed(seed, m as u64), &walk)?;
        let est = mean_and_stderr(&means);
        node_values.push(est.value);
        var += est.stderr * est.stderr;
        flagged += f;
    }
    let k = r_nodes as f64;
    let value = node_values.iter().sum::<f64>() / k;
    Ok(HsEstimate {
        estimate: Estimate { value, stderr: var.sqrt() / k },
        walks: walks_per_traj * n_traj * r_nodes,
        flagged,
        batches: node_values,
    })
}
