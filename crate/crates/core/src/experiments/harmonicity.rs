//! Harmonicity of the mean field and of coupled differences on inner regions.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{r_squared, BoundarySpec, ChainPlan};
use crate::error::{invalid, Result};
use crate::harmonic::{factor_precision, harmonic_extend_weighted, Beta, BondWeights, SolveOptions};
use crate::langevin::{burn_in_coupling, BurnInDiagnostic, CouplingState, FieldState};
use crate::lattice::LatticeDomain;
use crate::linalg::BandedCholesky;
use crate::potential::Potential;
use crate::rng::{derive_seed, stream_rng};
use crate::stats::median;

/// `Δ^β`-harmonic extension on an inner region `D(r)` of an outer domain,
/// factored once and reused.
pub(crate) struct InnerExtension {
    inner: LatticeDomain,
    weights: BondWeights,
    factor: BandedCholesky,
    /// Outer extended index of every inner site, interior then boundary.
    map: Vec<usize>,
}

impl InnerExtension {
    pub(crate) fn new(outer: &LatticeDomain, r: f64, beta: Beta) -> Result<Self> {
        let inner = outer.inner_region(r)?;
        if inner.is_empty() {
            return Err(invalid(format!("inner region D({r}) is empty")));
        }
        let weights = BondWeights::from_beta(&inner, beta);
        let factor = factor_precision(&inner, &weights)?;
        let map = inner
            .interior()
            .iter()
            .chain(inner.boundary())
            .map(|&s| outer.ext_index(s).ok_or(crate::error::Error::UnknownSite(s)))
            .collect::<Result<_>>()?;
        Ok(InnerExtension { inner, weights, factor, map })
    }

    pub(crate) fn n_inner(&self) -> usize {
        self.inner.n_interior()
    }

    /// `f − ĥ` on the interior of `D(r)`, where `ĥ` extends `f|∂D(r)`.
    pub(crate) fn defect(&self, f: &[f64]) -> Vec<f64> {
        let n = self.inner.n_interior();
        let mut rhs = vec![0.0; n];
        for (k, r) in rhs.iter_mut().enumerate() {
            for (d, &nb) in self.inner.neighbors(k).iter().enumerate() {
                if nb as usize >= n {
                    *r += self.weights.per_site()[k][d] * f[self.map[nb as usize]];
                }
            }
        }
        self.factor.solve(&mut rhs);
        (0..n).map(|k| f[self.map[k]] - rhs[k]).collect()
    }
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Debug)]
pub struct MeanHarmonicConfig {
    /// Side lengths `R`; the domain is the `R × R` square.
    pub sizes: Vec<usize>,
    pub potential: Arc<Potential>,
    pub tilt: [f64; 2],
    pub boundary: BoundarySpec,
    pub beta: Beta,
    /// `D(r)` uses `r = r_fraction·R`.
    pub r_fraction: f64,
    /// Recorded configurations per replica.
    pub n_samples: usize,
    /// EM steps between recorded configurations.
    pub record_every: u64,
    pub batches: usize,
    pub replicas: usize,
    /// Uses the pair `(ψ, −ψ)` under shared noise; needs zero tilt.
    pub antithetic: bool,
    pub plan: ChainPlan,
    pub seed: u64,
}

impl MeanHarmonicConfig {
    pub fn new(sizes: Vec<usize>, potential: Arc<Potential>) -> Self {
        let plan = ChainPlan::new(&potential);
        MeanHarmonicConfig {
            sizes,
            potential,
            tilt: [0.0, 0.0],
            boundary: BoundarySpec::Sine { amplitude: 0.5, waves: 1.0 },
            beta: Beta::ISOTROPIC,
            r_fraction: 0.25,
            n_samples: 2000,
            record_every: 10,
            batches: 20,
            replicas: 4,
            antithetic: false,
            plan,
            seed: 0,
        }
    }
}

/// One replica's deviation `max_{D(r)} |Ê h − ĥ|` and its error budget
/// `max_x SE(x)·√(2 ln 2n)`, `n = |D(r)|`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReplicaDeviation {
    pub deviation: f64,
    pub max_stderr: f64,
    pub budget: f64,
    pub ratio: f64,
    /// Budget larger than half the deviation.
    pub underpowered: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanHarmonicSize {
    pub size: usize,
    pub r: f64,
    pub n_inner: usize,
    pub replicas: Vec<ReplicaDeviation>,
    pub median_deviation: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanHarmonicReport {
    pub potential: String,
    pub sizes: Vec<MeanHarmonicSize>,
}

impl MeanHarmonicReport {
    /// Median deviation strictly decreasing along the size list.
    pub fn deviation_decreasing(&self) -> bool {
        self.sizes.windows(2).all(|w| w[1].median_deviation < w[0].median_deviation)
    }
}

pub fn mean_harmonic_experiment(cfg: &MeanHarmonicConfig) -> Result<MeanHarmonicReport> {
    cfg.plan.validate(&cfg.potential)?;
    if cfg.antithetic && cfg.tilt != [0.0, 0.0] {
        return Err(invalid("antithetic pairs need zero tilt"));
    }
    if cfg.batches < 2 || cfg.n_samples < cfg.batches || cfg.replicas == 0 || cfg.record_every == 0 {
        return Err(invalid("need batches ≥ 2, n_samples ≥ batches, replicas ≥ 1, record_every ≥ 1"));
    }
    let jobs: Vec<(usize, usize)> =
        cfg.sizes.iter().enumerate().flat_map(|(i, _)| (0..cfg.replicas).map(move |k| (i, k))).collect();
    let setups: Vec<(Arc<LatticeDomain>, Vec<f64>, InnerExtension, f64)> = cfg
        .sizes
        .iter()
        .map(|&size| {
            let domain = Arc::new(LatticeDomain::build_rectangle(size, size)?);
            let bd = cfg.boundary.values(&domain, cfg.tilt);
            let r = cfg.r_fraction * size as f64;
            let ext = InnerExtension::new(&domain, r, cfg.beta)?;
            Ok((domain, bd, ext, r))
        })
        .collect::<Result<_>>()?;
    let results: Vec<ReplicaDeviation> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (domain, bd, ext, _) = &setups[i];
            mean_replica(cfg, domain, bd, ext, derive_seed(cfg.seed, cfg.sizes[i] as u64), k as u64)
        })
        .collect::<Result<_>>()?;
    let sizes = cfg
        .sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let reps: Vec<ReplicaDeviation> = results[i * cfg.replicas..(i + 1) * cfg.replicas].to_vec();
            let devs: Vec<f64> = reps.iter().map(|r| r.deviation).collect();
            let ratios: Vec<f64> = reps.iter().map(|r| r.ratio).collect();
            MeanHarmonicSize {
                size,
                r: setups[i].3,
                n_inner: setups[i].2.n_inner(),
                median_deviation: median(&devs),
                median_ratio: median(&ratios),
                max_ratio: ratios.iter().copied().fold(0.0, f64::max),
                replicas: reps,
            }
        })
        .collect();
    Ok(MeanHarmonicReport { potential: cfg.potential.name().to_string(), sizes })
}

fn harmonic_start(domain: &LatticeDomain, bd: &[f64]) -> Result<Vec<f64>> {
    let h = harmonic_extend_weighted(domain, &BondWeights::uniform(domain, 1.0), bd, SolveOptions::default())?;
    Ok(h[..domain.n_interior()].to_vec())
}

fn mean_replica(
    cfg: &MeanHarmonicConfig,
    domain: &Arc<LatticeDomain>,
    bd: &[f64],
    ext: &InnerExtension,
    seed: u64,
    replica: u64,
) -> Result<ReplicaDeviation> {
    let mut rng = stream_rng(seed, replica);
    let mut comps =
        vec![FieldState::new(domain.clone(), cfg.potential.clone(), bd, &harmonic_start(domain, bd)?, cfg.plan.dt)?];
    if cfg.antithetic {
        let neg: Vec<f64> = bd.iter().map(|v| -v).collect();
        comps.push(FieldState::new(
            domain.clone(),
            cfg.potential.clone(),
            &neg,
            &harmonic_start(domain, &neg)?,
            cfg.plan.dt,
        )?);
    }
    let mut chain = CouplingState::new(comps)?;
    chain.run(cfg.plan.burn_time(domain), &mut rng)?;

    let n = domain.n_interior();
    let per_batch = cfg.n_samples / cfg.batches;
    let mut batch_defects: Vec<Vec<f64>> = Vec::with_capacity(cfg.batches);
    let mut acc = vec![0.0; n];
    for _ in 0..cfg.batches {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..per_batch {
            for _ in 0..cfg.record_every {
                chain.coupled_step(&mut rng)?;
            }
            if cfg.antithetic {
                let (a, b) = (chain.component(0).values(), chain.component(1).values());
                for k in 0..n {
                    acc[k] += 0.5 * (a[k] - b[k]);
                }
            } else {
                for (s, v) in acc.iter_mut().zip(chain.component(0).values()) {
                    *s += v;
                }
            }
        }
        let mut mean_field: Vec<f64> = acc.iter().map(|a| a / per_batch as f64).collect();
        mean_field.extend_from_slice(bd);
        batch_defects.push(ext.defect(&mean_field));
    }
    // The defect is linear in the field, so the batch average of defects is
    // the defect of the overall mean.
    let b = cfg.batches as f64;
    let m = ext.n_inner();
    let mut deviation = 0.0f64;
    let mut max_stderr = 0.0f64;
    for x in 0..m {
        let mean = batch_defects.iter().map(|d| d[x]).sum::<f64>() / b;
        let var = batch_defects.iter().map(|d| (d[x] - mean).powi(2)).sum::<f64>() / (b - 1.0);
        deviation = deviation.max(mean.abs());
        max_stderr = max_stderr.max((var / b).sqrt());
    }
    let budget = max_stderr * (2.0 * (2.0 * m as f64).ln()).sqrt();
    Ok(ReplicaDeviation {
        deviation,
        max_stderr,
        budget,
        ratio: deviation / budget,
        underpowered: budget > 0.5 * deviation,
    })
}

#[derive(Clone, Debug)]
pub struct CouplingConfig {
    pub sizes: Vec<usize>,
    pub potential: Arc<Potential>,
    pub tilt: [f64; 2],
    pub psi: BoundarySpec,
    pub psi_tilde: BoundarySpec,
    pub beta: Beta,
    pub r_fraction: f64,
    /// Threshold as a fraction of `osc(ψ − ψ̃)`.
    pub eps_fraction: f64,
    pub replicas: usize,
    /// Time between replica snapshots of one chain, in units of `R²`.
    pub spacing_factor: f64,
    pub plan: ChainPlan,
    pub seed: u64,
}

impl CouplingConfig {
    pub fn new(sizes: Vec<usize>, potential: Arc<Potential>) -> Self {
        let plan = ChainPlan { burn_factor: 2.0, ..ChainPlan::new(&potential) };
        CouplingConfig {
            sizes,
            potential,
            tilt: [0.0, 0.0],
            psi: BoundarySpec::Sine { amplitude: 1.0, waves: 1.0 },
            psi_tilde: BoundarySpec::Tilt,
            beta: Beta::ISOTROPIC,
            r_fraction: 0.25,
            eps_fraction: 0.1,
            replicas: 20,
            spacing_factor: 0.25,
            plan,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingSize {
    pub size: usize,
    pub r: f64,
    pub eps: f64,
    pub deviations: Vec<f64>,
    /// `max_D |h̄ − H|` per replica, `H` the harmonic extension of `ψ − ψ̃` to all of `D`.
    pub residuals: Vec<f64>,
    pub exceedance: f64,
    pub median_deviation: f64,
    pub burn_in: Vec<BurnInDiagnostic>,
    pub burn_in_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CouplingReport {
    pub potential: String,
    pub sizes: Vec<CouplingSize>,
}

impl CouplingReport {
    pub fn exceedance_decreasing(&self) -> bool {
        self.sizes.windows(2).all(|w| w[1].exceedance < w[0].exceedance)
    }
}

/// Burn-in check on a third component with boundary `ψ`, started from the
/// first plus a ground-mode bump: its gradient-energy gap to the first must decay and end
/// below `1e−6` of the value at the start.
const BURN_DECAY: f64 = 1e-6;

pub fn coupling_experiment(cfg: &CouplingConfig) -> Result<CouplingReport> {
    cfg.plan.validate(&cfg.potential)?;
    if cfg.replicas == 0 || !(cfg.eps_fraction > 0.0) || !(cfg.spacing_factor > 0.0) {
        return Err(invalid("need replicas ≥ 1, ε > 0 and positive spacing"));
    }
    let chains = cfg.plan.chains.max(1);
    let jobs: Vec<(usize, usize)> = (0..cfg.sizes.len()).flat_map(|i| (0..chains).map(move |c| (i, c))).collect();
    let setups = cfg
        .sizes
        .iter()
        .map(|&size| {
            let domain = Arc::new(LatticeDomain::build_rectangle(size, size)?);
            let r = cfg.r_fraction * size as f64;
            let ext = InnerExtension::new(&domain, r, cfg.beta)?;
            let psi = cfg.psi.values(&domain, cfg.tilt);
            let psi_t = cfg.psi_tilde.values(&domain, cfg.tilt);
            let diff: Vec<f64> = psi.iter().zip(&psi_t).map(|(a, b)| a - b).collect();
            let full = harmonic_extend_weighted(
                &domain,
                &BondWeights::uniform(&domain, 1.0),
                &diff,
                SolveOptions::with_tol(1e-13),
            )?;
            Ok((domain, ext, psi, psi_t, diff, full, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<ChainOutcome> = jobs
        .par_iter()
        .map(|&(i, c)| {
            let (domain, ext, psi, psi_t, _, full, _) = &setups[i];
            let count = super::chain_shares(cfg.replicas, chains)[c];
            coupling_chain(
                cfg,
                domain,
                ext,
                psi,
                psi_t,
                full,
                count,
                derive_seed(cfg.seed, cfg.sizes[i] as u64),
                c as u64,
            )
        })
        .collect::<Result<_>>()?;
    let mut sizes = Vec::with_capacity(cfg.sizes.len());
    for (i, &size) in cfg.sizes.iter().enumerate() {
        let (_, _, _, _, diff, _, r) = &setups[i];
        let osc =
            diff.iter().copied().fold(f64::NEG_INFINITY, f64::max) - diff.iter().copied().fold(f64::INFINITY, f64::min);
        let eps = cfg.eps_fraction * osc;
        let mut deviations = Vec::new();
        let mut residuals = Vec::new();
        let mut burn_in = Vec::new();
        let mut burn_in_ok = true;
        for (snaps, diag, start_energy) in &outcomes[i * chains..(i + 1) * chains] {
            for &(d, res) in snaps {
                deviations.push(d);
                residuals.push(res);
            }
            burn_in_ok &= diag.decayed() && diag.final_energy <= BURN_DECAY * start_energy;
            burn_in.push(diag.clone());
        }
        let exceed = deviations.iter().filter(|&&d| d > eps).count();
        sizes.push(CouplingSize {
            size,
            r: *r,
            eps,
            exceedance: exceed as f64 / deviations.len() as f64,
            median_deviation: median(&deviations),
            deviations,
            residuals,
            burn_in,
            burn_in_ok,
        });
    }
    Ok(CouplingReport { potential: cfg.potential.name().to_string(), sizes })
}

/// `(deviation, residual)` per snapshot, the burn-in diagnostic and the initial gap energy.
type ChainOutcome = (Vec<(f64, f64)>, BurnInDiagnostic, f64);

#[allow(clippy::too_many_arguments)]
fn coupling_chain(
    cfg: &CouplingConfig,
    domain: &Arc<LatticeDomain>,
    ext: &InnerExtension,
    psi: &[f64],
    psi_t: &[f64],
    full: &[f64],
    count: usize,
    seed: u64,
    chain: u64,
) -> Result<ChainOutcome> {
    let mut rng = stream_rng(seed, chain);
    let p = &cfg.potential;
    let start = harmonic_start(domain, psi)?;
    let r = f64::from(domain.diameter()) + 1.0;
    let bumped: Vec<f64> = domain
        .interior()
        .iter()
        .zip(&start)
        .map(|(s, v)| v + (PI * f64::from(s.i + 1) / r).sin() * (PI * f64::from(s.j + 1) / r).sin())
        .collect();
    let comps = vec![
        FieldState::new(domain.clone(), p.clone(), psi, &start, cfg.plan.dt)?,
        FieldState::new(domain.clone(), p.clone(), psi, &bumped, cfg.plan.dt)?,
        FieldState::new(domain.clone(), p.clone(), psi_t, &harmonic_start(domain, psi_t)?, cfg.plan.dt)?,
    ];
    let mut coupling = CouplingState::new(comps)?;
    let start_energy = gap_energy(&coupling);
    let diag = burn_in_coupling(&mut coupling, cfg.plan.burn_time(domain), &mut rng)?;
    let mut parts = coupling.into_components();
    parts.remove(1);
    let mut coupling = CouplingState::new(parts)?;
    let spacing = cfg.spacing_factor * r_squared(domain);
    let mut snaps = Vec::with_capacity(count);
    for _ in 0..count {
        coupling.run(spacing, &mut rng)?;
        let hbar = coupling.difference_field(0, 1);
        let deviation = max_abs(&ext.defect(&hbar));
        let residual = hbar.iter().zip(full).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        snaps.push((deviation, residual));
    }
    Ok((snaps, diag, start_energy))
}

fn gap_energy(c: &CouplingState) -> f64 {
    let f = c.difference_field(0, 1);
    c.domain().interior_bonds().iter().map(|b| (f[b.head as usize] - f[b.tail as usize]).powi(2)).sum()
}
