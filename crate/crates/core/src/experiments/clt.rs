//! Gaussian fluctuations of the gradient functional `ξ(g)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chain_shares, stationary_samples, xi_coefficients, xi_functional_on, ChainPlan, Embedding, TestFunction};
use crate::dgff::build_sampler;
use crate::error::{invalid, Result};
use crate::harmonic::{factor_precision, harmonic_extend_weighted, Beta, BondWeights, SolveOptions};
use crate::lattice::{BondSet, LatticeDomain};
use crate::potential::{Builtin, Potential};
use crate::rng::stream_rng;
use crate::stats::{
    autocorrelation, batch_means, ks_fitted_normal, normality, variance_estimate, Estimate, KsTest, Normality,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CltSampler {
    #[default]
    Langevin,
    /// Exact Gaussian draws; quadratic potential only.
    ExactGaussian,
}

#[derive(Clone, Debug)]
pub struct CltConfig {
    /// Lattice scale: `D_n` is the `(n−1)×(n−1)` square, embedded with mesh `1/n`.
    pub n: usize,
    pub potential: Arc<Potential>,
    pub tilt: [f64; 2],
    /// Boundary perturbation `f` on top of the tilt; `None` means `f = 0`.
    pub boundary: Option<TestFunction>,
    /// The weights `a_u`, one per orientation.
    pub beta: Beta,
    pub tests: Vec<TestFunction>,
    pub n_samples: usize,
    pub plan: ChainPlan,
    pub sampler: CltSampler,
    pub bonds: BondSet,
    pub batches: usize,
    pub seed: u64,
}

impl CltConfig {
    pub fn new(n: usize, potential: Arc<Potential>) -> Self {
        let plan = ChainPlan::new(&potential);
        CltConfig {
            n,
            potential,
            tilt: [0.0, 0.0],
            boundary: None,
            beta: Beta::ISOTROPIC,
            tests: vec![TestFunction::sine_product(1, 1), TestFunction::sine_product(2, 1)],
            n_samples: 5000,
            plan,
            sampler: CltSampler::Langevin,
            bonds: BondSet::InteriorAndCrossing,
            batches: 50,
            seed: 0,
        }
    }
}

/// Summary of `ξ(g)` for one test function.
#[derive(Clone, Debug, Serialize)]
pub struct XiStats {
    pub name: String,
    #[serde(skip)]
    pub samples: Vec<f64>,
    pub mean: Estimate,
    /// `Σ_b β(b) ∇g(b) ∇F(b)` with `F` the `Δ^β`-harmonic extension of `f`.
    pub mean_target: f64,
    pub variance: Estimate,
    pub normality: Normality,
    /// KS test against the normal law with fitted mean and variance.
    pub ks: KsTest,
    /// `(g,g)_∇^β` on the unit square.
    pub dirichlet: f64,
    /// `Var ξ / (g,g)_∇^β`.
    pub ratio: Estimate,
    /// `νᵀ(−Δ)⁻¹ν` for the quadratic potential.
    pub oracle_variance: Option<f64>,
    pub lag1: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub n: usize,
    pub n_samples: usize,
    pub potential: String,
    pub beta: Beta,
    pub stats: Vec<XiStats>,
    /// Every lag-1 autocorrelation is at most 0.1.
    pub decorrelated: bool,
}

impl CltReport {
    /// `max r / min r − 1` over the variance ratios.
    pub fn ratio_spread(&self) -> f64 {
        let rs = self.stats.iter().map(|s| s.ratio.value);
        let (lo, hi) = rs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        hi / lo - 1.0
    }
}

pub fn clt_experiment(cfg: &CltConfig) -> Result<CltReport> {
    if cfg.n < 3 {
        return Err(invalid("lattice scale n must be at least 3"));
    }
    if cfg.tests.is_empty() || cfg.n_samples < 8 {
        return Err(invalid("need at least one test function and 8 samples"));
    }
    let quadratic = cfg.potential.builtin() == Some(Builtin::Quadratic);
    let domain = Arc::new(LatticeDomain::build_rectangle(cfg.n - 1, cfg.n - 1)?);
    let emb = Embedding::bounding_box(&domain)?;
    let [u1, u2] = cfg.tilt;
    let phi = domain.field_from_fn(|s| u1 * f64::from(s.i) + u2 * f64::from(s.j));
    let f_vals = domain.boundary_from_fn(|s| match &cfg.boundary {
        Some(f) => {
            let (x, y) = emb.point(s);
            f.value(x, y)
        }
        None => 0.0,
    });
    let nb = domain.n_interior();
    let boundary: Vec<f64> = phi[nb..].iter().zip(&f_vals).map(|(a, b)| a + b).collect();
    let gs: Vec<Vec<f64>> = cfg.tests.iter().map(|g| emb.sample(&domain, g)).collect();

    let observe = |h: &[f64]| -> Vec<f64> {
        gs.iter()
            .map(|g| xi_functional_on(&domain, h, &phi, g, cfg.beta, cfg.bonds).expect("lengths checked"))
            .collect()
    };
    let rows: Vec<Vec<f64>> = match cfg.sampler {
        CltSampler::Langevin => {
            stationary_samples(&domain, &cfg.potential, &boundary, &cfg.plan, cfg.n_samples, cfg.seed, |s| {
                observe(s.field())
            })?
        }
        CltSampler::ExactGaussian => {
            if !quadratic {
                return Err(invalid("exact Gaussian sampling needs the quadratic potential"));
            }
            let sampler = build_sampler(&domain, &BondWeights::uniform(&domain, 1.0), &boundary)?;
            let shares = chain_shares(cfg.n_samples, cfg.plan.chains.max(1));
            shares
                .par_iter()
                .enumerate()
                .map(|(c, &count)| {
                    let mut rng = stream_rng(cfg.seed, c as u64);
                    (0..count).map(|_| observe(&sampler.sample(&mut rng))).collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        }
    };

    let f_ext = {
        let w = BondWeights::from_beta(&domain, cfg.beta);
        harmonic_extend_weighted(&domain, &w, &f_vals, SolveOptions::with_tol(1e-12))?
    };
    let zero = vec![0.0; domain.n_sites()];
    let precision =
        if quadratic { Some(factor_precision(&domain, &BondWeights::uniform(&domain, 1.0))?) } else { None };

    let mut stats = Vec::with_capacity(gs.len());
    for (k, (test, g)) in cfg.tests.iter().zip(&gs).enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let variance = variance_estimate(&xs, cfg.batches);
        let dirichlet = super::dirichlet_ip_checked(test, test, cfg.beta, 16)?;
        let oracle_variance = match &precision {
            Some(f) => Some(f.inverse_quadratic_form(&xi_coefficients(&domain, g, cfg.beta, cfg.bonds)?)),
            None => None,
        };
        stats.push(XiStats {
            name: test.name().to_string(),
            mean: batch_means(&xs, cfg.batches),
            mean_target: xi_functional_on(&domain, &f_ext, &zero, g, cfg.beta, cfg.bonds)?,
            variance,
            normality: normality(&xs),
            ks: ks_fitted_normal(&xs),
            dirichlet,
            ratio: Estimate::new(variance.value / dirichlet, variance.stderr / dirichlet),
            oracle_variance,
            lag1: lag1_within_chains(&xs, &cfg.plan, cfg.sampler, cfg.n_samples),
            samples: xs,
        });
    }
    let decorrelated = stats.iter().all(|s| s.lag1 <= 0.1);
    Ok(CltReport {
        n: cfg.n,
        n_samples: cfg.n_samples,
        potential: cfg.potential.name().to_string(),
        beta: cfg.beta,
        stats,
        decorrelated,
    })
}

/// Lag-1 autocorrelation pooled over chains (no pairs straddle two chains).
fn lag1_within_chains(xs: &[f64], plan: &ChainPlan, sampler: CltSampler, n: usize) -> f64 {
    if sampler == CltSampler::ExactGaussian {
        return autocorrelation(xs, 1);
    }
    let m = crate::stats::mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let mut num = 0.0;
    let mut start = 0;
    for count in chain_shares(n, plan.chains) {
        let chunk = &xs[start..start + count];
        num += chunk.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>();
        start += count;
    }
    num / denom
}
