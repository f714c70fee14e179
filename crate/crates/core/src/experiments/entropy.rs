//! Entropy of nearby boundary conditions and the Brascamp–Lieb comparison.

use std::sync::Arc;

use serde::Serialize;

use super::{stationary_samples, BoundarySpec, ChainPlan};
use crate::error::{invalid, Result};
use crate::harmonic::{factor_precision, harmonic_extend_weighted, Beta, BondWeights, SolveOptions};
use crate::langevin::{CouplingState, FieldState};
use crate::lattice::{check_len, BondSet, LatticeDomain};
use crate::potential::Potential;
use crate::rng::stream_rng;
use crate::stats::{batch_means, variance_estimate, Estimate};

#[derive(Clone, Debug)]
pub struct EntropyConfig {
    pub size: usize,
    pub potential: Arc<Potential>,
    pub tilt: [f64; 2],
    pub zeta: BoundarySpec,
    pub zeta_tilde: BoundarySpec,
    pub beta: Beta,
    pub n_samples: usize,
    pub plan: ChainPlan,
    pub batches: usize,
    pub seed: u64,
}

impl EntropyConfig {
    pub fn new(size: usize, potential: Arc<Potential>) -> Self {
        let plan = ChainPlan { burn_factor: 2.0, thin_factor: 0.1, ..ChainPlan::new(&potential) };
        EntropyConfig {
            size,
            potential,
            tilt: [0.0, 0.0],
            zeta: BoundarySpec::Sine { amplitude: 0.2, waves: 1.0 },
            zeta_tilde: BoundarySpec::Tilt,
            beta: Beta::ISOTROPIC,
            n_samples: 1000,
            plan,
            batches: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    /// `Σ_b E[V″(∇h^ζ) ∇g ∇(g − h̄)]`.
    pub main: Estimate,
    /// Floating-point error bound on one evaluation of the main term.
    pub rounding_floor: f64,
    /// `L·Σ_b E[(|∇h̄|² + |∇g|²)|∇g|]`.
    pub remainder: Estimate,
    pub lipschitz: f64,
    pub total: f64,
    pub total_stderr: f64,
    /// `√(max(total, 0)/2)`.
    pub pinsker_tv: f64,
    pub n_samples: usize,
}

impl EntropyReport {
    /// Main term within `k` standard errors of zero, up to rounding.
    pub fn main_vanishes(&self, k: f64) -> bool {
        self.main.value.abs() <= k * self.main.stderr + self.rounding_floor
    }
}

pub fn pinsker(entropy: f64) -> f64 {
    (entropy.max(0.0) / 2.0).sqrt()
}

pub fn entropy_estimate(cfg: &EntropyConfig) -> Result<EntropyReport> {
    cfg.plan.validate(&cfg.potential)?;
    if cfg.n_samples < cfg.batches.max(2) {
        return Err(invalid("need at least as many samples as batches"));
    }
    let domain = Arc::new(LatticeDomain::build_rectangle(cfg.size, cfg.size)?);
    let zeta = cfg.zeta.values(&domain, cfg.tilt);
    let zeta_t = cfg.zeta_tilde.values(&domain, cfg.tilt);
    let diff: Vec<f64> = zeta.iter().zip(&zeta_t).map(|(a, b)| a - b).collect();
    let g = harmonic_extend_weighted(
        &domain,
        &BondWeights::from_beta(&domain, cfg.beta),
        &diff,
        SolveOptions::with_tol(1e-13),
    )?;
    let p = &cfg.potential;
    let start = |bd: &[f64]| -> Result<FieldState> {
        let h = harmonic_extend_weighted(&domain, &BondWeights::uniform(&domain, 1.0), bd, SolveOptions::default())?;
        FieldState::new(domain.clone(), p.clone(), bd, &h[..domain.n_interior()], cfg.plan.dt)
    };
    let mut coupling = CouplingState::new(vec![start(&zeta)?, start(&zeta_t)?])?;
    let mut rng = stream_rng(cfg.seed, 0);
    coupling.run(cfg.plan.burn_time(&domain), &mut rng)?;
    let thin = cfg.plan.thin_steps(&domain);
    let bonds: Vec<_> = domain.bonds(BondSet::InteriorAndCrossing).copied().collect();
    let mut mains = Vec::with_capacity(cfg.n_samples);
    let mut rems = Vec::with_capacity(cfg.n_samples);
    let mut floor = 0.0f64;
    for _ in 0..cfg.n_samples {
        for _ in 0..thin {
            coupling.coupled_step(&mut rng)?;
        }
        let h = coupling.component(0).field();
        let hbar = coupling.difference_field(0, 1);
        let (mut main, mut rem, mut scale) = (0.0, 0.0, 0.0);
        for b in &bonds {
            let (t, hd) = (b.tail as usize, b.head as usize);
            let dg = g[hd] - g[t];
            let dbar = hbar[hd] - hbar[t];
            let a = p.ddv(h[hd] - h[t]);
            main += a * dg * (dg - dbar);
            rem += (dbar * dbar + dg * dg) * dg.abs();
            scale += a * dg.abs() * (dg.abs() + dbar.abs() + g[hd].abs() + g[t].abs());
        }
        mains.push(main);
        rems.push(rem);
        floor = floor.max(scale);
    }
    let main = batch_means(&mains, cfg.batches);
    let l = p.lipschitz();
    let r = batch_means(&rems, cfg.batches);
    let remainder = Estimate::new(l * r.value, l * r.stderr);
    let total = main.value + remainder.value;
    Ok(EntropyReport {
        main,
        rounding_floor: 16.0 * bonds.len() as f64 * f64::EPSILON * floor,
        remainder,
        lipschitz: l,
        total,
        total_stderr: main.stderr.hypot(remainder.stderr),
        pinsker_tv: pinsker(total),
        n_samples: cfg.n_samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlCase {
    pub variance: Estimate,
    /// `νᵀ G ν` with `G` the Green's function of weights `a_V`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlReport {
    pub a_lower: f64,
    pub cases: Vec<BlCase>,
}

impl BlReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

/// Compares `Var⟨ν, h⟩` under the model with the Gaussian comparison
/// `νᵀ(−a_V Δ)⁻¹ν`. Each `ν` lists one weight per interior site.
#[allow(clippy::too_many_arguments)]
pub fn brascamp_lieb_check(
    domain: &Arc<LatticeDomain>,
    potential: &Arc<Potential>,
    boundary: &[f64],
    nus: &[Vec<f64>],
    n_samples: usize,
    plan: &ChainPlan,
    batches: usize,
    seed: u64,
) -> Result<BlReport> {
    for nu in nus {
        check_len(nu, domain.n_interior())?;
    }
    if n_samples < batches.max(2) {
        return Err(invalid("need at least as many samples as batches"));
    }
    let a = potential.a_lower();
    let factor = factor_precision(domain, &BondWeights::uniform(domain, a))?;
    let rows = stationary_samples(domain, potential, boundary, plan, n_samples, seed, |s| {
        nus.iter().map(|nu| nu.iter().zip(s.values()).map(|(w, h)| w * h).sum::<f64>()).collect::<Vec<f64>>()
    })?;
    let cases = nus
        .iter()
        .enumerate()
        .map(|(k, nu)| {
            let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let variance = variance_estimate(&xs, batches);
            let bound = factor.inverse_quadratic_form(nu);
            BlCase { variance, bound, passed: variance.value <= bound + 4.0 * variance.stderr }
        })
        .collect();
    Ok(BlReport { a_lower: a, cases })
}
