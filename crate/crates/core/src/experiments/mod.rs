//! Monte Carlo experiments on top of the samplers: the gradient CLT, mean
//! and coupling harmonicity, the entropy bound and the Brascamp–Lieb check.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::harmonic::{harmonic_extend_weighted, Beta, BondWeights, SolveOptions};
use crate::langevin::FieldState;
use crate::lattice::{check_len, BondSet, LatticeDomain};
use crate::potential::Potential;
use crate::rng::stream_rng;

mod clt;
mod entropy;
mod harmonicity;
mod testfn;

pub use clt::{clt_experiment, CltConfig, CltReport, CltSampler, XiStats};
pub use entropy::{brascamp_lieb_check, entropy_estimate, pinsker, BlCase, BlReport, EntropyConfig, EntropyReport};
pub use harmonicity::{
    coupling_experiment, mean_harmonic_experiment, CouplingConfig, CouplingReport, CouplingSize, MeanHarmonicConfig,
    MeanHarmonicReport, MeanHarmonicSize, ReplicaDeviation,
};
pub use testfn::{dirichlet_ip_beta, dirichlet_ip_checked, midpoint_ip, Embedding, Quadrature, TestFunction};

/// Boundary values on a square of side `R`, in lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundarySpec {
    /// `u·x`.
    Tilt,
    /// `u·x + A·sin(2πk·i/R)`.
    Sine { amplitude: f64, waves: f64 },
    /// `u·x + c`.
    Constant { value: f64 },
}

impl BoundarySpec {
    /// Values on `∂D` in boundary order, `R` the domain diameter.
    pub fn values(&self, domain: &LatticeDomain, tilt: [f64; 2]) -> Vec<f64> {
        let r = f64::from(domain.diameter());
        domain.boundary_from_fn(|s| {
            let (i, j) = (f64::from(s.i), f64::from(s.j));
            let base = tilt[0] * i + tilt[1] * j;
            match *self {
                BoundarySpec::Tilt => base,
                BoundarySpec::Sine { amplitude, waves } => {
                    base + amplitude * (2.0 * std::f64::consts::PI * waves * i / r).sin()
                }
                BoundarySpec::Constant { value } => base + value,
            }
        })
    }
}

/// Schedule of a stationary Langevin chain. Times scale with `R²`, `R` the
/// domain diameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub dt: f64,
    /// Burn-in time in units of `R²`.
    pub burn_factor: f64,
    /// EM steps between recorded samples, in units of `R²`.
    pub thin_factor: f64,
    pub chains: usize,
}

impl ChainPlan {
    pub fn new(potential: &Potential) -> Self {
        ChainPlan { dt: potential.default_dt(), burn_factor: 20.0, thin_factor: 2.0, chains: 1 }
    }

    pub fn burn_time(&self, domain: &LatticeDomain) -> f64 {
        self.burn_factor * r_squared(domain)
    }

    pub fn thin_steps(&self, domain: &LatticeDomain) -> u64 {
        ((self.thin_factor * r_squared(domain)).round() as u64).max(1)
    }

    pub(crate) fn validate(&self, potential: &Potential) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= potential.max_stable_dt()) {
            return Err(invalid(format!("dt = {} outside (0, 1/(8A)] = (0, {}]", self.dt, potential.max_stable_dt())));
        }
        if !(self.burn_factor >= 0.0) || !(self.thin_factor > 0.0) || self.chains == 0 {
            return Err(invalid("chain plan needs burn ≥ 0, thin > 0 and at least one chain"));
        }
        Ok(())
    }
}

pub(crate) fn r_squared(domain: &LatticeDomain) -> f64 {
    f64::from(domain.diameter()).powi(2)
}

/// Splits `n` samples over `chains` as evenly as possible.
pub(crate) fn chain_shares(n: usize, chains: usize) -> Vec<usize> {
    (0..chains).map(|c| n / chains + usize::from(c < n % chains)).collect()
}

/// Draws `n_samples` observations from stationary chains started at the
/// harmonic extension of the boundary values. Chain `c` uses stream `c` of
/// `seed`; the result lists chain 0's samples first.
pub fn stationary_samples<T: Send>(
    domain: &Arc<LatticeDomain>,
    potential: &Arc<Potential>,
    boundary: &[f64],
    plan: &ChainPlan,
    n_samples: usize,
    seed: u64,
    observe: impl Fn(&FieldState) -> T + Sync,
) -> Result<Vec<T>> {
    plan.validate(potential)?;
    check_len(boundary, domain.n_boundary())?;
    let start =
        harmonic_extend_weighted(domain, &BondWeights::uniform(domain, 1.0), boundary, SolveOptions::default())?;
    let burn = plan.burn_time(domain);
    let thin = plan.thin_steps(domain);
    let shares = chain_shares(n_samples, plan.chains);
    let per_chain: Vec<Vec<T>> = shares
        .par_iter()
        .enumerate()
        .map(|(c, &count)| {
            let mut rng = stream_rng(seed, c as u64);
            let mut state =
                FieldState::new(domain.clone(), potential.clone(), boundary, &start[..domain.n_interior()], plan.dt)?;
            state.run(burn, &mut rng)?;
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                for _ in 0..thin {
                    state.em_step(&mut rng)?;
                }
                out.push(observe(&state));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_chain.into_iter().flatten().collect())
}

/// `ξ(g) = Σ_b β(b) ∇g(b) ∇(h − φ)(b)` over `set`, all fields in extended layout.
pub fn xi_functional_on(
    domain: &LatticeDomain,
    h: &[f64],
    phi: &[f64],
    g: &[f64],
    beta: Beta,
    set: BondSet,
) -> Result<f64> {
    for v in [h, phi, g] {
        check_len(v, domain.n_sites())?;
    }
    Ok(domain
        .bonds(set)
        .map(|b| {
            let (t, hd) = (b.tail as usize, b.head as usize);
            beta.weight(b.orientation) * (g[hd] - g[t]) * ((h[hd] - phi[hd]) - (h[t] - phi[t]))
        })
        .sum())
}

/// [`xi_functional_on`] over interior and crossing bonds, the bonds that
/// carry the Hamiltonian of `h ∨ φ`.
pub fn xi_functional(domain: &LatticeDomain, h: &[f64], phi: &[f64], g: &[f64], beta: Beta) -> Result<f64> {
    xi_functional_on(domain, h, phi, g, beta, BondSet::InteriorAndCrossing)
}

/// Coefficients `ν` with `ξ(g) = Σ_{x∈D} ν(x)(h − φ)(x)` when `h = φ` on `∂D`.
pub fn xi_coefficients(domain: &LatticeDomain, g: &[f64], beta: Beta, set: BondSet) -> Result<Vec<f64>> {
    check_len(g, domain.n_sites())?;
    let n = domain.n_interior();
    let mut nu = vec![0.0; n];
    for b in domain.bonds(set) {
        let (t, hd) = (b.tail as usize, b.head as usize);
        let c = beta.weight(b.orientation) * (g[hd] - g[t]);
        if hd < n {
            nu[hd] += c;
        }
        if t < n {
            nu[t] -= c;
        }
    }
    Ok(nu)
}
