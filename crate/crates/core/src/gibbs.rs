//! Tilted gradient Gibbs states on the torus.
//!
//! Heights are periodic with Hamiltonian `Σ_b V(∇h(b) + u·(head − tail))`;
//! the reported gradient field is `η(b) = ∇h(b) + u·(head − tail)`, which
//! is shift invariant with `E η(x, x+e_i) = u_i`. The gauge `h(0,0) = 0` is
//! restored after every step.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harmonic::Beta;
use crate::langevin::steps_for;
use crate::lattice::{Orientation, Site, TorusDomain};
use crate::potential::{Builtin, Potential};
use crate::rng::stream_rng;
use crate::stats::{batch_means, ks_two_sample, Estimate, KsTest};

#[derive(Clone, Debug)]
pub struct TorusField {
    torus: Arc<TorusDomain>,
    potential: Arc<Potential>,
    tilt: [f64; 2],
    h: Vec<f64>,
    dt: f64,
    steps: u64,
    drift: Vec<f64>,
}

impl TorusField {
    pub fn new(torus: Arc<TorusDomain>, potential: Arc<Potential>, tilt: [f64; 2], dt: f64) -> Result<Self> {
        if !(dt > 0.0) || dt > potential.max_stable_dt() {
            return Err(invalid(format!("time step {dt} outside (0, 1/(8·A_V)]")));
        }
        if !tilt.iter().all(|u| u.is_finite()) {
            return Err(invalid("tilt must be finite"));
        }
        let n = torus.n_sites();
        Ok(TorusField { torus, potential, tilt, h: vec![0.0; n], dt, steps: 0, drift: vec![0.0; n] })
    }

    pub fn torus(&self) -> &Arc<TorusDomain> {
        &self.torus
    }

    pub fn tilt(&self) -> [f64; 2] {
        self.tilt
    }

    pub fn heights(&self) -> &[f64] {
        &self.h
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn set_heights(&mut self, h: &[f64]) -> Result<()> {
        crate::lattice::check_len(h, self.h.len())?;
        let base = h[0];
        for (dst, src) in self.h.iter_mut().zip(h) {
            *dst = src - base;
        }
        Ok(())
    }

    /// `η` in bond order: for site `k`, entry `2k` is the bond to `+e₁` and
    /// `2k + 1` the bond to `+e₂`.
    pub fn eta(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.h.len());
        for k in 0..self.h.len() {
            let nb = self.torus.neighbors(k);
            out.push(self.h[nb[0] as usize] - self.h[k] + self.tilt[0]);
            out.push(self.h[nb[2] as usize] - self.h[k] + self.tilt[1]);
        }
        out
    }

    /// Drift at every site.
    pub fn drift(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.h.len()];
        self.accumulate_drift(&mut out);
        out
    }

    fn accumulate_drift(&self, out: &mut [f64]) {
        match self.potential.builtin() {
            Some(Builtin::Quadratic) => self.drift_kernel(out, |x| x),
            Some(Builtin::Cosine) => self.drift_kernel(out, |x| 2.0 * x - x.sin()),
            None => self.drift_kernel(out, |x| self.potential.dv(x)),
        }
    }

    #[inline(always)]
    fn drift_kernel(&self, out: &mut [f64], dv: impl Fn(f64) -> f64) {
        let [u1, u2] = self.tilt;
        for k in 0..self.h.len() {
            let nb = self.torus.neighbors(k);
            let (r, t) = (nb[0] as usize, nb[2] as usize);
            let g1 = dv(self.h[r] - self.h[k] + u1);
            let g2 = dv(self.h[t] - self.h[k] + u2);
            out[k] += g1 + g2;
            out[r] -= g1;
            out[t] -= g2;
        }
    }

    pub fn step(&mut self, rng: &mut impl Rng) -> Result<()> {
        let mut drift = std::mem::take(&mut self.drift);
        drift.iter_mut().for_each(|v| *v = 0.0);
        self.accumulate_drift(&mut drift);
        let sigma = (2.0 * self.dt).sqrt();
        for (h, g) in self.h.iter_mut().zip(&drift) {
            let z: f64 = rng.sample(StandardNormal);
            *h += g * self.dt + sigma * z;
        }
        self.drift = drift;
        self.steps += 1;
        let base = self.h[0];
        for h in self.h.iter_mut() {
            *h -= base;
        }
        if let Some(k) = self.h.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { site: self.torus.site(k), time: self.time(), dt: self.dt });
        }
        Ok(())
    }

    pub fn run(&mut self, horizon: f64, rng: &mut impl Rng) -> Result<()> {
        for _ in 0..steps_for(horizon, self.dt)? {
            self.step(rng)?;
        }
        Ok(())
    }
}

pub fn torus_step(state: &mut TorusField, rng: &mut impl Rng) -> Result<()> {
    state.step(rng)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub side: usize,
    pub tilt: [f64; 2],
    pub dt: f64,
    /// Burn-in per chain, in time units.
    pub burn: f64,
    pub n_samples: usize,
    /// Time between retained samples.
    pub thin: f64,
    pub chains: usize,
    pub seed: u64,
}

impl GibbsConfig {
    pub fn new(side: usize, potential: &Potential) -> Self {
        GibbsConfig {
            side,
            tilt: [0.0, 0.0],
            dt: potential.default_dt(),
            burn: 2.0 * (side * side) as f64,
            n_samples: 500,
            thin: 2.0,
            chains: 1,
            seed: 0,
        }
    }
}

/// Thinned stationary `η` samples, chain after chain.
pub fn sample_eta(potential: &Arc<Potential>, cfg: &GibbsConfig) -> Result<Vec<Vec<f64>>> {
    if cfg.side < 2 || cfg.n_samples == 0 || cfg.chains == 0 {
        return Err(invalid("side, samples and chains must be positive"));
    }
    let torus = Arc::new(TorusDomain::new(cfg.side)?);
    let chains = cfg.chains.min(cfg.n_samples);
    let per_chain: Vec<Result<Vec<Vec<f64>>>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let count = cfg.n_samples / chains + usize::from(c < cfg.n_samples % chains);
            let mut rng = stream_rng(cfg.seed, c as u64);
            let mut field = TorusField::new(torus.clone(), potential.clone(), cfg.tilt, cfg.dt)?;
            field.run(cfg.burn, &mut rng)?;
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                field.run(cfg.thin, &mut rng)?;
                out.push(field.eta());
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::with_capacity(cfg.n_samples);
    for chain in per_chain {
        all.extend(chain?);
    }
    Ok(all)
}

/// Estimates of `a_i = E V″(η(b))` for bonds of orientation `i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiltEstimate {
    pub a1: Estimate,
    pub a2: Estimate,
    /// `(a₁, a₂)`, unnormalized.
    pub beta: Beta,
    pub mean_eta: [Estimate; 2],
    pub samples: usize,
}

/// Per-sample spatial averages of `f(η)` over horizontal and vertical bonds.
pub fn orientation_averages(eta: &[f64], f: impl Fn(f64) -> f64) -> [f64; 2] {
    let n = eta.len() as f64 / 2.0;
    let (mut a, mut b) = (0.0, 0.0);
    for pair in eta.chunks_exact(2) {
        a += f(pair[0]);
        b += f(pair[1]);
    }
    [a / n, b / n]
}

pub fn tilt_estimate(potential: &Potential, samples: &[Vec<f64>]) -> Result<TiltEstimate> {
    if samples.len() < 2 {
        return Err(invalid("at least two samples are required"));
    }
    let batches = samples.len().min(20);
    let col = |f: &dyn Fn(f64) -> f64, i: usize| -> Vec<f64> {
        samples.iter().map(|s| orientation_averages(s, f)[i]).collect()
    };
    let ddv = |x: f64| potential.ddv(x);
    let id = |x: f64| x;
    let a1 = batch_means(&col(&ddv, 0), batches);
    let a2 = batch_means(&col(&ddv, 1), batches);
    Ok(TiltEstimate {
        beta: Beta::new(a1.value, a2.value)?,
        a1,
        a2,
        mean_eta: [batch_means(&col(&id, 0), batches), batch_means(&col(&id, 1), batches)],
        samples: samples.len(),
    })
}

pub fn estimate_a_u(potential: &Arc<Potential>, cfg: &GibbsConfig) -> Result<TiltEstimate> {
    if cfg.side < 8 {
        return Err(invalid("torus side must be at least 8"));
    }
    tilt_estimate(potential, &sample_eta(potential, cfg)?)
}

/// Reflection across a lattice axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// `(i, j) ↦ (i, −j)`.
    Horizontal,
    /// `(i, j) ↦ (−i, j)`.
    Vertical,
}

/// `η` on the bond from `x` in direction `(di, dj)`, any orientation.
pub fn eta_at(torus: &TorusDomain, eta: &[f64], x: Site, di: i32, dj: i32) -> f64 {
    match (di, dj) {
        (1, 0) => eta[2 * torus.index(x)],
        (0, 1) => eta[2 * torus.index(x) + 1],
        (-1, 0) => -eta[2 * torus.index(x.shift(-1, 0))],
        (0, -1) => -eta[2 * torus.index(x.shift(0, -1)) + 1],
        _ => panic!("not a unit step: ({di}, {dj})"),
    }
}

/// The two-bond pattern `b₁ = (x, x+e)`, `b₂ = (x+e, x+e+e′)` and its mirror
/// image, which flips `e′`. For the horizontal axis `e = e₁`, `e′ = e₂`.
fn pattern(torus: &TorusDomain, eta: &[f64], x: Site, axis: Axis, mirrored: bool, f: &dyn Fn(f64) -> f64) -> f64 {
    let s = if mirrored { -1 } else { 1 };
    let (e, e2) = match axis {
        Axis::Horizontal => ((1, 0), (0, s)),
        Axis::Vertical => ((0, 1), (s, 0)),
    };
    let y = x.shift(e.0, e.1);
    f(eta_at(torus, eta, x, e.0, e.1)) * f(eta_at(torus, eta, y, e2.0, e2.1))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReflectionReport {
    pub axis: Axis,
    pub ks: KsTest,
    pub original_mean: f64,
    pub reflected_mean: f64,
    pub shift: f64,
}

/// Compares `f(η(b₁))f(η(b₂))` at the origin with the mirrored pattern at
/// the antipodal site, one value per sample; `shift` is added to the
/// mirrored values (zero for the test proper, positive for a power control).
pub fn reflection_test(
    torus: &TorusDomain,
    samples: &[Vec<f64>],
    axis: Axis,
    f: &dyn Fn(f64) -> f64,
    shift: f64,
) -> Result<ReflectionReport> {
    if samples.len() < 2 {
        return Err(invalid("at least two samples are required"));
    }
    let half = (torus.side() / 2) as i32;
    let origin = Site::new(0, 0);
    let far = Site::new(half, half);
    let a: Vec<f64> = samples.iter().map(|s| pattern(torus, s, origin, axis, false, f)).collect();
    let b: Vec<f64> = samples.iter().map(|s| pattern(torus, s, far, axis, true, f) + shift).collect();
    let ks = ks_two_sample(&a, &b);
    Ok(ReflectionReport {
        axis,
        ks,
        original_mean: crate::stats::mean(&a),
        reflected_mean: crate::stats::mean(&b),
        shift,
    })
}

/// Bond-gradient variance of the torus free field per orientation, from the
/// Fourier modes of the torus Laplacian, for the Euler–Maruyama chain at
/// step `dt` (`dt = 0` gives the continuum-time law).
pub fn torus_dgff_gradient_variance(side: usize, dt: f64, orientation: Orientation) -> f64 {
    let n = side as f64;
    let mut total = 0.0;
    for a in 0..side {
        for b in 0..side {
            if a == 0 && b == 0 {
                continue;
            }
            let k1 = 2.0 * std::f64::consts::PI * a as f64 / n;
            let k2 = 2.0 * std::f64::consts::PI * b as f64 / n;
            let lambda = 2.0 * (1.0 - k1.cos()) + 2.0 * (1.0 - k2.cos());
            let num = match orientation {
                Orientation::Horizontal => 2.0 * (1.0 - k1.cos()),
                Orientation::Vertical => 2.0 * (1.0 - k2.cos()),
            };
            total += num / (lambda * (1.0 - 0.5 * dt * lambda));
        }
    }
    total / (n * n)
}
