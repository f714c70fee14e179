//! Euler–Maruyama integration of the Langevin dynamics
//! `dh(x) = Σ_{b∋x} V′(∇(h∨ψ)(b)) dt + √2 dW_x`, shared-noise couplings and
//! the energy-inequality diagnostic.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lattice::{check_len, BondIndex, LatticeDomain, Site};
use crate::potential::{Builtin, Potential};

/// Adds the drift `Σ_{y∼x} V′(f(y) − f(x))` of every interior site to `out`.
pub(crate) fn accumulate_drift(domain: &LatticeDomain, potential: &Potential, field: &[f64], out: &mut [f64]) {
    match potential.builtin() {
        Some(Builtin::Quadratic) => drift_kernel(domain, field, out, |x| x),
        Some(Builtin::Cosine) => drift_kernel(domain, field, out, |x| 2.0 * x - x.sin()),
        None => drift_kernel(domain, field, out, |x| potential.dv(x)),
    }
}

#[inline(always)]
fn drift_kernel(domain: &LatticeDomain, field: &[f64], out: &mut [f64], dv: impl Fn(f64) -> f64) {
    let n = domain.n_interior();
    for b in domain.interior_bonds() {
        let (t, h) = (b.tail as usize, b.head as usize);
        let g = dv(field[h] - field[t]);
        out[t] += g;
        out[h] -= g;
    }
    for b in domain.crossing_bonds() {
        let (t, h) = (b.tail as usize, b.head as usize);
        let g = dv(field[h] - field[t]);
        if t < n {
            out[t] += g;
        } else {
            out[h] -= g;
        }
    }
}

/// One replica of the dynamics: interior heights `h` joined with pinned
/// boundary values `ψ`, stored in extended layout.
#[derive(Clone, Debug)]
pub struct FieldState {
    domain: Arc<LatticeDomain>,
    potential: Arc<Potential>,
    field: Vec<f64>,
    dt: f64,
    steps: u64,
    drift: Vec<f64>,
    noise: Vec<f64>,
}

impl FieldState {
    pub fn new(
        domain: Arc<LatticeDomain>,
        potential: Arc<Potential>,
        boundary: &[f64],
        initial: &[f64],
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step {dt} must be positive")));
        }
        if domain.is_empty() {
            return Err(invalid("domain has no interior sites"));
        }
        let field = domain.join(initial, boundary)?;
        if field.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial or boundary values are not finite"));
        }
        let n = domain.n_interior();
        Ok(FieldState { domain, potential, field, dt, steps: 0, drift: vec![0.0; n], noise: vec![0.0; n] })
    }

    /// State with interior values equal to zero.
    pub fn zero_start(
        domain: Arc<LatticeDomain>,
        potential: Arc<Potential>,
        boundary: &[f64],
        dt: f64,
    ) -> Result<Self> {
        let initial = vec![0.0; domain.n_interior()];
        Self::new(domain, potential, boundary, &initial, dt)
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    pub fn potential(&self) -> &Arc<Potential> {
        &self.potential
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// `h ∨ ψ` in extended layout.
    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        &self.field[..self.domain.n_interior()]
    }

    pub fn boundary(&self) -> &[f64] {
        &self.field[self.domain.n_interior()..]
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        check_len(values, self.domain.n_interior())?;
        let n = values.len();
        self.field[..n].copy_from_slice(values);
        Ok(())
    }

    /// Drift at interior site `x`.
    pub fn drift_at(&self, x: Site) -> Result<f64> {
        let k = self.domain.interior_index(x).ok_or(Error::NotInterior(x))?;
        let c = self.field[k];
        Ok(self.domain.neighbors(k).iter().map(|&e| self.potential.dv(self.field[e as usize] - c)).sum())
    }

    /// Drift at every interior site.
    pub fn drift(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.n_interior()];
        accumulate_drift(&self.domain, &self.potential, &self.field, &mut out);
        out
    }

    /// `∇(h∨ψ)(b)` for every bond of `D* ∪ crossing`, in [`LatticeDomain::bonds`] order.
    pub fn gradients(&self) -> Vec<f64> {
        bond_gradients(&self.domain, &self.field)
    }

    pub fn em_step(&mut self, rng: &mut impl Rng) -> Result<()> {
        let mut noise = std::mem::take(&mut self.noise);
        for z in noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        let out = self.em_step_with_noise(&noise);
        self.noise = noise;
        out
    }

    /// One step driven by the given standard normal increments.
    pub fn em_step_with_noise(&mut self, noise: &[f64]) -> Result<()> {
        check_len(noise, self.domain.n_interior())?;
        self.drift.iter_mut().for_each(|v| *v = 0.0);
        accumulate_drift(&self.domain, &self.potential, &self.field, &mut self.drift);
        let dt = self.dt;
        let sigma = (2.0 * dt).sqrt();
        let mut bad = None;
        for (k, (h, (g, z))) in self.field.iter_mut().zip(self.drift.iter().zip(noise)).enumerate() {
            *h += g * dt + sigma * z;
            if !h.is_finite() && bad.is_none() {
                bad = Some(k);
            }
        }
        self.steps += 1;
        match bad {
            Some(k) => Err(Error::NonFinite { site: self.domain.interior()[k], time: self.time(), dt }),
            None => Ok(()),
        }
    }

    /// Evolves for `horizon` time units (rounded to whole steps).
    pub fn run(&mut self, horizon: f64, rng: &mut impl Rng) -> Result<()> {
        for _ in 0..steps_for(horizon, self.dt)? {
            self.em_step(rng)?;
        }
        Ok(())
    }
}

pub(crate) fn steps_for(horizon: f64, dt: f64) -> Result<u64> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon {horizon} must be nonnegative")));
    }
    Ok((horizon / dt).round() as u64)
}

pub(crate) fn bond_gradients(domain: &LatticeDomain, field: &[f64]) -> Vec<f64> {
    domain
        .bonds(crate::lattice::BondSet::InteriorAndCrossing)
        .map(|b| field[b.head as usize] - field[b.tail as usize])
        .collect()
}

/// Evolves a state to time `horizon` past its current time.
pub fn burn_in(state: &mut FieldState, horizon: f64, rng: &mut impl Rng) -> Result<()> {
    state.run(horizon, rng)
}

/// Replicas on one domain driven by identical Gaussian increments.
#[derive(Clone, Debug)]
pub struct CouplingState {
    components: Vec<FieldState>,
    noise: Vec<f64>,
}

impl CouplingState {
    pub fn new(components: Vec<FieldState>) -> Result<Self> {
        let first = components.first().ok_or_else(|| invalid("a coupling needs at least one component"))?;
        for c in &components[1..] {
            if c.domain.interior() != first.domain.interior() {
                return Err(invalid("coupled components must share the domain"));
            }
            if c.dt != first.dt || c.steps != first.steps {
                return Err(invalid("coupled components must share dt and time"));
            }
            if c.potential.name() != first.potential.name() {
                return Err(invalid("coupled components must share the potential"));
            }
        }
        let n = first.domain.n_interior();
        Ok(CouplingState { components, noise: vec![0.0; n] })
    }

    pub fn components(&self) -> &[FieldState] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &FieldState {
        &self.components[k]
    }

    pub fn components_mut(&mut self) -> &mut [FieldState] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<FieldState> {
        self.components
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.components[0].domain
    }

    pub fn dt(&self) -> f64 {
        self.components[0].dt
    }

    pub fn time(&self) -> f64 {
        self.components[0].time()
    }

    pub fn coupled_step(&mut self, rng: &mut impl Rng) -> Result<()> {
        for z in self.noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.coupled_step_with_noise_buffer()
    }

    fn coupled_step_with_noise_buffer(&mut self) -> Result<()> {
        let noise = std::mem::take(&mut self.noise);
        let out = self.components.iter_mut().try_for_each(|c| c.em_step_with_noise(&noise));
        self.noise = noise;
        out
    }

    pub fn run(&mut self, horizon: f64, rng: &mut impl Rng) -> Result<()> {
        for _ in 0..steps_for(horizon, self.dt())? {
            self.coupled_step(rng)?;
        }
        Ok(())
    }

    /// `h̄ = h_i − h_j` on interior sites.
    pub fn difference(&self, i: usize, j: usize) -> Vec<f64> {
        self.components[i].values().iter().zip(self.components[j].values()).map(|(a, b)| a - b).collect()
    }

    /// `h̄ = h_i − h_j` in extended layout, boundary included.
    pub fn difference_field(&self, i: usize, j: usize) -> Vec<f64> {
        self.components[i].field().iter().zip(self.components[j].field()).map(|(a, b)| a - b).collect()
    }
}

/// Gradient energy `Σ_{D*}(∇h̄)²` of the difference between components 0 and 1
/// at half and full horizon.
#[derive(Clone, Debug, Serialize)]
pub struct BurnInDiagnostic {
    pub horizon: f64,
    pub half_energy: f64,
    pub final_energy: f64,
}

impl BurnInDiagnostic {
    pub fn decayed(&self) -> bool {
        self.final_energy <= self.half_energy
    }
}

/// Runs a two-or-more component coupling for `horizon` and reports how the
/// difference energy decayed over the second half.
pub fn burn_in_coupling(coupling: &mut CouplingState, horizon: f64, rng: &mut impl Rng) -> Result<BurnInDiagnostic> {
    if coupling.components.len() < 2 {
        return Err(invalid("diagnostic needs two components"));
    }
    let steps = steps_for(horizon, coupling.dt())?;
    let energy = |c: &CouplingState| interior_gradient_energy(c.domain(), &c.difference_field(0, 1));
    for _ in 0..steps / 2 {
        coupling.coupled_step(rng)?;
    }
    let half_energy = energy(coupling);
    for _ in steps / 2..steps {
        coupling.coupled_step(rng)?;
    }
    Ok(BurnInDiagnostic { horizon, half_energy, final_energy: energy(coupling) })
}

fn interior_gradient_energy(domain: &LatticeDomain, field: &[f64]) -> f64 {
    domain.interior_bonds().iter().map(|b| (field[b.head as usize] - field[b.tail as usize]).powi(2)).sum()
}

/// Chains at step sizes `dt·m_k` driven by one Brownian path: coarse
/// increments are sums of fine increments scaled by `1/√m_k`.
#[derive(Clone, Debug)]
pub struct DtLadder {
    states: Vec<FieldState>,
    multiples: Vec<u32>,
    sums: Vec<Vec<f64>>,
    noise: Vec<f64>,
    fine_steps: u64,
}

impl DtLadder {
    /// `states[k]` must have step `fine_dt·multiples[k]`.
    pub fn new(states: Vec<FieldState>, multiples: Vec<u32>) -> Result<Self> {
        if states.is_empty() || states.len() != multiples.len() {
            return Err(invalid("one multiple per ladder state is required"));
        }
        if multiples.contains(&0) {
            return Err(invalid("ladder multiples must be positive"));
        }
        let fine = states[0].dt / f64::from(multiples[0]);
        for (s, &m) in states.iter().zip(&multiples) {
            if (s.dt - fine * f64::from(m)).abs() > 1e-12 * s.dt {
                return Err(invalid("ladder step sizes must be multiples of the finest"));
            }
            if s.domain.interior() != states[0].domain.interior() {
                return Err(invalid("ladder states must share the domain"));
            }
        }
        let n = states[0].domain.n_interior();
        Ok(DtLadder { sums: vec![vec![0.0; n]; states.len()], states, multiples, noise: vec![0.0; n], fine_steps: 0 })
    }

    /// A ladder of chains started from the same state, at `fine_dt·m` for each `m`.
    pub fn from_template(template: &FieldState, fine_dt: f64, multiples: &[u32]) -> Result<Self> {
        let states = multiples
            .iter()
            .map(|&m| {
                FieldState::new(
                    template.domain.clone(),
                    template.potential.clone(),
                    template.boundary(),
                    template.values(),
                    fine_dt * f64::from(m),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, multiples.to_vec())
    }

    pub fn states(&self) -> &[FieldState] {
        &self.states
    }

    /// Whether every chain has just completed a step.
    pub fn aligned(&self) -> bool {
        self.multiples.iter().all(|&m| self.fine_steps.is_multiple_of(u64::from(m)))
    }

    pub fn fine_step(&mut self, rng: &mut impl Rng) -> Result<()> {
        for z in self.noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        self.fine_steps += 1;
        for k in 0..self.states.len() {
            let m = self.multiples[k];
            for (s, z) in self.sums[k].iter_mut().zip(&self.noise) {
                *s += z;
            }
            if self.fine_steps.is_multiple_of(u64::from(m)) {
                let scale = 1.0 / f64::from(m).sqrt();
                self.sums[k].iter_mut().for_each(|s| *s *= scale);
                self.states[k].em_step_with_noise(&self.sums[k])?;
                self.sums[k].iter_mut().for_each(|s| *s = 0.0);
            }
        }
        Ok(())
    }

    /// Advances by `horizon` time units, which must be a whole number of coarsest steps.
    pub fn run(&mut self, horizon: f64, rng: &mut impl Rng) -> Result<()> {
        let fine_dt = self.states[0].dt / f64::from(self.multiples[0]);
        for _ in 0..steps_for(horizon, fine_dt)? {
            self.fine_step(rng)?;
        }
        Ok(())
    }
}

/// Snapshots of a trajectory at strictly increasing times.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecorder {
    times: Vec<f64>,
    gradients: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    keep_values: bool,
}

impl TrajectoryRecorder {
    pub fn new(keep_values: bool) -> Self {
        TrajectoryRecorder { keep_values, ..Default::default() }
    }

    pub fn record(&mut self, state: &FieldState) -> Result<()> {
        let t = state.time();
        if self.times.last().is_some_and(|&last| t <= last) {
            return Err(invalid("snapshot times must be strictly increasing"));
        }
        self.times.push(t);
        self.gradients.push(state.gradients());
        if self.keep_values {
            self.values.push(state.values().to_vec());
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Bond gradients per snapshot, in [`LatticeDomain::bonds`] order.
    pub fn gradients(&self) -> &[Vec<f64>] {
        &self.gradients
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Running sums for the energy inequality of a two-component coupling.
#[derive(Clone, Debug)]
pub struct EnergyRecorder {
    a_lower: f64,
    dt: f64,
    initial_sq: f64,
    current_sq: f64,
    dissipation: f64,
    boundary: f64,
    last: Option<(f64, f64)>,
    max_step_increase: f64,
    horizon: f64,
}

impl EnergyRecorder {
    pub fn start(coupling: &CouplingState) -> Result<Self> {
        if coupling.components.len() != 2 {
            return Err(invalid("energy inequality needs exactly two components"));
        }
        let mut rec = EnergyRecorder {
            a_lower: coupling.components[0].potential.a_lower(),
            dt: coupling.dt(),
            initial_sq: 0.0,
            current_sq: 0.0,
            dissipation: 0.0,
            boundary: 0.0,
            last: None,
            max_step_increase: 0.0,
            horizon: 0.0,
        };
        rec.observe(coupling);
        rec.initial_sq = rec.current_sq;
        Ok(rec)
    }

    /// Records the state after one more step.
    pub fn observe(&mut self, coupling: &CouplingState) {
        let domain = coupling.domain();
        let diff = coupling.difference_field(0, 1);
        let n = domain.n_interior();
        let sq: f64 = diff[..n].iter().map(|v| v * v).sum();
        let grad = interior_gradient_energy(domain, &diff);
        let bdry: f64 = domain
            .crossing_bonds()
            .iter()
            .map(|b: &BondIndex| {
                let (t, h) = (b.tail as usize, b.head as usize);
                let outer = if t >= n { t } else { h };
                diff[outer].abs() * (diff[h] - diff[t]).abs()
            })
            .sum();
        if let Some((g0, b0)) = self.last {
            self.dissipation += 0.5 * self.dt * (g0 + grad);
            self.boundary += 0.5 * self.dt * (b0 + bdry);
            self.max_step_increase = self.max_step_increase.max(sq - self.current_sq);
            self.horizon += self.dt;
        }
        self.last = Some((grad, bdry));
        self.current_sq = sq;
    }

    /// Verdict `LHS ≤ RHS₀(1 + ε) + C_B·B`.
    pub fn report(&self, eps_disc: f64, c_b: f64) -> EnergyReport {
        let lhs = self.current_sq + 2.0 * self.a_lower * self.dissipation;
        let rhs0 = self.initial_sq;
        let boundary_ratio = (self.boundary > 0.0).then(|| (lhs - rhs0) / self.boundary);
        EnergyReport {
            horizon: self.horizon,
            lhs,
            rhs0,
            final_sq: self.current_sq,
            dissipation: self.dissipation,
            boundary_term: self.boundary,
            boundary_ratio,
            max_step_increase: self.max_step_increase,
            eps_disc,
            passed: lhs <= rhs0 * (1.0 + eps_disc) + c_b * self.boundary,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyReport {
    pub horizon: f64,
    pub lhs: f64,
    pub rhs0: f64,
    pub final_sq: f64,
    /// `∫₀^T Σ_{D*}(∇h̄)² dt`, trapezoid rule.
    pub dissipation: f64,
    pub boundary_term: f64,
    pub boundary_ratio: Option<f64>,
    /// Largest one-step increase of `Σ h̄²`.
    pub max_step_increase: f64,
    pub eps_disc: f64,
    pub passed: bool,
}

/// Runs a two-component coupling for `horizon` and evaluates the energy inequality.
pub fn energy_inequality_run(
    coupling: &mut CouplingState,
    horizon: f64,
    rng: &mut impl Rng,
    eps_disc: f64,
) -> Result<EnergyReport> {
    let mut rec = EnergyRecorder::start(coupling)?;
    for _ in 0..steps_for(horizon, coupling.dt())? {
        coupling.coupled_step(rng)?;
        rec.observe(coupling);
    }
    Ok(rec.report(eps_disc, 0.0))
}
