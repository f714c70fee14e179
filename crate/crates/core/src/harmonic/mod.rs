//! Weighted discrete Laplacians `Δ^ω` and `Δ^β`, harmonic extension,
//! Green's functions and Dirichlet forms.
//!
//! Sign convention: `Δ^ω f(x) = Σ_{y∼x} ω(xy)(f(y) − f(x))`, the negative
//! semidefinite graph Laplacian. The Green's function is the inverse of the
//! positive operator, `G = (−Δ^ω)⁻¹` with zero boundary values, so that
//! `G(x, x)` is the expected time a walk with jump rates `ω` spends at `x`
//! before leaving the domain.

mod beurling;

pub use beurling::{beurling_experiment, half_line_obstacle, AxisConvention, BeurlingConfig, BeurlingReport};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{check_len, BondIndex, BondSet, LatticeDomain, Orientation, Site};
use crate::linalg::BandedCholesky;

/// Axis weights of `Δ^β`: `b1` on horizontal bonds, `b2` on vertical ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beta {
    pub b1: f64,
    pub b2: f64,
}

impl Beta {
    pub const ISOTROPIC: Beta = Beta { b1: 1.0, b2: 1.0 };

    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        if !(b1 > 0.0 && b2 > 0.0) || !b1.is_finite() || !b2.is_finite() {
            return Err(invalid("beta weights must be positive and finite"));
        }
        Ok(Beta { b1, b2 })
    }

    pub fn weight(&self, orientation: Orientation) -> f64 {
        match orientation {
            Orientation::Horizontal => self.b1,
            Orientation::Vertical => self.b2,
        }
    }

    pub fn scaled(&self, c: f64) -> Beta {
        Beta { b1: self.b1 * c, b2: self.b2 * c }
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta::ISOTROPIC
    }
}

/// Positive bond weights `ω(b)` for the bonds touching interior sites,
/// stored per interior site in [`crate::lattice::DIRECTIONS`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct BondWeights {
    per_site: Vec<[f64; 4]>,
}

const OPPOSITE: [usize; 4] = [1, 0, 3, 2];

impl BondWeights {
    pub fn uniform(domain: &LatticeDomain, w: f64) -> Self {
        BondWeights { per_site: vec![[w; 4]; domain.n_interior()] }
    }

    pub fn from_beta(domain: &LatticeDomain, beta: Beta) -> Self {
        BondWeights { per_site: vec![[beta.b1, beta.b1, beta.b2, beta.b2]; domain.n_interior()] }
    }

    /// Weights from a function of the (canonically oriented) bond.
    pub fn from_bond_fn(domain: &LatticeDomain, f: impl Fn(&BondIndex) -> f64) -> Result<Self> {
        let mut per_site = vec![[0.0; 4]; domain.n_interior()];
        for b in domain.bonds(BondSet::InteriorAndCrossing) {
            let w = f(b);
            if !(w > 0.0) || !w.is_finite() {
                return Err(invalid(format!("bond weight {w} is not positive")));
            }
            let (d_tail, d_head) = match b.orientation {
                Orientation::Horizontal => (0, 1),
                Orientation::Vertical => (2, 3),
            };
            let n = domain.n_interior();
            if (b.tail as usize) < n {
                per_site[b.tail as usize][d_tail] = w;
            }
            if (b.head as usize) < n {
                per_site[b.head as usize][d_head] = w;
            }
        }
        Ok(BondWeights { per_site })
    }

    pub fn per_site(&self) -> &[[f64; 4]] {
        &self.per_site
    }

    /// Weight of a bond of `D* ∪ crossing`.
    pub fn bond_weight(&self, domain: &LatticeDomain, b: &BondIndex) -> f64 {
        let d = match b.orientation {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 2,
        };
        if (b.tail as usize) < domain.n_interior() {
            self.per_site[b.tail as usize][d]
        } else {
            self.per_site[b.head as usize][OPPOSITE[d]]
        }
    }

    /// Total weight at interior site `k`.
    pub fn total(&self, k: usize) -> f64 {
        self.per_site[k].iter().sum()
    }

    pub fn len(&self) -> usize {
        self.per_site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_site.is_empty()
    }
}

/// `Δ^β f(x)` for `f` given as a site function.
pub fn apply_delta_beta(f: impl Fn(Site) -> Option<f64>, x: Site, beta: Beta) -> Result<f64> {
    let at = |s: Site| f(s).ok_or(Error::MissingValue(s));
    let c = at(x)?;
    let horizontal = at(x.shift(1, 0))? + at(x.shift(-1, 0))? - 2.0 * c;
    let vertical = at(x.shift(0, 1))? + at(x.shift(0, -1))? - 2.0 * c;
    Ok(beta.b1 * horizontal + beta.b2 * vertical)
}

/// `Δ^ω f` at interior site `k` for `f` in extended layout.
#[inline]
pub fn apply_laplacian(domain: &LatticeDomain, weights: &BondWeights, field: &[f64], k: usize) -> f64 {
    let nb = domain.neighbors(k);
    let w = &weights.per_site[k];
    let c = field[k];
    (0..4).map(|d| w[d] * (field[nb[d] as usize] - c)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SolveMethod {
    /// Direct solve up to [`DIRECT_SOLVE_LIMIT`] interior sites, relaxation above.
    #[default]
    Auto,
    Relaxation,
    Direct,
}

pub const DIRECT_SOLVE_LIMIT: usize = 2500;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub method: SolveMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, method: SolveMethod::Auto }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Default::default() }
    }
}

/// Interior precision matrix `−Δ^ω` in banded form.
pub(crate) fn precision_band<'a>(
    domain: &'a LatticeDomain,
    weights: &'a BondWeights,
) -> (usize, impl Fn(usize, usize) -> f64 + 'a) {
    let n = domain.n_interior();
    let p = domain.interior_bonds().iter().map(|b| (b.head as usize).abs_diff(b.tail as usize)).max().unwrap_or(0);
    let entry = move |i: usize, j: usize| {
        if i == j {
            weights.total(i)
        } else {
            let nb = domain.neighbors(i);
            (0..4).filter(|&d| nb[d] as usize == j && j < n).map(|d| -weights.per_site[i][d]).sum()
        }
    };
    (p, entry)
}

pub fn factor_precision(domain: &LatticeDomain, weights: &BondWeights) -> Result<BandedCholesky> {
    if domain.is_empty() {
        return Err(invalid("domain has no interior sites"));
    }
    let (p, entry) = precision_band(domain, weights);
    BandedCholesky::factor(domain.n_interior(), p, entry)
}

/// Right-hand side `Σ_{y∈∂D, y∼x} ω(xy) φ(y)` of the Dirichlet problem.
fn boundary_load(domain: &LatticeDomain, weights: &BondWeights, field: &[f64]) -> Vec<f64> {
    let n = domain.n_interior();
    (0..n)
        .map(|k| {
            let nb = domain.neighbors(k);
            (0..4).filter(|&d| nb[d] as usize >= n).map(|d| weights.per_site[k][d] * field[nb[d] as usize]).sum()
        })
        .collect()
}

/// Largest `|Δ^ω u(x)|` over interior sites.
pub fn max_residual(domain: &LatticeDomain, weights: &BondWeights, field: &[f64]) -> f64 {
    (0..domain.n_interior()).map(|k| apply_laplacian(domain, weights, field, k).abs()).fold(0.0, f64::max)
}

fn oscillation(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Solves `Δ^ω u = 0` in `D` with `u = boundary` on `∂D`. Returns `u` in
/// extended layout with `|Δ^ω u| ≤ tol·max(1, osc(boundary))` on `D`.
pub fn harmonic_extend_weighted(
    domain: &LatticeDomain,
    weights: &BondWeights,
    boundary: &[f64],
    opts: SolveOptions,
) -> Result<Vec<f64>> {
    check_len(boundary, domain.n_boundary())?;
    if !(opts.tol > 0.0) {
        return Err(invalid("solver tolerance must be positive"));
    }
    let n = domain.n_interior();
    let mean = if boundary.is_empty() { 0.0 } else { boundary.iter().sum::<f64>() / boundary.len() as f64 };
    let mut field: Vec<f64> = std::iter::repeat_n(mean, n).chain(boundary.iter().copied()).collect();
    if n == 0 {
        return Ok(field);
    }
    let target = opts.tol * oscillation(boundary).max(1.0);
    let direct = match opts.method {
        SolveMethod::Auto => n <= DIRECT_SOLVE_LIMIT,
        SolveMethod::Direct => true,
        SolveMethod::Relaxation => false,
    };
    if direct {
        let factor = factor_precision(domain, weights)?;
        let mut rhs = boundary_load(domain, weights, &field);
        factor.solve(&mut rhs);
        field[..n].copy_from_slice(&rhs);
        let residual = max_residual(domain, weights, &field);
        if residual > target {
            return Err(Error::NotConverged { iterations: 1, residual });
        }
        Ok(field)
    } else {
        relax(domain, weights, &mut field, target)?;
        Ok(field)
    }
}

/// Red-black successive over-relaxation until the residual drops below `target`.
fn relax(domain: &LatticeDomain, weights: &BondWeights, field: &mut [f64], target: f64) -> Result<usize> {
    let n = domain.n_interior();
    let (red, black): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| {
        let s = domain.interior()[k];
        (s.i + s.j).rem_euclid(2) == 0
    });
    let r = f64::from(domain.diameter());
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (r + 1.0)).sin());
    let cap = (100.0 * r * r).max(1000.0) as usize;
    let mut residual = f64::INFINITY;
    for sweep in 1..=cap {
        for colour in [&red, &black] {
            for &k in colour {
                let nb = domain.neighbors(k);
                let w = &weights.per_site[k];
                let mut acc = 0.0;
                let mut tot = 0.0;
                for d in 0..4 {
                    acc += w[d] * field[nb[d] as usize];
                    tot += w[d];
                }
                field[k] += omega * (acc / tot - field[k]);
            }
        }
        if sweep % 8 == 0 || sweep == cap {
            residual = max_residual(domain, weights, field);
            if residual <= target {
                return Ok(sweep);
            }
        }
    }
    Err(Error::NotConverged { iterations: cap, residual })
}

/// `Δ^β`-harmonic extension of boundary values (boundary order) into `D`.
pub fn harmonic_extend(domain: &LatticeDomain, boundary: &[f64], beta: Beta, tol: f64) -> Result<Vec<f64>> {
    harmonic_extend_weighted(domain, &BondWeights::from_beta(domain, beta), boundary, SolveOptions::with_tol(tol))
}

/// Dense Green's function `G = (−Δ^ω)⁻¹` on interior sites.
#[derive(Clone, Debug)]
pub struct GreensTable {
    n: usize,
    g: Vec<f64>,
    interior: Vec<Site>,
}

impl GreensTable {
    pub fn entry(&self, k: usize, l: usize) -> f64 {
        self.g[k * self.n + l]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn interior(&self) -> &[Site] {
        &self.interior
    }

    /// `G(x, y)`; zero when either site is not interior.
    pub fn get(&self, domain: &LatticeDomain, x: Site, y: Site) -> f64 {
        match (domain.interior_index(x), domain.interior_index(y)) {
            (Some(k), Some(l)) => self.entry(k, l),
            _ => 0.0,
        }
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.g[k * self.n..(k + 1) * self.n]
    }

    /// `νᵀ G ν`.
    pub fn quadratic_form(&self, nu: &[f64]) -> f64 {
        (0..self.n)
            .filter(|&k| nu[k] != 0.0)
            .map(|k| nu[k] * self.column(k).iter().zip(nu).map(|(g, v)| g * v).sum::<f64>())
            .sum()
    }
}

pub fn greens_function(domain: &LatticeDomain, weights: &BondWeights) -> Result<GreensTable> {
    let factor = factor_precision(domain, weights)?;
    let n = domain.n_interior();
    let mut g = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[k] = 1.0;
        factor.solve(&mut col);
        g[k * n..(k + 1) * n].copy_from_slice(&col);
    }
    // Symmetrize away rounding.
    for k in 0..n {
        for l in k + 1..n {
            let m = 0.5 * (g[k * n + l] + g[l * n + k]);
            g[k * n + l] = m;
            g[l * n + k] = m;
        }
    }
    Ok(GreensTable { n, g, interior: domain.interior().to_vec() })
}

/// `(f, g)^ω_∇ = Σ_b ω(b) ∇f(b) ∇g(b)` over the chosen bond set.
pub fn dirichlet_form(
    domain: &LatticeDomain,
    weights: &BondWeights,
    f: &[f64],
    g: &[f64],
    set: BondSet,
) -> Result<f64> {
    check_len(f, domain.n_sites())?;
    check_len(g, domain.n_sites())?;
    Ok(domain
        .bonds(set)
        .map(|b| {
            let (t, h) = (b.tail as usize, b.head as usize);
            weights.bond_weight(domain, b) * (f[h] - f[t]) * (g[h] - g[t])
        })
        .sum())
}

pub fn dirichlet_energy(domain: &LatticeDomain, weights: &BondWeights, field: &[f64], set: BondSet) -> Result<f64> {
    dirichlet_form(domain, weights, field, field, set)
}
