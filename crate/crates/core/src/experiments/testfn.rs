//! Smooth test functions on the unit square and their lattice samples.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::harmonic::Beta;
use crate::lattice::{LatticeDomain, Site};

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// A smooth `g : [0,1]² → R` with its analytic gradient.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    f: ScalarFn,
    grad: GradFn,
    compact: bool,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("TestFunction").field("name", &self.name).field("compact", &self.compact).finish()
    }
}

/// `exp(4 − 1/(t(1−t)))` on `(0,1)`, zero outside; equals 1 at `t = ½`.
fn bump(t: f64) -> (f64, f64) {
    if t <= 0.0 || t >= 1.0 {
        return (0.0, 0.0);
    }
    let s = t * (1.0 - t);
    let v = (4.0 - 1.0 / s).exp();
    (v, v * (1.0 - 2.0 * t) / (s * s))
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
        compact: bool,
    ) -> Self {
        TestFunction { name: name.into(), f: Arc::new(f), grad: Arc::new(grad), compact }
    }

    /// `sin(pπx)·sin(qπy)`, a Dirichlet eigenfunction of the unit square.
    pub fn sine_product(p: u32, q: u32) -> Self {
        let (a, b) = (f64::from(p) * PI, f64::from(q) * PI);
        TestFunction::new(
            format!("sin{p}x_sin{q}y"),
            move |x, y| (a * x).sin() * (b * y).sin(),
            move |x, y| (a * (a * x).cos() * (b * y).sin(), b * (a * x).sin() * (b * y).cos()),
            false,
        )
    }

    /// The affine function `c₀ + c₁x + c₂y`.
    pub fn affine(c0: f64, c1: f64, c2: f64) -> Self {
        TestFunction::new(
            format!("affine({c0},{c1},{c2})"),
            move |x, y| c0 + c1 * x + c2 * y,
            move |_, _| (c1, c2),
            false,
        )
    }

    /// Product with a smooth bump supported in the open square.
    pub fn with_bump(&self) -> Self {
        let (f, g) = (self.f.clone(), self.grad.clone());
        let f2 = f.clone();
        TestFunction::new(
            format!("{}_bump", self.name),
            move |x, y| f(x, y) * bump(x).0 * bump(y).0,
            move |x, y| {
                let ((bx, dbx), (by, dby)) = (bump(x), bump(y));
                let v = f2(x, y);
                let (gx, gy) = g(x, y);
                (gx * bx * by + v * dbx * by, gy * bx * by + v * bx * dby)
            },
            true,
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        let (f, g) = (self.f.clone(), self.grad.clone());
        TestFunction::new(
            format!("{c}*{}", self.name),
            move |x, y| c * f(x, y),
            move |x, y| {
                let (a, b) = g(x, y);
                (c * a, c * b)
            },
            self.compact,
        )
    }

    pub fn plus(&self, other: &TestFunction) -> Self {
        let (f1, g1, f2, g2) = (self.f.clone(), self.grad.clone(), other.f.clone(), other.grad.clone());
        TestFunction::new(
            format!("{}+{}", self.name, other.name),
            move |x, y| f1(x, y) + f2(x, y),
            move |x, y| {
                let ((a, b), (c, d)) = (g1(x, y), g2(x, y));
                (a + c, b + d)
            },
            self.compact && other.compact,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        (self.grad)(x, y)
    }

    /// Largest discrepancy between the analytic gradient and central
    /// differences with step `eps` over the given points.
    pub fn fd_discrepancy(&self, points: &[(f64, f64)], eps: f64) -> f64 {
        points
            .iter()
            .map(|&(x, y)| {
                let fx = (self.value(x + eps, y) - self.value(x - eps, y)) / (2.0 * eps);
                let fy = (self.value(x, y + eps) - self.value(x, y - eps)) / (2.0 * eps);
                let (gx, gy) = self.grad(x, y);
                (fx - gx).abs().max((fy - gy).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Affine map from lattice sites to the plane, `x = (i − i₀)/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Embedding {
    pub scale: f64,
    pub origin: (f64, f64),
}

impl Embedding {
    /// Maps the bounding box of `D ∪ ∂D` onto `[0,1]²`, preserving aspect
    /// ratio (the longer side spans `[0,1]`). A rectangle of interior side
    /// `n − 1` lands on the grid `{k/n}`.
    pub fn bounding_box(domain: &LatticeDomain) -> Result<Self> {
        let sites = domain.interior().iter().chain(domain.boundary());
        let (mut i0, mut i1, mut j0, mut j1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for s in sites {
            i0 = i0.min(s.i);
            i1 = i1.max(s.i);
            j0 = j0.min(s.j);
            j1 = j1.max(s.j);
        }
        if i0 > i1 {
            return Err(invalid("empty domain has no embedding"));
        }
        let scale = f64::from((i1 - i0).max(j1 - j0));
        Ok(Embedding { scale, origin: (f64::from(i0), f64::from(j0)) })
    }

    pub fn point(&self, s: Site) -> (f64, f64) {
        ((f64::from(s.i) - self.origin.0) / self.scale, (f64::from(s.j) - self.origin.1) / self.scale)
    }

    /// `g` evaluated at every site of `D ∪ ∂D`, extended layout.
    pub fn sample(&self, domain: &LatticeDomain, g: &TestFunction) -> Vec<f64> {
        domain.field_from_fn(|s| {
            let (x, y) = self.point(s);
            g.value(x, y)
        })
    }
}

/// Result of the refining midpoint quadrature.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Quadrature {
    pub value: f64,
    pub mesh: usize,
    pub converged: bool,
}

/// Midpoint rule for `∫_{[0,1]²} Σ_i β_i ∂_i g₁ ∂_i g₂` on a `mesh × mesh` grid.
pub fn midpoint_ip(g1: &TestFunction, g2: &TestFunction, beta: Beta, mesh: usize) -> f64 {
    let h = 1.0 / mesh as f64;
    let mut sum = 0.0;
    for a in 0..mesh {
        let x = (a as f64 + 0.5) * h;
        for b in 0..mesh {
            let y = (b as f64 + 0.5) * h;
            let ((p1, q1), (p2, q2)) = (g1.grad(x, y), g2.grad(x, y));
            sum += beta.b1 * p1 * p2 + beta.b2 * q1 * q2;
        }
    }
    sum * h * h
}

const MAX_MESH: usize = 4096;

/// `(g₁,g₂)_∇^β` on the unit square. The mesh doubles from `mesh` until two
/// successive values agree to `1e−4` relative to `√((g₁,g₁)(g₂,g₂))`.
pub fn dirichlet_ip_beta(g1: &TestFunction, g2: &TestFunction, beta: Beta, mesh: usize) -> Result<Quadrature> {
    if mesh < 16 {
        return Err(invalid("quadrature mesh must be at least 16"));
    }
    let mut m = mesh;
    let mut prev = midpoint_ip(g1, g2, beta, m);
    loop {
        let next = midpoint_ip(g1, g2, beta, 2 * m);
        let scale = (midpoint_ip(g1, g1, beta, 2 * m) * midpoint_ip(g2, g2, beta, 2 * m)).sqrt();
        m *= 2;
        if (next - prev).abs() <= 1e-4 * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            return Ok(Quadrature { value: next, mesh: m, converged: true });
        }
        if m >= MAX_MESH {
            return Ok(Quadrature { value: next, mesh: m, converged: false });
        }
        prev = next;
    }
}

/// Like [`dirichlet_ip_beta`] but refuses a non-convergent refinement.
pub fn dirichlet_ip_checked(g1: &TestFunction, g2: &TestFunction, beta: Beta, mesh: usize) -> Result<f64> {
    let q = dirichlet_ip_beta(g1, g2, beta, mesh)?;
    if !q.converged {
        return Err(Error::NotConverged { iterations: q.mesh, residual: f64::NAN });
    }
    Ok(q.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<(f64, f64)> {
        (1..10).flat_map(|a| (1..10).map(move |b| (a as f64 / 10.0, b as f64 / 10.0))).collect()
    }

    #[test]
    fn gradients_match_differences() {
        let pts = grid();
        for g in [
            TestFunction::sine_product(1, 1),
            TestFunction::sine_product(2, 3),
            TestFunction::sine_product(1, 2).with_bump(),
            TestFunction::affine(1.0, 2.0, -3.0).plus(&TestFunction::sine_product(1, 1).scaled(0.5)),
        ] {
            let e1 = g.fd_discrepancy(&pts, 1e-3);
            let e2 = g.fd_discrepancy(&pts, 5e-4);
            assert!(e1 < 1e-3, "{}: {e1}", g.name());
            assert!(e2 < 0.3 * e1 + 1e-9, "{}: not second order {e1} {e2}", g.name());
        }
        assert!(TestFunction::sine_product(1, 1).with_bump().is_compact());
        assert_eq!(TestFunction::sine_product(1, 1).with_bump().value(0.0, 0.5), 0.0);
    }

    #[test]
    fn dirichlet_norm_of_the_ground_mode() {
        let g = TestFunction::sine_product(1, 1);
        let q = dirichlet_ip_beta(&g, &g, Beta::ISOTROPIC, 16).unwrap();
        assert!(q.converged);
        assert!((q.value - PI * PI / 2.0).abs() < 1e-3, "{}", q.value);
        let exact = midpoint_ip(&g, &g, Beta::ISOTROPIC, 1024);
        assert!((exact - PI * PI / 2.0).abs() < 1e-5);
    }

    #[test]
    fn orthogonality_and_bilinearity() {
        let (g1, g2) = (TestFunction::sine_product(1, 1), TestFunction::sine_product(2, 1));
        let b = Beta::new(1.3, 0.7).unwrap();
        let ip = dirichlet_ip_beta(&g1, &g2, Beta::ISOTROPIC, 16).unwrap();
        assert!(ip.value.abs() < 1e-10);
        let a = midpoint_ip(&g1.scaled(2.0), &g2.plus(&g1), b, 32);
        let c = 2.0 * midpoint_ip(&g1, &g2.plus(&g1), b, 32);
        assert!((a - c).abs() < 1e-12);
        // β weights the two directions separately: ∂x-part and ∂y-part are each π²/4.
        let w = midpoint_ip(&g1, &g1, b, 512);
        assert!((w - 2.0 * PI * PI / 4.0).abs() < 1e-4);
        assert!(dirichlet_ip_beta(&g1, &g1, b, 8).is_err());
    }

    #[test]
    fn embedding_of_a_square() {
        let d = LatticeDomain::build_rectangle(9, 9).unwrap();
        let e = Embedding::bounding_box(&d).unwrap();
        assert_eq!(e.scale, 10.0);
        assert_eq!(e.point(Site::new(-1, -1)), (0.0, 0.0));
        assert_eq!(e.point(Site::new(4, 9)), (0.5, 1.0));
        let g = e.sample(&d, &TestFunction::sine_product(1, 1));
        for (k, s) in d.boundary().iter().enumerate() {
            assert!(g[d.n_interior() + k].abs() < 1e-15, "{s:?}");
        }
    }
}
