//! Symmetric, uniformly convex interaction potentials.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Quadratic,
    Cosine,
    Custom { v: Scalar, dv: Scalar, ddv: Scalar },
}

/// Built-in potentials whose derivatives can be inlined into hot loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Quadratic,
    Cosine,
}

/// An interaction `V` with `V′`, `V″` and declared constants
/// `a_V ≤ V″ ≤ A_V`, `|V″(x) − V″(y)| ≤ L|x − y|`.
#[derive(Clone)]
pub struct Potential {
    name: String,
    kind: Kind,
    a_lower: f64,
    a_upper: f64,
    lipschitz: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("a_lower", &self.a_lower)
            .field("a_upper", &self.a_upper)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Potential {
    /// `V(x) = x²/2`.
    pub fn quadratic() -> Self {
        Potential { name: "quadratic".into(), kind: Kind::Quadratic, a_lower: 1.0, a_upper: 1.0, lipschitz: 0.0 }
    }

    /// `V(x) = x² + cos x − 1`, so `V″ = 2 − cos x ∈ [1, 3]`.
    pub fn cosine_perturbed() -> Self {
        Potential { name: "cosine".into(), kind: Kind::Cosine, a_lower: 1.0, a_upper: 3.0, lipschitz: 1.0 }
    }

    /// User-supplied potential. Nothing is checked here; run [`Potential::validate`].
    pub fn custom(
        name: impl Into<String>,
        v: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_lower: f64,
        a_upper: f64,
        lipschitz: f64,
    ) -> Self {
        Potential {
            name: name.into(),
            kind: Kind::Custom { v: Arc::new(v), dv: Arc::new(dv), ddv: Arc::new(ddv) },
            a_lower,
            a_upper,
            lipschitz,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "quadratic" => Ok(Self::quadratic()),
            "cosine" => Ok(Self::cosine_perturbed()),
            other => Err(invalid(format!("unknown potential {other:?} (expected quadratic or cosine)"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin(&self) -> Option<Builtin> {
        match self.kind {
            Kind::Quadratic => Some(Builtin::Quadratic),
            Kind::Cosine => Some(Builtin::Cosine),
            Kind::Custom { .. } => None,
        }
    }

    pub fn a_lower(&self) -> f64 {
        self.a_lower
    }

    pub fn a_upper(&self) -> f64 {
        self.a_upper
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Quadratic => 0.5 * x * x,
            Kind::Cosine => x * x + x.cos() - 1.0,
            Kind::Custom { v, .. } => v(x),
        }
    }

    #[inline]
    pub fn dv(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Quadratic => x,
            Kind::Cosine => 2.0 * x - x.sin(),
            Kind::Custom { dv, .. } => dv(x),
        }
    }

    #[inline]
    pub fn ddv(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Quadratic => 1.0,
            Kind::Cosine => 2.0 - x.cos(),
            Kind::Custom { ddv, .. } => ddv(x),
        }
    }

    /// Largest Euler–Maruyama step whose linearised drift stays stable.
    pub fn max_stable_dt(&self) -> f64 {
        1.0 / (8.0 * self.a_upper)
    }

    pub fn default_dt(&self) -> f64 {
        0.01f64.min(self.max_stable_dt())
    }

    /// Audits symmetry, `V(0) = 0`, the convexity bounds and the Lipschitz
    /// bound on `V″` over a uniform grid of `[−half_range, half_range]`.
    pub fn validate(&self, half_range: f64, samples: usize) -> Result<ValidationReport> {
        if samples < 2 || !(half_range > 0.0) {
            return Err(invalid("validation needs at least 2 samples on a positive range"));
        }
        const SLACK: f64 = 1e-12;
        let grid: Vec<f64> =
            (0..samples).map(|k| -half_range + 2.0 * half_range * k as f64 / (samples - 1) as f64).collect();
        let mut checks = vec![
            Check::new(Condition::Normalized),
            Check::new(Condition::Symmetry),
            Check::new(Condition::ConvexityLower),
            Check::new(Condition::ConvexityUpper),
            Check::new(Condition::Lipschitz),
        ];

        checks[0].record(0.0, SLACK - self.v(0.0).abs());
        for &x in &grid {
            let scale = 1.0 + self.v(x).abs();
            checks[1].record(x, SLACK * scale - (self.v(x) - self.v(-x)).abs());
            let c = self.ddv(x);
            checks[2].record(x, c - self.a_lower + SLACK);
            checks[3].record(x, self.a_upper - c + SLACK);
        }
        for w in grid.windows(2) {
            let slope = (self.ddv(w[1]) - self.ddv(w[0])).abs();
            checks[4].record(w[0], self.lipschitz * (w[1] - w[0]) + SLACK - slope);
        }
        Ok(ValidationReport { potential: self.name.clone(), checks })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    Normalized,
    Symmetry,
    ConvexityLower,
    ConvexityUpper,
    Lipschitz,
}

/// Worst margin seen for one condition; negative means violated.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub condition: Condition,
    pub worst_margin: f64,
    pub witness: f64,
}

impl Check {
    fn new(condition: Condition) -> Self {
        Check { condition, worst_margin: f64::INFINITY, witness: f64::NAN }
    }

    fn record(&mut self, x: f64, margin: f64) {
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.witness = x;
        }
    }

    pub fn passed(&self) -> bool {
        self.worst_margin >= 0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub potential: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}
