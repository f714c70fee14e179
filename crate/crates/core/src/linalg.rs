//! Banded Cholesky factorization for lattice precision operators.
//!
//! With row-major site ordering, the interior Laplacian of a domain whose
//! rows are at most `w` sites wide has half-bandwidth `w`, so factoring costs
//! `O(n·w²)` and a solve `O(n·w)`.

use crate::error::{Error, Result};

/// Lower-triangular factor `L` of a symmetric positive definite band matrix
/// `Q = L Lᵀ` with half-bandwidth `p`.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    p: usize,
    // Row i holds L[i][i-p..=i]; entries left of column 0 stay zero.
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors the matrix whose lower band is given by `entry(i, j)` for
    /// `i − p ≤ j ≤ i`.
    pub fn factor(n: usize, p: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = p + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                let kmin = lo.max(j.saturating_sub(p));
                let mut s = entry(i, j);
                for k in kmin..j {
                    s -= band[i * w + k + p - i] * band[j * w + k + p - j];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    band[i * w + p] = s.sqrt();
                } else {
                    band[i * w + j + p - i] = s / band[j * w + p];
                }
            }
        }
        Ok(BandedCholesky { n, p, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.p
    }

    /// `L[i][j]`, zero outside the band.
    pub fn l(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.p {
            0.0
        } else {
            self.band[i * (self.p + 1) + j + self.p - i]
        }
    }

    /// In place `L y = b`.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let w = self.p + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.p);
            let row = &self.band[i * w..(i + 1) * w];
            let mut s = b[i];
            for k in lo..i {
                s -= row[k + self.p - i] * b[k];
            }
            b[i] = s / row[self.p];
        }
    }

    /// In place `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &mut [f64]) {
        let w = self.p + 1;
        for i in (0..self.n).rev() {
            let xi = y[i] / self.band[i * w + self.p];
            y[i] = xi;
            let lo = i.saturating_sub(self.p);
            for k in lo..i {
                y[k] -= self.band[i * w + k + self.p - i] * xi;
            }
        }
    }

    /// In place `Q x = b`.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_upper(b);
    }

    /// `bᵀ Q⁻¹ b = |L⁻¹ b|²`.
    pub fn inverse_quadratic_form(&self, b: &[f64]) -> f64 {
        let mut y = b.to_vec();
        self.solve_lower(&mut y);
        y.iter().map(|v| v * v).sum()
    }

    /// `(L Lᵀ)[i][j]` reconstructed from the factor.
    pub fn reconstruct(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.p {
            return 0.0;
        }
        let kmin = hi.saturating_sub(self.p);
        (kmin..=lo).map(|k| self.l(hi, k) * self.l(lo, k)).sum()
    }
}
