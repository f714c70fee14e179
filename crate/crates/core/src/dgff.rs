//! Exact sampling of the discrete Gaussian free field with weights `ω`.
//!
//! The law on interior sites is Gaussian with precision `−Δ^ω` and mean the
//! `Δ^ω`-harmonic extension of the boundary values. Draws solve `Lᵀ x = z`
//! for standard normal `z`, where `L Lᵀ = −Δ^ω`.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::harmonic::{factor_precision, harmonic_extend_weighted, BondWeights, SolveOptions};
use crate::lattice::{check_len, LatticeDomain, Site};
use crate::linalg::BandedCholesky;

#[derive(Clone, Debug)]
pub struct DgffSampler {
    domain: LatticeDomain,
    weights: BondWeights,
    factor: BandedCholesky,
    /// Harmonic extension of the boundary values, extended layout.
    mean: Vec<f64>,
}

pub fn build_sampler(domain: &LatticeDomain, weights: &BondWeights, boundary: &[f64]) -> Result<DgffSampler> {
    check_len(boundary, domain.n_boundary())?;
    let factor = factor_precision(domain, weights)?;
    let mean = if boundary.iter().all(|&v| v == 0.0) {
        vec![0.0; domain.n_sites()]
    } else {
        harmonic_extend_weighted(domain, weights, boundary, SolveOptions::with_tol(1e-12))?
    };
    Ok(DgffSampler { domain: domain.clone(), weights: weights.clone(), factor, mean })
}

impl DgffSampler {
    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn weights(&self) -> &BondWeights {
        &self.weights
    }

    pub fn factor(&self) -> &BandedCholesky {
        &self.factor
    }

    /// Mean field in extended layout (boundary values included).
    pub fn boundary_mean(&self) -> &[f64] {
        &self.mean
    }

    /// One exact draw in extended layout.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut field = self.mean.clone();
        self.sample_into(rng, &mut field);
        field
    }

    /// Overwrites the interior of `field` with a fresh draw.
    pub fn sample_into(&self, rng: &mut impl Rng, field: &mut [f64]) {
        let n = self.domain.n_interior();
        let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        self.factor.solve_upper(&mut z);
        for k in 0..n {
            field[k] = self.mean[k] + z[k];
        }
        field[n..].copy_from_slice(&self.mean[n..]);
    }

    /// Resamples `field` on the interior sites `w` from its conditional law
    /// given the values everywhere else.
    pub fn conditional_resample(&self, field: &[f64], w: &[Site], rng: &mut impl Rng) -> Result<Vec<f64>> {
        check_len(field, self.domain.n_sites())?;
        let mut out = field.to_vec();
        if w.is_empty() {
            return Ok(out);
        }
        let mut members = Vec::with_capacity(w.len());
        for &s in w {
            let k = self.domain.interior_index(s).ok_or(Error::NotInterior(s))?;
            members.push(k);
        }
        members.sort_unstable();
        members.dedup();
        let sites: Vec<Site> = members.iter().map(|&k| self.domain.interior()[k]).collect();
        // Components are conditionally independent given the complement.
        for component in components(&sites) {
            self.resample_connected(&mut out, component, rng)?;
        }
        Ok(out)
    }

    fn resample_connected(&self, out: &mut [f64], sites: Vec<Site>, rng: &mut impl Rng) -> Result<()> {
        let sub = LatticeDomain::from_sites(sites)?;
        // Inherit ω on every bond touching the sub-domain.
        let sub_weights = BondWeights::from_bond_fn(&sub, |b| {
            let bond = sub.bond(b);
            let (tail, head) = (bond.tail, bond.head);
            let k = self
                .domain
                .interior_index(tail)
                .or_else(|| self.domain.interior_index(head))
                .expect("sub-domain bonds touch the interior");
            let s = self.domain.interior()[k];
            let other = if s == tail { head } else { tail };
            let d = s.neighbors().iter().position(|&nb| nb == other).expect("adjacent");
            self.weights.per_site()[k][d]
        })?;
        let bdry: Vec<f64> = sub
            .boundary()
            .iter()
            .map(|&s| self.domain.ext_index(s).map(|e| out[e]).ok_or(Error::UnknownSite(s)))
            .collect::<Result<_>>()?;
        let sampler = build_sampler(&sub, &sub_weights, &bdry)?;
        let draw = sampler.sample(rng);
        for (k_sub, &s) in sub.interior().iter().enumerate() {
            let e = self.domain.ext_index(s).expect("member of the domain");
            out[e] = draw[k_sub];
        }
        Ok(())
    }
}

fn components(sites: &[Site]) -> Vec<Vec<Site>> {
    let mut left: HashSet<Site> = sites.iter().copied().collect();
    let mut out = Vec::new();
    for &s in sites {
        if !left.remove(&s) {
            continue;
        }
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            for nb in comp[k].neighbors() {
                if left.remove(&nb) {
                    comp.push(nb);
                }
            }
            k += 1;
        }
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::{greens_function, Beta};
    use crate::rng::stream_rng;

    #[test]
    fn zero_and_linear_boundaries() {
        let d = LatticeDomain::build_rectangle(6, 5).unwrap();
        let w = BondWeights::uniform(&d, 1.0);
        let s = build_sampler(&d, &w, &vec![0.0; d.n_boundary()]).unwrap();
        assert!(s.boundary_mean().iter().all(|&v| v == 0.0));
        let lin = d.boundary_from_fn(|p| 0.5 * f64::from(p.i) - f64::from(p.j));
        let s = build_sampler(&d, &w, &lin).unwrap();
        for (k, p) in d.interior().iter().enumerate() {
            assert!((s.boundary_mean()[k] - (0.5 * f64::from(p.i) - f64::from(p.j))).abs() < 1e-10);
        }
    }

    #[test]
    fn factor_reproduces_precision() {
        let d = LatticeDomain::build_disk(4.5).unwrap();
        let w = BondWeights::from_beta(&d, Beta::new(1.0, 3.0).unwrap());
        let s = build_sampler(&d, &w, &vec![0.0; d.n_boundary()]).unwrap();
        let n = d.n_interior();
        for k in 0..n {
            assert!((s.factor().reconstruct(k, k) - w.total(k)).abs() < 1e-10 * w.total(k));
            for (dir, &nb) in d.neighbors(k).iter().enumerate() {
                if (nb as usize) < n {
                    assert!((s.factor().reconstruct(k, nb as usize) + w.per_site()[k][dir]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_site_variance() {
        let d = LatticeDomain::build_rectangle(1, 1).unwrap();
        let s = build_sampler(&d, &BondWeights::uniform(&d, 1.0), &[0.0; 4]).unwrap();
        let mut rng = stream_rng(3, 0);
        let n = 100_000;
        let var = (0..n).map(|_| s.sample(&mut rng)[0].powi(2)).sum::<f64>() / n as f64;
        let se = 0.25 * 2f64.sqrt() / (n as f64).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "{var}");
    }

    #[test]
    fn reproducible() {
        let d = LatticeDomain::build_rectangle(4, 4).unwrap();
        let w = BondWeights::uniform(&d, 1.0);
        let a = build_sampler(&d, &w, &vec![0.0; d.n_boundary()]).unwrap().sample(&mut stream_rng(9, 1));
        let b = build_sampler(&d, &w, &vec![0.0; d.n_boundary()]).unwrap().sample(&mut stream_rng(9, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn single_site_conditional_law() {
        let d = LatticeDomain::build_rectangle(3, 3).unwrap();
        let w = BondWeights::from_bond_fn(&d, |b| 1.0 + 0.25 * (b.tail % 4) as f64).unwrap();
        let s = build_sampler(&d, &w, &vec![0.0; d.n_boundary()]).unwrap();
        let field: Vec<f64> = (0..d.n_sites()).map(|k| (k as f64 * 0.37).sin()).collect();
        let x = Site::new(1, 1);
        let k = d.interior_index(x).unwrap();
        let total = w.total(k);
        let mean: f64 =
            (0..4).map(|dir| w.per_site()[k][dir] * field[d.neighbors(k)[dir] as usize]).sum::<f64>() / total;
        let mut rng = stream_rng(21, 0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| s.conditional_resample(&field, &[x], &mut rng).unwrap()[k]).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let var = 1.0 / total;
        assert!((m - mean).abs() < 4.0 * (var / n as f64).sqrt());
        assert!((v - var).abs() < 4.0 * var * (2.0 / n as f64).sqrt());

        let untouched = s.conditional_resample(&field, &[x], &mut rng).unwrap();
        for e in 0..d.n_sites() {
            if e != k {
                assert_eq!(untouched[e], field[e]);
            }
        }
        assert_eq!(s.conditional_resample(&field, &[], &mut rng).unwrap(), field);
        assert!(s.conditional_resample(&field, &[Site::new(-1, 0)], &mut rng).is_err());
    }

    #[test]
    fn resampling_preserves_covariance() {
        let d = LatticeDomain::build_rectangle(5, 5).unwrap();
        let w = BondWeights::uniform(&d, 1.0);
        let s = build_sampler(&d, &w, &vec![0.0; d.n_boundary()]).unwrap();
        let g = greens_function(&d, &w).unwrap();
        let block: Vec<Site> = (1..4).flat_map(|j| (1..3).map(move |i| Site::new(i, j))).collect();
        let pairs = [
            (Site::new(1, 1), Site::new(1, 1)),
            (Site::new(2, 2), Site::new(4, 2)),
            (Site::new(1, 3), Site::new(2, 1)),
        ];
        let mut rng = stream_rng(5, 0);
        let n = 20_000;
        let mut acc = [0.0; 3];
        let mut acc2 = [0.0; 3];
        for _ in 0..n {
            let f = s.sample(&mut rng);
            let f = s.conditional_resample(&f, &block, &mut rng).unwrap();
            for (p, (x, y)) in pairs.iter().enumerate() {
                let v = f[d.ext_index(*x).unwrap()] * f[d.ext_index(*y).unwrap()];
                acc[p] += v;
                acc2[p] += v * v;
            }
        }
        for (p, (x, y)) in pairs.iter().enumerate() {
            let m = acc[p] / n as f64;
            let se = ((acc2[p] / n as f64 - m * m) / n as f64).sqrt();
            let exact = g.get(&d, *x, *y);
            assert!((m - exact).abs() < 4.0 * se, "{x:?} {y:?}: {m} vs {exact}");
        }
    }
}
