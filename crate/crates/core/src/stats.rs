//! Sample statistics used by the Monte Carlo diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Estimate { value, stderr }
    }

    /// Whether `|value − target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }

    /// `|value − target| / stderr`.
    pub fn z(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }
}

/// `√(a² + b²)`.
pub fn combined_stderr(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean with the i.i.d. standard error `s/√n`.
pub fn mean_and_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Estimate::new(mean(xs), f64::NAN);
    }
    Estimate::new(mean(xs), (variance(xs) / n).sqrt())
}

/// Mean with a standard error from `batches` contiguous batch means.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let size = xs.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return mean_and_stderr(xs);
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    Estimate::new(mean(xs), mean_and_stderr(&means).stderr)
}

/// Sample variance with a batch-means standard error of `(x − x̄)²`.
pub fn variance_estimate(xs: &[f64], batches: usize) -> Estimate {
    let m = mean(xs);
    let n = xs.len() as f64;
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2) * n / (n - 1.0)).collect();
    batch_means(&sq, batches)
}

/// Sample covariance of paired samples with a batch-means standard error.
pub fn covariance_estimate(xs: &[f64], ys: &[f64], batches: usize) -> Estimate {
    let (mx, my) = (mean(xs), mean(ys));
    let n = xs.len() as f64;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my) * n / (n - 1.0)).collect();
    batch_means(&prods, batches)
}

/// Lag-`k` sample autocorrelation.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    if lag >= xs.len() {
        return 0.0;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = xs.iter().zip(&xs[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    num / denom
}

/// Sample skewness `g₁` and excess kurtosis `g₂` with their z-scores under normality.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Normality {
    pub n: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub z_skewness: f64,
    pub z_kurtosis: f64,
}

pub fn normality(xs: &[f64]) -> Normality {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in xs {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let se_skew = (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt();
    let se_kurt = (24.0 * n * (n - 1.0).powi(2) / ((n - 3.0) * (n - 2.0) * (n + 3.0) * (n + 5.0))).sqrt();
    Normality {
        n: xs.len(),
        skewness,
        excess_kurtosis,
        z_skewness: skewness / se_skew,
        z_kurtosis: excess_kurtosis / se_kurt,
    }
}

/// Two-sided p-value of a standard normal z-score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    let n = Normal::standard();
    2.0 * (1.0 - n.cdf(z.abs()))
}

/// Two-sample Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    KsTest { statistic: d, p_value, n1, n2 }
}

/// One-sample Kolmogorov–Smirnov test against a continuous `cdf`; `n2` is 0.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsTest {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sq = n.sqrt();
    KsTest { statistic: d, p_value: kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d), n1: v.len(), n2: 0 }
}

/// One-sample KS against the normal law with the sample's own mean and
/// standard deviation.
pub fn ks_fitted_normal(xs: &[f64]) -> KsTest {
    let (m, s) = (mean(xs), variance(xs).sqrt());
    match Normal::new(m, s) {
        Ok(law) => ks_one_sample(xs, |x| law.cdf(x)),
        Err(_) => KsTest { statistic: f64::NAN, p_value: f64::NAN, n1: xs.len(), n2: 0 },
    }
}

/// `(E|M|^p)^{1/p}` of the sample.
pub fn lp_moment(xs: &[f64], p: f64) -> f64 {
    (xs.iter().map(|x| x.abs().powf(p)).sum::<f64>() / xs.len() as f64).powf(1.0 / p)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&xs), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert!((autocorrelation(&[1.0, -1.0, 1.0, -1.0], 1) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn normal_samples_look_normal() {
        let mut rng = stream_rng(1, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        let t = normality(&xs);
        assert!(t.z_skewness.abs() < 4.0 && t.z_kurtosis.abs() < 4.0, "{t:?}");
        let ex: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(rand_distr::Exp1)).collect();
        let t = normality(&ex);
        assert!(t.skewness > 1.5 && t.excess_kurtosis > 4.0);
    }

    #[test]
    fn ks_has_size_and_power() {
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-3);
        let mut rng = stream_rng(2, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.001);
        let c: Vec<f64> = b.iter().map(|x| x + 0.3).collect();
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
        assert!(ks_fitted_normal(&a).p_value > 0.001);
        let u: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).p_value > 0.001);
        assert!(ks_one_sample(&u, |x| x.clamp(0.0, 1.0).powi(2)).p_value < 1e-6);
        let same = ks_two_sample(&a, &a);
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
    }

    #[test]
    fn batch_means_of_iid_match_naive() {
        let mut rng = stream_rng(3, 0);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.sample(StandardNormal)).collect();
        let a = batch_means(&xs, 40);
        let b = mean_and_stderr(&xs);
        assert!((a.stderr / b.stderr - 1.0).abs() < 0.35);
        assert!(normal_two_sided_p(1.959964) - 0.05 < 1e-5);
    }
}
