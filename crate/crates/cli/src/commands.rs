//! One function per subcommand: resolve settings, run, tabulate, judge.

use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use glsim_core::dgff::build_sampler;
use glsim_core::experiments::{
    brascamp_lieb_check, clt_experiment, coupling_experiment, entropy_estimate, mean_harmonic_experiment,
    stationary_samples, BoundarySpec, ChainPlan, CltConfig, CltSampler, CouplingConfig, EntropyConfig,
    MeanHarmonicConfig, TestFunction,
};
use glsim_core::gibbs::{orientation_averages, reflection_test, sample_eta, tilt_estimate, Axis, GibbsConfig};
use glsim_core::harmonic::{
    beurling_experiment, dirichlet_energy, greens_function, half_line_obstacle, harmonic_extend, BeurlingConfig,
};
use glsim_core::hswalk::{estimate_covariance, estimate_mean, HsConfig};
use glsim_core::potential::Builtin;
use glsim_core::rng::derive_seed;
use glsim_core::stats::{batch_means, combined_stderr, variance_estimate};
use glsim_core::{Beta, BondSet, BondWeights, LatticeDomain, Potential, Site, TorusDomain};

use crate::config::Settings;
use crate::output::{num, RunOutput, SeedRecord, Table, Verdict};

const SOLVER_TOL: f64 = 1e-9;

fn is_quadratic(p: &Potential) -> bool {
    p.builtin() == Some(Builtin::Quadratic)
}

/// Interior site closest to the centroid of the interior.
fn centre_site(d: &LatticeDomain) -> Site {
    let n = d.n_interior() as f64;
    let ci = d.interior().iter().map(|s| f64::from(s.i)).sum::<f64>() / n;
    let cj = d.interior().iter().map(|s| f64::from(s.j)).sum::<f64>() / n;
    let dist = |s: &Site| (f64::from(s.i) - ci).powi(2) + (f64::from(s.j) - cj).powi(2);
    *d.interior().iter().min_by(|a, b| dist(a).total_cmp(&dist(b))).expect("domain is not empty")
}

fn stream_seeds(label: &str, seed: u64, streams: usize) -> Vec<SeedRecord> {
    (0..streams).map(|k| SeedRecord { replica: format!("{label} {k}"), seed, stream: k as u64 }).collect()
}

fn chain_plan(s: &Settings, p: &Potential, dt_default: f64, burn: f64, thin: f64) -> Result<ChainPlan> {
    Ok(ChainPlan {
        dt: s.dt_or(p, dt_default)?,
        burn_factor: match s.burn {
            Some(0.0) => 0.0,
            b => Settings::positive(b, burn, "burn")?,
        },
        thin_factor: Settings::positive(s.thin, thin, "thin")?,
        chains: Settings::count(s.chains, 1, "chains")?,
    })
}

fn sizes(s: &Settings, default: &[usize]) -> Result<Vec<usize>> {
    let v = s.sizes.clone().unwrap_or_else(|| default.to_vec());
    if v.is_empty() || v.iter().any(|&r| r < 4) {
        bail!("sizes must be a nonempty list of side lengths ≥ 4, got {v:?}");
    }
    Ok(v)
}

/// `sample`: stationary Langevin samples.
pub fn sample(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let d = Arc::new(s.domain("rect:16x16")?);
    let tilt = s.tilt()?;
    let bspec = s.boundary.unwrap_or(BoundarySpec::Tilt);
    let bd = bspec.values(&d, tilt);
    let plan = chain_plan(s, &p, p.default_dt(), 20.0, 2.0)?;
    let n = Settings::count(s.samples, 100, "samples")?;
    let seed = s.seed.unwrap_or(0);
    let c = d.interior_index(centre_site(&d)).expect("centre is interior");
    let ones = BondWeights::uniform(&d, 1.0);
    let rows = stationary_samples(&d, &p, &bd, &plan, n, seed, |st| {
        let energy = dirichlet_energy(&d, &ones, st.field(), BondSet::InteriorAndCrossing).unwrap_or(f64::NAN);
        let v = st.values();
        (st.time(), v[c], v.iter().sum::<f64>() / v.len() as f64, energy)
    })?;
    let mut t = Table::new("samples.csv", &["sample", "time", "h_centre", "mean_h", "gradient_energy"]);
    for (k, r) in rows.iter().enumerate() {
        t.push(vec![k.to_string(), num(r.0), num(r.1), num(r.2), num(r.3)]);
    }
    let finite = rows.iter().all(|r| r.1.is_finite() && r.2.is_finite() && r.3.is_finite());
    let centre: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let batches = Settings::count(s.batches, 20, "batches")?.min(n);
    Ok(RunOutput {
        tables: vec![t],
        report: json!({
            "centre": centre_site(&d),
            "mean_h_centre": batch_means(&centre, batches),
            "var_h_centre": variance_estimate(&centre, batches),
        }),
        verdicts: vec![Verdict::new("finite", finite, "every recorded value is finite")],
        seeds: stream_seeds("chain", seed, plan.chains),
        resolved: json!({
            "potential": p.name(), "domain": s.domain.as_deref().unwrap_or("rect:16x16"), "tilt": tilt,
            "boundary": bspec, "plan": plan, "samples": n, "seed": seed,
        }),
    })
}

/// `dgff`: exact Gaussian draws with unit weights.
pub fn dgff(s: &Settings) -> Result<RunOutput> {
    let spec = s.domain.as_deref().unwrap_or("rect:9x9");
    let d = s.domain("rect:9x9")?;
    let tilt = s.tilt()?;
    let bspec = s.boundary.unwrap_or(BoundarySpec::Tilt);
    let bd = bspec.values(&d, tilt);
    let n = Settings::count(s.samples, 1000, "samples")?;
    let batches = Settings::count(s.batches, 50, "batches")?.min(n);
    let seed = s.seed.unwrap_or(0);
    let ones = BondWeights::uniform(&d, 1.0);
    let sampler = build_sampler(&d, &ones, &bd)?;
    let mut rng = glsim_core::rng::stream_rng(seed, 0);
    let ni = d.n_interior();
    let header = std::iter::once("sample".to_string()).chain(d.interior().iter().map(|x| format!("h_{}_{}", x.i, x.j)));
    let mut t = Table::with_header("samples.csv", header.collect());
    let x = centre_site(&d);
    let c = d.interior_index(x).expect("centre is interior");
    let mut centre = Vec::with_capacity(n);
    let mut field = sampler.boundary_mean().to_vec();
    for k in 0..n {
        sampler.sample_into(&mut rng, &mut field);
        centre.push(field[c]);
        t.push(std::iter::once(k.to_string()).chain(field[..ni].iter().map(|v| num(*v))).collect());
    }
    let g = greens_function(&d, &ones)?.get(&d, x, x);
    let mean_target = sampler.boundary_mean()[c];
    let var = variance_estimate(&centre, batches);
    let mean = batch_means(&centre, batches);
    Ok(RunOutput {
        tables: vec![t],
        report: json!({ "centre": x, "variance": var, "green": g, "mean": mean, "harmonic_mean": mean_target }),
        verdicts: vec![
            Verdict::new(
                "variance",
                var.within(g, 5.0),
                format!("Var h(centre) = {:.4e} ± {:.4e} vs G = {g:.4e}", var.value, var.stderr),
            ),
            Verdict::new(
                "mean",
                mean.within(mean_target, 5.0),
                format!("E h(centre) = {:.4e} ± {:.4e} vs {mean_target:.4e}", mean.value, mean.stderr),
            ),
        ],
        seeds: stream_seeds("sampler", seed, 1),
        resolved: json!({ "domain": spec, "tilt": tilt, "boundary": bspec, "samples": n, "batches": batches, "seed": seed }),
    })
}

/// `hs`: random-walk representation of the covariance and the mean at the centre.
pub fn hs(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let spec = s.domain.as_deref().unwrap_or("rect:7x7");
    let d = Arc::new(s.domain("rect:7x7")?);
    let tilt = s.tilt()?;
    let bspec = s.boundary.unwrap_or(BoundarySpec::Sine { amplitude: 1.0, waves: 1.0 });
    let bd = bspec.values(&d, tilt);
    let seed = s.seed.unwrap_or(0);
    let walks = Settings::count(s.walks, 500, "walks")?;
    let n_traj = Settings::count(s.replicas, 20, "replicas")?;
    let cfg = HsConfig {
        dt: s.dt(&p)?,
        burn_factor: Settings::positive(s.burn, 2.0, "burn")?,
        skip_factor: Settings::positive(s.thin, 0.5, "thin")?,
        chains: Settings::count(s.chains, 1, "chains")?,
        ..HsConfig::for_potential(&p)
    };
    let x = centre_site(&d);
    let k = d.interior_index(x).expect("centre is interior");
    let (cov_seed, mean_seed, mc_seed) = (derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3));
    let cov = estimate_covariance(&d, &p, &bd, x, x, walks, n_traj, &cfg, cov_seed)?;
    let mean = estimate_mean(&d, &p, &bd, x, 4, walks, n_traj, &cfg, mean_seed)?;

    let (var_ref, mean_ref) = if is_quadratic(&p) {
        let g = greens_function(&d, &BondWeights::uniform(&d, 1.0))?.get(&d, x, x);
        let h = harmonic_extend(&d, &bd, Beta::ISOTROPIC, 1e-12)?[k];
        (glsim_core::stats::Estimate::new(g, 0.0), glsim_core::stats::Estimate::new(h, 0.0))
    } else {
        let n = Settings::count(s.samples, 20_000, "samples")?;
        let plan = ChainPlan { thin_factor: 0.25, chains: cfg.chains, ..ChainPlan::new(&p) };
        let plan = ChainPlan { dt: cfg.dt, ..plan };
        let vals: Vec<f64> = stationary_samples(&d, &p, &bd, &plan, n, mc_seed, |st| st.values()[k])?;
        (variance_estimate(&vals, 50), batch_means(&vals, 50))
    };
    let z = |a: glsim_core::stats::Estimate, b: glsim_core::stats::Estimate| {
        (a.value - b.value) / combined_stderr(a.stderr, b.stderr)
    };
    let (zc, zm) = (z(cov.estimate, var_ref), z(mean.estimate, mean_ref));

    let mut t = Table::new("segments.csv", &["estimator", "index", "value"]);
    for (i, v) in cov.batches.iter().enumerate() {
        t.push(vec!["covariance".into(), i.to_string(), num(*v)]);
    }
    for (i, v) in mean.batches.iter().enumerate() {
        t.push(vec!["mean_node".into(), i.to_string(), num(*v)]);
    }
    let reference = if is_quadratic(&p) { "exact" } else { "direct MCMC" };
    Ok(RunOutput {
        tables: vec![t],
        report: json!({ "site": x, "covariance": cov, "mean": mean, "reference": reference,
                        "reference_variance": var_ref, "reference_mean": mean_ref }),
        verdicts: vec![
            Verdict::new("covariance", zc.abs() <= 4.0, format!("z = {zc:.3} against the {reference} variance")),
            Verdict::new("mean", zm.abs() <= 4.0, format!("z = {zm:.3} against the {reference} mean")),
        ],
        seeds: vec![
            SeedRecord { replica: "covariance".into(), seed: cov_seed, stream: 0 },
            SeedRecord { replica: "mean".into(), seed: mean_seed, stream: 0 },
            SeedRecord { replica: "direct".into(), seed: mc_seed, stream: 0 },
        ],
        resolved: json!({ "potential": p.name(), "domain": spec, "tilt": tilt, "boundary": bspec, "walks": walks,
                          "trajectories": n_traj, "hs": cfg, "seed": seed }),
    })
}

/// `gibbs`: stationary torus samples, `a_u` and reflection tests.
pub fn gibbs(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let side = s.side.unwrap_or(32);
    if side < 8 {
        bail!("torus side must be at least 8");
    }
    let tilt = s.tilt()?;
    let mut cfg = GibbsConfig::new(side, &p);
    cfg.tilt = tilt;
    cfg.dt = s.dt(&p)?;
    cfg.burn = Settings::positive(s.burn, 2.0, "burn")? * (side * side) as f64;
    cfg.thin = Settings::positive(s.thin, 4.0, "thin")?;
    cfg.n_samples = Settings::count(s.samples, 500, "samples")?;
    cfg.chains = Settings::count(s.chains, 1, "chains")?;
    cfg.seed = s.seed.unwrap_or(0);
    let samples = sample_eta(&p, &cfg)?;
    let est = tilt_estimate(&p, &samples)?;
    let mut t = Table::new("eta.csv", &["sample", "ddv_horizontal", "ddv_vertical", "eta_horizontal", "eta_vertical"]);
    for (k, e) in samples.iter().enumerate() {
        let a = orientation_averages(e, |x| p.ddv(x));
        let m = orientation_averages(e, |x| x);
        t.push(vec![k.to_string(), num(a[0]), num(a[1]), num(m[0]), num(m[1])]);
    }
    let (lo, hi) = (p.a_lower(), p.a_upper());
    let mut verdicts = vec![Verdict::new(
        "range",
        [est.a1.value, est.a2.value].iter().all(|a| (lo..=hi).contains(a)),
        format!("a1 = {:.4e}, a2 = {:.4e} in [{lo}, {hi}]", est.a1.value, est.a2.value),
    )];
    let mut reflections = Vec::new();
    if tilt == [0.0, 0.0] {
        let gap = (est.a1.value - est.a2.value).abs();
        let se = combined_stderr(est.a1.stderr, est.a2.stderr);
        verdicts.push(Verdict::new(
            "isotropy",
            gap <= 3.0 * se,
            format!("|a1 − a2| = {gap:.4e} vs 3·SE = {:.4e}", 3.0 * se),
        ));
        let torus = TorusDomain::new(side)?;
        for axis in [Axis::Horizontal, Axis::Vertical] {
            let r = reflection_test(&torus, &samples, axis, &|x| x, 0.0)?;
            verdicts.push(Verdict::new(
                &format!("reflection_{axis:?}").to_lowercase(),
                r.ks.p_value >= 0.01,
                format!("two-sample KS p = {:.4e}", r.ks.p_value),
            ));
            reflections.push(r);
        }
    }
    Ok(RunOutput {
        tables: vec![t],
        report: json!({ "tilt_estimate": est, "reflection": reflections }),
        verdicts,
        seeds: stream_seeds("chain", cfg.seed, cfg.chains),
        resolved: json!({ "potential": p.name(), "gibbs": cfg }),
    })
}

fn parse_tests(s: &Settings) -> Result<Vec<TestFunction>> {
    let specs = s.tests.clone().unwrap_or_else(|| vec!["1x1".into(), "2x1".into()]);
    specs
        .iter()
        .map(|t| {
            let (a, b) = t.split_once('x').ok_or_else(|| anyhow!("test function {t:?}: expected PxQ"))?;
            Ok(TestFunction::sine_product(a.parse()?, b.parse()?))
        })
        .collect()
}

fn parse_boundary_fn(spec: &str) -> Result<TestFunction> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["affine", c0, c1, c2] => Ok(TestFunction::affine(c0.parse()?, c1.parse()?, c2.parse()?)),
        _ => bail!("boundary function {spec:?}: expected affine:C0:C1:C2"),
    }
}

/// `clt`: fluctuations of `ξ(g)`.
pub fn clt(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let n = s.n.unwrap_or(32);
    let tilt = s.tilt()?;
    let seed = s.seed.unwrap_or(0);
    let mut cfg = CltConfig::new(n, p.clone());
    cfg.tilt = tilt;
    cfg.tests = parse_tests(s)?;
    cfg.boundary = s.boundary_fn.as_deref().map(parse_boundary_fn).transpose()?;
    cfg.sampler = s.sampler.unwrap_or_default();
    cfg.n_samples = Settings::count(s.samples, 5000, "samples")?;
    cfg.batches = Settings::count(s.batches, 50, "batches")?;
    cfg.plan = chain_plan(s, &p, p.max_stable_dt(), 20.0, 2.0)?;
    cfg.seed = seed;
    let mut seeds = stream_seeds("chain", seed, cfg.plan.chains);
    let mut beta_source = "given";
    cfg.beta = match s.beta.as_deref() {
        Some([a, b]) => Beta::new(*a, *b)?,
        Some(other) => bail!("beta needs two components, got {other:?}"),
        None if is_quadratic(&p) => {
            beta_source = "quadratic";
            Beta::ISOTROPIC
        }
        None => {
            beta_source = "torus estimate";
            let mut g = GibbsConfig::new(32, &p);
            g.tilt = tilt;
            g.n_samples = 200;
            g.seed = derive_seed(seed, 0xBE7A);
            seeds.push(SeedRecord { replica: "beta torus".into(), seed: g.seed, stream: 0 });
            tilt_estimate(&p, &sample_eta(&p, &g)?)?.beta
        }
    };
    let r = clt_experiment(&cfg)?;

    let header = std::iter::once("sample".to_string()).chain(r.stats.iter().map(|x| format!("xi_{}", x.name)));
    let mut t = Table::with_header("xi.csv", header.collect());
    for k in 0..cfg.n_samples {
        t.push(std::iter::once(k.to_string()).chain(r.stats.iter().map(|x| num(x.samples[k]))).collect());
    }
    let mut verdicts = Vec::new();
    for x in &r.stats {
        let (zs, zk) = (x.normality.z_skewness, x.normality.z_kurtosis);
        verdicts.push(Verdict::new(
            &format!("normality_{}", x.name),
            zs.abs() <= 3.0 && zk.abs() <= 3.0,
            format!("skewness z = {zs:.3}, kurtosis z = {zk:.3}"),
        ));
        if let Some(o) = x.oracle_variance {
            verdicts.push(Verdict::new(
                &format!("oracle_{}", x.name),
                x.variance.within(o, 4.0),
                format!("Var = {:.4e} ± {:.4e} vs oracle {o:.4e}", x.variance.value, x.variance.stderr),
            ));
        }
        if cfg.boundary.is_some() {
            verdicts.push(Verdict::new(
                &format!("mean_{}", x.name),
                x.mean.within(x.mean_target, 4.0),
                format!("E ξ = {:.4e} ± {:.4e} vs {:.4e}", x.mean.value, x.mean.stderr, x.mean_target),
            ));
        }
    }
    let first = &r.stats[0];
    for x in &r.stats[1..] {
        let z = (x.ratio.value - first.ratio.value) / combined_stderr(x.ratio.stderr, first.ratio.stderr);
        verdicts.push(Verdict::new(
            &format!("ratio_{}_{}", first.name, x.name),
            z.abs() <= 3.0,
            format!("ratios {:.4e} and {:.4e} (z = {z:.3})", first.ratio.value, x.ratio.value),
        ));
    }
    verdicts.push(Verdict::new(
        "decorrelated",
        r.decorrelated,
        format!("lag-1 autocorrelations {:?}", r.stats.iter().map(|x| x.lag1).collect::<Vec<_>>()),
    ));
    let sampler = match cfg.sampler {
        CltSampler::Langevin => "langevin",
        CltSampler::ExactGaussian => "exact-gaussian",
    };
    Ok(RunOutput {
        tables: vec![t],
        report: json!({ "clt": r, "ratio_spread": r.ratio_spread(), "beta_source": beta_source }),
        verdicts,
        seeds,
        resolved: json!({
            "potential": p.name(), "n": n, "tilt": tilt, "boundary_fn": s.boundary_fn, "beta": cfg.beta,
            "tests": r.stats.iter().map(|x| x.name.clone()).collect::<Vec<_>>(), "samples": cfg.n_samples,
            "plan": cfg.plan, "sampler": sampler, "batches": cfg.batches, "seed": seed,
        }),
    })
}

fn size_seeds(seed: u64, sizes: &[usize], streams: usize) -> Vec<SeedRecord> {
    sizes
        .iter()
        .flat_map(|&r| {
            (0..streams).map(move |k| SeedRecord {
                replica: format!("R {r} stream {k}"),
                seed: derive_seed(seed, r as u64),
                stream: k as u64,
            })
        })
        .collect()
}

/// `coupling`: near-harmonicity of coupled differences.
pub fn coupling(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let mut cfg = CouplingConfig::new(sizes(s, &[16, 32])?, p.clone());
    cfg.tilt = s.tilt()?;
    cfg.psi = s.boundary.unwrap_or(BoundarySpec::Sine { amplitude: 1.0, waves: 1.0 });
    cfg.psi_tilde = s.boundary_tilde.unwrap_or(BoundarySpec::Tilt);
    cfg.r_fraction = Settings::positive(s.r_fraction, 0.25, "r_fraction")?;
    cfg.eps_fraction = Settings::positive(s.eps_fraction, 0.1, "eps_fraction")?;
    cfg.replicas = Settings::count(s.replicas, 20, "replicas")?;
    cfg.spacing_factor = Settings::positive(s.spacing, 0.1, "spacing")?;
    cfg.plan = chain_plan(s, &p, p.default_dt(), 1.0, 2.0)?;
    cfg.seed = s.seed.unwrap_or(0);
    let r = coupling_experiment(&cfg)?;
    let mut t = Table::new("replicas.csv", &["size", "replica", "deviation", "residual"]);
    let mut verdicts = Vec::new();
    for z in &r.sizes {
        for (k, (d, res)) in z.deviations.iter().zip(&z.residuals).enumerate() {
            t.push(vec![z.size.to_string(), k.to_string(), num(*d), num(*res)]);
        }
        verdicts.push(Verdict::new(&format!("burn_in_R{}", z.size), z.burn_in_ok, "burn-in gap energy decayed"));
        if is_quadratic(&p) {
            let ok = z.deviations.iter().zip(&z.residuals).all(|(d, res)| *d <= SOLVER_TOL + 2.0 * res);
            verdicts.push(Verdict::new(
                &format!("quadratic_R{}", z.size),
                ok,
                "deviation ≤ solver tolerance + 2·residual",
            ));
        }
    }
    if r.sizes.len() > 1 {
        let ex: Vec<f64> = r.sizes.iter().map(|z| z.exceedance).collect();
        verdicts.push(Verdict::new(
            "exceedance_trend",
            r.exceedance_decreasing(),
            format!("exceedance fractions {ex:?}"),
        ));
    }
    Ok(RunOutput {
        tables: vec![t],
        report: serde_json::to_value(&r)?,
        verdicts,
        seeds: size_seeds(cfg.seed, &cfg.sizes, cfg.plan.chains),
        resolved: json!({
            "potential": p.name(), "sizes": cfg.sizes, "tilt": cfg.tilt, "psi": cfg.psi, "psi_tilde": cfg.psi_tilde,
            "r_fraction": cfg.r_fraction, "eps_fraction": cfg.eps_fraction, "replicas": cfg.replicas,
            "spacing": cfg.spacing_factor, "plan": cfg.plan, "seed": cfg.seed,
        }),
    })
}

/// `mean-harm`: harmonicity of the mean field.
pub fn mean_harm(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let mut cfg = MeanHarmonicConfig::new(sizes(s, &[16, 32])?, p.clone());
    cfg.tilt = s.tilt()?;
    cfg.boundary = s.boundary.unwrap_or(BoundarySpec::Sine { amplitude: 0.5, waves: 1.0 });
    cfg.r_fraction = Settings::positive(s.r_fraction, 0.25, "r_fraction")?;
    cfg.n_samples = Settings::count(s.samples, 2000, "samples")?;
    cfg.record_every = s.record_every.unwrap_or(25);
    cfg.batches = Settings::count(s.batches, 20, "batches")?;
    cfg.replicas = Settings::count(s.replicas, 3, "replicas")?;
    cfg.antithetic = s.antithetic.unwrap_or(cfg.tilt == [0.0, 0.0]);
    cfg.plan = chain_plan(s, &p, p.default_dt(), 1.0, 2.0)?;
    cfg.seed = s.seed.unwrap_or(0);
    let r = mean_harmonic_experiment(&cfg)?;
    let mut t =
        Table::new("replicas.csv", &["size", "replica", "deviation", "max_stderr", "budget", "ratio", "underpowered"]);
    for z in &r.sizes {
        for (k, x) in z.replicas.iter().enumerate() {
            t.push(vec![
                z.size.to_string(),
                k.to_string(),
                num(x.deviation),
                num(x.max_stderr),
                num(x.budget),
                num(x.ratio),
                x.underpowered.to_string(),
            ]);
        }
    }
    let first = &r.sizes[0];
    let mut verdicts = vec![Verdict::new(
        "budget",
        first.max_ratio < 3.0,
        format!("largest deviation/budget at R = {} is {:.4}", first.size, first.max_ratio),
    )];
    if r.sizes.len() > 1 {
        let med: Vec<f64> = r.sizes.iter().map(|z| z.median_deviation).collect();
        verdicts.push(Verdict::new("median_trend", r.deviation_decreasing(), format!("median deviations {med:?}")));
    }
    Ok(RunOutput {
        tables: vec![t],
        report: serde_json::to_value(&r)?,
        verdicts,
        seeds: size_seeds(cfg.seed, &cfg.sizes, cfg.replicas),
        resolved: json!({
            "potential": p.name(), "sizes": cfg.sizes, "tilt": cfg.tilt, "boundary": cfg.boundary,
            "r_fraction": cfg.r_fraction, "samples": cfg.n_samples, "record_every": cfg.record_every,
            "batches": cfg.batches, "replicas": cfg.replicas, "antithetic": cfg.antithetic, "plan": cfg.plan,
            "seed": cfg.seed,
        }),
    })
}

/// `entropy`: entropy bound between two boundary conditions.
pub fn entropy(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let size = sizes(s, &[16])?[0];
    let mut cfg = EntropyConfig::new(size, p.clone());
    cfg.tilt = s.tilt()?;
    cfg.zeta = s.boundary.unwrap_or(cfg.zeta);
    cfg.zeta_tilde = s.boundary_tilde.unwrap_or(cfg.zeta_tilde);
    cfg.n_samples = Settings::count(s.samples, 1000, "samples")?;
    cfg.batches = Settings::count(s.batches, 20, "batches")?;
    cfg.plan = chain_plan(s, &p, p.default_dt(), 2.0, 0.1)?;
    cfg.seed = s.seed.unwrap_or(0);
    let r = entropy_estimate(&cfg)?;
    let mut t = Table::new("terms.csv", &["term", "value", "stderr"]);
    t.push(vec!["main".into(), num(r.main.value), num(r.main.stderr)]);
    t.push(vec!["remainder".into(), num(r.remainder.value), num(r.remainder.stderr)]);
    t.push(vec!["total".into(), num(r.total), num(r.total_stderr)]);
    let mut verdicts = vec![Verdict::new(
        "nonnegative",
        r.total >= -3.0 * r.total_stderr,
        format!("total = {:.4e} ± {:.4e}", r.total, r.total_stderr),
    )];
    if is_quadratic(&p) {
        verdicts.push(Verdict::new(
            "main_vanishes",
            r.main_vanishes(3.0),
            format!("main = {:.4e} ± {:.4e} (rounding floor {:.4e})", r.main.value, r.main.stderr, r.rounding_floor),
        ));
    }
    Ok(RunOutput {
        tables: vec![t],
        report: serde_json::to_value(&r)?,
        verdicts,
        seeds: stream_seeds("coupling", cfg.seed, 1),
        resolved: json!({
            "potential": p.name(), "size": size, "tilt": cfg.tilt, "zeta": cfg.zeta, "zeta_tilde": cfg.zeta_tilde,
            "samples": cfg.n_samples, "batches": cfg.batches, "plan": cfg.plan, "seed": cfg.seed,
        }),
    })
}

/// `bl`: variance bound against the Gaussian comparison field.
pub fn bl(s: &Settings) -> Result<RunOutput> {
    let p = Arc::new(s.potential("cosine")?);
    let spec = s.domain.as_deref().unwrap_or("rect:16x16");
    let d = Arc::new(s.domain("rect:16x16")?);
    let tilt = s.tilt()?;
    let bspec = s.boundary.unwrap_or(BoundarySpec::Tilt);
    let bd = bspec.values(&d, tilt);
    let seed = s.seed.unwrap_or(0);
    let random = s.replicas.unwrap_or(5);
    let nu_seed = derive_seed(seed, 0xB1);
    let mut rng = glsim_core::rng::stream_rng(nu_seed, 0);
    let mut nus = vec![{
        let mut e = vec![0.0; d.n_interior()];
        e[d.interior_index(centre_site(&d)).expect("centre is interior")] = 1.0;
        e
    }];
    nus.extend((0..random).map(|_| (0..d.n_interior()).map(|_| rng.sample(StandardNormal)).collect::<Vec<f64>>()));
    let plan = chain_plan(s, &p, p.max_stable_dt(), 20.0, 2.0)?;
    let n = Settings::count(s.samples, 2000, "samples")?;
    let batches = Settings::count(s.batches, 20, "batches")?;
    let r = brascamp_lieb_check(&d, &p, &bd, &nus, n, &plan, batches, seed)?;
    let mut t = Table::new("cases.csv", &["case", "variance", "stderr", "bound", "passed"]);
    for (k, c) in r.cases.iter().enumerate() {
        let name = if k == 0 { "centre".to_string() } else { format!("random_{}", k - 1) };
        t.push(vec![name, num(c.variance.value), num(c.variance.stderr), num(c.bound), c.passed.to_string()]);
    }
    let mut seeds = stream_seeds("chain", seed, plan.chains);
    seeds.push(SeedRecord { replica: "weights".into(), seed: nu_seed, stream: 0 });
    Ok(RunOutput {
        tables: vec![t],
        verdicts: vec![Verdict::new("bound", r.passed(), "Var ≤ νᵀ(−a_V Δ)⁻¹ν + 4·SE for every ν")],
        report: serde_json::to_value(&r)?,
        seeds,
        resolved: json!({
            "potential": p.name(), "domain": spec, "tilt": tilt, "boundary": bspec, "random_weights": random,
            "samples": n, "batches": batches, "plan": plan, "seed": seed,
        }),
    })
}

/// `beurling`: escape probabilities past a half-line obstacle.
pub fn beurling(s: &Settings) -> Result<RunOutput> {
    let r = Settings::positive(s.radius, 64.0, "radius")?;
    if r.fract() != 0.0 {
        bail!("radius must be an integer, got {r}");
    }
    let ds = s.distances.clone().unwrap_or_else(|| vec![2, 4, 8, 16]);
    if ds.is_empty() {
        bail!("at least one distance is required");
    }
    let walks = Settings::count(s.walks, 20_000, "walks")?;
    let seed = s.seed.unwrap_or(0);
    let beta = match s.beta.as_deref() {
        Some([a, b]) => Beta::new(*a, *b)?,
        Some(other) => bail!("beta needs two components, got {other:?}"),
        None => Beta::ISOTROPIC,
    };
    let mut t = Table::new("escape.csv", &["d", "p_hat", "stderr", "exact"]);
    let mut seeds = Vec::new();
    let mut reports = Vec::new();
    let mut run = |label: String, radius: f64, d: u32, count: usize| -> Result<_> {
        let (obstacle, start) = half_line_obstacle(radius as u32, d);
        let mut cfg = BeurlingConfig::new(obstacle, start, radius, count, derive_seed(seed, u64::from(d)));
        cfg.beta = beta;
        seeds.push(SeedRecord { replica: label, seed: cfg.seed, stream: 0 });
        Ok(beurling_experiment(&cfg)?)
    };
    for &d in &ds {
        let rep = run(format!("d {d}"), r, d, walks)?;
        t.push(vec![d.to_string(), num(rep.p_hat), num(rep.stderr), rep.exact.map(num).unwrap_or_default()]);
        reports.push(rep);
    }
    let tiny = run("exact check".into(), 4.0, 1, walks.max(10_000))?;
    let mut verdicts = Vec::new();
    if ds.len() > 1 {
        let increasing = ds.windows(2).all(|w| w[0] < w[1]) && reports.windows(2).all(|w| w[1].p_hat > w[0].p_hat);
        let ps: Vec<f64> = reports.iter().map(|x| x.p_hat).collect();
        verdicts.push(Verdict::new("increasing", increasing, format!("escape probabilities {ps:?}")));
    }
    let exact = tiny.exact.ok_or_else(|| anyhow!("exact solve unavailable for the check instance"))?;
    verdicts.push(Verdict::new(
        "exact_check",
        (tiny.p_hat - exact).abs() <= 3.0 * tiny.stderr,
        format!("r = 4, d = 1: {:.4e} ± {:.4e} vs exact {exact:.4e}", tiny.p_hat, tiny.stderr),
    ));
    Ok(RunOutput {
        tables: vec![t],
        report: json!({ "runs": reports, "check": tiny }),
        verdicts,
        seeds,
        resolved: json!({ "radius": r, "distances": ds, "walks": walks, "beta": beta, "seed": seed }),
    })
}
