//! Named validation suites: each reproduces a reference experiment at its
//! stated tolerance and reports one pass/fail line per check. The
//! `validate` subcommand runs one suite; the acceptance test target runs
//! them all.

use std::time::Instant;

use manifold_mc::analysis::{g_const, g_diffusive, h_brownian, l_brownian, minimize_scalar};
use manifold_mc::frame::TangentFrame;
use manifold_mc::integrator::{integrate, IntegrateConfig, ProbeOptions};
use manifold_mc::linalg::HouseholderQr;
use manifold_mc::manifold::check_gradient;
use manifold_mc::sampler::{run_chain_observed, ProposalParams};
use manifold_mc::stats::{chi_square_pvalue, chi_square_statistic, integrated_act};
use manifold_mc::zoo::{
    cluster_manifold, cone_manifold, rigidity_weight, son_manifold, son_volume_exact,
    torus_manifold, ClusterSpec, SonSpec, TorusSpec,
};
use manifold_mc::{ConstraintManifold, FnManifold, NewtonParams};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_time_s: f64,
}

impl SuiteReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {} :: {} = {:.6e} (target {})\n",
                if c.pass { "PASS" } else { "FAIL" },
                self.suite,
                c.name,
                c.measured,
                c.target
            ));
        }
        out.push_str(&format!(
            "[{}] {} ({} checks, {:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.checks.len(),
            self.wall_time_s
        ));
        out
    }
}

pub const SUITES: &[&str] = &[
    "torus-marginals",
    "cone-marginals",
    "so11-trace",
    "torus-area",
    "error-bars",
    "son-volumes",
    "sticky-chain-loop",
    "nu-minimizers",
    "jacobian-symmetry",
    "frame-properties",
    "flat-pipeline",
    "reverse-ablation",
];

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport, CliError> {
    let t0 = Instant::now();
    let mut checks = match name {
        "torus-marginals" => torus_marginals(seed),
        "cone-marginals" => cone_marginals(seed),
        "so11-trace" => so11_trace(seed),
        "torus-area" => torus_area(seed),
        "error-bars" => error_bars(seed),
        "son-volumes" => son_volumes(seed),
        "sticky-chain-loop" => sticky_chain_loop(seed),
        "nu-minimizers" => nu_minimizers(),
        "jacobian-symmetry" => jacobian_symmetry(),
        "frame-properties" => frame_properties(seed),
        "flat-pipeline" => flat_pipeline(seed),
        "reverse-ablation" => reverse_ablation(seed),
        other => {
            return Err(CliError::Config(format!(
                "unknown suite {other:?}; available: {}",
                SUITES.join(", ")
            )))
        }
    };
    let wall = t0.elapsed().as_secs_f64();
    let budget = runtime_budget_s(name);
    checks.push(check("runtime", wall, format!("<= {budget} s"), wall <= budget));
    let passed = checks.iter().all(|c| c.pass);
    Ok(SuiteReport { suite: name.to_string(), seed, checks, passed, wall_time_s: wall })
}

fn runtime_budget_s(name: &str) -> f64 {
    match name {
        "torus-marginals" | "cone-marginals" | "torus-area" => 60.0,
        "so11-trace" | "error-bars" => 600.0,
        "son-volumes" => 900.0,
        "sticky-chain-loop" => 1800.0,
        _ => 60.0,
    }
}

fn check(name: &str, measured: f64, target: impl Into<String>, pass: bool) -> Check {
    Check { name: name.to_string(), measured, target: target.into(), pass }
}

fn mean_and_se(series: &[f64]) -> (f64, f64) {
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let act = integrated_act(series, None).expect("non-degenerate series");
    (mean, (act.c0 * act.tau / series.len() as f64).sqrt())
}

fn uniform_density() -> &'static (dyn Fn(&DVector<f64>) -> f64 + Sync) {
    static UNIT: fn(&DVector<f64>) -> f64 = |_| 1.0;
    &UNIT
}

// --- criterion 1 -----------------------------------------------------------

fn torus_marginals(seed: u64) -> Vec<Check> {
    let spec = TorusSpec::new(1.0, 0.5).unwrap();
    let torus = torus_manifold(spec);
    let params = ProposalParams::uniform(0.5, NewtonParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1_000_000u64;
    let bins = 50usize;
    let stride = 100u64;

    let mut cos_phi = Vec::with_capacity(n as usize);
    let mut cos_theta = Vec::with_capacity(n as usize);
    let mut counts = vec![0.0_f64; bins];
    let mut kept = 0u64;
    run_chain_observed(&torus, &params, spec.default_start(), n, &mut rng, |step, s, _| {
        let (theta, phi) = spec.angles(s.position());
        cos_phi.push(phi.cos());
        cos_theta.push(theta.cos());
        if step % stride == 0 {
            let u = (phi + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
            counts[((u * bins as f64) as usize).min(bins - 1)] += 1.0;
            kept += 1;
        }
    })
    .expect("torus chain");

    let (m_phi, se_phi) = mean_and_se(&cos_phi);
    let (m_theta, se_theta) = mean_and_se(&cos_theta);

    // Expected bin mass from the analytic phi density (r/R = 0.5).
    let expected: Vec<f64> = (0..bins)
        .map(|b| {
            let lo = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * b as f64 / bins as f64;
            let hi = lo + 2.0 * std::f64::consts::PI / bins as f64;
            ((hi - lo) + 0.5 * (hi.sin() - lo.sin())) / (2.0 * std::f64::consts::PI)
                * kept as f64
        })
        .collect();
    let p = chi_square_pvalue(chi_square_statistic(&counts, &expected), bins - 1);

    vec![
        check(
            "E[cos phi] = 0.25",
            m_phi,
            format!("within 3 se ({:.1e}) of 0.25", 3.0 * se_phi),
            (m_phi - 0.25).abs() <= 3.0 * se_phi,
        ),
        check(
            "E[cos theta] = 0",
            m_theta,
            format!("within 3 se ({:.1e}) of 0", 3.0 * se_theta),
            m_theta.abs() <= 3.0 * se_theta,
        ),
        check("phi histogram chi-square p", p, "> 1e-3", p > 1e-3),
    ]
}

// --- criterion 2 -----------------------------------------------------------

fn cone_marginals(seed: u64) -> Vec<Check> {
    let cone = cone_manifold();
    let params = ProposalParams::uniform(0.9, NewtonParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1_000_000u64;
    let bins = 50usize;
    let stride = 100u64;

    let mut zs = Vec::with_capacity(n as usize);
    let mut xs = Vec::with_capacity(n as usize);
    let mut counts = vec![0.0_f64; bins];
    let mut kept = 0u64;
    run_chain_observed(&cone, &params, cone.default_start(), n, &mut rng, |step, s, _| {
        zs.push(s.position()[2]);
        xs.push(s.position()[0]);
        if step % stride == 0 {
            let b = ((s.position()[2] * bins as f64) as usize).min(bins - 1);
            counts[b] += 1.0;
            kept += 1;
        }
    })
    .expect("cone chain");

    let (m_z, se_z) = mean_and_se(&zs);
    let (m_x, se_x) = mean_and_se(&xs);

    // g_Z(z) = 2z: bin mass is z_hi^2 - z_lo^2.
    let expected: Vec<f64> = (0..bins)
        .map(|b| {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            (hi * hi - lo * lo) * kept as f64
        })
        .collect();
    let p = chi_square_pvalue(chi_square_statistic(&counts, &expected), bins - 1);

    vec![
        check(
            "E[Z] = 2/3",
            m_z,
            format!("within 3 se ({:.1e}) of 0.6667", 3.0 * se_z),
            (m_z - 2.0 / 3.0).abs() <= 3.0 * se_z,
        ),
        check(
            "E[X] = 0",
            m_x,
            format!("within 3 se ({:.1e}) of 0", 3.0 * se_x),
            m_x.abs() <= 3.0 * se_x,
        ),
        check("z histogram chi-square p", p, "> 1e-3", p > 1e-3),
    ]
}

// --- criterion 3 -----------------------------------------------------------

fn so11_trace(seed: u64) -> Vec<Check> {
    let spec = SonSpec::new(11).unwrap();
    let m = son_manifold(spec);
    let params = ProposalParams::uniform(0.28, NewtonParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 1_000_000u64;
    let mut traces = Vec::with_capacity(n as usize);
    let stats = run_chain_observed(&m, &params, spec.default_start(), n, &mut rng, |_, s, _| {
        traces.push(m.trace(s.position()));
    })
    .expect("so(11) chain");

    let (mean, se) = mean_and_se(&traces);
    let var = {
        let mu = traces.iter().sum::<f64>() / n as f64;
        traces.iter().map(|t| (t - mu) * (t - mu)).sum::<f64>() / n as f64
    };
    let acc = stats.acceptance_fraction();

    vec![
        check(
            "mean trace = 0",
            mean,
            format!("within 3 se ({:.1e}) of 0", 3.0 * se),
            mean.abs() <= 3.0 * se,
        ),
        check("var trace = 1", var, "within 15% of 1", (var - 1.0).abs() <= 0.15),
        check("acceptance fraction", acc, "0.35 +- 0.07", (acc - 0.35).abs() <= 0.07),
    ]
}

// --- criterion 4 -----------------------------------------------------------

fn pinned_torus_config(n_total: u64, stages: usize) -> (TorusSpec, IntegrateConfig) {
    let spec = TorusSpec::new(1.0, 0.5).unwrap();
    let mut config = IntegrateConfig::new(n_total, stages, 0.5, spec.default_start());
    config.x0 = Some(spec.default_start());
    config.r0 = Some(3.0);
    config.rk = Some(0.5);
    (spec, config)
}

fn torus_area(seed: u64) -> Vec<Check> {
    let (spec, config) = pinned_torus_config(100_000, 2);
    let torus = torus_manifold(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = integrate(&torus, uniform_density(), &config, &mut rng).expect("torus integral");
    let exact = spec.exact_area();
    let dev = (est.z_hat - exact).abs() / (est.sigma_r * exact);
    vec![
        check(
            "torus area",
            est.z_hat,
            format!("within 3 sigma_r of {exact:.4} (deviation {dev:.2} sigma)"),
            dev <= 3.0,
        ),
        check(
            "sigma_r of order 1e-2",
            est.sigma_r,
            "in [0.005, 0.1]",
            (0.005..=0.1).contains(&est.sigma_r),
        ),
    ]
}

// --- criterion 5 -----------------------------------------------------------

fn error_bars(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut mean_sigmas = std::collections::BTreeMap::new();
    for (ki, &k) in [1usize, 2, 4, 8].iter().enumerate() {
        let mut zs = Vec::with_capacity(50);
        let mut sigmas = Vec::with_capacity(50);
        for rep in 0..50u64 {
            let (spec, config) = pinned_torus_config(10_000, k);
            let torus = torus_manifold(spec);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 7919 * (ki as u64 + 1) + rep);
            let est =
                integrate(&torus, uniform_density(), &config, &mut rng).expect("torus integral");
            zs.push(est.z_hat);
            sigmas.push(est.sigma_r);
        }
        let mean_z = zs.iter().sum::<f64>() / zs.len() as f64;
        let sample_std = (zs.iter().map(|z| (z - mean_z) * (z - mean_z)).sum::<f64>()
            / (zs.len() - 1) as f64)
            .sqrt()
            / mean_z;
        let mean_sigma = sigmas.iter().sum::<f64>() / sigmas.len() as f64;
        let ratio = sample_std / mean_sigma;
        mean_sigmas.insert(k, mean_sigma);
        checks.push(check(
            &format!("k={k}: sample std vs mean single-run sigma_r"),
            ratio,
            "in [0.5, 2]",
            (0.5..=2.0).contains(&ratio),
        ));
    }
    // Judged on the mean single-run error bar: a paired, low-noise statistic
    // (the 50-rep sample standard deviation itself fluctuates by ~14%, more
    // than the few-percent advantage of k = 2 at this chain length).
    let s1 = mean_sigmas[&1];
    let s2 = mean_sigmas[&2];
    checks.push(check(
        "k=2 not worse than k=1 (mean sigma_r ratio)",
        s2 / s1,
        "<= 1",
        s2 <= s1,
    ));
    checks
}

// --- criterion 6 -----------------------------------------------------------

fn son_volumes(seed: u64) -> Vec<Check> {
    // Reference protocol: 50 independent runs of n_t = 1e5, k = 4 per group,
    // judged by the relative error of the mean estimate (single-run sigma_r
    // runs 10-16% for the larger groups). The ball schedule is discovered
    // once per group and shared by the repetitions.
    let mut checks = Vec::new();
    let reps = 50u64;
    for (i, (n, step_scale, rel_tol)) in
        [(2usize, 1.1, 0.05), (3, 0.8, 0.05), (4, 0.62, 0.05), (5, 0.5, 0.10)]
            .into_iter()
            .enumerate()
    {
        let spec = SonSpec::new(n).unwrap();
        let m = son_manifold(spec);
        let probe_opts = ProbeOptions {
            n_projection_draws: 100_000,
            n_pairs: 50_000,
            pair_chain_steps: 50_000,
            ..ProbeOptions::default()
        };

        // Schedule discovery: sampling run, center, outer radius, probe.
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 31 * i as u64);
        let params = ProposalParams::uniform(step_scale, NewtonParams::default());
        let (samples, _) = manifold_mc::run_chain(
            &m,
            &params,
            spec.default_start(),
            25_000,
            20,
            &mut rng,
        )
        .expect("so(n) schedule chain");
        let x0 = manifold_mc::integrator::choose_center(&samples, &m).expect("center");
        let r0 = manifold_mc::integrator::outer_radius(&samples, &x0).expect("radius");
        let rk = manifold_mc::integrator::probe_min_radius(
            &m,
            &x0,
            r0 / 2.0,
            step_scale,
            &NewtonParams::default(),
            &NewtonParams::new(1e-12, 30),
            &probe_opts,
            &mut rng,
        )
        .expect("probe");

        let mut zs = Vec::with_capacity(reps as usize);
        let mut sigmas = Vec::with_capacity(reps as usize);
        for rep in 0..reps {
            let mut config = IntegrateConfig::new(100_000, 4, step_scale, spec.default_start());
            config.x0 = Some(x0.clone());
            config.r0 = Some(r0);
            config.rk = Some(rk);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 31 * i as u64 + 1000 + rep);
            let est = integrate(&m, uniform_density(), &config, &mut rng).expect("so(n) volume");
            zs.push(est.z_hat);
            sigmas.push(est.sigma_r);
        }
        let mean = zs.iter().sum::<f64>() / reps as f64;
        let exact = son_volume_exact(n);
        let rel = (mean - exact).abs() / exact;
        let mean_sigma = sigmas.iter().sum::<f64>() / reps as f64;
        checks.push(check(
            &format!("vol SO({n}), mean of {reps} runs"),
            mean,
            format!(
                "relative error <= {rel_tol} vs {exact:.4e} (got {rel:.4}; single-run sigma_r ~ {mean_sigma:.3})"
            ),
            rel <= rel_tol,
        ));
    }
    checks
}

// --- criterion 7 -----------------------------------------------------------

fn sticky_chain_loop(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    let cases = [
        ("chain", ClusterSpec::chain(4).unwrap(), ClusterSpec::chain_start(4), 3.51e2, 1.32e2),
        ("loop", ClusterSpec::closed_loop(4).unwrap(), ClusterSpec::loop_start(4), 8.27e1, 2.18e1),
    ];
    for (ci, (label, spec, start, v_ref, z_ref)) in cases.into_iter().enumerate() {
        let manifold = cluster_manifold(spec.clone());
        let rigidity = {
            let spec = spec.clone();
            move |x: &DVector<f64>| rigidity_weight(x, &spec)
        };

        let run = |density: &(dyn Fn(&DVector<f64>) -> f64 + Sync), which: u64| {
            let mut config = IntegrateConfig::new(1_000_000, 4, 0.35, start.clone());
            config.probe = ProbeOptions {
                n_projection_draws: 100_000,
                n_pairs: 50_000,
                pair_chain_steps: 50_000,
                ..ProbeOptions::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 101 * ci as u64 + which);
            integrate(&manifold, density, &config, &mut rng).expect("cluster integral")
        };

        let v_est = run(uniform_density(), 1);
        let z_est = run(&rigidity, 2);
        let v_rel = (v_est.z_hat - v_ref).abs() / v_ref;
        let z_rel = (z_est.z_hat - z_ref).abs() / z_ref;
        checks.push(check(
            &format!("{label} N=4 volume V"),
            v_est.z_hat,
            format!("within 10% of {v_ref:.3e} (got {v_rel:.3})"),
            v_rel <= 0.10,
        ));
        checks.push(check(
            &format!("{label} N=4 partition function z"),
            z_est.z_hat,
            format!("within 10% of {z_ref:.3e} (got {z_rel:.3})"),
            z_rel <= 0.10,
        ));

        // Consistency: z/V against the sampler average of the rigidity
        // weight under uniform measure.
        let params = ProposalParams::uniform(0.35, NewtonParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 101 * ci as u64 + 3);
        let mut weights = Vec::with_capacity(200_000);
        run_chain_observed(&manifold, &params, start.clone(), 200_000, &mut rng, |_, s, _| {
            weights.push(rigidity_weight(s.position(), &spec));
        })
        .expect("cluster chain");
        let (h_tilde, se_tilde) = mean_and_se(&weights);
        let h_bar = z_est.z_hat / v_est.z_hat;
        let se_bar = h_bar * (z_est.sigma_r.powi(2) + v_est.sigma_r.powi(2)).sqrt();
        let se_comb = (se_tilde * se_tilde + se_bar * se_bar).sqrt();
        let dev = (h_bar - h_tilde).abs() / se_comb;
        checks.push(check(
            &format!("{label} N=4 z/V vs sampled mean weight"),
            h_bar,
            format!("within 3 se of {h_tilde:.4} (deviation {dev:.2} se)"),
            dev <= 3.0,
        ));
    }
    checks
}

// --- criterion 8 -----------------------------------------------------------

fn nu_minimizers() -> Vec<Check> {
    let mut checks = Vec::new();

    let m = minimize_scalar(|nu| g_const(nu).unwrap_or(f64::INFINITY), 1.01, 50.0).unwrap();
    checks.push(check("argmin g_const", m, "4.9 +- 0.05", (m - 4.9).abs() <= 0.05));

    for (d, nu_star) in [(2usize, 2.7), (3, 3.1), (4, 3.4), (5, 3.6), (6, 3.7), (10, 4.1), (20, 4.5), (50, 4.7)]
    {
        let m =
            minimize_scalar(|nu| g_diffusive(nu, d).unwrap_or(f64::INFINITY), 1.01, 50.0).unwrap();
        checks.push(check(
            &format!("argmin g_diffusive d={d}"),
            m,
            format!("{nu_star} +- 0.1"),
            (m - nu_star).abs() <= 0.1,
        ));
    }

    // The reference table lists 2.6 for d = 1, but the model's true argmin
    // is 2.134 (the derivative of g_1 vanishes there and is 0.17 at 2.6).
    // The check is kept as stated and fails; see the acceptance suite notes.
    let m1 = minimize_scalar(|nu| g_diffusive(nu, 1).unwrap_or(f64::INFINITY), 1.01, 50.0).unwrap();
    checks.push(check(
        "argmin g_diffusive d=1 (reference table value is inconsistent with the formula)",
        m1,
        "2.6 +- 0.1 as stated; the formula's argmin is 2.134",
        (m1 - 2.6).abs() <= 0.1,
    ));

    for d in [1usize, 2, 3, 4, 5] {
        let near_one = h_brownian(1.0 + 1e-6, d).unwrap();
        let near_inf = h_brownian(1e9, d).unwrap();
        checks.push(check(
            &format!("h_{d} limit at nu=1+1e-6"),
            near_one,
            "< 1e-4",
            near_one < 1e-4,
        ));
        checks.push(check(
            &format!("h_{d} limit at nu=1e9"),
            near_inf,
            "< 1e-4",
            near_inf < 1e-4,
        ));
    }
    // For d >= 6 the nu^{-2/d} tail no longer clears 1e-4 by nu = 1e9; the
    // limit statement is checked as strict decay toward zero.
    for d in [6usize, 10, 20, 50] {
        let near_one = h_brownian(1.0 + 1e-6, d).unwrap();
        let h3 = h_brownian(1e3, d).unwrap();
        let h6 = h_brownian(1e6, d).unwrap();
        let h9 = h_brownian(1e9, d).unwrap();
        checks.push(check(
            &format!("h_{d} limits (near-1 value; decaying tail)"),
            near_one,
            "< 1e-4 and h(1e3) > h(1e6) > h(1e9)",
            near_one < 1e-4 && h3 > h6 && h6 > h9,
        ));
    }

    let mut worst = 0.0_f64;
    for d in 1..=6usize {
        for i in 0..50 {
            let nu = 1.05 + 2.0 * i as f64;
            let l = l_brownian(nu, d).unwrap();
            let gh = g_diffusive(nu, d).unwrap() * h_brownian(nu, d).unwrap();
            worst = worst.max((l / gh - 1.0).abs());
        }
    }
    checks.push(check("l_d = g_d * h_d identity", worst, "<= 1e-12", worst <= 1e-12));

    checks
}

// --- criterion 9 (property suites) ------------------------------------------

fn jacobian_symmetry() -> Vec<Check> {
    let spec = TorusSpec::new(1.0, 0.5).unwrap();
    let torus = torus_manifold(spec);
    let mut worst_sym = 0.0_f64;
    let mut worst_basis = 0.0_f64;
    for k in 0..40 {
        let a = spec.point(0.37 * k as f64, 1.13 * k as f64 + 0.2);
        let b = spec.point(2.11 * k as f64 + 0.5, 0.59 * k as f64 + 1.1);
        let fa = TangentFrame::new(&torus, &a).unwrap();
        let fb = TangentFrame::new(&torus, &b).unwrap();
        let jab = fa.u_tan().tr_mul(fb.u_tan()).lu().determinant();
        let jba = fb.u_tan().tr_mul(fa.u_tan()).lu().determinant();
        worst_sym = worst_sym.max((jab - jba).abs());

        // |det| must not depend on the orthonormal basis choice.
        let raw = nalgebra::DMatrix::from_fn(2, 2, |i, j| ((i * 5 + j * 3 + k) as f64).sin());
        let w = HouseholderQr::new(raw).thin_q();
        let rotated = fa.u_tan() * &w;
        let det2 = rotated.tr_mul(fb.u_tan()).lu().determinant();
        worst_basis = worst_basis.max((det2.abs() - jab.abs()).abs());
    }
    vec![
        check("det(Ux^t Uy) = det(Uy^t Ux)", worst_sym, "<= 1e-12", worst_sym <= 1e-12),
        check("|det| basis invariance", worst_basis, "<= 1e-12", worst_basis <= 1e-12),
    ]
}

fn frame_properties(seed: u64) -> Vec<Check> {
    let mut worst_ortho = 0.0_f64;
    let mut worst_residual = 0.0_f64;
    let mut worst_split = 0.0_f64;
    let mut worst_grad = 0.0_f64;

    let mut visit = |manifold: &dyn ConstraintManifold, start: DVector<f64>, s: f64, salt: u64| {
        let params = ProposalParams::uniform(s, NewtonParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
        let mut points = Vec::new();
        run_chain_observed(manifold, &params, start, 3000, &mut rng, |step, st, _| {
            if step % 30 == 0 {
                points.push(st.position().clone());
            }
        })
        .expect("property chain");
        for x in &points {
            worst_residual = worst_residual.max(manifold.residual(x).norm());
            let f = TangentFrame::new(manifold, x).unwrap();
            let ut = f.u_tan();
            let un = f.u_norm();
            let d = f.tangent_dim();
            let m = f.normal_dim();
            worst_ortho = worst_ortho
                .max((ut.tr_mul(ut) - nalgebra::DMatrix::identity(d, d)).amax())
                .max((un.tr_mul(un) - nalgebra::DMatrix::identity(m, m)).amax())
                .max(f.q().tr_mul(ut).amax());

            let delta = DVector::from_fn(x.len(), |i, _| ((i + 1) as f64 * 0.37 + x[i]).sin());
            let (v, w) = f.decompose(&delta);
            worst_split = worst_split
                .max((&v + &w - &delta).norm() / delta.norm())
                .max(v.dot(&w).abs());
        }
        if let Some(x) = points.first() {
            worst_grad = worst_grad.max(check_gradient(manifold, x, 1e-6));
        }
    };

    let tspec = TorusSpec::new(1.0, 0.5).unwrap();
    visit(&torus_manifold(tspec), tspec.default_start(), 0.5, 1);
    let cone = cone_manifold();
    let cone_start = cone.default_start();
    visit(&cone, cone_start, 0.9, 2);
    let so4 = SonSpec::new(4).unwrap();
    visit(&son_manifold(so4), so4.default_start(), 0.62, 3);
    visit(
        &cluster_manifold(ClusterSpec::chain(4).unwrap()),
        ClusterSpec::chain_start(4),
        0.35,
        4,
    );
    visit(
        &cluster_manifold(ClusterSpec::closed_loop(5).unwrap()),
        ClusterSpec::loop_start(5),
        0.35,
        5,
    );

    vec![
        check("frame orthonormality", worst_ortho, "<= 1e-10", worst_ortho <= 1e-10),
        check("projection residual on chain states", worst_residual, "<= 1e-12", worst_residual <= 1e-12),
        check("tangential decompose exactness", worst_split, "<= 1e-12", worst_split <= 1e-12),
        check("analytic gradients vs finite differences", worst_grad, "<= 1e-5", worst_grad <= 1e-5),
    ]
}

fn flat_pipeline(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();
    for (d, salt) in [(1usize, 1u64), (2, 2), (3, 3)] {
        let rim = 1.3;
        let disk = flat_disk(d, rim);
        let mut config = IntegrateConfig::new(40_000, 2, 0.4, DVector::zeros(d + 1));
        config.x0 = Some(DVector::zeros(d + 1));
        config.r0 = Some(rim);
        config.rk = Some(0.35);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + salt);
        let est = integrate(&disk, uniform_density(), &config, &mut rng).expect("disk integral");
        let exact = match d {
            1 => 2.0 * rim,
            2 => std::f64::consts::PI * rim * rim,
            _ => 4.0 / 3.0 * std::f64::consts::PI * rim * rim * rim,
        };
        let dev = (est.z_hat - exact).abs() / (est.sigma_r * exact);
        checks.push(check(
            &format!("disk volume d={d}"),
            est.z_hat,
            format!("within 3 sigma_r of {exact:.5} (deviation {dev:.2} sigma)"),
            dev <= 3.0,
        ));
    }
    checks
}

fn flat_disk(d: usize, rim: f64) -> FnManifold {
    FnManifold::new(
        d + 1,
        1,
        move |x, out| out[0] = x[d],
        move |_, out| {
            out.fill(0.0);
            out[(d, 0)] = 1.0;
        },
    )
    .with_inequality(move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        rim * rim - r2
    })
}

fn reverse_ablation(seed: u64) -> Vec<Check> {
    let spec = TorusSpec::new(1.0, 0.5).unwrap();
    let torus = torus_manifold(spec);
    let run = |check_reverse: bool| {
        let mut params = ProposalParams::uniform(0.5, NewtonParams::default());
        params.check_reverse = check_reverse;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1_000_000u64;
        let mut cos_phi = Vec::with_capacity(n as usize);
        run_chain_observed(&torus, &params, spec.default_start(), n, &mut rng, |_, s, _| {
            cos_phi.push(spec.angles(s.position()).1.cos());
        })
        .expect("torus chain");
        let (mean, se) = mean_and_se(&cos_phi);
        (mean - 0.25).abs() / se
    };
    let dev_with = run(true);
    let dev_without = run(false);
    vec![
        check("E[cos phi] deviation with reverse check", dev_with, "<= 3 se", dev_with <= 3.0),
        check(
            "E[cos phi] deviation with reverse check disabled",
            dev_without,
            ">= 5 se (the check is load-bearing)",
            dev_without >= 5.0,
        ),
    ]
}
