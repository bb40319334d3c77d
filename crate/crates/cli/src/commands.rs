//! Command implementations: sample, integrate, analyze-nu, validate.
//!
//! Every artifact embeds the seed and the config hash; identical config and
//! seed reproduce identical files except for the wall-time fields.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use manifold_mc::analysis::{g_const, g_diffusive, l_brownian, minimize_scalar};
use manifold_mc::integrator::{integrate, IntegralEstimate, IntegrateConfig, ProbeOptions};
use manifold_mc::sampler::{run_chain_observed, ChainStats, ProposalParams};
use manifold_mc::stats::integrated_act;
use manifold_mc::NewtonParams;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ConfigReader;
use crate::problem::Problem;
use crate::suites;
use crate::CliError;

/// Seed, output directory and config hash shared by all commands.
pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub config_hash: String,
}

impl RunContext {
    fn ensure_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.out_dir.display())))
    }

    fn write_file(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn newton_from_config(reader: &mut ConfigReader) -> Result<NewtonParams, CliError> {
    let tol = reader.f64_or("newton.tol", 1e-12)?;
    let nmax = reader.usize_or("newton.nmax", 10)?;
    if !(tol > 0.0) || nmax == 0 {
        return Err(CliError::Config("newton.tol must be > 0 and newton.nmax >= 1".into()));
    }
    Ok(NewtonParams::new(tol, nmax))
}

#[derive(Serialize)]
struct ObservableSummary {
    name: String,
    mean: Option<f64>,
    se: Option<f64>,
    tau: Option<f64>,
}

#[derive(Serialize)]
struct SampleSummary {
    seed: u64,
    config_hash: String,
    manifold: String,
    density: String,
    n_steps: u64,
    stride: u64,
    stored_samples: usize,
    counts: ChainStats,
    acceptance_fraction: f64,
    reverse_failure_fraction: f64,
    observables: Vec<ObservableSummary>,
    wall_time_s: f64,
}

/// Runs a chain and writes samples.csv, summary.json and histogram.csv.
pub fn cmd_sample(reader: &mut ConfigReader, ctx: &RunContext) -> Result<(), CliError> {
    let t0 = Instant::now();
    let problem = Problem::from_config(reader)?;
    let newton = newton_from_config(reader)?;
    let n_steps = reader.u64_or("run.n_steps", 1_000_000)?;
    let stride = reader.u64_or("run.stride", 100)?;
    let check_reverse = reader.bool_or("sampler.check_reverse", true)?;
    let obs_names = reader.str_list_opt("sample.observables");
    let bins = reader.usize_or("histogram.bins", 50)?;
    let hist_names = reader.str_list_opt("histogram.observables");
    if stride == 0 || bins == 0 {
        return Err(CliError::Config("run.stride and histogram.bins must be >= 1".into()));
    }

    let observables = problem.select_observables(obs_names.as_deref())?;
    let hist_observables = match &hist_names {
        Some(names) => problem.select_observables(Some(names))?,
        None => problem.select_observables(obs_names.as_deref())?,
    };

    let mut params = ProposalParams::new(problem.step_scale, &problem.density, newton);
    params.check_reverse = check_reverse;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);

    let da = problem.manifold.ambient_dim();
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut series: Vec<Vec<f64>> = observables.iter().map(|_| Vec::new()).collect();
    let mut hist_series: Vec<Vec<f64>> = hist_observables.iter().map(|_| Vec::new()).collect();

    let stats = run_chain_observed(
        problem.manifold.as_ref(),
        &params,
        problem.start.clone(),
        n_steps,
        &mut rng,
        |step, state, _| {
            if step % stride == 0 {
                rows.push((step, state.position().iter().copied().collect()));
            }
            for (s, o) in series.iter_mut().zip(&observables) {
                s.push((o.eval)(state.position()));
            }
            for (s, o) in hist_series.iter_mut().zip(&hist_observables) {
                s.push((o.eval)(state.position()));
            }
        },
    )
    .map_err(CliError::numerical)?;

    ctx.ensure_dir()?;

    // samples.csv: step index then the ambient coordinates.
    let mut csv = format!("# seed={} config_hash={}\n", ctx.seed, ctx.config_hash);
    csv.push_str("step");
    for i in 0..da {
        csv.push_str(&format!(",c{i}"));
    }
    csv.push('\n');
    for (step, coords) in &rows {
        csv.push_str(&step.to_string());
        for c in coords {
            csv.push_str(&format!(",{c:.17e}"));
        }
        csv.push('\n');
    }
    ctx.write_file("samples.csv", &csv)?;

    // histogram.csv: equal-width bins over the observed range.
    let mut hist = format!("# seed={} config_hash={}\n", ctx.seed, ctx.config_hash);
    hist.push_str("observable,bin_index,bin_lo,bin_hi,count\n");
    for (o, s) in hist_observables.iter().zip(&hist_series) {
        if s.is_empty() {
            continue;
        }
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0u64; bins];
        for &v in s {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let blo = lo + b as f64 * width;
            hist.push_str(&format!("{},{b},{blo:.12e},{:.12e},{c}\n", o.name, blo + width));
        }
    }
    ctx.write_file("histogram.csv", &hist)?;

    let mut summaries = Vec::new();
    for (o, s) in observables.iter().zip(&series) {
        let summary = match integrated_act(s, None) {
            Ok(act) => {
                let mean = s.iter().sum::<f64>() / s.len() as f64;
                let se = (act.c0 * act.tau / s.len() as f64).sqrt();
                ObservableSummary {
                    name: o.name.clone(),
                    mean: Some(mean),
                    se: Some(se),
                    tau: Some(act.tau),
                }
            }
            Err(_) => ObservableSummary { name: o.name.clone(), mean: None, se: None, tau: None },
        };
        summaries.push(summary);
    }

    let summary = SampleSummary {
        seed: ctx.seed,
        config_hash: ctx.config_hash.clone(),
        manifold: problem.kind_name.clone(),
        density: problem.density_name.clone(),
        n_steps,
        stride,
        stored_samples: rows.len(),
        counts: stats,
        acceptance_fraction: stats.acceptance_fraction(),
        reverse_failure_fraction: stats.reverse_failure_fraction(),
        observables: summaries,
        wall_time_s: t0.elapsed().as_secs_f64(),
    };
    ctx.write_file(
        "summary.json",
        &serde_json::to_string_pretty(&summary).expect("serializable"),
    )?;
    println!(
        "sample: {} steps on {}, acceptance {:.4}; wrote {}",
        n_steps,
        problem.kind_name,
        stats.acceptance_fraction(),
        ctx.out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IntegrateReport {
    seed: u64,
    config_hash: String,
    manifold: String,
    density: String,
    n_total: u64,
    stages_requested: usize,
    #[serde(flatten)]
    estimate: IntegralEstimate,
    wall_time_s: f64,
}

/// Reads the integration settings shared by the CLI and the suites.
pub fn integrate_config_from(
    reader: &mut ConfigReader,
    problem: &Problem,
) -> Result<IntegrateConfig, CliError> {
    let newton = newton_from_config(reader)?;
    let n_total = reader.u64_or("integrate.n_total", 100_000)?;
    let stages = reader.usize_or("integrate.stages", 4)?;
    let mut config = IntegrateConfig::new(n_total, stages, problem.step_scale, problem.start.clone());
    config.newton = newton;
    config.innermost_newton =
        NewtonParams::new(newton.tol, reader.usize_or("integrate.innermost_nmax", 30)?);
    config.n_innermost = reader.u64_opt("integrate.n_innermost")?;
    config.burn_frac = reader.f64_or("integrate.burn_frac", 0.01)?;
    if !(0.0..0.5).contains(&config.burn_frac) {
        return Err(CliError::Config("integrate.burn_frac must be in [0, 0.5)".into()));
    }
    config.x0 = reader.f64_list_opt("integrate.x0")?.map(DVector::from_vec);
    if let Some(x0) = &config.x0 {
        if x0.len() != problem.manifold.ambient_dim() {
            return Err(CliError::Config(format!(
                "integrate.x0 has {} coordinates, expected {}",
                x0.len(),
                problem.manifold.ambient_dim()
            )));
        }
    }
    config.r0 = reader.f64_opt("integrate.r0")?;
    config.rk = reader.f64_opt("integrate.rk")?;
    config.n_initial = reader.u64_opt("integrate.n_initial")?;
    config.check_reverse = reader.bool_or("sampler.check_reverse", true)?;
    config.warm_start = reader.bool_or("integrate.warm_start", true)?;

    let mut probe = ProbeOptions::default();
    probe.n_projection_draws = reader.usize_or("probe.n_projection_draws", probe.n_projection_draws)?;
    probe.n_pairs = reader.usize_or("probe.n_pairs", probe.n_pairs)?;
    probe.pair_chain_steps = reader.u64_or("probe.pair_chain_steps", probe.pair_chain_steps)?;
    probe.angle_tol_rel = reader.f64_or("probe.angle_tol_rel", probe.angle_tol_rel)?;
    config.probe = probe;
    Ok(config)
}

/// Runs the multi-phase integrator and writes result.json.
pub fn cmd_integrate(reader: &mut ConfigReader, ctx: &RunContext) -> Result<(), CliError> {
    let t0 = Instant::now();
    let problem = Problem::from_config(reader)?;
    let config = integrate_config_from(reader, &problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);

    let estimate = integrate(problem.manifold.as_ref(), &problem.density, &config, &mut rng)
        .map_err(|e| {
            eprintln!("integration failed: {e}");
            CliError::numerical(e)
        })?;

    ctx.ensure_dir()?;
    let report = IntegrateReport {
        seed: ctx.seed,
        config_hash: ctx.config_hash.clone(),
        manifold: problem.kind_name.clone(),
        density: problem.density_name.clone(),
        n_total: config.n_total,
        stages_requested: config.stages,
        estimate,
        wall_time_s: t0.elapsed().as_secs_f64(),
    };
    ctx.write_file(
        "result.json",
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )?;
    println!(
        "integrate: Z = {:.6e} +- {:.2e} (relative) on {}; wrote {}",
        report.estimate.z_hat,
        report.estimate.sigma_r,
        problem.kind_name,
        ctx.out_dir.display()
    );
    Ok(())
}

/// Emits the variance-model curves over a grid of volume ratios plus the
/// three argmins.
pub fn cmd_analyze_nu(reader: &mut ConfigReader, ctx: &RunContext) -> Result<(), CliError> {
    let d = reader.usize_or("analyze.d", 2)?;
    let lo = reader.f64_or("analyze.nu_lo", 1.05)?;
    let hi = reader.f64_or("analyze.nu_hi", 50.0)?;
    let points = reader.usize_or("analyze.points", 200)?;
    if !(lo > 1.0 && hi > lo && points >= 2 && d >= 1) {
        return Err(CliError::Config("analyze grid: need 1 < nu_lo < nu_hi, points >= 2, d >= 1".into()));
    }

    let argmin_const = minimize_scalar(|nu| g_const(nu).unwrap_or(f64::INFINITY), 1.01, 50.0)
        .map_err(CliError::config)?;
    let argmin_diff = minimize_scalar(|nu| g_diffusive(nu, d).unwrap_or(f64::INFINITY), 1.01, 50.0)
        .map_err(CliError::config)?;
    let argmin_brown = minimize_scalar(|nu| l_brownian(nu, d).unwrap_or(f64::INFINITY), 1.01, 50.0)
        .map_err(CliError::config)?;

    let mut out = String::new();
    out.push_str(&format!("# seed={} config_hash={}\n", ctx.seed, ctx.config_hash));
    out.push_str(&format!("# d={d}\n"));
    out.push_str(&format!("# argmin_g_const={argmin_const:.6}\n"));
    out.push_str(&format!("# argmin_g_diffusive={argmin_diff:.6}\n"));
    out.push_str(&format!("# argmin_l_brownian={argmin_brown:.6}\n"));
    out.push_str("nu,g_const,g_diffusive,l_brownian\n");
    for i in 0..points {
        let nu = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        out.push_str(&format!(
            "{nu:.8},{:.10e},{:.10e},{:.10e}\n",
            g_const(nu).map_err(CliError::config)?,
            g_diffusive(nu, d).map_err(CliError::config)?,
            l_brownian(nu, d).map_err(CliError::config)?,
        ));
    }
    ctx.ensure_dir()?;
    ctx.write_file("nu_models.csv", &out)?;
    println!(
        "analyze-nu: d = {d}, argmins g_const {argmin_const:.3}, g_diffusive {argmin_diff:.3}, l_brownian {argmin_brown:.3}; wrote {}",
        ctx.out_dir.display()
    );
    Ok(())
}

/// Runs one named validation suite and writes report.json; a failed suite
/// exits with code 4.
pub fn cmd_validate(reader: &mut ConfigReader, ctx: &RunContext) -> Result<(), CliError> {
    let suite = reader.require_str("validate.suite")?;
    let report = suites::run_suite(&suite, ctx.seed)?;

    ctx.ensure_dir()?;
    let mut doc = serde_json::to_value(&report).expect("serializable");
    doc["seed"] = serde_json::json!(ctx.seed);
    doc["config_hash"] = serde_json::json!(ctx.config_hash);
    ctx.write_file("report.json", &serde_json::to_string_pretty(&doc).expect("serializable"))?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", report.render());
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Validation(format!("suite {suite} failed")))
    }
}
