//! Multi-phase estimation of `Z = int_M f dsigma` over a bounded manifold:
//! nested balls around a center point, MCMC ratio estimators between
//! consecutive balls, and a direct Monte Carlo estimate over the innermost
//! ball via projection from the tangent disk.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{cross_jacobian, TangentFrame};
use crate::manifold::{BallRestricted, ConstraintManifold};
use crate::newton::{project, NewtonParams};
use crate::sampler::{mcmc_step, run_chain, ChainState, ChainStats, ProposalParams, StepOutcome};
use crate::stats::{combine_error, integrated_act};

/// Nested-ball schedule: center, decreasing radii `r_0 > ... > r_k`, and the
/// fixed per-stage `d`-dimensional volume ratio `nu = (r_i / r_{i+1})^d`.
#[derive(Debug, Clone, Serialize)]
pub struct BallSchedule {
    pub center: DVector<f64>,
    pub radii: Vec<f64>,
    pub nu: f64,
    /// Stage count `k`.
    pub stages: usize,
    /// Intrinsic dimension `d` used for the volume ratios.
    pub intrinsic_dim: usize,
}

/// One ratio stage: `R_hat = n_i / N_next` with the correlation time of the
/// inner-ball indicator series.
#[derive(Debug, Clone, Serialize)]
pub struct RatioEstimate {
    pub stage: usize,
    pub r_outer: f64,
    pub r_inner: f64,
    /// `R_hat = n_i / n_next`, exactly.
    pub r_hat: f64,
    /// `p_hat = 1 / R_hat`.
    pub p_hat: f64,
    /// Autocorrelation time of the indicator series.
    pub tau_hat: f64,
    /// Counted chain length (after burn-in).
    pub n_i: u64,
    /// Samples that landed in the next inner ball.
    pub n_next: u64,
    /// Counts in deeper balls `N_{i,j}`, `j > i + 1`; recorded, unused.
    pub deeper_counts: Vec<u64>,
    pub acceptance_fraction: f64,
    pub chain: ChainStats,
}

/// Final integral estimate with its single-run error bar.
#[derive(Debug, Clone, Serialize)]
pub struct IntegralEstimate {
    /// `Z_hat = Z_k_hat * prod R_hat_i`.
    pub z_hat: f64,
    /// Relative one-standard-deviation error bar.
    pub sigma_r: f64,
    /// Innermost-ball estimate.
    pub z_k_hat: f64,
    /// Relative standard deviation of the innermost estimate.
    pub rho_k: f64,
    pub stages: Vec<RatioEstimate>,
    pub schedule: BallSchedule,
    pub innermost_samples: u64,
}

/// Settings of the shrinking search for the innermost radius.
#[derive(Debug, Clone)]
pub struct ProbeOptions {
    /// Tangent-disk draws that must all project successfully.
    pub n_projection_draws: usize,
    /// Sampled point pairs tested for near-vertical chords.
    pub n_pairs: usize,
    /// Chain length used to populate the pair test.
    pub pair_chain_steps: u64,
    /// At most this many stored points feed the pair test.
    pub pair_sample_cap: usize,
    /// A chord is near-vertical when its tangential part is shorter than
    /// `angle_tol_rel * r`.
    pub angle_tol_rel: f64,
    /// Radius shrink factor between attempts.
    pub shrink_factor: f64,
    /// Give up when the radius falls below `floor_rel * r_start`.
    pub floor_rel: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            n_projection_draws: 100_000,
            n_pairs: 100_000,
            pair_chain_steps: 100_000,
            pair_sample_cap: 4000,
            angle_tol_rel: 1e-3,
            shrink_factor: 2.0,
            floor_rel: 1e-8,
        }
    }
}

/// Full integration configuration. `x0`, `r0`, `rk` may be pinned when the
/// geometry is known analytically; anything left `None` is determined from
/// an initial sampling run.
pub struct IntegrateConfig {
    /// Total MCMC points budgeted across the ratio stages (`n_t`).
    pub n_total: u64,
    /// Stage count `k`.
    pub stages: usize,
    /// Tangent proposal scale for all chains.
    pub step_scale: f64,
    pub newton: NewtonParams,
    /// Newton settings for the perpendicular projections of the innermost
    /// phase and the radius probe. The innermost projection must never
    /// fail, so this defaults to a higher iteration cap than the sampler.
    pub innermost_newton: NewtonParams,
    /// Draws for the innermost estimate; defaults to `n_total / stages`.
    pub n_innermost: Option<u64>,
    /// Fraction of each stage discarded before counting.
    pub burn_frac: f64,
    pub x0: Option<DVector<f64>>,
    pub r0: Option<f64>,
    pub rk: Option<f64>,
    /// Feasible chain start for the initial sampling run.
    pub x_init: DVector<f64>,
    /// Length of the initial sampling run; defaults to `n_total / stages`.
    pub n_initial: Option<u64>,
    pub probe: ProbeOptions,
    pub check_reverse: bool,
    /// Warm-start each stage from the previous stage's last inner-ball
    /// sample (default). When false, every stage starts from the center,
    /// making stages independent so a caller may run them concurrently.
    pub warm_start: bool,
}

impl IntegrateConfig {
    pub fn new(n_total: u64, stages: usize, step_scale: f64, x_init: DVector<f64>) -> Self {
        let newton = NewtonParams::default();
        IntegrateConfig {
            n_total,
            stages,
            step_scale,
            newton,
            innermost_newton: NewtonParams::new(newton.tol, 30),
            n_innermost: None,
            burn_frac: 0.01,
            x0: None,
            r0: None,
            rk: None,
            x_init,
            n_initial: None,
            probe: ProbeOptions::default(),
            check_reverse: true,
            warm_start: true,
        }
    }
}

/// Picks the ball center from a set of manifold samples: the sample
/// maximizing the smallest inequality margin, or, when the manifold has no
/// inequality constraints, the sample minimizing the maximum distance to
/// the other samples.
pub fn choose_center<M: ConstraintManifold + ?Sized>(
    samples: &[DVector<f64>],
    manifold: &M,
) -> Result<DVector<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if manifold.inequality_count() > 0 {
        let mut best = 0;
        let mut best_margin = f64::NEG_INFINITY;
        for (i, x) in samples.iter().enumerate() {
            let margin = (0..manifold.inequality_count())
                .map(|j| manifold.inequality(x, j))
                .fold(f64::INFINITY, f64::min);
            if margin > best_margin {
                best_margin = margin;
                best = i;
            }
        }
        return Ok(samples[best].clone());
    }
    // No boundary: center by minimizing the sample "radius" of M.
    let mut best = 0;
    let mut best_radius = f64::INFINITY;
    for (i, x) in samples.iter().enumerate() {
        let radius = samples
            .iter()
            .map(|y| (x - y).norm())
            .fold(0.0, f64::max);
        if radius < best_radius {
            best_radius = radius;
            best = i;
        }
    }
    Ok(samples[best].clone())
}

/// Radius of the smallest sample-covering ball about `x0`:
/// `r_0 = max_i |x0 - x_i|`.
pub fn outer_radius(samples: &[DVector<f64>], x0: &DVector<f64>) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(samples.iter().map(|x| (x - x0).norm()).fold(0.0, f64::max))
}

/// Builds the geometric radius schedule `r_i = r_0 nu^{-i/d}` with
/// `nu = (r_0 / r_k)^{d/k}`; the endpoints are kept exactly.
pub fn make_schedule(
    x0: DVector<f64>,
    r0: f64,
    rk: f64,
    stages: usize,
    intrinsic_dim: usize,
) -> Result<BallSchedule> {
    if !(r0 > rk && rk > 0.0) {
        return Err(Error::InvalidInput(format!(
            "schedule requires r0 > rk > 0, got r0 = {r0}, rk = {rk}"
        )));
    }
    if stages < 1 {
        return Err(Error::InvalidInput("need at least one stage".into()));
    }
    if intrinsic_dim < 1 {
        return Err(Error::InvalidInput("intrinsic dimension must be at least 1".into()));
    }
    let d = intrinsic_dim as f64;
    let nu = (r0 / rk).powf(d / stages as f64);
    let mut radii = Vec::with_capacity(stages + 1);
    radii.push(r0);
    for i in 1..stages {
        radii.push(r0 * nu.powf(-(i as f64) / d));
    }
    radii.push(rk);
    Ok(BallSchedule { center: x0, radii, nu, stages, intrinsic_dim })
}

/// Shrinking search for the innermost radius: halve `r` until (b) every
/// tangent-disk draw projects onto the manifold and (a) no sampled chord of
/// `M` inside the ball is nearly perpendicular to the tangent plane at the
/// center (which would betray a multi-valued patch).
#[allow(clippy::too_many_arguments)]
pub fn probe_min_radius<M, R>(
    manifold: &M,
    x0: &DVector<f64>,
    r_start: f64,
    step_scale: f64,
    newton: &NewtonParams,
    innermost_newton: &NewtonParams,
    opts: &ProbeOptions,
    rng: &mut R,
) -> Result<f64>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    if !(r_start > 0.0) {
        return Err(Error::InvalidInput("r_start must be positive".into()));
    }
    let frame0 = TangentFrame::new(manifold, x0)?;
    let u_norm = frame0.u_norm().clone();
    let floor = opts.floor_rel * r_start;

    let mut r = r_start;
    loop {
        if r < floor {
            return Err(Error::NoValidRadius { start: r_start, floor });
        }
        if projection_test_passes(manifold, x0, &frame0, &u_norm, r, innermost_newton, opts, rng)
            && pair_test_passes(manifold, x0, &frame0, r, step_scale, newton, opts, rng)?
        {
            return Ok(r);
        }
        r /= opts.shrink_factor;
    }
}

#[allow(clippy::too_many_arguments)]
fn projection_test_passes<M, R>(
    manifold: &M,
    x0: &DVector<f64>,
    frame0: &TangentFrame,
    u_norm: &nalgebra::DMatrix<f64>,
    r: f64,
    newton: &NewtonParams,
    opts: &ProbeOptions,
    rng: &mut R,
) -> bool
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    let d = frame0.tangent_dim();
    for _ in 0..opts.n_projection_draws {
        let z = x0 + uniform_tangent_disk(frame0, d, r, rng);
        if !project(manifold, &z, u_norm, newton).success {
            return false;
        }
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn pair_test_passes<M, R>(
    manifold: &M,
    x0: &DVector<f64>,
    frame0: &TangentFrame,
    r: f64,
    step_scale: f64,
    newton: &NewtonParams,
    opts: &ProbeOptions,
    rng: &mut R,
) -> Result<bool>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    // Sample M inside the ball with uniform surface measure; the test is
    // purely geometric.
    let ball = BallRestricted::new(manifold, x0.clone(), r);
    let params = ProposalParams::uniform(step_scale, *newton);
    let stride = (opts.pair_chain_steps / opts.pair_sample_cap as u64).max(1);
    let (mut points, _) =
        run_chain(&ball, &params, x0.clone(), opts.pair_chain_steps, stride, rng)?;
    points.push(x0.clone());

    let n = points.len();
    for _ in 0..opts.n_pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let v = &points[i] - &points[j];
        let len = v.norm();
        if len < 1e-9 * r {
            // Coincident stored states (rejection streaks) carry no angle.
            continue;
        }
        // Tangential part |v - Pv| with P the projector onto the normal
        // space at the center; a chord whose tangential fraction is tiny is
        // nearly vertical over the tangent plane.
        let tangential = frame0.project_tangent(&v);
        if tangential.norm() < opts.angle_tol_rel * len {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Uniform draw from the tangent disk of radius `r` at the frame's point.
fn uniform_tangent_disk<R: Rng + ?Sized>(
    frame: &TangentFrame,
    d: usize,
    r: f64,
    rng: &mut R,
) -> DVector<f64> {
    loop {
        let ambient = DVector::from_fn(frame.ambient_dim(), |_, _| rng.sample(StandardNormal));
        let dir = frame.project_tangent(&ambient);
        let norm = dir.norm();
        if norm > 1e-300 {
            let u: f64 = rng.random();
            return dir * (r * u.powf(1.0 / d as f64) / norm);
        }
    }
}

/// Ratio stage: samples `M` inside the ball of radius `radii_tail[0]` and
/// counts visits to the deeper balls. `radii_tail` holds the radii from the
/// stage's outer ball inward (`r_i, r_{i+1}, ..., r_k`).
///
/// Returns the estimate and a warm start for the next stage: the last
/// sample seen inside the next inner ball.
#[allow(clippy::too_many_arguments)]
pub fn estimate_ratio<M, R>(
    manifold: &M,
    density: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
    stage: usize,
    x0: &DVector<f64>,
    radii_tail: &[f64],
    x_start: DVector<f64>,
    n_steps: u64,
    burn_frac: f64,
    step_scale: f64,
    newton: &NewtonParams,
    check_reverse: bool,
    rng: &mut R,
) -> Result<(RatioEstimate, Option<DVector<f64>>)>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    let (&r_outer, inner_radii) = radii_tail
        .split_first()
        .filter(|(_, rest)| !rest.is_empty())
        .ok_or_else(|| Error::InvalidInput("stage needs an outer and an inner radius".into()))?;
    let r_inner = inner_radii[0];
    if r_inner > r_outer {
        return Err(Error::InvalidInput(format!(
            "inner radius {r_inner} exceeds outer radius {r_outer}"
        )));
    }

    let ball = BallRestricted::new(manifold, x0.clone(), r_outer);
    let mut params = ProposalParams::new(step_scale, density, *newton);
    params.check_reverse = check_reverse;

    let burn = ((n_steps as f64 * burn_frac).ceil() as u64).min(n_steps.saturating_sub(1));
    let counted = n_steps - burn;

    let mut indicator = Vec::with_capacity(counted as usize);
    let mut deeper_counts = vec![0u64; inner_radii.len().saturating_sub(1)];
    let mut warm: Option<DVector<f64>> = None;
    let mut state = ChainState::new(&ball, &params, x_start)?;
    let mut chain = ChainStats::default();

    for step in 1..=n_steps {
        let diag = mcmc_step(&mut state, &ball, &params, rng);
        chain.record(&diag);
        if step <= burn {
            continue;
        }
        let dist = (state.position() - x0).norm();
        if dist < r_inner {
            indicator.push(1.0);
            match warm.as_mut() {
                Some(w) => w.copy_from(state.position()),
                None => warm = Some(state.position().clone()),
            }
        } else {
            indicator.push(0.0);
        }
        for (slot, &rj) in deeper_counts.iter_mut().zip(&inner_radii[1..]) {
            if dist < rj {
                *slot += 1;
            }
        }
    }

    let n_next = indicator.iter().filter(|&&v| v == 1.0).count() as u64;
    if n_next == 0 {
        return Err(Error::StageFailure { stage, r_inner });
    }
    let r_hat = counted as f64 / n_next as f64;
    let p_hat = 1.0 / r_hat;

    // Constant indicator (p = 1) contributes zero variance; tau = 1.
    let tau_hat = if n_next == counted {
        1.0
    } else {
        integrated_act(&indicator, Some(p_hat * (1.0 - p_hat)))?.tau
    };

    Ok((
        RatioEstimate {
            stage,
            r_outer,
            r_inner,
            r_hat,
            p_hat,
            tau_hat,
            n_i: counted,
            n_next,
            deeper_counts,
            acceptance_fraction: chain.acceptance_fraction(),
            chain,
        },
        warm,
    ))
}

/// Direct Monte Carlo estimate over the innermost ball: uniform draws from
/// the tangent disk `D_k`, projected perpendicular to `T_{x0}`, weighted by
/// `f(y) / det(U_{x0}^t U_y)` and the indicator of `M` within the ball.
///
/// Any projection failure aborts the estimate: the radius certified by the
/// probe is expected to make failures impossible.
pub fn estimate_innermost<M, R>(
    manifold: &M,
    density: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
    x0: &DVector<f64>,
    r_k: f64,
    n_k: u64,
    newton: &NewtonParams,
    rng: &mut R,
) -> Result<(f64, f64)>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    if n_k == 0 {
        return Err(Error::InvalidInput("innermost estimate needs draws".into()));
    }
    let frame0 = TangentFrame::new(manifold, x0)?;
    let u_norm = frame0.u_norm().clone();
    let d = frame0.tangent_dim();

    let ln_vol = (d as f64 / 2.0) * std::f64::consts::PI.ln() + d as f64 * r_k.ln()
        - libm::lgamma(d as f64 / 2.0 + 1.0);
    let vol = ln_vol.exp();

    let mut values = Vec::with_capacity(n_k as usize);
    for draw in 0..n_k {
        let z = x0 + uniform_tangent_disk(&frame0, d, r_k, rng);
        let proj = project(manifold, &z, &u_norm, newton);
        if !proj.success {
            return Err(Error::InnermostProjectionFailure {
                draw: draw as usize,
                total: n_k as usize,
            });
        }
        let y = proj.point;
        let inside = (&y - x0).norm() <= r_k && manifold.inequalities_hold(&y);
        if !inside {
            values.push(0.0);
            continue;
        }
        let frame_y = TangentFrame::new(manifold, &y)?;
        // The geometric volume factor is the product of the cosines of the
        // principal angles between the tangent planes: |det|. The raw sign
        // depends on the orthonormal basis choice at each point.
        let jac = cross_jacobian(&frame0, &frame_y).abs();
        if !(jac > 1e-12) {
            // A vanishing factor means the patch is tangent-degenerate.
            return Err(Error::InnermostFold { draw: draw as usize, value: jac });
        }
        values.push((density)(&y) / jac);
    }

    let n = n_k as f64;
    let mean = values.iter().sum::<f64>() / n;
    let z_k_hat = vol * mean;
    if !(z_k_hat > 0.0) {
        return Err(Error::InvalidInput(
            "innermost estimate is zero: no draws landed on M inside the ball".into(),
        ));
    }
    let sum_sq: f64 = values.iter().map(|g| (g - mean) * (g - mean)).sum();
    let sigma_k_sq = vol * vol / (n * n) * sum_sq;
    let rho_k = sigma_k_sq.sqrt() / z_k_hat;
    Ok((z_k_hat, rho_k))
}

/// Full multi-phase integral: initial sampling run (when the geometry is
/// not pinned), center and radius selection, `k` ratio stages with warm
/// starts, innermost estimate, and the combined error bar.
pub fn integrate<M, R>(
    manifold: &M,
    density: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
    config: &IntegrateConfig,
    rng: &mut R,
) -> Result<IntegralEstimate>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    if config.stages < 1 {
        return Err(Error::InvalidInput("need at least one stage".into()));
    }
    if config.n_total < config.stages as u64 {
        return Err(Error::InvalidInput("n_total smaller than the stage count".into()));
    }
    let d = manifold.intrinsic_dim();
    if d < 1 {
        return Err(Error::InvalidInput("integrator requires intrinsic dimension >= 1".into()));
    }

    // Learn about M through sampling only if the geometry is not pinned.
    let samples = if config.x0.is_some() && config.r0.is_some() {
        Vec::new()
    } else {
        let n_init = config.n_initial.unwrap_or(config.n_total / config.stages as u64).max(1);
        let stride = (n_init / 2000).max(1);
        let params = ProposalParams::new(config.step_scale, density, config.newton);
        let (samples, _) =
            run_chain(manifold, &params, config.x_init.clone(), n_init, stride, rng)?;
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        samples
    };

    let x0 = match &config.x0 {
        Some(x) => x.clone(),
        None => choose_center(&samples, manifold)?,
    };
    let r0 = match config.r0 {
        Some(r) => r,
        None => outer_radius(&samples, &x0)?,
    };
    let rk = match config.rk {
        Some(r) => r,
        None => probe_min_radius(
            manifold,
            &x0,
            r0 / 2.0,
            config.step_scale,
            &config.newton,
            &config.innermost_newton,
            &config.probe,
            rng,
        )?,
    };

    let schedule = make_schedule(x0.clone(), r0, rk, config.stages, d)?;

    let n_stage = config.n_total / config.stages as u64;
    let mut stages = Vec::with_capacity(config.stages);
    let mut start = x0.clone();
    for i in 0..config.stages {
        let (est, warm) = estimate_ratio(
            manifold,
            density,
            i,
            &x0,
            &schedule.radii[i..],
            start,
            n_stage,
            config.burn_frac,
            config.step_scale,
            &config.newton,
            config.check_reverse,
            rng,
        )?;
        stages.push(est);
        start = if config.warm_start {
            warm.unwrap_or_else(|| x0.clone())
        } else {
            x0.clone()
        };
    }

    let n_k = config.n_innermost.unwrap_or(n_stage).max(1);
    let (z_k_hat, rho_k) =
        estimate_innermost(manifold, density, &x0, rk, n_k, &config.innermost_newton, rng)?;

    let z_hat = stages.iter().fold(z_k_hat, |acc, s| acc * s.r_hat);
    let stage_tuples: Vec<(f64, f64, u64)> =
        stages.iter().map(|s| (s.p_hat, s.tau_hat, s.n_i)).collect();
    let sigma_r = combine_error(rho_k, &stage_tuples)?;

    Ok(IntegralEstimate {
        z_hat,
        sigma_r,
        z_k_hat,
        rho_k,
        stages,
        schedule,
        innermost_samples: n_k,
    })
}

/// Accumulates the outcome of one stage chain for external diagnostics.
pub fn stage_acceptance(est: &RatioEstimate) -> f64 {
    est.chain.acceptance_fraction()
}

/// True when `diag` counts as a rejection of any kind.
pub fn is_rejection(outcome: StepOutcome) -> bool {
    outcome != StepOutcome::Accepted
}
