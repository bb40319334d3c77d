//! Reversible MCMC on a constraint manifold: tangent-space Gaussian
//! proposals, Newton projection back to the surface, Metropolis-Hastings
//! acceptance, and the reverse-projection check that certifies the move is
//! reversible.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::TangentFrame;
use crate::manifold::ConstraintManifold;
use crate::newton::{project_from_base, NewtonParams};

/// Proposal parameters: tangent step scale, target density and the Newton
/// solver settings shared by the forward and reverse projections.
pub struct ProposalParams<'a> {
    /// Width of the isotropic tangent Gaussian, in ambient length units.
    pub step_scale: f64,
    /// Un-normalized target density; must be positive on the manifold.
    pub density: &'a (dyn Fn(&DVector<f64>) -> f64 + Sync),
    pub newton: NewtonParams,
    /// Run the reverse-projection check (disable only to demonstrate the
    /// resulting sampling bias).
    pub check_reverse: bool,
    /// Accept the reverse projection only if it lands within this distance
    /// of the starting point.
    pub reverse_match_tol: f64,
}

fn unit_density(_: &DVector<f64>) -> f64 {
    1.0
}

impl<'a> ProposalParams<'a> {
    pub fn new(
        step_scale: f64,
        density: &'a (dyn Fn(&DVector<f64>) -> f64 + Sync),
        newton: NewtonParams,
    ) -> Self {
        assert!(step_scale > 0.0, "step scale must be positive");
        ProposalParams {
            step_scale,
            density,
            newton,
            check_reverse: true,
            reverse_match_tol: default_reverse_match_tol(newton.tol),
        }
    }

    /// Uniform surface measure (`f = 1`).
    pub fn uniform(step_scale: f64, newton: NewtonParams) -> ProposalParams<'static> {
        static UNIT: fn(&DVector<f64>) -> f64 = unit_density;
        ProposalParams::new(step_scale, &UNIT, newton)
    }
}

/// The reverse solve must reproduce the starting point to within
/// `max(1e-8, 100 tol)`: the solver flag alone does not certify that the
/// reverse proposal generates `x` rather than some other root.
pub fn default_reverse_match_tol(tol: f64) -> f64 {
    (100.0 * tol).max(1e-8)
}

/// Current chain position with its cached density value and frame.
pub struct ChainState {
    x: DVector<f64>,
    fx: f64,
    frame: TangentFrame,
}

impl ChainState {
    /// Validates feasibility (`|q(x)| <= tol`, all `h_j(x) > 0`) and caches
    /// the frame and density value.
    pub fn new<M: ConstraintManifold + ?Sized>(
        manifold: &M,
        params: &ProposalParams,
        x: DVector<f64>,
    ) -> Result<Self> {
        let qn = manifold.residual(&x).norm();
        if !(qn <= params.newton.tol) {
            return Err(Error::InfeasibleStart(format!(
                "|q(x)| = {qn:.3e} exceeds tol = {:.3e}",
                params.newton.tol
            )));
        }
        if !manifold.inequalities_hold(&x) {
            return Err(Error::InfeasibleStart("inequality constraint violated".into()));
        }
        let frame = TangentFrame::new(manifold, &x)?;
        let fx = (params.density)(&x);
        if !(fx > 0.0) || !fx.is_finite() {
            return Err(Error::InfeasibleStart(format!("density f(x) = {fx} not positive")));
        }
        Ok(ChainState { x, fx, frame })
    }

    pub fn position(&self) -> &DVector<f64> {
        &self.x
    }

    /// Cached `f(x)`.
    pub fn density_value(&self) -> f64 {
        self.fx
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }
}

/// Why a step ended the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StepOutcome {
    /// Forward Newton projection did not converge.
    ProjectionFailure,
    /// The projected proposal violated an inequality constraint.
    InequalityFailure,
    /// Rejected by the Metropolis-Hastings test.
    MetropolisReject,
    /// The reverse projection failed or recovered a different point.
    ReverseFailure,
    Accepted,
}

/// Per-step outcome classification. Any outcome other than `Accepted`
/// leaves the chain state untouched.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub outcome: StepOutcome,
    pub newton_iterations_forward: usize,
    pub newton_iterations_reverse: usize,
}

/// Draws `v = U_tan xi` with `xi` a `d`-vector of iid Gaussians of standard
/// deviation `s`, and returns `(v, log p(v))`.
pub fn sample_tangent<R: Rng + ?Sized>(
    frame: &TangentFrame,
    s: f64,
    rng: &mut R,
) -> (DVector<f64>, f64) {
    assert!(s > 0.0);
    // Projecting an ambient isotropic Gaussian onto T_x has exactly the law
    // of U_tan xi, without materializing the basis.
    let ambient = DVector::from_fn(frame.ambient_dim(), |_, _| rng.sample(StandardNormal));
    let mut v = frame.project_tangent(&ambient);
    v *= s;
    let logp = log_tangent_density(v.norm(), s, frame.tangent_dim());
    (v, logp)
}

/// Isotropic tangent Gaussian density
/// `p(v) = (2 pi)^{-d/2} s^{-d} exp(-|v|^2 / (2 s^2))`.
pub fn tangent_density(v: &DVector<f64>, s: f64, d: usize) -> f64 {
    log_tangent_density(v.norm(), s, d).exp()
}

/// Log of [`tangent_density`] as a function of `|v|`.
pub fn log_tangent_density(norm_v: f64, s: f64, d: usize) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    -norm_v * norm_v / (2.0 * s * s) - d as f64 * (s.ln() + 0.5 * ln_2pi)
}

/// One reversible MCMC step. On rejection the state is left untouched and
/// the diagnostics say which stage rejected.
pub fn mcmc_step<M: ConstraintManifold + ?Sized, R: Rng + ?Sized>(
    state: &mut ChainState,
    manifold: &M,
    params: &ProposalParams,
    rng: &mut R,
) -> StepDiagnostics {
    let diag = |outcome, fwd, rev| StepDiagnostics {
        outcome,
        newton_iterations_forward: fwd,
        newton_iterations_reverse: rev,
    };

    // (1) tangent move, (2) projection perpendicular to T_x.
    let (v, logp_fwd) = sample_tangent(&state.frame, params.step_scale, rng);
    let z = &state.x + &v;
    let forward = project_from_base(manifold, &z, &state.x, state.frame.q(), &params.newton);
    if !forward.success {
        return diag(StepOutcome::ProjectionFailure, forward.iterations, 0);
    }
    let y = forward.point;

    // (3) strict inequality check on the proposal.
    if !manifold.inequalities_hold(&y) {
        return diag(StepOutcome::InequalityFailure, forward.iterations, 0);
    }

    // (4) frame at y and reverse tangent step v' with x = y + v' + w'.
    let frame_y = match TangentFrame::new(manifold, &y) {
        Ok(f) => f,
        // A proposal where the constraint gradients degenerate is unusable;
        // reject it like a failed projection.
        Err(_) => return diag(StepOutcome::ProjectionFailure, forward.iterations, 0),
    };
    let delta = &state.x - &y;
    let (v_rev, _) = frame_y.decompose(&delta);
    let logp_rev = log_tangent_density(v_rev.norm(), params.step_scale, frame_y.tangent_dim());

    // (5) Metropolis-Hastings test; f(y) is only evaluated here, after the
    // inequality check has passed.
    let fy = (params.density)(&y);
    let log_ratio = fy.ln() + logp_rev - state.fx.ln() - logp_fwd;
    let alpha = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
    let u: f64 = rng.random();
    if !(u < alpha) {
        return diag(StepOutcome::MetropolisReject, forward.iterations, 0);
    }

    // (6) reverse projection: the Newton solver must reproduce x from y + v'.
    let mut reverse_iterations = 0;
    if params.check_reverse {
        let z_rev = &y + &v_rev;
        let reverse = project_from_base(manifold, &z_rev, &y, frame_y.q(), &params.newton);
        reverse_iterations = reverse.iterations;
        let recovered = reverse.success
            && (&reverse.point - &state.x).norm() <= params.reverse_match_tol;
        if !recovered {
            return diag(StepOutcome::ReverseFailure, forward.iterations, reverse_iterations);
        }
    }

    // (7) accept.
    state.x = y;
    state.fx = fy;
    state.frame = frame_y;
    diag(StepOutcome::Accepted, forward.iterations, reverse_iterations)
}

/// Aggregate outcome counts over a chain run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ChainStats {
    pub steps: u64,
    pub accepted: u64,
    pub projection_failures: u64,
    pub inequality_failures: u64,
    pub metropolis_rejects: u64,
    pub reverse_failures: u64,
    pub forward_newton_iterations: u64,
    pub reverse_newton_iterations: u64,
}

impl ChainStats {
    pub fn record(&mut self, diag: &StepDiagnostics) {
        self.steps += 1;
        self.forward_newton_iterations += diag.newton_iterations_forward as u64;
        self.reverse_newton_iterations += diag.newton_iterations_reverse as u64;
        match diag.outcome {
            StepOutcome::Accepted => self.accepted += 1,
            StepOutcome::ProjectionFailure => self.projection_failures += 1,
            StepOutcome::InequalityFailure => self.inequality_failures += 1,
            StepOutcome::MetropolisReject => self.metropolis_rejects += 1,
            StepOutcome::ReverseFailure => self.reverse_failures += 1,
        }
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    pub fn reverse_failure_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.reverse_failures as f64 / self.steps as f64
        }
    }
}

/// Runs a chain, invoking `observer(step, state, diagnostics)` after every
/// step (step indices start at 1).
pub fn run_chain_observed<M, R, F>(
    manifold: &M,
    params: &ProposalParams,
    x_init: DVector<f64>,
    n_steps: u64,
    rng: &mut R,
    mut observer: F,
) -> Result<ChainStats>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(u64, &ChainState, &StepDiagnostics),
{
    let mut state = ChainState::new(manifold, params, x_init)?;
    let mut stats = ChainStats::default();
    for step in 1..=n_steps {
        let diag = mcmc_step(&mut state, manifold, params, rng);
        stats.record(&diag);
        observer(step, &state, &diag);
    }
    Ok(stats)
}

/// Runs a chain and stores every `stride`-th state.
pub fn run_chain<M, R>(
    manifold: &M,
    params: &ProposalParams,
    x_init: DVector<f64>,
    n_steps: u64,
    stride: u64,
    rng: &mut R,
) -> Result<(Vec<DVector<f64>>, ChainStats)>
where
    M: ConstraintManifold + ?Sized,
    R: Rng + ?Sized,
{
    if stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    let mut samples = Vec::with_capacity((n_steps / stride) as usize);
    let stats = run_chain_observed(manifold, params, x_init, n_steps, rng, |step, state, _| {
        if step % stride == 0 {
            samples.push(state.position().clone());
        }
    })?;
    Ok((samples, stats))
}
