//! Newton projection onto the constraint set along a fixed set of directions.

use nalgebra::{DMatrix, DVector};

use crate::manifold::ConstraintManifold;

/// Parameters of the Newton projection. The residual is measured in the
/// Euclidean norm.
#[derive(Debug, Clone, Copy)]
pub struct NewtonParams {
    /// Convergence tolerance on `|q(z + Q a)|`.
    pub tol: f64,
    /// Maximum number of Newton steps.
    pub nmax: usize,
}

impl NewtonParams {
    pub fn new(tol: f64, nmax: usize) -> Self {
        assert!(tol > 0.0, "tol must be positive");
        assert!(nmax >= 1, "nmax must be at least 1");
        NewtonParams { tol, nmax }
    }
}

impl Default for NewtonParams {
    fn default() -> Self {
        // Tolerance near machine precision; a low iteration cap keeps the
        // sampler from grinding on hopeless proposals.
        NewtonParams { tol: 1e-12, nmax: 10 }
    }
}

/// Outcome of [`project`].
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// Direction coefficients: the correction is `Q a`.
    pub a: DVector<f64>,
    pub success: bool,
    /// Newton steps taken before returning.
    pub iterations: usize,
    /// Last iterate `z + Q a`; on success it satisfies `|q(point)| <= tol`.
    pub point: DVector<f64>,
}

/// Solves `q(z + Q a) = 0` for the coefficient vector `a` with plain Newton
/// iteration: no line search, no regularization, initial guess `a = 0`.
///
/// `q_dirs` holds the correction directions as columns (`d_a x m`); the
/// sampler passes the raw gradient matrix `Q_x`, the innermost-ball
/// integrator passes the orthonormal normal basis at the ball center. The
/// Newton matrix is `J_ij = grad q_i(z + Qa)^t (q_dirs)_j`.
///
/// Failure (no convergence within `nmax` steps, or a singular linear system)
/// is an expected outcome and is reported through `success`, not an error.
pub fn project<M: ConstraintManifold + ?Sized>(
    manifold: &M,
    z: &DVector<f64>,
    q_dirs: &DMatrix<f64>,
    params: &NewtonParams,
) -> ProjectionResult {
    project_impl(manifold, z, q_dirs, None, params)
}

/// [`project`] along the gradient directions of a known base point `x`
/// (`q_dirs = Q_x`), letting the manifold assemble the Newton matrix from
/// its constraint structure when it can.
pub(crate) fn project_from_base<M: ConstraintManifold + ?Sized>(
    manifold: &M,
    z: &DVector<f64>,
    base: &DVector<f64>,
    q_dirs: &DMatrix<f64>,
    params: &NewtonParams,
) -> ProjectionResult {
    project_impl(manifold, z, q_dirs, Some(base), params)
}

fn project_impl<M: ConstraintManifold + ?Sized>(
    manifold: &M,
    z: &DVector<f64>,
    q_dirs: &DMatrix<f64>,
    base: Option<&DVector<f64>>,
    params: &NewtonParams,
) -> ProjectionResult {
    let da = manifold.ambient_dim();
    let m = manifold.equality_count();
    debug_assert_eq!(z.len(), da);
    debug_assert_eq!(q_dirs.nrows(), da);
    debug_assert_eq!(q_dirs.ncols(), m);

    let mut a = DVector::zeros(m);
    let mut point = z.clone();
    let mut residual = DVector::zeros(m);
    manifold.residual_into(&point, &mut residual);

    let mut dense = None;
    let mut jac = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    let mut iterations = 0;

    loop {
        let norm = residual.norm();
        if norm <= params.tol {
            return ProjectionResult { a, success: true, iterations, point };
        }
        if iterations >= params.nmax || !norm.is_finite() {
            return ProjectionResult { a, success: false, iterations, point };
        }

        let structured =
            base.is_some_and(|x| manifold.newton_matrix_from_points(&point, x, &mut jac));
        if !structured {
            let (grad, grad_t) = dense
                .get_or_insert_with(|| (DMatrix::zeros(da, m), DMatrix::zeros(m, da)));
            manifold.gradient_into(&point, grad);
            grad.transpose_to(grad_t);
            jac.gemm(1.0, grad_t, q_dirs, 0.0);
        }
        rhs.copy_from(&residual);
        rhs.neg_mut();
        if !crate::linalg::lu_solve_in_place(&mut jac, &mut rhs) {
            // Singular Newton system: same verdict as non-convergence.
            return ProjectionResult { a, success: false, iterations, point };
        }
        a += &rhs;
        point.copy_from(z);
        point.gemv(1.0, q_dirs, &a, 1.0);
        manifold.residual_into(&point, &mut residual);
        iterations += 1;
    }
}
