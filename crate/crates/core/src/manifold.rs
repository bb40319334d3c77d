//! Constraint manifolds: zero sets of equality constraints intersected with
//! strict inequalities in ambient Euclidean space.

use nalgebra::{DMatrix, DVector};

/// A manifold `M = { x : q_i(x) = 0, h_j(x) > 0 }` embedded in `R^{d_a}`.
///
/// Implementations supply the residual `q`, the gradient matrix `Q_x`
/// (`d_a x m`, column `i` holds `grad q_i`), and the inequality values `h`.
/// Gradients are analytic; see [`check_gradient`] for the finite-difference
/// self-check.
///
/// Descriptions are immutable after construction and safe to share across
/// threads; evaluation methods write into caller-provided buffers.
pub trait ConstraintManifold: Send + Sync {
    fn ambient_dim(&self) -> usize;

    fn equality_count(&self) -> usize;

    fn inequality_count(&self) -> usize {
        0
    }

    /// Intrinsic dimension `d = d_a - m`.
    fn intrinsic_dim(&self) -> usize {
        self.ambient_dim() - self.equality_count()
    }

    /// Writes `q(x)` into `out` (length `m`).
    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>);

    /// Writes the gradient matrix `Q_x` into `out` (`d_a x m`).
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>);

    /// Value of the `j`-th inequality constraint, `j < inequality_count()`.
    fn inequality(&self, x: &DVector<f64>, j: usize) -> f64 {
        let _ = (x, j);
        panic!("manifold has no inequality constraints");
    }

    /// Optional fast path for the Newton matrix of a projection whose
    /// direction matrix is the constraint gradient at a base point: writes
    /// `J_ij = grad q_i(z)^t grad q_j(x)` into `out` (`m x m`) and returns
    /// true. The default declines, leaving the dense product to the caller.
    fn newton_matrix_from_points(
        &self,
        z: &DVector<f64>,
        x: &DVector<f64>,
        out: &mut DMatrix<f64>,
    ) -> bool {
        let _ = (z, x, out);
        false
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.equality_count());
        self.residual_into(x, &mut out);
        out
    }

    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.ambient_dim(), self.equality_count());
        self.gradient_into(x, &mut out);
        out
    }

    fn inequalities(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.inequality_count(), |j, _| self.inequality(x, j))
    }

    /// All inequality constraints strictly satisfied at `x`.
    fn inequalities_hold(&self, x: &DVector<f64>) -> bool {
        (0..self.inequality_count()).all(|j| self.inequality(x, j) > 0.0)
    }

    /// `|q(x)| <= tol` and all `h_j(x) > 0`.
    fn is_feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.residual(x).norm() <= tol && self.inequalities_hold(x)
    }
}

impl<M: ConstraintManifold + ?Sized> ConstraintManifold for &M {
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn equality_count(&self) -> usize {
        (**self).equality_count()
    }
    fn inequality_count(&self) -> usize {
        (**self).inequality_count()
    }
    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        (**self).residual_into(x, out)
    }
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        (**self).gradient_into(x, out)
    }
    fn inequality(&self, x: &DVector<f64>, j: usize) -> f64 {
        (**self).inequality(x, j)
    }
    fn newton_matrix_from_points(
        &self,
        z: &DVector<f64>,
        x: &DVector<f64>,
        out: &mut DMatrix<f64>,
    ) -> bool {
        (**self).newton_matrix_from_points(z, x, out)
    }
}

type ResidualFn = Box<dyn Fn(&DVector<f64>, &mut DVector<f64>) + Send + Sync>;
type GradientFn = Box<dyn Fn(&DVector<f64>, &mut DMatrix<f64>) + Send + Sync>;
type InequalityFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Generic callback-backed manifold, for constraint sets defined ad hoc.
pub struct FnManifold {
    ambient_dim: usize,
    equality_count: usize,
    q: ResidualFn,
    grad_q: GradientFn,
    inequalities: Vec<InequalityFn>,
}

impl FnManifold {
    pub fn new(
        ambient_dim: usize,
        equality_count: usize,
        q: impl Fn(&DVector<f64>, &mut DVector<f64>) + Send + Sync + 'static,
        grad_q: impl Fn(&DVector<f64>, &mut DMatrix<f64>) + Send + Sync + 'static,
    ) -> Self {
        assert!(ambient_dim >= equality_count);
        FnManifold {
            ambient_dim,
            equality_count,
            q: Box::new(q),
            grad_q: Box::new(grad_q),
            inequalities: Vec::new(),
        }
    }

    pub fn with_inequality(
        mut self,
        h: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.inequalities.push(Box::new(h));
        self
    }
}

impl ConstraintManifold for FnManifold {
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn equality_count(&self) -> usize {
        self.equality_count
    }

    fn inequality_count(&self) -> usize {
        self.inequalities.len()
    }

    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        (self.q)(x, out)
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        (self.grad_q)(x, out)
    }

    fn inequality(&self, x: &DVector<f64>, j: usize) -> f64 {
        (self.inequalities[j])(x)
    }
}

/// A manifold restricted to an ambient ball: adds the single inequality
/// `r^2 - |x - center|^2 > 0` and changes nothing else.
pub struct BallRestricted<M> {
    inner: M,
    center: DVector<f64>,
    radius: f64,
}

impl<M: ConstraintManifold> BallRestricted<M> {
    pub fn new(inner: M, center: DVector<f64>, radius: f64) -> Self {
        assert_eq!(center.len(), inner.ambient_dim());
        assert!(radius > 0.0);
        BallRestricted { inner, center, radius }
    }
}

impl<M: ConstraintManifold> ConstraintManifold for BallRestricted<M> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn equality_count(&self) -> usize {
        self.inner.equality_count()
    }

    fn inequality_count(&self) -> usize {
        self.inner.inequality_count() + 1
    }

    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        self.inner.residual_into(x, out)
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        self.inner.gradient_into(x, out)
    }

    fn inequality(&self, x: &DVector<f64>, j: usize) -> f64 {
        if j < self.inner.inequality_count() {
            return self.inner.inequality(x, j);
        }
        let mut dist2 = 0.0;
        for i in 0..x.len() {
            let d = x[i] - self.center[i];
            dist2 += d * d;
        }
        self.radius * self.radius - dist2
    }

    fn newton_matrix_from_points(
        &self,
        z: &DVector<f64>,
        x: &DVector<f64>,
        out: &mut DMatrix<f64>,
    ) -> bool {
        self.inner.newton_matrix_from_points(z, x, out)
    }
}

/// Maximum relative error between the analytic gradient matrix and a central
/// finite difference of the residual at `x`.
///
/// The error for column `j` is scaled by `max(|grad q_j|, 1)`.
pub fn check_gradient<M: ConstraintManifold + ?Sized>(
    manifold: &M,
    x: &DVector<f64>,
    step: f64,
) -> f64 {
    let da = manifold.ambient_dim();
    let m = manifold.equality_count();
    let analytic = manifold.gradient(x);
    let mut plus = DVector::zeros(m);
    let mut minus = DVector::zeros(m);
    let mut xp = x.clone();

    let mut worst: f64 = 0.0;
    let col_scale: Vec<f64> = (0..m).map(|j| analytic.column(j).norm().max(1.0)).collect();
    for i in 0..da {
        let h = step * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        manifold.residual_into(&xp, &mut plus);
        xp[i] = x[i] - h;
        manifold.residual_into(&xp, &mut minus);
        xp[i] = x[i];
        for j in 0..m {
            let fd = (plus[j] - minus[j]) / (2.0 * h);
            let err = (fd - analytic[(i, j)]).abs() / col_scale[j];
            worst = worst.max(err);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unit circle in the plane: q = x^2 + y^2 - 1.
    fn circle() -> FnManifold {
        FnManifold::new(
            2,
            1,
            |x, out| out[0] = x[0] * x[0] + x[1] * x[1] - 1.0,
            |x, out| {
                out[(0, 0)] = 2.0 * x[0];
                out[(1, 0)] = 2.0 * x[1];
            },
        )
    }

    #[test]
    fn dims_and_feasibility() {
        let c = circle();
        assert_eq!(c.ambient_dim(), 2);
        assert_eq!(c.intrinsic_dim(), 1);
        assert!(c.is_feasible(&DVector::from_vec(vec![1.0, 0.0]), 1e-12));
        assert!(!c.is_feasible(&DVector::from_vec(vec![1.0, 0.5]), 1e-12));
    }

    #[test]
    fn gradient_check_passes_for_analytic_gradient() {
        let c = circle();
        let x = DVector::from_vec(vec![0.6, 0.8]);
        assert!(check_gradient(&c, &x, 1e-6) < 1e-9);
    }

    #[test]
    fn gradient_check_flags_wrong_gradient() {
        let bad = FnManifold::new(
            2,
            1,
            |x, out| out[0] = x[0] * x[0] + x[1] * x[1] - 1.0,
            |x, out| {
                out[(0, 0)] = 2.0 * x[0];
                out[(1, 0)] = 1.0 * x[1]; // wrong factor
            },
        );
        let x = DVector::from_vec(vec![0.6, 0.8]);
        assert!(check_gradient(&bad, &x, 1e-6) > 1e-2);
    }

    #[test]
    fn ball_restriction_appends_single_inequality() {
        let c = circle().with_inequality(|x| x[1] + 2.0);
        let b = BallRestricted::new(c, DVector::from_vec(vec![1.0, 0.0]), 0.5);
        assert_eq!(b.inequality_count(), 2);
        let on = DVector::from_vec(vec![1.0, 0.1]);
        let h = b.inequalities(&on);
        assert!(h[0] > 0.0);
        assert!((h[1] - (0.25 - 0.01)).abs() < 1e-15);
        let far = DVector::from_vec(vec![0.0, 1.0]);
        assert!(!b.inequalities_hold(&far));
    }

    #[test]
    fn infinite_radius_ball_is_vacuous() {
        let b = BallRestricted::new(circle(), DVector::zeros(2), f64::INFINITY);
        assert!(b.inequalities_hold(&DVector::from_vec(vec![100.0, -3.0])));
    }
}
