//! Tangent/normal frames at points of a constraint manifold.
//!
//! The tangent space `T_x` is the null space of `Q_x^t`; the normal space is
//! the column span of `Q_x`. Orthogonal projections onto both subspaces drive
//! every step of the sampler, so the frame keeps two representations:
//!
//! * a Cholesky factorization of the Gram matrix `Q_x^t Q_x`, used for all
//!   projector applications (cheap, built once per point), and
//! * a Householder QR of `Q_x`, built lazily, which materializes the
//!   orthonormal bases `U_tan` / `U_norm` when they are requested explicitly.
//!
//! When the Gram matrix is too ill-conditioned for the normal-equation route
//! the frame falls back to the QR representation for projections as well.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::HouseholderQr;
use crate::manifold::ConstraintManifold;

/// Constraint gradients with `sigma_min < RANK_RATIO_THRESHOLD * sigma_max`
/// are treated as rank deficient.
pub const RANK_RATIO_THRESHOLD: f64 = 1e-10;

/// Below this singular-value ratio the Gram/Cholesky route is unreliable
/// (the Gram matrix squares the conditioning) and the frame switches to QR.
const GRAM_SAFE_RATIO: f64 = 1e-7;

enum FrameCore {
    /// Cholesky of `Q^t Q`; projections via normal equations.
    Chol(Cholesky<f64, Dyn>),
    /// Projections through the Householder factorization in `qr`.
    Qr,
    /// No equality constraints: the tangent space is the whole ambient space.
    Free,
}

/// Orthonormal tangent/normal bases and the raw gradient matrix at a point.
pub struct TangentFrame {
    point: DVector<f64>,
    q_mat: DMatrix<f64>,
    core: FrameCore,
    qr: OnceLock<HouseholderQr>,
    u_tan: OnceLock<DMatrix<f64>>,
    u_norm: OnceLock<DMatrix<f64>>,
    sigma_ratio: f64,
}

impl TangentFrame {
    /// Builds the frame at `x` from the manifold's constraint gradients.
    ///
    /// Fails with [`Error::DegenerateConstraints`] when `Q_x` is numerically
    /// rank deficient. Expects `x` to lie on the manifold (|q(x)| within the
    /// projection tolerance); this is not re-checked here.
    pub fn new<M: ConstraintManifold + ?Sized>(manifold: &M, x: &DVector<f64>) -> Result<Self> {
        let q_mat = manifold.gradient(x);
        let m = q_mat.ncols();
        // The Gram matrix is the Newton matrix at (x, x); structured
        // manifolds assemble it without the dense product.
        let mut gram = DMatrix::zeros(m, m);
        if m == 0 || !manifold.newton_matrix_from_points(x, x, &mut gram) {
            gram = dense_gram(&q_mat);
        }
        Self::from_parts(x.clone(), q_mat, gram)
    }

    /// Builds the frame from a precomputed gradient matrix.
    pub fn from_gradient(point: DVector<f64>, q_mat: DMatrix<f64>) -> Result<Self> {
        let gram = dense_gram(&q_mat);
        Self::from_parts(point, q_mat, gram)
    }

    fn from_parts(point: DVector<f64>, q_mat: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let da = point.len();
        let m = q_mat.ncols();
        assert_eq!(q_mat.nrows(), da, "gradient matrix must be d_a x m");
        assert!(m <= da, "more equality constraints than ambient dimensions");

        if m == 0 {
            return Ok(TangentFrame {
                point,
                q_mat,
                core: FrameCore::Free,
                qr: OnceLock::new(),
                u_tan: OnceLock::new(),
                u_norm: OnceLock::new(),
                sigma_ratio: 1.0,
            });
        }

        let mut frame = TangentFrame {
            point,
            q_mat,
            core: FrameCore::Qr,
            qr: OnceLock::new(),
            u_tan: OnceLock::new(),
            u_norm: OnceLock::new(),
            sigma_ratio: 0.0,
        };

        if let Some(chol) = gram.clone().cholesky() {
            let lmax = lambda_max_power(&gram, 6);
            let lmin = lambda_min_inverse(&chol, m, 6);
            let ratio = if lmax > 0.0 { (lmin / lmax).sqrt() } else { 0.0 };
            if ratio >= GRAM_SAFE_RATIO {
                frame.core = FrameCore::Chol(chol);
                frame.sigma_ratio = ratio;
                return Ok(frame);
            }
        }

        // Marginal or failed Gram factorization: decide via QR.
        let (smin, smax) = frame.qr().sigma_extremes();
        let ratio = smin / smax;
        if ratio < RANK_RATIO_THRESHOLD {
            return Err(Error::DegenerateConstraints {
                ratio,
                threshold: RANK_RATIO_THRESHOLD,
            });
        }
        frame.sigma_ratio = ratio;
        Ok(frame)
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    /// Raw gradient matrix `Q_x` (`d_a x m`).
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q_mat
    }

    pub fn ambient_dim(&self) -> usize {
        self.point.len()
    }

    /// Tangent dimension `d`.
    pub fn tangent_dim(&self) -> usize {
        self.ambient_dim() - self.normal_dim()
    }

    /// Normal dimension `m`.
    pub fn normal_dim(&self) -> usize {
        self.q_mat.ncols()
    }

    /// Estimated `sigma_min / sigma_max` of `Q_x`.
    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_ratio
    }

    fn qr(&self) -> &HouseholderQr {
        self.qr.get_or_init(|| HouseholderQr::new(self.q_mat.clone()))
    }

    /// Orthonormal basis of the tangent space (`d_a x d`).
    pub fn u_tan(&self) -> &DMatrix<f64> {
        self.u_tan.get_or_init(|| match self.core {
            FrameCore::Free => DMatrix::identity(self.ambient_dim(), self.ambient_dim()),
            _ => self.qr().null_q(),
        })
    }

    /// Orthonormal basis of the normal space (`d_a x m`).
    pub fn u_norm(&self) -> &DMatrix<f64> {
        self.u_norm.get_or_init(|| match self.core {
            FrameCore::Free => DMatrix::zeros(self.ambient_dim(), 0),
            _ => self.qr().thin_q(),
        })
    }

    /// Normal component of `delta` (orthogonal projection onto span `Q_x`).
    pub fn normal_component(&self, delta: &DVector<f64>) -> DVector<f64> {
        match &self.core {
            FrameCore::Free => DVector::zeros(self.ambient_dim()),
            FrameCore::Chol(chol) => {
                let mut coeffs = self.q_mat.tr_mul(delta);
                chol.solve_mut(&mut coeffs);
                &self.q_mat * coeffs
            }
            FrameCore::Qr => {
                let qr = self.qr();
                let m = self.normal_dim();
                let mut c = delta.clone();
                qr.apply_qt(&mut c);
                for i in m..c.len() {
                    c[i] = 0.0;
                }
                qr.apply_q(&mut c);
                c
            }
        }
    }

    /// Splits `delta` into tangential and normal parts: `(v_t, w_n)` with
    /// `v_t` in `T_x`, `w_n` orthogonal to it and `v_t + w_n = delta`.
    pub fn decompose(&self, delta: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let w_n = self.normal_component(delta);
        let v_t = delta - &w_n;
        (v_t, w_n)
    }

    /// Tangential component of `delta`.
    pub fn project_tangent(&self, delta: &DVector<f64>) -> DVector<f64> {
        delta - self.normal_component(delta)
    }
}

fn dense_gram(q_mat: &DMatrix<f64>) -> DMatrix<f64> {
    let (da, m) = q_mat.shape();
    let mut qt = DMatrix::zeros(m, da);
    q_mat.transpose_to(&mut qt);
    let mut gram = DMatrix::zeros(m, m);
    gram.gemm(1.0, &qt, q_mat, 0.0);
    gram
}

fn lambda_max_power(s: &DMatrix<f64>, iters: usize) -> f64 {
    let m = s.nrows();
    let mut v = DVector::from_fn(m, |i, _| 1.0 + ((i as f64) * 0.6180339887498949).fract());
    let n = v.norm();
    v /= n;
    let mut lmax = 0.0;
    for _ in 0..iters {
        let w = s * &v;
        lmax = w.norm();
        if lmax == 0.0 {
            return 0.0;
        }
        v = w / lmax;
    }
    lmax
}

fn lambda_min_inverse(chol: &Cholesky<f64, Dyn>, m: usize, iters: usize) -> f64 {
    let mut v = DVector::from_fn(m, |i, _| 1.0 + ((i as f64) * 0.6180339887498949).fract());
    let n = v.norm();
    v /= n;
    let mut lmin = 0.0;
    for _ in 0..iters {
        let z = chol.solve(&v);
        let nz = z.norm();
        if !nz.is_finite() || nz == 0.0 {
            return 0.0;
        }
        lmin = 1.0 / nz;
        v = z / nz;
    }
    lmin
}

/// Builds the tangent/normal frame at `x` ([`TangentFrame::new`]).
pub fn tangent_frame<M: ConstraintManifold + ?Sized>(
    manifold: &M,
    x: &DVector<f64>,
) -> Result<TangentFrame> {
    TangentFrame::new(manifold, x)
}

/// Splits `delta` into its components in `T_x` and `T_x^perp`.
pub fn tangential_decompose(
    delta: &DVector<f64>,
    frame: &TangentFrame,
) -> (DVector<f64>, DVector<f64>) {
    frame.decompose(delta)
}

/// Determinant of `U_x^t U_y`: the volume distortion of projecting between
/// the two tangent planes. Equal in magnitude for `(x, y)` and `(y, x)`; the
/// sign depends on the basis choice.
pub fn cross_jacobian(fx: &TangentFrame, fy: &TangentFrame) -> f64 {
    assert_eq!(
        fx.tangent_dim(),
        fy.tangent_dim(),
        "cross_jacobian requires frames of equal tangent dimension"
    );
    if fx.tangent_dim() == 0 {
        return 1.0;
    }
    let overlap = fx.u_tan().tr_mul(fy.u_tan());
    overlap.lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::FnManifold;
    use approx::assert_relative_eq;

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

    fn sphere() -> FnManifold {
        FnManifold::new(
            3,
            1,
            |x, out| out[0] = x.norm_squared() - 1.0,
            |x, out| {
                for i in 0..3 {
                    out[(i, 0)] = 2.0 * x[i];
                }
            },
        )
    }

    #[test]
    fn sphere_frame_at_pole() {
        let m = sphere();
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let f = TangentFrame::new(&m, &x).unwrap();
        // U_norm spans (0,0,1); the tangent projector is diag(1,1,0).
        let un = f.u_norm();
        assert_relative_eq!(un.column(0).abs(), DVector::from_vec(vec![0.0, 0.0, 1.0]), epsilon = 1e-12);
        let ut = f.u_tan();
        let proj = ut * ut.transpose();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert_relative_eq!(proj, expected, epsilon = 1e-12);
    }

    #[test]
    fn circle_frame_spans() {
        let m = circle();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let f = TangentFrame::new(&m, &x).unwrap();
        assert!((f.u_norm()[(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((f.u_tan()[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn frame_invariants_on_circle_points() {
        let m = circle();
        for k in 0..16 {
            let t = k as f64 * 0.39269908169872414;
            let x = DVector::from_vec(vec![t.cos(), t.sin()]);
            let f = TangentFrame::new(&m, &x).unwrap();
            let ut = f.u_tan();
            let un = f.u_norm();
            assert!((ut.tr_mul(ut) - DMatrix::identity(1, 1)).amax() < 1e-10);
            assert!((un.tr_mul(un) - DMatrix::identity(1, 1)).amax() < 1e-10);
            assert!(ut.tr_mul(un).amax() < 1e-12);
            assert!(f.q().tr_mul(ut).amax() < 1e-10);
            // span(U_norm) = span(Q): residual of projecting Q onto U_norm.
            let proj = un * un.tr_mul(f.q());
            assert!((proj - f.q()).amax() / f.q().amax() < 1e-10);
        }
    }

    #[test]
    fn degenerate_constraints_are_rejected() {
        // Two copies of the same constraint: rank 1 < m = 2.
        let dup = FnManifold::new(
            2,
            2,
            |x, out| {
                let q = x[0] * x[0] + x[1] * x[1] - 1.0;
                out[0] = q;
                out[1] = q;
            },
            |x, out| {
                for j in 0..2 {
                    out[(0, j)] = 2.0 * x[0];
                    out[(1, j)] = 2.0 * x[1];
                }
            },
        );
        let x = DVector::from_vec(vec![1.0, 0.0]);
        match TangentFrame::new(&dup, &x) {
            Err(Error::DegenerateConstraints { .. }) => {}
            Err(other) => panic!("expected degenerate-constraint error, got {other:?}"),
            Ok(_) => panic!("expected degenerate-constraint error, got a frame"),
        }
    }

    #[test]
    fn decompose_splits_tangent_and_normal_inputs() {
        let m = sphere();
        let x = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let f = TangentFrame::new(&m, &x).unwrap();

        let tangent = f.u_tan() * DVector::from_vec(vec![0.3, -1.1]);
        let (v, w) = f.decompose(&tangent);
        assert!(w.norm() <= 1e-14);
        assert_relative_eq!(v, tangent, epsilon = 1e-13);

        let normal = f.u_norm() * DVector::from_vec(vec![0.7]);
        let (v, w) = f.decompose(&normal);
        assert!(v.norm() <= 1e-14);
        assert_relative_eq!(w, normal, epsilon = 1e-13);
    }

    #[test]
    fn decompose_is_an_exact_direct_sum() {
        let m = sphere();
        let x = DVector::from_vec(vec![0.48, -0.6, 0.64]);
        // Keep x exactly on the sphere.
        let x = &x / x.norm();
        let f = TangentFrame::new(&m, &x).unwrap();
        let delta = DVector::from_vec(vec![0.9, -0.2, 1.7]);
        let (v, w) = f.decompose(&delta);
        assert!((&v + &w - &delta).norm() <= 1e-14 * delta.norm());
        assert!(v.dot(&w).abs() <= 1e-12);
    }

    #[test]
    fn cross_jacobian_of_identical_frames_is_one() {
        let m = sphere();
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let f1 = TangentFrame::new(&m, &x).unwrap();
        let f2 = TangentFrame::new(&m, &x).unwrap();
        assert_relative_eq!(cross_jacobian(&f1, &f2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cross_jacobian_of_plane_pair_is_angle_cosine() {
        // Two lines through the origin in R^2 at angle pi/3, realized as
        // level sets of linear constraints.
        let line = |nx: f64, ny: f64| {
            FnManifold::new(
                2,
                1,
                move |x, out| out[0] = nx * x[0] + ny * x[1],
                move |_, out| {
                    out[(0, 0)] = nx;
                    out[(1, 0)] = ny;
                },
            )
        };
        let theta = std::f64::consts::FRAC_PI_3;
        let l1 = line(0.0, 1.0); // tangent along e_x
        let l2 = line(theta.sin(), -theta.cos()); // tangent at angle theta
        let origin = DVector::zeros(2);
        let f1 = TangentFrame::new(&l1, &origin).unwrap();
        let f2 = TangentFrame::new(&l2, &origin).unwrap();
        let j = cross_jacobian(&f1, &f2);
        // 2-D principal-angle oracle: |det| = |cos(angle between tangents)|.
        let t1 = f1.u_tan().column(0).clone_owned();
        let t2 = f2.u_tan().column(0).clone_owned();
        let oracle = t1.dot(&t2).abs();
        assert_relative_eq!(j.abs(), oracle, epsilon = 1e-12);
        assert_relative_eq!(j.abs(), theta.cos(), epsilon = 1e-12);
    }

    #[test]
    fn cross_jacobian_of_orthogonal_lines_is_zero() {
        let line = |nx: f64, ny: f64| {
            FnManifold::new(
                2,
                1,
                move |x, out| out[0] = nx * x[0] + ny * x[1],
                move |_, out| {
                    out[(0, 0)] = nx;
                    out[(1, 0)] = ny;
                },
            )
        };
        let origin = DVector::zeros(2);
        let horizontal = TangentFrame::new(&line(0.0, 1.0), &origin).unwrap();
        let vertical = TangentFrame::new(&line(1.0, 0.0), &origin).unwrap();
        assert!(cross_jacobian(&horizontal, &vertical).abs() < 1e-15);
    }

    #[test]
    fn cross_jacobian_magnitude_is_basis_invariant() {
        let m = sphere();
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let fx = TangentFrame::new(&m, &x).unwrap();
        let fy = TangentFrame::new(&m, &y).unwrap();
        let base = cross_jacobian(&fx, &fy);

        // Re-randomize the orthogonal factor: U W for a Haar-ish orthogonal W.
        let raw = DMatrix::from_fn(2, 2, |i, j| ((i * 7 + j * 13 + 3) as f64 * 0.7391).sin());
        let w = HouseholderQr::new(raw).thin_q();
        let rotated = fx.u_tan() * &w;
        let overlap = rotated.tr_mul(fy.u_tan());
        let det = overlap.lu().determinant();
        assert!((det.abs() - base.abs()).abs() <= 1e-12);
    }

    #[test]
    fn free_frame_has_full_tangent_space() {
        let free = FnManifold::new(3, 0, |_, _| {}, |_, _| {});
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let f = TangentFrame::new(&free, &x).unwrap();
        assert_eq!(f.tangent_dim(), 3);
        let delta = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let (v, w) = f.decompose(&delta);
        assert_relative_eq!(v, delta, epsilon = 1e-15);
        assert!(w.norm() == 0.0);
    }
}
