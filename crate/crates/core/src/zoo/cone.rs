//! Circular right-angle cone `z = sqrt(x^2 + y^2)` with `x^2 + y^2 < 1`,
//! `z > 0`. The vertex is a genuine singularity of the surface; it is
//! excluded by the strict inequality and gets no special handling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::ConstraintManifold;

pub struct Cone;

/// Builds the unit right-angle cone.
pub fn cone_manifold() -> Cone {
    Cone
}

impl Cone {
    pub fn default_start(&self) -> DVector<f64> {
        DVector::from_vec(vec![0.5, 0.0, 0.5])
    }
}

impl ConstraintManifold for Cone {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn equality_count(&self) -> usize {
        1
    }

    fn inequality_count(&self) -> usize {
        2
    }

    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out[0] = x[2] - (x[0] * x[0] + x[1] * x[1]).sqrt();
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        out[(0, 0)] = -x[0] / rho;
        out[(1, 0)] = -x[1] / rho;
        out[(2, 0)] = 1.0;
    }

    fn inequality(&self, x: &DVector<f64>, j: usize) -> f64 {
        match j {
            0 => 1.0 - (x[0] * x[0] + x[1] * x[1]),
            1 => x[2],
            _ => panic!("cone has 2 inequalities"),
        }
    }
}

/// Coordinate selector for the analytic cone marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeCoord {
    X,
    Y,
    Z,
}

/// Marginal densities of the uniform measure on the cone:
/// `g_X(v) = g_Y(v) = (2/pi) sqrt(1 - v^2)` on `[-1, 1]`, `g_Z(v) = 2v` on
/// `[0, 1]`.
pub fn cone_marginal(coord: ConeCoord, value: f64) -> Result<f64> {
    match coord {
        ConeCoord::X | ConeCoord::Y => {
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "marginal support is [-1, 1], got {value}"
                )));
            }
            Ok(2.0 / std::f64::consts::PI * (1.0 - value * value).sqrt())
        }
        ConeCoord::Z => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidInput(format!(
                    "marginal support is [0, 1], got {value}"
                )));
            }
            Ok(2.0 * value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::check_gradient;
    use approx::assert_relative_eq;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn z_marginal_endpoints() {
        assert_eq!(cone_marginal(ConeCoord::Z, 1.0).unwrap(), 2.0);
        assert_eq!(cone_marginal(ConeCoord::Z, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn marginals_normalize_to_one() {
        let ix = simpson(|v| cone_marginal(ConeCoord::X, v).unwrap(), -1.0, 1.0, 20000);
        assert_relative_eq!(ix, 1.0, epsilon = 1e-6);
        let iz = simpson(|v| cone_marginal(ConeCoord::Z, v).unwrap(), 0.0, 1.0, 2000);
        assert_relative_eq!(iz, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn z_first_moment_is_two_thirds() {
        let ez = simpson(|v| v * cone_marginal(ConeCoord::Z, v).unwrap(), 0.0, 1.0, 2000);
        assert_relative_eq!(ez, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn out_of_support_values_are_errors() {
        assert!(cone_marginal(ConeCoord::X, 1.5).is_err());
        assert!(cone_marginal(ConeCoord::Z, -0.1).is_err());
    }

    #[test]
    fn surface_points_are_feasible_and_gradient_checks() {
        let c = cone_manifold();
        for k in 1..100 {
            let r = 0.01 + 0.009 * k as f64;
            let t = 0.7 * k as f64;
            let p = DVector::from_vec(vec![r * t.cos(), r * t.sin(), r]);
            assert!(c.is_feasible(&p, 1e-12));
            assert!(check_gradient(&c, &p, 1e-7) < 1e-5);
        }
    }

    #[test]
    fn inequalities_exclude_rim_and_vertex_side() {
        let c = cone_manifold();
        let outside = DVector::from_vec(vec![1.2, 0.0, 1.2]);
        assert!(!c.inequalities_hold(&outside));
        let below = DVector::from_vec(vec![0.0, 0.0, -0.1]);
        assert!(!c.inequalities_hold(&below));
    }
}
