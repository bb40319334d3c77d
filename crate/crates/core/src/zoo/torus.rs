//! Torus of revolution in R^3, implicitly defined by
//! `(R - sqrt(x^2 + y^2))^2 + z^2 - r^2 = 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::ConstraintManifold;

#[derive(Debug, Clone, Copy)]
pub struct TorusSpec {
    /// Major (toroidal) radius `R`.
    pub major_radius: f64,
    /// Minor (poloidal) radius `r`.
    pub minor_radius: f64,
}

impl TorusSpec {
    pub fn new(major_radius: f64, minor_radius: f64) -> Result<Self> {
        if !(major_radius > minor_radius && minor_radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "torus requires R > r > 0, got R = {major_radius}, r = {minor_radius}"
            )));
        }
        Ok(TorusSpec { major_radius, minor_radius })
    }

    /// Exact surface area `4 pi^2 r R`.
    pub fn exact_area(&self) -> f64 {
        4.0 * std::f64::consts::PI * std::f64::consts::PI * self.minor_radius * self.major_radius
    }

    /// Point from the explicit angles: toroidal `theta`, poloidal `phi`.
    pub fn point(&self, theta: f64, phi: f64) -> DVector<f64> {
        let rho = self.major_radius + self.minor_radius * phi.cos();
        DVector::from_vec(vec![
            rho * theta.cos(),
            rho * theta.sin(),
            self.minor_radius * phi.sin(),
        ])
    }

    /// `(theta, phi)` angles of a point on the torus.
    pub fn angles(&self, x: &DVector<f64>) -> (f64, f64) {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        (x[1].atan2(x[0]), x[2].atan2(rho - self.major_radius))
    }

    /// Outermost point `(R + r, 0, 0)`, a convenient chain start.
    pub fn default_start(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.major_radius + self.minor_radius, 0.0, 0.0])
    }
}

/// Marginal density of the poloidal angle under uniform surface measure:
/// `(1 + (r/R) cos phi) / (2 pi)`.
pub fn torus_phi_density(phi: f64, spec: &TorusSpec) -> f64 {
    (1.0 + (spec.minor_radius / spec.major_radius) * phi.cos())
        / (2.0 * std::f64::consts::PI)
}

pub struct Torus {
    spec: TorusSpec,
}

/// Builds the implicit torus manifold.
pub fn torus_manifold(spec: TorusSpec) -> Torus {
    Torus { spec }
}

impl Torus {
    pub fn spec(&self) -> &TorusSpec {
        &self.spec
    }
}

impl ConstraintManifold for Torus {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn equality_count(&self) -> usize {
        1
    }

    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let a = self.spec.major_radius - rho;
        out[0] = a * a + x[2] * x[2] - self.spec.minor_radius * self.spec.minor_radius;
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let a = self.spec.major_radius - rho;
        // d/dx (R - rho)^2 = -2 (R - rho) x / rho; singular only on the axis,
        // which is far from the surface for R > r.
        let c = -2.0 * a / rho;
        out[(0, 0)] = c * x[0];
        out[(1, 0)] = c * x[1];
        out[(2, 0)] = 2.0 * x[2];
    }
}
