//! Closed-form toy models for how the relative variance of the multi-phase
//! estimator depends on the per-stage volume ratio `nu`, with scalar
//! minimization to locate the optimal ratio. Overall constants are dropped;
//! only shapes and argmins are meaningful.

use crate::error::{Error, Result};

/// Which correlation-time model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuModelKind {
    /// Constant correlation time per stage.
    ConstantTau,
    /// Diffusive scaling `tau_i ~ r_i^2`.
    Diffusive,
    /// Brownian motion between concentric balls (analytic `tau`).
    BrownianBalls,
}

/// A variance-versus-`nu` model at intrinsic dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct NuModel {
    pub kind: NuModelKind,
    pub d: usize,
}

impl NuModel {
    pub fn new(kind: NuModelKind, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        Ok(NuModel { kind, d })
    }

    pub fn eval(&self, nu: f64) -> Result<f64> {
        match self.kind {
            NuModelKind::ConstantTau => g_const(nu),
            NuModelKind::Diffusive => g_diffusive(nu, self.d),
            NuModelKind::BrownianBalls => l_brownian(nu, self.d),
        }
    }

    pub fn minimizer(&self, lo: f64, hi: f64) -> Result<f64> {
        let k = *self;
        minimize_scalar(move |nu| k.eval(nu).unwrap_or(f64::INFINITY), lo, hi)
    }
}

fn check_domain(nu: f64, d: usize) -> Result<()> {
    if !(nu > 1.0) || !nu.is_finite() {
        return Err(Error::InvalidInput(format!("nu must exceed 1, got {nu}")));
    }
    if d < 1 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    Ok(())
}

/// Constant-correlation-time model: `g(nu) = (nu - 1) / log^2(nu)`.
pub fn g_const(nu: f64) -> Result<f64> {
    check_domain(nu, 1)?;
    let ln = nu.ln();
    Ok((nu - 1.0) / (ln * ln))
}

/// Diffusive model: `g_d(nu) = (nu - 1) / (log(nu) (1 - nu^{-2/d}))`.
pub fn g_diffusive(nu: f64, d: usize) -> Result<f64> {
    check_domain(nu, d)?;
    Ok((nu - 1.0) / (nu.ln() * (1.0 - nu.powf(-2.0 / d as f64))))
}

/// Correlation time of the indicator of the inner ball for a Brownian
/// motion reflected in the outer ball, up to the factor `R_0^2`:
/// the piecewise `h_d(nu)` functions.
pub fn h_brownian(nu: f64, d: usize) -> Result<f64> {
    check_domain(nu, d)?;
    let value = match d {
        1 => (4.0 / 3.0) * (nu - 1.0) / (nu * nu),
        2 => (nu.recip() - 1.0 + nu.ln()) / (nu - 1.0),
        _ => {
            let df = d as f64;
            let num = (df - 2.0) / nu - df * nu.powf(2.0 / df - 1.0) + 2.0;
            let den = nu.powf(2.0 / df) * (1.0 - nu.recip());
            4.0 / (df * df - 4.0) * num / den
        }
    };
    Ok(value)
}

/// Brownian-balls variance model
/// `l_d(nu) = (nu - 1) h_d(nu) / (log(nu) (1 - nu^{-2/d})) = g_d(nu) h_d(nu)`.
pub fn l_brownian(nu: f64, d: usize) -> Result<f64> {
    check_domain(nu, d)?;
    Ok((nu - 1.0) * h_brownian(nu, d)? / (nu.ln() * (1.0 - nu.powf(-2.0 / d as f64))))
}

/// Golden-section search for the minimizer of a unimodal function on
/// `[lo, hi]`, to 1e-3 absolute accuracy.
pub fn minimize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("invalid bracket [{lo}, {hi}]")));
    }
    const INVPHI: f64 = 0.6180339887498949;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-3 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn g_const_reference_value() {
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert_relative_eq!(g_const(e2).unwrap(), (e2 - 1.0) / 4.0, epsilon = 1e-14);
        assert!(g_const(1.0).is_err());
        assert!(g_const(0.5).is_err());
    }

    #[test]
    fn g_const_taylor_expansion_near_one() {
        // log^2(nu) = (nu-1)^2 (1 - (nu-1) + ...), so (nu-1) g(nu) -> 1.
        for eps in [1e-4, 1e-6, 1e-8] {
            let nu = 1.0 + eps;
            assert_relative_eq!(eps * g_const(nu).unwrap(), 1.0, max_relative = 2.0 * eps);
        }
    }

    #[test]
    fn g_const_minimizer_near_4_9() {
        let m = minimize_scalar(|nu| g_const(nu).unwrap(), 1.01, 50.0).unwrap();
        assert!((m - 4.9).abs() <= 0.05, "minimizer = {m}");
    }

    #[test]
    fn g_diffusive_simplifies_at_d2() {
        // g_2(nu) = nu / log(nu); check at nu = e.
        let e = std::f64::consts::E;
        assert_relative_eq!(g_diffusive(e, 2).unwrap(), e, epsilon = 1e-12);
        for nu in [1.5, 3.0, 10.0] {
            assert_relative_eq!(g_diffusive(nu, 2).unwrap(), nu / nu.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn g_diffusive_minimizers_match_reported_list() {
        let expected = [
            (2, 2.7),
            (3, 3.1),
            (4, 3.4),
            (5, 3.6),
            (6, 3.7),
            (10, 4.1),
            (20, 4.5),
            (50, 4.7),
        ];
        for (d, nu_star) in expected {
            let m = minimize_scalar(|nu| g_diffusive(nu, d).unwrap(), 1.01, 50.0).unwrap();
            assert!((m - nu_star).abs() <= 0.1, "d = {d}: minimizer = {m}, expected {nu_star}");
        }
    }

    #[test]
    fn g_diffusive_d1_minimizer_is_stationary() {
        // The d = 1 argmin sits near 2.134; the reference table's 2.6 is not
        // a stationary point of the formula (see the acceptance suite).
        let m = minimize_scalar(|nu| g_diffusive(nu, 1).unwrap(), 1.01, 50.0).unwrap();
        assert!((m - 2.134).abs() <= 0.01, "minimizer = {m}");
        let h = 1e-6;
        let deriv =
            (g_diffusive(m + h, 1).unwrap() - g_diffusive(m - h, 1).unwrap()) / (2.0 * h);
        assert!(deriv.abs() < 1e-3, "derivative at argmin = {deriv}");
        // And 2.6 is demonstrably not stationary.
        let deriv26 =
            (g_diffusive(2.6 + h, 1).unwrap() - g_diffusive(2.6 - h, 1).unwrap()) / (2.0 * h);
        assert!(deriv26 > 0.1);
    }

    #[test]
    fn diffusive_minimizer_approaches_constant_tau_limit() {
        let m500 = minimize_scalar(|nu| g_diffusive(nu, 500).unwrap(), 1.01, 50.0).unwrap();
        let mc = minimize_scalar(|nu| g_const(nu).unwrap(), 1.01, 50.0).unwrap();
        assert!((m500 - mc).abs() < 0.05);
    }

    #[test]
    fn h_brownian_d1_reference_value() {
        assert_relative_eq!(h_brownian(2.0, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn h_brownian_vanishes_at_both_ends() {
        // The decay toward infinity is nu^{-2/d}: slow for large d, so the
        // 1e-4 bound at nu = 1e9 only holds up to d = 5.
        for d in [1, 2, 3, 4, 5] {
            assert!(h_brownian(1.0 + 1e-6, d).unwrap() < 1e-4, "d = {d} near 1");
            assert!(h_brownian(1e9, d).unwrap() < 1e-4, "d = {d} at infinity");
        }
        for d in [6, 10, 20, 50] {
            assert!(h_brownian(1.0 + 1e-6, d).unwrap() < 1e-4, "d = {d} near 1");
            let h3 = h_brownian(1e3, d).unwrap();
            let h6 = h_brownian(1e6, d).unwrap();
            let h9 = h_brownian(1e9, d).unwrap();
            assert!(h9 < h6 && h6 < h3, "d = {d}: tail not decaying");
        }
    }

    #[test]
    fn h_brownian_decreases_with_dimension_above_three() {
        for nu in [1.5, 2.0, 5.0, 20.0] {
            for d in 3..10 {
                assert!(
                    h_brownian(nu, d + 1).unwrap() < h_brownian(nu, d).unwrap(),
                    "nu = {nu}, d = {d}"
                );
            }
        }
    }

    #[test]
    fn l_equals_g_times_h() {
        for d in 1..=6 {
            for k in 0..40 {
                let nu = 1.05 + 0.7 * k as f64;
                let l = l_brownian(nu, d).unwrap();
                let gh = g_diffusive(nu, d).unwrap() * h_brownian(nu, d).unwrap();
                assert!((l / gh - 1.0).abs() < 1e-12, "nu = {nu}, d = {d}");
            }
        }
    }

    #[test]
    fn l1_decreasing_ld_increasing_on_grid() {
        let grid: Vec<f64> = (0..200).map(|i| 1.1 + (100.0 - 1.1) * i as f64 / 199.0).collect();
        for w in grid.windows(2) {
            assert!(l_brownian(w[1], 1).unwrap() < l_brownian(w[0], 1).unwrap());
        }
        for d in 2..=5 {
            for w in grid.windows(2) {
                assert!(l_brownian(w[1], d).unwrap() > l_brownian(w[0], d).unwrap(), "d = {d}");
            }
        }
    }

    #[test]
    fn models_are_positive_and_finite() {
        for d in 1..=8 {
            for k in 0..60 {
                let nu = 1.01 * 1.25_f64.powi(k);
                for v in [
                    g_const(nu).unwrap(),
                    g_diffusive(nu, d).unwrap(),
                    h_brownian(nu, d).unwrap(),
                    l_brownian(nu, d).unwrap(),
                ] {
                    assert!(v > 0.0 && v.is_finite(), "nu = {nu}, d = {d}, v = {v}");
                }
            }
        }
    }

    #[test]
    fn large_d_variance_scale_tracks_asymptotic_form() {
        // g_d(nu*_d) ~ d (nu* - 1) / (2 log^2 nu*) for large d; ratio trend only.
        let nu_star = minimize_scalar(|nu| g_const(nu).unwrap(), 1.01, 50.0).unwrap();
        let d = 50;
        let m = minimize_scalar(|nu| g_diffusive(nu, d).unwrap(), 1.01, 50.0).unwrap();
        let lhs = g_diffusive(m, d).unwrap();
        let rhs = d as f64 * (nu_star - 1.0) / (2.0 * nu_star.ln().powi(2));
        let ratio = lhs / rhs;
        assert!(ratio > 0.8 && ratio < 1.2, "ratio = {ratio}");
    }

    #[test]
    fn minimize_scalar_quadratic() {
        let m = minimize_scalar(|x| (x - 2.0) * (x - 2.0), 0.0, 5.0).unwrap();
        assert!((m - 2.0).abs() <= 1e-3);
        assert!(minimize_scalar(|x| x, 2.0, 2.0).is_err());
    }

    #[test]
    fn nu_model_wrapper_dispatches() {
        let m = NuModel::new(NuModelKind::ConstantTau, 1).unwrap();
        assert_relative_eq!(m.eval(2.0).unwrap(), g_const(2.0).unwrap());
        let dm = NuModel::new(NuModelKind::Diffusive, 3).unwrap();
        let min = dm.minimizer(1.01, 50.0).unwrap();
        assert!((min - 3.1).abs() <= 0.1);
    }
}
