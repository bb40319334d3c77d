//! Autocovariance, integrated autocorrelation time with a self-consistent
//! window, and the combined relative-error formula for the multi-phase
//! integral estimator.

use crate::error::{Error, Result};

/// Window constant of the self-consistent truncation: the window is the
/// smallest `W >= WINDOW_CONSTANT * tau(W)`.
pub const WINDOW_CONSTANT: f64 = 5.0;

/// Integrated autocorrelation time estimate.
#[derive(Debug, Clone, Copy)]
pub struct ACTEstimate {
    /// tau >= 1; the factor by which correlated-sample variance exceeds iid.
    pub tau: f64,
    /// Self-consistent summation window actually used.
    pub window: usize,
    /// Static variance used in the denominator (supplied or `C_0`).
    pub c0: f64,
}

/// Lag-`t` autocovariance `C_t = (1/(n-t)) sum_j (F_j - mean)(F_{j+t} - mean)`.
///
/// `C_{-t} = C_t` by symmetric extension, so only `t >= 0` is exposed.
pub fn autocovariance(series: &[f64], t: usize) -> Result<f64> {
    let n = series.len();
    if t >= n {
        return Err(Error::InvalidInput(format!("lag {t} >= series length {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    for j in 0..n - t {
        acc += (series[j] - mean) * (series[j + t] - mean);
    }
    Ok(acc / (n - t) as f64)
}

/// Integrated autocorrelation time `tau = 1 + (2/c0) sum_{t=1}^{W} C_t`
/// with the self-consistent window choice.
///
/// `static_c0` replaces the empirical `C_0` in the denominator when the
/// stationary variance is known (for indicator series, the Bernoulli value
/// `p(1-p)`); the lag sums always use the empirical autocovariances.
///
/// The window is capped at `n/10` and the estimate clipped below at 1;
/// finite-sample noise can drive the windowed sum negative.
pub fn integrated_act(series: &[f64], static_c0: Option<f64>) -> Result<ACTEstimate> {
    let n = series.len();
    if n < 100 {
        return Err(Error::SeriesTooShort { len: n, min: 100 });
    }

    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let empirical_c0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let c0 = static_c0.unwrap_or(empirical_c0);
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateSeries);
    }

    let w_max = (n / 10).max(1);
    let mut sum = 0.0;
    let mut window = w_max;
    let mut tau = 1.0;
    for w in 1..=w_max {
        let mut ct = 0.0;
        for j in 0..n - w {
            ct += centered[j] * centered[j + w];
        }
        ct /= (n - w) as f64;
        sum += ct;
        tau = 1.0 + 2.0 * sum / c0;
        if w as f64 >= WINDOW_CONSTANT * tau {
            window = w;
            break;
        }
    }

    Ok(ACTEstimate { tau: tau.max(1.0), window, c0 })
}

/// Combined relative standard deviation of the multi-phase estimator:
/// `sigma_r = sqrt(rho_k^2 + sum_i (1 - p_i) tau_i / (n_i p_i))`.
///
/// Stages are `(p_i, tau_i, n_i)` tuples; a stage with `p_i = 1` contributes
/// exactly zero.
pub fn combine_error(rho_k: f64, stages: &[(f64, f64, u64)]) -> Result<f64> {
    let mut var = rho_k * rho_k;
    for (i, &(p, tau, n)) in stages.iter().enumerate() {
        if !(p > 0.0) || p > 1.0 {
            return Err(Error::InvalidInput(format!("stage {i}: p = {p} outside (0, 1]")));
        }
        if n == 0 {
            return Err(Error::InvalidInput(format!("stage {i}: empty chain")));
        }
        if tau < 1.0 {
            return Err(Error::InvalidInput(format!("stage {i}: tau = {tau} < 1")));
        }
        var += (1.0 - p) * tau / (n as f64 * p);
    }
    Ok(var.sqrt())
}

/// Mean of a series with its tau-corrected standard error:
/// `se = sqrt(C_0 tau / n)`.
pub fn mean_with_se(series: &[f64]) -> Result<(f64, f64, ACTEstimate)> {
    let n = series.len();
    let act = integrated_act(series, None)?;
    let mean = series.iter().sum::<f64>() / n as f64;
    let se = (act.c0 * act.tau / n as f64).sqrt();
    Ok((mean, se, act))
}

// --- chi-square goodness of fit ---------------------------------------------

/// Pearson statistic `sum (O_i - E_i)^2 / E_i`.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o - e;
            d * d / e
        })
        .sum()
}

/// Upper tail probability of the chi-square distribution with `dof` degrees
/// of freedom: `P(X >= stat)`.
pub fn chi_square_pvalue(stat: f64, dof: usize) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    reg_gamma_upper(dof as f64 / 2.0, stat / 2.0)
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
///
/// Series expansion for `x < a + 1`, Lentz continued fraction otherwise.
fn reg_gamma_upper(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - reg_gamma_lower_series(a, x)
    } else {
        reg_gamma_upper_cf(a, x)
    }
}

fn reg_gamma_lower_series(a: f64, x: f64) -> f64 {
    let ln_ga = libm::lgamma(a);
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_ga).exp()
}

fn reg_gamma_upper_cf(a: f64, x: f64) -> f64 {
    let ln_ga = libm::lgamma(a);
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_ga).exp() * h
}
