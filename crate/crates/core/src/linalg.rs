//! Small dense linear-algebra kernels used by the frame and projection code.
//!
//! The Householder QR here exists because we need pieces nalgebra's `QR` does
//! not expose: applying the orthogonal factor (and its transpose) to vectors
//! without materializing it, and the trailing `d` columns of the full factor,
//! which form an orthonormal basis of the null space of `Q_x^t`.

use nalgebra::{DMatrix, DVector};

/// Householder QR factorization of an `n x m` matrix with `n >= m`.
///
/// Reflectors are stored below the diagonal (unit leading entry implicit),
/// the triangular factor on and above it.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    factors: DMatrix<f64>,
    taus: Vec<f64>,
    nrows: usize,
    ncols: usize,
}

impl HouseholderQr {
    pub fn new(mut a: DMatrix<f64>) -> Self {
        let (n, m) = a.shape();
        assert!(n >= m, "QR requires nrows >= ncols ({n} < {m})");
        let mut taus = vec![0.0; m];

        for j in 0..m {
            // Householder vector for column j below row j.
            let norm_x: f64 = (j..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
            if norm_x == 0.0 {
                taus[j] = 0.0;
                continue;
            }
            let x0 = a[(j, j)];
            let beta = -x0.signum() * norm_x;
            let tau = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for i in j + 1..n {
                a[(i, j)] *= scale;
            }
            a[(j, j)] = beta;
            taus[j] = tau;

            // Apply H_j = I - tau v v^t to the trailing columns.
            for c in j + 1..m {
                let mut w = a[(j, c)];
                for i in j + 1..n {
                    w += a[(i, j)] * a[(i, c)];
                }
                w *= tau;
                a[(j, c)] -= w;
                for i in j + 1..n {
                    let vij = a[(i, j)];
                    a[(i, c)] -= w * vij;
                }
            }
        }

        HouseholderQr { factors: a, taus, nrows: n, ncols: m }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    fn reflect(&self, j: usize, v: &mut DVector<f64>) {
        let tau = self.taus[j];
        if tau == 0.0 {
            return;
        }
        let mut w = v[j];
        for i in j + 1..self.nrows {
            w += self.factors[(i, j)] * v[i];
        }
        w *= tau;
        v[j] -= w;
        for i in j + 1..self.nrows {
            v[i] -= w * self.factors[(i, j)];
        }
    }

    /// v <- Q^t v.
    pub fn apply_qt(&self, v: &mut DVector<f64>) {
        debug_assert_eq!(v.len(), self.nrows);
        for j in 0..self.ncols {
            self.reflect(j, v);
        }
    }

    /// v <- Q v.
    pub fn apply_q(&self, v: &mut DVector<f64>) {
        debug_assert_eq!(v.len(), self.nrows);
        for j in (0..self.ncols).rev() {
            self.reflect(j, v);
        }
    }

    /// First `m` columns of the full orthogonal factor (orthonormal basis of
    /// the column span of the factored matrix).
    pub fn thin_q(&self) -> DMatrix<f64> {
        self.q_columns(0, self.ncols)
    }

    /// Last `n - m` columns of the full orthogonal factor (orthonormal basis
    /// of the orthogonal complement of the column span).
    pub fn null_q(&self) -> DMatrix<f64> {
        self.q_columns(self.ncols, self.nrows - self.ncols)
    }

    fn q_columns(&self, start: usize, count: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, count);
        let mut col = DVector::zeros(self.nrows);
        for c in 0..count {
            col.fill(0.0);
            col[start + c] = 1.0;
            self.apply_q(&mut col);
            out.set_column(c, &col);
        }
        out
    }

    /// Upper-triangular factor (m x m).
    pub fn r(&self) -> DMatrix<f64> {
        let m = self.ncols;
        let mut r = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                r[(i, j)] = self.factors[(i, j)];
            }
        }
        r
    }

    /// Estimates of the smallest and largest singular values of the factored
    /// matrix, via power and inverse iterations on the triangular factor.
    pub fn sigma_extremes(&self) -> (f64, f64) {
        let m = self.ncols;
        if m == 0 {
            return (1.0, 1.0);
        }
        for j in 0..m {
            if self.factors[(j, j)] == 0.0 {
                let smax = self.r_frobenius();
                return (0.0, smax.max(f64::MIN_POSITIVE));
            }
        }

        let mut v = seed_vector(m);
        let mut smax = 0.0_f64;
        for _ in 0..8 {
            let mut u = self.r_mul(&v);
            let nu = u.norm();
            if nu == 0.0 {
                break;
            }
            u /= nu;
            let w = self.rt_mul(&u);
            smax = w.norm();
            if smax == 0.0 {
                break;
            }
            v = w / smax;
        }

        let mut v = seed_vector(m);
        let mut smin = 0.0_f64;
        for _ in 0..8 {
            let mut z = v.clone();
            self.rt_solve(&mut z);
            self.r_solve(&mut z);
            let nz = z.norm();
            if !nz.is_finite() || nz == 0.0 {
                return (0.0, smax.max(f64::MIN_POSITIVE));
            }
            smin = 1.0 / nz.sqrt();
            // Rayleigh-style rescale keeps the iterate well normalized.
            v = z / nz;
        }
        // One more accurate pass: sigma_min^2 ~ 1/|R^-1 R^-t v| for unit v.
        let mut z = v.clone();
        self.rt_solve(&mut z);
        self.r_solve(&mut z);
        let nz = z.norm();
        if nz.is_finite() && nz > 0.0 {
            smin = (1.0 / nz).sqrt();
        }
        (smin, smax.max(f64::MIN_POSITIVE))
    }

    fn r_frobenius(&self) -> f64 {
        let m = self.ncols;
        let mut s = 0.0;
        for j in 0..m {
            for i in 0..=j {
                s += self.factors[(i, j)] * self.factors[(i, j)];
            }
        }
        s.sqrt()
    }

    fn r_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.ncols;
        let mut out = DVector::zeros(m);
        for i in 0..m {
            let mut s = 0.0;
            for j in i..m {
                s += self.factors[(i, j)] * v[j];
            }
            out[i] = s;
        }
        out
    }

    fn rt_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.ncols;
        let mut out = DVector::zeros(m);
        for j in 0..m {
            let mut s = 0.0;
            for i in 0..=j {
                s += self.factors[(i, j)] * v[i];
            }
            out[j] = s;
        }
        out
    }

    /// x <- R^{-1} x (back substitution).
    fn r_solve(&self, x: &mut DVector<f64>) {
        let m = self.ncols;
        for i in (0..m).rev() {
            let mut s = x[i];
            for j in i + 1..m {
                s -= self.factors[(i, j)] * x[j];
            }
            x[i] = s / self.factors[(i, i)];
        }
    }

    /// x <- R^{-t} x (forward substitution).
    fn rt_solve(&self, x: &mut DVector<f64>) {
        let m = self.ncols;
        for j in 0..m {
            let mut s = x[j];
            for i in 0..j {
                s -= self.factors[(i, j)] * x[i];
            }
            x[j] = s / self.factors[(j, j)];
        }
    }
}

/// In-place LU solve with partial pivoting: overwrites `a` with its factors
/// and `b` with the solution of `a x = b`. Returns false on a zero pivot.
///
/// Works on the raw column-major storage so the elimination inner loop is a
/// contiguous axpy; this sits inside the Newton iteration of the sampler.
pub fn lu_solve_in_place(a: &mut DMatrix<f64>, b: &mut DVector<f64>) -> bool {
    let m = a.nrows();
    debug_assert_eq!(a.ncols(), m);
    debug_assert_eq!(b.len(), m);
    let data = a.as_mut_slice();
    let rhs = b.as_mut_slice();

    for k in 0..m {
        // Pivot search in column k.
        let col_k = &data[k * m..(k + 1) * m];
        let mut p = k;
        let mut best = col_k[k].abs();
        for (i, v) in col_k.iter().enumerate().skip(k + 1) {
            let av = v.abs();
            if av > best {
                best = av;
                p = i;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return false;
        }
        if p != k {
            for j in 0..m {
                data.swap(j * m + k, j * m + p);
            }
            rhs.swap(k, p);
        }

        // Multipliers below the diagonal of column k.
        let (head, tail) = data.split_at_mut((k + 1) * m);
        let col_k = &mut head[k * m..];
        let inv = 1.0 / col_k[k];
        for v in col_k[k + 1..].iter_mut() {
            *v *= inv;
        }
        let mult = &col_k[k + 1..m];

        // Rank-1 update of the trailing columns, one contiguous axpy each.
        let len = m - k - 1;
        for j in 0..len {
            let base = j * m;
            let akj = tail[base + k];
            if akj != 0.0 {
                let col_j = &mut tail[base + k + 1..base + k + 1 + len];
                for i in 0..len {
                    col_j[i] -= mult[i] * akj;
                }
            }
        }
        let bk = rhs[k];
        if bk != 0.0 {
            let r = &mut rhs[k + 1..k + 1 + len];
            for i in 0..len {
                r[i] -= mult[i] * bk;
            }
        }
    }

    // Back substitution (column-oriented).
    for i in (0..m).rev() {
        let v = rhs[i] / data[i * m + i];
        if !v.is_finite() {
            return false;
        }
        rhs[i] = v;
        if v != 0.0 {
            let col_i = &data[i * m..i * m + i];
            for (dst, &u) in rhs[..i].iter_mut().zip(col_i) {
                *dst -= u * v;
            }
        }
    }
    true
}

/// Extreme eigenvalue estimates of a symmetric positive semidefinite matrix,
/// via power iteration and Cholesky-based inverse iteration.
///
/// Returns `(lambda_min, lambda_max)`; `lambda_min` is 0 when the Cholesky
/// factorization fails (numerically semidefinite).
pub fn spd_extreme_eigs(s: &DMatrix<f64>) -> (f64, f64) {
    let m = s.nrows();
    if m == 0 {
        return (1.0, 1.0);
    }
    let mut v = seed_vector(m);
    let mut lmax = 0.0_f64;
    for _ in 0..10 {
        let w = s * &v;
        lmax = w.norm();
        if lmax == 0.0 {
            return (0.0, f64::MIN_POSITIVE);
        }
        v = w / lmax;
    }

    let chol = match s.clone().cholesky() {
        Some(c) => c,
        None => return (0.0, lmax),
    };
    let mut v = seed_vector(m);
    let mut lmin = 0.0_f64;
    for _ in 0..10 {
        let z = chol.solve(&v);
        let nz = z.norm();
        if !nz.is_finite() || nz == 0.0 {
            return (0.0, lmax);
        }
        lmin = 1.0 / nz;
        v = z / nz;
    }
    (lmin, lmax)
}

fn seed_vector(m: usize) -> DVector<f64> {
    // Deterministic, incommensurate with coordinate axes.
    let mut v = DVector::from_fn(m, |i, _| 1.0 + ((i as f64) * 0.6180339887498949).fract());
    let n = v.norm();
    v /= n;
    v
}
