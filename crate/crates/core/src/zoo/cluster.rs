//! Sticky hard-sphere clusters: `N` unit spheres in `R^3` with a prescribed
//! contact graph. Contacts are equality constraints `|x_i - x_j|^2 - 1 = 0`,
//! non-contacts are strict non-overlap inequalities, and three center-of-mass
//! constraints remove the translational degrees of freedom.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::manifold::ConstraintManifold;

/// Eigenvalues below `RIGIDITY_EIG_THRESHOLD * lambda_max` are treated as
/// zero modes of the rigidity matrix.
pub const RIGIDITY_EIG_THRESHOLD: f64 = 1e-10;

/// Sphere count and contact edge set defining a cluster manifold.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    n_spheres: usize,
    /// Contact pairs, 0-based, stored with `i < j`.
    contacts: Vec<(usize, usize)>,
    noncontacts: Vec<(usize, usize)>,
}

impl ClusterSpec {
    /// Builds a cluster from 0-based contact pairs.
    pub fn new(n_spheres: usize, contacts: &[(usize, usize)]) -> Result<Self> {
        if n_spheres < 2 {
            return Err(Error::InvalidInput("cluster needs at least 2 spheres".into()));
        }
        let mut normalized = Vec::with_capacity(contacts.len());
        for &(a, b) in contacts {
            if a == b {
                return Err(Error::InvalidInput(format!("self-contact ({a}, {b})")));
            }
            if a >= n_spheres || b >= n_spheres {
                return Err(Error::InvalidInput(format!(
                    "contact ({a}, {b}) out of range for {n_spheres} spheres"
                )));
            }
            let pair = (a.min(b), a.max(b));
            if normalized.contains(&pair) {
                return Err(Error::InvalidInput(format!("duplicate contact {pair:?}")));
            }
            normalized.push(pair);
        }
        normalized.sort_unstable();

        let spec = ClusterSpec {
            n_spheres,
            noncontacts: noncontact_pairs(n_spheres, &normalized),
            contacts: normalized,
        };
        if spec.intrinsic_dim() < 1 {
            return Err(Error::InvalidInput(format!(
                "over-constrained cluster: d = {} < 1",
                spec.intrinsic_dim()
            )));
        }
        Ok(spec)
    }

    /// Open chain: contacts `(i, i+1)`, dimension `2N - 2`.
    pub fn chain(n_spheres: usize) -> Result<Self> {
        let contacts: Vec<_> = (0..n_spheres.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        ClusterSpec::new(n_spheres, &contacts)
    }

    /// Closed loop: the chain plus the closing contact, dimension `2N - 3`.
    pub fn closed_loop(n_spheres: usize) -> Result<Self> {
        if n_spheres < 3 {
            return Err(Error::InvalidInput("a loop needs at least 3 spheres".into()));
        }
        let mut contacts: Vec<_> = (0..n_spheres - 1).map(|i| (i, i + 1)).collect();
        contacts.push((n_spheres - 1, 0));
        ClusterSpec::new(n_spheres, &contacts)
    }

    /// Parses a plain-text edge list: first line `N`, then one `i j` pair
    /// per line, 1-based.
    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty edge list".into()))?
            .parse()
            .map_err(|_| Error::InvalidInput("first line must be the sphere count".into()))?;
        let mut contacts = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let i: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad edge line: {line:?}")))?;
            let j: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::InvalidInput(format!("bad edge line: {line:?}")))?;
            if it.next().is_some() {
                return Err(Error::InvalidInput(format!("bad edge line: {line:?}")));
            }
            if i == 0 || j == 0 {
                return Err(Error::InvalidInput("edge indices are 1-based".into()));
            }
            contacts.push((i - 1, j - 1));
        }
        ClusterSpec::new(n, &contacts)
    }

    pub fn from_edge_list_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Self::from_edge_list_str(&text)
    }

    pub fn sphere_count(&self) -> usize {
        self.n_spheres
    }

    pub fn contacts(&self) -> &[(usize, usize)] {
        &self.contacts
    }

    pub fn contact_count(&self) -> usize {
        self.contacts.len()
    }

    pub fn ambient_dim(&self) -> usize {
        3 * self.n_spheres
    }

    /// Contacts plus the three center-of-mass constraints.
    pub fn equality_count(&self) -> usize {
        self.contacts.len() + 3
    }

    /// `d = 3N - m - 3`.
    pub fn intrinsic_dim(&self) -> isize {
        3 * self.n_spheres as isize - self.contacts.len() as isize - 3
    }

    /// Straight unit-spaced chain along the x axis, center of mass at the
    /// origin. Feasible start for the chain topology.
    pub fn chain_start(n_spheres: usize) -> DVector<f64> {
        let mut x = DVector::zeros(3 * n_spheres);
        let offset = (n_spheres as f64 - 1.0) / 2.0;
        for i in 0..n_spheres {
            x[3 * i] = i as f64 - offset;
        }
        x
    }

    /// Regular planar polygon with unit side length, center of mass at the
    /// origin. Feasible start for the loop topology.
    pub fn loop_start(n_spheres: usize) -> DVector<f64> {
        let n = n_spheres as f64;
        let circumradius = 0.5 / (std::f64::consts::PI / n).sin();
        let mut x = DVector::zeros(3 * n_spheres);
        for i in 0..n_spheres {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n;
            x[3 * i] = circumradius * angle.cos();
            x[3 * i + 1] = circumradius * angle.sin();
        }
        x
    }
}

fn noncontact_pairs(n: usize, contacts: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !contacts.contains(&(i, j)) {
                out.push((i, j));
            }
        }
    }
    out
}

pub struct Cluster {
    spec: ClusterSpec,
}

/// Builds the cluster manifold for a contact graph.
pub fn cluster_manifold(spec: ClusterSpec) -> Cluster {
    Cluster { spec }
}

impl Cluster {
    pub fn spec(&self) -> &ClusterSpec {
        &self.spec
    }
}

#[inline]
fn pair_dist2(x: &DVector<f64>, i: usize, j: usize) -> f64 {
    let mut d2 = 0.0;
    for a in 0..3 {
        let d = x[3 * i + a] - x[3 * j + a];
        d2 += d * d;
    }
    d2
}

impl ConstraintManifold for Cluster {
    fn ambient_dim(&self) -> usize {
        self.spec.ambient_dim()
    }

    fn equality_count(&self) -> usize {
        self.spec.equality_count()
    }

    fn inequality_count(&self) -> usize {
        self.spec.noncontacts.len()
    }

    fn residual_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let mc = self.spec.contacts.len();
        for (c, &(i, j)) in self.spec.contacts.iter().enumerate() {
            out[c] = pair_dist2(x, i, j) - 1.0;
        }
        for a in 0..3 {
            let mut s = 0.0;
            for i in 0..self.spec.n_spheres {
                s += x[3 * i + a];
            }
            out[mc + a] = s;
        }
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
        let mc = self.spec.contacts.len();
        for (c, &(i, j)) in self.spec.contacts.iter().enumerate() {
            for a in 0..3 {
                let d = 2.0 * (x[3 * i + a] - x[3 * j + a]);
                out[(3 * i + a, c)] = d;
                out[(3 * j + a, c)] = -d;
            }
        }
        for a in 0..3 {
            for i in 0..self.spec.n_spheres {
                out[(3 * i + a, mc + a)] = 1.0;
            }
        }
    }

    /// Squared non-overlap margin `|x_i - x_j|^2 - 1` of the `j`-th
    /// non-contact pair (squared form keeps the boundary smooth).
    fn inequality(&self, x: &DVector<f64>, j: usize) -> f64 {
        let (a, b) = self.spec.noncontacts[j];
        pair_dist2(x, a, b) - 1.0
    }
}

/// Rigidity matrix `R` of the contact graph at `x`: half the Jacobian of the
/// contact constraints; row per contact `(i, j)` with `x_i - x_j` in block
/// `i` and `x_j - x_i` in block `j`.
pub fn rigidity_matrix(x: &DVector<f64>, spec: &ClusterSpec) -> DMatrix<f64> {
    let mc = spec.contacts.len();
    let mut r = DMatrix::zeros(mc, spec.ambient_dim());
    for (c, &(i, j)) in spec.contacts.iter().enumerate() {
        for a in 0..3 {
            let d = x[3 * i + a] - x[3 * j + a];
            r[(c, 3 * i + a)] = d;
            r[(c, 3 * j + a)] = -d;
        }
    }
    r
}

/// Non-zero eigenvalues of `R^t R`, descending. Computed as the spectrum of
/// the small Gram matrix `R R^t`, which carries the same non-zero part.
pub fn rigidity_spectrum(x: &DVector<f64>, spec: &ClusterSpec) -> Vec<f64> {
    let r = rigidity_matrix(x, spec);
    let gram = &r * r.transpose();
    let mut eigs: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigs
}

/// Rigidity weight `f(x) = prod lambda_i^{-1/2}` over the non-zero
/// eigenvalues of `R^t R`.
pub fn rigidity_weight(x: &DVector<f64>, spec: &ClusterSpec) -> f64 {
    let eigs = rigidity_spectrum(x, spec);
    let lmax = eigs.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return f64::INFINITY;
    }
    let cutoff = RIGIDITY_EIG_THRESHOLD * lmax;
    let mut ln_f = 0.0;
    for &l in &eigs {
        if l > cutoff {
            ln_f -= 0.5 * l.ln();
        }
    }
    ln_f.exp()
}

/// True when the contact gradients degenerate: fewer non-zero rigidity
/// eigenvalues than contacts.
pub fn rigidity_is_degenerate(x: &DVector<f64>, spec: &ClusterSpec) -> bool {
    let eigs = rigidity_spectrum(x, spec);
    let lmax = eigs.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return true;
    }
    let cutoff = RIGIDITY_EIG_THRESHOLD * lmax;
    eigs.iter().filter(|&&l| l > cutoff).count() < spec.contact_count()
}

/// Chain-versus-loop probability ratios for `N` indistinguishable spheres.
#[derive(Debug, Clone, Copy)]
pub struct ChainLoopStats {
    /// `z_C / z_L` for one labeled copy of each manifold.
    pub ratio_single: f64,
    /// `(n_C z_C) / (n_L z_L) = N z_C / z_L`: the sticky parameter at which
    /// loops and chains become equally likely.
    pub ratio_indistinguishable: f64,
    /// Copies of the chain manifold under permutations: `N! / 2`.
    pub n_chain: f64,
    /// Copies of the loop manifold: `(N-1)! / 2`.
    pub n_loop: f64,
    /// Sticky-parameter estimate from observed counts, when supplied.
    pub kappa_hat: Option<f64>,
}

/// Combines geometrical partition functions of a chain and a loop of `N`
/// spheres; `counts` is an observed `(loop_count, chain_count)` pair.
pub fn chain_loop_stats(
    n: usize,
    z_chain: f64,
    z_loop: f64,
    counts: Option<(f64, f64)>,
) -> Result<ChainLoopStats> {
    if n < 3 {
        return Err(Error::InvalidInput("need at least 3 spheres".into()));
    }
    if !(z_chain > 0.0 && z_loop > 0.0) {
        return Err(Error::InvalidInput("partition functions must be positive".into()));
    }
    let factorial = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    // Symmetry numbers: 2 for the chain (C_2), 2N for the loop.
    let n_chain = factorial(n) / 2.0;
    let n_loop = factorial(n - 1) / 2.0;
    let ratio_single = z_chain / z_loop;
    let ratio_indistinguishable = n_chain * z_chain / (n_loop * z_loop);
    let kappa_hat = match counts {
        None => None,
        Some((loops, chains)) => {
            if chains <= 0.0 {
                return Err(Error::InvalidInput("chain count must be positive".into()));
            }
            Some(loops / chains * ratio_indistinguishable)
        }
    };
    Ok(ChainLoopStats { ratio_single, ratio_indistinguishable, n_chain, n_loop, kappa_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::check_gradient;
    use approx::assert_relative_eq;

    #[test]
    fn dimension_arithmetic() {
        let dimer = ClusterSpec::new(2, &[(0, 1)]).unwrap();
        assert_eq!(dimer.intrinsic_dim(), 2);

        for n in 4..=10 {
            let chain = ClusterSpec::chain(n).unwrap();
            assert_eq!(chain.intrinsic_dim(), 2 * n as isize - 2);
            let lp = ClusterSpec::closed_loop(n).unwrap();
            assert_eq!(lp.intrinsic_dim(), 2 * n as isize - 3);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ClusterSpec::new(3, &[(0, 0)]).is_err());
        assert!(ClusterSpec::new(3, &[(0, 5)]).is_err());
        assert!(ClusterSpec::new(3, &[(0, 1), (1, 0)]).is_err());
        // 2 spheres with 4 contacts impossible; over-constrained d < 1.
        assert!(ClusterSpec::new(2, &[]).is_ok());
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "4\n1 2\n2 3\n3 4\n4 1\n";
        let spec = ClusterSpec::from_edge_list_str(text).unwrap();
        assert_eq!(spec.sphere_count(), 4);
        assert_eq!(spec.contacts(), ClusterSpec::closed_loop(4).unwrap().contacts());
        assert!(ClusterSpec::from_edge_list_str("").is_err());
        assert!(ClusterSpec::from_edge_list_str("3\n0 1\n").is_err());
        assert!(ClusterSpec::from_edge_list_str("3\n1 2 3\n").is_err());
    }

    #[test]
    fn starting_configurations_are_feasible() {
        for n in 4..=10 {
            let chain = cluster_manifold(ClusterSpec::chain(n).unwrap());
            let x = ClusterSpec::chain_start(n);
            assert!(chain.residual(&x).norm() < 1e-12, "chain n = {n}");
            assert!(chain.inequalities_hold(&x));

            let lp = cluster_manifold(ClusterSpec::closed_loop(n).unwrap());
            let x = ClusterSpec::loop_start(n);
            assert!(lp.residual(&x).norm() < 1e-12, "loop n = {n}");
            assert!(lp.inequalities_hold(&x));
        }
    }

    #[test]
    fn overlapping_spheres_violate_inequalities() {
        let chain = cluster_manifold(ClusterSpec::chain(3).unwrap());
        // Fold sphere 2 back onto sphere 0 at distance 0.9.
        let mut x = DVector::zeros(9);
        x[0] = 0.0;
        x[3] = 1.0;
        x[6] = 0.9; // |x_0 - x_2| = 0.9 < 1
        assert!(!chain.inequalities_hold(&x));
    }

    #[test]
    fn gradient_passes_finite_difference_check() {
        let lp = cluster_manifold(ClusterSpec::closed_loop(5).unwrap());
        let x = ClusterSpec::loop_start(5);
        assert!(check_gradient(&lp, &x, 1e-6) < 1e-6);
        let chain = cluster_manifold(ClusterSpec::chain(6).unwrap());
        assert!(check_gradient(&chain, &ClusterSpec::chain_start(6), 1e-6) < 1e-6);
    }

    #[test]
    fn dimer_rigidity_weight_closed_form() {
        // Single contact at unit distance: R R^t = 2 |x_0 - x_1|^2 = 2,
        // so f = 2^{-1/2}.
        let spec = ClusterSpec::new(2, &[(0, 1)]).unwrap();
        let x = ClusterSpec::chain_start(2);
        let eigs = rigidity_spectrum(&x, &spec);
        assert_eq!(eigs.len(), 1);
        assert_relative_eq!(eigs[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(rigidity_weight(&x, &spec), 0.5_f64.sqrt(), epsilon = 1e-12);
        assert!(!rigidity_is_degenerate(&x, &spec));
    }

    #[test]
    fn rigidity_weight_is_rotation_invariant() {
        let spec = ClusterSpec::closed_loop(4).unwrap();
        let x = ClusterSpec::loop_start(4);
        let base = rigidity_weight(&x, &spec);

        // Rotate every sphere by the same rotation about an oblique axis.
        let angle: f64 = 0.7431;
        let (s, c) = angle.sin_cos();
        let axis = [1.0 / 3.0_f64.sqrt(); 3];
        let rot = |p: [f64; 3]| -> [f64; 3] {
            let dot = axis[0] * p[0] + axis[1] * p[1] + axis[2] * p[2];
            let cross = [
                axis[1] * p[2] - axis[2] * p[1],
                axis[2] * p[0] - axis[0] * p[2],
                axis[0] * p[1] - axis[1] * p[0],
            ];
            [
                c * p[0] + s * cross[0] + (1.0 - c) * dot * axis[0],
                c * p[1] + s * cross[1] + (1.0 - c) * dot * axis[1],
                c * p[2] + s * cross[2] + (1.0 - c) * dot * axis[2],
            ]
        };
        let mut y = DVector::zeros(12);
        for i in 0..4 {
            let p = rot([x[3 * i], x[3 * i + 1], x[3 * i + 2]]);
            for a in 0..3 {
                y[3 * i + a] = p[a];
            }
        }
        let rotated = rigidity_weight(&y, &spec);
        assert!((rotated - base).abs() < 1e-10 * base);
    }

    #[test]
    fn chain_loop_ratios_match_reported_table() {
        // N = 4 with z_C/z_L = 6.02 gives N * 6.02 = 24.08 ~ 24.1.
        let s = chain_loop_stats(4, 6.02, 1.0, None).unwrap();
        assert_relative_eq!(s.ratio_indistinguishable, 24.08, epsilon = 1e-12);
        assert_relative_eq!(s.ratio_indistinguishable, 24.1, max_relative = 2e-3);
        assert_eq!(s.n_chain, 12.0);
        assert_eq!(s.n_loop, 3.0);

        // Equal partition functions: the ratio reduces to N.
        for n in 3..=10 {
            let s = chain_loop_stats(n, 7.7, 7.7, None).unwrap();
            assert_relative_eq!(s.ratio_indistinguishable, n as f64, epsilon = 1e-12);
        }

        // N = 10 with z_C/z_L = 83.6 -> 836.
        let s = chain_loop_stats(10, 83.6, 1.0, None).unwrap();
        assert_relative_eq!(s.ratio_indistinguishable, 836.0, epsilon = 1e-9);
    }

    #[test]
    fn kappa_estimate_needs_chain_observations() {
        let s = chain_loop_stats(4, 6.02, 1.0, Some((30.0, 10.0))).unwrap();
        assert_relative_eq!(s.kappa_hat.unwrap(), 3.0 * 24.08, epsilon = 1e-9);
        assert!(chain_loop_stats(4, 6.02, 1.0, Some((30.0, 0.0))).is_err());
    }
}
