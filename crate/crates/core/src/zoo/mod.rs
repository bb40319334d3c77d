//! Built-in manifolds with analytic reference values: torus, cone, the
//! special orthogonal group, and sticky hard-sphere clusters.

mod cluster;
mod cone;
mod son;
mod torus;

pub use cluster::{
    chain_loop_stats, cluster_manifold, rigidity_is_degenerate, rigidity_matrix,
    rigidity_spectrum, rigidity_weight, ChainLoopStats, Cluster, ClusterSpec,
    RIGIDITY_EIG_THRESHOLD,
};
pub use cone::{cone_manifold, cone_marginal, Cone, ConeCoord};
pub use son::{son_manifold, son_volume_exact, SonSpec, SpecialOrthogonal};
pub use torus::{torus_manifold, torus_phi_density, Torus, TorusSpec};
