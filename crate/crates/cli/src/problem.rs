//! Manifold selection: builds the constraint manifold, target density,
//! default chain start, default step scale and named observables from the
//! configuration.

use manifold_mc::zoo::{
    cluster_manifold, cone_manifold, rigidity_weight, son_manifold, torus_manifold, ClusterSpec,
    SonSpec, TorusSpec,
};
use manifold_mc::ConstraintManifold;
use nalgebra::DVector;

use crate::config::ConfigReader;
use crate::CliError;

pub type DensityFn = Box<dyn Fn(&DVector<f64>) -> f64 + Sync>;
pub type ObservableFn = Box<dyn Fn(&DVector<f64>) -> f64 + Sync>;

pub struct Observable {
    pub name: String,
    pub eval: ObservableFn,
}

/// A fully wired sampling/integration problem.
pub struct Problem {
    pub manifold: Box<dyn ConstraintManifold>,
    pub density: DensityFn,
    pub density_name: String,
    pub start: DVector<f64>,
    pub step_scale: f64,
    pub kind_name: String,
    observables: Vec<Observable>,
}

impl Problem {
    pub fn from_config(reader: &mut ConfigReader) -> Result<Self, CliError> {
        let kind = reader.require_str("manifold.kind")?;
        let density_name = reader.str_or("density", "uniform");

        let mut problem = match kind.as_str() {
            "torus" => {
                let big_r = reader.f64_or("manifold.major_radius", 1.0)?;
                let small_r = reader.f64_or("manifold.minor_radius", 0.5)?;
                let spec = TorusSpec::new(big_r, small_r).map_err(CliError::config)?;
                let manifold = torus_manifold(spec);
                let observables = vec![
                    obs("theta", move |x: &DVector<f64>| spec.angles(x).0),
                    obs("phi", move |x: &DVector<f64>| spec.angles(x).1),
                    obs("cos_theta", move |x: &DVector<f64>| spec.angles(x).0.cos()),
                    obs("cos_phi", move |x: &DVector<f64>| spec.angles(x).1.cos()),
                ];
                Problem {
                    manifold: Box::new(manifold),
                    density: Box::new(|_| 1.0),
                    density_name: density_name.clone(),
                    start: spec.default_start(),
                    step_scale: 0.5,
                    kind_name: format!("torus(R={big_r},r={small_r})"),
                    observables,
                }
            }
            "cone" => {
                let manifold = cone_manifold();
                let start = manifold.default_start();
                let observables = vec![
                    obs("x", |p: &DVector<f64>| p[0]),
                    obs("y", |p: &DVector<f64>| p[1]),
                    obs("z", |p: &DVector<f64>| p[2]),
                ];
                Problem {
                    manifold: Box::new(manifold),
                    density: Box::new(|_| 1.0),
                    density_name: density_name.clone(),
                    start,
                    step_scale: 0.9,
                    kind_name: "cone".into(),
                    observables,
                }
            }
            "so" => {
                let n = reader.u64_or("manifold.n", 11)? as usize;
                let spec = SonSpec::new(n).map_err(CliError::config)?;
                let manifold = son_manifold(spec);
                let nn = n;
                let observables = vec![obs("trace", move |x: &DVector<f64>| {
                    (0..nn).map(|k| x[k * nn + k]).sum()
                })];
                Problem {
                    manifold: Box::new(manifold),
                    density: Box::new(|_| 1.0),
                    density_name: density_name.clone(),
                    start: spec.default_start(),
                    // Paper-scale default, tuned for n = 11.
                    step_scale: 3.1 / n as f64,
                    kind_name: format!("so({n})"),
                    observables,
                }
            }
            "cluster-chain" | "cluster-loop" | "cluster-file" => {
                let (spec, start) = match kind.as_str() {
                    "cluster-chain" => {
                        let n = reader.u64_or("manifold.n", 4)? as usize;
                        (
                            ClusterSpec::chain(n).map_err(CliError::config)?,
                            ClusterSpec::chain_start(n),
                        )
                    }
                    "cluster-loop" => {
                        let n = reader.u64_or("manifold.n", 4)? as usize;
                        (
                            ClusterSpec::closed_loop(n).map_err(CliError::config)?,
                            ClusterSpec::loop_start(n),
                        )
                    }
                    _ => {
                        let path = reader
                            .path_opt("manifold.edge_list")
                            .ok_or_else(|| CliError::Config("cluster-file needs manifold.edge_list".into()))?;
                        let spec = ClusterSpec::from_edge_list_path(&path).map_err(CliError::config)?;
                        let start = reader
                            .f64_list_opt("manifold.start")?
                            .ok_or_else(|| {
                                CliError::Config(
                                    "cluster-file needs manifold.start (comma-separated coordinates)".into(),
                                )
                            })?;
                        if start.len() != spec.ambient_dim() {
                            return Err(CliError::Config(format!(
                                "manifold.start has {} coordinates, expected {}",
                                start.len(),
                                spec.ambient_dim()
                            )));
                        }
                        (spec, DVector::from_vec(start))
                    }
                };
                let manifold = cluster_manifold(spec.clone());
                let w_spec = spec.clone();
                let observables = vec![obs("rigidity_weight", move |x: &DVector<f64>| {
                    rigidity_weight(x, &w_spec)
                })];
                let density: DensityFn = match density_name.as_str() {
                    "uniform" => Box::new(|_| 1.0),
                    "rigidity" => {
                        let d_spec = spec.clone();
                        Box::new(move |x: &DVector<f64>| rigidity_weight(x, &d_spec))
                    }
                    other => {
                        return Err(CliError::Config(format!("unknown density: {other}")));
                    }
                };
                Problem {
                    manifold: Box::new(manifold),
                    density,
                    density_name: density_name.clone(),
                    start,
                    step_scale: 0.35,
                    kind_name: format!("{kind}(N={})", spec.sphere_count()),
                    observables,
                }
            }
            other => return Err(CliError::Config(format!("unknown manifold.kind: {other}"))),
        };

        if density_name == "rigidity" && !kind.starts_with("cluster") {
            return Err(CliError::Config(
                "density = rigidity is only defined for cluster manifolds".into(),
            ));
        }
        if density_name != "uniform" && density_name != "rigidity" {
            return Err(CliError::Config(format!("unknown density: {density_name}")));
        }

        if let Some(s) = reader.f64_opt("sampler.step_scale")? {
            problem.step_scale = s;
        }
        if !(problem.step_scale > 0.0) {
            return Err(CliError::Config("sampler.step_scale must be positive".into()));
        }
        // Generic coordinate observables are always available.
        let da = problem.manifold.ambient_dim();
        for i in 0..da.min(3) {
            problem
                .observables
                .push(obs(&format!("coord{i}"), move |x: &DVector<f64>| x[i]));
        }
        Ok(problem)
    }

    /// Looks up observables by name; defaults to the manifold's own set.
    pub fn select_observables(&self, names: Option<&[String]>) -> Result<Vec<&Observable>, CliError> {
        match names {
            None => Ok(self
                .observables
                .iter()
                .filter(|o| !o.name.starts_with("coord"))
                .collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.observables
                        .iter()
                        .find(|o| &o.name == n)
                        .ok_or_else(|| {
                            let known: Vec<_> =
                                self.observables.iter().map(|o| o.name.clone()).collect();
                            CliError::Config(format!(
                                "unknown observable {n:?}; available: {}",
                                known.join(", ")
                            ))
                        })
                })
                .collect(),
        }
    }
}

fn obs(name: &str, f: impl Fn(&DVector<f64>) -> f64 + Sync + 'static) -> Observable {
    Observable { name: name.to_string(), eval: Box::new(f) }
}
