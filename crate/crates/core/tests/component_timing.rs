use manifold_mc::linalg::lu_solve_in_place;
use manifold_mc::manifold::ConstraintManifold;
use manifold_mc::zoo::{son_manifold, SonSpec};
use manifold_mc::TangentFrame;
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

fn bench<F: FnMut()>(name: &str, reps: usize, mut f: F) {
    let t = Instant::now();
    for _ in 0..reps {
        f();
    }
    println!("{name}: {:.2} us", t.elapsed().as_secs_f64() / reps as f64 * 1e6);
}

#[test]
#[ignore]
fn so11_components() {
    let spec = SonSpec::new(11).unwrap();
    let m = son_manifold(spec);
    let x = spec.default_start();
    let z = DVector::from_fn(121, |i, _| x[i] + 0.05 * ((i * 7 + 3) as f64).sin());
    let q_dirs = m.gradient(&x);
    let mut jac = DMatrix::zeros(66, 66);
    let mut resid = DVector::zeros(66);
    let mut grad = DMatrix::zeros(121, 66);
    let mut grad_t = DMatrix::zeros(66, 121);

    bench("residual_into", 20000, || m.residual_into(&z, &mut resid));
    bench("gradient_into", 20000, || m.gradient_into(&z, &mut grad));
    bench("newton_matrix structured", 20000, || {
        m.newton_matrix_from_points(&z, &x, &mut jac);
    });
    bench("transpose_to + gemm dense", 5000, || {
        grad.transpose_to(&mut grad_t);
        jac.gemm(1.0, &grad_t, &q_dirs, 0.0);
    });
    m.newton_matrix_from_points(&z, &x, &mut jac);
    let jac0 = jac.clone();
    let mut rhs = DVector::from_fn(66, |i, _| (i as f64 * 0.37).sin());
    bench("lu_solve_in_place 66", 20000, || {
        jac.copy_from(&jac0);
        let mut b = rhs.clone();
        lu_solve_in_place(&mut jac, &mut b);
    });
    let a = DVector::from_fn(66, |i, _| 0.01 * i as f64);
    let mut point = z.clone();
    bench("point gemv", 20000, || {
        point.copy_from(&z);
        point.gemv(1.0, &q_dirs, &a, 1.0);
    });
    bench("frame build", 2000, || {
        let f = TangentFrame::new(&m, &x).unwrap();
        { std::hint::black_box(f.sigma_ratio()); }
    });
    let frame = TangentFrame::new(&m, &x).unwrap();
    let delta = DVector::from_fn(121, |i, _| (i as f64 * 0.11).cos());
    bench("project_tangent", 20000, || {
        std::hint::black_box(frame.project_tangent(&delta));
    });
    bench("determinant 11x11", 20000, || {
        std::hint::black_box(m.determinant(&z));
    });
    bench("alloc jac+vectors", 20000, || {
        { std::hint::black_box(DMatrix::<f64>::zeros(66, 66)); }
        { std::hint::black_box(DVector::<f64>::zeros(121)); }
    });
    let _ = rhs.len();
    bench("residual norm", 20000, || { std::hint::black_box(resid.norm()); });
}
