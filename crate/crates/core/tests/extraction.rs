use ndf::extract::{extract_dense, ExtractConfig};
use ndf::geom::{exact_udf, Point, Surface, Torus, TriMesh};
use ndf::{exact_field, DistanceField};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn output_passes_the_final_filter(seed in any::<u64>(), delta in 0.02..0.2f64) {
        let torus = Torus::new(Point::zeros(), 0.25, 0.08);
        let f = exact_field(torus.clone()).unwrap();
        let cfg = ExtractConfig { m: 2000, n: 3000, delta, seed, ..Default::default() };
        let out = extract_dense(&f, &cfg).unwrap();
        prop_assert!(!out.cloud.is_empty());
        for p in &out.cloud.points {
            prop_assert!(f.eval(p) < delta);
            prop_assert!(torus.closest(p).unwrap().distance < 1e-6);
        }
        let again = extract_dense(&f, &cfg).unwrap();
        prop_assert_eq!(out.cloud.points, again.cloud.points);
    }
}

#[test]
fn open_mesh_cloud_stays_on_the_shell() {
    let mesh = TriMesh::half_sphere(Point::zeros(), 0.4, 16, 32);
    let f = exact_field(mesh.clone()).unwrap();
    let cfg = ExtractConfig {
        m: 20_000,
        n: 20_000,
        ..Default::default()
    };
    let out = extract_dense(&f, &cfg).unwrap();
    assert!(out.cloud.len() as f64 >= 0.99 * cfg.n as f64);
    let worst = out.cloud.points.iter().map(|p| exact_udf(&mesh, p).unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max udf {worst}");
}
