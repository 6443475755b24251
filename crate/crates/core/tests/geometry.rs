use ndf::geom::{
    chamfer_l2, exact_closest_point, exact_udf, Point, Polyline, Surface, TriMesh, Vector,
};
use proptest::prelude::*;

// Independent point-triangle distance: project onto the plane and solve for
// barycentrics; outside the triangle fall back to the three edges.
fn seg_dist2(p: &Point<3>, a: &Point<3>, b: &Point<3>) -> f64 {
    let ab = b - a;
    let t = if ab.norm_squared() > 0.0 { ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm_squared()
}

fn tri_dist2(p: &Point<3>, [a, b, c]: [Point<3>; 3]) -> f64 {
    let (e0, e1, w) = (b - a, c - a, p - a);
    let (d00, d01, d11) = (e0.dot(&e0), e0.dot(&e1), e1.dot(&e1));
    let (d20, d21) = (w.dot(&e0), w.dot(&e1));
    let den = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / den;
    let u = (d00 * d21 - d01 * d20) / den;
    if v >= 0.0 && u >= 0.0 && u + v <= 1.0 {
        let q = a + e0 * v + e1 * u;
        return (p - q).norm_squared();
    }
    seg_dist2(p, &a, &b).min(seg_dist2(p, &b, &c)).min(seg_dist2(p, &c, &a))
}

fn coord() -> impl Strategy<Value = f64> {
    -0.5..0.5f64
}

fn point3() -> impl Strategy<Value = Point<3>> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| Point::<3>::new(x, y, z))
}

fn point2() -> impl Strategy<Value = Point<2>> {
    (coord(), coord()).prop_map(|(x, y)| Point::<2>::new(x, y))
}

/// Triangle soup with well-shaped faces.
fn soup() -> impl Strategy<Value = TriMesh> {
    prop::collection::vec((point3(), point3(), point3()), 1..60)
        .prop_filter("no slivers", |tris| {
            tris.iter().all(|(a, b, c)| (b - a).cross(&(c - a)).norm() > 1e-3)
        })
        .prop_map(|tris| {
            let vertices: Vec<Point<3>> = tris.iter().flat_map(|(a, b, c)| [*a, *b, *c]).collect();
            let faces = (0..tris.len() as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
            TriMesh::new(vertices, faces).unwrap()
        })
}

fn brute_chamfer<const D: usize>(a: &[Point<D>], b: &[Point<D>]) -> f64 {
    let one = |x: &[Point<D>], y: &[Point<D>]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    0.5 * (one(a, b) + one(b, a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mesh_distance_matches_brute_force(mesh in soup(), qs in prop::collection::vec(point3(), 1..20)) {
        for q in &qs {
            let brute = (0..mesh.faces().len())
                .map(|f| tri_dist2(q, mesh.triangle(f)))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            let d = exact_udf(&mesh, q).unwrap();
            prop_assert!((d - brute).abs() <= 1e-12, "bvh {d} brute {brute}");
        }
    }

    #[test]
    fn polyline_distance_matches_brute_force(
        vs in prop::collection::vec(point2(), 2..80),
        qs in prop::collection::vec(point2(), 1..20),
    ) {
        let line = Polyline::chain(vs.clone()).unwrap();
        for q in &qs {
            let brute = vs
                .windows(2)
                .map(|w| {
                    let lift = |p: &Point<2>| Point::<3>::new(p.x, p.y, 0.0);
                    seg_dist2(&lift(q), &lift(&w[0]), &lift(&w[1]))
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            prop_assert!((exact_udf(&line, q).unwrap() - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn closest_point_is_on_surface(mesh in soup(), q in point3()) {
        let c = exact_closest_point(&mesh, &q).unwrap();
        prop_assert!(exact_udf(&mesh, &c).unwrap() <= 1e-9);
        prop_assert!(exact_udf(&mesh, &q).unwrap() >= 0.0);
    }

    #[test]
    fn exact_udf_is_one_lipschitz(mesh in soup(), p in point3(), q in point3()) {
        let (a, b) = (exact_udf(&mesh, &p).unwrap(), exact_udf(&mesh, &q).unwrap());
        prop_assert!((a - b).abs() <= (p - q).norm() + 1e-12);
    }

    #[test]
    fn chamfer_is_symmetric_and_matches_brute_force(
        a in prop::collection::vec(point3(), 1..200),
        b in prop::collection::vec(point3(), 1..200),
    ) {
        let ab = chamfer_l2(&a, &b).unwrap();
        prop_assert_eq!(ab, chamfer_l2(&b, &a).unwrap());
        prop_assert!((ab - brute_chamfer(&a, &b)).abs() <= 1e-10);
        prop_assert_eq!(chamfer_l2(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn finite_difference_gradient_has_unit_norm_off_surface() {
    let mesh = TriMesh::icosphere(Point::<3>::zeros(), 0.3, 2);
    let mut rng = ndf::geom::seeded_rng(5);
    let h = 1e-6;
    let mut checked = 0;
    while checked < 2000 {
        let p = ndf::geom::uniform_in_box(&ndf::geom::unit_box(), &mut rng);
        let d = exact_udf(&mesh, &p).unwrap();
        // stay clear of the surface and of the cut locus at the center
        if d < 1e-2 || p.norm() < 0.05 {
            continue;
        }
        let g = Vector::<3>::from_fn(|i, _| {
            let mut e = Vector::<3>::zeros();
            e[i] = h;
            (exact_udf(&mesh, &(p + e)).unwrap() - exact_udf(&mesh, &(p - e)).unwrap()) / (2.0 * h)
        });
        // edges and vertices of the faceted sphere have their own Voronoi
        // regions; skip points whose stencil straddles two of them
        let c = mesh.closest(&p).unwrap();
        let cross = (0..3).any(|i| {
            let mut e = Vector::<3>::zeros();
            e[i] = h;
            mesh.closest(&(p + e)).unwrap().element != c.element || mesh.closest(&(p - e)).unwrap().element != c.element
        });
        if cross {
            continue;
        }
        assert!((g.norm() - 1.0).abs() < 1e-4, "grad norm {} at {p:?}", g.norm());
        checked += 1;
    }
}
