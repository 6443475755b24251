use super::{GeomError, Point, Surface, Transformable, Vector};

/// Uniform-scale similarity `p -> (p - center) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitBoxTransform<const D: usize> {
    pub center: Point<D>,
    pub scale: f64,
}

impl<const D: usize> UnitBoxTransform<D> {
    pub fn identity() -> Self {
        Self {
            center: Point::<D>::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point<D>) -> Point<D> {
        (p - self.center) / self.scale
    }

    pub fn apply_vector(&self, v: &Vector<D>) -> Vector<D> {
        v / self.scale
    }

    pub fn inverse(&self, q: &Point<D>) -> Point<D> {
        q * self.scale + self.center
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.center.iter().all(|&c| c == 0.0)
    }
}

/// Centers the geometry's bounding box at the origin and scales it uniformly
/// so its longest side is 1, i.e. it fits `[-0.5, 0.5]^D`.
pub fn normalize_to_unit_box<const D: usize, S>(s: &S) -> Result<(S, UnitBoxTransform<D>), GeomError>
where
    S: Surface<D> + Transformable<D>,
{
    if s.is_empty() {
        return Err(GeomError::EmptyGeometry);
    }
    let b = s.bounds();
    let scale = b.extent().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GeomError::DegenerateExtent);
    }
    let t = UnitBoxTransform {
        center: b.center(),
        scale,
    };
    Ok((s.transformed(&t), t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{BoxSurface, PointSet, Sphere, TriMesh};

    #[test]
    fn unit_box_is_a_fixed_point() {
        let b = BoxSurface::<3>::new(Point::zeros(), Vector::repeat(0.5));
        let (_, t) = normalize_to_unit_box(&b).unwrap();
        assert!(t.is_identity());
    }

    #[test]
    fn unit_diameter_sphere_is_recentered() {
        let s = Sphere::<3>::new(Point::<3>::new(10.0, 0.0, 0.0), 0.5);
        let (n, t) = normalize_to_unit_box(&s).unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(n.center, Point::<3>::zeros());
        assert_eq!(n.radius, 0.5);
    }

    #[test]
    fn mesh_longest_extent_becomes_one() {
        let m = TriMesh::icosphere(Point::<3>::new(3.0, -2.0, 7.0), 2.7, 2);
        let (n, t) = normalize_to_unit_box(&m).unwrap();
        let e = n.bounds().extent();
        assert!((e.max() - 1.0).abs() < 1e-12);
        assert!(n.bounds().center().norm() < 1e-12);
        let v = m.vertices()[5];
        assert!((t.inverse(&t.apply(&v)) - v).norm() < 1e-12);
    }

    #[test]
    fn degenerate_extent_is_rejected() {
        let s = PointSet::<2>::new(vec![Point::<2>::new(1.0, 1.0)]);
        assert!(matches!(normalize_to_unit_box(&s), Err(GeomError::DegenerateExtent)));
        let e = PointSet::<2>::new(vec![]);
        assert!(matches!(normalize_to_unit_box(&e), Err(GeomError::EmptyGeometry)));
    }
}
