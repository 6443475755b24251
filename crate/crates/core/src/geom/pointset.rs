use rand::Rng;

use super::{Aabb, Bvh, Closest, Point, SeededRng, Surface, Transformable, UnitBoxTransform};

/// Raw point samples treated as a surface: the distance to the set is the
/// distance to its nearest member.
#[derive(Debug, Clone)]
pub struct PointSet<const D: usize> {
    points: Vec<Point<D>>,
    bvh: Bvh<D>,
}

impl<const D: usize> PointSet<D> {
    pub fn new(points: Vec<Point<D>>) -> Self {
        let boxes: Vec<Aabb<D>> = points.iter().map(|p| Aabb::new(*p, *p)).collect();
        let bvh = Bvh::build(&boxes);
        Self { points, bvh }
    }

    pub fn points(&self) -> &[Point<D>] {
        &self.points
    }

    /// Index and squared distance of the nearest member.
    pub fn nearest(&self, p: &Point<D>) -> Option<(usize, f64)> {
        self.bvh
            .nearest(p, |i| ((p - self.points[i]).norm_squared(), ()))
            .map(|(i, d2, ())| (i, d2))
    }
}

impl<const D: usize> Surface<D> for PointSet<D> {
    fn element_count(&self) -> usize {
        self.points.len()
    }

    fn closest(&self, p: &Point<D>) -> Option<Closest<D>> {
        self.nearest(p).map(|(element, d2)| Closest {
            point: self.points[element],
            distance: d2.sqrt(),
            element,
        })
    }

    fn bounds(&self) -> Aabb<D> {
        Aabb::from_points(&self.points)
    }

    fn measure(&self) -> f64 {
        self.points.len() as f64
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<D> {
        self.points[rng.random_range(0..self.points.len())]
    }
}

impl<const D: usize> Transformable<D> for PointSet<D> {
    fn transformed(&self, t: &UnitBoxTransform<D>) -> Self {
        Self::new(self.points.iter().map(|p| t.apply(p)).collect())
    }
}
