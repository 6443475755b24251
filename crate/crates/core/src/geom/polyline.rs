use rand::Rng;

use super::{
    closest_on_segment, Aabb, Bvh, Closest, GeomError, Point, SeededRng, Surface, Transformable,
    UnitBoxTransform,
};

/// Piecewise-linear curve made of indexed segments. Used for 2D curves and
/// manifolds, where exact distances are computed against the segments.
#[derive(Debug, Clone)]
pub struct Polyline<const D: usize> {
    vertices: Vec<Point<D>>,
    segments: Vec<[u32; 2]>,
    cumulative_length: Vec<f64>,
    bvh: Bvh<D>,
}

impl<const D: usize> Polyline<D> {
    pub fn new(vertices: Vec<Point<D>>, segments: Vec<[u32; 2]>) -> Result<Self, GeomError> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeomError::NonFinite("polyline vertices"));
        }
        for (s, seg) in segments.iter().enumerate() {
            for &i in seg {
                if i as usize >= vertices.len() {
                    return Err(GeomError::BadIndex {
                        element: s,
                        index: i as usize,
                        count: vertices.len(),
                    });
                }
            }
        }
        let mut total = 0.0;
        let mut cumulative_length = Vec::with_capacity(segments.len());
        let boxes: Vec<Aabb<D>> = segments
            .iter()
            .map(|[a, b]| {
                let (a, b) = (&vertices[*a as usize], &vertices[*b as usize]);
                total += (b - a).norm();
                cumulative_length.push(total);
                Aabb::from_points([a, b])
            })
            .collect();
        let bvh = Bvh::build(&boxes);
        Ok(Self {
            vertices,
            segments,
            cumulative_length,
            bvh,
        })
    }

    /// Open chain through `vertices` in order.
    pub fn chain(vertices: Vec<Point<D>>) -> Result<Self, GeomError> {
        let segments = (1..vertices.len() as u32).map(|i| [i - 1, i]).collect();
        Self::new(vertices, segments)
    }

    pub fn vertices(&self) -> &[Point<D>] {
        &self.vertices
    }

    pub fn segments(&self) -> &[[u32; 2]] {
        &self.segments
    }

    pub fn segment(&self, s: usize) -> (Point<D>, Point<D>) {
        let [a, b] = self.segments[s];
        (self.vertices[a as usize], self.vertices[b as usize])
    }

    /// Locates arc length `s` (clamped to the curve): segment index and the
    /// fraction along it.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let total = self.measure();
        let s = s.clamp(0.0, total);
        let seg = self
            .cumulative_length
            .partition_point(|&c| c < s)
            .min(self.segments.len() - 1);
        let start = if seg == 0 { 0.0 } else { self.cumulative_length[seg - 1] };
        let len = self.cumulative_length[seg] - start;
        let t = if len > 0.0 { ((s - start) / len).clamp(0.0, 1.0) } else { 0.0 };
        (seg, t)
    }
}

impl<const D: usize> Surface<D> for Polyline<D> {
    fn element_count(&self) -> usize {
        self.segments.len()
    }

    fn closest(&self, p: &Point<D>) -> Option<Closest<D>> {
        self.bvh
            .nearest(p, |s| {
                let (a, b) = self.segment(s);
                let q = closest_on_segment(p, &a, &b);
                ((p - q).norm_squared(), q)
            })
            .map(|(element, d2, point)| Closest {
                point,
                distance: d2.sqrt(),
                element,
            })
    }

    fn bounds(&self) -> Aabb<D> {
        Aabb::from_points(self.segments.iter().flatten().map(|&i| &self.vertices[i as usize]))
    }

    fn measure(&self) -> f64 {
        self.cumulative_length.last().copied().unwrap_or(0.0)
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<D> {
        let (seg, t) = self.locate(rng.random::<f64>() * self.measure());
        let (a, b) = self.segment(seg);
        a + (b - a) * t
    }
}

impl<const D: usize> Transformable<D> for Polyline<D> {
    fn transformed(&self, t: &UnitBoxTransform<D>) -> Self {
        let vertices = self.vertices.iter().map(|v| t.apply(v)).collect();
        Self::new(vertices, self.segments.clone()).expect("transform keeps a valid polyline")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::exact_udf;

    #[test]
    fn distance_to_line_segment() {
        let line = Polyline::chain(vec![Point::<2>::new(-0.5, -0.25), Point::<2>::new(0.5, 0.25)]).unwrap();
        // y = 0.5 x, distance from (0, 0.1) is 0.1 / sqrt(1.25)
        let d = exact_udf(&line, &Point::<2>::new(0.0, 0.1)).unwrap();
        assert!((d - 0.1 / 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn locate_walks_arc_length() {
        let l = Polyline::chain(vec![
            Point::<2>::new(0.0, 0.0),
            Point::<2>::new(1.0, 0.0),
            Point::<2>::new(1.0, 2.0),
        ])
        .unwrap();
        assert_eq!(l.measure(), 3.0);
        assert_eq!(l.locate(0.5), (0, 0.5));
        assert_eq!(l.locate(2.0), (1, 0.5));
        assert_eq!(l.locate(10.0), (1, 1.0));
    }
}
