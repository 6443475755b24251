//! Closed-form primitives. Each one has a single element (index 0).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Aabb, Closest, Point, SeededRng, Surface, Transformable, UnitBoxTransform, Vector};

/// Sphere in 3D, circle in 2D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere<const D: usize> {
    pub center: Point<D>,
    pub radius: f64,
}

impl<const D: usize> Sphere<D> {
    pub fn new(center: Point<D>, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Area of the unit sphere in `R^d`.
fn unit_sphere_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * unit_sphere_measure(d - 2),
    }
}

fn first_axis<const D: usize>() -> Vector<D> {
    Vector::<D>::from_fn(|i, _| if i == 0 { 1.0 } else { 0.0 })
}

impl<const D: usize> Surface<D> for Sphere<D> {
    fn element_count(&self) -> usize {
        1
    }

    fn closest(&self, p: &Point<D>) -> Option<Closest<D>> {
        let v = p - self.center;
        let n = v.norm();
        // the center is equidistant to every surface point; pick +x
        let dir = if n > 0.0 { v / n } else { first_axis() };
        let point = self.center + dir * self.radius;
        Some(Closest {
            point,
            distance: (p - point).norm(),
            element: 0,
        })
    }

    fn bounds(&self) -> Aabb<D> {
        let r = Vector::<D>::repeat(self.radius);
        Aabb::new(self.center - r, self.center + r)
    }

    fn measure(&self) -> f64 {
        unit_sphere_measure(D) * self.radius.powi(D as i32 - 1)
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<D> {
        loop {
            let v = Vector::<D>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let n = v.norm();
            if n > 1e-12 {
                return self.center + v * (self.radius / n);
            }
        }
    }
}

impl<const D: usize> Transformable<D> for Sphere<D> {
    fn transformed(&self, t: &UnitBoxTransform<D>) -> Self {
        Self::new(t.apply(&self.center), self.radius / t.scale)
    }
}

/// Rectangle in the plane `z = center.z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePatch {
    pub center: Point<3>,
    pub half_x: f64,
    pub half_y: f64,
}

impl PlanePatch {
    pub fn new(center: Point<3>, half_x: f64, half_y: f64) -> Self {
        Self { center, half_x, half_y }
    }
}

impl Surface<3> for PlanePatch {
    fn element_count(&self) -> usize {
        1
    }

    fn closest(&self, p: &Point<3>) -> Option<Closest<3>> {
        let c = self.center;
        let point = Point::<3>::new(
            p.x.clamp(c.x - self.half_x, c.x + self.half_x),
            p.y.clamp(c.y - self.half_y, c.y + self.half_y),
            c.z,
        );
        Some(Closest {
            point,
            distance: (p - point).norm(),
            element: 0,
        })
    }

    fn bounds(&self) -> Aabb<3> {
        let h = Vector::<3>::new(self.half_x, self.half_y, 0.0);
        Aabb::new(self.center - h, self.center + h)
    }

    fn measure(&self) -> f64 {
        4.0 * self.half_x * self.half_y
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<3> {
        let x = rng.random_range(-self.half_x..=self.half_x);
        let y = rng.random_range(-self.half_y..=self.half_y);
        self.center + Vector::<3>::new(x, y, 0.0)
    }
}

impl Transformable<3> for PlanePatch {
    fn transformed(&self, t: &UnitBoxTransform<3>) -> Self {
        Self::new(t.apply(&self.center), self.half_x / t.scale, self.half_y / t.scale)
    }
}

/// Boundary of an axis-aligned box (a rectangle outline in 2D).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSurface<const D: usize> {
    pub center: Point<D>,
    pub half: Vector<D>,
}

impl<const D: usize> BoxSurface<D> {
    pub fn new(center: Point<D>, half: Vector<D>) -> Self {
        Self { center, half }
    }

    fn face_measure(&self, axis: usize) -> f64 {
        (0..D).filter(|&b| b != axis).map(|b| 2.0 * self.half[b]).product()
    }
}

impl<const D: usize> Surface<D> for BoxSurface<D> {
    fn element_count(&self) -> usize {
        1
    }

    fn closest(&self, p: &Point<D>) -> Option<Closest<D>> {
        let v = p - self.center;
        let outside = (0..D).any(|a| v[a].abs() > self.half[a]);
        let point = if outside {
            self.bounds().clamp(p)
        } else {
            // push out through the nearest face; lowest axis wins ties
            let mut axis = 0;
            let mut gap = f64::INFINITY;
            for a in 0..D {
                let g = self.half[a] - v[a].abs();
                if g < gap {
                    gap = g;
                    axis = a;
                }
            }
            let mut q = *p;
            let sign = if v[axis] >= 0.0 { 1.0 } else { -1.0 };
            q[axis] = self.center[axis] + sign * self.half[axis];
            q
        };
        Some(Closest {
            point,
            distance: (p - point).norm(),
            element: 0,
        })
    }

    fn bounds(&self) -> Aabb<D> {
        Aabb::new(self.center - self.half, self.center + self.half)
    }

    fn measure(&self) -> f64 {
        (0..D).map(|a| 2.0 * self.face_measure(a)).sum()
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<D> {
        let mut target = rng.random::<f64>() * self.measure();
        let mut axis = D - 1;
        for a in 0..D {
            let m = 2.0 * self.face_measure(a);
            if target < m {
                axis = a;
                break;
            }
            target -= m;
        }
        let mut v = Vector::<D>::from_fn(|b, _| rng.random_range(-self.half[b]..=self.half[b]));
        v[axis] = if rng.random::<bool>() { self.half[axis] } else { -self.half[axis] };
        self.center + v
    }
}

impl<const D: usize> Transformable<D> for BoxSurface<D> {
    fn transformed(&self, t: &UnitBoxTransform<D>) -> Self {
        Self::new(t.apply(&self.center), self.half / t.scale)
    }
}

/// Torus around the z axis through `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Torus {
    pub center: Point<3>,
    pub major: f64,
    pub minor: f64,
}

impl Torus {
    pub fn new(center: Point<3>, major: f64, minor: f64) -> Self {
        Self { center, major, minor }
    }

    /// Nearest point on the core circle.
    fn ring_point(&self, p: &Point<3>) -> Point<3> {
        let v = p - self.center;
        let rho = v.x.hypot(v.y);
        let (cx, cy) = if rho > 0.0 { (v.x / rho, v.y / rho) } else { (1.0, 0.0) };
        self.center + Vector::<3>::new(self.major * cx, self.major * cy, 0.0)
    }
}

impl Surface<3> for Torus {
    fn element_count(&self) -> usize {
        1
    }

    fn closest(&self, p: &Point<3>) -> Option<Closest<3>> {
        let ring = self.ring_point(p);
        let w = p - ring;
        let n = w.norm();
        let dir = if n > 0.0 { w / n } else { (ring - self.center).normalize() };
        let point = ring + dir * self.minor;
        Some(Closest {
            point,
            distance: (p - point).norm(),
            element: 0,
        })
    }

    fn bounds(&self) -> Aabb<3> {
        let r = self.major + self.minor;
        let h = Vector::<3>::new(r, r, self.minor);
        Aabb::new(self.center - h, self.center + h)
    }

    fn measure(&self) -> f64 {
        4.0 * PI * PI * self.major * self.minor
    }

    fn sample_one(&self, rng: &mut SeededRng) -> Point<3> {
        // area element is proportional to (R + r cos v)
        loop {
            let u = rng.random_range(0.0..2.0 * PI);
            let v = rng.random_range(0.0..2.0 * PI);
            let w = rng.random::<f64>();
            if w * (self.major + self.minor) <= self.major + self.minor * v.cos() {
                let rr = self.major + self.minor * v.cos();
                return self.center + Vector::<3>::new(rr * u.cos(), rr * u.sin(), self.minor * v.sin());
            }
        }
    }
}

impl Transformable<3> for Torus {
    fn transformed(&self, t: &UnitBoxTransform<3>) -> Self {
        Self::new(t.apply(&self.center), self.major / t.scale, self.minor / t.scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{exact_closest_point, exact_udf, sample_surface};

    #[test]
    fn circle_center_distance_is_radius() {
        let c = Sphere::<2>::new(Point::zeros(), 0.4);
        assert_eq!(exact_udf(&c, &Point::<2>::new(0.0, 0.0)).unwrap(), 0.4);
    }

    #[test]
    fn plane_projection_is_orthogonal() {
        let plane = PlanePatch::new(Point::zeros(), 0.5, 0.5);
        let q = exact_closest_point(&plane, &Point::<3>::new(0.1, 0.2, 0.3)).unwrap();
        assert_eq!(q, Point::<3>::new(0.1, 0.2, 0.0));
    }

    #[test]
    fn on_surface_point_is_its_own_closest() {
        let s = Sphere::<3>::new(Point::zeros(), 0.4);
        let p = Point::<3>::new(0.0, 0.4, 0.0);
        assert_eq!(exact_closest_point(&s, &p).unwrap(), p);
        let t = Torus::new(Point::zeros(), 0.3, 0.1);
        let p = Point::<3>::new(0.4, 0.0, 0.0);
        assert_eq!(exact_closest_point(&t, &p).unwrap(), p);
    }

    #[test]
    fn box_inside_and_outside() {
        let b = BoxSurface::<3>::new(Point::zeros(), Vector::<3>::new(0.5, 0.3, 0.2));
        let c = b.closest(&Point::<3>::new(0.1, 0.0, 0.1)).unwrap();
        assert_eq!(c.point, Point::<3>::new(0.1, 0.0, 0.2));
        assert!((c.distance - 0.1).abs() < 1e-15);
        let c = b.closest(&Point::<3>::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(c.point, Point::<3>::new(0.5, 0.0, 0.0));
        assert!((b.measure() - 2.0 * (1.0 * 0.6 + 0.6 * 0.4 + 1.0 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn sphere_measure_matches_closed_form() {
        assert!((Sphere::<3>::new(Point::zeros(), 0.5).measure() - PI).abs() < 1e-12);
        assert!((Sphere::<2>::new(Point::zeros(), 0.5).measure() - PI).abs() < 1e-12);
    }

    #[test]
    fn sphere_samples_center_on_average() {
        let s = Sphere::<3>::new(Point::<3>::new(0.1, -0.2, 0.05), 0.4);
        let pc = sample_surface(&s, 100_000, 7).unwrap();
        let mean = pc.points.iter().fold(Point::<3>::zeros(), |a, p| a + p) / pc.len() as f64;
        assert!((mean - s.center).norm() < 0.01);
        for p in pc.points.iter().take(100) {
            assert!(((p - s.center).norm() - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_samples_lie_on_surface() {
        let t = Torus::new(Point::zeros(), 0.3, 0.1);
        let pc = sample_surface(&t, 1000, 1).unwrap();
        for p in &pc.points {
            assert!(exact_udf(&t, p).unwrap() < 1e-12);
        }
    }
}
