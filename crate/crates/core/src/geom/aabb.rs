use super::{Point, Vector};

/// Axis-aligned box. An empty box has `min > max` on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<const D: usize> {
    pub min: Point<D>,
    pub max: Point<D>,
}

impl<const D: usize> Aabb<D> {
    pub fn new(min: Point<D>, max: Point<D>) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Point::<D>::repeat(f64::INFINITY),
            max: Point::<D>::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a, I>(points: I) -> Self
    where
        I: IntoIterator<Item = &'a Point<D>>,
    {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        (0..D).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Point<D>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, p: &Point<D>) -> bool {
        (0..D).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Self) -> bool {
        other.is_empty() || (self.contains(&other.min) && self.contains(&other.max))
    }

    pub fn center(&self) -> Point<D> {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vector<D> {
        self.max - self.min
    }

    pub fn longest_axis(&self) -> usize {
        self.extent().imax()
    }

    /// Nearest point of the box to `p` (`p` itself when inside).
    pub fn clamp(&self, p: &Point<D>) -> Point<D> {
        Point::<D>::from_fn(|i, _| p[i].clamp(self.min[i], self.max[i]))
    }

    /// Squared distance from `p` to the box; zero inside.
    pub fn distance_squared(&self, p: &Point<D>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..D {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }

    /// Slab test: parameter interval `[t_enter, t_exit]` of `origin + t * dir`
    /// inside the box, or `None` when the line misses it.
    pub fn ray_interval(&self, origin: &Point<D>, dir: &Vector<D>) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..D {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 <= t1).then_some((t0, t1))
    }
}
