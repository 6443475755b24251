//! Dimension-generic geometry kernel.
//!
//! Every surface type answers exact nearest-point queries, which is what the
//! ground-truth unsigned distance `UDF(p, S) = min_{q in S} |p - q|` needs.
//! Meshes, polylines and point sets are accelerated with a [`Bvh`]; analytic
//! primitives use closed forms.

mod aabb;
mod analytic;
mod bvh;
mod chamfer;
pub mod io;
mod mesh;
mod pointset;
mod polyline;
mod primitives;
mod transform;

use nalgebra::SVector;
use rand::Rng;
use thiserror::Error;

pub use aabb::Aabb;
pub use analytic::{BoxSurface, PlanePatch, Sphere, Torus};
pub use bvh::{Bvh, BvhNode};
pub use chamfer::{chamfer_l2, nearest_squared_distances};
pub use mesh::TriMesh;
pub use pointset::PointSet;
pub use polyline::Polyline;
pub use primitives::{closest_on_segment, closest_on_triangle};
pub use transform::{normalize_to_unit_box, UnitBoxTransform};

/// A position in `R^D`. Shapes are normalized so coordinates are dimensionless.
pub type Point<const D: usize> = SVector<f64, D>;
/// A displacement or gradient in `R^D`.
pub type Vector<const D: usize> = SVector<f64, D>;

/// Seeded generator used for every stochastic operation in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Creates the crate's deterministic generator from an integer seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("surface has no geometry")]
    EmptyGeometry,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("surface has zero total measure")]
    ZeroMeasure,
    #[error("geometry has zero extent")]
    DegenerateExtent,
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("element {element} references vertex {index}, but there are only {count} vertices")]
    BadIndex {
        element: usize,
        index: usize,
        count: usize,
    },
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("normals count {normals} does not match point count {points}")]
    NormalCount { points: usize, normals: usize },
    #[error("{format} parse error at line {line}: {message}")]
    Parse {
        format: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Result of a nearest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest<const D: usize> {
    pub point: Point<D>,
    pub distance: f64,
    /// Index of the element attaining the minimum (0 for analytic shapes).
    pub element: usize,
}

/// Ground-truth geometry supporting exact nearest-point queries.
///
/// Implementations are immutable after construction and safe to query from
/// many threads at once.
pub trait Surface<const D: usize>: Send + Sync {
    /// Number of queryable elements (faces, segments, points; 1 for analytic shapes).
    fn element_count(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.element_count() == 0
    }

    /// Nearest point on the surface. `None` only for empty surfaces.
    ///
    /// Ties between elements resolve to the lowest element index.
    fn closest(&self, p: &Point<D>) -> Option<Closest<D>>;

    fn bounds(&self) -> Aabb<D>;

    /// Total area (3D) or arc length (2D curves); point count for point sets.
    fn measure(&self) -> f64;

    /// Draws one point uniformly with respect to [`Surface::measure`].
    fn sample_one(&self, rng: &mut SeededRng) -> Point<D>;
}

/// Geometry that can be mapped through a [`UnitBoxTransform`].
pub trait Transformable<const D: usize> {
    /// Applies `p -> (p - center) / scale` to the geometry.
    fn transformed(&self, t: &UnitBoxTransform<D>) -> Self;
}

impl<const D: usize, S: Surface<D> + ?Sized> Surface<D> for Box<S> {
    fn element_count(&self) -> usize {
        (**self).element_count()
    }
    fn closest(&self, p: &Point<D>) -> Option<Closest<D>> {
        (**self).closest(p)
    }
    fn bounds(&self) -> Aabb<D> {
        (**self).bounds()
    }
    fn measure(&self) -> f64 {
        (**self).measure()
    }
    fn sample_one(&self, rng: &mut SeededRng) -> Point<D> {
        (**self).sample_one(rng)
    }
}

/// Unsigned distance from `p` to the surface.
pub fn exact_udf<const D: usize, S: Surface<D> + ?Sized>(s: &S, p: &Point<D>) -> Result<f64, GeomError> {
    s.closest(p).map(|c| c.distance).ok_or(GeomError::EmptyGeometry)
}

/// The surface point attaining [`exact_udf`].
pub fn exact_closest_point<const D: usize, S: Surface<D> + ?Sized>(
    s: &S,
    p: &Point<D>,
) -> Result<Point<D>, GeomError> {
    s.closest(p).map(|c| c.point).ok_or(GeomError::EmptyGeometry)
}

/// `n` points distributed uniformly by element measure. Deterministic in `seed`.
pub fn sample_surface<const D: usize, S: Surface<D> + ?Sized>(
    s: &S,
    n: usize,
    seed: u64,
) -> Result<PointCloud<D>, GeomError> {
    if n == 0 {
        return Err(GeomError::ZeroCount);
    }
    if s.is_empty() {
        return Err(GeomError::EmptyGeometry);
    }
    let measure = s.measure();
    if !(measure > 0.0) {
        return Err(GeomError::ZeroMeasure);
    }
    let mut rng = seeded_rng(seed);
    let points = (0..n).map(|_| s.sample_one(&mut rng)).collect();
    Ok(PointCloud::new(points))
}

/// A list of points with optional per-point normals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud<const D: usize> {
    pub points: Vec<Point<D>>,
    pub normals: Option<Vec<Vector<D>>>,
}

impl<const D: usize> PointCloud<D> {
    pub fn new(points: Vec<Point<D>>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Point<D>>, normals: Vec<Vector<D>>) -> Result<Self, GeomError> {
        if points.len() != normals.len() {
            return Err(GeomError::NormalCount {
                points: points.len(),
                normals: normals.len(),
            });
        }
        Ok(Self {
            points,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Aabb<D> {
        Aabb::from_points(&self.points)
    }
}

/// Uniform point in an axis-aligned box.
pub fn uniform_in_box<const D: usize>(bounds: &Aabb<D>, rng: &mut SeededRng) -> Point<D> {
    Point::<D>::from_fn(|i, _| rng.random_range(bounds.min[i]..=bounds.max[i]))
}

/// The canonical normalized domain `[-0.5, 0.5]^D`.
pub fn unit_box<const D: usize>() -> Aabb<D> {
    Aabb::new(Point::<D>::repeat(-0.5), Point::<D>::repeat(0.5))
}
