//! Training data: UDF-annotated samples around surfaces, sparse inputs and
//! the 2D curve corpus.

mod curves;
mod store;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{seeded_rng, uniform_in_box, unit_box, GeomError, Point, PointCloud, Surface};

pub use curves::{make_curve_dataset, Curve2D, Curve2DSpec, CurveDataset, CurveSample, CurveKind, CurveRanges, CurveShape, CHORD_TOLERANCE};
pub use store::{read_dataset, read_samples, write_dataset, write_samples, ShapeMeta, SAMPLES_MAGIC, SAMPLES_VERSION};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("cannot take {k} points from a cloud of {n}")]
    TooFew { k: usize, n: usize },
    #[error("invalid sampling policy: {0}")]
    Policy(String),
    #[error("invalid curve spec: {0}")]
    Curve(String),
    #[error("could not draw a curve inside the box after {0} attempts")]
    CurveRejected(usize),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How a training point was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SampleOrigin {
    Uniform,
    Surface { sigma: f64 },
}

/// Points with ground-truth distances for one shape, plus its sparse input.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<const D: usize> {
    pub id: String,
    pub input: PointCloud<D>,
    pub points: Vec<Point<D>>,
    pub gt: Vec<f64>,
    /// Per-point provenance; empty when loaded from disk.
    pub origin: Vec<SampleOrigin>,
}

impl<const D: usize> SampleSet<D> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Mixture used to draw training points: a `surface_fraction` of surface
/// samples perturbed by isotropic Gaussian noise, the standard deviations
/// used in equal parts, and the rest uniform in the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPolicy {
    pub surface_fraction: f64,
    pub sigmas: Vec<f64>,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        Self {
            surface_fraction: 0.5,
            sigmas: vec![0.005, 0.02, 0.1],
        }
    }
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(0.0..=1.0).contains(&self.surface_fraction) {
            return Err(DataError::Policy("surface fraction must be in [0, 1]".into()));
        }
        if self.surface_fraction > 0.0 && self.sigmas.is_empty() {
            return Err(DataError::Policy("surface samples need at least one sigma".into()));
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(DataError::Policy("sigmas must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Number of points per sigma, then the uniform count.
    pub fn counts(&self, total: usize) -> (Vec<usize>, usize) {
        let surface = (total as f64 * self.surface_fraction).round() as usize;
        let k = self.sigmas.len().max(1);
        let per: Vec<usize> = (0..self.sigmas.len())
            .map(|i| surface / k + usize::from(i < surface % k))
            .collect();
        (per, total - surface)
    }
}

/// Attempts at redrawing noise that leaves the box before clamping.
const MAX_REDRAWS: usize = 64;

/// Draws `count` training points per `policy` and annotates them with the
/// exact distance to `surface`. The surface must lie in the unit box.
pub fn make_samples<const D: usize, S: Surface<D> + ?Sized>(
    surface: &S,
    count: usize,
    policy: &SamplingPolicy,
    seed: u64,
) -> Result<(Vec<Point<D>>, Vec<f64>, Vec<SampleOrigin>), DataError> {
    policy.validate()?;
    if surface.is_empty() {
        return Err(GeomError::EmptyGeometry.into());
    }
    let bx = unit_box::<D>();
    let mut rng = seeded_rng(seed);
    let (per_sigma, uniform) = policy.counts(count);
    let mut points = Vec::with_capacity(count);
    let mut origin = Vec::with_capacity(count);
    if per_sigma.iter().any(|&n| n > 0) && !(surface.measure() > 0.0) {
        return Err(GeomError::ZeroMeasure.into());
    }
    for (&sigma, &n) in policy.sigmas.iter().zip(&per_sigma) {
        let noise = Normal::new(0.0, sigma).map_err(|e| DataError::Policy(e.to_string()))?;
        for _ in 0..n {
            let base = surface.sample_one(&mut rng);
            let mut p = base;
            for attempt in 0..=MAX_REDRAWS {
                p = base + Point::<D>::from_fn(|_, _| noise.sample(&mut rng));
                if bx.contains(&p) {
                    break;
                }
                if attempt == MAX_REDRAWS {
                    p = bx.clamp(&p);
                }
            }
            points.push(p);
            origin.push(SampleOrigin::Surface { sigma });
        }
    }
    for _ in 0..uniform {
        points.push(uniform_in_box(&bx, &mut rng));
        origin.push(SampleOrigin::Uniform);
    }
    let gt = points
        .par_iter()
        .map(|p| surface.closest(p).expect("non-empty surface").distance)
        .collect();
    Ok((points, gt, origin))
}

/// Builds a [`SampleSet`] with a sparse input of `sparse_k` surface samples.
pub fn make_sample_set<const D: usize, S: Surface<D> + ?Sized>(
    id: impl Into<String>,
    surface: &S,
    count: usize,
    sparse_k: usize,
    policy: &SamplingPolicy,
    seed: u64,
) -> Result<SampleSet<D>, DataError> {
    let (points, gt, origin) = make_samples(surface, count, policy, seed)?;
    let input = crate::geom::sample_surface(surface, sparse_k, seed.wrapping_add(0x9e37_79b9))?;
    Ok(SampleSet {
        id: id.into(),
        input,
        points,
        gt,
        origin,
    })
}

/// Uniform subsample of `k` points without replacement.
pub fn sparsify<const D: usize>(pc: &PointCloud<D>, k: usize, seed: u64) -> Result<PointCloud<D>, DataError> {
    if k > pc.len() {
        return Err(DataError::TooFew { k, n: pc.len() });
    }
    let mut rng = seeded_rng(seed);
    let idx = index::sample(&mut rng, pc.len(), k);
    let points = idx.iter().map(|i| pc.points[i]).collect();
    Ok(match &pc.normals {
        Some(n) => PointCloud::with_normals(points, idx.iter().map(|i| n[i]).collect())?,
        None => PointCloud::new(points),
    })
}

/// Splits `0..n` into disjoint train and test index sets.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{closest_on_triangle, Sphere, TriMesh};

    #[test]
    fn zero_sigma_samples_lie_on_the_surface() {
        let s = Sphere::<3>::new(Point::zeros(), 0.3);
        let policy = SamplingPolicy {
            surface_fraction: 1.0,
            sigmas: vec![0.0],
        };
        let (_, gt, _) = make_samples(&s, 500, &policy, 2).unwrap();
        assert!(gt.iter().all(|g| *g < 1e-12));
    }

    #[test]
    fn mixture_counts_are_exact() {
        let s = Sphere::<2>::new(Point::zeros(), 0.3);
        let policy = SamplingPolicy::default();
        let (pts, _, origin) = make_samples(&s, 1001, &policy, 0).unwrap();
        assert_eq!(pts.len(), 1001);
        let count = |o: SampleOrigin| origin.iter().filter(|x| **x == o).count();
        // 501 surface points over three sigmas
        assert_eq!(count(SampleOrigin::Surface { sigma: 0.005 }), 167);
        assert_eq!(count(SampleOrigin::Surface { sigma: 0.02 }), 167);
        assert_eq!(count(SampleOrigin::Surface { sigma: 0.1 }), 167);
        assert_eq!(count(SampleOrigin::Uniform), 500);
        let bx = unit_box::<2>();
        assert!(pts.iter().all(|p| bx.contains(p)));
    }

    #[test]
    fn gt_matches_brute_force_on_small_mesh() {
        let mesh = TriMesh::icosphere(Point::zeros(), 0.35, 0);
        assert_eq!(mesh.faces().len(), 20);
        let (pts, gt, _) = make_samples(&mesh, 2000, &SamplingPolicy::default(), 9).unwrap();
        for (p, g) in pts.iter().zip(&gt) {
            let brute = (0..20)
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    (p - closest_on_triangle(p, &a, &b, &c)).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(*g, brute);
        }
    }

    #[test]
    fn sparsify_contracts() {
        let pc = PointCloud::new((0..50).map(|i| Point::<2>::new(i as f64, 0.0)).collect());
        let all = sparsify(&pc, 50, 1).unwrap();
        let mut xs: Vec<i64> = all.points.iter().map(|p| p.x as i64).collect();
        xs.sort_unstable();
        assert_eq!(xs, (0..50).collect::<Vec<_>>());
        let one = sparsify(&pc, 1, 1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(pc.points.contains(&one.points[0]));
        assert_eq!(sparsify(&pc, 20, 7).unwrap(), sparsify(&pc, 20, 7).unwrap());
        assert!(matches!(sparsify(&pc, 51, 0), Err(DataError::TooFew { .. })));
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let (train, test) = split_indices(103, 0.2, 5);
        assert_eq!(test.len(), 21);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }
}
