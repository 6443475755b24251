//! The distance-field contract shared by exact oracles and learned fields,
//! and the gradient projection `p <- p - f(p) * grad f(p) / |grad f(p)|`.

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{Aabb, GeomError, Point, PointCloud, Surface, Vector};

/// Exact fields report a zero gradient closer than this to the surface.
pub const SURFACE_EPS: f64 = 1e-9;

/// Batched evaluations are split into blocks of this many points; the split
/// does not depend on the worker count.
pub const BATCH_BLOCK: usize = 512;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("gradient norm {norm:e} below floor at projection step {step}")]
    DegenerateGradient { step: usize, norm: f64 },
    #[error("projection needs at least one step")]
    NoSteps,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// An unsigned distance field over `R^D`.
///
/// `eval` is non-negative everywhere. Implementations must be safe to query
/// concurrently.
pub trait DistanceField<const D: usize>: Sync {
    fn eval(&self, p: &Point<D>) -> f64;

    /// Value and spatial gradient.
    fn eval_grad(&self, p: &Point<D>) -> (f64, Vector<D>);

    fn grad(&self, p: &Point<D>) -> Vector<D> {
        self.eval_grad(p).1
    }

    /// Clamp distance `delta` for fields trained with clamping; `None` when
    /// the field is exact everywhere.
    fn clamp(&self) -> Option<f64> {
        None
    }

    /// Region where the field is meaningful, if bounded.
    fn domain(&self) -> Option<Aabb<D>> {
        None
    }

    /// Order-preserving batched evaluation.
    fn eval_batch(&self, pts: &[Point<D>]) -> Vec<f64> {
        pts.par_chunks(BATCH_BLOCK)
            .flat_map_iter(|c| c.iter().map(|p| self.eval(p)))
            .collect()
    }

    fn eval_grad_batch(&self, pts: &[Point<D>]) -> Vec<(f64, Vector<D>)> {
        pts.par_chunks(BATCH_BLOCK)
            .flat_map_iter(|c| c.iter().map(|p| self.eval_grad(p)))
            .collect()
    }
}

impl<const D: usize, F: DistanceField<D> + ?Sized> DistanceField<D> for &F {
    fn eval(&self, p: &Point<D>) -> f64 {
        (**self).eval(p)
    }
    fn eval_grad(&self, p: &Point<D>) -> (f64, Vector<D>) {
        (**self).eval_grad(p)
    }
    fn clamp(&self) -> Option<f64> {
        (**self).clamp()
    }
    fn domain(&self) -> Option<Aabb<D>> {
        (**self).domain()
    }
    fn eval_batch(&self, pts: &[Point<D>]) -> Vec<f64> {
        (**self).eval_batch(pts)
    }
    fn eval_grad_batch(&self, pts: &[Point<D>]) -> Vec<(f64, Vector<D>)> {
        (**self).eval_grad_batch(pts)
    }
}

/// Ground-truth field of a surface: `eval = UDF(p, S)` and
/// `grad = (p - closest) / distance`.
#[derive(Debug, Clone)]
pub struct ExactField<S> {
    surface: S,
}

impl<S> ExactField<S> {
    pub fn surface(&self) -> &S {
        &self.surface
    }

    pub fn into_inner(self) -> S {
        self.surface
    }
}

/// Wraps a surface as a [`DistanceField`]. Fails on empty geometry.
pub fn exact_field<const D: usize, S: Surface<D>>(surface: S) -> Result<ExactField<S>, FieldError> {
    if surface.is_empty() {
        return Err(GeomError::EmptyGeometry.into());
    }
    Ok(ExactField { surface })
}

impl<const D: usize, S: Surface<D>> DistanceField<D> for ExactField<S> {
    fn eval(&self, p: &Point<D>) -> f64 {
        self.surface.closest(p).expect("non-empty surface").distance
    }

    fn eval_grad(&self, p: &Point<D>) -> (f64, Vector<D>) {
        let c = self.surface.closest(p).expect("non-empty surface");
        // not differentiable on the surface itself; report zero there
        let g = if c.distance < SURFACE_EPS {
            Vector::<D>::zeros()
        } else {
            (p - c.point) / c.distance
        };
        (c.distance, g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub num_steps: usize,
    pub grad_norm_floor: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            num_steps: 5,
            grad_norm_floor: 1e-8,
        }
    }
}

/// One normalized-gradient step. `Ok(None)` means `p` is a fixed point
/// (on the surface).
fn step<const D: usize>(
    value: f64,
    grad: &Vector<D>,
    floor: f64,
    step: usize,
) -> Result<Option<Vector<D>>, FieldError> {
    if value <= SURFACE_EPS {
        return Ok(None);
    }
    let norm = grad.norm();
    if !(norm >= floor) {
        return Err(FieldError::DegenerateGradient { step, norm });
    }
    Ok(Some(-grad * (value / norm)))
}

/// Moves `p` onto the zero level set with `cfg.num_steps` normalized
/// gradient steps.
///
/// Points already on the surface (`f(p) <= SURFACE_EPS`) are fixed points.
/// A gradient shorter than `grad_norm_floor` (cut locus, dead units) is an
/// error carrying the step index.
pub fn project<const D: usize, F: DistanceField<D> + ?Sized>(
    f: &F,
    p: &Point<D>,
    cfg: &ProjectionConfig,
) -> Result<Point<D>, FieldError> {
    if cfg.num_steps == 0 {
        return Err(FieldError::NoSteps);
    }
    let mut p = *p;
    for k in 0..cfg.num_steps {
        let (v, g) = f.eval_grad(&p);
        match step(v, &g, cfg.grad_norm_floor, k)? {
            Some(d) => p += d,
            None => break,
        }
    }
    Ok(p)
}

/// Result of projecting a batch of points.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBatch<const D: usize> {
    pub points: Vec<Point<D>>,
    /// Unit direction pointing back along the last non-zero step of each
    /// point (away from the surface); zero when the point never moved.
    pub back_directions: Vec<Vector<D>>,
    /// Input index of each surviving point.
    pub source: Vec<usize>,
    /// Points removed because of a degenerate gradient.
    pub dropped: usize,
}

impl<const D: usize> ProjectedBatch<D> {
    pub fn into_cloud(self) -> PointCloud<D> {
        PointCloud::new(self.points)
    }
}

/// Elementwise [`project`] over a batch, evaluating the field in batches.
/// Points hitting a degenerate gradient are dropped and counted. Output
/// order follows input order.
pub fn project_batch<const D: usize, F: DistanceField<D> + ?Sized>(
    f: &F,
    pts: &[Point<D>],
    cfg: &ProjectionConfig,
) -> Result<ProjectedBatch<D>, FieldError> {
    if cfg.num_steps == 0 {
        return Err(FieldError::NoSteps);
    }
    let mut points = pts.to_vec();
    let mut back = vec![Vector::<D>::zeros(); pts.len()];
    let mut alive = vec![true; pts.len()];
    // indices still moving
    let mut active: Vec<usize> = (0..pts.len()).collect();
    for k in 0..cfg.num_steps {
        if active.is_empty() {
            break;
        }
        let query: Vec<Point<D>> = active.iter().map(|&i| points[i]).collect();
        let vg = f.eval_grad_batch(&query);
        let mut next = Vec::with_capacity(active.len());
        for (&i, (v, g)) in active.iter().zip(vg) {
            match step(v, &g, cfg.grad_norm_floor, k) {
                Ok(Some(d)) => {
                    points[i] += d;
                    let n = d.norm();
                    if n > 0.0 {
                        back[i] = -d / n;
                    }
                    next.push(i);
                }
                Ok(None) => {}
                Err(_) => alive[i] = false,
            }
        }
        active = next;
    }
    let dropped = alive.iter().filter(|a| !**a).count();
    let mut out = ProjectedBatch {
        points: Vec::with_capacity(pts.len() - dropped),
        back_directions: Vec::with_capacity(pts.len() - dropped),
        source: Vec::with_capacity(pts.len() - dropped),
        dropped,
    };
    for i in 0..pts.len() {
        if alive[i] {
            out.points.push(points[i]);
            out.back_directions.push(back[i]);
            out.source.push(i);
        }
    }
    Ok(out)
}
