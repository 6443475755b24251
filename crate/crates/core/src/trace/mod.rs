//! Root finding along rays: damped sphere tracing down to `eps1`, then
//! first-order refinement steps `lambda += beta * (-f) / (r . grad f)` down
//! to `eps2`. Rendering and multi-valued regression are built on top.

mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::DistanceField;
use crate::geom::{unit_box, Point, Vector};

pub use render::{encode_depth_pgm, encode_normal_ppm, encode_shaded_ppm, render, Camera, RenderOutput, RenderStats};

/// `|r . grad f|` below this makes a refinement step undefined.
pub const GRAZING_SLOPE: f64 = 1e-8;

/// Refinement steps landing outside the `eps1` shell are halved at most this
/// many times before the refinement is given up.
pub const MAX_HALVINGS: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("ray direction must be non-zero and finite")]
    BadDirection,
    #[error("invalid trace config: {0}")]
    Config(String),
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("regression input has {got} coordinates, expected {expected}")]
    InputDim { expected: usize, got: usize },
}

/// `p(lambda) = origin + lambda * dir` with a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<const D: usize> {
    pub origin: Point<D>,
    pub dir: Vector<D>,
}

impl<const D: usize> Ray<D> {
    /// Normalizes `dir`.
    pub fn new(origin: Point<D>, dir: Vector<D>) -> Result<Self, TraceError> {
        let n = dir.norm();
        if !(n > 0.0) || !n.is_finite() || !origin.iter().all(|c| c.is_finite()) {
            return Err(TraceError::BadDirection);
        }
        Ok(Self { origin, dir: dir / n })
    }

    pub fn at(&self, lambda: f64) -> Point<D> {
        self.origin + self.dir * lambda
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceConfig {
    /// Damping of sphere-tracing steps.
    pub alpha: f64,
    /// Damping of refinement steps.
    pub beta: f64,
    /// Switch from sphere tracing to refinement below this value.
    pub eps1: f64,
    /// Hit threshold.
    pub eps2: f64,
    /// Distance behind a hit where normals are taken.
    pub normal_offset: f64,
    pub max_iters_phase1: usize,
    pub max_iters_phase2: usize,
    /// Upper bound on lambda; the exit from the field's domain (or the unit
    /// box) when unset. Fields without a domain are traced over
    /// `[0, lambda_max]` when it is set.
    pub lambda_max: Option<f64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            eps1: 0.01,
            eps2: 1e-4,
            normal_offset: 0.005,
            max_iters_phase1: 200,
            max_iters_phase2: 50,
            lambda_max: None,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Config(m.into()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) || !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("alpha and beta must be in (0, 1]");
        }
        if !(self.eps2 > 0.0 && self.eps2 < self.eps1) {
            return bad("need 0 < eps2 < eps1");
        }
        if !(self.normal_offset >= 0.0) {
            return bad("normal offset must be non-negative");
        }
        if self.max_iters_phase1 == 0 || self.max_iters_phase2 == 0 {
            return bad("iteration caps must be positive");
        }
        if let Some(l) = self.lambda_max {
            if !(l > 0.0) {
                return bad("lambda_max must be positive");
            }
        }
        Ok(())
    }

    /// Default restart distance after a root, `2 eps1`.
    pub fn root_skip(&self) -> f64 {
        2.0 * self.eps1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<const D: usize> {
    pub lambda: f64,
    pub point: Point<D>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    /// The ray does not meet the domain.
    NoEntry,
    /// Passed `lambda_max`.
    Escaped,
    Phase1Cap,
    Phase2Cap,
    /// `|r . grad f|` vanished during refinement.
    Grazing,
    /// Refinement stepped behind the ray origin.
    Backtracked,
    /// Refinement steps kept landing outside the `eps1` shell.
    LeftShell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Miss {
    pub reason: MissReason,
    /// Lambda where refinement started (or where tracing stopped).
    pub lambda: f64,
}

pub type TraceOutcome<const D: usize> = Result<Hit<D>, Miss>;

/// Lambda interval of `ray` inside the field's domain.
fn span<const D: usize, F: DistanceField<D> + ?Sized>(f: &F, ray: &Ray<D>, cfg: &TraceConfig) -> Option<(f64, f64)> {
    let (t0, t1) = match (f.domain(), cfg.lambda_max) {
        (None, Some(l)) => (0.0, l),
        (bx, _) => bx.unwrap_or_else(unit_box).ray_interval(&ray.origin, &ray.dir)?,
    };
    let hi = cfg.lambda_max.unwrap_or(t1);
    let lo = t0.max(0.0);
    (lo <= hi).then_some((lo, hi))
}

fn trace_from<const D: usize, F: DistanceField<D> + ?Sized>(
    f: &F,
    ray: &Ray<D>,
    start: f64,
    lambda_max: f64,
    cfg: &TraceConfig,
) -> TraceOutcome<D> {
    let miss = |reason, lambda| Err(Miss { reason, lambda });
    let mut lambda = start;
    let mut v = f.eval(&ray.at(lambda));
    let mut it = 0;
    while v > cfg.eps1 {
        if it == cfg.max_iters_phase1 {
            return miss(MissReason::Phase1Cap, lambda);
        }
        lambda += cfg.alpha * v;
        if lambda > lambda_max {
            return miss(MissReason::Escaped, lambda);
        }
        v = f.eval(&ray.at(lambda));
        it += 1;
    }
    let refine_start = lambda;
    let mut it = 0;
    while v > cfg.eps2 {
        if it == cfg.max_iters_phase2 {
            return miss(MissReason::Phase2Cap, refine_start);
        }
        let (_, g) = f.eval_grad(&ray.at(lambda));
        let slope = ray.dir.dot(&g);
        if slope.abs() < GRAZING_SLOPE {
            log::debug!("grazing ray at lambda {lambda}");
            return miss(MissReason::Grazing, refine_start);
        }
        // halve steps that would leave the eps1 shell
        let mut step = cfg.beta * -v / slope;
        let mut halvings = 0;
        let next = loop {
            let next = lambda + step;
            if next < 0.0 {
                return miss(MissReason::Backtracked, refine_start);
            }
            if next > lambda_max {
                return miss(MissReason::Escaped, next);
            }
            let nv = f.eval(&ray.at(next));
            if nv <= cfg.eps1 {
                break (next, nv);
            }
            if halvings == MAX_HALVINGS {
                return miss(MissReason::LeftShell, refine_start);
            }
            step *= 0.5;
            halvings += 1;
        };
        (lambda, v) = next;
        it += 1;
    }
    Ok(Hit {
        lambda,
        point: ray.at(lambda),
        value: v,
    })
}

/// First root along the ray. Every hit satisfies `f(point) <= eps2`.
pub fn trace_ray<const D: usize, F: DistanceField<D> + ?Sized>(f: &F, ray: &Ray<D>, cfg: &TraceConfig) -> TraceOutcome<D> {
    match span(f, ray, cfg) {
        Some((lo, hi)) => trace_from(f, ray, lo, hi, cfg),
        None => Err(Miss {
            reason: MissReason::NoEntry,
            lambda: 0.0,
        }),
    }
}

/// Every root along the ray, strictly increasing and at least `root_skip`
/// apart.
///
/// After a root (or a failed refinement) tracing resumes `root_skip`
/// further on, then walks ahead in steps of `eps1 / 2` while still inside
/// the `eps1` shell.
pub fn trace_all_roots<const D: usize, F: DistanceField<D> + ?Sized>(
    f: &F,
    ray: &Ray<D>,
    cfg: &TraceConfig,
    root_skip: f64,
) -> Vec<Hit<D>> {
    let Some((lo, hi)) = span(f, ray, cfg) else {
        return vec![];
    };
    let skip = root_skip.max(f64::EPSILON);
    let mut hits: Vec<Hit<D>> = vec![];
    let mut lambda = lo;
    while lambda <= hi {
        let resume = match trace_from(f, ray, lambda, hi, cfg) {
            Ok(h) => {
                if hits.last().is_none_or(|last| h.lambda >= last.lambda + skip) {
                    hits.push(h);
                }
                h.lambda.max(lambda) + skip
            }
            Err(Miss {
                reason: MissReason::Phase2Cap | MissReason::Grazing | MissReason::Backtracked | MissReason::LeftShell,
                lambda: at,
            }) => at.max(lambda) + skip,
            Err(_) => break,
        };
        // walk out of the shell finely enough not to jump over a gap
        // before the next one
        lambda = resume;
        while lambda <= hi && f.eval(&ray.at(lambda)) <= cfg.eps1 {
            lambda += 0.5 * cfg.eps1;
        }
    }
    hits
}

/// Unit normal from the gradient `normal_offset` behind the hit, flipped
/// to face the ray origin. `None` where the gradient vanishes.
pub fn surface_normal<const D: usize, F: DistanceField<D> + ?Sized>(
    f: &F,
    hit: &Hit<D>,
    ray: &Ray<D>,
    cfg: &TraceConfig,
) -> Option<Vector<D>> {
    let g = f.grad(&(hit.point - ray.dir * cfg.normal_offset));
    let n = g.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return None;
    }
    let g = g / n;
    Some(if g.dot(&ray.dir) > 0.0 { -g } else { g })
}

/// All `y` with `f(x, y) = 0`: roots traced up and down the last axis from
/// `y = 0`, merged, sorted and deduplicated within `root_skip`.
pub fn regress<const D: usize, F: DistanceField<D> + ?Sized>(
    f: &F,
    x: &[f64],
    cfg: &TraceConfig,
    root_skip: f64,
) -> Result<Vec<f64>, TraceError> {
    if x.len() + 1 != D {
        return Err(TraceError::InputDim {
            expected: D - 1,
            got: x.len(),
        });
    }
    cfg.validate()?;
    let origin = Point::<D>::from_fn(|i, _| if i < D - 1 { x[i] } else { 0.0 });
    let up = Vector::<D>::from_fn(|i, _| if i == D - 1 { 1.0 } else { 0.0 });
    let mut ys: Vec<f64> = vec![];
    for sign in [1.0, -1.0] {
        let ray = Ray::new(origin, up * sign)?;
        ys.extend(trace_all_roots(f, &ray, cfg, root_skip).iter().map(|h| sign * h.lambda));
    }
    ys.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = vec![];
    for y in ys {
        if out.last().is_none_or(|&l| y - l >= root_skip) {
            out.push(y);
        }
    }
    Ok(out)
}
