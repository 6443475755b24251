use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_samples, split_indices, DataError, SampleSet, SamplingPolicy};
use crate::geom::{seeded_rng, unit_box, Point, PointCloud, Polyline, SeededRng, Surface};

/// Maximum distance between a curve and its polyline.
pub const CHORD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Linear,
    Parabola,
    Sinusoid,
    Spiral,
}

impl CurveKind {
    pub const ALL: [CurveKind; 4] = [Self::Linear, Self::Parabola, Self::Sinusoid, Self::Spiral];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Parabola => "parabola",
            Self::Sinusoid => "sinusoid",
            Self::Spiral => "spiral",
        }
    }
}

/// Concrete curve parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CurveShape {
    /// `y = slope x + intercept`
    Linear { slope: f64, intercept: f64 },
    /// `y = a x^2 + b x + c`
    Parabola { a: f64, b: f64, c: f64 },
    /// `y = amplitude sin(2 pi frequency x + phase) + offset`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
    /// Archimedean `r = a + b theta` for `theta` in `[0, theta_max]`,
    /// rotated and centered.
    Spiral {
        center: [f64; 2],
        a: f64,
        b: f64,
        rotation: f64,
        theta_max: f64,
    },
}

impl CurveShape {
    pub fn kind(&self) -> CurveKind {
        match self {
            Self::Linear { .. } => CurveKind::Linear,
            Self::Parabola { .. } => CurveKind::Parabola,
            Self::Sinusoid { .. } => CurveKind::Sinusoid,
            Self::Spiral { .. } => CurveKind::Spiral,
        }
    }

    /// `y(x)` for function graphs; `None` for spirals.
    pub fn y_at(&self, x: f64) -> Option<f64> {
        match *self {
            Self::Linear { slope, intercept } => Some(slope * x + intercept),
            Self::Parabola { a, b, c } => Some((a * x + b) * x + c),
            Self::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => Some(amplitude * (2.0 * PI * frequency * x + phase).sin() + offset),
            Self::Spiral { .. } => None,
        }
    }

    /// Parameter interval: `x` for graphs, `theta` for spirals.
    pub fn param_range(&self) -> (f64, f64) {
        match *self {
            Self::Spiral { theta_max, .. } => (0.0, theta_max),
            _ => (-0.5, 0.5),
        }
    }

    pub fn point(&self, t: f64) -> Point<2> {
        match *self {
            Self::Spiral {
                center,
                a,
                b,
                rotation,
                ..
            } => {
                let r = a + b * t;
                let phi = t + rotation;
                Point::<2>::new(center[0] + r * phi.cos(), center[1] + r * phi.sin())
            }
            _ => Point::<2>::new(t, self.y_at(t).expect("graph")),
        }
    }
}

/// A curve with its dense polyline and the parameter of every vertex.
#[derive(Debug, Clone)]
pub struct Curve2D {
    pub shape: CurveShape,
    polyline: Polyline<2>,
    params: Vec<f64>,
}

impl Curve2D {
    pub fn new(shape: CurveShape) -> Self {
        let params = adaptive_params(&shape);
        let vertices = params.iter().map(|&t| shape.point(t)).collect();
        let polyline = Polyline::chain(vertices).expect("finite curve");
        Self {
            shape,
            polyline,
            params,
        }
    }

    pub fn polyline(&self) -> &Polyline<2> {
        &self.polyline
    }

    /// Exact curve points spaced roughly uniformly in arc length.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<Point<2>> {
        let total = self.polyline.measure();
        (0..n)
            .map(|_| {
                let (seg, t) = self.polyline.locate(rng.random::<f64>() * total);
                let u = self.params[seg] + t * (self.params[seg + 1] - self.params[seg]);
                self.shape.point(u)
            })
            .collect()
    }

    fn inside(&self, margin: f64) -> bool {
        let lim = 0.5 - margin;
        self.polyline
            .vertices()
            .iter()
            .all(|v| v.y.abs() <= lim && v.x.abs() <= 0.5)
    }
}

fn chord_error(shape: &CurveShape, t0: f64, t1: f64) -> f64 {
    let (a, b) = (shape.point(t0), shape.point(t1));
    [0.25, 0.5, 0.75]
        .iter()
        .map(|f| {
            let p = shape.point(t0 + f * (t1 - t0));
            (p - crate::geom::closest_on_segment(&p, &a, &b)).norm()
        })
        .fold(0.0, f64::max)
}

/// Parameters whose chords stay within half the tolerance of the curve.
fn adaptive_params(shape: &CurveShape) -> Vec<f64> {
    let (lo, hi) = shape.param_range();
    let mut out = vec![lo];
    let mut stack: Vec<(f64, f64, u32)> = (0..64)
        .rev()
        .map(|i| (lo + (hi - lo) * i as f64 / 64.0, lo + (hi - lo) * (i + 1) as f64 / 64.0, 0))
        .collect();
    while let Some((t0, t1, depth)) = stack.pop() {
        if depth < 40 && chord_error(shape, t0, t1) > 0.5 * CHORD_TOLERANCE {
            let m = 0.5 * (t0 + t1);
            stack.push((m, t1, depth + 1));
            stack.push((t0, m, depth + 1));
        } else {
            out.push(t1);
        }
    }
    out
}

/// Sampling intervals of the curve coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveRanges {
    pub slope: [f64; 2],
    pub intercept: [f64; 2],
    pub quadratic: [f64; 2],
    pub linear: [f64; 2],
    pub constant: [f64; 2],
    pub amplitude: [f64; 2],
    pub frequency: [f64; 2],
    pub offset: [f64; 2],
    pub spiral_start: [f64; 2],
    /// Radial gap between consecutive spiral arms, `2 pi b`.
    pub spiral_gap: [f64; 2],
    pub spiral_center: [f64; 2],
    pub spiral_theta_max: f64,
    /// Graphs must keep `|y| <= 0.5 - margin`.
    pub margin: f64,
}

impl Default for CurveRanges {
    fn default() -> Self {
        Self {
            slope: [-0.6, 0.6],
            intercept: [-0.15, 0.15],
            quadratic: [-1.5, 1.5],
            linear: [-0.3, 0.3],
            constant: [-0.2, 0.2],
            amplitude: [0.05, 0.25],
            frequency: [0.5, 2.0],
            offset: [-0.15, 0.15],
            spiral_start: [0.0, 0.05],
            spiral_gap: [0.15, 0.25],
            spiral_center: [-0.05, 0.05],
            spiral_theta_max: 3.0 * PI,
            margin: 0.05,
        }
    }
}

fn draw(rng: &mut SeededRng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

impl CurveRanges {
    fn validate(&self) -> Result<(), DataError> {
        let all = [
            self.slope,
            self.intercept,
            self.quadratic,
            self.linear,
            self.constant,
            self.amplitude,
            self.frequency,
            self.offset,
            self.spiral_start,
            self.spiral_gap,
            self.spiral_center,
        ];
        if all.iter().any(|r| !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite()) {
            return Err(DataError::Curve("every range needs finite min <= max".into()));
        }
        if !(self.spiral_theta_max > 0.0) || !(0.0..0.5).contains(&self.margin) {
            return Err(DataError::Curve("bad spiral length or margin".into()));
        }
        if self.spiral_gap[0] <= 0.0 {
            return Err(DataError::Curve("spiral gap must be positive".into()));
        }
        Ok(())
    }

    pub fn draw(&self, kind: CurveKind, rng: &mut SeededRng) -> CurveShape {
        match kind {
            CurveKind::Linear => CurveShape::Linear {
                slope: draw(rng, self.slope),
                intercept: draw(rng, self.intercept),
            },
            CurveKind::Parabola => CurveShape::Parabola {
                a: draw(rng, self.quadratic),
                b: draw(rng, self.linear),
                c: draw(rng, self.constant),
            },
            CurveKind::Sinusoid => CurveShape::Sinusoid {
                amplitude: draw(rng, self.amplitude),
                frequency: draw(rng, self.frequency),
                phase: rng.random_range(0.0..2.0 * PI),
                offset: draw(rng, self.offset),
            },
            CurveKind::Spiral => CurveShape::Spiral {
                center: [draw(rng, self.spiral_center), draw(rng, self.spiral_center)],
                a: draw(rng, self.spiral_start),
                b: draw(rng, self.spiral_gap) / (2.0 * PI),
                rotation: rng.random_range(0.0..2.0 * PI),
                theta_max: self.spiral_theta_max,
            },
        }
    }
}

/// One curve family of the 2D corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve2DSpec {
    pub kind: CurveKind,
    #[serde(default)]
    pub ranges: CurveRanges,
    /// Training pairs per curve.
    pub samples_per_curve: usize,
    /// Points in each curve's conditioning input.
    pub sparse_k: usize,
    #[serde(default)]
    pub policy: SamplingPolicy,
    pub test_fraction: f64,
}

impl Curve2DSpec {
    pub fn new(kind: CurveKind) -> Self {
        Self {
            kind,
            ranges: CurveRanges::default(),
            samples_per_curve: 4096,
            sparse_k: 200,
            policy: SamplingPolicy::default(),
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveSample {
    pub curve: Curve2D,
    pub set: SampleSet<2>,
}

#[derive(Debug, Clone)]
pub struct CurveDataset {
    pub train: Vec<CurveSample>,
    pub test: Vec<CurveSample>,
}

const MAX_ATTEMPTS: usize = 1000;

fn curve_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64 + 1)
}

/// `count` curves of one family with sparse inputs and UDF samples, split
/// into train and test.
pub fn make_curve_dataset(spec: &Curve2DSpec, count: usize, seed: u64) -> Result<CurveDataset, DataError> {
    spec.ranges.validate()?;
    spec.policy.validate()?;
    if !(0.0..=1.0).contains(&spec.test_fraction) {
        return Err(DataError::Curve("test fraction must be in [0, 1]".into()));
    }
    if spec.sparse_k == 0 {
        return Err(DataError::Curve("sparse input needs at least one point".into()));
    }
    let bx = unit_box::<2>();
    let samples: Vec<CurveSample> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(curve_seed(seed, i));
            let mut attempt = 0;
            let curve = loop {
                let c = Curve2D::new(spec.ranges.draw(spec.kind, &mut rng));
                let ok = match c.shape.kind() {
                    CurveKind::Spiral => c.polyline().vertices().iter().all(|v| bx.contains(v)),
                    _ => c.inside(spec.ranges.margin),
                };
                if ok {
                    break c;
                }
                attempt += 1;
                if attempt == MAX_ATTEMPTS {
                    return Err(DataError::CurveRejected(MAX_ATTEMPTS));
                }
            };
            let input = PointCloud::new(curve.sample(spec.sparse_k, &mut rng));
            let (points, gt, origin) = make_samples(curve.polyline(), spec.samples_per_curve, &spec.policy, rng.random())?;
            Ok(CurveSample {
                set: SampleSet {
                    id: format!("{}_{i:04}", spec.kind.name()),
                    input,
                    points,
                    gt,
                    origin,
                },
                curve,
            })
        })
        .collect::<Result<_, DataError>>()?;
    let (train_idx, test_idx) = split_indices(count, spec.test_fraction, seed);
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
    Ok(CurveDataset {
        train: pick(&train_idx),
        test: pick(&test_idx),
    })
}
