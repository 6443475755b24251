use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{surface_normal, trace_ray, MissReason, Ray, TraceConfig, TraceError};
use crate::field::DistanceField;
use crate::geom::{Point, Vector};

/// Pinhole camera. `fov_y` is the vertical field of view in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 1.5],
            look_at: [0.0, 0.0, 0.0],
            up: [0.0, 1.0, 0.0],
            fov_y: 0.8,
            width: 256,
            height: 256,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Camera(m.into()));
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        if !(self.fov_y > 0.0 && self.fov_y < std::f64::consts::PI) {
            return bad("field of view must be in (0, pi)");
        }
        let fwd = Vector::<3>::from(self.look_at) - Vector::<3>::from(self.position);
        let up = Vector::<3>::from(self.up);
        if !(fwd.norm() > 0.0) || !(up.norm() > 0.0) {
            return bad("view direction and up vector must be non-zero");
        }
        if fwd.normalize().cross(&up.normalize()).norm() < 1e-9 {
            return bad("up vector is collinear with the view direction");
        }
        Ok(())
    }

    /// Orthonormal `(forward, right, up)` frame.
    fn basis(&self) -> (Vector<3>, Vector<3>, Vector<3>) {
        let fwd = (Vector::<3>::from(self.look_at) - Vector::<3>::from(self.position)).normalize();
        let right = fwd.cross(&Vector::<3>::from(self.up)).normalize();
        (fwd, right, right.cross(&fwd))
    }

    /// Ray through the center of pixel `(px, py)`; row 0 is the top.
    pub fn ray(&self, px: usize, py: usize) -> Ray<3> {
        let (fwd, right, up) = self.basis();
        let half = (0.5 * self.fov_y).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = ((px as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * half * aspect;
        let sy = (1.0 - (py as f64 + 0.5) / self.height as f64 * 2.0) * half;
        Ray::new(Point::<3>::from(self.position), fwd + right * sx + up * sy).expect("valid camera")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderStats {
    pub hits: usize,
    pub escaped: usize,
    pub capped: usize,
    pub grazing: usize,
    /// Refinement stepped behind the origin or out of the shell.
    pub diverged: usize,
    pub undefined_normals: usize,
}

/// Per-pixel results in row-major order, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    /// Ray parameter of the hit; infinite for background.
    pub depth: Vec<f64>,
    pub normals: Vec<Option<Vector<3>>>,
    /// Headlight Lambertian term `max(0, n . -r)`; 0 for background.
    pub shaded: Vec<f64>,
    pub stats: RenderStats,
}

enum Pixel {
    Hit(f64, Option<Vector<3>>, f64),
    Miss(MissReason),
}

pub fn render<F: DistanceField<3> + ?Sized>(f: &F, cam: &Camera, cfg: &TraceConfig) -> Result<RenderOutput, TraceError> {
    cam.validate()?;
    cfg.validate()?;
    let (w, h) = (cam.width, cam.height);
    let pixels: Vec<Pixel> = (0..w * h)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let ray = cam.ray(i % w, i / w);
            match trace_ray(f, &ray, cfg) {
                Ok(hit) => {
                    let n = surface_normal(f, &hit, &ray, cfg);
                    let shade = n.map_or(0.0, |n| n.dot(&-ray.dir).max(0.0));
                    Pixel::Hit(hit.lambda, n, shade)
                }
                Err(m) => Pixel::Miss(m.reason),
            }
        })
        .collect();
    let mut out = RenderOutput {
        width: w,
        height: h,
        depth: Vec::with_capacity(w * h),
        normals: Vec::with_capacity(w * h),
        shaded: Vec::with_capacity(w * h),
        stats: RenderStats::default(),
    };
    for p in pixels {
        match p {
            Pixel::Hit(d, n, s) => {
                out.stats.hits += 1;
                if n.is_none() {
                    out.stats.undefined_normals += 1;
                }
                out.depth.push(d);
                out.normals.push(n);
                out.shaded.push(s);
            }
            Pixel::Miss(reason) => {
                match reason {
                    MissReason::NoEntry | MissReason::Escaped => out.stats.escaped += 1,
                    MissReason::Phase1Cap | MissReason::Phase2Cap => out.stats.capped += 1,
                    MissReason::Grazing => out.stats.grazing += 1,
                    MissReason::Backtracked | MissReason::LeftShell => out.stats.diverged += 1,
                }
                out.depth.push(f64::INFINITY);
                out.normals.push(None);
                out.shaded.push(0.0);
            }
        }
    }
    Ok(out)
}

fn to_byte(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary PPM of the shading term in gray.
pub fn encode_shaded_ppm(img: &RenderOutput) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for s in &img.shaded {
        let b = to_byte(*s);
        out.extend_from_slice(&[b, b, b]);
    }
    out
}

/// Binary PPM of normals mapped by `n * 0.5 + 0.5`; background black.
pub fn encode_normal_ppm(img: &RenderOutput) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for n in &img.normals {
        match n {
            Some(n) => out.extend(n.iter().map(|c| to_byte(c * 0.5 + 0.5))),
            None => out.extend_from_slice(&[0, 0, 0]),
        }
    }
    out
}

/// 16-bit binary PGM: hit depths mapped linearly from their minimum to
/// their maximum onto 1..=65535, background 0.
pub fn encode_depth_pgm(img: &RenderOutput) -> Vec<u8> {
    let finite = img.depth.iter().filter(|d| d.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = finite.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for d in &img.depth {
        let v: u16 = if !d.is_finite() {
            0
        } else if hi > lo {
            1 + ((d - lo) / (hi - lo) * 65534.0).round() as u16
        } else {
            65535
        };
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::exact_field;
    use crate::geom::Sphere;

    fn small_cam() -> Camera {
        Camera {
            width: 48,
            height: 32,
            ..Default::default()
        }
    }

    #[test]
    fn camera_validation() {
        assert!(Camera::default().validate().is_ok());
        let c = Camera {
            up: [0.0, 0.0, 1.0],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = Camera {
            fov_y: 3.2,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn center_pixel_looks_forward() {
        let c = Camera {
            width: 3,
            height: 3,
            ..Default::default()
        };
        let r = c.ray(1, 1);
        assert!((r.dir - Vector::<3>::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        // row 0 is the top of the image
        assert!(c.ray(1, 0).dir.y > 0.0);
        assert!(c.ray(2, 1).dir.x > 0.0);
    }

    #[test]
    fn constant_field_renders_background() {
        struct Flat;
        impl DistanceField<3> for Flat {
            fn eval(&self, _: &Point<3>) -> f64 {
                0.1
            }
            fn eval_grad(&self, _: &Point<3>) -> (f64, Vector<3>) {
                (0.1, Vector::<3>::zeros())
            }
        }
        let img = render(&Flat, &small_cam(), &TraceConfig::default()).unwrap();
        assert_eq!(img.stats.hits, 0);
        assert!(img.depth.iter().all(|d| d.is_infinite()));
        assert!(encode_depth_pgm(&img)[15..].iter().all(|b| *b == 0));
    }

    #[test]
    fn images_are_deterministic() {
        let f = exact_field(Sphere::<3>::new(Point::zeros(), 0.3)).unwrap();
        let a = render(&f, &small_cam(), &TraceConfig::default()).unwrap();
        let b = render(&f, &small_cam(), &TraceConfig::default()).unwrap();
        assert_eq!(encode_depth_pgm(&a), encode_depth_pgm(&b));
        assert_eq!(encode_normal_ppm(&a), encode_normal_ppm(&b));
        assert_eq!(encode_shaded_ppm(&a), encode_shaded_ppm(&b));
        assert!(a.stats.hits > 0);
        let header = b"P6\n48 32\n255\n";
        assert_eq!(&encode_shaded_ppm(&a)[..header.len()], header);
        assert_eq!(encode_shaded_ppm(&a).len(), header.len() + 48 * 32 * 3);
    }
}
