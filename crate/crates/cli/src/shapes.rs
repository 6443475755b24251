//! Surfaces named on the command line as `kind:key=value,key=value`.
//!
//! 3D: `sphere`, `torus`, `plane`, `box`, `half-sphere`, `open-cylinder`,
//! `plane-with-hole`, `mesh:path=...`. 2D: `circle`, `square`, `segment`,
//! `linear`, `parabola`, `sinusoid`, `spiral`. `cloud:path=...[,dim=2]`
//! treats a point cloud file as a surface in either dimension.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::str::FromStr;

use ndf::data::{Curve2D, CurveShape};
use ndf::geom::io::{read_cloud, read_mesh};
use ndf::geom::{normalize_to_unit_box, BoxSurface, PlanePatch, PointSet, Polyline, Sphere, Surface, Torus, TriMesh};
use ndf::{Point, Vector};
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub kind: String,
    pub params: BTreeMap<String, String>,
}

impl FromStr for ShapeSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = BTreeMap::new();
        for kv in rest.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| shape_err(s, format!("`{kv}` is not key=value")))?;
            if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(shape_err(s, format!("`{k}` given twice")));
            }
        }
        let spec = Self {
            kind: kind.trim().to_string(),
            params,
        };
        spec.dim()?;
        Ok(spec)
    }
}

fn shape_err(spec: impl ToString, message: impl Into<String>) -> CliError {
    CliError::Shape {
        spec: spec.to_string(),
        message: message.into(),
    }
}

const SHAPES_3D: &[&str] = &[
    "sphere",
    "torus",
    "plane",
    "box",
    "half-sphere",
    "open-cylinder",
    "plane-with-hole",
    "mesh",
];
const SHAPES_2D: &[&str] = &["circle", "square", "segment", "linear", "parabola", "sinusoid", "spiral"];

impl std::fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.kind)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// Typed access to the parameters, rejecting keys a kind does not know.
struct Params<'a> {
    spec: &'a ShapeSpec,
}

impl<'a> Params<'a> {
    fn new(spec: &'a ShapeSpec, allowed: &[&str]) -> Result<Self, CliError> {
        if let Some(k) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(shape_err(spec, format!("unknown parameter `{k}` (expected one of {})", allowed.join(", "))));
        }
        Ok(Self { spec })
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.spec.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| shape_err(self.spec, format!("`{key}` must be a number, got `{v}`"))),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(shape_err(self.spec, format!("`{key}` must be positive")))
        }
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.spec.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| shape_err(self.spec, format!("`{key}` must be a positive integer, got `{v}`"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.spec.params.get(key).map(String::as_str) {
            None => Ok(default),
            Some("1" | "true") => Ok(true),
            Some("0" | "false") => Ok(false),
            Some(v) => Err(shape_err(self.spec, format!("`{key}` must be true or false, got `{v}`"))),
        }
    }

    fn path(&self) -> Result<&'a Path, CliError> {
        self.spec
            .params
            .get("path")
            .map(Path::new)
            .ok_or_else(|| shape_err(self.spec, "`path` is required"))
    }

    fn center3(&self) -> Result<Point<3>, CliError> {
        Ok(Point::<3>::new(self.f64("cx", 0.0)?, self.f64("cy", 0.0)?, self.f64("cz", 0.0)?))
    }

    fn center2(&self) -> Result<Point<2>, CliError> {
        Ok(Point::<2>::new(self.f64("cx", 0.0)?, self.f64("cy", 0.0)?))
    }
}

const C3: [&str; 3] = ["cx", "cy", "cz"];
const C2: [&str; 2] = ["cx", "cy"];

fn keys(extra: &[&'static str], center: &[&'static str]) -> Vec<&'static str> {
    extra.iter().chain(center).copied().collect()
}

impl ShapeSpec {
    pub fn dim(&self) -> Result<usize, CliError> {
        match self.kind.as_str() {
            "cloud" => match self.params.get("dim").map(String::as_str) {
                None | Some("3") => Ok(3),
                Some("2") => Ok(2),
                Some(d) => Err(shape_err(self, format!("dim must be 2 or 3, got `{d}`"))),
            },
            k if SHAPES_3D.contains(&k) => Ok(3),
            k if SHAPES_2D.contains(&k) => Ok(2),
            k => Err(shape_err(
                self,
                format!("unknown kind `{k}` (3D: {}; 2D: {}; or cloud)", SHAPES_3D.join(", "), SHAPES_2D.join(", ")),
            )),
        }
    }

    /// Recorded in dataset metadata.
    pub fn to_json(&self) -> Value {
        json!({ "kind": self.kind, "params": self.params })
    }

    fn cloud<const D: usize>(&self) -> Result<Box<dyn Surface<D>>, CliError> {
        let p = Params::new(self, &["path", "dim"])?;
        let pc = read_cloud::<D>(p.path()?)?;
        if pc.is_empty() {
            return Err(shape_err(self, "point cloud is empty"));
        }
        Ok(Box::new(PointSet::new(pc.points)))
    }

    pub fn surface3(&self) -> Result<Box<dyn Surface<3>>, CliError> {
        if self.dim()? != 3 {
            return Err(shape_err(self, "expected a 3D shape"));
        }
        Ok(match self.kind.as_str() {
            "cloud" => return self.cloud(),
            "sphere" => {
                let p = Params::new(self, &keys(&["r"], &C3))?;
                Box::new(Sphere::<3>::new(p.center3()?, p.positive("r", 0.4)?))
            }
            "torus" => {
                let p = Params::new(self, &keys(&["major", "minor"], &C3))?;
                Box::new(Torus::new(p.center3()?, p.positive("major", 0.25)?, p.positive("minor", 0.08)?))
            }
            "plane" => {
                let p = Params::new(self, &keys(&["hx", "hy"], &C3))?;
                Box::new(PlanePatch::new(p.center3()?, p.positive("hx", 0.4)?, p.positive("hy", 0.4)?))
            }
            "box" => {
                let p = Params::new(self, &keys(&["hx", "hy", "hz"], &C3))?;
                let half = Vector::<3>::new(p.positive("hx", 0.4)?, p.positive("hy", 0.4)?, p.positive("hz", 0.4)?);
                Box::new(BoxSurface::<3>::new(p.center3()?, half))
            }
            "half-sphere" => {
                let p = Params::new(self, &keys(&["r", "rings", "segments"], &C3))?;
                Box::new(TriMesh::half_sphere(
                    p.center3()?,
                    p.positive("r", 0.4)?,
                    p.count("rings", 24)?,
                    p.count("segments", 48)?,
                ))
            }
            "open-cylinder" => {
                let p = Params::new(self, &keys(&["r", "h", "rings", "segments"], &C3))?;
                Box::new(TriMesh::open_cylinder(
                    p.center3()?,
                    p.positive("r", 0.3)?,
                    p.positive("h", 0.8)?,
                    p.count("rings", 16)?,
                    p.count("segments", 48)?,
                ))
            }
            "plane-with-hole" => {
                let p = Params::new(self, &keys(&["size", "hole", "cells"], &C3))?;
                Box::new(TriMesh::plane_with_hole(
                    p.center3()?,
                    p.positive("size", 0.8)?,
                    p.positive("hole", 0.2)?,
                    p.count("cells", 32)?,
                ))
            }
            "mesh" => {
                let p = Params::new(self, &["path", "normalize"])?;
                let mesh = read_mesh(p.path()?)?;
                if p.flag("normalize", true)? {
                    Box::new(normalize_to_unit_box(&mesh)?.0)
                } else {
                    Box::new(mesh)
                }
            }
            _ => unreachable!("dim() accepted the kind"),
        })
    }

    pub fn surface2(&self) -> Result<Box<dyn Surface<2>>, CliError> {
        if self.dim()? != 2 {
            return Err(shape_err(self, "expected a 2D shape"));
        }
        let curve = |shape: CurveShape| -> Box<dyn Surface<2>> { Box::new(Curve2D::new(shape).polyline().clone()) };
        Ok(match self.kind.as_str() {
            "cloud" => return self.cloud(),
            "circle" => {
                let p = Params::new(self, &keys(&["r"], &C2))?;
                Box::new(Sphere::<2>::new(p.center2()?, p.positive("r", 0.3)?))
            }
            "square" => {
                let p = Params::new(self, &keys(&["hx", "hy"], &C2))?;
                let half = Vector::<2>::new(p.positive("hx", 0.3)?, p.positive("hy", 0.3)?);
                Box::new(BoxSurface::<2>::new(p.center2()?, half))
            }
            "segment" => {
                let p = Params::new(self, &["x0", "y0", "x1", "y1"])?;
                let a = Point::<2>::new(p.f64("x0", -0.4)?, p.f64("y0", 0.0)?);
                let b = Point::<2>::new(p.f64("x1", 0.4)?, p.f64("y1", 0.0)?);
                if a == b {
                    return Err(shape_err(self, "segment end points coincide"));
                }
                Box::new(Polyline::chain(vec![a, b])?)
            }
            "linear" => {
                let p = Params::new(self, &["slope", "intercept"])?;
                curve(CurveShape::Linear {
                    slope: p.f64("slope", 0.5)?,
                    intercept: p.f64("intercept", 0.0)?,
                })
            }
            "parabola" => {
                let p = Params::new(self, &["a", "b", "c"])?;
                curve(CurveShape::Parabola {
                    a: p.f64("a", 1.0)?,
                    b: p.f64("b", 0.0)?,
                    c: p.f64("c", -0.1)?,
                })
            }
            "sinusoid" => {
                let p = Params::new(self, &["amplitude", "frequency", "phase", "offset"])?;
                curve(CurveShape::Sinusoid {
                    amplitude: p.f64("amplitude", 0.2)?,
                    frequency: p.f64("frequency", 1.0)?,
                    phase: p.f64("phase", 0.0)?,
                    offset: p.f64("offset", 0.0)?,
                })
            }
            "spiral" => {
                let p = Params::new(self, &keys(&["a", "b", "rotation", "theta-max"], &C2))?;
                let c = p.center2()?;
                curve(CurveShape::Spiral {
                    center: [c.x, c.y],
                    a: p.f64("a", 0.02)?,
                    b: p.positive("b", 0.2 / (2.0 * PI))?,
                    rotation: p.f64("rotation", 0.0)?,
                    theta_max: p.positive("theta-max", 3.0 * PI)?,
                })
            }
            _ => unreachable!("dim() accepted the kind"),
        })
    }
}

/// `arg` names an existing point-cloud or mesh file, or is a shape spec.
pub fn shape_or_file(arg: &str) -> Result<ShapeSpec, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let kind = match ext.as_str() {
            "obj" | "off" => "mesh",
            "ply" | "xyz" => "cloud",
            _ => return Err(shape_err(arg, "unsupported file extension (expected obj, off, ply or xyz)")),
        };
        return Ok(ShapeSpec {
            kind: kind.into(),
            params: BTreeMap::from([("path".to_string(), arg.to_string())]),
        });
    }
    arg.parse()
}
