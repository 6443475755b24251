//! Dataset directory: one subdirectory per shape holding `input.ply`,
//! `samples.bin` and `meta.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, SampleSet};
use crate::geom::io::{read_ply, write_ply};
use crate::geom::Point;

pub const SAMPLES_MAGIC: &[u8; 4] = b"NDFS";
pub const SAMPLES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeMeta {
    pub id: String,
    pub dim: usize,
    pub seed: u64,
    /// `"train"` or `"test"`.
    pub split: String,
    /// Whatever produced the shape (surface description, curve parameters).
    pub spec: serde_json::Value,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> DataError {
    DataError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn encode_samples<const D: usize>(points: &[Point<D>], gt: &[f64]) -> Vec<u8> {
    assert_eq!(points.len(), gt.len());
    let mut out = Vec::with_capacity(16 + points.len() * (D + 1) * 4);
    out.extend_from_slice(SAMPLES_MAGIC);
    out.extend_from_slice(&SAMPLES_VERSION.to_le_bytes());
    out.extend_from_slice(&(points.len() as u64).to_le_bytes());
    for (p, g) in points.iter().zip(gt) {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        out.extend_from_slice(&(*g as f32).to_le_bytes());
    }
    out
}

pub fn write_samples<const D: usize>(path: &Path, points: &[Point<D>], gt: &[f64]) -> Result<(), DataError> {
    fs::write(path, encode_samples(points, gt)).map_err(io_err(path))
}

pub fn read_samples<const D: usize>(path: &Path) -> Result<(Vec<Point<D>>, Vec<f64>), DataError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 16 || &bytes[..4] != SAMPLES_MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SAMPLES_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let record = (D + 1) * 4;
    if bytes.len() - 16 != count * record {
        return Err(format_err(path, format!("expected {count} records of {} values", D + 1)));
    }
    let mut points = Vec::with_capacity(count);
    let mut gt = Vec::with_capacity(count);
    for rec in bytes[16..].chunks_exact(record) {
        let v: Vec<f64> = rec
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        points.push(Point::<D>::from_fn(|i, _| v[i]));
        gt.push(v[D]);
    }
    Ok((points, gt))
}

/// Writes each shape into `dir/<id>/`. Existing files are overwritten.
pub fn write_dataset<const D: usize>(dir: &Path, shapes: &[(SampleSet<D>, ShapeMeta)]) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (set, meta) in shapes {
        let sub = dir.join(&set.id);
        fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        write_ply(&sub.join("input.ply"), &set.input)?;
        write_samples(&sub.join("samples.bin"), &set.points, &set.gt)?;
        let json = serde_json::to_string_pretty(meta).expect("meta serializes");
        let mp = sub.join("meta.json");
        fs::write(&mp, json + "\n").map_err(io_err(&mp))?;
    }
    Ok(())
}

/// Reads every shape subdirectory of `dir`, sorted by name.
pub fn read_dataset<const D: usize>(dir: &Path) -> Result<Vec<(SampleSet<D>, ShapeMeta)>, DataError> {
    let mut subs: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join("meta.json").is_file())
        .collect();
    subs.sort();
    if subs.is_empty() {
        return Err(format_err(dir, "no shape directories with meta.json"));
    }
    subs.iter()
        .map(|sub| {
            let mp = sub.join("meta.json");
            let text = fs::read_to_string(&mp).map_err(io_err(&mp))?;
            let meta: ShapeMeta = serde_json::from_str(&text).map_err(|e| format_err(&mp, e.to_string()))?;
            if meta.dim != D {
                return Err(format_err(&mp, format!("dataset is {}D, expected {D}D", meta.dim)));
            }
            let input = read_ply(&sub.join("input.ply"))?;
            let (points, gt) = read_samples(&sub.join("samples.bin"))?;
            Ok((
                SampleSet {
                    id: meta.id.clone(),
                    input,
                    points,
                    gt,
                    origin: vec![],
                },
                meta,
            ))
        })
        .collect()
}
