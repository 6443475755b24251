//! Mesh and point-cloud file formats: OBJ and OFF meshes, ASCII XYZ and
//! binary little-endian PLY point clouds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GeomError, Point, PointCloud, TriMesh, Vector};

fn parse_err(format: &'static str, line: usize, message: impl Into<String>) -> GeomError {
    GeomError::Parse {
        format,
        line,
        message: message.into(),
    }
}

fn parse_f64(format: &'static str, line: usize, tok: Option<&str>) -> Result<f64, GeomError> {
    let tok = tok.ok_or_else(|| parse_err(format, line, "missing coordinate"))?;
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(format, line, format!("bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(format, line, "non-finite coordinate"));
    }
    Ok(v)
}

/// Triangle fan `(v0, v_i, v_{i+1})` over a polygon.
fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[i], poly[i + 1]]);
    }
}

/// Parses Wavefront OBJ text: `v` and `f` records, polygons fan-triangulated.
pub fn parse_obj(text: &str) -> Result<TriMesh, GeomError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64("obj", ln, toks.next())?;
                let y = parse_f64("obj", ln, toks.next())?;
                let z = parse_f64("obj", ln, toks.next())?;
                vertices.push(Point::<3>::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| parse_err("obj", ln, format!("bad face index {tok:?}")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(parse_err("obj", ln, "face index 0"));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(parse_err("obj", ln, format!("face index {i} out of range")));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(parse_err("obj", ln, "face with fewer than 3 vertices"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

/// Parses Object File Format text.
pub fn parse_off(text: &str) -> Result<TriMesh, GeomError> {
    // tokens with their line numbers, comments stripped
    let mut toks = text.lines().enumerate().flat_map(|(ln, line)| {
        line.split('#')
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(move |t| (ln + 1, t))
    });
    let (ln, head) = toks.next().ok_or_else(|| parse_err("off", 1, "empty file"))?;
    if head != "OFF" {
        return Err(parse_err("off", ln, "missing OFF header"));
    }
    fn next_usize<'a>(toks: &mut impl Iterator<Item = (usize, &'a str)>, what: &str) -> Result<usize, GeomError> {
        let (ln, t) = toks
            .next()
            .ok_or_else(|| parse_err("off", 0, format!("unexpected end of file reading {what}")))?;
        t.parse()
            .map_err(|_| parse_err("off", ln, format!("bad {what} {t:?}")))
    }
    let nv = next_usize(&mut toks, "vertex count")?;
    let nf = next_usize(&mut toks, "face count")?;
    let _ne = next_usize(&mut toks, "edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for v in &mut c {
            let (ln, t) = toks
                .next()
                .ok_or_else(|| parse_err("off", 0, "unexpected end of file in vertices"))?;
            *v = parse_f64("off", ln, Some(t))?;
        }
        vertices.push(Point::<3>::new(c[0], c[1], c[2]));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = next_usize(&mut toks, "polygon size")?;
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            let i = next_usize(&mut toks, "vertex index")?;
            if i >= nv {
                return Err(parse_err("off", 0, format!("vertex index {i} out of range")));
            }
            poly.push(i as u32);
        }
        fan(&poly, &mut faces);
    }
    TriMesh::new(vertices, faces)
}

/// Reads an `.obj` or `.off` mesh, chosen by extension.
pub fn read_mesh(path: &Path) -> Result<TriMesh, GeomError> {
    let text = fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("off") => parse_off(&text),
        _ => parse_obj(&text),
    }
}

/// One point per line; the first `D` columns are coordinates, extra columns
/// are ignored.
pub fn parse_xyz<const D: usize>(text: &str) -> Result<PointCloud<D>, GeomError> {
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let mut p = Point::<D>::zeros();
        for i in 0..D {
            p[i] = parse_f64("xyz", ln + 1, toks.next())?;
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

pub fn format_xyz<const D: usize>(pc: &PointCloud<D>) -> String {
    let mut s = String::with_capacity(pc.len() * D * 12);
    for p in &pc.points {
        for i in 0..D {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{}", p[i]);
        }
        s.push('\n');
    }
    s
}

pub fn read_xyz<const D: usize>(path: &Path) -> Result<PointCloud<D>, GeomError> {
    parse_xyz(&fs::read_to_string(path)?)
}

pub fn write_xyz<const D: usize>(path: &Path, pc: &PointCloud<D>) -> Result<(), GeomError> {
    fs::write(path, format_xyz(pc))?;
    Ok(())
}

/// Binary little-endian PLY with float32 `x y z` (and `nx ny nz` when the
/// cloud has normals). 2D clouds are written with `z = 0`.
pub fn encode_ply<const D: usize>(pc: &PointCloud<D>) -> Vec<u8> {
    let has_normals = pc.normals.is_some();
    let mut out = String::from("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(out, "element vertex {}", pc.len());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if has_normals {
        out.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    let stride = if has_normals { 6 } else { 3 };
    bytes.reserve(pc.len() * stride * 4);
    let put3 = |bytes: &mut Vec<u8>, v: &Vector<D>| {
        for i in 0..3 {
            let c = if i < D { v[i] as f32 } else { 0.0 };
            bytes.extend_from_slice(&c.to_le_bytes());
        }
    };
    for (k, p) in pc.points.iter().enumerate() {
        put3(&mut bytes, p);
        if let Some(n) = &pc.normals {
            put3(&mut bytes, &n[k]);
        }
    }
    bytes
}

#[derive(Clone, Copy)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

/// Decodes a binary little-endian PLY vertex element. Properties other than
/// positions and normals are skipped; elements after `vertex` are ignored.
pub fn decode_ply<const D: usize>(bytes: &[u8]) -> Result<PointCloud<D>, GeomError> {
    const MARK: &[u8] = b"end_header\n";
    let end = bytes
        .windows(MARK.len())
        .position(|w| w == MARK)
        .ok_or_else(|| parse_err("ply", 0, "missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| parse_err("ply", 0, "header is not UTF-8"))?;
    let body = &bytes[end + MARK.len()..];

    let mut lines = header.lines().enumerate();
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_err("ply", 1, "missing ply magic")),
    }
    let mut count = None;
    let mut in_vertex = false;
    let mut props: Vec<(String, PlyType)> = Vec::new();
    let mut before_vertex = true;
    for (ln, line) in lines {
        let ln = ln + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(parse_err("ply", ln, format!("unsupported format {fmt}")));
                }
            }
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    before_vertex = false;
                    count = Some(
                        n.parse::<usize>()
                            .map_err(|_| parse_err("ply", ln, "bad vertex count"))?,
                    );
                } else if before_vertex {
                    return Err(parse_err("ply", ln, "elements before vertex are not supported"));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_err("ply", ln, "list property in vertex element"));
            }
            ["property", ty, name] if in_vertex => {
                let ty = PlyType::parse(ty).ok_or_else(|| parse_err("ply", ln, format!("unknown type {ty}")))?;
                props.push((name.to_string(), ty));
            }
            _ => {}
        }
    }
    let count = count.ok_or_else(|| parse_err("ply", 0, "no vertex element"))?;
    let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
    if body.len() < count * stride {
        return Err(parse_err("ply", 0, "truncated vertex data"));
    }
    let find = |name: &str| props.iter().position(|(n, _)| n == name);
    let pos_names = ["x", "y", "z"];
    let nrm_names = ["nx", "ny", "nz"];
    let pos_idx: Vec<usize> = pos_names[..D]
        .iter()
        .map(|n| find(n).ok_or_else(|| parse_err("ply", 0, format!("missing property {n}"))))
        .collect::<Result<_, _>>()?;
    let nrm_idx: Option<Vec<usize>> = nrm_names[..D].iter().map(|n| find(n)).collect();
    let offsets: Vec<usize> = props
        .iter()
        .scan(0, |acc, (_, t)| {
            let o = *acc;
            *acc += t.size();
            Some(o)
        })
        .collect();

    let mut points = Vec::with_capacity(count);
    let mut normals = nrm_idx.as_ref().map(|_| Vec::with_capacity(count));
    for k in 0..count {
        let rec = &body[k * stride..(k + 1) * stride];
        let read = |i: usize| props[i].1.read(&rec[offsets[i]..]);
        let p = Point::<D>::from_fn(|a, _| read(pos_idx[a]));
        if !p.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite("ply vertex"));
        }
        points.push(p);
        if let (Some(idx), Some(ns)) = (&nrm_idx, normals.as_mut()) {
            ns.push(Vector::<D>::from_fn(|a, _| read(idx[a])));
        }
    }
    Ok(PointCloud { points, normals })
}

pub fn read_ply<const D: usize>(path: &Path) -> Result<PointCloud<D>, GeomError> {
    decode_ply(&fs::read(path)?)
}

pub fn write_ply<const D: usize>(path: &Path, pc: &PointCloud<D>) -> Result<(), GeomError> {
    fs::write(path, encode_ply(pc))?;
    Ok(())
}

/// Reads `.ply` or `.xyz` by extension.
pub fn read_cloud<const D: usize>(path: &Path) -> Result<PointCloud<D>, GeomError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("xyz") | Some("txt") => read_xyz(path),
        _ => read_ply(path),
    }
}

/// Writes `.xyz` or `.ply` by extension.
pub fn write_cloud<const D: usize>(path: &Path, pc: &PointCloud<D>) -> Result<(), GeomError> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("xyz") | Some("txt") => write_xyz(path, pc),
        _ => write_ply(path, pc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Surface;

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
        assert!((m.measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn obj_negative_indices() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_bad_index_reports_line() {
        let err = parse_obj("v 0 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, GeomError::Parse { line: 2, .. }));
    }

    #[test]
    fn off_mesh() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let m = parse_off(text).unwrap();
        assert_eq!(m.faces().len(), 2);
    }

    #[test]
    fn ply_round_trip_with_normals() {
        let pc = PointCloud::<3>::with_normals(
            vec![Point::<3>::new(0.25, -0.5, 0.125), Point::<3>::new(1.0, 2.0, 3.0)],
            vec![Vector::<3>::new(0.0, 0.0, 1.0), Vector::<3>::new(1.0, 0.0, 0.0)],
        )
        .unwrap();
        let back: PointCloud<3> = decode_ply(&encode_ply(&pc)).unwrap();
        assert_eq!(back, pc);
    }

    #[test]
    fn ply_truncated_is_an_error() {
        let pc = PointCloud::<3>::new(vec![Point::<3>::new(0.0, 0.0, 0.0); 4]);
        let bytes = encode_ply(&pc);
        assert!(decode_ply::<3>(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn xyz_round_trip_is_exact() {
        let pc = PointCloud::<2>::new(vec![Point::<2>::new(0.1, -0.3), Point::<2>::new(1e-7, 0.49999)]);
        let back: PointCloud<2> = parse_xyz(&format_xyz(&pc)).unwrap();
        assert_eq!(back, pc);
    }
}
