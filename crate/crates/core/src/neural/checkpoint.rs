//! Binary checkpoint: `"NDF1"`, u32 LE version, u64 LE header length, JSON
//! header, then every tensor as little-endian f32 in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{Arch, Conditioning};
use super::{NeuralError, NeuralModel, Real};

pub const MAGIC: &[u8; 4] = b"NDF1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dim: usize,
    scales: usize,
    resolutions: Vec<usize>,
    channels: usize,
    convs_per_scale: usize,
    decoder: Vec<usize>,
    concat_coords: bool,
    delta: f64,
    conditioning: Conditioning,
    tensors: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the tensor section.
    offset: u64,
}

fn header_of(arch: &Arch) -> Header {
    let sizes = arch.decoder_sizes();
    Header {
        dim: arch.dim,
        scales: arch.scales(),
        resolutions: arch.resolutions.clone(),
        channels: arch.channels,
        convs_per_scale: arch.convs_per_scale,
        decoder: sizes,
        concat_coords: arch.concat_coords,
        delta: arch.delta,
        conditioning: arch.conditioning,
        tensors: arch
            .layout()
            .tensors
            .iter()
            .map(|t| ManifestEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset: 4 * t.offset as u64,
            })
            .collect(),
    }
}

fn arch_of(h: &Header) -> Result<Arch, NeuralError> {
    let bad = |m: &str| NeuralError::Checkpoint(m.to_string());
    if h.decoder.len() < 2 || h.decoder.last() != Some(&1) {
        return Err(bad("decoder sizes must end with a scalar output"));
    }
    if h.scales != h.resolutions.len() {
        return Err(bad("scale count does not match resolutions"));
    }
    let arch = Arch {
        dim: h.dim,
        resolutions: h.resolutions.clone(),
        channels: h.channels,
        convs_per_scale: h.convs_per_scale,
        decoder_hidden: h.decoder[1..h.decoder.len() - 1].to_vec(),
        concat_coords: h.concat_coords,
        delta: h.delta,
        conditioning: h.conditioning,
    };
    arch.validate()?;
    if arch.decoder_sizes() != h.decoder {
        return Err(bad("decoder input width does not match the feature width"));
    }
    if header_of(&arch).tensors != h.tensors {
        return Err(bad("tensor manifest does not match the architecture"));
    }
    Ok(arch)
}

pub fn encode_checkpoint<T: Real>(model: &NeuralModel<T>) -> Vec<u8> {
    let header = serde_json::to_vec(&header_of(model.arch())).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + 4 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in model.params() {
        out.extend_from_slice(&(p.f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<NeuralModel<f32>, NeuralError> {
    let take = |at: usize, n: usize| -> Result<&[u8], NeuralError> {
        bytes
            .get(at..at + n)
            .ok_or_else(|| NeuralError::Checkpoint(format!("truncated at byte {at}")))
    };
    if take(0, 4)? != MAGIC {
        return Err(NeuralError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(4, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(take(8, 8)?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(16, hlen)?)
        .map_err(|e| NeuralError::Checkpoint(format!("header: {e}")))?;
    let arch = arch_of(&header)?;
    let total = arch.layout().total;
    let body = take(16 + hlen, 4 * total)?;
    if bytes.len() != 16 + hlen + 4 * total {
        return Err(NeuralError::Checkpoint("trailing bytes after tensors".into()));
    }
    let params = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    NeuralModel::from_params(arch, params)
}

pub fn save_checkpoint<T: Real>(model: &NeuralModel<T>, path: impl AsRef<Path>) -> Result<(), NeuralError> {
    std::fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<NeuralModel<f32>, NeuralError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DistanceField;
    use crate::geom::{sample_surface, seeded_rng, Point, PointCloud, Sphere};
    use rand::Rng;

    fn small(dim: usize) -> Arch {
        Arch {
            resolutions: vec![16, 8],
            channels: 4,
            decoder_hidden: vec![16, 16],
            ..Arch::default_for(dim)
        }
    }

    #[test]
    fn round_trip_is_bitwise_stable() {
        let model = NeuralModel::<f32>::new(small(3), 4).unwrap();
        let a = encode_checkpoint(&model);
        let loaded = decode_checkpoint(&a).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(encode_checkpoint(&loaded), a);

        let input: PointCloud<3> = sample_surface(&Sphere::<3>::new(Point::zeros(), 0.3), 200, 0).unwrap();
        let f0 = model.condition(&input).unwrap();
        let f1 = loaded.condition(&input).unwrap();
        let mut rng = seeded_rng(1);
        for _ in 0..100 {
            let p = Point::<3>::from_fn(|_, _| rng.random_range(-0.5..0.5));
            assert_eq!(f0.eval(&p), f1.eval(&p));
        }
    }

    #[test]
    fn corruption_is_detected() {
        let model = NeuralModel::<f32>::new(small(2), 0).unwrap();
        let good = encode_checkpoint(&model);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(NeuralError::Checkpoint(m)) if m.contains("magic")));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(decode_checkpoint(&bad).is_err());
        assert!(decode_checkpoint(&good[..good.len() - 3]).is_err());
        assert!(decode_checkpoint(&good[..10]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ndf");
        let model = NeuralModel::<f32>::new(small(2), 3).unwrap();
        save_checkpoint(&model, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), model);
    }
}
