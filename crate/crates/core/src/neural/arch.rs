use serde::{Deserialize, Serialize};

use super::grid::{cell_count, MAX_DIM};
use super::NeuralError;

/// How feature grids are obtained for a shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Conditioning {
    /// Convolutional encoder applied to the voxelized input cloud.
    Encoder,
    /// Grids are free parameters, one set per training shape.
    AutoDecoder { shapes: usize },
}

/// Network shape. Everything needed to rebuild a model from its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arch {
    pub dim: usize,
    /// Grid resolution per scale, finest first; each is half the previous.
    pub resolutions: Vec<usize>,
    pub channels: usize,
    /// 3^d convolutions (each followed by ReLU) per scale.
    pub convs_per_scale: usize,
    pub decoder_hidden: Vec<usize>,
    /// Append the query coordinates to the decoder input.
    pub concat_coords: bool,
    pub delta: f64,
    pub conditioning: Conditioning,
}

impl Arch {
    /// 3 scales of 16 channels, 4x256 decoder, clamp 0.1.
    pub fn default_for(dim: usize) -> Self {
        let finest = if dim == 2 { 64 } else { 32 };
        Self {
            dim,
            resolutions: vec![finest, finest / 2, finest / 4],
            channels: 16,
            convs_per_scale: 2,
            decoder_hidden: vec![256; 4],
            concat_coords: false,
            delta: 0.1,
            conditioning: Conditioning::Encoder,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: &str| Err(NeuralError::Arch(m.into()));
        if !(2..=MAX_DIM).contains(&self.dim) {
            return bad("dimension must be 2 or 3");
        }
        if self.resolutions.is_empty() {
            return bad("at least one scale is required");
        }
        if self.resolutions.iter().any(|&r| r < 2) {
            return bad("grid resolutions must be at least 2");
        }
        for w in self.resolutions.windows(2) {
            if w[0] != 2 * w[1] {
                return bad("each scale must halve the previous resolution");
            }
        }
        if self.channels == 0 || self.decoder_hidden.iter().any(|&h| h == 0) {
            return bad("layer widths must be positive");
        }
        if self.conditioning == Conditioning::Encoder && self.convs_per_scale == 0 {
            return bad("the encoder needs at least one convolution per scale");
        }
        if let Conditioning::AutoDecoder { shapes: 0 } = self.conditioning {
            return bad("auto-decoder needs at least one shape");
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return bad("delta must be positive");
        }
        Ok(())
    }

    pub fn scales(&self) -> usize {
        self.resolutions.len()
    }

    pub fn taps(&self) -> usize {
        3usize.pow(self.dim as u32)
    }

    /// Width of the concatenated multi-scale feature.
    pub fn feature_width(&self) -> usize {
        self.scales() * self.channels
    }

    pub fn decoder_input(&self) -> usize {
        self.feature_width() + if self.concat_coords { self.dim } else { 0 }
    }

    /// Decoder layer widths including input and the scalar output.
    pub fn decoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.decoder_input()];
        s.extend(&self.decoder_hidden);
        s.push(1);
        s
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::default();
        match self.conditioning {
            Conditioning::Encoder => {
                for s in 0..self.scales() {
                    for j in 0..self.convs_per_scale {
                        let cin = if s == 0 && j == 0 { 1 } else { self.channels };
                        l.push(format!("enc.{s}.{j}.weight"), vec![self.taps(), cin, self.channels]);
                        l.push(format!("enc.{s}.{j}.bias"), vec![self.channels]);
                    }
                }
            }
            Conditioning::AutoDecoder { shapes } => {
                for shape in 0..shapes {
                    for (s, &r) in self.resolutions.iter().enumerate() {
                        l.push(format!("grid.{shape}.{s}"), vec![cell_count(self.dim, r), self.channels]);
                    }
                }
            }
        }
        let sizes = self.decoder_sizes();
        for (i, w) in sizes.windows(2).enumerate() {
            l.push(format!("dec.{i}.weight"), vec![w[0], w[1]]);
            l.push(format!("dec.{i}.bias"), vec![w[1]]);
        }
        l
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements into the flat parameter vector.
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Named tensors packed back to back in one flat parameter vector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

impl ParamLayout {
    fn push(&mut self, name: String, shape: Vec<usize>) {
        let spec = TensorSpec {
            name,
            shape,
            offset: self.total,
        };
        self.total += spec.len();
        self.tensors.push(spec);
    }

    pub fn get(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub(crate) fn range(&self, name: &str) -> std::ops::Range<usize> {
        self.get(name).unwrap_or_else(|| panic!("missing tensor {name}")).range()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_is_contiguous() {
        let a = Arch::default_for(3);
        a.validate().unwrap();
        let l = a.layout();
        let mut next = 0;
        for t in &l.tensors {
            assert_eq!(t.offset, next);
            next += t.len();
        }
        assert_eq!(next, l.total);
        assert_eq!(l.get("enc.0.0.weight").unwrap().shape, vec![27, 1, 16]);
        assert_eq!(l.get("dec.0.weight").unwrap().shape, vec![48, 256]);
        assert_eq!(l.get("dec.4.weight").unwrap().shape, vec![256, 1]);
    }

    #[test]
    fn invalid_arch_is_rejected() {
        let mut a = Arch::default_for(2);
        a.resolutions = vec![64, 30];
        assert!(a.validate().is_err());
        let mut a = Arch::default_for(2);
        a.dim = 4;
        assert!(a.validate().is_err());
    }
}
