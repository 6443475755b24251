//! Learned unsigned distance fields: a convolutional encoder turns the
//! voxelized input cloud into multi-scale feature grids, and a ReLU MLP maps
//! interpolated features to a non-negative distance.
//!
//! Spatial gradients are exact (chain rule through the decoder and the
//! interpolation weights). Parameter gradients are hand-written backward
//! passes for this fixed architecture.

mod adam;
mod arch;
mod checkpoint;
mod decoder;
mod encoder;
pub mod grid;
mod loss;
mod model;
mod real;
mod train;

use thiserror::Error;

pub use adam::Adam;
pub use arch::{Arch, Conditioning, ParamLayout, TensorSpec};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use grid::{voxelize, Occupancy};
pub use loss::{clamped_l1, clamped_l1_grad};
pub use model::{FeatureGrids, NeuralField, NeuralModel, ShapeInput};
pub use real::Real;
pub use train::{train, train_model, EpochLog, TrainConfig, TrainLog};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("input point cloud is empty")]
    EmptyInput,
    #[error("{} point(s) outside [-0.5, 0.5]^d, first at index {}", indices.len(), indices[0])]
    OutOfBox { indices: Vec<usize> },
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("expected {expected}D points, got {got}D")]
    DimMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("shape index {index} out of range for {shapes} learned shapes")]
    ShapeIndex { index: usize, shapes: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
