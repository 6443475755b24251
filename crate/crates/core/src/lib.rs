//! Neural distance fields.
//!
//! Learns the unsigned distance field of open or closed surfaces from sparse
//! point clouds, then turns any distance field (exact or learned) into dense
//! point clouds, rendered images, or multi-valued regression outputs.
//!
//! - [`geom`]: exact distance oracles, sampling, Chamfer-L2, mesh and cloud I/O.
//! - [`field`]: the [`field::DistanceField`] contract and gradient projection.
//! - [`neural`]: the learned field (feature-grid encoder + ReLU MLP decoder).
//! - [`extract`]: dense point-cloud extraction.
//! - [`trace`]: damped sphere tracing, rendering and multi-target regression.
//! - [`data`]: training samples and the 2D curve corpus.

pub mod data;
pub mod extract;
pub mod field;
pub mod geom;
pub mod neural;
pub mod trace;

pub use field::{exact_field, project, project_batch, DistanceField, ExactField, ProjectionConfig};
pub use geom::{Point, PointCloud, Vector};
