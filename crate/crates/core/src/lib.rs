//! Next-best-view reconstruction on synthetic SDF scenes.
//!
//! A simulated depth camera explores a scene, a TSDF map accumulates what
//! it sees, and each step picks the next view from sampled candidates. A
//! small network fitted to the sampled gains stands in for the expensive
//! per-view evaluation while an informative A* (or RRT) planner routes the
//! camera there.
//!
//! Geometry, gain and network code is generic over [`num::Real`]; the
//! aliases below fix the precisions the pipeline uses.

pub mod approximator;
pub mod bench;
pub mod config;
pub mod error;
pub mod export;
pub mod gain_field;
pub mod geom;
pub mod metrics;
pub mod num;
pub mod pipeline;
pub mod planner;
pub mod sampler;
pub mod scene;
mod simd;
pub mod voxel_map;

pub use error::{Error, Result};
pub use num::Real;

/// Scalar for geometry, maps and exact gains.
pub type Scalar = f64;
/// Scalar the served gain model runs in.
pub type ModelScalar = f32;

pub type Vec3f = geom::Vec3<Scalar>;
pub type Viewpointf = geom::Viewpoint<Scalar>;
pub type Aabbf = geom::Aabb<Scalar>;
pub type SceneF = scene::Scene<Scalar>;
/// Gain model as served during planning.
pub type ServedModel = approximator::GainApproximator<ModelScalar>;
/// Double-precision model for gradient checks.
pub type CheckedModel = approximator::GainApproximator<Scalar>;
