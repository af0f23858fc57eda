//! Tactile deform map simulation.
//!
//! A sensor surface (flat or curved) is sampled into a grid of sensing
//! points. For every point a ray is cast inward along the surface normal
//! against the posed object meshes, and the distance to the object's
//! sensor-facing front becomes the pixel's penetration depth, clamped to the
//! measurable gel thickness. The resulting [`DeformMap`] feeds contact signal
//! extraction, map-to-map comparison metrics, trajectory replay and a
//! batched throughput benchmark.
//!
//! All lengths are meters and all quaternions are `[w, x, y, z]`.

// `!(x > 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod render;
pub mod scene;
pub mod sensor;
pub mod signals;
pub mod threads;

pub use error::{Error, Result};
pub use geometry::{Bvh, Collider, FacingFilter, Ray, RayHit, RigidPose, TriangleMesh};
pub use render::{DeformMap, RenderConfig, SceneObject, SceneState};
pub use sensor::{SensingGrid, SensorSurfaceSpec};
pub use signals::{ContactSignals, ForceModel};

/// Toolkit version recorded in manifests and bench reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
