//! Deform map synthesis by normal-aligned ray casting.
//!
//! For each sensing point a ray travels inward along the sensing direction.
//! With the default back-face filter the first hit is where the object's
//! sensor-facing surface lies, so `depth = clamp(t − δ, 0, d_max)`: zero at
//! the rest surface, saturating at the inner limit of the gel.

mod map;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use map::{DeformMap, TMAP_MAGIC, TMAP_VERSION};

use crate::geometry::{Collider, Facing, FacingFilter, Point3, Ray, RigidPose, Vector3};
use crate::sensor::SensingGrid;

/// Extra search distance past the inner clamp surface when `t_max` is unset.
pub const DEFAULT_T_MAX_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Deepest intruder wins.
    #[default]
    Max,
    /// Depths add, then clamp to `d_max`.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub facing: FacingFilter,
    /// Search horizon in meters; `None` means `δ + d_max + 1 mm`.
    #[serde(rename = "t_max_m")]
    pub t_max: Option<f64>,
    pub combine: Combine,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            facing: FacingFilter::BackOnly,
            t_max: None,
            combine: Combine::Max,
        }
    }
}

impl RenderConfig {
    pub fn effective_t_max(&self, grid: &SensingGrid) -> f64 {
        self.t_max
            .unwrap_or(grid.delta + grid.d_max + DEFAULT_T_MAX_MARGIN)
    }
}

#[derive(Debug, Clone)]
pub struct SceneObject {
    pub collider: Arc<Collider>,
    pub pose: RigidPose,
}

/// Poses of the sensor and every object at one instant.
#[derive(Debug, Clone, Default)]
pub struct SceneState {
    pub sensor_pose: RigidPose,
    pub objects: Vec<SceneObject>,
}

/// Renders one deform map. No objects, or no contact, yields the zero map.
pub fn render_deform_map(grid: &SensingGrid, scene: &SceneState, cfg: &RenderConfig) -> DeformMap {
    let mut map = DeformMap::zeros(grid.height, grid.width, grid.d_max);
    render_into(grid, scene, cfg, &mut map);
    map
}

/// Renders every scene against the shared grid. Element `i` is identical to
/// `render_deform_map(grid, &scenes[i], cfg)`.
pub fn render_batch(grid: &SensingGrid, scenes: &[SceneState], cfg: &RenderConfig) -> Vec<DeformMap> {
    let mut out: Vec<DeformMap> = (0..scenes.len())
        .map(|_| DeformMap::zeros(grid.height, grid.width, grid.d_max))
        .collect();
    render_batch_into(grid, scenes, cfg, &mut out);
    out
}

/// Like [`render_batch`] but writes into preallocated maps.
pub fn render_batch_into(
    grid: &SensingGrid,
    scenes: &[SceneState],
    cfg: &RenderConfig,
    out: &mut [DeformMap],
) {
    assert_eq!(scenes.len(), out.len(), "one output map per scene");
    scenes
        .par_iter()
        .zip(out.par_iter_mut())
        .for_each(|(scene, map)| render_into(grid, scene, cfg, map));
}

/// Object-local ray setup: the sensor-to-object transform for one object.
struct PosedCollider<'a> {
    collider: &'a Collider,
    sensor_to_object: RigidPose,
}

fn render_into(grid: &SensingGrid, scene: &SceneState, cfg: &RenderConfig, map: &mut DeformMap) {
    debug_assert!(map.height == grid.height && map.width == grid.width);
    map.d_max = grid.d_max;
    let posed: Vec<PosedCollider> = scene
        .objects
        .iter()
        .map(|o| PosedCollider {
            collider: &o.collider,
            sensor_to_object: o.pose.inverse().compose(&scene.sensor_pose),
        })
        .collect();
    let t_max = cfg.effective_t_max(grid);
    let width = grid.width;

    map.depths
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(row, depths)| {
            for (col, out) in depths.iter_mut().enumerate() {
                let i = row * width + col;
                let point = &grid.points[i];
                let normal = &grid.inward_normals[i];
                let mut acc = 0.0f64;
                for obj in &posed {
                    let d = pixel_depth(obj, point, normal, t_max, grid.delta, grid.d_max, cfg.facing);
                    acc = match cfg.combine {
                        Combine::Max => acc.max(d),
                        Combine::Sum => acc + d,
                    };
                }
                *out = acc.min(grid.d_max);
            }
        });
}

fn pixel_depth(
    obj: &PosedCollider,
    point: &Point3,
    inward: &Vector3,
    t_max: f64,
    delta: f64,
    d_max: f64,
    facing: FacingFilter,
) -> f64 {
    let origin = obj.sensor_to_object.apply_point(point);
    let dir = obj.sensor_to_object.apply_vector(inward);
    let ray = Ray::new_unchecked(origin, dir, t_max);
    let t = match obj.collider.raycast(&ray, facing) {
        Some(hit) => Some(hit.t),
        // The exit may lie past the horizon when the sensing point is deep
        // inside the object; the first surface along an unbounded ray being a
        // back face means the origin is enclosed.
        None if facing == FacingFilter::BackOnly => obj
            .collider
            .raycast(&ray.with_t_max(f64::INFINITY), FacingFilter::Any)
            .filter(|h| h.facing == Facing::Back)
            .map(|h| h.t),
        None => None,
    };
    t.map_or(0.0, |t| (t - delta).clamp(0.0, d_max))
}
