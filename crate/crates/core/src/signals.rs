//! Contact mask, contact centroid, contact area and the net-force proxy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector3;
use crate::render::DeformMap;
use crate::sensor::SensingGrid;

/// Default contact threshold (m).
pub const DEFAULT_TAU: f64 = 0.05e-3;

/// Winkler foundation: contact pressure is `stiffness · depth`.
///
/// This is a calibratable proxy for the net normal force, not a model of the
/// elastomer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceModel {
    /// Pressure per unit depth, N/m³.
    #[serde(rename = "k_n_per_m3")]
    pub stiffness: f64,
}

impl Default for ForceModel {
    fn default() -> Self {
        ForceModel { stiffness: 1e6 }
    }
}

impl ForceModel {
    pub fn new(stiffness: f64) -> Result<Self> {
        if !(stiffness.is_finite() && stiffness > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "stiffness must be > 0, got {stiffness}"
            )));
        }
        Ok(ForceModel { stiffness })
    }
}

/// Binary contact mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactMask {
    pub height: usize,
    pub width: usize,
    pub active: Vec<bool>,
}

impl ContactMask {
    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_subset_of(&self, other: &ContactMask) -> bool {
        self.active
            .iter()
            .zip(&other.active)
            .all(|(&a, &b)| !a || b)
    }

    /// `(row, col)` of every active pixel in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(move |(i, _)| (i / self.width, i % self.width))
    }
}

/// `depth > tau` per pixel.
pub fn contact_mask(map: &DeformMap, tau: f64) -> ContactMask {
    ContactMask {
        height: map.height,
        width: map.width,
        active: map.depths.iter().map(|&d| d > tau).collect(),
    }
}

/// Per-frame signals, SI units. Pixel coordinates are `[row, col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSignals {
    pub centroid_pixel: Option<[f64; 2]>,
    pub centroid_point_m: Option<[f64; 3]>,
    pub contact_area_m2: f64,
    pub max_depth_m: f64,
    /// Mean depth over active pixels; zero without contact.
    pub mean_depth_m: f64,
    pub active_pixels: usize,
    /// Push of the sensor on the object, sensor frame.
    pub net_force_n: [f64; 3],
}

impl ContactSignals {
    pub fn net_force(&self) -> Vector3 {
        Vector3::from(self.net_force_n)
    }
}

pub fn compute_signals(
    map: &DeformMap,
    grid: &SensingGrid,
    tau: f64,
    force: &ForceModel,
) -> Result<ContactSignals> {
    if map.height != grid.height || map.width != grid.width {
        return Err(Error::ShapeMismatch(format!(
            "map is {}x{} but grid is {}x{}",
            map.height, map.width, grid.height, grid.width
        )));
    }
    let mask = contact_mask(map, tau);
    let mut count = 0usize;
    let mut pixel_sum = [0.0f64; 2];
    let mut point_sum = Vector3::zeros();
    let mut area = 0.0;
    let mut depth_sum = 0.0;
    let mut net_force = Vector3::zeros();
    for (row, col) in mask.pixels() {
        let i = grid.index(row, col);
        let a = grid.pixel_areas[i];
        let d = map.depths[i];
        count += 1;
        pixel_sum[0] += row as f64;
        pixel_sum[1] += col as f64;
        point_sum += grid.points[i].coords * a;
        area += a;
        depth_sum += d;
        net_force -= grid.inward_normals[i] * (force.stiffness * d * a);
    }
    let (centroid_pixel, centroid_point_m, mean_depth_m) = if count > 0 {
        (
            Some([pixel_sum[0] / count as f64, pixel_sum[1] / count as f64]),
            Some((point_sum / area).into()),
            depth_sum / count as f64,
        )
    } else {
        (None, None, 0.0)
    };
    Ok(ContactSignals {
        centroid_pixel,
        centroid_point_m,
        contact_area_m2: area,
        max_depth_m: map.max_depth(),
        mean_depth_m,
        active_pixels: count,
        net_force_n: net_force.into(),
    })
}
