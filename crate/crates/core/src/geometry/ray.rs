use serde::{Deserialize, Serialize};

use super::{Point3, TriangleMesh, Vector3};
use crate::error::{Error, Result};

/// Rays whose cosine with a face normal is at most this are treated as
/// parallel to the face and never hit it.
pub const PARALLEL_EPSILON: f64 = 1e-9;

/// Hits slightly behind the origin (tessellation jitter) are accepted down to
/// `-T_EPSILON` and reported at `t = 0`.
pub const T_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Point3,
    direction: Vector3,
    t_max: f64,
}

impl Ray {
    pub fn new(origin: Point3, direction: Vector3, t_max: f64) -> Result<Self> {
        if ((direction.norm() - 1.0).abs()) > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "ray direction must be unit length, got norm {}",
                direction.norm()
            )));
        }
        if !(t_max > 0.0) {
            return Err(Error::InvalidArgument(format!("ray t_max must be > 0, got {t_max}")));
        }
        if !origin.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("ray origin is not finite".into()));
        }
        Ok(Ray {
            origin,
            direction,
            t_max,
        })
    }

    /// Skips validation; the caller guarantees a unit direction.
    pub(crate) fn new_unchecked(origin: Point3, direction: Vector3, t_max: f64) -> Self {
        Ray {
            origin,
            direction,
            t_max,
        }
    }

    pub fn origin(&self) -> &Point3 {
        &self.origin
    }

    pub fn direction(&self) -> &Vector3 {
        &self.direction
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }

    pub(crate) fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }
}

/// Which side of a triangle a ray struck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Facing {
    /// The ray travels against the face normal (enters a closed mesh).
    Front,
    /// The ray travels along the face normal (leaves a closed mesh).
    Back,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacingFilter {
    Any,
    #[default]
    BackOnly,
}

impl FacingFilter {
    fn admits(self, facing: Facing) -> bool {
        match self {
            FacingFilter::Any => true,
            FacingFilter::BackOnly => facing == Facing::Back,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: u32,
    pub point: Point3,
    pub facing: Facing,
}

/// Per-ray constants for the watertight test: the ray is sheared so that it
/// becomes the +z axis, and triangles are tested by 2D edge functions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShearedRay {
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl ShearedRay {
    pub(crate) fn new(dir: &Vector3) -> Self {
        let kz = dir.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        ShearedRay {
            kx,
            ky,
            kz,
            sx: dir[kx] / dir[kz],
            sy: dir[ky] / dir[kz],
            sz: 1.0 / dir[kz],
        }
    }
}

/// Tests one triangle. Returns the (clamped) hit distance and facing.
pub fn intersect_triangle(
    ray: &Ray,
    corners: &[Point3; 3],
    normal: &Vector3,
    filter: FacingFilter,
) -> Option<(f64, Facing)> {
    intersect_sheared(ray, &ShearedRay::new(&ray.direction), corners, normal, filter)
}

pub(crate) fn intersect_sheared(
    ray: &Ray,
    sh: &ShearedRay,
    corners: &[Point3; 3],
    normal: &Vector3,
    filter: FacingFilter,
) -> Option<(f64, Facing)> {
    let cos = normal.dot(&ray.direction);
    if cos.abs() <= PARALLEL_EPSILON {
        return None;
    }
    let facing = if cos > 0.0 { Facing::Back } else { Facing::Front };
    if !filter.admits(facing) {
        return None;
    }

    let a = corners[0] - ray.origin;
    let b = corners[1] - ray.origin;
    let c = corners[2] - ray.origin;
    let (ax, ay) = (a[sh.kx] - sh.sx * a[sh.kz], a[sh.ky] - sh.sy * a[sh.kz]);
    let (bx, by) = (b[sh.kx] - sh.sx * b[sh.kz], b[sh.ky] - sh.sy * b[sh.kz]);
    let (cx, cy) = (c[sh.kx] - sh.sx * c[sh.kz], c[sh.ky] - sh.sy * c[sh.kz]);

    let u = cx * by - cy * bx;
    let v = ax * cy - ay * cx;
    let w = bx * ay - by * ax;
    if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
        return None;
    }
    let det = u + v + w;
    if det == 0.0 {
        return None;
    }
    let t_scaled = u * (sh.sz * a[sh.kz]) + v * (sh.sz * b[sh.kz]) + w * (sh.sz * c[sh.kz]);
    let t = t_scaled / det;
    if !(t >= -T_EPSILON && t <= ray.t_max) {
        return None;
    }
    Some((t.max(0.0), facing))
}

/// Reference first-hit query that tests every triangle. Ties on `t` go to the
/// lowest triangle id.
pub fn raycast_exhaustive(
    mesh: &TriangleMesh,
    ray: &Ray,
    filter: FacingFilter,
) -> Option<RayHit> {
    let mut best: Option<(f64, u32, Facing)> = None;
    for tri in 0..mesh.triangle_count() {
        let corners = mesh.corners(tri);
        if let Some((t, facing)) = intersect_triangle(ray, &corners, &mesh.normals()[tri], filter) {
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, tri as u32, facing));
            }
        }
    }
    best.map(|(t, triangle, facing)| RayHit {
        t,
        triangle,
        point: ray.at(t),
        facing,
    })
}
