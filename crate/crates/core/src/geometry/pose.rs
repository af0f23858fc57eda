use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::{Point3, Vector3};
use crate::error::{Error, Result};

/// Allowed deviation of a stored rotation quaternion from unit norm.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-9;

/// Deserialized and command-line quaternions may deviate this much from unit
/// norm (typical of logged data); they are renormalized on load.
pub const INPUT_QUATERNION_TOLERANCE: f64 = 1e-6;

/// A proper rigid transform: rotate, then translate.
///
/// Serialized as `{"q": [w, x, y, z], "t": [x, y, z]}` with lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct RigidPose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    q: [f64; 4],
    t: [f64; 3],
}

impl TryFrom<PoseRecord> for RigidPose {
    type Error = Error;

    fn try_from(r: PoseRecord) -> Result<Self> {
        RigidPose::from_wxyz_with_tolerance(r.q, r.t, INPUT_QUATERNION_TOLERANCE)
    }
}

impl From<RigidPose> for PoseRecord {
    fn from(p: RigidPose) -> Self {
        PoseRecord {
            q: p.wxyz(),
            t: p.translation.into(),
        }
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        RigidPose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3) -> Self {
        RigidPose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    /// Builds a pose from a `[w, x, y, z]` quaternion that must already be
    /// unit within [`QUATERNION_NORM_TOLERANCE`].
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Result<Self> {
        Self::from_wxyz_with_tolerance(q, t, QUATERNION_NORM_TOLERANCE)
    }

    /// Like [`RigidPose::from_wxyz`] but accepts norms within `tolerance` of
    /// one and renormalizes. Used for hand-typed or logged inputs.
    pub fn from_wxyz_with_tolerance(q: [f64; 4], t: [f64; 3], tolerance: f64) -> Result<Self> {
        if q.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite component".into()));
        }
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        let norm = quat.norm();
        if (norm - 1.0).abs() > tolerance {
            return Err(Error::InvalidPose(format!(
                "quaternion norm {norm} is not 1 (tolerance {tolerance:e})"
            )));
        }
        Ok(Self::new(
            UnitQuaternion::from_quaternion(quat),
            Vector3::new(t[0], t[1], t[2]),
        ))
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3 {
        &self.translation
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let inv = self.rotation.inverse();
        RigidPose {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }
}
