//! Meshes, rigid transforms, ray-triangle intersection and the BVH used for
//! first-hit queries.

mod bvh;
mod mesh;
mod pose;
mod ray;
pub mod shapes;

use std::sync::Arc;

pub use bvh::{Aabb, Bvh, BvhNode};
pub use mesh::{load_mesh, write_obj, TriangleMesh, MIN_TRIANGLE_AREA};
pub use pose::{RigidPose, INPUT_QUATERNION_TOLERANCE, QUATERNION_NORM_TOLERANCE};
pub use ray::{
    intersect_triangle, raycast_exhaustive, Facing, FacingFilter, Ray, RayHit, PARALLEL_EPSILON,
    T_EPSILON,
};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// A mesh together with its acceleration structure.
#[derive(Debug, Clone)]
pub struct Collider {
    pub mesh: Arc<TriangleMesh>,
    pub bvh: Arc<Bvh>,
}

impl Collider {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh);
        Collider {
            mesh: Arc::new(mesh),
            bvh: Arc::new(bvh),
        }
    }

    pub fn raycast(&self, ray: &Ray, filter: FacingFilter) -> Option<RayHit> {
        self.bvh.raycast_first_hit(&self.mesh, ray, filter)
    }
}
