#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tacmap::geometry::{Point3, TriangleMesh};
use tacmap::{Collider, RigidPose};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = nalgebra::Unit::try_new(axis, 1e-6).unwrap_or(Vector3::z_axis());
    UnitQuaternion::from_axis_angle(&axis, rng.random_range(-3.1..3.1))
}

pub fn random_pose(rng: &mut ChaCha8Rng, span: f64) -> RigidPose {
    let t = Vector3::new(
        rng.random_range(-span..span),
        rng.random_range(-span..span),
        rng.random_range(-span..span),
    );
    RigidPose::new(random_rotation(rng), t)
}

/// Triangle soup with corners uniform in the unit cube.
pub fn random_mesh(rng: &mut ChaCha8Rng, triangles: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(triangles * 3);
    for _ in 0..triangles * 3 {
        vertices.push(Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
    }
    let tris = (0..triangles as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    TriangleMesh::new(vertices, tris).unwrap()
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn collider(mesh: TriangleMesh) -> Arc<Collider> {
    Arc::new(Collider::new(mesh))
}

pub fn bits(depths: &[f64]) -> Vec<u64> {
    depths.iter().map(|d| d.to_bits()).collect()
}
