//! Procedural meshes used as indenters, fixtures and benchmark templates.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point3, TriangleMesh, Vector3};

/// Geodesic sphere centered at the origin with vertices exactly on the
/// sphere and a vertex at each pole (`±z`), so the lowest point of the mesh
/// is `(0, 0, -radius)`.
///
/// Level `n` has `20 · 4ⁿ` triangles.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let ring_z = 1.0 / 5f64.sqrt();
    let ring_r = 2.0 / 5f64.sqrt();
    let mut verts = vec![Vector3::z(), -Vector3::z()];
    for k in 0..5 {
        let a = 2.0 * PI * k as f64 / 5.0;
        verts.push(Vector3::new(ring_r * a.cos(), ring_r * a.sin(), ring_z));
    }
    for k in 0..5 {
        let a = 2.0 * PI * k as f64 / 5.0 + PI / 5.0;
        verts.push(Vector3::new(ring_r * a.cos(), ring_r * a.sin(), -ring_z));
    }
    let upper = |k: u32| 2 + k % 5;
    let lower = |k: u32| 7 + k % 5;
    let mut faces = Vec::new();
    for k in 0..5 {
        faces.push([0, upper(k), upper(k + 1)]);
        faces.push([upper(k), lower(k), upper(k + 1)]);
        faces.push([upper(k + 1), lower(k), lower(k + 1)]);
        faces.push([1, lower(k + 1), lower(k)]);
    }

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push((verts[a as usize] + verts[b as usize]).normalize());
                (verts.len() - 1) as u32
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        faces = next;
    }

    // Orient every face outward.
    for f in &mut faces {
        let [a, b, c] = f.map(|i| verts[i as usize]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    let points = verts.iter().map(|v| Point3::from(v * radius)).collect();
    TriangleMesh::new(points, faces).expect("icosphere is non-degenerate")
}

/// Axis-aligned box centered at the origin with outward-facing triangles.
pub fn cuboid(size: Vector3) -> TriangleMesh {
    let h = size / 2.0;
    let mut verts = Vec::with_capacity(8);
    for i in 0..8 {
        verts.push(Point3::new(
            if i & 1 == 0 { -h.x } else { h.x },
            if i & 2 == 0 { -h.y } else { h.y },
            if i & 4 == 0 { -h.z } else { h.z },
        ));
    }
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    TriangleMesh::new(verts, faces).expect("box with positive size")
}

/// Flat rectangular patch in the `z = 0` plane with normals along `+z`,
/// split into `rows × cols` quads.
pub fn flat_patch(x_extent: f64, y_extent: f64, rows: usize, cols: usize) -> TriangleMesh {
    let mut verts = Vec::new();
    for r in 0..=rows {
        for c in 0..=cols {
            verts.push(Point3::new(
                -x_extent / 2.0 + x_extent * c as f64 / cols as f64,
                -y_extent / 2.0 + y_extent * r as f64 / rows as f64,
                0.0,
            ));
        }
    }
    let idx = |r: usize, c: usize| (r * (cols + 1) + c) as u32;
    let mut faces = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            faces.push([idx(r, c), idx(r, c + 1), idx(r + 1, c + 1)]);
            faces.push([idx(r, c), idx(r + 1, c + 1), idx(r + 1, c)]);
        }
    }
    TriangleMesh::new(verts, faces).expect("patch with positive size")
}
