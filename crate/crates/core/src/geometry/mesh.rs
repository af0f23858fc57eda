use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Point3, Vector3};
use crate::error::{Error, Result};

/// Triangles with area at or below this (m²) are dropped on construction.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// An indexed triangle mesh in meters.
///
/// Face normals follow right-hand winding. Degenerate triangles are removed
/// when the mesh is built and the number removed is kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vector3>,
    dropped_degenerate: usize,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (i, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&ix| ix as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {i} references vertex {bad} but only {n} vertices exist"
                )));
            }
            let [a, b, c] = tri.map(|ix| vertices[ix as usize]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area > MIN_TRIANGLE_AREA {
                kept.push(*tri);
                normals.push(cross / (2.0 * area));
            } else {
                dropped += 1;
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidMesh("no valid triangles".into()));
        }
        Ok(TriangleMesh {
            vertices,
            triangles: kept,
            normals,
            dropped_degenerate: dropped,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vector3] {
        &self.normals
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Number of degenerate triangles removed at construction.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn corners(&self, tri: usize) -> [Point3; 3] {
        self.triangles[tri].map(|ix| self.vertices[ix as usize])
    }

    pub fn centroid(&self, tri: usize) -> Point3 {
        let [a, b, c] = self.corners(tri);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
        let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
        for tri in &self.triangles {
            for &ix in tri {
                let p = self.vertices[ix as usize];
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        (lo, hi)
    }

    /// Area-weighted vertex normals, normalized. Vertices not used by any
    /// triangle get a zero vector.
    pub fn vertex_normals(&self) -> Vec<Vector3> {
        let mut acc = vec![Vector3::zeros(); self.vertices.len()];
        for (tri, n) in self.triangles.iter().zip(&self.normals) {
            let [a, b, c] = tri.map(|ix| self.vertices[ix as usize]);
            let weighted = n * (0.5 * (b - a).cross(&(c - a)).norm());
            for &ix in tri {
                acc[ix as usize] += weighted;
            }
        }
        for v in &mut acc {
            let norm = v.norm();
            if norm > 0.0 {
                *v /= norm;
            }
        }
        acc
    }

    /// Checks that every edge shared by two triangles is traversed in
    /// opposite directions, i.e. the winding is consistent.
    pub fn check_consistent_orientation(&self) -> Result<()> {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for (i, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let edge = (tri[k], tri[(k + 1) % 3]);
                if let Some(other) = directed.insert(edge, i) {
                    return Err(Error::InvalidMesh(format!(
                        "triangles {other} and {i} traverse edge {}->{} in the same direction",
                        edge.0, edge.1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Rigidly transformed copy.
    pub fn transformed(&self, pose: &super::RigidPose) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| pose.apply_point(p)).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.iter().map(|n| pose.apply_vector(n)).collect(),
            dropped_degenerate: self.dropped_degenerate,
        }
    }
}

/// Loads an ASCII OBJ or binary STL file and converts it to meters.
///
/// The format is chosen by file extension. Polygons in OBJ files are fan
/// triangulated; binary STL vertices are welded on exact coordinate equality.
pub fn load_mesh(path: impl AsRef<Path>, unit_scale: f64) -> Result<TriangleMesh> {
    let path = path.as_ref();
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "unit_scale must be positive and finite, got {unit_scale}"
        )));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let (mut vertices, triangles) = match ext.as_deref() {
        Some("obj") => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_obj(&text, path)?
        }
        Some("stl") => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_binary_stl(&bytes, path)?
        }
        _ => {
            return Err(Error::MeshParse {
                path: path.to_owned(),
                line: 0,
                message: "unrecognized mesh format (expected .obj or .stl)".into(),
            })
        }
    };
    for v in &mut vertices {
        *v *= unit_scale;
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| match e {
        Error::InvalidMesh(m) => Error::MeshParse {
            path: path.to_owned(),
            line: 0,
            message: m,
        },
        other => other,
    })
}

fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    let err = |line: usize, message: String| Error::MeshParse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(err(lineno, "vertex needs three coordinates".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in tokens {
                    let index = tok.split('/').next().unwrap_or("");
                    let ix: i64 = index
                        .parse()
                        .map_err(|_| err(lineno, format!("bad face index {tok:?}")))?;
                    let resolved = if ix > 0 {
                        ix - 1
                    } else if ix < 0 {
                        vertices.len() as i64 + ix
                    } else {
                        return Err(err(lineno, "face index 0 is invalid".into()));
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(err(lineno, format!("face index {ix} out of range")));
                    }
                    face.push(resolved as u32);
                }
                if face.len() < 3 {
                    return Err(err(lineno, "face needs at least three vertices".into()));
                }
                for k in 1..face.len() - 1 {
                    triangles.push([face[0], face[k], face[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

fn parse_binary_stl(bytes: &[u8], path: &Path) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    let err = |message: String| Error::MeshParse {
        path: path.to_owned(),
        line: 0,
        message,
    };
    if bytes.len() < 84 {
        return Err(err("file shorter than the 84-byte STL preamble".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() != expected {
        let hint = if bytes.starts_with(b"solid") {
            " (ASCII STL is not supported)"
        } else {
            ""
        };
        return Err(err(format!(
            "size {} does not match {count} facets ({expected} bytes){hint}",
            bytes.len()
        )));
    }
    let mut welded: HashMap<[u32; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(count);
    for facet in bytes[84..].chunks_exact(50) {
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let base = 12 + 12 * k;
            let mut bits = [0u32; 3];
            for (j, b) in bits.iter_mut().enumerate() {
                let o = base + 4 * j;
                *b = u32::from_le_bytes(facet[o..o + 4].try_into().unwrap());
            }
            *slot = *welded.entry(bits).or_insert_with(|| {
                vertices.push(Point3::new(
                    f32::from_bits(bits[0]) as f64,
                    f32::from_bits(bits[1]) as f64,
                    f32::from_bits(bits[2]) as f64,
                ));
                (vertices.len() - 1) as u32
            });
        }
        triangles.push(tri);
    }
    Ok((vertices, triangles))
}

/// Writes the mesh as ASCII OBJ.
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {:e} {:e} {:e}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn write(dir: &Path, name: &str, body: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn single_triangle_obj() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.obj", b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
        let mesh = load_mesh(&p, 1.0).unwrap();
        assert_eq!(mesh.vertices().len(), 3);
        assert_eq!(mesh.triangle_count(), 1);
        assert_eq!(mesh.normals()[0], Vector3::z());
    }

    #[test]
    fn degenerate_triangle_dropped() {
        let cube = shapes::cuboid(Vector3::repeat(1.0));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        write_obj(&cube, &p).unwrap();
        let mut text = fs::read_to_string(&p).unwrap();
        // collinear vertices: zero area
        text.push_str("v 0 0 0\nv 1 0 0\nv 2 0 0\nf -3 -2 -1\n");
        fs::write(&p, text).unwrap();
        let mesh = load_mesh(&p, 1.0).unwrap();
        assert_eq!(mesh.triangle_count(), 12);
        assert_eq!(mesh.dropped_degenerate(), 1);
    }

    #[test]
    fn unit_scale_converts_millimeters() {
        let cube = shapes::cuboid(Vector3::repeat(20.0));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube_mm.obj");
        write_obj(&cube, &p).unwrap();
        let mesh = load_mesh(&p, 0.001).unwrap();
        let (lo, hi) = mesh.bounds();
        for k in 0..3 {
            assert!((hi[k] - lo[k] - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn obj_polygons_are_fan_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "quad.obj",
            b"# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n",
        );
        let mesh = load_mesh(&p, 1.0).unwrap();
        assert_eq!(mesh.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn binary_stl_roundtrip() {
        let cube = shapes::cuboid(Vector3::repeat(2.0));
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&(cube.triangle_count() as u32).to_le_bytes());
        for t in 0..cube.triangle_count() {
            for c in cube.normals()[t].iter() {
                bytes.extend_from_slice(&(*c as f32).to_le_bytes());
            }
            for v in cube.corners(t) {
                for c in v.iter() {
                    bytes.extend_from_slice(&(*c as f32).to_le_bytes());
                }
            }
            bytes.extend_from_slice(&[0, 0]);
        }
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "cube.STL", &bytes);
        let mesh = load_mesh(&p, 1.0).unwrap();
        assert_eq!(mesh.triangle_count(), 12);
        assert_eq!(mesh.vertices().len(), 8);
        mesh.check_consistent_orientation().unwrap();
    }

    #[test]
    fn malformed_inputs_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad_face = write(dir.path(), "a.obj", b"v 0 0 0\nv 1 0 0\nf 1 2 7\n");
        let e = load_mesh(&bad_face, 1.0).unwrap_err();
        assert!(e.to_string().contains(":3:"), "{e}");

        let empty = write(dir.path(), "b.obj", b"v 0 0 0\n");
        assert!(load_mesh(&empty, 1.0).is_err());

        let short = write(dir.path(), "c.stl", b"solid x\nendsolid\n");
        assert!(load_mesh(&short, 1.0).is_err());

        assert!(matches!(
            load_mesh(dir.path().join("missing.obj"), 1.0),
            Err(Error::Io { .. })
        ));
        assert!(load_mesh(&bad_face, 0.0).is_err());
    }

    #[test]
    fn out_of_range_index_rejected() {
        let e = TriangleMesh::new(vec![Point3::origin(); 3], vec![[0, 1, 3]]).unwrap_err();
        assert!(e.to_string().contains("vertex 3"));
    }

    #[test]
    fn flipped_face_breaks_orientation() {
        let cube = shapes::cuboid(Vector3::repeat(1.0));
        let mut tris = cube.triangles().to_vec();
        tris[0].swap(1, 2);
        let flipped = TriangleMesh::new(cube.vertices().to_vec(), tris).unwrap();
        assert!(flipped.check_consistent_orientation().is_err());
    }
}
