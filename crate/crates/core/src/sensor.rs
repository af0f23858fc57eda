//! Sensor surface geometry and the precomputed grid of sensing points.
//!
//! Every analytic surface shares one frame convention: the sensor body lies
//! on the `z < 0` side, the surface passes through the origin with outward
//! normal `+z` there, and rows run along `y` (or the polar angle for caps).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Collider, FacingFilter, Point3, Ray, RigidPose, TriangleMesh, Vector3};

/// Rectangular chart used to sample a [`SensorSurfaceSpec::MeshSurface`].
///
/// Cell centers of the chart are projected onto the mesh along
/// `-(col_axis × row_axis)`; that cross product must point out of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamChart {
    pub center: [f64; 3],
    /// Direction of increasing row index.
    pub row_axis: [f64; 3],
    /// Direction of increasing column index.
    pub col_axis: [f64; 3],
    pub row_extent_m: f64,
    pub col_extent_m: f64,
}

#[derive(Debug, Clone)]
pub enum SensorSurfaceSpec {
    /// Plane `z = 0`, `x ∈ [-x/2, x/2]` (columns), `y ∈ [-y/2, y/2]` (rows).
    FlatRect { x_extent: f64, y_extent: f64 },
    /// Sphere of `radius` centered at `(0, 0, -radius)`, covering polar angles
    /// up to `half_angle` from `+z`. Rows are polar angle, columns azimuth.
    SphericalCap { radius: f64, half_angle: f64 },
    /// Cylinder of `radius` with axis along `y` through `(0, 0, -radius)`.
    /// Rows run along the axis, columns over the arc angle from `+z`.
    CylindricalPatch {
        radius: f64,
        axial_length: f64,
        arc_half_angle: f64,
    },
    /// Arbitrary fingertip mesh with outward normals, sampled through a chart.
    MeshSurface {
        mesh: Arc<TriangleMesh>,
        chart: Option<ParamChart>,
    },
}

impl SensorSurfaceSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSensor(format!("{name} must be > 0, got {v}")))
            }
        };
        let half_angle = |name: &str, v: f64| {
            if v > 0.0 && v <= FRAC_PI_2 {
                Ok(())
            } else {
                Err(Error::InvalidSensor(format!("{name} must be in (0, π/2], got {v}")))
            }
        };
        match self {
            SensorSurfaceSpec::FlatRect { x_extent, y_extent } => {
                positive("x extent", *x_extent)?;
                positive("y extent", *y_extent)
            }
            SensorSurfaceSpec::SphericalCap { radius, half_angle: a } => {
                positive("radius", *radius)?;
                half_angle("half angle", *a)
            }
            SensorSurfaceSpec::CylindricalPatch {
                radius,
                axial_length,
                arc_half_angle,
            } => {
                positive("radius", *radius)?;
                positive("axial length", *axial_length)?;
                half_angle("arc half angle", *arc_half_angle)
            }
            SensorSurfaceSpec::MeshSurface { chart, .. } => {
                let chart = chart.as_ref().ok_or_else(|| {
                    Error::InvalidSensor("mesh surface requires a parameter chart".into())
                })?;
                positive("chart row extent", chart.row_extent_m)?;
                positive("chart col extent", chart.col_extent_m)?;
                let r = Vector3::from(chart.row_axis);
                let c = Vector3::from(chart.col_axis);
                if (r.norm() - 1.0).abs() > 1e-9 || (c.norm() - 1.0).abs() > 1e-9 || r.dot(&c).abs() > 1e-9 {
                    return Err(Error::InvalidSensor(
                        "chart axes must be orthonormal".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Area of the rest surface patch, for analytic variants.
    pub fn analytic_area(&self) -> Option<f64> {
        match *self {
            SensorSurfaceSpec::FlatRect { x_extent, y_extent } => Some(x_extent * y_extent),
            SensorSurfaceSpec::SphericalCap { radius, half_angle } => {
                Some(2.0 * PI * radius * radius * (1.0 - half_angle.cos()))
            }
            SensorSurfaceSpec::CylindricalPatch {
                radius,
                axial_length,
                arc_half_angle,
            } => Some(2.0 * arc_half_angle * radius * axial_length),
            SensorSurfaceSpec::MeshSurface { .. } => None,
        }
    }
}

/// Sensing points, inward sensing directions and pixel areas, row-major.
///
/// Points sit on the sensing surface, `delta` outside the rest surface along
/// the outward normal. Pixel areas are measured on the rest surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingGrid {
    pub height: usize,
    pub width: usize,
    pub points: Vec<Point3>,
    pub inward_normals: Vec<Vector3>,
    pub pixel_areas: Vec<f64>,
    pub d_max: f64,
    pub delta: f64,
}

impl SensingGrid {
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn total_area(&self) -> f64 {
        self.pixel_areas.iter().sum()
    }

    /// Points and inward normals expressed in the world frame.
    pub fn world_points(&self, sensor_pose: &RigidPose) -> (Vec<Point3>, Vec<Vector3>) {
        (
            self.points.iter().map(|p| sensor_pose.apply_point(p)).collect(),
            self.inward_normals
                .iter()
                .map(|n| sensor_pose.apply_vector(n))
                .collect(),
        )
    }

    /// Writes the `f32` little-endian blob: points, then normals, then areas.
    pub fn write_blob(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(self.len() * 7 * 4);
        for p in &self.points {
            for c in p.iter() {
                buf.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        for n in &self.inward_normals {
            for c in n.iter() {
                buf.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        for a in &self.pixel_areas {
            buf.extend_from_slice(&(*a as f32).to_le_bytes());
        }
        out.write_all(&buf)
    }
}

/// Descriptor written next to the grid blob by [`export_grid`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridDescriptor {
    pub spec: serde_json::Value,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub delta_m: f64,
    pub d_max_m: f64,
    pub blob: String,
    pub blob_layout: String,
    pub point_count: usize,
}

pub const GRID_DESCRIPTOR_FILE: &str = "grid.json";
pub const GRID_BLOB_FILE: &str = "grid.bin";

/// Writes `grid.json` and `grid.bin` into `dir`.
pub fn export_grid(grid: &SensingGrid, spec: serde_json::Value, dir: &Path) -> Result<GridDescriptor> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let desc = GridDescriptor {
        spec,
        height: grid.height,
        width: grid.width,
        delta_m: grid.delta,
        d_max_m: grid.d_max,
        blob: GRID_BLOB_FILE.into(),
        blob_layout: "f32 little-endian, row-major: points[H*W][3], inward_normals[H*W][3], pixel_areas[H*W]".into(),
        point_count: grid.len(),
    };
    let blob_path = dir.join(GRID_BLOB_FILE);
    let file = fs::File::create(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    grid.write_blob(std::io::BufWriter::new(file))
        .map_err(|e| Error::io(&blob_path, e))?;
    let desc_path = dir.join(GRID_DESCRIPTOR_FILE);
    let text = serde_json::to_string_pretty(&desc).expect("descriptor serializes");
    fs::write(&desc_path, text).map_err(|e| Error::io(&desc_path, e))?;
    Ok(desc)
}

/// Samples the sensing surface at the cell centers of a uniform `height ×
/// width` parameter grid.
pub fn generate_sensing_grid(
    spec: &SensorSurfaceSpec,
    height: usize,
    width: usize,
    delta: f64,
    d_max: f64,
) -> Result<SensingGrid> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidSensor(format!(
            "grid must be at least 1x1, got {height}x{width}"
        )));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidSensor(format!("delta must be >= 0, got {delta}")));
    }
    if !(d_max.is_finite() && d_max > 0.0) {
        return Err(Error::InvalidSensor(format!("d_max must be > 0, got {d_max}")));
    }
    spec.validate()?;

    let n = height * width;
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut areas = Vec::with_capacity(n);
    let center = |i: usize, count: usize| (i as f64 + 0.5) / count as f64;

    match spec {
        &SensorSurfaceSpec::FlatRect { x_extent, y_extent } => {
            let area = x_extent * y_extent / n as f64;
            for r in 0..height {
                for c in 0..width {
                    let x = -x_extent / 2.0 + x_extent * center(c, width);
                    let y = -y_extent / 2.0 + y_extent * center(r, height);
                    points.push(Point3::new(x, y, delta));
                    normals.push(-Vector3::z());
                    areas.push(area);
                }
            }
        }
        &SensorSurfaceSpec::SphericalCap { radius, half_angle } => {
            let sphere_center = Point3::new(0.0, 0.0, -radius);
            let d_theta = half_angle / height as f64;
            let d_phi = 2.0 * PI / width as f64;
            for r in 0..height {
                let theta = half_angle * center(r, height);
                let lo = r as f64 * d_theta;
                let hi = lo + d_theta;
                let area = radius * radius * (lo.cos() - hi.cos()) * d_phi;
                for c in 0..width {
                    let phi = 2.0 * PI * center(c, width);
                    let out = Vector3::new(
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    );
                    points.push(sphere_center + out * (radius + delta));
                    normals.push(-out);
                    areas.push(area);
                }
            }
        }
        &SensorSurfaceSpec::CylindricalPatch {
            radius,
            axial_length,
            arc_half_angle,
        } => {
            let area = radius * 2.0 * arc_half_angle / width as f64 * axial_length / height as f64;
            for r in 0..height {
                let y = -axial_length / 2.0 + axial_length * center(r, height);
                let axis_point = Point3::new(0.0, y, -radius);
                for c in 0..width {
                    let psi = -arc_half_angle + 2.0 * arc_half_angle * center(c, width);
                    let out = Vector3::new(psi.sin(), 0.0, psi.cos());
                    points.push(axis_point + out * (radius + delta));
                    normals.push(-out);
                    areas.push(area);
                }
            }
        }
        SensorSurfaceSpec::MeshSurface { mesh, chart } => {
            let chart = chart.as_ref().expect("validated");
            sample_mesh_surface(mesh, chart, height, width, delta, &mut points, &mut normals, &mut areas)?;
        }
    }

    Ok(SensingGrid {
        height,
        width,
        points,
        inward_normals: normals,
        pixel_areas: areas,
        d_max,
        delta,
    })
}

#[allow(clippy::too_many_arguments)]
fn sample_mesh_surface(
    mesh: &Arc<TriangleMesh>,
    chart: &ParamChart,
    height: usize,
    width: usize,
    delta: f64,
    points: &mut Vec<Point3>,
    normals: &mut Vec<Vector3>,
    areas: &mut Vec<f64>,
) -> Result<()> {
    mesh.check_consistent_orientation()
        .map_err(|e| Error::InvalidSensor(format!("sensor mesh orientation: {e}")))?;
    let collider = Collider::new((**mesh).clone());
    let vertex_normals = mesh.vertex_normals();
    let row_axis = Vector3::from(chart.row_axis);
    let col_axis = Vector3::from(chart.col_axis);
    let outward = col_axis.cross(&row_axis);
    let chart_center = Point3::from(chart.center);

    let (lo, hi) = mesh.bounds();
    let reach = (hi - lo).norm() + (chart_center - lo).norm() + 1.0;
    let cell_area = chart.row_extent_m * chart.col_extent_m / (height * width) as f64;

    for r in 0..height {
        let along_row = chart.row_extent_m * ((r as f64 + 0.5) / height as f64 - 0.5);
        for c in 0..width {
            let along_col = chart.col_extent_m * ((c as f64 + 0.5) / width as f64 - 0.5);
            let on_chart = chart_center + row_axis * along_row + col_axis * along_col;
            let ray = Ray::new(on_chart + outward * reach, -outward, 2.0 * reach)?;
            let hit = collider.raycast(&ray, FacingFilter::Any).ok_or_else(|| {
                Error::InvalidSensor(format!("chart cell ({r}, {c}) does not project onto the sensor mesh"))
            })?;
            let tri = hit.triangle as usize;
            let face_normal = mesh.normals()[tri];
            let cos = face_normal.dot(&outward);
            if cos <= 0.0 {
                return Err(Error::InvalidSensor(format!(
                    "sensor mesh face {tri} under chart cell ({r}, {c}) faces inward; normals must point out of the sensor"
                )));
            }
            let [a, b, cpt] = mesh.corners(tri);
            let bary = barycentric(&hit.point, &a, &b, &cpt);
            let ids = mesh.triangles()[tri];
            let mut n = ids
                .iter()
                .zip(bary.iter())
                .map(|(&ix, &w)| vertex_normals[ix as usize] * w)
                .sum::<Vector3>();
            if n.norm() == 0.0 {
                n = face_normal;
            }
            let n = n.normalize();
            points.push(hit.point + n * delta);
            normals.push(-n);
            areas.push(cell_area / cos);
        }
    }
    Ok(())
}

fn barycentric(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> [f64; 3] {
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}
