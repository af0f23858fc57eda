//! Scene configuration, pose trajectories and trajectory replay.
//!
//! A scene file is JSON:
//!
//! ```json
//! {
//!   "sensor": {"variant": "flat_rect", "dims": {"x_m": 0.02, "y_m": 0.02},
//!              "H": 64, "W": 64, "delta_m": 0.0, "d_max_m": 0.002},
//!   "objects": [{"name": "ball", "mesh": "ball.obj", "unit_scale": 0.001}],
//!   "render": {"facing": "back_only", "t_max_m": null, "combine": "max"},
//!   "force": {"k_n_per_m3": 1e6},
//!   "tau_m": 5e-5
//! }
//! ```
//!
//! Mesh paths are relative to the scene file. Trajectories are JSON lines,
//! one frame per line: `{"ts": 0.0, "sensor_pose": {"q": [w,x,y,z], "t":
//! [x,y,z]}, "objects": {"ball": {...}}}`. Objects without a pose in a frame
//! are left out of that frame.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{load_mesh, Collider, RigidPose, Vector3};
use crate::render::{render_batch, DeformMap, RenderConfig, SceneObject, SceneState};
use crate::sensor::{generate_sensing_grid, ParamChart, SensingGrid, SensorSurfaceSpec};
use crate::signals::{compute_signals, ForceModel, DEFAULT_TAU};

pub const MANIFEST_FILE: &str = "manifest.json";
const REPLAY_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceVariant {
    FlatRect,
    SphericalCap,
    CylindricalPatch,
    MeshSurface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub variant: SurfaceVariant,
    /// Variant-specific dimensions, see [`SurfaceVariant`].
    pub dims: serde_json::Value,
    #[serde(rename = "H", default = "default_resolution")]
    pub height: usize,
    #[serde(rename = "W", default = "default_resolution")]
    pub width: usize,
    #[serde(default)]
    pub delta_m: f64,
    #[serde(default = "default_d_max")]
    pub d_max_m: f64,
}

fn default_resolution() -> usize {
    64
}

fn default_d_max() -> f64 {
    2e-3
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

fn default_unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlatDims {
    x_m: f64,
    y_m: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapDims {
    radius_m: f64,
    half_angle_rad: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CylinderDims {
    radius_m: f64,
    length_m: f64,
    arc_half_angle_rad: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshDims {
    mesh: PathBuf,
    #[serde(default = "default_unit_scale")]
    unit_scale: f64,
    chart: Option<ParamChart>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub name: String,
    pub mesh: PathBuf,
    #[serde(default = "default_unit_scale")]
    pub unit_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub sensor: SensorConfig,
    #[serde(default)]
    pub objects: Vec<ObjectConfig>,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub force: ForceModel,
    #[serde(default = "default_tau")]
    pub tau_m: f64,
}

#[derive(Debug, Clone)]
pub struct NamedCollider {
    pub name: String,
    pub collider: Arc<Collider>,
}

/// A scene with meshes loaded, BVHs built and the sensing grid generated.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub path: PathBuf,
    pub config: SceneConfig,
    /// SHA-256 over the scene file and every referenced mesh file.
    pub config_hash: String,
    pub surface: SensorSurfaceSpec,
    pub grid: SensingGrid,
    pub objects: Vec<NamedCollider>,
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        Error::Config {
            path: path.to_owned(),
            message: format!(
                "{what} field `{field}`: {inner} (line {}, column {})",
                inner.line(),
                inner.column()
            ),
        }
    })
}

fn dims<T: DeserializeOwned>(value: &serde_json::Value, path: &Path) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
        path: path.to_owned(),
        message: format!("sensor.dims field `{}`: {}", e.path(), e.inner()),
    })
}

/// Loads a scene file. Loading the same file twice gives identical results.
pub fn load_scene(path: impl AsRef<Path>) -> Result<LoadedScene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: SceneConfig = parse_json(&text, path, "scene")?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());

    let config_err = |message: String| Error::Config {
        path: path.to_owned(),
        message,
    };
    let read_mesh = |rel: &Path, scale: f64, hasher: &mut Sha256| -> Result<_> {
        let full = base.join(rel);
        let bytes = fs::read(&full).map_err(|e| Error::io(&full, e))?;
        hasher.update(&bytes);
        load_mesh(&full, scale)
    };

    let s = &config.sensor;
    let surface = match s.variant {
        SurfaceVariant::FlatRect => {
            let d: FlatDims = dims(&s.dims, path)?;
            SensorSurfaceSpec::FlatRect {
                x_extent: d.x_m,
                y_extent: d.y_m,
            }
        }
        SurfaceVariant::SphericalCap => {
            let d: CapDims = dims(&s.dims, path)?;
            SensorSurfaceSpec::SphericalCap {
                radius: d.radius_m,
                half_angle: d.half_angle_rad,
            }
        }
        SurfaceVariant::CylindricalPatch => {
            let d: CylinderDims = dims(&s.dims, path)?;
            SensorSurfaceSpec::CylindricalPatch {
                radius: d.radius_m,
                axial_length: d.length_m,
                arc_half_angle: d.arc_half_angle_rad,
            }
        }
        SurfaceVariant::MeshSurface => {
            let d: MeshDims = dims(&s.dims, path)?;
            SensorSurfaceSpec::MeshSurface {
                mesh: Arc::new(read_mesh(&d.mesh, d.unit_scale, &mut hasher)?),
                chart: d.chart,
            }
        }
    };
    let grid = generate_sensing_grid(&surface, s.height, s.width, s.delta_m, s.d_max_m)
        .map_err(|e| config_err(format!("sensor: {e}")))?;

    let mut objects = Vec::with_capacity(config.objects.len());
    for (i, obj) in config.objects.iter().enumerate() {
        if objects.iter().any(|o: &NamedCollider| o.name == obj.name) {
            return Err(config_err(format!("objects[{i}]: duplicate name {:?}", obj.name)));
        }
        let mesh = read_mesh(&obj.mesh, obj.unit_scale, &mut hasher)?;
        objects.push(NamedCollider {
            name: obj.name.clone(),
            collider: Arc::new(Collider::new(mesh)),
        });
    }
    if let Some(t) = config.render.t_max {
        if !(t > 0.0) {
            return Err(config_err(format!("render.t_max_m must be > 0, got {t}")));
        }
    }
    ForceModel::new(config.force.stiffness).map_err(|e| config_err(format!("force: {e}")))?;
    if !(config.tau_m >= 0.0) {
        return Err(config_err(format!("tau_m must be >= 0, got {}", config.tau_m)));
    }

    let config_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedScene {
        path: path.to_owned(),
        config,
        config_hash,
        surface,
        grid,
        objects,
    })
}

impl LoadedScene {
    pub fn render_config(&self) -> &RenderConfig {
        &self.config.render
    }

    pub fn force_model(&self) -> &ForceModel {
        &self.config.force
    }

    pub fn tau(&self) -> f64 {
        self.config.tau_m
    }

    pub fn object(&self, name: &str) -> Option<&NamedCollider> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// Scene state for the given poses; objects without a pose are omitted.
    pub fn state(
        &self,
        sensor_pose: RigidPose,
        object_poses: &BTreeMap<String, RigidPose>,
    ) -> Result<SceneState> {
        for name in object_poses.keys() {
            if self.object(name).is_none() {
                return Err(Error::InvalidArgument(format!("unknown object {name:?}")));
            }
        }
        Ok(SceneState {
            sensor_pose,
            objects: self
                .objects
                .iter()
                .filter_map(|o| {
                    object_poses.get(&o.name).map(|pose| SceneObject {
                        collider: o.collider.clone(),
                        pose: *pose,
                    })
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFrame {
    pub ts: f64,
    pub sensor_pose: RigidPose,
    #[serde(default)]
    pub objects: BTreeMap<String, RigidPose>,
}

/// Timestamped poses, replayed exactly as recorded (no interpolation).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<TrajectoryFrame>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks increasing timestamps and, with a scene, object names.
    pub fn validate(&self, scene: Option<&LoadedScene>) -> Result<()> {
        for (i, f) in self.frames.iter().enumerate() {
            if !f.ts.is_finite() {
                return Err(Error::Trajectory(format!("frame {i}: timestamp is not finite")));
            }
            if i > 0 && f.ts <= self.frames[i - 1].ts {
                return Err(Error::Trajectory(format!(
                    "frame {i}: timestamp {} does not increase (previous {})",
                    f.ts,
                    self.frames[i - 1].ts
                )));
            }
            if let Some(scene) = scene {
                if let Some(name) = f.objects.keys().find(|n| scene.object(n).is_none()) {
                    return Err(Error::Trajectory(format!(
                        "frame {i}: object {name:?} is not in the scene"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Trajectory> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut frames = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let frame: TrajectoryFrame = parse_json(&line, path, &format!("line {}:", i + 1))?;
            frames.push(frame);
        }
        let t = Trajectory { frames };
        t.validate(None)?;
        Ok(t)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for f in &self.frames {
            text.push_str(&serde_json::to_string(f).expect("frame serializes"));
            text.push('\n');
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// `count` frames evenly spaced over the trajectory, endpoints included.
    pub fn subsample(&self, count: usize) -> Trajectory {
        let n = self.frames.len();
        if count == 0 || count >= n {
            return self.clone();
        }
        let picks: Vec<usize> = if count == 1 {
            vec![0]
        } else {
            (0..count)
                .map(|i| ((i * (n - 1)) as f64 / (count - 1) as f64).round() as usize)
                .collect()
        };
        Trajectory {
            frames: picks.into_iter().map(|i| self.frames[i].clone()).collect(),
        }
    }
}

/// A straight press: the object approaches along `-axis` from a positive
/// clearance to a final penetration, then optionally holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressProfile {
    /// Outward direction at the contact site (the press moves along `-axis`).
    pub axis: Vector3,
    pub start_clearance: f64,
    pub end_depth: f64,
    pub steps: usize,
    /// Extra frames held at the final depth.
    pub dwell_frames: usize,
    pub frame_dt: f64,
}

impl Default for PressProfile {
    fn default() -> Self {
        PressProfile {
            axis: Vector3::z(),
            start_clearance: 1e-3,
            end_depth: 1e-3,
            steps: 6,
            dwell_frames: 0,
            frame_dt: 0.1,
        }
    }
}

impl PressProfile {
    /// Signed tip height of each frame; positive is clearance.
    pub fn tip_heights(&self) -> Vec<f64> {
        let n = self.steps;
        let span = self.start_clearance + self.end_depth;
        let mut h: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 == n {
                    -self.end_depth
                } else {
                    self.start_clearance - span * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        h.extend(std::iter::repeat_n(-self.end_depth, self.dwell_frames));
        h
    }
}

/// Builds a press trajectory for one object with the sensor at the identity
/// pose. The tip is the object's extreme vertex along `-axis`, and tip height
/// is measured along `axis` from the sensor origin.
pub fn make_press_trajectory(
    scene: &LoadedScene,
    object: &str,
    profile: &PressProfile,
) -> Result<Trajectory> {
    let target = scene
        .object(object)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown object {object:?}")))?;
    if profile.steps < 2 {
        return Err(Error::InvalidArgument(format!("press needs at least 2 steps, got {}", profile.steps)));
    }
    if !(profile.start_clearance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "start clearance must be > 0, got {}",
            profile.start_clearance
        )));
    }
    let d_max = scene.grid.d_max;
    if !(profile.end_depth > 0.0 && profile.end_depth <= d_max) {
        return Err(Error::InvalidArgument(format!(
            "end depth {} must be in (0, d_max = {d_max}]",
            profile.end_depth
        )));
    }
    if !(profile.frame_dt > 0.0) {
        return Err(Error::InvalidArgument(format!("frame dt must be > 0, got {}", profile.frame_dt)));
    }
    let norm = profile.axis.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("press axis must be non-zero".into()));
    }
    let axis = profile.axis / norm;
    let tip = target
        .collider
        .mesh
        .vertices()
        .iter()
        .map(|v| v.coords.dot(&axis))
        .fold(f64::INFINITY, f64::min);

    let frames = profile
        .tip_heights()
        .into_iter()
        .enumerate()
        .map(|(i, h)| TrajectoryFrame {
            ts: i as f64 * profile.frame_dt,
            sensor_pose: RigidPose::identity(),
            objects: BTreeMap::from([(
                object.to_owned(),
                RigidPose::from_translation(axis * (h - tip)),
            )]),
        })
        .collect();
    Ok(Trajectory { frames })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub index: usize,
    pub ts: f64,
    pub tmap: String,
    pub signals: String,
    pub max_depth_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayManifest {
    pub toolkit_version: String,
    pub config_hash: String,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub d_max_m: f64,
    pub frame_count: usize,
    pub frames: Vec<ManifestFrame>,
}

fn frame_stem(index: usize) -> String {
    format!("frame_{index:06}")
}

fn is_frame_artifact(name: &str) -> bool {
    name.starts_with("frame_") && (name.ends_with(".tmap") || name.ends_with(".json"))
}

/// Renders every frame and writes `frame_NNNNNN.tmap`, `frame_NNNNNN.json`
/// (contact signals) and `manifest.json` into `out_dir`. Frame artifacts left
/// over from an earlier run in the same directory are removed first.
pub fn replay(scene: &LoadedScene, trajectory: &Trajectory, out_dir: &Path) -> Result<ReplayManifest> {
    trajectory.validate(Some(scene))?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for entry in fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e))? {
        let entry = entry.map_err(|e| Error::io(out_dir, e))?;
        if entry.file_name().to_str().is_some_and(is_frame_artifact) {
            fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        }
    }

    let mut manifest_frames = Vec::with_capacity(trajectory.len());
    for (chunk_index, chunk) in trajectory.frames.chunks(REPLAY_CHUNK).enumerate() {
        let states = chunk
            .iter()
            .map(|f| scene.state(f.sensor_pose, &f.objects))
            .collect::<Result<Vec<_>>>()?;
        let maps = render_batch(&scene.grid, &states, scene.render_config());
        for (k, (frame, map)) in chunk.iter().zip(&maps).enumerate() {
            let index = chunk_index * REPLAY_CHUNK + k;
            manifest_frames.push(write_frame(scene, out_dir, index, frame.ts, map)?);
        }
    }

    let manifest = ReplayManifest {
        toolkit_version: crate::VERSION.into(),
        config_hash: scene.config_hash.clone(),
        height: scene.grid.height,
        width: scene.grid.width,
        d_max_m: scene.grid.d_max,
        frame_count: manifest_frames.len(),
        frames: manifest_frames,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn write_frame(scene: &LoadedScene, dir: &Path, index: usize, ts: f64, map: &DeformMap) -> Result<ManifestFrame> {
    let stem = frame_stem(index);
    let tmap = format!("{stem}.tmap");
    let signals_name = format!("{stem}.json");
    map.write_tmap(dir.join(&tmap))?;
    let signals = compute_signals(map, &scene.grid, scene.tau(), scene.force_model())?;
    let path = dir.join(&signals_name);
    let text = serde_json::to_string_pretty(&signals).expect("signals serialize");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(ManifestFrame {
        index,
        ts,
        tmap,
        signals: signals_name,
        max_depth_m: map.max_depth(),
    })
}

/// Groups objects by name for quick pose lookups from flat lists.
pub fn poses_by_name(entries: impl IntoIterator<Item = (String, RigidPose)>) -> Result<BTreeMap<String, RigidPose>> {
    let mut out = BTreeMap::new();
    let mut seen = HashMap::new();
    for (name, pose) in entries {
        if seen.insert(name.clone(), ()).is_some() {
            return Err(Error::InvalidArgument(format!("pose for {name:?} given twice")));
        }
        out.insert(name, pose);
    }
    Ok(out)
}
