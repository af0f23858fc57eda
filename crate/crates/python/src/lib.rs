//! Python module `tacmap`: scene sessions with batched rendering. All
//! numerics happen in the core crate; this layer only converts types.

use std::collections::BTreeMap;

use numpy::{PyArray1, PyArrayMethods};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use tacmap::render::render_batch;
use tacmap::scene::{load_scene, LoadedScene};
use tacmap::signals::compute_signals;
use tacmap::{DeformMap, Error, RigidPose};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyOSError::new_err(err.to_string()),
        Error::Invariant(_) => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_pose(values: &[f64], field: &str) -> PyResult<RigidPose> {
    if values.len() != 7 {
        return Err(PyValueError::new_err(format!(
            "{field}: expected 7 values w,x,y,z,tx,ty,tz, got {}",
            values.len()
        )));
    }
    RigidPose::from_wxyz_with_tolerance(
        [values[0], values[1], values[2], values[3]],
        [values[4], values[5], values[6]],
        tacmap::geometry::INPUT_QUATERNION_TOLERANCE,
    )
    .map_err(|e| PyValueError::new_err(format!("{field}: {e}")))
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).expect("json");
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[derive(Clone)]
struct EnvPoses {
    sensor: RigidPose,
    objects: BTreeMap<String, RigidPose>,
}

/// A loaded scene with `num_envs` independent environments.
#[pyclass(module = "tacmap")]
struct Session {
    scene: Option<LoadedScene>,
    envs: Vec<EnvPoses>,
}

impl Session {
    fn scene(&self) -> PyResult<&LoadedScene> {
        self.scene
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("session is closed"))
    }

    fn maps(&self) -> PyResult<Vec<DeformMap>> {
        let scene = self.scene()?;
        let states = self
            .envs
            .iter()
            .map(|e| scene.state(e.sensor, &e.objects))
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        Ok(render_batch(&scene.grid, &states, scene.render_config()))
    }
}

#[pymethods]
impl Session {
    #[getter]
    fn num_envs(&self) -> usize {
        self.envs.len()
    }

    /// `(H, W)` of every rendered map.
    #[getter]
    fn shape(&self) -> PyResult<(usize, usize)> {
        let grid = &self.scene()?.grid;
        Ok((grid.height, grid.width))
    }

    #[getter]
    fn object_names(&self) -> PyResult<Vec<String>> {
        Ok(self.scene()?.objects.iter().map(|o| o.name.clone()).collect())
    }

    /// Sets poses (`[w, x, y, z, tx, ty, tz]`, meters) for one environment or,
    /// when `env_index` is None, for all of them. Objects missing from
    /// `object_poses` are removed from the scene.
    #[pyo3(signature = (sensor_pose, object_poses, env_index=None))]
    fn set_poses(
        &mut self,
        sensor_pose: Vec<f64>,
        object_poses: BTreeMap<String, Vec<f64>>,
        env_index: Option<usize>,
    ) -> PyResult<()> {
        let scene = self.scene()?;
        let sensor = parse_pose(&sensor_pose, "sensor_pose")?;
        let mut objects = BTreeMap::new();
        for (name, values) in object_poses {
            if scene.object(&name).is_none() {
                return Err(PyValueError::new_err(format!("unknown object {name:?}")));
            }
            let pose = parse_pose(&values, &format!("object_poses[{name}]"))?;
            objects.insert(name, pose);
        }
        let poses = EnvPoses { sensor, objects };
        match env_index {
            Some(i) if i >= self.envs.len() => Err(PyValueError::new_err(format!(
                "env_index {i} out of range for {} envs",
                self.envs.len()
            ))),
            Some(i) => {
                self.envs[i] = poses;
                Ok(())
            }
            None => {
                self.envs.fill(poses);
                Ok(())
            }
        }
    }

    /// Renders every environment. Returns a float32 array of shape
    /// `(num_envs, H, W)` in meters.
    fn render<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let maps = self.maps()?;
        let (h, w) = self.shape()?;
        let data: Vec<f32> = maps.iter().flat_map(|m| m.depths_f32()).collect();
        let array = PyArray1::from_vec(py, data).reshape([maps.len(), h, w])?;
        Ok(array.into_any())
    }

    /// Contact signals per environment, as dicts.
    fn signals(&self, py: Python<'_>) -> PyResult<Vec<Py<PyAny>>> {
        let scene = self.scene()?;
        self.maps()?
            .iter()
            .map(|m| {
                let s = compute_signals(m, &scene.grid, scene.tau(), scene.force_model()).map_err(to_py)?;
                json_to_py(py, &serde_json::to_value(s).expect("json"))
            })
            .collect()
    }

    /// Grid metadata as written by the `grid` command.
    fn grid_descriptor(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let scene = self.scene()?;
        let grid = &scene.grid;
        let desc = serde_json::json!({
            "variant": scene.config.sensor.variant,
            "dims": scene.config.sensor.dims,
            "H": grid.height,
            "W": grid.width,
            "delta_m": grid.delta,
            "d_max_m": grid.d_max,
            "point_count": grid.len(),
            "total_area_m2": grid.total_area(),
        });
        json_to_py(py, &desc)
    }

    fn close(&mut self) {
        self.scene = None;
        self.envs.clear();
    }

    #[getter]
    fn closed(&self) -> bool {
        self.scene.is_none()
    }
}

/// Loads a scene config and creates `num_envs` environments at identity poses.
#[pyfunction]
fn open_session(scene_path: std::path::PathBuf, num_envs: usize) -> PyResult<Session> {
    if num_envs == 0 {
        return Err(PyValueError::new_err("num_envs must be >= 1"));
    }
    let scene = load_scene(&scene_path).map_err(to_py)?;
    let env = EnvPoses {
        sensor: RigidPose::identity(),
        objects: BTreeMap::new(),
    };
    Ok(Session {
        scene: Some(scene),
        envs: vec![env; num_envs],
    })
}

/// Reads a TMAP file into a float32 `(H, W)` array.
#[pyfunction]
fn read_tmap<'py>(py: Python<'py>, path: std::path::PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let map = DeformMap::read_tmap(&path).map_err(to_py)?;
    let array = PyArray1::from_vec(py, map.depths_f32()).reshape([map.height, map.width])?;
    Ok(array.into_any())
}

#[pymodule]
#[pyo3(name = "tacmap")]
fn tacmap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", tacmap::VERSION)?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(open_session, m)?)?;
    m.add_function(wrap_pyfunction!(read_tmap, m)?)?;
    Ok(())
}
