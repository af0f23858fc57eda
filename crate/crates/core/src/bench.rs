//! Batched rendering throughput and memory scaling across environment counts.
//!
//! Every environment gets seeded random object poses near the sensor. For
//! each count the batch output is allocated, warmed up, then timed over the
//! configured frames while the process resident-set peak is tracked.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vector3};
use crate::render::{render_batch_into, render_deform_map, DeformMap, SceneObject, SceneState};
use crate::scene::LoadedScene;

pub const DEFAULT_ENV_COUNTS: [usize; 6] = [16, 64, 256, 1024, 4096, 8192];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub env_counts: Vec<usize>,
    pub frames: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Counts whose output batch would exceed this are reported as failed.
    pub mem_limit_bytes: Option<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            env_counts: DEFAULT_ENV_COUNTS.to_vec(),
            frames: 4,
            warmup: 1,
            seed: 0,
            mem_limit_bytes: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.env_counts.is_empty() || self.env_counts.contains(&0) {
            return Err(Error::InvalidArgument("env counts must be non-empty and positive".into()));
        }
        if self.env_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("env counts must be strictly ascending".into()));
        }
        if self.frames == 0 {
            return Err(Error::InvalidArgument("frames must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub env_count: usize,
    pub frames: usize,
    pub wall_time_s: f64,
    pub total_renders_per_sec: f64,
    /// Frame rate seen by each environment: total rate over env count.
    pub per_env_renders_per_sec: f64,
    pub peak_mem_bytes: u64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
    /// First environment's map in the batch matches a standalone render.
    pub checksum_matches: bool,
}

impl BenchRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(env_count: usize, frames: usize, reason: String) -> Self {
        BenchRow {
            env_count,
            frames,
            wall_time_s: 0.0,
            total_renders_per_sec: 0.0,
            per_env_renders_per_sec: 0.0,
            peak_mem_bytes: 0,
            status: format!("failed: {reason}"),
            checksum_matches: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchEnvironment {
    pub cores: usize,
    pub worker_threads: usize,
    pub os: String,
    pub toolkit_version: String,
    pub memory_probe: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub environment: BenchEnvironment,
    pub rows: Vec<BenchRow>,
    /// Set when at least one count failed.
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope · x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "linear fit needs at least 3 points, got {}",
            xs.len().min(ys.len())
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("linear fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Least-squares fit of peak memory against env count over successful rows.
pub fn fit_linear_memory(result: &BenchResult) -> Result<LinearFit> {
    let ok: Vec<&BenchRow> = result.rows.iter().filter(|r| r.is_ok()).collect();
    let xs: Vec<f64> = ok.iter().map(|r| r.env_count as f64).collect();
    let ys: Vec<f64> = ok.iter().map(|r| r.peak_mem_bytes as f64).collect();
    fit_line(&xs, &ys)
}

/// Object poses indexed `[frame][env][object]`, deterministic in `seed` and
/// `env_count`.
pub fn bench_poses(scene: &LoadedScene, seed: u64, env_count: usize, frames: usize) -> Vec<Vec<Vec<RigidPose>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = scene
        .grid
        .points
        .iter()
        .fold((Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)), |(lo, hi), p| {
            (lo.inf(&p.coords), hi.sup(&p.coords))
        });
    let half_span = (hi - lo) * 0.5 * 0.3;
    let d_max = scene.grid.d_max;
    let tips: Vec<f64> = scene
        .objects
        .iter()
        .map(|o| {
            o.collider
                .mesh
                .vertices()
                .iter()
                .map(|v| v.z)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    (0..frames)
        .map(|_| {
            (0..env_count)
                .map(|_| {
                    tips.iter()
                        .map(|&tip| {
                            let dx = rng.random_range(-1.0..=1.0) * half_span.x;
                            let dy = rng.random_range(-1.0..=1.0) * half_span.y;
                            let depth = rng.random_range(-0.25..=0.75) * d_max;
                            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
                            let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw);
                            // yaw about z keeps the lowest point's height
                            RigidPose::new(rot, Vector3::new(dx, dy, -depth - tip))
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn states_for(scene: &LoadedScene, poses: &[Vec<RigidPose>]) -> Vec<SceneState> {
    poses
        .iter()
        .map(|env| SceneState {
            sensor_pose: RigidPose::identity(),
            objects: scene
                .objects
                .iter()
                .zip(env)
                .map(|(o, pose)| SceneObject {
                    collider: o.collider.clone(),
                    pose: *pose,
                })
                .collect(),
        })
        .collect()
}

pub fn run_bench(scene: &LoadedScene, cfg: &BenchConfig) -> Result<BenchResult> {
    run_bench_with(scene, cfg, |_| Ok(()))
}

/// Runs the benchmark, handing each row to `on_row` as soon as it is measured.
pub fn run_bench_with(
    scene: &LoadedScene,
    cfg: &BenchConfig,
    mut on_row: impl FnMut(&BenchRow) -> Result<()>,
) -> Result<BenchResult> {
    cfg.validate()?;
    let grid = &scene.grid;
    let render_cfg = scene.render_config();
    let map_bytes = (grid.len() * std::mem::size_of::<f64>() + std::mem::size_of::<DeformMap>()) as u64;
    let mut rows = Vec::with_capacity(cfg.env_counts.len());

    for &count in &cfg.env_counts {
        let row = (|| {
            let batch_bytes = map_bytes * count as u64;
            if let Some(limit) = cfg.mem_limit_bytes {
                if batch_bytes > limit {
                    return BenchRow::failed(
                        count,
                        cfg.frames,
                        format!("batch needs {batch_bytes} bytes, limit is {limit}"),
                    );
                }
            }
            let poses = bench_poses(scene, cfg.seed, count, cfg.warmup + cfg.frames);
            let states: Vec<Vec<SceneState>> = poses.iter().map(|p| states_for(scene, p)).collect();

            memory::reset_peak();
            let mut out = Vec::new();
            if out.try_reserve_exact(count).is_err() {
                return BenchRow::failed(count, cfg.frames, "allocation failed".into());
            }
            for _ in 0..count {
                match DeformMap::try_zeros(grid.height, grid.width, grid.d_max) {
                    Some(m) => out.push(m),
                    None => return BenchRow::failed(count, cfg.frames, "allocation failed".into()),
                }
            }

            for frame in &states[..cfg.warmup] {
                render_batch_into(grid, frame, render_cfg, &mut out);
            }
            let start = Instant::now();
            for frame in &states[cfg.warmup..] {
                render_batch_into(grid, frame, render_cfg, &mut out);
            }
            let wall = start.elapsed().as_secs_f64().max(1e-9);
            let peak = memory::peak_rss_bytes().unwrap_or(0);

            let last = states.last().expect("frames >= 1");
            let standalone = render_deform_map(grid, &last[0], render_cfg);
            let total = (count * cfg.frames) as f64 / wall;
            BenchRow {
                env_count: count,
                frames: cfg.frames,
                wall_time_s: wall,
                total_renders_per_sec: total,
                per_env_renders_per_sec: total / count as f64,
                peak_mem_bytes: peak,
                status: "ok".into(),
                checksum_matches: standalone.checksum() == out[0].checksum(),
            }
        })();
        on_row(&row)?;
        rows.push(row);
    }

    let partial = rows.iter().any(|r| !r.is_ok());
    Ok(BenchResult {
        environment: BenchEnvironment {
            cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
            worker_threads: rayon::current_num_threads(),
            os: std::env::consts::OS.into(),
            toolkit_version: crate::VERSION.into(),
            memory_probe: memory::PROBE.into(),
        },
        rows,
        partial,
    })
}

pub const BENCH_CSV_HEADER: &str =
    "env_count,frames,total_renders_per_sec,per_env_renders_per_sec,peak_mem_bytes,status";

pub fn csv_line(row: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        row.env_count,
        row.frames,
        row.total_renders_per_sec,
        row.per_env_renders_per_sec,
        row.peak_mem_bytes,
        row.status.replace(',', ";")
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    #[serde(flatten)]
    pub result: BenchResult,
    pub memory_fit: Option<LinearFit>,
}

pub fn write_summary(result: &BenchResult, path: &Path) -> Result<BenchSummary> {
    let summary = BenchSummary {
        result: result.clone(),
        memory_fit: fit_linear_memory(result).ok(),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(summary)
}

mod memory {
    #[cfg(target_os = "linux")]
    pub const PROBE: &str = "linux /proc/self/status VmHWM, reset per count via /proc/self/clear_refs";
    #[cfg(not(target_os = "linux"))]
    pub const PROBE: &str = "getrusage ru_maxrss (process lifetime peak)";

    /// Resets the kernel's peak-RSS watermark where supported.
    pub fn reset_peak() -> bool {
        #[cfg(target_os = "linux")]
        {
            std::fs::write("/proc/self/clear_refs", "5").is_ok()
        }
        #[cfg(not(target_os = "linux"))]
        {
            false
        }
    }

    pub fn peak_rss_bytes() -> Option<u64> {
        #[cfg(target_os = "linux")]
        if let Ok(status) = std::fs::read_to_string("/proc/self/status") {
            if let Some(kb) = status
                .lines()
                .find_map(|l| l.strip_prefix("VmHWM:"))
                .and_then(|v| v.trim().trim_end_matches("kB").trim().parse::<u64>().ok())
            {
                return Some(kb * 1024);
            }
        }
        rusage_peak()
    }

    fn rusage_peak() -> Option<u64> {
        let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
        // SAFETY: getrusage writes into the provided struct only.
        if unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) } != 0 {
            return None;
        }
        let raw = usage.ru_maxrss as u64;
        // macOS reports bytes, other Unixes kilobytes.
        Some(if cfg!(target_os = "macos") { raw } else { raw * 1024 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [16.0, 64.0, 256.0, 1024.0];
        let ys: Vec<f64> = xs.iter().map(|x| 100.0 + 2.0 * x).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 100.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_is_imperfect() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert!(fit.r_squared < 1.0);
    }

    #[test]
    fn needs_three_points() {
        assert!(fit_line(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = BenchConfig::default();
        cfg.validate().unwrap();
        cfg.env_counts = vec![64, 16];
        assert!(cfg.validate().is_err());
        cfg.env_counts = vec![16];
        cfg.frames = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn peak_rss_is_reported() {
        assert!(memory::peak_rss_bytes().unwrap() > 0);
    }
}
