//! `tacmap` command-line front end.
//!
//! Lengths are meters and poses are `w,x,y,z,tx,ty,tz` (quaternion first).
//! JSON results go to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 2 usage or input error, 3 I/O error, 4 internal invariant violation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bench::{self, BenchConfig};
use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vector3, INPUT_QUATERNION_TOLERANCE};
use crate::metrics::compare_sequences;
use crate::render::{render_deform_map, DeformMap};
use crate::scene::{self, load_scene, make_press_trajectory, PressProfile, Trajectory};
use crate::sensor::export_grid;
use crate::signals::{compute_signals, DEFAULT_TAU};

#[derive(Debug, Parser)]
#[command(name = "tacmap", version, about = "Tactile deform map rendering and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one deform map for the given poses.
    Render(RenderArgs),
    /// Render every frame of a trajectory file.
    Replay(ReplayArgs),
    /// Compare two deform maps or two directories of maps.
    Compare(CompareArgs),
    /// Measure batched rendering throughput and memory across env counts.
    Bench(BenchArgs),
    /// Export the sensing grid of a scene.
    Grid(GridArgs),
    /// Write a straight press trajectory for one object.
    MakePress(MakePressArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Scene configuration (JSON).
    #[arg(long)]
    pub scene: PathBuf,
    /// Sensor pose `w,x,y,z,tx,ty,tz`; identity when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub sensor_pose: Option<String>,
    /// Object pose `name=w,x,y,z,tx,ty,tz`; repeatable. Objects without a
    /// pose are left out of the scene.
    #[arg(long = "object-pose", allow_hyphen_values = true)]
    pub object_poses: Vec<String>,
    /// Output TMAP file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a 16-bit PGM next to the TMAP.
    #[arg(long)]
    pub pgm: bool,
    /// Also write a CSV next to the TMAP.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Trajectory, JSON lines.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only this many evenly spaced frames.
    #[arg(long)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// TMAP file or directory of TMAP files (the prediction).
    #[arg(long)]
    pub a: PathBuf,
    /// TMAP file or directory of TMAP files (the reference).
    #[arg(long)]
    pub b: PathBuf,
    /// Contact threshold in meters; defaults to the scene's, else 5e-5.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Scene whose sensing grid enables metric position and force errors.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Output directory for report.json and report.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Ascending environment counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_ENV_COUNTS)]
    pub counts: Vec<usize>,
    /// Timed frames per count.
    #[arg(long, default_value_t = 4)]
    pub frames: usize,
    /// Untimed frames per count.
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    /// Seed for pose randomization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Treat output batches larger than this as allocation failures.
    #[arg(long)]
    pub mem_limit_bytes: Option<u64>,
    /// Output directory for bench.csv and bench_summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Output directory for grid.json and grid.bin.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakePressArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Object to press.
    #[arg(long)]
    pub object: String,
    /// Outward press axis `x,y,z`; the object moves along its negative.
    #[arg(long, default_value = "0,0,1", allow_hyphen_values = true)]
    pub axis: String,
    /// Initial tip clearance (m).
    #[arg(long)]
    pub clearance: f64,
    /// Final penetration depth (m), at most the scene's d_max.
    #[arg(long)]
    pub depth: f64,
    /// Number of press frames (>= 2).
    #[arg(long)]
    pub steps: usize,
    /// Extra frames held at the final depth.
    #[arg(long, default_value_t = 0)]
    pub dwell: usize,
    /// Seconds between frames.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Output trajectory file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `w,x,y,z,tx,ty,tz`; `field` names the flag in error messages.
pub fn parse_pose(text: &str, field: &str) -> Result<RigidPose> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("{field}: {e} in {text:?}")))?;
    if values.len() != 7 {
        return Err(Error::InvalidArgument(format!(
            "{field}: expected 7 values w,x,y,z,tx,ty,tz, got {}",
            values.len()
        )));
    }
    RigidPose::from_wxyz_with_tolerance(
        [values[0], values[1], values[2], values[3]],
        [values[4], values[5], values[6]],
        INPUT_QUATERNION_TOLERANCE,
    )
    .map_err(|e| Error::InvalidArgument(format!("{field}: {e}")))
}

fn parse_vector(text: &str, field: &str) -> Result<Vector3> {
    let v: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("{field}: {e}")))?;
    if v.len() != 3 {
        return Err(Error::InvalidArgument(format!("{field}: expected x,y,z")));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

/// Parses arguments and runs. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    crate::threads::configure_from_env();
    match execute(&cli.command) {
        Ok(value) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("json"));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<serde_json::Value> {
    match command {
        Command::Render(a) => cmd_render(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Grid(a) => cmd_grid(a),
        Command::MakePress(a) => cmd_make_press(a),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<serde_json::Value> {
    let scene = load_scene(&a.scene)?;
    let sensor = match &a.sensor_pose {
        Some(s) => parse_pose(s, "sensor-pose")?,
        None => RigidPose::identity(),
    };
    let mut entries = Vec::new();
    for spec in &a.object_poses {
        let (name, pose) = spec.split_once('=').ok_or_else(|| {
            Error::InvalidArgument(format!("object-pose: expected name=w,x,y,z,tx,ty,tz, got {spec:?}"))
        })?;
        entries.push((name.to_owned(), parse_pose(pose, &format!("object-pose[{name}]"))?));
    }
    let state = scene.state(sensor, &scene::poses_by_name(entries)?)?;
    let map = render_deform_map(&scene.grid, &state, scene.render_config());
    DeformMap::from_depths(map.height, map.width, map.d_max, map.depths.clone())
        .map_err(|e| Error::Invariant(format!("rendered map out of range: {e}")))?;

    ensure_parent(&a.out)?;
    map.write_tmap(&a.out)?;
    if a.pgm {
        map.write_pgm(a.out.with_extension("pgm"))?;
    }
    if a.csv {
        map.write_csv(a.out.with_extension("csv"))?;
    }
    let signals = compute_signals(&map, &scene.grid, scene.tau(), scene.force_model())?;
    Ok(json!({
        "out": a.out,
        "max_depth_m": signals.max_depth_m,
        "contact_area_m2": signals.contact_area_m2,
        "signals": signals,
    }))
}

fn cmd_replay(a: &ReplayArgs) -> Result<serde_json::Value> {
    let scene = load_scene(&a.scene)?;
    let mut trajectory = Trajectory::read_jsonl(&a.trajectory)?;
    if let Some(n) = a.subsample {
        if n == 0 {
            return Err(Error::InvalidArgument("subsample must be >= 1".into()));
        }
        trajectory = trajectory.subsample(n);
    }
    let manifest = scene::replay(&scene, &trajectory, &a.out)?;
    Ok(json!({
        "out": a.out,
        "frame_count": manifest.frame_count,
        "config_hash": manifest.config_hash,
        "max_depth_m": manifest.frames.iter().map(|f| f.max_depth_m).fold(0.0, f64::max),
    }))
}

/// A single TMAP file, or every `*.tmap` in a directory sorted by name.
fn collect_maps(path: &Path) -> Result<Vec<(String, DeformMap)>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let files = if meta.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tmap"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_owned()]
    };
    files
        .into_iter()
        .map(|f| {
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, DeformMap::read_tmap(&f)?))
        })
        .collect()
}

fn cmd_compare(a: &CompareArgs) -> Result<serde_json::Value> {
    let scene = a.scene.as_ref().map(load_scene).transpose()?;
    let tau = a
        .tau
        .or(scene.as_ref().map(|s| s.tau()))
        .unwrap_or(DEFAULT_TAU);
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau}")));
    }
    let left = collect_maps(&a.a)?;
    let right = collect_maps(&a.b)?;
    if left.len() != right.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} maps in {} but {} in {}",
            left.len(),
            a.a.display(),
            right.len(),
            a.b.display()
        )));
    }
    if left.is_empty() {
        return Err(Error::InvalidArgument("no TMAP files to compare".into()));
    }
    let frames: Vec<(String, DeformMap, DeformMap)> = left
        .into_iter()
        .zip(right)
        .map(|((name, ma), (_, mb))| (name, ma, mb))
        .collect();
    let grid = scene.as_ref().map(|s| (&s.grid, s.force_model()));
    let report = compare_sequences(&frames, tau, grid)?;

    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let json_path = a.out.join("report.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report).expect("json"))
        .map_err(|e| Error::io(&json_path, e))?;
    report.write_csv(&a.out.join("report.csv"))?;
    Ok(json!({ "frames": report.frames.len(), "tau_m": tau, "median": report.median }))
}

fn cmd_bench(a: &BenchArgs) -> Result<serde_json::Value> {
    let scene = load_scene(&a.scene)?;
    let cfg = BenchConfig {
        env_counts: a.counts.clone(),
        frames: a.frames,
        warmup: a.warmup,
        seed: a.seed,
        mem_limit_bytes: a.mem_limit_bytes,
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let csv_path = a.out.join("bench.csv");
    let mut csv = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    writeln!(csv, "{}", bench::BENCH_CSV_HEADER).map_err(|e| Error::io(&csv_path, e))?;
    // Rows are flushed as they complete so an aborted run keeps its prefix.
    let result = bench::run_bench_with(&scene, &cfg, |row| {
        eprintln!(
            "envs {:>6}: {:>10.1} renders/s, peak {} bytes, {}",
            row.env_count, row.total_renders_per_sec, row.peak_mem_bytes, row.status
        );
        writeln!(csv, "{}", bench::csv_line(row))
            .and_then(|_| csv.flush())
            .map_err(|e| Error::io(&csv_path, e))
    })?;
    let summary = bench::write_summary(&result, &a.out.join("bench_summary.json"))?;
    if let Some(row) = result.rows.iter().find(|r| r.is_ok() && !r.checksum_matches) {
        return Err(Error::Invariant(format!(
            "batched render differs from standalone render at {} envs",
            row.env_count
        )));
    }
    Ok(serde_json::to_value(summary).expect("json"))
}

fn cmd_grid(a: &GridArgs) -> Result<serde_json::Value> {
    let scene = load_scene(&a.scene)?;
    let spec = json!({
        "variant": scene.config.sensor.variant,
        "dims": scene.config.sensor.dims,
    });
    let desc = export_grid(&scene.grid, spec, &a.out)?;
    Ok(serde_json::to_value(desc).expect("json"))
}

fn cmd_make_press(a: &MakePressArgs) -> Result<serde_json::Value> {
    let scene = load_scene(&a.scene)?;
    let profile = PressProfile {
        axis: parse_vector(&a.axis, "axis")?,
        start_clearance: a.clearance,
        end_depth: a.depth,
        steps: a.steps,
        dwell_frames: a.dwell,
        frame_dt: a.dt,
    };
    let trajectory = make_press_trajectory(&scene, &a.object, &profile)?;
    ensure_parent(&a.out)?;
    trajectory.write_jsonl(&a.out)?;
    Ok(json!({ "out": a.out, "frames": trajectory.len(), "tip_heights_m": profile.tip_heights() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn pose_parsing() {
        let p = parse_pose("1,0,0,0,0.001,0,-0.002", "sensor-pose").unwrap();
        assert_eq!(p.translation().z, -0.002);
        let e = parse_pose("1,1,0,0,0,0,0", "sensor-pose").unwrap_err();
        assert!(e.to_string().contains("sensor-pose"));
        assert_eq!(e.exit_code(), 2);
        assert!(parse_pose("1,0,0", "x").is_err());
        assert!(parse_pose("1,0,0,zero,0,0,0", "x").is_err());
    }

    #[test]
    fn unknown_flags_are_errors() {
        let err = Cli::try_parse_from(["tacmap", "grid", "--scene", "s.json", "--out", "o", "--bogus"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
