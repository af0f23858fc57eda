mod common;

use common::{collider, fixture, random_pose};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tacmap::geometry::shapes::{cuboid, icosphere};
use tacmap::geometry::Vector3;
use tacmap::render::{render_deform_map, Combine};
use tacmap::scene::load_scene;
use tacmap::sensor::generate_sensing_grid;
use tacmap::signals::{compute_signals, ForceModel};
use tacmap::{RenderConfig, RigidPose, SceneObject, SceneState, SensorSurfaceSpec};

const MM: f64 = 1e-3;

fn sphere_at(z: f64, x: f64) -> SceneState {
    SceneState {
        sensor_pose: RigidPose::identity(),
        objects: vec![SceneObject {
            collider: collider(icosphere(5.0 * MM, 4)),
            pose: RigidPose::from_translation(Vector3::new(x, 0.0, z)),
        }],
    }
}

fn flat_grid(n: usize) -> tacmap::SensingGrid {
    let spec = SensorSurfaceSpec::FlatRect { x_extent: 20.0 * MM, y_extent: 20.0 * MM };
    generate_sensing_grid(&spec, n, n, 0.0, 2.0 * MM).unwrap()
}

#[test]
fn pressing_deeper_never_reduces_depth() {
    let grid = flat_grid(48);
    let cfg = RenderConfig::default();
    let mut previous = render_deform_map(&grid, &sphere_at(6.0 * MM, 0.0), &cfg);
    assert_eq!(previous.max_depth(), 0.0);
    for step in 1..=14 {
        let z = 6.0 * MM - step as f64 * 0.25 * MM;
        let map = render_deform_map(&grid, &sphere_at(z, 0.0), &cfg);
        for (a, b) in previous.depths.iter().zip(&map.depths) {
            assert!(b >= a, "depth decreased at z = {z}");
        }
        previous = map;
    }
    // A 3.5 mm press with d_max 2 mm saturates the center.
    assert_eq!(previous.max_depth(), 2.0 * MM);
}

#[test]
fn coarse_grid_matches_pooled_fine_grid() {
    let cfg = RenderConfig::default();
    let state = sphere_at(4.0 * MM, 0.0);
    let fine = render_deform_map(&flat_grid(128), &state, &cfg);
    let coarse = render_deform_map(&flat_grid(64), &state, &cfg);
    let mut worst: f64 = 0.0;
    for r in 0..64 {
        for c in 0..64 {
            let pooled = (fine.get(2 * r, 2 * c)
                + fine.get(2 * r + 1, 2 * c)
                + fine.get(2 * r, 2 * c + 1)
                + fine.get(2 * r + 1, 2 * c + 1))
                / 4.0;
            worst = worst.max((pooled - coarse.get(r, c)).abs());
        }
    }
    assert!(worst <= 0.1 * 2.0 * MM, "worst {worst}");
}

#[test]
fn centroid_follows_whole_pixel_translation() {
    let grid = flat_grid(64);
    let pitch = 20.0 * MM / 64.0;
    let cfg = RenderConfig::default();
    let force = ForceModel::default();
    let base = compute_signals(
        &render_deform_map(&grid, &sphere_at(4.0 * MM, 0.0), &cfg),
        &grid,
        5e-5,
        &force,
    )
    .unwrap();
    for k in [1i32, 3, 7] {
        let moved = compute_signals(
            &render_deform_map(&grid, &sphere_at(4.0 * MM, k as f64 * pitch), &cfg),
            &grid,
            5e-5,
            &force,
        )
        .unwrap();
        let shift = moved.centroid_pixel.unwrap()[1] - base.centroid_pixel.unwrap()[1];
        assert!((shift - k as f64).abs() < 1e-6, "shift {shift} for {k}");
        assert_eq!(moved.active_pixels, base.active_pixels);
    }
}

#[test]
fn rigid_motion_of_everything_keeps_the_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = SensorSurfaceSpec::SphericalCap { radius: 10.0 * MM, half_angle: 1.0 };
    let grid = generate_sensing_grid(&spec, 24, 48, 0.1 * MM, 1.5 * MM).unwrap();
    let cfg = RenderConfig::default();
    let state = SceneState {
        sensor_pose: RigidPose::identity(),
        objects: vec![SceneObject {
            collider: collider(cuboid(Vector3::new(4.0, 6.0, 3.0) * MM)),
            pose: RigidPose::new(common::random_rotation(&mut rng), Vector3::new(0.5, -0.5, 1.0) * MM),
        }],
    };
    let map = render_deform_map(&grid, &state, &cfg);
    assert!(map.max_depth() > 0.0);
    for _ in 0..10 {
        let g = random_pose(&mut rng, 1.0);
        let moved = SceneState {
            sensor_pose: g.compose(&state.sensor_pose),
            objects: vec![SceneObject {
                collider: state.objects[0].collider.clone(),
                pose: g.compose(&state.objects[0].pose),
            }],
        };
        let other = render_deform_map(&grid, &moved, &cfg);
        for (a, b) in map.depths.iter().zip(&other.depths) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn sum_combine_adds_overlapping_objects() {
    let grid = flat_grid(32);
    let slab = collider(cuboid(Vector3::new(30.0, 30.0, 2.0) * MM));
    let pose = |press: f64| RigidPose::from_translation(Vector3::new(0.0, 0.0, 1.0 * MM - press));
    let state = SceneState {
        sensor_pose: RigidPose::identity(),
        objects: vec![
            SceneObject { collider: slab.clone(), pose: pose(0.3 * MM) },
            SceneObject { collider: slab, pose: pose(0.5 * MM) },
        ],
    };
    let max = render_deform_map(&grid, &state, &RenderConfig::default());
    let sum = render_deform_map(
        &grid,
        &state,
        &RenderConfig { combine: Combine::Sum, ..RenderConfig::default() },
    );
    for (m, s) in max.depths.iter().zip(&sum.depths) {
        assert!((m - 0.5 * MM).abs() < 1e-12);
        assert!((s - 0.8 * MM).abs() < 1e-12);
    }
}

#[test]
fn cylindrical_sensor_reads_a_flat_press() {
    let spec = SensorSurfaceSpec::CylindricalPatch {
        radius: 8.0 * MM,
        axial_length: 20.0 * MM,
        arc_half_angle: 0.8,
    };
    let grid = generate_sensing_grid(&spec, 20, 40, 0.0, 2.0 * MM).unwrap();
    let state = SceneState {
        sensor_pose: RigidPose::identity(),
        objects: vec![SceneObject {
            collider: collider(cuboid(Vector3::new(30.0, 30.0, 4.0) * MM)),
            pose: RigidPose::from_translation(Vector3::new(0.0, 0.0, 2.0 * MM - 0.4 * MM)),
        }],
    };
    let map = render_deform_map(&grid, &state, &RenderConfig::default());
    let r = 8.0 * MM;
    for (p, &d) in grid.points.iter().zip(&map.depths) {
        // Radial ray in the xz-plane from the axis at (x, z) = (0, -R).
        let cos = (p.z + r) / r;
        let expected = (r - (r - 0.4 * MM) / cos).max(0.0);
        assert!((d - expected).abs() < 1e-9, "{d} vs {expected}");
    }
}

#[test]
fn fixture_scene_renders_identically_twice() {
    let scene = load_scene(fixture("flat_sphere.json")).unwrap();
    let state = scene
        .state(
            RigidPose::identity(),
            &[("ball".to_owned(), RigidPose::from_translation(Vector3::new(1.0 * MM, 0.0, 4.5 * MM)))]
                .into_iter()
                .collect(),
        )
        .unwrap();
    let a = render_deform_map(&scene.grid, &state, scene.render_config());
    let b = render_deform_map(&scene.grid, &state, scene.render_config());
    assert_eq!(a.checksum(), b.checksum());
    assert!(a.max_depth() > 0.4 * MM);
}
