// One-off fixture generator; removed after the files are checked in.
use mighty_core::scenario::{box_corridor_helper, save_scenario, synth, Boundary, Scenario};
use mighty_core::spline::KnotState;
use mighty_core::{Limits, Vec3, Weights};

#[test]
#[ignore]
fn generate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(&dir).unwrap();

    // Corner: straight run split in two, then a 90-degree turn (M = 3).
    let corner_polyline = [
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(2.0, 0.0, 1.0),
        Vec3::new(4.0, 0.0, 1.0),
        Vec3::new(4.0, 4.0, 1.0),
    ];
    let mut corner = Scenario {
        version: mighty_core::scenario::SCHEMA_VERSION,
        boundary: Boundary {
            start: KnotState::stationary(corner_polyline[0]),
            goal: KnotState::stationary(corner_polyline[3]),
        },
        corridors: box_corridor_helper(&corner_polyline, Vec3::new(0.8, 0.8, 0.8)).unwrap(),
        limits: Limits {
            v_max: 1.0,
            a_max: 10.0,
            j_max: 30.0,
        },
        // Tight-tracking configuration: strong constraint weights, light time
        // pressure, and a narrow hinge so the optimum hugs the limits from
        // below instead of riding measurably past them.
        weights: Weights {
            w_time: 1e2,
            w_smooth: 1e-5,
            w_sfc: 1e4,
            w_vel: 1e4,
            w_acc: 1e4,
            w_jerk: 1e4,
            w_dyn: 1e1,
            mu: 1e-7,
            c_sfc: 0.2,
            c_dyn: 3.0,
        },
        obstacles: vec![],
        collision_radius: 0.1,
        kappa: 64,
        seed: 1,
        initial_durations: None,
    };
    corner.validate().unwrap();
    save_scenario(&corner, dir.join("corner.json")).unwrap();

    // Forest: slalom through five boxes (M = 5).
    let forest_polyline = [
        Vec3::new(0.0, 0.0, 1.5),
        Vec3::new(3.0, 1.6, 1.5),
        Vec3::new(6.0, -1.6, 1.5),
        Vec3::new(9.0, 1.6, 1.5),
        Vec3::new(12.0, -1.2, 1.5),
        Vec3::new(15.0, 0.0, 1.5),
    ];
    let mut forest = Scenario {
        version: mighty_core::scenario::SCHEMA_VERSION,
        boundary: Boundary {
            start: KnotState::stationary(forest_polyline[0]),
            goal: KnotState::stationary(*forest_polyline.last().unwrap()),
        },
        corridors: box_corridor_helper(&forest_polyline, Vec3::new(1.2, 1.2, 1.0)).unwrap(),
        limits: Limits {
            v_max: 4.0,
            a_max: 10.0,
            j_max: 30.0,
        },
        weights: Weights::default(),
        obstacles: vec![],
        collision_radius: 0.1,
        kappa: 16,
        seed: 2,
        initial_durations: None,
    };
    forest.validate().unwrap();
    save_scenario(&forest, dir.join("forest.json")).unwrap();

    // Dynamic: the seeded 20 m scene with five trefoil obstacles.
    let dynamic = synth::dynamic_scene(7);
    save_scenario(&dynamic, dir.join("dynamic.json")).unwrap();
}
