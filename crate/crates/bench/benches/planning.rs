use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voxplore_core::dtw::{dtw, resample};
use voxplore_core::global_planner::cluster_and_select_principal;
use voxplore_core::local_planner::build_local_graph;
use voxplore_core::mission::MissionConfig;
use voxplore_core::sensor::simulate_scan;
use voxplore_core::{LocalBound, Point, RobotConfig, Vec3, VoxelMap, World};

struct Scene {
    cfg: MissionConfig,
    world: World,
    map: VoxelMap,
    root: RobotConfig,
}

fn scene() -> Scene {
    let root_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let cfg = MissionConfig::load(root_dir.join("configs/aerial.toml")).unwrap();
    let world = World::load(root_dir.join("worlds/t_junction.json")).unwrap();
    let mut map = VoxelMap::covering(&world.bounds, cfg.planner.resolution).unwrap();
    let root = RobotConfig::new(world.start_position, world.start_heading, Vec3::from(cfg.robot.half_extents));
    map.integrate_scan(&simulate_scan(&root, &cfg.sensor.frustum(), &world, None));
    Scene { cfg, world, map, root }
}

fn bench_sensing(c: &mut Criterion) {
    let s = scene();
    let frustum = s.cfg.sensor.frustum();
    c.bench_function("simulate_and_integrate_scan", |b| {
        b.iter(|| {
            let mut map = VoxelMap::covering(&s.world.bounds, s.cfg.planner.resolution).unwrap();
            map.integrate_scan(&simulate_scan(&s.root, &frustum, &s.world, None));
            black_box(map.known_count())
        })
    });
    let planner = voxplore_core::LocalPlanner::new(s.cfg.local_planner_params(), frustum);
    c.bench_function("volume_gain", |b| b.iter(|| black_box(planner.evaluator().volume_gain(&s.root, &s.map))));
}

fn bench_local_planning(c: &mut Criterion) {
    let s = scene();
    let p = s.cfg.local_planner_params();
    let bound = LocalBound::new(s.root.position, p.bound);
    c.bench_function("build_local_graph", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| build_local_graph(&s.map, &s.root, &bound, p.n_samples, p.edge_radius, p.mode, p.planar, &mut rng).unwrap())
    });
    let planner = voxplore_core::LocalPlanner::new(p, s.cfg.sensor.frustum());
    let gain = s.cfg.gain_params(Vec3::x());
    c.bench_function("local_plan", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| black_box(planner.plan(&s.map, &s.root, &gain, &mut rng).is_ok()))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let plan = planner.plan(&s.map, &s.root, &gain, &mut rng).unwrap();
    c.bench_function("cluster_paths", |b| b.iter(|| cluster_and_select_principal(&plan.paths, s.cfg.planner.dtw_threshold)));
}

fn bench_dtw(c: &mut Criterion) {
    let a: Vec<Point> = (0..=40).map(|i| Point::new(i as f64 * 0.25, (i as f64 * 0.3).sin(), 1.0)).collect();
    let b: Vec<Point> = (0..=40).map(|i| Point::new(i as f64 * 0.25, (i as f64 * 0.3).cos(), 1.2)).collect();
    let (ra, rb) = (resample(&a, 0.5), resample(&b, 0.5));
    c.bench_function("dtw_10m_paths", |bench| bench.iter(|| dtw(black_box(&ra), black_box(&rb))));
}

criterion_group!(benches, bench_sensing, bench_local_planning, bench_dtw);
criterion_main!(benches);
