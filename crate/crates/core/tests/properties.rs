use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use voxplore_core::artifact::{associate_and_update, confirm_and_freeze, logistic, BayesParams, Scorer};
use voxplore_core::global_planner::{global_gain, select_frontier, FrontierInfo};
use voxplore_core::graph::dijkstra;
use voxplore_core::local_planner::{build_local_graph, exploration_gain, GainParams};
use voxplore_core::path_refiner::{clearance, refine, RefineParams};
use voxplore_core::voxel_map::{RangeReturn, Scan};
use voxplore_core::*;

const R: f64 = 0.2;

fn map_with(dims: [usize; 3], boxes: &[(Aabb, VoxelState)], base: VoxelState) -> VoxelMap {
    let mut m = VoxelMap::new(Point::origin(), R, dims).unwrap();
    m.fill(&m.bounds(), base);
    for (b, s) in boxes {
        m.fill(b, *s);
    }
    m
}

fn state_strategy() -> impl Strategy<Value = VoxelState> {
    prop_oneof![Just(VoxelState::Free), Just(VoxelState::Occupied), Just(VoxelState::Unknown)]
}

/// Random boxes inside a cube of edge `extent`.
fn boxes(extent: f64, max: usize) -> impl Strategy<Value = Vec<(Aabb, VoxelState)>> {
    prop::collection::vec(
        ([0.0..extent, 0.0..extent, 0.0..extent], [0.1..1.2f64, 0.1..1.2, 0.1..1.2], state_strategy()),
        0..max,
    )
    .prop_map(|v| {
        v.into_iter()
            .map(|(c, h, s)| (Aabb::from_center(Point::from(c), Vec3::from(h)), s))
            .collect()
    })
}

fn point_in(lo: f64, hi: f64) -> impl Strategy<Value = Point> {
    [lo..hi, lo..hi, lo..hi].prop_map(Point::from)
}

fn fence(g: &Aabb, b: &Aabb) -> bool {
    g.overlaps(b)
}

/// Admissibility of one robot box by enumerating every voxel of the map.
fn brute_box_admissible(map: &VoxelMap, center: &Point, half: &Vec3) -> bool {
    let b = Aabb::from_center(*center, *half);
    let bounds = map.bounds();
    if (0..3).any(|i| b.min[i] < bounds.min[i] || b.max[i] > bounds.max[i]) {
        return false;
    }
    if map.geofences().iter().any(|g| fence(g, &b)) {
        return false;
    }
    (0..map.len()).all(|lin| {
        let idx = map.unlinear(lin);
        map.state(idx) == VoxelState::Free || !map.voxel_box(idx).overlaps(&b)
    })
}

/// Exact swept-box test: the segment must not meet any non-free voxel grown by `half`.
fn swept_admissible(map: &VoxelMap, a: &Point, b: &Point, half: &Vec3) -> bool {
    (0..map.len()).all(|lin| {
        let idx = map.unlinear(lin);
        if map.state(idx) == VoxelState::Free {
            return true;
        }
        let v = map.voxel_box(idx);
        let grown = Aabb::new(v.min - half, v.max + half);
        !grown.intersects_segment(a, b)
    })
}

fn random_scan(origin: Point, dirs: &[(f64, f64, f64, bool)]) -> Scan {
    Scan {
        origin,
        returns: dirs
            .iter()
            .map(|(yaw, pitch, range, hit)| RangeReturn {
                direction: voxplore_core::geometry::direction(*yaw, *pitch),
                range: *range,
                hit: *hit,
            })
            .collect(),
    }
}

fn scan_rays() -> impl Strategy<Value = Vec<(f64, f64, f64, bool)>> {
    prop::collection::vec((-3.1..3.1f64, -1.5..1.5f64, 0.05..4.0f64, any::<bool>()), 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn scans_keep_partition_and_never_forget(
        bx in boxes(3.2, 6),
        scans in prop::collection::vec((point_in(0.3, 2.9), scan_rays()), 1..5),
    ) {
        let mut m = map_with([16, 16, 16], &bx, VoxelState::Unknown);
        let mut unknown = m.unknown_count();
        for (origin, rays) in &scans {
            let before: Vec<VoxelState> = (0..m.len()).map(|l| m.state_linear(l)).collect();
            m.integrate_scan(&random_scan(*origin, rays));
            prop_assert_eq!(m.known_count() + m.unknown_count(), m.len());
            let counts = [VoxelState::Free, VoxelState::Occupied, VoxelState::Unknown]
                .map(|s| (0..m.len()).filter(|l| m.state_linear(*l) == s).count());
            prop_assert_eq!(counts.iter().sum::<usize>(), m.len());
            prop_assert!(m.unknown_count() <= unknown);
            unknown = m.unknown_count();
            for (l, s) in before.iter().enumerate() {
                if *s == VoxelState::Occupied {
                    prop_assert_eq!(m.state_linear(l), VoxelState::Occupied);
                }
            }
        }
    }

    #[test]
    fn segment_admissibility_is_symmetric(
        bx in boxes(3.2, 6),
        a in point_in(0.3, 2.9),
        b in point_in(0.3, 2.9),
        half in [0.05..0.4f64, 0.05..0.4, 0.05..0.4],
    ) {
        let m = map_with([16, 16, 16], &bx, VoxelState::Free);
        let half = Vec3::from(half);
        prop_assert_eq!(m.segment_admissible(&a, &b, &half), m.segment_admissible(&b, &a, &half));
    }

    #[test]
    fn segment_admissibility_matches_enumeration(
        bx in boxes(3.2, 4),
        fences in prop::collection::vec((point_in(0.0, 3.2), 0.1..0.6f64), 0..2),
        a in point_in(0.2, 3.0),
        b in point_in(0.2, 3.0),
        half in [0.05..0.35f64, 0.05..0.35, 0.05..0.35],
    ) {
        let mut m = map_with([16, 16, 16], &bx, VoxelState::Free);
        for (c, h) in &fences {
            m.add_geofence(Aabb::from_center(*c, Vec3::repeat(*h)));
        }
        let half = Vec3::from(half);
        let fast = m.segment_admissible(&a, &b, &half);
        let brute = m.sweep_samples(&a, &b).iter().all(|p| brute_box_admissible(&m, p, &half));
        prop_assert_eq!(fast, brute);
    }

    #[test]
    fn sampled_sweep_is_bracketed_by_exact_sweeps(
        bx in boxes(3.2, 5),
        a in point_in(0.6, 2.6),
        b in point_in(0.6, 2.6),
        half in [0.1..0.35f64, 0.1..0.35, 0.1..0.35],
    ) {
        // Sample placements lie inside the swept volume, and every swept point is within half a
        // sample step of a placement.
        let m = map_with([16, 16, 16], &bx, VoxelState::Free);
        let half = Vec3::from(half);
        let sampled = m.segment_admissible(&a, &b, &half);
        if swept_admissible(&m, &a, &b, &half) {
            prop_assert!(sampled);
        }
        if sampled {
            let shrunk = half - Vec3::repeat(R / 4.0 + 1e-9);
            prop_assert!(swept_admissible(&m, &a, &b, &shrunk));
        }
    }
}

fn frustum(step_deg: f64) -> SensorFrustum {
    SensorFrustum { max_range: 2.5, fov_h: std::f64::consts::TAU, fov_v: 1.2, ray_step: step_deg.to_radians(), offset: [0.0; 3] }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn gain_never_increases_with_knowledge(
        bx in boxes(3.2, 6),
        pose in point_in(0.8, 2.4),
        heading in -3.1..3.1f64,
        scans in prop::collection::vec((point_in(0.3, 2.9), scan_rays()), 1..4),
    ) {
        let mut m = map_with([16, 16, 16], &bx, VoxelState::Unknown);
        let ev = GainEvaluator::new(frustum(4.0));
        let cfg = RobotConfig::new(pose, heading, Vec3::repeat(0.1));
        let mut g = ev.volume_gain(&cfg, &m);
        for (origin, rays) in &scans {
            m.integrate_scan(&random_scan(*origin, rays));
            let next = ev.volume_gain(&cfg, &m);
            prop_assert!(next <= g, "{} > {}", next, g);
            g = next;
        }
    }

    #[test]
    fn finer_rays_see_a_superset(
        bx in boxes(3.2, 6),
        pose in point_in(0.8, 2.4),
        heading in -3.1..3.1f64,
        step in 3.0..8.0f64,
    ) {
        let m = map_with([16, 16, 16], &bx, VoxelState::Unknown);
        let cfg = RobotConfig::new(pose, heading, Vec3::repeat(0.1));
        let coarse = GainEvaluator::new(frustum(step)).visible_unknown(&cfg, &m);
        let fine = GainEvaluator::new(frustum(step / 2.0)).visible_unknown(&cfg, &m);
        prop_assert!(coarse.iter().all(|v| fine.binary_search(v).is_ok()));
    }

    #[test]
    fn gain_is_zero_without_nearby_unknown(
        pose in point_in(0.8, 2.4),
        heading in -3.1..3.1f64,
        fov_v in 0.2..3.1f64,
    ) {
        // Unknown only in a far corner, beyond range from every pose in the sampled region.
        let far = Aabb::new(Point::new(5.6, 5.6, 5.6), Point::new(6.4, 6.4, 6.4));
        let m = map_with([32, 32, 32], &[(far, VoxelState::Unknown)], VoxelState::Free);
        let f = SensorFrustum { fov_v, ..frustum(3.0) };
        let cfg = RobotConfig::new(pose, heading, Vec3::repeat(0.1));
        prop_assert_eq!(GainEvaluator::new(f).volume_gain(&cfg, &m), 0);
    }
}

fn straight_path(n: usize, spacing: f64) -> PlannedPath {
    let mut g = ExplorationGraph::new(RobotConfig::new(Point::origin(), 0.0, Vec3::repeat(0.1)));
    let mut ids = vec![0];
    for i in 1..n {
        let p = Point::new(i as f64 * spacing, (i % 2) as f64 * 0.3, 0.0);
        let id = g.add_vertex(RobotConfig::new(p, 0.0, Vec3::repeat(0.1)));
        g.add_edge(id - 1, id);
        ids.push(id);
    }
    PlannedPath::from_vertices(&g, &ids, PathKind::Local)
}

proptest! {
    #[test]
    fn path_gain_is_nonnegative_and_linear(
        gains in prop::collection::vec(prop_oneof![Just(0.0), 0.0..500.0f64], 1..8),
        spacing in 0.2..2.0f64,
        c in 0.01..100.0f64,
        dir in [-1.0..1.0f64, -1.0..1.0, -1.0..1.0],
    ) {
        let path = straight_path(gains.len(), spacing);
        let d = Vec3::from(dir);
        let params = GainParams { direction: if d.norm() > 1e-3 { d.normalize() } else { Vec3::zeros() }, ..GainParams::default() };
        let g = exploration_gain(&path, &gains, &params);
        prop_assert!(g >= 0.0);
        prop_assert_eq!(g == 0.0, gains.iter().all(|x| *x == 0.0));
        let scaled: Vec<f64> = gains.iter().map(|x| x * c).collect();
        let gs = exploration_gain(&path, &scaled, &params);
        prop_assert!((gs - c * g).abs() <= 1e-9 * (c * g).abs().max(1e-300));
    }

    #[test]
    fn global_gain_scales_and_rejects_infeasible(
        t in -100.0..600.0f64,
        v in 0.0..1e4f64,
        d in 0.0..200.0f64,
        c in 0.01..100.0f64,
    ) {
        match global_gain(t, v, d, 0.02) {
            None => prop_assert!(t <= 0.0),
            Some(g) => {
                prop_assert!(t > 0.0);
                let gs = global_gain(t, c * v, d, 0.02).unwrap();
                prop_assert!((gs - c * g).abs() <= 1e-9 * (c * g).abs().max(1e-300));
                prop_assert!(global_gain(t, v, d + 1.0, 0.02).unwrap() <= g);
            }
        }
    }
}

/// Random graph on up to `n` vertices in a 10 m cube with independent edge coin flips.
fn random_graph(seed: u64, n: usize, p_edge: f64) -> ExplorationGraph {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = Vec3::repeat(0.1);
    let mut g = ExplorationGraph::new(RobotConfig::new(Point::origin(), 0.0, half));
    for _ in 1..n {
        let p = Point::new(rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
        g.add_vertex(RobotConfig::new(p, 0.0, half));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p_edge) {
                g.add_edge(a, b);
            }
        }
    }
    g
}

/// Shortest simple-path lengths from `src` by exhaustive depth-first enumeration.
fn brute_distances(g: &ExplorationGraph, src: VertexId) -> Vec<f64> {
    fn walk(g: &ExplorationGraph, v: VertexId, d: f64, on: &mut Vec<bool>, best: &mut Vec<f64>) {
        if d < best[v] {
            best[v] = d;
        }
        for &(n, w) in g.neighbors(v) {
            if !on[n] {
                on[n] = true;
                walk(g, n, d + w, on, best);
                on[n] = false;
            }
        }
    }
    let mut best = vec![f64::INFINITY; g.len()];
    let mut on = vec![false; g.len()];
    on[src] = true;
    walk(g, src, 0.0, &mut on, &mut best);
    best
}

proptest! {
    #[test]
    fn dijkstra_matches_enumeration(seed in any::<u64>(), n in 1usize..=9, p in 0.1..0.9f64) {
        let g = random_graph(seed, n, p);
        for src in 0..n {
            let sp = dijkstra(&g, src);
            let brute = brute_distances(&g, src);
            for v in 0..n {
                prop_assert_eq!(sp.dist[v], brute[v]);
            }
        }
    }

    #[test]
    fn travel_time_estimates_obey_triangle_inequality(seed in any::<u64>(), n in 2usize..=12, v_ref in 0.2..3.0f64) {
        let g = random_graph(seed, n, 0.4);
        let budget = TimeBudget { remaining: 600.0, v_ref, eps_d: 0.02, safety_margin: 30.0 };
        let sp: Vec<_> = (0..n).map(|s| dijkstra(&g, s)).collect();
        for a in 0..n {
            for b in 0..n {
                for x in 0..n {
                    let direct = budget.travel_time(sp[a].dist[b]);
                    let via = budget.travel_time(sp[a].dist[x]) + budget.travel_time(sp[x].dist[b]);
                    if via.is_finite() {
                        prop_assert!(direct <= via * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn frontier_choice_survives_gain_scaling(
        seed in any::<u64>(),
        n in 3usize..=10,
        gains in prop::collection::vec(1.0..1000.0f64, 10),
        c in 0.01..100.0f64,
        remaining in 10.0..200.0f64,
    ) {
        let mut global = GlobalGraph::new(RobotConfig::new(Point::origin(), 0.0, Vec3::repeat(0.1)));
        let g = random_graph(seed, n, 0.5);
        global.graph = g;
        let mut scaled = global.clone();
        for v in 1..n {
            global.frontiers.insert(v, FrontierInfo { gain: gains[v], last_evaluated: 0.0 });
            scaled.frontiers.insert(v, FrontierInfo { gain: c * gains[v], last_evaluated: 0.0 });
        }
        let budget = TimeBudget { remaining, v_ref: 1.0, eps_d: 0.02, safety_margin: 30.0 };
        let a = select_frontier(&global, 0, &budget).map(|f| f.frontier);
        let b = select_frontier(&scaled, 0, &budget).map(|f| f.frontier);
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #[test]
    fn local_graph_is_admissible_and_deterministic(seed in any::<u64>(), bx in boxes(4.8, 5)) {
        let mut m = map_with([24, 24, 24], &bx, VoxelState::Free);
        let root = RobotConfig::new(Point::new(2.4, 2.4, 2.4), 0.0, Vec3::new(0.2, 0.2, 0.15));
        m.clear_box(&root.position, &root.half_extents);
        m.fill(&Aabb::from_center(root.position, Vec3::repeat(0.3)), VoxelState::Free);
        let bound = voxplore_core::voxel_map::LocalBound::new(root.position, Vec3::repeat(4.0));
        let build = |s| build_local_graph(&m, &root, &bound, 80, 1.5, SamplingMode::Horizontal, false, &mut ChaCha8Rng::seed_from_u64(s));
        let g = build(seed).unwrap();
        prop_assert_eq!(&g, &build(seed).unwrap());
        for v in g.vertices() {
            prop_assert!(m.box_admissible(&v.config.position, &root.half_extents));
        }
        for e in g.edges() {
            prop_assert!(e.length <= 1.5 + 1e-12);
            prop_assert!(m.segment_admissible(&g.position(e.a), &g.position(e.b), &root.half_extents));
        }
        let sp = dijkstra(&g, g.root());
        prop_assert!((0..g.len()).all(|v| sp.reachable(v)));
    }

    #[test]
    fn refinement_keeps_paths_safe(
        obstacles in prop::collection::vec((point_in(0.0, 4.8), 0.1..0.5f64), 1..6),
        waypoints in prop::collection::vec(point_in(0.8, 4.0), 3..6),
    ) {
        let bx: Vec<_> = obstacles.iter().map(|(c, h)| (Aabb::from_center(*c, Vec3::repeat(*h)), VoxelState::Occupied)).collect();
        let m = map_with([24, 24, 24], &bx, VoxelState::Free);
        let half = Vec3::new(0.2, 0.2, 0.15);
        prop_assume!(m.path_admissible(&waypoints, &half));
        let mut g = ExplorationGraph::new(RobotConfig::new(waypoints[0], 0.0, half));
        for p in &waypoints[1..] {
            let id = g.add_vertex(RobotConfig::new(*p, 0.0, half));
            g.add_edge(id - 1, id);
        }
        let ids: Vec<_> = (0..waypoints.len()).collect();
        let path = PlannedPath::from_vertices(&g, &ids, PathKind::Local);
        let params = RefineParams::for_robot(&half, false);
        let out = refine(&path, &m, &params);
        prop_assert!(m.path_admissible(&out.positions(), &half));
        prop_assert_eq!(out.waypoints.first(), path.waypoints.first());
        prop_assert_eq!(out.waypoints.last(), path.waypoints.last());
        let cap = params.target_clearance;
        for (a, b) in path.waypoints.iter().zip(&out.waypoints) {
            prop_assert!(a.position == b.position || clearance(&m, &b.position, cap) >= clearance(&m, &a.position, cap));
        }
        let len: f64 = out.positions().windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        prop_assert!((out.length - len).abs() <= 1e-9 * len.max(1.0));
    }
}

proptest! {
    #[test]
    fn bayes_posterior_follows_closed_form(n in 1usize..40, p_hit in 0.51..0.99f64) {
        let params = BayesParams { p_hit, p_miss: 1.0 - p_hit, ..BayesParams::default() };
        let mut hyps = Vec::new();
        let drill = ArtifactClass::Drill.index();
        let (mut prev_p, mut prev_l) = (0.5, 0.0);
        for k in 1..=n {
            associate_and_update(&Point::new(1.0, 1.0, 1.0), ArtifactClass::Drill, &mut hyps, &params);
            let p = hyps[0].probability(ArtifactClass::Drill);
            let l = hyps[0].log_odds[drill];
            let closed = logistic(k as f64 * (p_hit / (1.0 - p_hit)).ln());
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert!(hyps[0].log_odds.iter().all(|l| l.is_finite()));
            prop_assert!((p - closed).abs() <= 1e-9);
            // The posterior saturates in f64 near 1, so only the log-odds grow strictly.
            prop_assert!(l > prev_l);
            prop_assert!(p >= prev_p);
            (prev_p, prev_l) = (p, l);
        }
    }

    #[test]
    fn hypothesis_center_is_mean_of_absorbed_points(
        offsets in prop::collection::vec([-0.28..0.28f64, -0.28..0.28, -0.28..0.28], 1..30),
    ) {
        // Offsets stay within a 0.485 m ball, so every point is within R_a = 1 m of any running mean.
        let params = BayesParams::default();
        let mut hyps = Vec::new();
        let pts: Vec<Point> = offsets.iter().map(|o| Point::new(5.0, 5.0, 5.0) + Vec3::from(*o)).collect();
        for p in &pts {
            associate_and_update(p, ArtifactClass::Backpack, &mut hyps, &params);
        }
        prop_assert_eq!(hyps.len(), 1);
        prop_assert_eq!(hyps[0].count, pts.len());
        let mean = pts.iter().fold(Vec3::zeros(), |s, p| s + p.coords) / pts.len() as f64;
        prop_assert!((hyps[0].center.coords - mean).norm() <= 1e-9);
    }

    #[test]
    fn each_hypothesis_reports_once(n in 1usize..20) {
        let params = BayesParams::default();
        let mut hyps = Vec::new();
        let mut reports = 0;
        for _ in 0..n {
            associate_and_update(&Point::new(0.0, 0.0, 0.0), ArtifactClass::Vent, &mut hyps, &params);
            if confirm_and_freeze(&mut hyps[0], params.confirm_threshold).is_some() {
                reports += 1;
            }
        }
        prop_assert!(reports <= 1);
        prop_assert_eq!(reports == 1, n >= 3);
    }

    #[test]
    fn score_ignores_report_order(
        classes in prop::collection::vec(0usize..7, 1..6),
        noise in prop::collection::vec(([-7.0..7.0f64, -7.0..7.0, -1.0..1.0], 0usize..7), 0..12),
        perm_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        // Artifacts 20 m apart on a line; reports land near random artifacts with random classes.
        let artifacts: Vec<Artifact> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| Artifact::new(format!("a{i}"), ArtifactClass::ALL[*c], Point::new(20.0 * i as f64, 0.0, 0.0)))
            .collect();
        let reports: Vec<Report> = noise
            .iter()
            .enumerate()
            .map(|(i, (o, c))| Report {
                class: ArtifactClass::ALL[*c],
                position: Point::new(20.0 * (i % artifacts.len()) as f64, 0.0, 0.0) + Vec3::from(*o),
                hypothesis: i,
                scored: None,
            })
            .collect();
        let total = |rs: &[Report]| {
            let mut s = Scorer::new(artifacts.clone());
            for r in rs {
                s.score(r);
            }
            s.score_count()
        };
        let mut shuffled = reports.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        prop_assert_eq!(total(&reports), total(&shuffled));
    }
}

#[test]
fn brute_force_helpers_agree_on_a_fixture() {
    // A 1-voxel obstacle in the middle of a free 16^3 map.
    let obstacle = Aabb::from_center(Point::new(1.7, 1.7, 1.7), Vec3::repeat(0.05));
    let m = map_with([16, 16, 16], &[(obstacle, VoxelState::Occupied)], VoxelState::Free);
    let half = Vec3::repeat(0.1);
    let a = Point::new(0.5, 1.7, 1.7);
    let b = Point::new(2.9, 1.7, 1.7);
    assert!(!swept_admissible(&m, &a, &b, &half));
    assert!(!m.segment_admissible(&a, &b, &half));
    let c = Point::new(0.5, 1.1, 1.1);
    let d = Point::new(2.9, 1.1, 1.1);
    assert!(swept_admissible(&m, &c, &d, &half));
    assert!(m.segment_admissible(&c, &d, &half));
    assert!(brute_box_admissible(&m, &c, &half));
}
