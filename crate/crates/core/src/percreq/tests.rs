use super::*;
use crate::geom::polygons_overlap;
use crate::planner::{Extrusion, MountPoint};
use crate::world::{
    Appearance, DynamicsLimits, PriorRegion, ScenarioInstance, Tone, WeightedAppearance, Workspace,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn body_with(footprint: Footprint) -> RobotBody {
    RobotBody {
        id: "b".into(),
        footprint: footprint.clone(),
        height_profile: vec![Extrusion {
            footprint,
            height_m: 1.5,
        }],
        limits: DynamicsLimits::new(15.0, 3.0, 6.0, 5.0).unwrap(),
        mount_points: vec![MountPoint {
            name: "roof".into(),
            position_m: [0.0, 0.0, 1.5],
        }],
        payload_max_kg: 50.0,
        aux_power_w: 500.0,
        driving_range_m: 1e5,
        fixed_cost_chf: 1.0,
        op_cost_chf_per_m: 1.0,
    }
}

fn body() -> RobotBody {
    body_with(Footprint::rectangle(4.0, 1.8).unwrap())
}

fn class_with(id: &str, limits: DynamicsLimits, length: f64, width: f64) -> ObjectClass {
    ObjectClass::new(
        id,
        limits,
        vec![WeightedAppearance {
            appearance: Appearance {
                length_m: length,
                width_m: width,
                height_m: 1.5,
                reflectivity: 0.5,
                tone: Tone::Light,
            },
            weight: 1.0,
        }],
    )
    .unwrap()
}

fn car() -> ObjectClass {
    class_with(
        "car",
        DynamicsLimits::new(12.0, 3.0, 6.0, 5.0).unwrap(),
        4.5,
        1.8,
    )
}

fn grid() -> PolarGridSpec {
    PolarGridSpec::new(1.0, 40.0, 8, 24, 4).unwrap()
}

fn q(x: f64, y: f64, th: f64, tau: f64) -> OccupancyQuery {
    OccupancyQuery::new(
        "i#0",
        &Pose2::new(x, y, th),
        tau,
        EnvCondition::DAY_DRY,
        &Pose2::IDENTITY,
    )
}

fn full_prior() -> Prior {
    Prior::full(Footprint::aabb(-200.0, 200.0, -200.0, 200.0).unwrap())
}

#[test]
fn far_point_class_never_collides() {
    let tiny = Footprint::rectangle(1e-3, 1e-3).unwrap();
    let ego = Pose2::new(500.0, 0.0, 0.0);
    assert!(collision(&ego, &tiny, &body(), &grid()).is_empty());
}

#[test]
fn disk_collision_matches_distance_oracle() {
    let disk = Footprint::regular(1.0, 128).unwrap();
    let b = body_with(disk.clone());
    let reps = [
        Pose2::new(1.5, 0.0, 0.3),
        Pose2::new(2.5, 0.0, 0.3),
        Pose2::new(0.0, 1.99, 0.0),
        Pose2::new(-2.01, 0.0, 0.0),
    ];
    let hits = collision_among(&Pose2::IDENTITY, &disk, &b, &reps);
    // inscribed polygons overlap iff centres are within 2·cos(π/128) of each other
    let reach = 2.0 * (PI / 128.0).cos();
    let expect: Vec<Pose2> = reps
        .iter()
        .filter(|r| r.range() <= reach)
        .copied()
        .collect();
    assert_eq!(hits, expect);
    assert_eq!(hits.len(), 2);
}

#[test]
fn coincident_footprint_collides() {
    let g = grid();
    let reps = representatives(&g);
    let fp = body().footprint.clone();
    let ego = reps[37];
    assert!(collision(&ego, &fp, &body(), &g).contains(&ego));
}

#[test]
fn representatives_cover_every_cell() {
    let g = grid();
    let reps = representatives(&g);
    let cells: BTreeSet<Cell> = reps.iter().filter_map(|p| g.cell_of(p)).collect();
    // centres alone hit every cell once
    assert_eq!(cells.len(), g.n_cells());
}

#[test]
fn stationary_class_trajectories_are_constant() {
    let parked = class_with("cone", DynamicsLimits::stationary(), 0.5, 0.5);
    let qs: BTreeSet<_> = [q(6.0, 0.0, 0.0, 1.0), q(10.0, 0.0, 0.0, 2.0)]
        .into_iter()
        .collect();
    let out = pcp(&qs, &parked, &body(), &grid(), 4, 7).unwrap();
    let trajs: Vec<_> = out.values().flatten().collect();
    assert!(!trajs.is_empty());
    for t in trajs {
        assert!(t.samples.iter().all(|(_, p)| *p == t.end()));
        assert_eq!(t.samples[0].0, 0.0);
        assert!((t.samples.last().unwrap().0 - t.tau).abs() < 1e-12);
    }
}

#[test]
fn zero_tau_starts_at_end() {
    let qs: BTreeSet<_> = [q(8.0, 0.0, 0.0, 0.0)].into_iter().collect();
    for t in pcp(&qs, &car(), &body(), &grid(), 4, 1)
        .unwrap()
        .values()
        .flatten()
    {
        assert_eq!(t.start(), t.end());
    }
}

#[test]
fn straight_class_backs_up_along_heading() {
    let v = 10.0;
    let straight = class_with(
        "train",
        DynamicsLimits::new(v, 0.0, 0.0, f64::INFINITY).unwrap(),
        4.0,
        2.0,
    );
    let tau = 1.5;
    let qs: BTreeSet<_> = [q(10.0, 0.0, 0.0, tau)].into_iter().collect();
    let out = pcp(&qs, &straight, &body(), &grid(), 16, 3).unwrap();
    let mut n = 0;
    for t in out.values().flatten() {
        let (s, e) = (t.start(), t.end());
        let (dx, dy) = (e.x - s.x, e.y - s.y);
        let along = dx * e.theta.cos() + dy * e.theta.sin();
        let across = -dx * e.theta.sin() + dy * e.theta.cos();
        let v_used = along / tau;
        assert!(across.abs() < 1e-9);
        assert!(v_used >= -1e-12 && v_used <= v + 1e-12);
        assert!((s.theta - e.theta).abs() < 1e-12);
        n += 1;
    }
    assert!(n > 0);
}

#[test]
fn pcp_needs_a_trajectory() {
    let qs: BTreeSet<_> = [q(8.0, 0.0, 0.0, 1.0)].into_iter().collect();
    assert!(pcp(&qs, &car(), &body(), &grid(), 0, 1).is_err());
}

fn traj(samples: Vec<Pose2>) -> CollidingTrajectory {
    let tau = 0.2 * (samples.len() - 1) as f64;
    CollidingTrajectory {
        class_id: "car".into(),
        appearance: 0,
        samples: samples
            .into_iter()
            .enumerate()
            .map(|(i, p)| (0.2 * i as f64, p))
            .collect(),
        tau,
    }
}

#[test]
fn prior_check_examples() {
    let fp = car().footprint.clone();
    let b = body();
    let ahead = traj(vec![
        Pose2::new(10.0, 0.0, PI),
        Pose2::new(8.0, 0.0, PI),
        Pose2::new(4.0, 0.0, PI),
    ]);
    assert_eq!(
        prior_check(
            std::slice::from_ref(&ahead),
            &fp,
            &full_prior(),
            &b,
            &Pose2::IDENTITY
        ),
        vec![Pose2::new(10.0, 0.0, PI)]
    );

    let region = |x0: f64, x1: f64| PriorRegion {
        polygon: Footprint::aabb(x0, x1, -5.0, 5.0).unwrap(),
        heading_lo_rad: -PI,
        heading_hi_rad: PI,
    };
    // the middle sample at x=8 falls into the gap between the two regions
    let gappy = Prior {
        regions: vec![region(-50.0, 7.0), region(9.0, 50.0)],
    };
    assert!(prior_check(
        std::slice::from_ref(&ahead),
        &fp,
        &gappy,
        &b,
        &Pose2::IDENTITY
    )
    .is_empty());

    let on_top = traj(vec![Pose2::IDENTITY, Pose2::new(1.0, 0.0, 0.0)]);
    assert!(prior_check(&[on_top], &fp, &full_prior(), &b, &Pose2::IDENTITY).is_empty());

    // touching is allowed: car (4.5 long) centred 4.25 m ahead touches the 4 m robot
    let touching = traj(vec![Pose2::new(4.25, 0.0, 0.0), Pose2::new(4.25, 0.0, 0.0)]);
    assert_eq!(
        prior_check(&[touching], &fp, &full_prior(), &b, &Pose2::IDENTITY).len(),
        1
    );
}

#[test]
fn prior_check_uses_world_frame() {
    let fp = car().footprint.clone();
    let t = traj(vec![Pose2::new(10.0, 0.0, 0.0), Pose2::new(9.0, 0.0, 0.0)]);
    let prior = Prior {
        regions: vec![PriorRegion {
            polygon: Footprint::aabb(100.0, 120.0, -5.0, 5.0).unwrap(),
            heading_lo_rad: -PI,
            heading_hi_rad: PI,
        }],
    };
    assert!(prior_check(
        std::slice::from_ref(&t),
        &fp,
        &prior,
        &body(),
        &Pose2::IDENTITY
    )
    .is_empty());
    assert_eq!(
        prior_check(&[t], &fp, &prior, &body(), &Pose2::new(100.0, 0.0, 0.0)).len(),
        1
    );
}

#[test]
fn bigger_robot_collides_more_and_survives_less() {
    let small = body();
    let big = body_with(Footprint::rectangle(8.0, 3.0).unwrap());
    let g = grid();
    let c_small: BTreeSet<_> = collision(&Pose2::new(10.0, 0.0, 0.0), &car().footprint, &small, &g)
        .iter()
        .map(|p| (p.x.to_bits(), p.y.to_bits(), p.theta.to_bits()))
        .collect();
    let c_big: BTreeSet<_> = collision(&Pose2::new(10.0, 0.0, 0.0), &car().footprint, &big, &g)
        .iter()
        .map(|p| (p.x.to_bits(), p.y.to_bits(), p.theta.to_bits()))
        .collect();
    assert!(c_small.is_subset(&c_big));

    let qs: BTreeSet<_> = [q(8.0, 0.0, 0.0, 1.0), q(12.0, 2.0, 0.3, 1.5)]
        .into_iter()
        .collect();
    let trajs: Vec<_> = pcp(&qs, &car(), &small, &g, 16, 5)
        .unwrap()
        .into_values()
        .flatten()
        .collect();
    let s_small = prior_check(
        &trajs,
        &car().footprint,
        &full_prior(),
        &small,
        &Pose2::IDENTITY,
    );
    let s_big = prior_check(
        &trajs,
        &car().footprint,
        &full_prior(),
        &big,
        &Pose2::IDENTITY,
    );
    assert!(s_big.iter().all(|p| s_small.contains(p)));
    assert!(s_big.len() <= s_small.len());
}

#[test]
fn requirement_json_round_trip() {
    let g = grid();
    let mut r = RequirementSet::empty(&g);
    r.insert("car", EnvCondition::DAY_DRY, Cell(1, 2, 3))
        .unwrap();
    r.insert("car", EnvCondition::DAY_DRY, Cell(0, 2, 0))
        .unwrap();
    r.insert(
        "ped",
        EnvCondition::parse("night", "rain").unwrap(),
        Cell(4, 5, 1),
    )
    .unwrap();
    let back = RequirementSet::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.len(), 3);
    assert!(r
        .insert("car", EnvCondition::DAY_DRY, Cell(8, 0, 0))
        .is_err());
}

fn simple_instance(id: &str, prior: Prior) -> ScenarioInstance {
    let mut priors = BTreeMap::new();
    priors.insert("car".to_string(), prior);
    ScenarioInstance {
        id: id.into(),
        workspace: Workspace {
            x_min_m: -10.0,
            x_max_m: 60.0,
            y_min_m: -6.0,
            y_max_m: 6.0,
            obstacles: vec![],
        },
        start: Pose2::IDENTITY,
        goal: Footprint::aabb(25.0, 35.0, -5.0, 5.0).unwrap(),
        env: EnvCondition::DAY_DRY,
        objects: vec![],
        priors,
        nominal_speed_mps: 8.0,
    }
}

fn params(seed: u64) -> RequirementParams {
    let mut n_traj = BTreeMap::new();
    n_traj.insert("car".to_string(), 4);
    RequirementParams {
        grid: grid(),
        n_traj,
        seed,
    }
}

#[test]
fn requirements_empty_task_and_nested_tasks() {
    let spec = PlannerSpec::new("lat", crate::planner::PlannerKind::LatticeAstar, 1.0);
    let classes = vec![car()];
    let empty = Task::new(vec![]).unwrap();
    assert!(
        perception_requirements(&spec, &body(), &empty, &classes, &params(1))
            .unwrap()
            .is_empty()
    );

    let a = simple_instance("a#0", full_prior());
    let mut b = simple_instance("b#0", full_prior());
    b.env = EnvCondition::parse("night", "dry").unwrap();
    let t1 = Task::new(vec![a.clone()]).unwrap();
    let t2 = Task::new(vec![a, b]).unwrap();
    let r1 = perception_requirements(&spec, &body(), &t1, &classes, &params(1)).unwrap();
    let r2 = perception_requirements(&spec, &body(), &t2, &classes, &params(1)).unwrap();
    assert!(!r1.is_empty());
    assert!(r1.is_subset(&r2).unwrap());
    assert!(r2.len() > r1.len());
}

#[test]
fn left_prior_restriction_is_a_subset() {
    let spec = PlannerSpec::new("lat", crate::planner::PlannerKind::LatticeAstar, 2.0);
    let classes = vec![car()];
    let right_only = Prior {
        regions: vec![PriorRegion {
            polygon: Footprint::aabb(-200.0, 200.0, -200.0, 0.0).unwrap(),
            heading_lo_rad: -PI,
            heading_hi_rad: PI,
        }],
    };
    let full = Task::new(vec![simple_instance("a#0", full_prior())]).unwrap();
    let restricted = Task::new(vec![simple_instance("a#0", right_only)]).unwrap();
    let r_full = perception_requirements(&spec, &body(), &full, &classes, &params(2)).unwrap();
    let r_res = perception_requirements(&spec, &body(), &restricted, &classes, &params(2)).unwrap();
    assert!(r_res.is_subset(&r_full).unwrap());
    assert!(r_res.len() < r_full.len());
    // the ego drives along y = 0, so restricted start poses sit in the right half plane
    let g = grid();
    let left_bins = |s: &RequirementSet| {
        s.atoms()
            .filter(|(_, c)| {
                let (lo, hi) = (g.angular_edge(c.angular()), g.angular_edge(c.angular() + 1));
                lo >= 0.3 && hi <= PI - 0.3
            })
            .count()
    };
    assert!(left_bins(&r_res) < left_bins(&r_full));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pcp_monotone_in_queries(picks in proptest::collection::vec((0.0..30.0f64, -5.0..5.0f64, -3.0..3.0f64, 0.0..2.0f64, any::<bool>()), 1..8), seed in 0u64..1000) {
        let all: BTreeSet<_> = picks.iter().map(|p| q(p.0, p.1, p.2, p.3)).collect();
        let some: BTreeSet<_> = picks.iter().filter(|p| p.4).map(|p| q(p.0, p.1, p.2, p.3)).collect();
        let big = pcp(&all, &car(), &body(), &grid(), 3, seed).unwrap();
        let small = pcp(&some, &car(), &body(), &grid(), 3, seed).unwrap();
        for (k, trajs) in &small {
            prop_assert_eq!(Some(trajs), big.get(k));
        }
    }

    #[test]
    fn prior_check_monotone_in_prior(x0 in -30.0..0.0f64, x1 in 0.0..30.0f64, shrink in 0.0..10.0f64, seed in 0u64..100) {
        let qs: BTreeSet<_> = [q(8.0, 0.0, 0.0, 1.5), q(10.0, 3.0, 0.5, 2.0)].into_iter().collect();
        let trajs: Vec<_> = pcp(&qs, &car(), &body(), &grid(), 8, seed).unwrap().into_values().flatten().collect();
        let region = |a: f64, b: f64| Prior { regions: vec![PriorRegion {
            polygon: Footprint::aabb(a, b, -20.0, 20.0).unwrap(),
            heading_lo_rad: -PI,
            heading_hi_rad: PI,
        }]};
        let p2 = region(x0, x1 + 0.5);
        let p1 = region(x0 + shrink.min(-x0), x1 + 0.5);
        prop_assert!(p1.is_subset_of(&p2));
        let o1 = prior_check(&trajs, &car().footprint, &p1, &body(), &Pose2::IDENTITY);
        let o2 = prior_check(&trajs, &car().footprint, &p2, &body(), &Pose2::IDENTITY);
        prop_assert!(o1.iter().all(|p| o2.contains(p)));
    }

    #[test]
    fn end_poses_overlap_query_pose(x in 3.0..30.0f64, y in -5.0..5.0f64, th in -3.0..3.0f64, seed in 0u64..50) {
        let qs: BTreeSet<_> = [q(x, y, th, 1.0)].into_iter().collect();
        let query = qs.iter().next().unwrap().pose;
        for t in pcp(&qs, &car(), &body(), &grid(), 2, seed).unwrap().values().flatten() {
            prop_assert!(polygons_overlap(&car().footprint.transformed(&t.end()), &body().footprint.transformed(&query)));
        }
    }
}
