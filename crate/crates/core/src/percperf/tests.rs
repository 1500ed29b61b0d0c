use super::*;
use crate::geom::Footprint;
use crate::planner::{Extrusion, MountPoint};
use crate::world::{DynamicsLimits, Tone, WeightedAppearance};
use proptest::prelude::*;

fn body_with(footprint: Footprint, height: f64, mount: [f64; 3]) -> RobotBody {
    RobotBody {
        id: "b".into(),
        footprint: footprint.clone(),
        height_profile: vec![Extrusion {
            footprint,
            height_m: height,
        }],
        limits: DynamicsLimits::new(15.0, 3.0, 6.0, 5.0).unwrap(),
        mount_points: vec![MountPoint {
            name: "roof".into(),
            position_m: mount,
        }],
        payload_max_kg: 50.0,
        aux_power_w: 500.0,
        driving_range_m: 1e5,
        fixed_cost_chf: 1.0,
        op_cost_chf_per_m: 1.0,
    }
}

fn car_body() -> RobotBody {
    body_with(
        Footprint::rectangle(4.0, 1.8).unwrap(),
        1.5,
        [0.0, 0.0, 2.0],
    )
}

fn perfect() -> PerfCalib {
    PerfCalib {
        fnr: LogisticCoeffs {
            bias: -60.0,
            ..Default::default()
        },
        fpr: LogisticCoeffs {
            bias: -60.0,
            ..Default::default()
        },
        pseudo_count: None,
    }
}

fn lidar(fov_h: f64, res: [usize; 2]) -> PerceptionPipeline {
    PerceptionPipeline {
        id: "lidar".into(),
        sensor_kind: SensorKind::Lidar,
        fov_h_rad: fov_h,
        fov_v_rad: 30f64.to_radians(),
        range_max_m: 60.0,
        resolution: res,
        price_chf: 1000.0,
        mass_kg: 1.0,
        power_w: 10.0,
        detector_gflops: 5.0,
        calib: perfect(),
    }
}

fn appearance(l: f64, w: f64, h: f64) -> Appearance {
    Appearance {
        length_m: l,
        width_m: w,
        height_m: h,
        reflectivity: 0.5,
        tone: Tone::Light,
    }
}

fn roof(body: &RobotBody) -> SensorPose {
    MountedPipeline::new("lidar", &body.id, "roof", 0.0, 0.0)
        .sensor_pose(body)
        .unwrap()
}

/// Every channel traced, no angular restriction.
fn cast_all(
    sensor: &SensorPose,
    p: &PerceptionPipeline,
    body: &RobotBody,
    t: &TargetBox,
) -> (u32, u32) {
    let poly = t.polygon();
    let [n_az, n_el] = p.resolution;
    let (mut reach, mut hits) = (0, 0);
    for i in 0..n_az {
        let az = sensor.yaw + channel_angle(i, n_az, p.fov_h_rad);
        for j in 0..n_el {
            let el = sensor.pitch + channel_angle(j, n_el, p.fov_v_rad);
            let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
            let Some((t_in, _)) = ray_prism(sensor.position, dir, &poly, t.height) else {
                continue;
            };
            if t_in > p.range_max_m {
                continue;
            }
            reach += 1;
            let blocked = body.height_profile.iter().any(|e| {
                ray_prism(sensor.position, dir, e.footprint.vertices(), e.height_m)
                    .is_some_and(|(a, b)| b > 1e-9 && a < t_in)
            });
            if !blocked {
                hits += 1;
            }
        }
    }
    (reach, hits)
}

#[test]
fn ray_prism_simple_box() {
    let sq = Footprint::aabb(1.0, 2.0, -0.5, 0.5).unwrap();
    let (a, b) = ray_prism([0.0, 0.0, 0.5], [1.0, 0.0, 0.0], sq.vertices(), 1.0).unwrap();
    assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    assert!(ray_prism([0.0, 0.0, 1.5], [1.0, 0.0, 0.0], sq.vertices(), 1.0).is_none());
    assert!(ray_prism([0.0, 0.0, 0.5], [-1.0, 0.0, 0.0], sq.vertices(), 1.0).is_none());
    let s = 2f64.sqrt() / 2.0;
    let (a, _) = ray_prism([1.5, -2.5, 3.0], [0.0, s, -s], sq.vertices(), 1.0).unwrap();
    assert!((a - 2.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn roof_occludes_low_targets_nearby() {
    let body = car_body();
    let p = lidar(2.0 * PI, [720, 32]);
    let s = roof(&body);
    // Rays clearing the front roof edge drop at most 0.25 m per metre, so a
    // 0.5 m tall box ahead is hidden until its near face passes x = 6.
    let low = |near: f64| {
        TargetBox::of(
            &appearance(0.5, 0.5, 0.5),
            Pose2::new(near + 0.25, 0.0, 0.0),
        )
    };
    let near = cast_rays(&s, &p, &body, &low(5.0));
    assert!(near.in_fov);
    assert_eq!(near.hit_count, 0);
    assert_eq!(near.visible_fraction, 0.0);
    let far = cast_rays(&s, &p, &body, &low(7.0));
    assert!(far.hit_count > 0);
    // a tall pedestrian next to the bumper pokes above the roof shadow
    let tall = cast_rays(
        &s,
        &p,
        &body,
        &TargetBox::of(&appearance(0.5, 0.5, 1.8), Pose2::new(3.0, 0.0, 0.0)),
    );
    assert!(tall.hit_count > 0 && tall.visible_fraction < 1.0);
}

#[test]
fn out_of_range_and_out_of_fov() {
    let body = car_body();
    let p = lidar(PI / 2.0, [90, 8]);
    let s = roof(&body);
    let behind = cast_rays(
        &s,
        &p,
        &body,
        &TargetBox::of(&appearance(4.5, 1.8, 1.5), Pose2::new(-20.0, 0.0, 0.0)),
    );
    assert!(!behind.in_fov);
    assert_eq!(behind.hit_count, 0);
    let far = cast_rays(
        &s,
        &p,
        &body,
        &TargetBox::of(&appearance(4.5, 1.8, 1.5), Pose2::new(100.0, 0.0, 0.0)),
    );
    assert!(!far.in_fov);
    assert_eq!(far.hit_count, 0);
}

#[test]
fn logistic_matches_high_precision_reference() {
    let raw = include_str!("../../tests/fixtures/logistic_reference.json");
    let v: serde_json::Value = serde_json::from_str(raw).unwrap();
    for row in v["logistic"].as_array().unwrap() {
        let z = row["z"].as_f64().unwrap();
        let want: f64 = row["p"].as_str().unwrap().parse().unwrap();
        let got = logistic(z);
        assert!(
            ((got - want) / want).abs() <= 1e-12,
            "z={z}: {got} vs {want}"
        );
    }
    for row in v["wilson"].as_array().unwrap() {
        let (p, n) = (row["p"].as_f64().unwrap(), row["n"].as_f64().unwrap());
        let [lo, hi] = wilson(p, Some(n));
        for (got, key) in [(lo, "lo"), (hi, "hi")] {
            let want: f64 = row[key].as_str().unwrap().parse().unwrap();
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1e-300),
                "p={p} n={n} {key}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn wilson_interval_shape() {
    assert_eq!(wilson(0.3, None), [0.3, 0.3]);
    assert_eq!(wilson(0.3, Some(f64::INFINITY)), [0.3, 0.3]);
    let wide = wilson(0.3, Some(10.0));
    let narrow = wilson(0.3, Some(1000.0));
    assert!(wide[0] < narrow[0] && narrow[0] < 0.3 && 0.3 < narrow[1] && narrow[1] < wide[1]);
    let [lo, hi] = wilson(0.0, Some(20.0));
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0);
}

#[test]
fn ppp_undetectable_targets_fail() {
    let p = lidar(PI, [90, 8]);
    let a = appearance(1.0, 1.0, 1.0);
    let vis = VisibilityReport {
        hit_count: 0,
        visible_fraction: 0.0,
        in_fov: true,
    };
    let iv = ppp(
        &Pose2::new(5.0, 0.0, 0.0),
        &a,
        &p,
        EnvCondition::DAY_DRY,
        &vis,
    );
    assert_eq!(iv.fnr, [1.0, 1.0]);
}

#[test]
fn ppp_degrades_with_distance_and_night() {
    let mut p = lidar(PI, [90, 8]);
    p.calib = PerfCalib {
        fnr: LogisticCoeffs {
            bias: -6.0,
            distance: 0.1,
            night: 1.5,
            visible_fraction: -1.0,
            ..Default::default()
        },
        fpr: LogisticCoeffs {
            bias: -7.0,
            ..Default::default()
        },
        pseudo_count: Some(200.0),
    };
    let a = appearance(1.0, 1.0, 1.0);
    let vis = VisibilityReport {
        hit_count: 10,
        visible_fraction: 1.0,
        in_fov: true,
    };
    let night = EnvCondition {
        light: Light::Night,
        weather: Weather::Dry,
    };
    let near = ppp(
        &Pose2::new(5.0, 0.0, 0.0),
        &a,
        &p,
        EnvCondition::DAY_DRY,
        &vis,
    );
    let far = ppp(
        &Pose2::new(30.0, 0.0, 0.0),
        &a,
        &p,
        EnvCondition::DAY_DRY,
        &vis,
    );
    let dark = ppp(&Pose2::new(5.0, 0.0, 0.0), &a, &p, night, &vis);
    assert!(near.fnr[1] < far.fnr[1]);
    assert!(near.fnr[1] < dark.fnr[1]);
    assert!(near.fnr[0] <= near.fnr[1]);
    let z = -6.0 + 0.5 - 1.0;
    let expect = wilson(logistic(z), Some(200.0));
    assert_eq!(near.fnr, expect);
}

fn small_grid() -> PolarGridSpec {
    PolarGridSpec::new(1.5, 30.0, 6, 8, 8).unwrap()
}

#[test]
fn zero_epsilon_gives_empty_coverage() {
    let body = car_body();
    let p = lidar(2.0 * PI, [180, 16]);
    let mpp = MountedPipeline::new("lidar", "b", "roof", 0.0, 0.0);
    let c = mppcc(
        &appearance(1.0, 1.0, 1.0),
        &mpp,
        &p,
        &body,
        EnvCondition::DAY_DRY,
        0.0,
        &small_grid(),
    )
    .unwrap();
    assert!(c.is_empty());
    let c = mppcc(
        &appearance(1.0, 1.0, 1.0),
        &mpp,
        &p,
        &body,
        EnvCondition::DAY_DRY,
        0.5,
        &small_grid(),
    )
    .unwrap();
    assert!(!c.is_empty());
}

#[test]
fn wrong_body_or_mount_is_rejected() {
    let body = car_body();
    assert!(MountedPipeline::new("lidar", "other", "roof", 0.0, 0.0)
        .sensor_pose(&body)
        .is_err());
    assert!(MountedPipeline::new("lidar", "b", "bumper", 0.0, 0.0)
        .sensor_pose(&body)
        .is_err());
    let m = MountedPipeline::new("lidar", "b", "roof", 90f64.to_radians(), -5f64.to_radians());
    assert_eq!(m.id(), "lidar@b:roof:90:-5");
    assert!((m.yaw_rad() - PI / 2.0).abs() < 1e-12);
}

#[test]
fn coverage_round_trip_and_cache_key() {
    let body = car_body();
    let p = lidar(PI, [90, 8]);
    let mpp = MountedPipeline::new("lidar", "b", "roof", 0.0, 0.0);
    let class = ObjectClass::new(
        "ped",
        DynamicsLimits::new(2.0, 1.0, 1.0, 0.0).unwrap(),
        vec![
            WeightedAppearance {
                appearance: appearance(0.5, 0.5, 1.8),
                weight: 1.0,
            },
            WeightedAppearance {
                appearance: appearance(0.4, 0.4, 1.1),
                weight: 1.0,
            },
        ],
    )
    .unwrap();
    let night = EnvCondition {
        light: Light::Night,
        weather: Weather::Rain,
    };
    let g = small_grid();
    let cov = coverage(
        &mpp,
        &p,
        &body,
        std::slice::from_ref(&class),
        &[EnvCondition::DAY_DRY, night],
        0.5,
        &g,
    )
    .unwrap();
    let tall = mppcc(
        &class.appearances[0].appearance,
        &mpp,
        &p,
        &body,
        night,
        0.5,
        &g,
    )
    .unwrap();
    let short = mppcc(
        &class.appearances[1].appearance,
        &mpp,
        &p,
        &body,
        night,
        0.5,
        &g,
    )
    .unwrap();
    assert_eq!(
        cov.get("ped", night).unwrap(),
        &tall.intersection(&short).unwrap()
    );
    let f = cov.to_file();
    let json = serde_json::to_string(&f).unwrap();
    let back = CoverageSet::from_file(&serde_json::from_str(&json).unwrap(), &g).unwrap();
    assert_eq!(back, cov);
    let k1 = coverage_cache_key(&mpp, &p, &body, &class, night, 0.5, &g).unwrap();
    assert_eq!(
        k1,
        coverage_cache_key(&mpp, &p, &body, &class, night, 0.5, &g).unwrap()
    );
    assert_ne!(
        k1,
        coverage_cache_key(&mpp, &p, &body, &class, night, 0.4, &g).unwrap()
    );
    assert_ne!(
        k1,
        coverage_cache_key(&mpp, &p, &body, &class, EnvCondition::DAY_DRY, 0.5, &g).unwrap()
    );
}

#[test]
fn yaw_rotation_is_equivariant_for_round_bodies() {
    let g = small_grid();
    let body = body_with(Footprint::regular(1.0, 8).unwrap(), 1.5, [0.0, 0.0, 1.7]);
    let p = lidar(120f64.to_radians(), [120, 16]);
    let a = appearance(1.0, 0.6, 1.0);
    let at = |yaw_deg: f64| {
        let m = MountedPipeline::new("lidar", "b", "roof", yaw_deg.to_radians(), 0.0);
        mppcc(&a, &m, &p, &body, EnvCondition::DAY_DRY, 0.5, &g).unwrap()
    };
    let base = at(0.0);
    let turned = at(45.0);
    assert!(!base.is_empty());
    let n = g.n_angular() as u16;
    let rotated: BTreeSet<Cell> = base
        .cells
        .iter()
        .map(|c| Cell(c.0, (c.1 + 1) % n, (c.2 + 1) % n))
        .collect();
    assert_eq!(rotated, turned.cells);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slab_matches_face_enumeration(
        r in 0.3..3.0f64, n in 3usize..9, rot in -PI..PI, h in 0.2..3.0f64,
        ox in -6.0..6.0f64, oy in -6.0..6.0f64, oz in -1.0..4.0f64,
        az in -PI..PI, el in -1.2..1.2f64,
    ) {
        let poly: Vec<Point> = Footprint::regular(r, n).unwrap().transformed(&Pose2::new(0.3, -0.2, rot));
        let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
        let slab = ray_prism([ox, oy, oz], dir, &poly, h).map(|(a, _)| a);
        let faces = ray_prism_faces([ox, oy, oz], dir, &poly, h);
        match (slab, faces) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}"),
            (None, None) => {}
            (a, b) => prop_assert!(false, "disagree: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn restricted_casting_equals_full_casting(
        x in -25.0..25.0f64, y in -25.0..25.0f64, th in -PI..PI,
        yaw in -PI..PI, pitch in -0.2..0.2f64, wide in any::<bool>(),
        l in 0.3..5.0f64, w in 0.3..2.0f64, h in 0.3..2.5f64,
    ) {
        let body = car_body();
        let p = if wide { lidar(2.0 * PI, [240, 24]) } else { lidar(1.2, [64, 12]) };
        let s = SensorPose { position: [1.0, 0.3, 1.8], yaw, pitch };
        let t = TargetBox::of(&appearance(l, w, h), Pose2::new(x, y, th));
        let fast = cast_rays(&s, &p, &body, &t);
        let (reach, hits) = cast_all(&s, &p, &body, &t);
        prop_assert_eq!(fast.hit_count, hits);
        let frac = if reach > 0 { hits as f64 / reach as f64 } else { 0.0 };
        prop_assert_eq!(fast.visible_fraction, frac);
    }

    #[test]
    fn coverage_grows_with_epsilon(e1 in 0.01..0.99f64, e2 in 0.01..0.99f64) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let body = car_body();
        let mut p = lidar(2.0 * PI, [90, 8]);
        p.calib.fnr = LogisticCoeffs { bias: -4.0, distance: 0.15, ..Default::default() };
        p.calib.pseudo_count = Some(50.0);
        let m = MountedPipeline::new("lidar", "b", "roof", 0.0, 0.0);
        let a = appearance(1.0, 1.0, 1.5);
        let g = PolarGridSpec::new(2.0, 30.0, 4, 6, 2).unwrap();
        let small = mppcc(&a, &m, &p, &body, EnvCondition::DAY_DRY, lo, &g).unwrap();
        let large = mppcc(&a, &m, &p, &body, EnvCondition::DAY_DRY, hi, &g).unwrap();
        prop_assert!(small.is_subset(&large).unwrap());
    }
}
