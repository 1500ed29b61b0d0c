use std::path::Path;

use codei::catalog::Catalog;
use codei::commands::{
    body_coverages, cmd_requirements, cmd_select, cmd_simulate, load_queries, Format, EXIT_FAILED,
    EXIT_OK,
};
use codei::percreq::{requirements_from_queries, RequirementParams, RequirementSet};
use codei::planner::{queries_of, simulate_task};
use codei::store::RunStore;
use codei::world::TaskFile;

fn toy() -> (Catalog, TaskFile) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy");
    (
        Catalog::load(&dir.join("catalog.json")).unwrap(),
        TaskFile::load(&dir.join("task.json")).unwrap(),
    )
}

fn with_seeds(tf: &TaskFile, keep: &[(&str, &[u64])]) -> TaskFile {
    let mut out = tf.clone();
    out.scenarios
        .retain(|s| keep.iter().any(|(id, _)| *id == s.spec.id));
    for s in &mut out.scenarios {
        s.seeds = keep
            .iter()
            .find(|(id, _)| *id == s.spec.id)
            .unwrap()
            .1
            .to_vec();
    }
    out
}

#[test]
fn stored_logs_reproduce_in_memory_requirements() {
    let (cat, tf) = toy();
    let tf = with_seeds(&tf, &[("road_day", &[1, 2])]);
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let (out, summary) = cmd_simulate(&store, &cat, &tf, "lattice", "car", 7).unwrap();
    assert_eq!(out.code, EXIT_OK);
    assert!(!out.cached);

    let task = tf.build_task().unwrap();
    let mut spec = cat.planner("lattice").unwrap().clone();
    spec.seed = 7;
    let runs = simulate_task(&spec, cat.body("car").unwrap(), &task, &tf.classes).unwrap();
    let direct = queries_of(&runs);
    assert_eq!(load_queries(&store, &summary).unwrap(), direct);

    let params = RequirementParams {
        grid: cat.grid.clone(),
        n_traj: cat.n_traj.clone(),
        seed: 7,
    };
    let expected = requirements_from_queries(
        &direct,
        &task,
        cat.body("car").unwrap(),
        &tf.classes,
        &params,
    )
    .unwrap();
    let (_, req) = cmd_requirements(&store, &cat, &tf, "lattice", "car", 7).unwrap();
    assert_eq!(req, expected);

    let (again, _) = cmd_simulate(&store, &cat, &tf, "lattice", "car", 7).unwrap();
    assert!(again.cached);
}

#[test]
fn requirement_runs_are_idempotent_and_union_incrementally() {
    let (cat, tf) = toy();
    let a = with_seeds(&tf, &[("road_day", &[1])]);
    let b = with_seeds(&tf, &[("road_night", &[2])]);
    let both = with_seeds(&tf, &[("road_day", &[1]), ("road_night", &[2])]);

    let d1 = tempfile::tempdir().unwrap();
    let s1 = RunStore::open(d1.path()).unwrap();
    let (o1, r1) = cmd_requirements(&s1, &cat, &a, "lattice", "car", 3).unwrap();
    let (o2, r2) = cmd_requirements(&s1, &cat, &a, "lattice", "car", 3).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(o1.artifacts, o2.artifacts);
    let (_, inc) = cmd_requirements(&s1, &cat, &b, "lattice", "car", 3).unwrap();

    let d2 = tempfile::tempdir().unwrap();
    let s2 = RunStore::open(d2.path()).unwrap();
    let (_, once) = cmd_requirements(&s2, &cat, &both, "lattice", "car", 3).unwrap();
    assert_eq!(inc, once);
    assert!(r1.is_subset(&inc).unwrap());
}

#[test]
fn zero_epsilon_yields_a_certificate() {
    let (mut cat, tf) = toy();
    let tf = with_seeds(&tf, &[("road_day", &[1])]);
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let (_, req) = cmd_requirements(&store, &cat, &tf, "lattice", "car", 1).unwrap();
    assert!(!req.is_empty());
    cat.epsilon = 0.0;
    let (out, front) =
        cmd_select(&store, &cat, &req, &tf.classes, "car", Format::Both, false).unwrap();
    assert_eq!(out.code, EXIT_FAILED);
    assert!(front.is_none());
    assert!(out.artifacts[0].to_string_lossy().contains("certificate"));
}

#[test]
fn single_candidate_gives_one_point_front() {
    let (mut cat, tf) = toy();
    cat.pipelines.retain(|p| p.id == "lidar_hi");
    cat.yaw_options_rad = vec![0.0];
    for b in &mut cat.bodies {
        b.mount_points.retain(|m| m.name == "roof");
    }
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let env = tf.build_task().unwrap().instances[0].env;
    let (_, cov) = body_coverages(&store, &cat, "car", &tf.classes, &[env], cat.epsilon).unwrap();
    assert_eq!(cov.len(), 1);
    let class = &tf.classes[0];
    let cell = *cov[0]
        .get(&class.id, env)
        .unwrap()
        .cells
        .iter()
        .next()
        .expect("roof lidar covers something");
    let mut req = RequirementSet::empty(&cat.grid);
    req.insert(&class.id, env, cell).unwrap();

    let (out, front) =
        cmd_select(&store, &cat, &req, &tf.classes, "car", Format::Csv, true).unwrap();
    assert_eq!(out.code, EXIT_OK, "{:?}", out.lines);
    let front = front.unwrap();
    assert_eq!(front.points.len(), 1);
    assert_eq!(front.points[0].selections[0].chosen, vec![0]);
    assert!(
        out.lines
            .iter()
            .any(|l| l.contains("agrees with enumeration")),
        "{:?}",
        out.lines
    );
}
