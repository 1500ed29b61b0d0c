//! Robot bodies, receding-horizon planners and the occupancy-query logs they
//! leave behind.

mod dubins;
mod search;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dubins::DubinsPath;
pub use search::{plan_once, PathSample};

use crate::error::{Error, Result};
use crate::geom::{polygon_contains, polygons_overlap, Footprint, Point, Pose2};
use crate::util::fnv1a64;
use crate::world::{DynamicsLimits, EnvCondition, ObjectClass, ScenarioInstance, Task, Workspace};

pub const QUANT_POS_M: f64 = 0.1;
pub const QUANT_HEADING_DEG: f64 = 2.0;
pub const QUANT_TAU_S: f64 = 0.1;

/// Anchor (ego world pose) resolution. Finer than the query grid because the
/// anchor is used to map trajectories into the prior's world frame.
const ANCHOR_POS_M: f64 = 0.01;
const ANCHOR_HEADING_DEG: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountPoint {
    pub name: String,
    /// Body-frame position (x forward, y left, z up).
    pub position_m: [f64; 3],
}

/// Vertical prism `sub-footprint × [0, height]` in the body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrusion {
    pub footprint: Footprint,
    pub height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotBody {
    pub id: String,
    pub footprint: Footprint,
    pub height_profile: Vec<Extrusion>,
    pub limits: DynamicsLimits,
    pub mount_points: Vec<MountPoint>,
    pub payload_max_kg: f64,
    pub aux_power_w: f64,
    pub driving_range_m: f64,
    pub fixed_cost_chf: f64,
    pub op_cost_chf_per_m: f64,
}

impl RobotBody {
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        if self.mount_points.is_empty() {
            return Err(Error::Invalid(format!("body {}: no mount points", self.id)));
        }
        for m in &self.mount_points {
            let [x, y, z] = m.position_m;
            if !(z >= 0.0) || !self.footprint.contains_point([x, y]) {
                return Err(Error::Invalid(format!(
                    "body {}: mount {} is not on or above the footprint",
                    self.id, m.name
                )));
            }
        }
        for e in &self.height_profile {
            if !(e.height_m > 0.0) || !self.footprint.contains(&e.footprint) {
                return Err(Error::Invalid(format!(
                    "body {}: bad height profile",
                    self.id
                )));
            }
        }
        if !(self.fixed_cost_chf > 0.0 && self.op_cost_chf_per_m > 0.0) {
            return Err(Error::Invalid(format!(
                "body {}: costs must be positive",
                self.id
            )));
        }
        if !(self.payload_max_kg >= 0.0 && self.aux_power_w >= 0.0 && self.driving_range_m >= 0.0) {
            return Err(Error::Invalid(format!(
                "body {}: negative capacity",
                self.id
            )));
        }
        Ok(())
    }

    /// Height of the body above a body-frame point, 0 outside every extrusion.
    pub fn height_at(&self, p: Point) -> f64 {
        self.height_profile
            .iter()
            .filter(|e| e.footprint.contains_point(p))
            .map(|e| e.height_m)
            .fold(0.0, f64::max)
    }

    pub fn mount(&self, name: &str) -> Option<&MountPoint> {
        self.mount_points.iter().find(|m| m.name == name)
    }
}

fn quantize_pose(p: &Pose2, pos: f64, heading_deg: f64) -> (i64, i64, i64) {
    let bins = (360.0 / heading_deg).round() as i64;
    let k = (p.theta / heading_deg.to_radians()).round() as i64;
    let k = (k + bins / 2).rem_euclid(bins) - bins / 2;
    ((p.x / pos).round() as i64, (p.y / pos).round() as i64, k)
}

fn pose_from_key(k: (i64, i64, i64), pos: f64, heading_deg: f64) -> Pose2 {
    let inv = (1.0 / pos).round();
    let per_pi = (180.0 / heading_deg).round();
    Pose2 {
        x: k.0 as f64 / inv,
        y: k.1 as f64 / inv,
        theta: k.2 as f64 * PI / per_pi,
    }
}

/// Quantized identity of a query without its anchor; this is what
/// perceptual collision prediction depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryKey {
    pub x: i64,
    pub y: i64,
    pub theta: i64,
    pub tau: i64,
    pub env: u64,
}

impl QueryKey {
    pub fn hash64(&self) -> u64 {
        crate::util::mix(&[
            self.x as u64,
            self.y as u64,
            self.theta as u64,
            self.tau as u64,
            self.env,
        ])
    }
}

/// "Will there be a collision if I occupy `pose` in `tau` seconds?"
///
/// Values are stored already snapped to the quantization grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancyQuery {
    pub instance: String,
    pub pose: Pose2,
    pub tau: f64,
    pub env: EnvCondition,
    pub ego_world_pose: Pose2,
}

impl OccupancyQuery {
    pub fn new(
        instance: &str,
        pose: &Pose2,
        tau: f64,
        env: EnvCondition,
        ego_world_pose: &Pose2,
    ) -> Self {
        let pk = quantize_pose(pose, QUANT_POS_M, QUANT_HEADING_DEG);
        let ak = quantize_pose(ego_world_pose, ANCHOR_POS_M, ANCHOR_HEADING_DEG);
        let tk = (tau.max(0.0) / QUANT_TAU_S).round();
        OccupancyQuery {
            instance: instance.to_string(),
            pose: pose_from_key(pk, QUANT_POS_M, QUANT_HEADING_DEG),
            tau: tk / (1.0 / QUANT_TAU_S).round(),
            env,
            ego_world_pose: pose_from_key(ak, ANCHOR_POS_M, ANCHOR_HEADING_DEG),
        }
    }

    pub fn key(&self) -> QueryKey {
        let (x, y, theta) = quantize_pose(&self.pose, QUANT_POS_M, QUANT_HEADING_DEG);
        QueryKey {
            x,
            y,
            theta,
            tau: (self.tau / QUANT_TAU_S).round() as i64,
            env: self.env.code(),
        }
    }

    fn full_key(&self) -> (&str, QueryKey, (i64, i64, i64)) {
        (
            &self.instance,
            self.key(),
            quantize_pose(&self.ego_world_pose, ANCHOR_POS_M, ANCHOR_HEADING_DEG),
        )
    }
}

impl PartialEq for OccupancyQuery {
    fn eq(&self, other: &Self) -> bool {
        self.full_key() == other.full_key()
    }
}
impl Eq for OccupancyQuery {}
impl PartialOrd for OccupancyQuery {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OccupancyQuery {
    fn cmp(&self, other: &Self) -> Ordering {
        self.full_key().cmp(&other.full_key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    LatticeAstar,
    Rrt,
    RrtStar,
}

fn default_primitive() -> f64 {
    0.5
}
fn default_budget() -> usize {
    60
}
fn default_spacing() -> f64 {
    0.25
}
fn default_goal_bias() -> f64 {
    0.05
}
fn default_max_time() -> f64 {
    60.0
}
fn default_stuck() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerSpec {
    pub id: String,
    pub kind: PlannerKind,
    pub horizon_s: f64,
    pub replan_period_s: f64,
    /// Duration of a lattice primitive; also the RRT steering step (in time).
    #[serde(default = "default_primitive")]
    pub primitive_duration_s: f64,
    /// Node expansions (lattice) or sampling iterations (RRT, RRT*).
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_spacing")]
    pub check_spacing_s: f64,
    #[serde(default = "default_goal_bias")]
    pub goal_bias: f64,
    #[serde(default)]
    pub seed: u64,
    pub gflops_per_check: f64,
    #[serde(default = "default_max_time")]
    pub max_time_s: f64,
    /// Consecutive replans without progress before giving up.
    #[serde(default = "default_stuck")]
    pub stuck_limit: usize,
}

impl PlannerSpec {
    pub fn new(id: &str, kind: PlannerKind, horizon_s: f64) -> Self {
        PlannerSpec {
            id: id.to_string(),
            kind,
            horizon_s,
            replan_period_s: 0.5,
            primitive_duration_s: default_primitive(),
            budget: default_budget(),
            check_spacing_s: default_spacing(),
            goal_bias: default_goal_bias(),
            seed: 0,
            gflops_per_check: 1e-4,
            max_time_s: default_max_time(),
            stuck_limit: default_stuck(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.horizon_s)
            && pos(self.replan_period_s)
            && pos(self.primitive_duration_s)
            && pos(self.check_spacing_s)
            && pos(self.max_time_s))
        {
            return Err(Error::Invalid(format!(
                "planner {}: durations must be positive",
                self.id
            )));
        }
        if self.budget == 0 || self.stuck_limit == 0 {
            return Err(Error::Invalid(format!(
                "planner {}: budget must be positive",
                self.id
            )));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) || !(self.gflops_per_check >= 0.0) {
            return Err(Error::Invalid(format!(
                "planner {}: bad parameters",
                self.id
            )));
        }
        Ok(())
    }
}

/// Answers occupancy queries. `t_issue` is the simulation time at which the
/// query was asked, so the query refers to time `t_issue + tau`.
pub trait OccupancyOracle {
    fn occupied(&mut self, query: &OccupancyQuery, t_issue: f64) -> bool;
}

impl<F: FnMut(&OccupancyQuery, f64) -> bool> OccupancyOracle for F {
    fn occupied(&mut self, query: &OccupancyQuery, t_issue: f64) -> bool {
        self(query, t_issue)
    }
}

/// Perfect-perception oracle backed by the instance's scripted objects.
pub struct GroundTruth {
    footprint: Footprint,
    workspace: Workspace,
    tracks: Vec<(Footprint, Vec<Pose2>)>,
}

impl GroundTruth {
    pub fn new(
        body: &RobotBody,
        instance: &ScenarioInstance,
        classes: &[ObjectClass],
        t_end: f64,
    ) -> Result<Self> {
        let mut tracks = Vec::new();
        for o in &instance.objects {
            let class = classes
                .iter()
                .find(|c| c.id == o.class_id)
                .ok_or_else(|| Error::UnresolvedReferences(vec![o.class_id.clone()]))?;
            let a = &class
                .appearances
                .get(o.appearance_index)
                .ok_or_else(|| Error::Invalid("appearance index out of range".into()))?
                .appearance;
            tracks.push((
                Footprint::rectangle(a.length_m, a.width_m)?,
                o.rollout(&class.limits, t_end),
            ));
        }
        Ok(GroundTruth {
            footprint: body.footprint.clone(),
            workspace: instance.workspace.clone(),
            tracks,
        })
    }

    pub fn occupied_at(&self, world: &Pose2, t: f64) -> bool {
        let robot = self.footprint.transformed(world);
        if !robot.iter().all(|&p| self.workspace.contains_point(p)) {
            return true;
        }
        if self
            .workspace
            .obstacles
            .iter()
            .any(|o| polygons_overlap(&robot, o.vertices()))
        {
            return true;
        }
        let r = self.footprint.circumradius();
        let k = (t / crate::world::OBJECT_DT).round().max(0.0) as usize;
        self.tracks.iter().any(|(fp, track)| {
            let p = track[k.min(track.len() - 1)];
            p.distance(world) <= r + fp.circumradius()
                && polygons_overlap(&robot, &fp.transformed(&p))
        })
    }
}

impl OccupancyOracle for GroundTruth {
    fn occupied(&mut self, q: &OccupancyQuery, t_issue: f64) -> bool {
        self.occupied_at(&q.ego_world_pose.compose(&q.pose), t_issue + q.tau)
    }
}

/// Append-only record of the queries issued while solving one instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    pub instance_id: String,
    pub queries: Vec<OccupancyQuery>,
    /// Collision checks performed in each replanning cycle.
    pub checks_per_replan: Vec<u32>,
}

impl QueryLog {
    pub fn new(instance_id: &str) -> Self {
        QueryLog {
            instance_id: instance_id.to_string(),
            ..Default::default()
        }
    }

    /// Distinct queries with the number of times each was checked.
    pub fn dedup(&self) -> BTreeMap<OccupancyQuery, u32> {
        let mut out = BTreeMap::new();
        for q in &self.queries {
            *out.entry(q.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn query_set(&self) -> BTreeSet<OccupancyQuery> {
        self.queries.iter().cloned().collect()
    }

    pub fn max_checks_per_replan(&self) -> u32 {
        self.checks_per_replan.iter().copied().max().unwrap_or(0)
    }

    pub fn write_ndjson<W: Write>(&self, w: &mut W) -> Result<()> {
        for (q, checks) in self.dedup() {
            serde_json::to_writer(&mut *w, &QueryRecord::from_query(&q, checks))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// One line of the exported query log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub instance: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub tau: f64,
    pub light: String,
    pub weather: String,
    pub ego_x: f64,
    pub ego_y: f64,
    pub ego_theta: f64,
    pub checks: u32,
}

impl QueryRecord {
    pub fn from_query(q: &OccupancyQuery, checks: u32) -> Self {
        let (light, weather) = q.env.tokens();
        QueryRecord {
            instance: q.instance.clone(),
            x: q.pose.x,
            y: q.pose.y,
            theta: q.pose.theta,
            tau: q.tau,
            light: light.into(),
            weather: weather.into(),
            ego_x: q.ego_world_pose.x,
            ego_y: q.ego_world_pose.y,
            ego_theta: q.ego_world_pose.theta,
            checks,
        }
    }

    pub fn to_query(&self) -> Result<OccupancyQuery> {
        Ok(OccupancyQuery::new(
            &self.instance,
            &Pose2::new(self.x, self.y, self.theta),
            self.tau,
            EnvCondition::parse(&self.light, &self.weather)?,
            &Pose2::new(self.ego_x, self.ego_y, self.ego_theta),
        ))
    }
}

pub fn read_ndjson<R: BufRead>(r: R) -> Result<Vec<QueryRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Timeout,
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t_s: f64,
    pub pose: Pose2,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRun {
    pub instance_id: String,
    pub outcome: Outcome,
    pub trajectory: Vec<TrajectorySample>,
    pub log: QueryLog,
}

impl PlanRun {
    pub fn distance_m(&self) -> f64 {
        self.trajectory
            .windows(2)
            .map(|w| w[0].pose.distance(&w[1].pose))
            .sum()
    }

    pub fn elapsed_s(&self) -> f64 {
        match (self.trajectory.first(), self.trajectory.last()) {
            (Some(a), Some(b)) => b.t_s - a.t_s,
            _ => 0.0,
        }
    }
}

fn goal_contains(goal: &Footprint, p: &Pose2) -> bool {
    polygon_contains(goal.vertices(), [p.x, p.y])
}

/// Receding-horizon loop: plan over the horizon, execute one replanning
/// period, repeat until the goal is entered, time runs out or the robot is
/// stuck. Every occupancy test goes through `oracle` and into the log.
pub fn plan(
    spec: &PlannerSpec,
    body: &RobotBody,
    instance: &ScenarioInstance,
    oracle: &mut dyn OccupancyOracle,
) -> PlanRun {
    let mut log = QueryLog::new(&instance.id);
    let run = |outcome, trajectory, log| PlanRun {
        instance_id: instance.id.clone(),
        outcome,
        trajectory,
        log,
    };
    if goal_contains(&instance.goal, &instance.start) {
        return run(Outcome::Reached, Vec::new(), log);
    }
    let start_blocked = instance
        .workspace
        .obstacles
        .iter()
        .any(|o| polygons_overlap(&body.footprint.transformed(&instance.start), o.vertices()));
    let mut traj = vec![TrajectorySample {
        t_s: 0.0,
        pose: instance.start,
        speed_mps: 0.0,
    }];
    if start_blocked {
        return run(Outcome::Stuck, traj, log);
    }
    let (mut pose, mut speed, mut t) = (instance.start, 0.0, 0.0);
    let mut idle = 0usize;
    let mut cycle = 0u64;
    loop {
        if t >= spec.max_time_s - 1e-9 {
            return run(Outcome::Timeout, traj, log);
        }
        let path = plan_once(
            spec, body, instance, &pose, t, speed, cycle, oracle, &mut log,
        );
        cycle += 1;
        let mut executed = 0.0;
        if let Some(path) = path {
            for s in path.iter().skip(1) {
                if s.t > spec.replan_period_s + 1e-9 {
                    break;
                }
                let world = pose.compose(&s.pose);
                traj.push(TrajectorySample {
                    t_s: t + s.t,
                    pose: world,
                    speed_mps: s.v,
                });
                executed = s.t;
                if goal_contains(&instance.goal, &world) {
                    return run(Outcome::Reached, traj, log);
                }
            }
        }
        if executed > 0.0 {
            let last = traj[traj.len() - 1];
            pose = last.pose;
            speed = last.speed_mps;
            t += executed;
            idle = 0;
        } else {
            speed = 0.0;
            t += spec.replan_period_s;
            traj.push(TrajectorySample {
                t_s: t,
                pose,
                speed_mps: 0.0,
            });
            idle += 1;
            if idle >= spec.stuck_limit {
                return run(Outcome::Stuck, traj, log);
            }
        }
    }
}

/// Runs every instance of the task against its ground-truth oracle.
pub fn simulate_task(
    spec: &PlannerSpec,
    body: &RobotBody,
    task: &Task,
    classes: &[ObjectClass],
) -> Result<Vec<PlanRun>> {
    spec.validate()?;
    body.validate()?;
    let t_end = spec.max_time_s + spec.horizon_s + 1.0;
    task.instances
        .par_iter()
        .map(|inst| {
            let mut oracle = GroundTruth::new(body, inst, classes, t_end)?;
            Ok(plan(spec, body, inst, &mut oracle))
        })
        .collect()
}

/// Union of the deduplicated per-instance logs.
pub fn queries_of(runs: &[PlanRun]) -> BTreeSet<OccupancyQuery> {
    runs.iter()
        .flat_map(|r| r.log.queries.iter().cloned())
        .collect()
}

pub fn task_queries(
    spec: &PlannerSpec,
    body: &RobotBody,
    task: &Task,
    classes: &[ObjectClass],
) -> Result<BTreeSet<OccupancyQuery>> {
    Ok(queries_of(&simulate_task(spec, body, task, classes)?))
}

/// Pooled average speed: total arc length over total elapsed time.
pub fn average_speed(runs: &[PlanRun]) -> Result<f64> {
    if let Some(bad) = runs.iter().find(|r| r.outcome != Outcome::Reached) {
        return Err(Error::TaskInfeasible(format!(
            "instance {} ended with outcome {:?}",
            bad.instance_id, bad.outcome
        )));
    }
    let dist: f64 = runs.iter().map(PlanRun::distance_m).sum();
    let time: f64 = runs.iter().map(PlanRun::elapsed_s).sum();
    Ok(if time > 0.0 { dist / time } else { 0.0 })
}

/// Compute load of the planner: worst checks per replan times cost per check.
pub fn compute_gflops(spec: &PlannerSpec, runs: &[PlanRun]) -> f64 {
    let checks = runs
        .iter()
        .map(|r| r.log.max_checks_per_replan())
        .max()
        .unwrap_or(0);
    checks as f64 * spec.gflops_per_check
}

pub(crate) fn instance_hash(id: &str) -> u64 {
    fnv1a64(id.as_bytes())
}
