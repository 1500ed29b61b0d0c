//! Task perception requirements: which object configurations the robot must
//! be able to perceive, derived from the occupancy queries its planner asks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    footprints_overlap, footprints_overlap_strict, Cell, CellSet, Corner, Footprint, PolarGridSpec,
    Pose2,
};
use crate::planner::{
    queries_of, simulate_task, OccupancyQuery, Outcome, PlannerSpec, QueryKey, RobotBody,
};
use crate::util::{fnv1a64, keyed_rng};
use crate::world::{in_prior, integrate, EnvCondition, ObjectClass, Prior, Task};

pub const PCP_DT: f64 = 0.2;
pub const DEFAULT_N_TRAJ: usize = 32;
pub const REQUIREMENTS_SCHEMA_VERSION: u32 = 1;

/// Bound on sampled curvature for classes without a turning-radius limit.
const FREE_CURVATURE: f64 = 1.0;

/// Backward-sampled object trajectory that ends in collision with the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollidingTrajectory {
    pub class_id: String,
    pub appearance: usize,
    /// `(t, pose)` in the ego frame of the issuing query, `t` ascending from 0
    /// to `tau`.
    pub samples: Vec<(f64, Pose2)>,
    pub tau: f64,
}

impl CollidingTrajectory {
    pub fn start(&self) -> Pose2 {
        self.samples[0].1
    }
    pub fn end(&self) -> Pose2 {
        self.samples[self.samples.len() - 1].1
    }
}

/// Representative poses of every grid cell: centre and the four radial/azimuth
/// corners, each at the midpoint of the cell's θ-interval. Shared corners are
/// listed once.
pub fn representatives(grid: &PolarGridSpec) -> Vec<Pose2> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for cell in grid.cells() {
        let theta = grid.theta_mid(cell.theta());
        for corner in Corner::ALL {
            let [x, y] = grid.cell_point(&cell, corner);
            let p = Pose2::new(x, y, theta);
            if seen.insert((p.x.to_bits(), p.y.to_bits(), p.theta.to_bits())) {
                out.push(p);
            }
        }
    }
    out
}

/// Representative poses whose class footprint overlaps the robot at `ego_pose`.
pub fn collision(
    ego_pose: &Pose2,
    class_footprint: &Footprint,
    body: &RobotBody,
    grid: &PolarGridSpec,
) -> Vec<Pose2> {
    collision_among(ego_pose, class_footprint, body, &representatives(grid))
}

fn collision_among(
    ego_pose: &Pose2,
    class_footprint: &Footprint,
    body: &RobotBody,
    reps: &[Pose2],
) -> Vec<Pose2> {
    reps.iter()
        .filter(|r| footprints_overlap(class_footprint, r, &body.footprint, ego_pose))
        .copied()
        .collect()
}

fn curvature_bound(class: &ObjectClass) -> f64 {
    if class.limits.turn_radius_min.is_infinite() {
        0.0
    } else {
        class.limits.max_curvature().min(FREE_CURVATURE)
    }
}

/// Samples one backward trajectory ending at `end` after `tau` seconds.
fn sample_backward<R: Rng>(
    class: &ObjectClass,
    end: &Pose2,
    tau: f64,
    rng: &mut R,
) -> Vec<(f64, Pose2)> {
    let lim = &class.limits;
    let kappa = curvature_bound(class);
    let mut v = rng.random::<f64>() * lim.v_max;
    let mut pose = *end;
    let mut t = tau;
    let mut out = vec![(t, pose)];
    while t > 1e-12 {
        let dt = PCP_DT.min(t);
        let accel = -lim.d_max + rng.random::<f64>() * (lim.a_max + lim.d_max);
        let curvature = if kappa > 0.0 {
            (rng.random::<f64>() * 2.0 - 1.0) * kappa
        } else {
            0.0
        };
        let u = crate::world::Control { accel, curvature };
        (pose, v) = integrate(lim, &pose, v, &u, -dt);
        t -= dt;
        out.push((t.max(0.0), pose));
    }
    if let Some(last) = out.last_mut() {
        last.0 = 0.0;
    }
    out.reverse();
    out
}

fn class_hash(class: &ObjectClass) -> u64 {
    fnv1a64(class.id.as_bytes())
}

/// Colliding trajectories for one quantized query. Streams are keyed by the
/// query, class and end pose, so results do not depend on which other queries
/// are processed.
#[allow(clippy::too_many_arguments)]
fn pcp_key(
    key: &QueryKey,
    pose: &Pose2,
    tau: f64,
    class: &ObjectClass,
    body: &RobotBody,
    reps: &[Pose2],
    n_traj: usize,
    seed: u64,
) -> Vec<CollidingTrajectory> {
    let mut out = Vec::new();
    for (i, end) in collision_among(pose, &class.footprint, body, reps)
        .iter()
        .enumerate()
    {
        let mut rng = keyed_rng(&[
            seed,
            key.hash64(),
            class_hash(class),
            i as u64,
            end.x.to_bits(),
            end.y.to_bits(),
        ]);
        for _ in 0..n_traj {
            let appearance = class.sample_appearance(&mut rng);
            out.push(CollidingTrajectory {
                class_id: class.id.clone(),
                appearance,
                samples: sample_backward(class, end, tau, &mut rng),
                tau,
            });
        }
    }
    out
}

/// Perceptual collision prediction over a set of queries.
pub fn pcp(
    queries: &BTreeSet<OccupancyQuery>,
    class: &ObjectClass,
    body: &RobotBody,
    grid: &PolarGridSpec,
    n_traj: usize,
    seed: u64,
) -> Result<BTreeMap<QueryKey, Vec<CollidingTrajectory>>> {
    if n_traj == 0 {
        return Err(Error::Invalid("n_traj must be at least 1".into()));
    }
    let reps = representatives(grid);
    let mut keys: BTreeMap<QueryKey, &OccupancyQuery> = BTreeMap::new();
    for q in queries {
        keys.entry(q.key()).or_insert(q);
    }
    Ok(keys
        .into_par_iter()
        .map(|(k, q)| {
            (
                k,
                pcp_key(&k, &q.pose, q.tau, class, body, &reps, n_traj, seed),
            )
        })
        .collect())
}

/// Keeps trajectories that stay inside the prior (in world coordinates) and
/// do not start already overlapping the robot; returns their start poses in
/// the ego frame.
pub fn prior_check(
    trajectories: &[CollidingTrajectory],
    class_footprint: &Footprint,
    prior: &Prior,
    body: &RobotBody,
    ego_world_pose: &Pose2,
) -> Vec<Pose2> {
    trajectories
        .iter()
        .filter(|tr| {
            tr.samples
                .iter()
                .all(|(_, p)| in_prior(prior, &ego_world_pose.compose(p)))
                && !footprints_overlap_strict(
                    class_footprint,
                    &tr.start(),
                    &body.footprint,
                    &Pose2::IDENTITY,
                )
        })
        .map(|tr| tr.start())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReqKey {
    pub class_id: String,
    pub env: EnvCondition,
}

/// Cells per (class, environment); each cell carries its θ-interval index.
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementSet {
    pub grid: PolarGridSpec,
    pub entries: BTreeMap<ReqKey, CellSet>,
}

impl RequirementSet {
    pub fn empty(grid: &PolarGridSpec) -> Self {
        RequirementSet {
            grid: grid.clone(),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, class_id: &str, env: EnvCondition, cell: Cell) -> Result<bool> {
        let key = ReqKey {
            class_id: class_id.to_string(),
            env,
        };
        let grid = &self.grid;
        self.entries
            .entry(key)
            .or_insert_with(|| CellSet::empty(grid))
            .insert(cell)
    }

    pub fn get(&self, class_id: &str, env: EnvCondition) -> Option<&CellSet> {
        self.entries.get(&ReqKey {
            class_id: class_id.to_string(),
            env,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(CellSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(class, env, cell)` atoms in sorted key order.
    pub fn atoms(&self) -> impl Iterator<Item = (&ReqKey, Cell)> + '_ {
        self.entries
            .iter()
            .flat_map(|(k, s)| s.cells.iter().map(move |c| (k, *c)))
    }

    pub fn union_with(&mut self, other: &RequirementSet) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (k, s) in &other.entries {
            let grid = &self.grid;
            self.entries
                .entry(k.clone())
                .or_insert_with(|| CellSet::empty(grid))
                .union_with(s)?;
        }
        Ok(())
    }

    /// Cell-wise inclusion; absent entries count as empty.
    pub fn is_subset(&self, other: &RequirementSet) -> Result<bool> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (k, s) in &self.entries {
            let ok = match other.entries.get(k) {
                Some(o) => s.is_subset(o)?,
                None => s.is_empty(),
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_file(&self) -> RequirementFile {
        let mut entries = Vec::new();
        for (k, s) in &self.entries {
            let (light, weather) = k.env.tokens();
            let mut by_theta: BTreeMap<u16, Vec<[u16; 3]>> = BTreeMap::new();
            for c in &s.cells {
                by_theta.entry(c.2).or_default().push([c.0, c.1, c.2]);
            }
            for (theta_idx, cells) in by_theta {
                entries.push(RequirementEntry {
                    class: k.class_id.clone(),
                    light: light.into(),
                    weather: weather.into(),
                    theta_idx,
                    cells,
                });
            }
        }
        RequirementFile {
            schema_version: REQUIREMENTS_SCHEMA_VERSION,
            grid: self.grid.clone(),
            entries,
        }
    }

    pub fn from_file(f: &RequirementFile) -> Result<Self> {
        if f.schema_version != REQUIREMENTS_SCHEMA_VERSION {
            return Err(Error::Schema {
                found: f.schema_version,
                expected: REQUIREMENTS_SCHEMA_VERSION,
            });
        }
        let mut out = RequirementSet::empty(&f.grid);
        for e in &f.entries {
            let env = EnvCondition::parse(&e.light, &e.weather)?;
            for c in &e.cells {
                if c[2] != e.theta_idx {
                    return Err(Error::Invalid(format!(
                        "cell {c:?} listed under theta_idx {}",
                        e.theta_idx
                    )));
                }
                out.insert(&e.class, env, Cell(c[0], c[1], c[2]))?;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        RequirementSet::from_file(&serde_json::from_str(text)?)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// On-disk form of a [`RequirementSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementFile {
    pub schema_version: u32,
    pub grid: PolarGridSpec,
    pub entries: Vec<RequirementEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementEntry {
    pub class: String,
    pub light: String,
    pub weather: String,
    pub theta_idx: u16,
    pub cells: Vec<[u16; 3]>,
}

/// Settings for turning queries into requirements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementParams {
    pub grid: PolarGridSpec,
    #[serde(default)]
    pub n_traj: BTreeMap<String, usize>,
    #[serde(default)]
    pub seed: u64,
}

impl RequirementParams {
    pub fn n_traj_for(&self, class_id: &str) -> usize {
        self.n_traj.get(class_id).copied().unwrap_or(DEFAULT_N_TRAJ)
    }
}

/// Requirements from an already-collected query set; `task` supplies the
/// priors of each instance.
pub fn requirements_from_queries(
    queries: &BTreeSet<OccupancyQuery>,
    task: &Task,
    body: &RobotBody,
    classes: &[ObjectClass],
    params: &RequirementParams,
) -> Result<RequirementSet> {
    let grid = &params.grid;
    let mut anchors: BTreeMap<QueryKey, Vec<&OccupancyQuery>> = BTreeMap::new();
    for q in queries {
        anchors.entry(q.key()).or_default().push(q);
    }
    let reps = representatives(grid);
    let mut out = RequirementSet::empty(grid);
    for class in classes {
        let n_traj = params.n_traj_for(&class.id);
        if n_traj == 0 {
            return Err(Error::Invalid(format!(
                "n_traj for {} must be at least 1",
                class.id
            )));
        }
        if !task
            .instances
            .iter()
            .any(|i| i.priors.contains_key(&class.id))
        {
            continue;
        }
        let cells: Vec<(EnvCondition, Vec<Cell>)> = anchors
            .par_iter()
            .map(|(key, qs)| {
                let q0 = qs[0];
                let trajs = pcp_key(
                    key,
                    &q0.pose,
                    q0.tau,
                    class,
                    body,
                    &reps,
                    n_traj,
                    params.seed,
                );
                let mut cells = Vec::new();
                if trajs.is_empty() {
                    return (q0.env, cells);
                }
                for q in qs {
                    let Some(prior) = task.get(&q.instance).and_then(|i| i.priors.get(&class.id))
                    else {
                        continue;
                    };
                    for start in
                        prior_check(&trajs, &class.footprint, prior, body, &q.ego_world_pose)
                    {
                        cells.push(grid.cell_of_clamped(&start));
                    }
                }
                (q0.env, cells)
            })
            .collect();
        for (env, cs) in cells {
            for c in cs {
                out.insert(&class.id, env, c)?;
            }
        }
    }
    Ok(out)
}

/// Full pipeline: simulate the task, collect queries, predict colliding
/// trajectories, filter by priors and discretize.
pub fn perception_requirements(
    spec: &PlannerSpec,
    body: &RobotBody,
    task: &Task,
    classes: &[ObjectClass],
    params: &RequirementParams,
) -> Result<RequirementSet> {
    let runs = simulate_task(spec, body, task, classes)?;
    if let Some(bad) = runs.iter().find(|r| r.outcome != Outcome::Reached) {
        return Err(Error::TaskInfeasible(format!(
            "planner {} with body {} did not reach the goal of {} ({:?})",
            spec.id, body.id, bad.instance_id, bad.outcome
        )));
    }
    requirements_from_queries(&queries_of(&runs), task, body, classes, params)
}

#[cfg(test)]
mod tests;
