//! The robot co-design diagram: planner, collision prediction, prior check,
//! coverage, mounted pipelines, pipelines, computer and body, closed by a
//! feedback loop on the robot's shape.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::*;
use crate::catalog::Catalog;
use crate::percperf::{CoverageSet, MountedPipeline};
use crate::percreq::{requirements_from_queries, RequirementParams, RequirementSet};
use crate::planner::{average_speed, compute_gflops, queries_of, simulate_task, Outcome};
use crate::plot::scatter_svg;
use crate::select::{pareto_sweep, ParetoFront};
use crate::world::{EnvCondition, ObjectClass, Task};

pub const EXPOSED_RESOURCES: [&str; 5] = [
    "body_cost_chf",
    "price_chf",
    "mass_kg",
    "power_w",
    "compute_gflops",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeiParams {
    pub epsilon: f64,
    pub n_weights: usize,
    pub seed: u64,
}

impl CodeiParams {
    pub fn from_catalog(c: &Catalog, seed: u64) -> Self {
        CodeiParams {
            epsilon: c.epsilon,
            n_weights: c.n_weights,
            seed,
        }
    }
}

/// Result of running one planner on one body over the whole task.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerBodyOutcome {
    pub planner: String,
    pub body: String,
    /// Average speed snapped down to the catalog step; `None` if some
    /// instance was not completed.
    pub speed_kmh: Option<f64>,
    pub compute_gflops: f64,
    pub requirements: Option<RequirementSet>,
}

impl PlannerBodyOutcome {
    pub fn token(&self) -> String {
        combo(&self.planner, &self.body)
    }
}

fn combo(p: &str, b: &str) -> String {
    format!("{p}|{b}")
}

/// Coverage sets shared between diagram builds, keyed by body, epsilon and
/// environments.
pub type CoverageCache = Arc<Mutex<BTreeMap<String, Arc<Vec<CoverageSet>>>>>;

/// Key of a body's coverage sets inside a [`CoverageCache`].
pub fn coverage_entry_key(
    body: &str,
    epsilon: f64,
    envs: &[EnvCondition],
    classes: &[ObjectClass],
) -> String {
    let envs: Vec<String> = envs.iter().map(|e| e.to_string()).collect();
    let classes: Vec<&str> = classes.iter().map(|c| c.id.as_str()).collect();
    format!("{body}|{epsilon}|{}|{}", envs.join(","), classes.join(","))
}

/// Environments occurring in a task, sorted.
pub fn task_envs(task: &Task) -> Vec<EnvCondition> {
    task.instances
        .iter()
        .map(|i| i.env)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Precomputed simulation results plus lazily computed coverages and fronts.
pub struct CodeiData {
    pub catalog: Catalog,
    pub classes: Vec<ObjectClass>,
    pub envs: Vec<EnvCondition>,
    pub task_ids: BTreeSet<String>,
    /// Summed straight-line distance from each start to its goal centroid.
    pub task_length_m: f64,
    pub params: CodeiParams,
    pub outcomes: Vec<PlannerBodyOutcome>,
    coverages: CoverageCache,
    fronts: Mutex<BTreeMap<String, Option<Arc<ParetoFront>>>>,
}

impl CodeiData {
    pub fn outcome(&self, planner: &str, body: &str) -> Option<&PlannerBodyOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.planner == planner && o.body == body)
    }

    pub fn coverages(&self, body: &str) -> Result<Arc<Vec<CoverageSet>>> {
        let key = coverage_entry_key(body, self.params.epsilon, &self.envs, &self.classes);
        if let Some(c) = self.coverages.lock().expect("coverage lock").get(&key) {
            return Ok(c.clone());
        }
        let c = Arc::new(self.catalog.coverages(
            body,
            &self.classes,
            &self.envs,
            self.params.epsilon,
        )?);
        self.coverages
            .lock()
            .expect("coverage lock")
            .insert(key, c.clone());
        Ok(c)
    }

    /// Sensor front for a planner/body combination; `None` when the
    /// requirements cannot be covered.
    pub fn front(&self, planner: &str, body: &str) -> Result<Option<Arc<ParetoFront>>> {
        let key = combo(planner, body);
        if let Some(f) = self.fronts.lock().expect("front lock").get(&key) {
            return Ok(f.clone());
        }
        let o = self
            .outcome(planner, body)
            .ok_or_else(|| Error::UnresolvedReferences(vec![key.clone()]))?;
        let Some(req) = &o.requirements else {
            return Ok(None);
        };
        let cov = self.coverages(body)?;
        let front = match self
            .catalog
            .cover_instance(req, &cov)
            .and_then(|i| pareto_sweep(&i, self.params.n_weights))
        {
            Ok(f) => Some(Arc::new(f)),
            Err(Error::Uncoverable(_) | Error::CoverInfeasible(_)) => None,
            Err(e) => return Err(e),
        };
        self.fronts
            .lock()
            .expect("front lock")
            .insert(key, front.clone());
        Ok(front)
    }

    pub fn body_cost(&self, body: &str) -> Result<f64> {
        let b = self.catalog.body(body)?;
        Ok(b.fixed_cost_chf + b.op_cost_chf_per_m * self.task_length_m)
    }
}

pub struct Codei {
    pub diagram: Diagram,
    pub data: Arc<CodeiData>,
}

fn task_length(task: &Task) -> f64 {
    task.instances
        .iter()
        .map(|i| {
            let v = i.goal.vertices();
            let n = v.len() as f64;
            let cx = v.iter().map(|p| p[0]).sum::<f64>() / n;
            let cy = v.iter().map(|p| p[1]).sum::<f64>() / n;
            (cx - i.start.x).hypot(cy - i.start.y)
        })
        .sum()
}

/// Simulates every planner on every body and derives its requirements.
pub fn planner_outcomes(
    catalog: &Catalog,
    task: &Task,
    classes: &[ObjectClass],
    seed: u64,
) -> Result<Vec<PlannerBodyOutcome>> {
    let combos: Vec<(usize, usize)> = (0..catalog.planners.len())
        .flat_map(|p| (0..catalog.bodies.len()).map(move |b| (p, b)))
        .collect();
    let rp = RequirementParams {
        grid: catalog.grid.clone(),
        n_traj: catalog.n_traj.clone(),
        seed,
    };
    combos
        .par_iter()
        .map(|&(pi, bi)| {
            let mut spec = catalog.planners[pi].clone();
            spec.seed = seed;
            let body = &catalog.bodies[bi];
            let runs = simulate_task(&spec, body, task, classes)?;
            let compute = compute_gflops(&spec, &runs);
            let reached = runs.iter().all(|r| r.outcome == Outcome::Reached);
            let (speed, req) = if reached {
                let kmh = average_speed(&runs)? * 3.6;
                let snapped =
                    (kmh / catalog.speed_step_kmh + 1e-9).floor() * catalog.speed_step_kmh;
                let req = requirements_from_queries(&queries_of(&runs), task, body, classes, &rp)?;
                (Some(snapped), Some(req))
            } else {
                (None, None)
            };
            Ok(PlannerBodyOutcome {
                planner: spec.id.clone(),
                body: body.id.clone(),
                speed_kmh: speed,
                compute_gflops: compute,
                requirements: req,
            })
        })
        .collect()
}

fn opt(provides: Value, requires: Value, label: Implementation) -> CatalogOption {
    CatalogOption {
        provides,
        requires,
        label,
    }
}

fn tup(v: Vec<Value>) -> Value {
    Value::Tuple(v)
}

fn tok(s: &str) -> Value {
    Value::token(s)
}

fn node(name: &str, mdpi: DynMdpi, f: &[&str], r: &[&str]) -> Node {
    Node {
        name: name.into(),
        mdpi,
        fun_ports: f.iter().map(|s| s.to_string()).collect(),
        res_ports: r.iter().map(|s| s.to_string()).collect(),
    }
}

fn edge(from: (&str, &str), to: (&str, &str)) -> Edge {
    Edge {
        from: PortRef::new(from.0, from.1),
        to: PortRef::new(to.0, to.1),
        is_loop: false,
    }
}

pub fn speed_poset() -> Poset {
    Poset::num("average_speed", "km/h")
}
pub fn range_poset() -> Poset {
    Poset::num("driving_range", "m")
}
pub fn task_poset() -> Poset {
    Poset::sets("task")
}

fn chf() -> Poset {
    Poset::num("cost", "CHF")
}
fn kg() -> Poset {
    Poset::num("mass", "kg")
}
fn watt() -> Poset {
    Poset::num("power", "W")
}
fn gflops() -> Poset {
    Poset::num("compute", "GFLOPS")
}

/// Instantiates the co-design diagram. Simulation and requirement
/// derivation run here; coverage and sensor selection run on demand.
pub fn build_codei_diagram(
    catalog: &Catalog,
    task: &Task,
    classes: &[ObjectClass],
    params: &CodeiParams,
) -> Result<Codei> {
    build_codei_diagram_cached(catalog, task, classes, params, CoverageCache::default())
}

/// As [`build_codei_diagram`], reusing coverage sets from `cache`. The cache
/// must only be shared between builds over the same catalog.
pub fn build_codei_diagram_cached(
    catalog: &Catalog,
    task: &Task,
    classes: &[ObjectClass],
    params: &CodeiParams,
    cache: CoverageCache,
) -> Result<Codei> {
    catalog.validate()?;
    let outcomes = planner_outcomes(catalog, task, classes, params.seed)?;
    let envs = task_envs(task);
    let data = Arc::new(CodeiData {
        catalog: catalog.clone(),
        classes: classes.to_vec(),
        envs,
        task_ids: task.ids().into_iter().map(String::from).collect(),
        task_length_m: task_length(task),
        params: params.clone(),
        outcomes,
        coverages: cache,
        fronts: Mutex::new(BTreeMap::new()),
    });
    build_diagram(data)
}

fn build_diagram(data: Arc<CodeiData>) -> Result<Codei> {
    let q = Poset::tokens("occupancy_queries");
    let tr = Poset::tokens("colliding_trajectories");
    let pr = Poset::tokens("perception_requirements");
    let cov = Poset::tokens("perception_coverage");
    let dynamics = Poset::tokens("robot_dynamics");
    let fp = Poset::tokens("robot_footprint");
    let mounts = Poset::tokens("mounting_configurations");
    let perf = Poset::tokens("perception_performance");
    let shape = Poset::tokens("robot_shape");

    let task_set = Value::Set(data.task_ids.clone());
    let feasible: Vec<&PlannerBodyOutcome> = data
        .outcomes
        .iter()
        .filter(|o| o.speed_kmh.is_some())
        .collect();

    let planner = CatalogMdpi::new(
        "planner",
        Poset::product(vec![task_poset(), speed_poset()]),
        Poset::product(vec![q.clone(), gflops(), dynamics.clone()]),
        feasible
            .iter()
            .map(|o| {
                opt(
                    tup(vec![
                        task_set.clone(),
                        Value::num(o.speed_kmh.unwrap_or(0.0)),
                    ]),
                    tup(vec![
                        tok(&o.token()),
                        Value::num(o.compute_gflops),
                        tok(&o.body),
                    ]),
                    vec![("planner".into(), o.planner.clone())],
                )
            })
            .collect(),
    )?;
    let pcp = CatalogMdpi::new(
        "collision_prediction",
        Poset::product(vec![q.clone(), shape.clone()]),
        tr.clone(),
        feasible
            .iter()
            .map(|o| {
                opt(
                    tup(vec![tok(&o.token()), tok(&o.body)]),
                    tok(&o.token()),
                    vec![],
                )
            })
            .collect(),
    )?;
    let prior = CatalogMdpi::new(
        "prior_check",
        tr.clone(),
        Poset::product(vec![pr.clone(), fp.clone()]),
        feasible
            .iter()
            .map(|o| {
                opt(
                    tok(&o.token()),
                    tup(vec![tok(&o.token()), tok(&o.body)]),
                    vec![],
                )
            })
            .collect(),
    )?;
    let coverage = CatalogMdpi::new(
        "coverage",
        pr.clone(),
        cov.clone(),
        feasible
            .iter()
            .map(|o| opt(tok(&o.token()), tok(&o.token()), vec![]))
            .collect(),
    )?;

    let registry: Arc<Mutex<BTreeMap<String, Vec<f64>>>> = Arc::new(Mutex::new(BTreeMap::new()));
    let mpp = {
        let data = data.clone();
        let registry = registry.clone();
        OnDemandMdpi::new(
            "mounted_pipelines",
            Poset::product(vec![cov.clone(), shape.clone()]),
            Poset::product(vec![mounts.clone(), perf.clone()]),
            move |f| {
                let t = f.tuple().ok_or_else(|| {
                    Error::PosetMismatch("mounted pipelines expect a pair".into())
                })?;
                let Value::Token(c) = &t[0] else {
                    return Ok(Antichain::empty());
                };
                let (p, b) = c
                    .split_once('|')
                    .ok_or_else(|| Error::Invalid(format!("bad coverage token {c}")))?;
                if let Value::Token(s) = &t[1] {
                    if s != b {
                        return Ok(Antichain::empty());
                    }
                }
                let Some(front) = data.front(p, b)? else {
                    return Ok(Antichain::empty());
                };
                let mut points = Vec::new();
                for (k, pt) in front.points.iter().enumerate() {
                    let token = format!("{c}#{k}");
                    registry
                        .lock()
                        .expect("registry lock")
                        .insert(token.clone(), pt.raw.clone());
                    let impls = pt
                        .selections
                        .iter()
                        .map(|s| vec![("sensors".to_string(), s.ids.join(";"))])
                        .collect();
                    points.push(AntichainPoint {
                        value: tup(vec![tok(b), tok(&token)]),
                        impls,
                    });
                }
                Ok(Antichain { points })
            },
        )
    };
    let pipelines = {
        let registry = registry.clone();
        MapMdpi::new(
            "perception_pipelines",
            perf.clone(),
            Poset::product(vec![chf(), kg(), watt(), gflops()]),
            move |f| match f {
                Value::Token(t) => {
                    let raw = registry
                        .lock()
                        .expect("registry lock")
                        .get(t)
                        .cloned()
                        .ok_or_else(|| Error::Invalid(format!("unknown performance token {t}")))?;
                    Ok(Some(tup(raw.iter().map(|x| Value::num(*x)).collect())))
                }
                _ => Ok(Some(tup(vec![Value::num(0.0); 4]))),
            },
        )
    };
    let computer = CatalogMdpi::new(
        "computer",
        gflops(),
        Poset::product(vec![chf(), kg(), watt()]),
        data.catalog
            .computers
            .iter()
            .map(|c| {
                opt(
                    Value::num(c.gflops),
                    tup(vec![
                        Value::num(c.price_chf),
                        Value::num(c.mass_kg),
                        Value::num(c.power_w),
                    ]),
                    vec![("computer".into(), c.id.clone())],
                )
            })
            .collect(),
    )?;
    let body = CatalogMdpi::new(
        "body",
        Poset::product(vec![
            dynamics.clone(),
            fp.clone(),
            mounts.clone(),
            kg(),
            watt(),
            range_poset(),
        ]),
        Poset::product(vec![shape.clone(), chf()]),
        data.catalog
            .bodies
            .iter()
            .map(|b| {
                Ok(opt(
                    tup(vec![
                        tok(&b.id),
                        tok(&b.id),
                        tok(&b.id),
                        Value::num(b.payload_max_kg),
                        Value::num(b.aux_power_w),
                        Value::num(b.driving_range_m),
                    ]),
                    tup(vec![tok(&b.id), Value::num(data.body_cost(&b.id)?)]),
                    vec![("body".into(), b.id.clone())],
                ))
            })
            .collect::<Result<Vec<_>>>()?,
    )?;

    let nodes = vec![
        node(
            "planner",
            Arc::new(planner),
            &["task", "speed"],
            &["queries", "compute", "dynamics"],
        ),
        node(
            "pcp",
            Arc::new(pcp),
            &["queries", "shape"],
            &["trajectories"],
        ),
        node(
            "prior",
            Arc::new(prior),
            &["trajectories"],
            &["requirements", "footprint"],
        ),
        node(
            "coverage",
            Arc::new(coverage),
            &["requirements"],
            &["coverage"],
        ),
        node(
            "mpp",
            Arc::new(mpp),
            &["coverage", "shape"],
            &["mounts", "performance"],
        ),
        node(
            "pp",
            Arc::new(pipelines),
            &["performance"],
            &["price", "mass", "power", "compute"],
        ),
        node(
            "compute_sum",
            Arc::new(MapMdpi::sum(
                "compute_sum",
                vec![gflops(), gflops()],
                gflops(),
            )),
            &["planner", "perception"],
            &["total"],
        ),
        node(
            "compute_tee",
            Arc::new(MapMdpi::tee("compute_tee", gflops(), 2)),
            &["in"],
            &["computer", "out"],
        ),
        node(
            "computer",
            Arc::new(computer),
            &["compute"],
            &["price", "mass", "power"],
        ),
        node(
            "price_sum",
            Arc::new(MapMdpi::sum("price_sum", vec![chf(), chf()], chf())),
            &["sensors", "computer"],
            &["total"],
        ),
        node(
            "mass_sum",
            Arc::new(MapMdpi::sum("mass_sum", vec![kg(), kg()], kg())),
            &["sensors", "computer"],
            &["total"],
        ),
        node(
            "mass_tee",
            Arc::new(MapMdpi::tee("mass_tee", kg(), 2)),
            &["in"],
            &["body", "out"],
        ),
        node(
            "power_sum",
            Arc::new(MapMdpi::sum("power_sum", vec![watt(), watt()], watt())),
            &["sensors", "computer"],
            &["total"],
        ),
        node(
            "power_tee",
            Arc::new(MapMdpi::tee("power_tee", watt(), 2)),
            &["in"],
            &["body", "out"],
        ),
        node(
            "body",
            Arc::new(body),
            &[
                "dynamics",
                "footprint",
                "mounts",
                "payload",
                "aux_power",
                "range",
            ],
            &["shape", "cost"],
        ),
        node(
            "shape_tee",
            Arc::new(MapMdpi::tee("shape_tee", shape.clone(), 2)),
            &["in"],
            &["pcp", "mpp"],
        ),
    ];
    let mut edges = vec![
        edge(("planner", "queries"), ("pcp", "queries")),
        edge(("planner", "compute"), ("compute_sum", "planner")),
        edge(("planner", "dynamics"), ("body", "dynamics")),
        edge(("pcp", "trajectories"), ("prior", "trajectories")),
        edge(("prior", "requirements"), ("coverage", "requirements")),
        edge(("prior", "footprint"), ("body", "footprint")),
        edge(("coverage", "coverage"), ("mpp", "coverage")),
        edge(("mpp", "mounts"), ("body", "mounts")),
        edge(("mpp", "performance"), ("pp", "performance")),
        edge(("pp", "price"), ("price_sum", "sensors")),
        edge(("pp", "mass"), ("mass_sum", "sensors")),
        edge(("pp", "power"), ("power_sum", "sensors")),
        edge(("pp", "compute"), ("compute_sum", "perception")),
        edge(("compute_sum", "total"), ("compute_tee", "in")),
        edge(("compute_tee", "computer"), ("computer", "compute")),
        edge(("computer", "price"), ("price_sum", "computer")),
        edge(("computer", "mass"), ("mass_sum", "computer")),
        edge(("computer", "power"), ("power_sum", "computer")),
        edge(("mass_sum", "total"), ("mass_tee", "in")),
        edge(("mass_tee", "body"), ("body", "payload")),
        edge(("power_sum", "total"), ("power_tee", "in")),
        edge(("power_tee", "body"), ("body", "aux_power")),
        edge(("body", "shape"), ("shape_tee", "in")),
    ];
    for (from, to) in [
        (("shape_tee", "pcp"), ("pcp", "shape")),
        (("shape_tee", "mpp"), ("mpp", "shape")),
    ] {
        let mut e = edge(from, to);
        e.is_loop = true;
        edges.push(e);
    }
    let diagram = Diagram::new(
        "codei",
        nodes,
        edges,
        vec![
            PortRef::new("planner", "task"),
            PortRef::new("planner", "speed"),
            PortRef::new("body", "range"),
        ],
        vec![
            PortRef::new("body", "cost"),
            PortRef::new("price_sum", "total"),
            PortRef::new("mass_tee", "out"),
            PortRef::new("power_tee", "out"),
            PortRef::new("compute_tee", "out"),
        ],
    )?;
    Ok(Codei { diagram, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub speed_kmh: f64,
    pub range_m: f64,
}

impl Codei {
    pub fn demand_value(&self, d: &Demand) -> Value {
        tup(vec![
            Value::Set(self.data.task_ids.clone()),
            Value::num(d.speed_kmh),
            Value::num(d.range_m),
        ])
    }

    pub fn solve(&self, d: &Demand) -> Result<CodesignReport> {
        let sol = solve_fix_fun_min_res(&self.diagram, &self.demand_value(d))?;
        CodesignReport::from_solution(self, d, &sol)
    }

    /// Exhaustive enumeration over (planner, body, front point, computer),
    /// independent of the diagram machinery. Returns the minimal resource
    /// vectors in fixed-point units.
    pub fn enumerate(&self, d: &Demand) -> Result<(BTreeSet<Vec<i64>>, usize)> {
        let num = |x: f64| match Value::num(x) {
            Value::Num(v) => v,
            _ => unreachable!(),
        };
        let want_speed = num(d.speed_kmh);
        let want_range = num(d.range_m);
        let mut all = Vec::new();
        let mut tuples = 0usize;
        for o in &self.data.outcomes {
            let Some(speed) = o.speed_kmh else { continue };
            let body = self.data.catalog.body(&o.body)?;
            let front = self.data.front(&o.planner, &o.body)?;
            let Some(front) = front else { continue };
            for pt in &front.points {
                for c in &self.data.catalog.computers {
                    tuples += 1;
                    let s: Vec<i64> = pt.raw.iter().map(|x| num(*x)).collect();
                    let compute = num(o.compute_gflops) + s[3];
                    let price = s[0] + num(c.price_chf);
                    let mass = s[1] + num(c.mass_kg);
                    let power = s[2] + num(c.power_w);
                    let ok = num(speed) >= want_speed
                        && num(c.gflops) >= compute
                        && num(body.payload_max_kg) >= mass
                        && num(body.aux_power_w) >= power
                        && num(body.driving_range_m) >= want_range;
                    if ok {
                        all.push(vec![
                            num(self.data.body_cost(&o.body)?),
                            price,
                            mass,
                            power,
                            compute,
                        ]);
                    }
                }
            }
        }
        let min: BTreeSet<Vec<i64>> = all
            .iter()
            .filter(|v| {
                !all.iter()
                    .any(|w| w != *v && w.iter().zip(v.iter()).all(|(a, b)| a <= b))
            })
            .cloned()
            .collect();
        Ok((min, tuples))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlacement {
    pub pipeline: String,
    pub mount: String,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub body: String,
    pub planner: String,
    pub sensors: Vec<SensorPlacement>,
    pub computer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub resources: Vec<f64>,
    pub designs: Vec<DesignSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodesignReport {
    pub demand: Demand,
    pub resource_names: Vec<String>,
    pub kleene_iterations: usize,
    pub points: Vec<DesignPoint>,
}

fn design_of(
    imp: &Implementation,
    mpps: &BTreeMap<String, MountedPipeline>,
) -> Result<DesignSolution> {
    let get = |k: &str| imp.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
    let sensors = get("sensors")
        .unwrap_or_default()
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|id| {
            let m = mpps
                .get(id)
                .ok_or_else(|| Error::UnresolvedReferences(vec![id.to_string()]))?;
            Ok(SensorPlacement {
                pipeline: m.pipeline.clone(),
                mount: m.mount.clone(),
                yaw_deg: m.yaw_mdeg as f64 / 1000.0,
                pitch_deg: m.pitch_mdeg as f64 / 1000.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignSolution {
        body: get("body").unwrap_or_default(),
        planner: get("planner").unwrap_or_default(),
        sensors,
        computer: get("computer").unwrap_or_default(),
    })
}

impl CodesignReport {
    pub fn from_solution(codei: &Codei, demand: &Demand, sol: &Solution) -> Result<Self> {
        let mut mpps = BTreeMap::new();
        for b in &codei.data.catalog.bodies {
            for m in codei.data.catalog.mounted_pipelines(&b.id)? {
                mpps.insert(m.id(), m);
            }
        }
        let mut points = Vec::new();
        for p in &sol.antichain.points {
            let resources = p
                .value
                .tuple()
                .ok_or_else(|| Error::PosetMismatch("resource tuple expected".into()))?
                .iter()
                .map(|v| v.as_f64().unwrap_or(f64::NAN))
                .collect();
            let mut designs = p
                .impls
                .iter()
                .map(|i| design_of(i, &mpps))
                .collect::<Result<Vec<_>>>()?;
            designs.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
            designs.dedup();
            points.push(DesignPoint { resources, designs });
        }
        points.sort_by(|a, b| {
            a.resources
                .partial_cmp(&b.resources)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(CodesignReport {
            demand: *demand,
            resource_names: EXPOSED_RESOURCES.iter().map(|s| s.to_string()).collect(),
            kleene_iterations: sol.kleene_iterations,
            points,
        })
    }

    /// Resource vectors in fixed-point units, for exact comparisons.
    pub fn value_set(&self) -> BTreeSet<Vec<i64>> {
        self.points
            .iter()
            .map(|p| {
                p.resources
                    .iter()
                    .map(|x| match Value::num(*x) {
                        Value::Num(v) => v,
                        _ => unreachable!(),
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.resource_names.join(",");
        s.push_str(",body,planner,computer,sensors\n");
        for p in &self.points {
            for d in &p.designs {
                let vals: Vec<String> = p.resources.iter().map(|x| format!("{x}")).collect();
                let sensors: Vec<String> = d
                    .sensors
                    .iter()
                    .map(|x| format!("{}@{}:{}:{}", x.pipeline, x.mount, x.yaw_deg, x.pitch_deg))
                    .collect();
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    vals.join(","),
                    d.body,
                    d.planner,
                    d.computer,
                    sensors.join(";")
                ));
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "demand: average speed >= {} km/h, driving range >= {} m\nkleene iterations: {}\nsolutions: {}\n",
            self.demand.speed_kmh,
            self.demand.range_m,
            self.kleene_iterations,
            self.points.len()
        );
        for (i, p) in self.points.iter().enumerate() {
            s.push_str(&format!("\n[{i}]"));
            for (n, v) in self.resource_names.iter().zip(&p.resources) {
                s.push_str(&format!(" {n}={v}"));
            }
            s.push('\n');
            for d in &p.designs {
                s.push_str(&format!(
                    "  body {} | planner {} | computer {}\n",
                    d.body, d.planner, d.computer
                ));
                for x in &d.sensors {
                    s.push_str(&format!(
                        "    {} at {} yaw {} deg pitch {} deg\n",
                        x.pipeline, x.mount, x.yaw_deg, x.pitch_deg
                    ));
                }
            }
        }
        s
    }

    /// One scatter per pair of exposed resources.
    pub fn to_svgs(&self) -> Vec<(String, String)> {
        let n = self.resource_names.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let pts: Vec<(f64, f64, String)> = self
                    .points
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (p.resources[i], p.resources[j], format!("{k}")))
                    .collect();
                let (a, b) = (&self.resource_names[i], &self.resource_names[j]);
                out.push((
                    format!("{a}__{b}"),
                    scatter_svg("co-design solutions", a, b, &pts),
                ));
            }
        }
        out
    }
}
