//! Run orchestration behind the `codei` command line: simulate, derive
//! requirements, select sensors and solve the co-design problem, persisting
//! every artifact in a [`RunStore`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufReader;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::codesign::codei::{
    build_codei_diagram_cached, coverage_entry_key, task_envs, CodeiParams, CodesignReport,
    CoverageCache, Demand,
};
use crate::error::{Error, Result};
use crate::percperf::{coverage_cache_key, CoverageFile, CoverageSet};
use crate::percreq::{requirements_from_queries, RequirementParams, RequirementSet};
use crate::planner::{
    average_speed, compute_gflops, read_ndjson, simulate_task, OccupancyQuery, Outcome,
};
use crate::select::{oracle, pareto_sweep, weakly_dominates, ParetoFront};
use crate::store::{hash_json, RunStore};
use crate::util::sha256_hex;
use crate::world::{EnvCondition, ObjectClass, Task, TaskFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    #[default]
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
    fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            "both" => Ok(Format::Both),
            _ => Err(Error::Invalid(format!("unknown format {s}"))),
        }
    }
}

/// What a command produced, plus the exit code it asks for.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub code: i32,
    pub cached: bool,
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    fn new(code: i32, cached: bool) -> Self {
        CommandOutcome {
            code,
            cached,
            lines: Vec::new(),
            artifacts: Vec::new(),
        }
    }
}

fn inputs(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn short(key: &str) -> &str {
    &key[..key.len().min(16)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub outcome: Outcome,
    pub distance_m: f64,
    pub elapsed_s: f64,
    pub distinct_queries: usize,
    pub max_checks_per_replan: u32,
    /// Store-relative path of the NDJSON query log.
    pub log: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub planner: String,
    pub body: String,
    pub seed: u64,
    pub instances: Vec<InstanceRecord>,
    pub average_speed_kmh: Option<f64>,
    pub compute_gflops: f64,
}

impl SimulationSummary {
    pub fn all_reached(&self) -> bool {
        self.instances.iter().all(|i| i.outcome == Outcome::Reached)
    }
}

fn task_hash(tf: &TaskFile) -> Result<String> {
    hash_json(tf)
}

/// Runs the planner on every instance of the task and stores one query log
/// per instance plus a summary. Unknown ids are errors; a run where some
/// instance does not reach its goal exits with [`EXIT_FAILED`].
pub fn cmd_simulate(
    store: &RunStore,
    catalog: &Catalog,
    task_file: &TaskFile,
    planner_id: &str,
    body_id: &str,
    seed: u64,
) -> Result<(CommandOutcome, SimulationSummary)> {
    let mut missing = Vec::new();
    if catalog.planner(planner_id).is_err() {
        missing.push(format!("planner {planner_id}"));
    }
    if catalog.body(body_id).is_err() {
        missing.push(format!("body {body_id}"));
    }
    if !missing.is_empty() {
        return Err(Error::UnresolvedReferences(missing));
    }
    let mut spec = catalog.planner(planner_id)?.clone();
    spec.seed = seed;
    let body = catalog.body(body_id)?;
    let task = task_file.build_task()?;
    let key = hash_json(&("simulate/v1", &spec, body, &task, &task_file.classes))?;
    let th = task_hash(task_file)?;
    let ins = inputs(&[
        ("body", hash_json(body)?),
        ("planner", hash_json(&spec)?),
        ("task", th.clone()),
        ("seed", seed.to_string()),
    ]);

    if let Some(summary) = store.get_json::<SimulationSummary>("simulation", &key)? {
        let code = if summary.all_reached() {
            EXIT_OK
        } else {
            EXIT_FAILED
        };
        let mut out = CommandOutcome::new(code, true);
        out.lines.push(format!("simulation {} cached", short(&key)));
        out.artifacts
            .push(store.path_of("simulation", &key, "json"));
        return Ok((out, summary));
    }

    let runs = simulate_task(&spec, body, &task, &task_file.classes)?;
    let mut instances = Vec::with_capacity(runs.len());
    for r in &runs {
        let mut bytes = Vec::new();
        r.log.write_ndjson(&mut bytes)?;
        let log_key = sha256_hex(&bytes);
        store.put("log", &log_key, "ndjson", &bytes, "simulate", ins.clone())?;
        instances.push(InstanceRecord {
            id: r.instance_id.clone(),
            outcome: r.outcome,
            distance_m: r.distance_m(),
            elapsed_s: r.elapsed_s(),
            distinct_queries: r.log.dedup().len(),
            max_checks_per_replan: r.log.max_checks_per_replan(),
            log: format!("objects/log/{log_key}.ndjson"),
        });
    }
    let summary = SimulationSummary {
        planner: planner_id.into(),
        body: body_id.into(),
        seed,
        average_speed_kmh: average_speed(&runs).ok().map(|v| v * 3.6),
        compute_gflops: compute_gflops(&spec, &runs),
        instances,
    };
    let path = store.put_json("simulation", &key, &summary, "simulate", ins)?;
    store.set_ref(
        &format!("simulation/{planner_id}/{body_id}/{seed}/{}", short(&th)),
        &key,
    )?;
    let code = if summary.all_reached() {
        EXIT_OK
    } else {
        EXIT_FAILED
    };
    let mut out = CommandOutcome::new(code, false);
    for i in &summary.instances {
        out.lines.push(format!(
            "{}: {:?}, {} distinct queries",
            i.id, i.outcome, i.distinct_queries
        ));
    }
    out.artifacts.push(path);
    Ok((out, summary))
}

fn failed_runs(summary: &SimulationSummary) -> Vec<&str> {
    summary
        .instances
        .iter()
        .filter(|i| i.outcome != Outcome::Reached)
        .map(|i| i.id.as_str())
        .collect()
}

/// Reads the stored query logs of a simulation back into one query set.
pub fn load_queries(
    store: &RunStore,
    summary: &SimulationSummary,
) -> Result<BTreeSet<OccupancyQuery>> {
    let mut out = BTreeSet::new();
    for i in &summary.instances {
        let f = std::fs::File::open(store.root().join(&i.log))?;
        for rec in read_ndjson(BufReader::new(f))? {
            out.insert(rec.to_query()?);
        }
    }
    Ok(out)
}

/// Identifies the requirement series that incremental runs union into.
pub fn requirement_series(
    body_id: &str,
    classes: &[ObjectClass],
    params: &RequirementParams,
) -> Result<String> {
    let ids: Vec<&str> = classes.iter().map(|c| c.id.as_str()).collect();
    hash_json(&("requirements-series/v1", body_id, ids, params))
}

/// Converts the logs of a simulation (run first if missing) into a
/// requirement set and unions it into the series' current artifact.
pub fn cmd_requirements(
    store: &RunStore,
    catalog: &Catalog,
    task_file: &TaskFile,
    planner_id: &str,
    body_id: &str,
    seed: u64,
) -> Result<(CommandOutcome, RequirementSet)> {
    let (sim, summary) = cmd_simulate(store, catalog, task_file, planner_id, body_id, seed)?;
    let mut out = CommandOutcome::new(EXIT_OK, sim.cached);
    let bad = failed_runs(&summary);
    if !bad.is_empty() {
        out.lines.push(format!(
            "warning: instances without goal: {}",
            bad.join(", ")
        ));
    }
    let task = task_file.build_task()?;
    let body = catalog.body(body_id)?;
    let params = RequirementParams {
        grid: catalog.grid.clone(),
        n_traj: catalog.n_traj.clone(),
        seed,
    };
    let queries = load_queries(store, &summary)?;
    let mut req = requirements_from_queries(&queries, &task, body, &task_file.classes, &params)?;
    let series = requirement_series(body_id, &task_file.classes, &params)?;
    let ref_name = format!("requirements/{series}");
    let mut previous = None;
    if let Some(prev) = store.get_ref(&ref_name)? {
        if let Some(bytes) = store.get("requirements", &prev, "json")? {
            req.union_with(&RequirementSet::from_json(
                std::str::from_utf8(&bytes).map_err(|e| Error::Invalid(e.to_string()))?,
            )?)?;
            previous = Some(prev);
        }
    }
    let mut bytes = req.to_json()?.into_bytes();
    bytes.push(b'\n');
    let key = sha256_hex(&bytes);
    let mut ins = inputs(&[
        ("series", series.clone()),
        ("queries", hash_json(&summary)?),
    ]);
    if let Some(p) = &previous {
        ins.insert("previous".into(), p.clone());
    }
    let path = store.put("requirements", &key, "json", &bytes, "requirements", ins)?;
    store.set_ref(&ref_name, &key)?;
    out.lines.push(format!(
        "{} requirement atoms from {} queries",
        req.len(),
        queries.len()
    ));
    out.artifacts.push(path);
    Ok((out, req))
}

/// Coverage sets of every mounted pipeline on the body, loaded from the
/// store when present and computed and stored otherwise.
pub fn body_coverages(
    store: &RunStore,
    catalog: &Catalog,
    body_id: &str,
    classes: &[ObjectClass],
    envs: &[EnvCondition],
    epsilon: f64,
) -> Result<(String, Vec<CoverageSet>)> {
    let body = catalog.body(body_id)?;
    let mpps = catalog.mounted_pipelines(body_id)?;
    let mut keys = Vec::new();
    for m in &mpps {
        let p = catalog.pipeline(&m.pipeline)?;
        for c in classes {
            for e in envs {
                keys.push(coverage_cache_key(
                    m,
                    p,
                    body,
                    c,
                    *e,
                    epsilon,
                    &catalog.grid,
                )?);
            }
        }
    }
    let key = hash_json(&("coverage-bundle/v1", &keys))?;
    if let Some(files) = store.get_json::<Vec<CoverageFile>>("coverage", &key)? {
        let sets = files
            .iter()
            .map(|f| CoverageSet::from_file(f, &catalog.grid))
            .collect::<Result<Vec<_>>>()?;
        return Ok((key, sets));
    }
    let sets = catalog.coverages(body_id, classes, envs, epsilon)?;
    let files: Vec<CoverageFile> = sets.iter().map(CoverageSet::to_file).collect();
    store.put_json(
        "coverage",
        &key,
        &files,
        "select",
        inputs(&[("body", body_id.into()), ("mpp_keys", hash_json(&keys)?)]),
    )?;
    Ok((key, sets))
}

/// Why a selection has no solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub body: String,
    pub epsilon: f64,
    pub reason: String,
    /// Requirement atoms no mounted pipeline covers.
    pub uncoverable: Vec<String>,
}

/// Checks a swept front against the exhaustive front: every swept point
/// must be a point of it. Returns `None` when the instance is too large.
pub fn front_oracle_diff(
    inst: &crate::select::CoverInstance,
    front: &ParetoFront,
) -> Result<Option<Vec<String>>> {
    if inst.n_candidates() > oracle::MAX_CANDIDATES {
        return Ok(None);
    }
    let exact = oracle::front(inst)?;
    let mut diffs = Vec::new();
    for p in &front.points {
        let on_front = exact
            .iter()
            .any(|q| weakly_dominates(q, &p.raw) && weakly_dominates(&p.raw, q));
        if !on_front {
            diffs.push(format!(
                "swept point {:?} is not on the exhaustive front",
                p.raw
            ));
        }
    }
    Ok(Some(diffs))
}

fn summary_text(
    front: &ParetoFront,
    inst: &crate::select::CoverInstance,
    cov: &[CoverageSet],
) -> String {
    let mut s = format!("{} front points\n", front.points.len());
    for (k, p) in front.points.iter().enumerate() {
        s.push_str(&format!("\n[{k}]"));
        for (n, v) in front.cost_names.iter().zip(&p.raw) {
            s.push_str(&format!(" {n}={v}"));
        }
        s.push('\n');
        for sel in &p.selections {
            s.push_str("  mount      pipeline     yaw_deg  pitch_deg\n");
            for &l in &sel.chosen {
                let m = &cov[l].mpp;
                s.push_str(&format!(
                    "  {:<10} {:<12} {:>7} {:>9}\n",
                    m.mount,
                    m.pipeline,
                    m.yaw_mdeg as f64 / 1000.0,
                    m.pitch_mdeg as f64 / 1000.0
                ));
            }
        }
    }
    s.push_str(&format!(
        "\ncandidates: {}, atoms: {}\n",
        inst.n_candidates(),
        inst.n_atoms()
    ));
    s
}

/// Sensor selection for one body: coverage sets, weighted-sum sweep and
/// report files. An unsatisfiable requirement set yields a certificate and
/// [`EXIT_FAILED`].
pub fn cmd_select(
    store: &RunStore,
    catalog: &Catalog,
    req: &RequirementSet,
    classes: &[ObjectClass],
    body_id: &str,
    format: Format,
    check_oracle: bool,
) -> Result<(CommandOutcome, Option<ParetoFront>)> {
    if !(0.0..=1.0).contains(&catalog.epsilon) {
        return Err(Error::Invalid(format!(
            "epsilon {} outside [0, 1]",
            catalog.epsilon
        )));
    }
    catalog.body(body_id)?;
    if req.grid != catalog.grid {
        return Err(Error::GridMismatch);
    }
    let envs: Vec<EnvCondition> = req
        .entries
        .keys()
        .map(|k| k.env)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (cov_key, cov) = body_coverages(store, catalog, body_id, classes, &envs, catalog.epsilon)?;
    let req_hash = sha256_hex(req.to_json()?.as_bytes());
    let key = hash_json(&("select/v1", &req_hash, &cov_key, catalog.n_weights))?;
    let ins = inputs(&[
        ("requirements", req_hash),
        ("coverage", cov_key),
        ("n_weights", catalog.n_weights.to_string()),
    ]);
    let solved = catalog.cover_instance(req, &cov).and_then(|inst| {
        let f = pareto_sweep(&inst, catalog.n_weights)?;
        Ok((inst, f))
    });
    let (inst, front) = match solved {
        Ok(x) => x,
        Err(e @ (Error::Uncoverable(_) | Error::CoverInfeasible(_))) => {
            let uncoverable = match &e {
                Error::Uncoverable(a) => a.clone(),
                _ => Vec::new(),
            };
            let cert = InfeasibilityCertificate {
                body: body_id.into(),
                epsilon: catalog.epsilon,
                reason: e.to_string(),
                uncoverable,
            };
            let path = store.put_json("certificate", &key, &cert, "select", ins)?;
            let mut out = CommandOutcome::new(EXIT_FAILED, false);
            out.lines.push(format!(
                "infeasible: {} uncoverable atoms",
                cert.uncoverable.len()
            ));
            out.artifacts.push(path);
            return Ok((out, None));
        }
        Err(e) => return Err(e),
    };
    let mut out = CommandOutcome::new(EXIT_OK, false);
    out.artifacts
        .push(store.put_json("front", &key, &front, "select", ins)?);
    let dir = format!("select/{}", short(&key));
    out.artifacts.push(store.write_report(
        &format!("{dir}/summary.txt"),
        summary_text(&front, &inst, &cov).as_bytes(),
    )?);
    if format.csv() {
        out.artifacts
            .push(store.write_report(&format!("{dir}/front.csv"), front.to_csv().as_bytes())?);
    }
    if format.svg() {
        for (name, svg) in front.to_svgs(&format!("sensor front, body {body_id}")) {
            out.artifacts
                .push(store.write_report(&format!("{dir}/{name}.svg"), svg.as_bytes())?);
        }
    }
    out.lines.push(format!(
        "{} front points over {} candidates",
        front.points.len(),
        inst.n_candidates()
    ));
    if check_oracle {
        match front_oracle_diff(&inst, &front)? {
            None => out.lines.push(format!(
                "oracle skipped: {} candidates exceed the brute-force limit of {}",
                inst.n_candidates(),
                oracle::MAX_CANDIDATES
            )),
            Some(d) if d.is_empty() => out
                .lines
                .push("oracle: swept front agrees with enumeration".into()),
            Some(d) => {
                out.lines.extend(d);
                out.code = EXIT_FAILED;
            }
        }
    }
    Ok((out, Some(front)))
}

/// Builds the co-design diagram for the task and answers one minimal
/// resources query. An empty answer exits with [`EXIT_FAILED`].
pub fn cmd_codesign(
    store: &RunStore,
    catalog: &Catalog,
    task_file: &TaskFile,
    seed: u64,
    demand: Demand,
    format: Format,
    check_oracle: bool,
) -> Result<(CommandOutcome, CodesignReport)> {
    let task: Task = task_file.build_task()?;
    let params = CodeiParams::from_catalog(catalog, seed);
    let key = hash_json(&("codesign/v1", catalog, task_file, seed, &demand))?;
    let ins = inputs(&[
        ("catalog", hash_json(catalog)?),
        ("task", task_hash(task_file)?),
        ("seed", seed.to_string()),
        (
            "demand",
            format!("{} km/h, {} m", demand.speed_kmh, demand.range_m),
        ),
    ]);
    let cached = if check_oracle {
        None
    } else {
        store.get_json::<CodesignReport>("codesign", &key)?
    };
    let mut lines = Vec::new();
    let (report, was_cached) = match cached {
        Some(r) => (r, true),
        None => {
            let envs = task_envs(&task);
            let classes = &task_file.classes;
            let cache = CoverageCache::default();
            for b in &catalog.bodies {
                let (_, sets) =
                    body_coverages(store, catalog, &b.id, classes, &envs, params.epsilon)?;
                cache.lock().expect("coverage lock").insert(
                    coverage_entry_key(&b.id, params.epsilon, &envs, classes),
                    sets.into(),
                );
            }
            let codei = build_codei_diagram_cached(catalog, &task, classes, &params, cache)?;
            let report = codei.solve(&demand)?;
            if check_oracle {
                let (expected, tuples) = codei.enumerate(&demand)?;
                if expected == report.value_set() {
                    lines.push(format!("oracle: diagram solution agrees with enumeration of {tuples} design tuples"));
                } else {
                    lines.push(format!(
                        "oracle mismatch: diagram {:?} vs enumeration {:?}",
                        report.value_set(),
                        expected
                    ));
                }
            }
            (report, false)
        }
    };
    let mismatch = lines.iter().any(|l| l.starts_with("oracle mismatch"));
    let code = if report.points.is_empty() || mismatch {
        EXIT_FAILED
    } else {
        EXIT_OK
    };
    let mut out = CommandOutcome::new(code, was_cached);
    out.lines = lines;
    out.artifacts
        .push(store.put_json("codesign", &key, &report, "codesign", ins)?);
    let dir = format!("codesign/{}", short(&key));
    out.artifacts
        .push(store.write_report(&format!("{dir}/solutions.txt"), report.to_text().as_bytes())?);
    if format.csv() {
        out.artifacts
            .push(store.write_report(&format!("{dir}/solutions.csv"), report.to_csv().as_bytes())?);
    }
    if format.svg() {
        for (name, svg) in report.to_svgs() {
            out.artifacts
                .push(store.write_report(&format!("{dir}/{name}.svg"), svg.as_bytes())?);
        }
    }
    out.lines.push(format!(
        "{} minimal designs after {} fixed-point iterations",
        report.points.len(),
        report.kleene_iterations
    ));
    Ok((out, report))
}
