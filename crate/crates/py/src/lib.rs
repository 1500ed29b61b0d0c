#![allow(clippy::useless_conversion)]

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use codei::catalog::Catalog;
use codei::codesign::codei::Demand;
use codei::commands::{self, Format};
use codei::percreq::RequirementSet;
use codei::store::RunStore;
use codei::world::TaskFile;

fn err(e: codei::Error) -> PyErr {
    match e {
        codei::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

struct Inputs {
    store: RunStore,
    catalog: Catalog,
    task: TaskFile,
}

fn inputs(store: &str, catalog: &str, task: &str) -> PyResult<Inputs> {
    Ok(Inputs {
        store: RunStore::open(store).map_err(err)?,
        catalog: Catalog::load(Path::new(catalog)).map_err(err)?,
        task: TaskFile::load(Path::new(task)).map_err(err)?,
    })
}

fn format(f: &str) -> PyResult<Format> {
    f.parse().map_err(err)
}

/// Simulates a planner on a body; returns `(exit_code, summary_json)`.
#[pyfunction]
#[pyo3(signature = (store, catalog, task, planner, body, seed=0))]
fn simulate(
    py: Python<'_>,
    store: &str,
    catalog: &str,
    task: &str,
    planner: &str,
    body: &str,
    seed: u64,
) -> PyResult<(i32, String)> {
    let i = inputs(store, catalog, task)?;
    let (out, summary) = py
        .allow_threads(|| {
            commands::cmd_simulate(&i.store, &i.catalog, &i.task, planner, body, seed)
        })
        .map_err(err)?;
    Ok((out.code, json(&summary)?))
}

/// Derives (and unions) the requirement set; returns `(exit_code, requirements_json)`.
#[pyfunction]
#[pyo3(signature = (store, catalog, task, planner, body, seed=0))]
fn requirements(
    py: Python<'_>,
    store: &str,
    catalog: &str,
    task: &str,
    planner: &str,
    body: &str,
    seed: u64,
) -> PyResult<(i32, String)> {
    let i = inputs(store, catalog, task)?;
    let (out, req) = py
        .allow_threads(|| {
            commands::cmd_requirements(&i.store, &i.catalog, &i.task, planner, body, seed)
        })
        .map_err(err)?;
    Ok((out.code, req.to_json().map_err(err)?))
}

/// Sensor selection; returns `(exit_code, front_json or None)`.
#[pyfunction]
#[pyo3(signature = (store, catalog, task, requirements, body, epsilon=None, weights=None, fmt="both"))]
#[allow(clippy::too_many_arguments)]
fn select(
    py: Python<'_>,
    store: &str,
    catalog: &str,
    task: &str,
    requirements: &str,
    body: &str,
    epsilon: Option<f64>,
    weights: Option<usize>,
    fmt: &str,
) -> PyResult<(i32, Option<String>)> {
    let mut i = inputs(store, catalog, task)?;
    if let Some(e) = epsilon {
        i.catalog.epsilon = e;
    }
    if let Some(w) = weights {
        i.catalog.n_weights = w.max(1);
    }
    let req = RequirementSet::from_json(requirements).map_err(err)?;
    let f = format(fmt)?;
    let (out, front) = py
        .allow_threads(|| {
            commands::cmd_select(&i.store, &i.catalog, &req, &i.task.classes, body, f, false)
        })
        .map_err(err)?;
    Ok((out.code, front.map(|f| json(&f)).transpose()?))
}

/// Minimal resources for a demanded speed (km/h) and range (m); returns
/// `(exit_code, report_json)`.
#[pyfunction]
#[pyo3(signature = (store, catalog, task, speed_kmh=0.0, range_m=0.0, seed=0, fmt="both"))]
#[allow(clippy::too_many_arguments)]
fn codesign(
    py: Python<'_>,
    store: &str,
    catalog: &str,
    task: &str,
    speed_kmh: f64,
    range_m: f64,
    seed: u64,
    fmt: &str,
) -> PyResult<(i32, String)> {
    let i = inputs(store, catalog, task)?;
    let f = format(fmt)?;
    let demand = Demand { speed_kmh, range_m };
    let (out, report) = py
        .allow_threads(|| {
            commands::cmd_codesign(&i.store, &i.catalog, &i.task, seed, demand, f, false)
        })
        .map_err(err)?;
    Ok((out.code, json(&report)?))
}

#[pyfunction]
fn halton_weights(w: usize, n: usize) -> Vec<Vec<f64>> {
    codei::select::halton_weights(w, n)
}

#[pymodule]
fn codei_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(requirements, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(codesign, m)?)?;
    m.add_function(wrap_pyfunction!(halton_weights, m)?)?;
    Ok(())
}
