//! Component catalogs: bodies, perception pipelines, computers, planners and
//! mounting options.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PolarGridSpec;
use crate::percperf::{coverage, CoverageSet, MountedPipeline, PerceptionPipeline};
use crate::percreq::RequirementSet;
use crate::planner::{PlannerSpec, RobotBody};
use crate::select::{build_instance, CoverInstance, RESOURCE_NAMES};
use crate::world::{EnvCondition, ObjectClass};

pub const CATALOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Computer {
    pub id: String,
    pub gflops: f64,
    pub memory_gb: f64,
    pub price_chf: f64,
    pub mass_kg: f64,
    pub power_w: f64,
}

fn default_speed_step() -> f64 {
    1.0
}
fn default_weights() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub schema_version: u32,
    pub bodies: Vec<RobotBody>,
    pub pipelines: Vec<PerceptionPipeline>,
    pub computers: Vec<Computer>,
    pub planners: Vec<PlannerSpec>,
    pub yaw_options_rad: Vec<f64>,
    pub pitch_options_rad: Vec<f64>,
    pub grid: PolarGridSpec,
    pub epsilon: f64,
    /// Backward trajectories sampled per class and query.
    #[serde(default)]
    pub n_traj: std::collections::BTreeMap<String, usize>,
    /// Resolution of the average-speed axis in km/h.
    #[serde(default = "default_speed_step")]
    pub speed_step_kmh: f64,
    #[serde(default = "default_weights")]
    pub n_weights: usize,
}

fn unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    let mut n = 0;
    for id in ids {
        n += 1;
        if !seen.insert(id) {
            return Err(Error::Invalid(format!("duplicate {what} id {id}")));
        }
    }
    if n == 0 {
        return Err(Error::Invalid(format!("catalog has no {what}")));
    }
    Ok(())
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v
            .get("schema_version")
            .and_then(|s| s.as_u64())
            .unwrap_or(0) as u32;
        if found != CATALOG_SCHEMA_VERSION {
            return Err(Error::Schema {
                found,
                expected: CATALOG_SCHEMA_VERSION,
            });
        }
        let c: Catalog = serde_json::from_value(v)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        unique("body", self.bodies.iter().map(|b| b.id.as_str()))?;
        unique("pipeline", self.pipelines.iter().map(|p| p.id.as_str()))?;
        unique("computer", self.computers.iter().map(|c| c.id.as_str()))?;
        unique("planner", self.planners.iter().map(|p| p.id.as_str()))?;
        if self.yaw_options_rad.is_empty() || self.pitch_options_rad.is_empty() {
            return Err(Error::Invalid(
                "yaw and pitch option lists must be nonempty".into(),
            ));
        }
        if self
            .yaw_options_rad
            .iter()
            .chain(&self.pitch_options_rad)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Invalid("non-finite mounting angle".into()));
        }
        for b in &self.bodies {
            b.validate()?;
        }
        for p in &self.pipelines {
            p.validate()?;
        }
        for p in &self.planners {
            p.validate()?;
        }
        for c in &self.computers {
            let vals = [c.gflops, c.memory_gb, c.price_chf, c.mass_kg, c.power_w];
            if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::Invalid(format!("computer {}: bad attributes", c.id)));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Invalid(format!(
                "epsilon {} outside (0, 1]",
                self.epsilon
            )));
        }
        if !(self.speed_step_kmh > 0.0 && self.speed_step_kmh.is_finite()) || self.n_weights == 0 {
            return Err(Error::Invalid(
                "speed step and weight count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn body(&self, id: &str) -> Result<&RobotBody> {
        self.bodies
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::UnresolvedReferences(vec![format!("body {id}")]))
    }

    pub fn planner(&self, id: &str) -> Result<&PlannerSpec> {
        self.planners
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::UnresolvedReferences(vec![format!("planner {id}")]))
    }

    pub fn pipeline(&self, id: &str) -> Result<&PerceptionPipeline> {
        self.pipelines
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::UnresolvedReferences(vec![format!("pipeline {id}")]))
    }

    pub fn computer(&self, id: &str) -> Result<&Computer> {
        self.computers
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnresolvedReferences(vec![format!("computer {id}")]))
    }

    /// Every pipeline at every mount point, yaw and pitch of the body, in a
    /// fixed order.
    pub fn mounted_pipelines(&self, body_id: &str) -> Result<Vec<MountedPipeline>> {
        let body = self.body(body_id)?;
        let mut out = Vec::new();
        for p in &self.pipelines {
            for m in &body.mount_points {
                for &yaw in &self.yaw_options_rad {
                    for &pitch in &self.pitch_options_rad {
                        out.push(MountedPipeline::new(&p.id, &body.id, &m.name, yaw, pitch));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Resource vector (price, mass, power, compute) of one pipeline.
    pub fn raw_resources(&self, pipeline_id: &str) -> Result<Vec<f64>> {
        let p = self.pipeline(pipeline_id)?;
        Ok(vec![p.price_chf, p.mass_kg, p.power_w, p.detector_gflops])
    }

    /// Per-resource maxima over the pipeline catalog, used to normalize
    /// weighted costs.
    pub fn normalizers(&self) -> Vec<f64> {
        (0..RESOURCE_NAMES.len())
            .map(|j| {
                let m = self
                    .pipelines
                    .iter()
                    .map(|p| [p.price_chf, p.mass_kg, p.power_w, p.detector_gflops][j])
                    .fold(0.0, f64::max);
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Coverage sets of every mounted pipeline of the body.
    pub fn coverages(
        &self,
        body_id: &str,
        classes: &[ObjectClass],
        envs: &[EnvCondition],
        epsilon: f64,
    ) -> Result<Vec<CoverageSet>> {
        let body = self.body(body_id)?;
        self.mounted_pipelines(body_id)?
            .par_iter()
            .map(|m| {
                coverage(
                    m,
                    self.pipeline(&m.pipeline)?,
                    body,
                    classes,
                    envs,
                    epsilon,
                    &self.grid,
                )
            })
            .collect()
    }

    /// Cover instance for a requirement set on one body.
    pub fn cover_instance(
        &self,
        req: &RequirementSet,
        coverages: &[CoverageSet],
    ) -> Result<CoverInstance> {
        let raw = coverages
            .iter()
            .map(|c| self.raw_resources(&c.mpp.pipeline))
            .collect::<Result<Vec<_>>>()?;
        build_instance(req, coverages, &raw, &self.normalizers())
    }
}
