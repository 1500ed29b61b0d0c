//! Object classes, priors, scenario instances and tasks, plus the unicycle
//! dynamics shared by object classes and robot bodies.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{bounds_of, normalize_angle, polygon_contains, Footprint, Point, Pose2};
use crate::util::{fnv1a64, keyed_rng};

/// Current task/scenario file schema.
pub const TASK_SCHEMA_VERSION: u32 = 1;

/// Maximum rejection-sampling attempts when placing one object into its prior.
pub const PRIOR_SAMPLING_ATTEMPTS: usize = 10_000;

mod radius_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    // JSON has no infinity; `null` encodes a straight-only (unbounded) radius.
    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsLimits {
    #[serde(rename = "v_max_mps")]
    pub v_max: f64,
    #[serde(rename = "a_max_mps2")]
    pub a_max: f64,
    #[serde(rename = "d_max_mps2")]
    pub d_max: f64,
    /// `0` means unbounded curvature, `∞` means straight-line motion only.
    #[serde(rename = "turn_radius_min_m", with = "radius_serde")]
    pub turn_radius_min: f64,
}

impl DynamicsLimits {
    pub fn new(v_max: f64, a_max: f64, d_max: f64, turn_radius_min: f64) -> Result<Self> {
        let l = DynamicsLimits {
            v_max,
            a_max,
            d_max,
            turn_radius_min,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.v_max.is_finite() && self.a_max.is_finite() && self.d_max.is_finite();
        if !finite
            || self.v_max < 0.0
            || self.a_max < 0.0
            || self.d_max < 0.0
            || !(self.turn_radius_min >= 0.0)
        {
            return Err(Error::Invalid(format!("bad dynamics limits {self:?}")));
        }
        Ok(())
    }

    pub fn stationary() -> Self {
        DynamicsLimits {
            v_max: 0.0,
            a_max: 0.0,
            d_max: 0.0,
            turn_radius_min: 0.0,
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.v_max == 0.0
    }

    pub fn max_curvature(&self) -> f64 {
        if self.turn_radius_min == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.turn_radius_min
        }
    }
}

/// Piecewise-constant control input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    #[serde(rename = "accel_mps2")]
    pub accel: f64,
    #[serde(rename = "curvature_per_m")]
    pub curvature: f64,
}

impl Control {
    pub const ZERO: Control = Control {
        accel: 0.0,
        curvature: 0.0,
    };

    pub fn new(accel: f64, curvature: f64) -> Self {
        Control { accel, curvature }
    }
}

fn check_control(limits: &DynamicsLimits, u: &Control) -> Result<()> {
    const TOL: f64 = 1e-12;
    if !u.accel.is_finite() || !u.curvature.is_finite() {
        return Err(Error::ControlOutOfLimits("non-finite control".into()));
    }
    if u.curvature.abs() > limits.max_curvature() + TOL {
        return Err(Error::ControlOutOfLimits(format!(
            "|curvature| {} exceeds {}",
            u.curvature.abs(),
            limits.max_curvature()
        )));
    }
    if u.accel > limits.a_max + TOL || u.accel < -limits.d_max - TOL {
        return Err(Error::ControlOutOfLimits(format!(
            "accel {} outside [-{}, {}]",
            u.accel, limits.d_max, limits.a_max
        )));
    }
    Ok(())
}

/// Euler step with a signed time step; negative `dt` walks backwards in time.
pub(crate) fn integrate(
    limits: &DynamicsLimits,
    pose: &Pose2,
    speed: f64,
    u: &Control,
    dt: f64,
) -> (Pose2, f64) {
    let (s, c) = pose.theta.sin_cos();
    let next = Pose2::new(
        pose.x + speed * c * dt,
        pose.y + speed * s * dt,
        pose.theta + speed * u.curvature * dt,
    );
    let v = (speed + u.accel * dt).clamp(0.0, limits.v_max);
    (next, v)
}

/// One forward Euler step of the unicycle model.
pub fn step(
    limits: &DynamicsLimits,
    state: (Pose2, f64),
    control: Control,
    dt: f64,
) -> Result<(Pose2, f64)> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("dt must be positive, got {dt}")));
    }
    check_control(limits, &control)?;
    Ok(integrate(limits, &state.0, state.1, &control, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tone {
    Light,
    Dark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub reflectivity: f64,
    pub tone: Tone,
}

impl Appearance {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(Error::Invalid("appearance extents must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(Error::Invalid("reflectivity must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAppearance {
    pub appearance: Appearance,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClass", into = "RawClass")]
pub struct ObjectClass {
    pub id: String,
    pub limits: DynamicsLimits,
    /// Nominal footprint covering every appearance choice.
    pub footprint: Footprint,
    pub appearances: Vec<WeightedAppearance>,
}

#[derive(Serialize, Deserialize)]
struct RawClass {
    id: String,
    limits: DynamicsLimits,
    appearances: Vec<WeightedAppearance>,
}

impl TryFrom<RawClass> for ObjectClass {
    type Error = Error;
    fn try_from(r: RawClass) -> Result<Self> {
        ObjectClass::new(r.id, r.limits, r.appearances)
    }
}

impl From<ObjectClass> for RawClass {
    fn from(c: ObjectClass) -> Self {
        RawClass {
            id: c.id,
            limits: c.limits,
            appearances: c.appearances,
        }
    }
}

impl ObjectClass {
    pub fn new(
        id: impl Into<String>,
        limits: DynamicsLimits,
        appearances: Vec<WeightedAppearance>,
    ) -> Result<Self> {
        limits.validate()?;
        if appearances.is_empty() {
            return Err(Error::Invalid("class needs at least one appearance".into()));
        }
        for a in &appearances {
            a.appearance.validate()?;
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::Invalid("appearance weights must be positive".into()));
            }
        }
        let length = appearances
            .iter()
            .map(|a| a.appearance.length_m)
            .fold(0.0, f64::max);
        let width = appearances
            .iter()
            .map(|a| a.appearance.width_m)
            .fold(0.0, f64::max);
        Ok(ObjectClass {
            id: id.into(),
            limits,
            footprint: Footprint::rectangle(length, width)?,
            appearances,
        })
    }

    /// Draws an appearance index proportionally to the (normalized) weights.
    pub fn sample_appearance<R: Rng>(&self, rng: &mut R) -> usize {
        let total: f64 = self.appearances.iter().map(|a| a.weight).sum();
        let mut u = rng.random::<f64>() * total;
        for (i, a) in self.appearances.iter().enumerate() {
            if u < a.weight {
                return i;
            }
            u -= a.weight;
        }
        self.appearances.len() - 1
    }
}

/// One convex world-frame region with a half-open heading interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRegion {
    pub polygon: Footprint,
    pub heading_lo_rad: f64,
    pub heading_hi_rad: f64,
}

impl PriorRegion {
    pub fn contains(&self, q: &Pose2) -> bool {
        let th = normalize_angle(q.theta);
        self.heading_lo_rad <= th
            && th < self.heading_hi_rad
            && self.polygon.contains_point([q.x, q.y])
    }

    pub fn is_subset_of(&self, other: &PriorRegion) -> bool {
        other.polygon.contains(&self.polygon)
            && other.heading_lo_rad <= self.heading_lo_rad
            && self.heading_hi_rad <= other.heading_hi_rad
    }
}

/// World-frame configurations a class may occupy.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Prior {
    pub regions: Vec<PriorRegion>,
}

impl Prior {
    pub fn empty() -> Self {
        Prior {
            regions: Vec::new(),
        }
    }

    /// Single region with unrestricted heading.
    pub fn full(polygon: Footprint) -> Self {
        Prior {
            regions: vec![PriorRegion {
                polygon,
                heading_lo_rad: -PI,
                heading_hi_rad: PI,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.regions {
            if !(r.heading_lo_rad >= -PI
                && r.heading_hi_rad <= PI
                && r.heading_lo_rad < r.heading_hi_rad)
            {
                return Err(Error::Invalid(
                    "prior heading interval must lie within [-π, π)".into(),
                ));
            }
        }
        Ok(())
    }

    /// Region-wise inclusion: every region of `self` sits inside a region of `other`.
    pub fn is_subset_of(&self, other: &Prior) -> bool {
        self.regions
            .iter()
            .all(|r| other.regions.iter().any(|o| r.is_subset_of(o)))
    }
}

pub fn in_prior(prior: &Prior, q: &Pose2) -> bool {
    prior.regions.iter().any(|r| r.contains(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Light {
    Day,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Dry,
    Rain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnvCondition {
    pub light: Light,
    pub weather: Weather,
}

impl EnvCondition {
    pub const DAY_DRY: EnvCondition = EnvCondition {
        light: Light::Day,
        weather: Weather::Dry,
    };

    pub fn code(&self) -> u64 {
        (self.light as u64) * 2 + self.weather as u64
    }

    pub fn tokens(&self) -> (&'static str, &'static str) {
        let l = match self.light {
            Light::Day => "day",
            Light::Night => "night",
        };
        let w = match self.weather {
            Weather::Dry => "dry",
            Weather::Rain => "rain",
        };
        (l, w)
    }

    pub fn parse(light: &str, weather: &str) -> Result<Self> {
        let light = match light {
            "day" => Light::Day,
            "night" => Light::Night,
            o => return Err(Error::Invalid(format!("unknown light token `{o}`"))),
        };
        let weather = match weather {
            "dry" => Weather::Dry,
            "rain" => Weather::Rain,
            o => return Err(Error::Invalid(format!("unknown weather token `{o}`"))),
        };
        Ok(EnvCondition { light, weather })
    }
}

impl fmt::Display for EnvCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, w) = self.tokens();
        write!(f, "{l}/{w}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    /// Static convex obstacles in world coordinates.
    #[serde(default)]
    pub obstacles: Vec<Footprint>,
}

impl Workspace {
    pub fn contains_point(&self, p: Point) -> bool {
        p[0] >= self.x_min_m && p[0] <= self.x_max_m && p[1] >= self.y_min_m && p[1] <= self.y_max_m
    }

    pub fn polygon(&self) -> Result<Footprint> {
        Footprint::aabb(self.x_min_m, self.x_max_m, self.y_min_m, self.y_max_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub duration_s: f64,
    #[serde(flatten)]
    pub control: Control,
}

/// Scripted (open-loop) object in a scenario instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedObject {
    pub class_id: String,
    pub appearance_index: usize,
    pub pose: Pose2,
    pub speed_mps: f64,
    #[serde(default)]
    pub controls: Vec<ControlSegment>,
}

/// Time resolution used to roll scripted objects forward.
pub const OBJECT_DT: f64 = 0.05;

impl ScriptedObject {
    fn control_at(&self, t: f64) -> Control {
        let mut acc = 0.0;
        for seg in &self.controls {
            acc += seg.duration_s;
            if t < acc {
                return seg.control;
            }
        }
        Control::ZERO
    }

    /// Samples the open-loop trajectory every [`OBJECT_DT`] up to `t_end`.
    pub fn rollout(&self, limits: &DynamicsLimits, t_end: f64) -> Vec<Pose2> {
        let n = (t_end / OBJECT_DT).ceil() as usize + 1;
        let mut out = Vec::with_capacity(n + 1);
        let (mut pose, mut v) = (self.pose, self.speed_mps.min(limits.v_max));
        out.push(pose);
        for k in 0..n {
            let u = self.control_at(k as f64 * OBJECT_DT);
            (pose, v) = integrate(limits, &pose, v, &u, OBJECT_DT);
            out.push(pose);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInstance {
    pub id: String,
    pub workspace: Workspace,
    pub start: Pose2,
    /// Convex goal polygon in world coordinates.
    pub goal: Footprint,
    pub env: EnvCondition,
    #[serde(default)]
    pub objects: Vec<ScriptedObject>,
    #[serde(default)]
    pub priors: BTreeMap<String, Prior>,
    pub nominal_speed_mps: f64,
}

impl ScenarioInstance {
    pub fn validate(&self, classes: &[ObjectClass]) -> Result<()> {
        if !self.start.is_finite() {
            return Err(Error::Invalid(format!("{}: non-finite start", self.id)));
        }
        if self
            .workspace
            .obstacles
            .iter()
            .any(|o| o.contains_point([self.start.x, self.start.y]))
        {
            return Err(Error::Invalid(format!(
                "{}: start inside an obstacle",
                self.id
            )));
        }
        if !self
            .goal
            .vertices()
            .iter()
            .all(|&p| self.workspace.contains_point(p))
        {
            return Err(Error::Invalid(format!(
                "{}: goal outside workspace",
                self.id
            )));
        }
        for p in self.priors.values() {
            p.validate()?;
        }
        for o in &self.objects {
            let class = classes
                .iter()
                .find(|c| c.id == o.class_id)
                .ok_or_else(|| Error::UnresolvedReferences(vec![o.class_id.clone()]))?;
            if o.appearance_index >= class.appearances.len() {
                return Err(Error::Invalid(format!(
                    "{}: appearance index out of range",
                    self.id
                )));
            }
            let prior = self.priors.get(&o.class_id).cloned().unwrap_or_default();
            if !in_prior(&prior, &o.pose) {
                return Err(Error::Invalid(format!(
                    "{}: object of class {} starts outside its prior",
                    self.id, o.class_id
                )));
            }
            for seg in &o.controls {
                check_control(&class.limits, &seg.control)?;
            }
        }
        Ok(())
    }
}

/// An ordered set of scenario instances keyed by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Task {
    pub instances: Vec<ScenarioInstance>,
}

impl Task {
    pub fn new(mut instances: Vec<ScenarioInstance>) -> Result<Self> {
        instances.sort_by(|a, b| a.id.cmp(&b.id));
        if instances.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::Invalid(
                "duplicate scenario instance ids in task".into(),
            ));
        }
        Ok(Task { instances })
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.instances.iter().map(|i| i.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&ScenarioInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Sub-task containing the given ids (unknown ids are ignored).
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Task {
        Task {
            instances: self
                .instances
                .iter()
                .filter(|i| ids.iter().any(|s| s.as_ref() == i.id))
                .cloned()
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Task) -> bool {
        self.instances.iter().all(|i| other.get(&i.id).is_some())
    }
}

/// Parameters of the random open-loop behaviour given to sampled objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpec {
    pub segments: usize,
    pub segment_duration_s: f64,
    /// Fraction of the class curvature bound used for sampled turns.
    pub curvature_fraction: f64,
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        BehaviorSpec {
            segments: 4,
            segment_duration_s: 3.0,
            curvature_fraction: 0.1,
        }
    }
}

/// Distributional description of a scenario; instances are drawn from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub workspace: Workspace,
    pub start: Pose2,
    pub goal: Footprint,
    pub env: EnvCondition,
    pub nominal_speed_mps: f64,
    #[serde(default)]
    pub priors: BTreeMap<String, Prior>,
    /// Poisson rate of objects per class.
    #[serde(default)]
    pub lambdas: BTreeMap<String, f64>,
    #[serde(default)]
    pub behavior: BehaviorSpec,
}

fn sample_into_prior<R: Rng>(prior: &Prior, rng: &mut R) -> Option<Pose2> {
    let areas: Vec<f64> = prior.regions.iter().map(|r| r.polygon.area()).collect();
    let total: f64 = areas.iter().sum();
    if prior.regions.is_empty() || !(total > 0.0) {
        return None;
    }
    for _ in 0..PRIOR_SAMPLING_ATTEMPTS {
        let mut u = rng.random::<f64>() * total;
        let mut idx = areas.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if u < *a {
                idx = i;
                break;
            }
            u -= a;
        }
        let region = &prior.regions[idx];
        let (lo, hi) = bounds_of(region.polygon.vertices());
        let x = lo[0] + rng.random::<f64>() * (hi[0] - lo[0]);
        let y = lo[1] + rng.random::<f64>() * (hi[1] - lo[1]);
        let th = region.heading_lo_rad
            + rng.random::<f64>() * (region.heading_hi_rad - region.heading_lo_rad);
        let q = Pose2::new(x, y, th);
        if polygon_contains(region.polygon.vertices(), [x, y]) && in_prior(prior, &q) {
            return Some(q);
        }
    }
    None
}

/// Draws a concrete instance; deterministic for a fixed `(spec, seed)`.
pub fn sample_instance(
    spec: &ScenarioSpec,
    classes: &[ObjectClass],
    seed: u64,
) -> Result<ScenarioInstance> {
    let mut rng = keyed_rng(&[fnv1a64(spec.id.as_bytes()), seed]);
    let mut objects = Vec::new();
    for (class_id, &lambda) in &spec.lambdas {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InfeasibleScenario(format!(
                "bad Poisson rate {lambda} for {class_id}"
            )));
        }
        let class = classes
            .iter()
            .find(|c| &c.id == class_id)
            .ok_or_else(|| Error::UnresolvedReferences(vec![class_id.clone()]))?;
        let count = if lambda == 0.0 {
            0
        } else {
            Poisson::new(lambda)
                .map_err(|e| Error::InfeasibleScenario(e.to_string()))?
                .sample(&mut rng) as usize
        };
        if count == 0 {
            continue;
        }
        let prior = spec
            .priors
            .get(class_id)
            .ok_or_else(|| Error::InfeasibleScenario(format!("class {class_id} has no prior")))?;
        for _ in 0..count {
            let pose = sample_into_prior(prior, &mut rng).ok_or_else(|| {
                Error::InfeasibleScenario(format!(
                    "could not place {class_id} into its prior within {PRIOR_SAMPLING_ATTEMPTS} attempts"
                ))
            })?;
            let appearance_index = class.sample_appearance(&mut rng);
            let speed_mps = rng.random::<f64>() * class.limits.v_max;
            let kappa = if class.limits.max_curvature().is_finite() {
                class.limits.max_curvature()
            } else {
                1.0
            } * spec.behavior.curvature_fraction;
            let controls = (0..spec.behavior.segments)
                .map(|_| ControlSegment {
                    duration_s: spec.behavior.segment_duration_s,
                    control: Control {
                        accel: -class.limits.d_max
                            + rng.random::<f64>() * (class.limits.a_max + class.limits.d_max),
                        curvature: if kappa > 0.0 {
                            (rng.random::<f64>() * 2.0 - 1.0) * kappa
                        } else {
                            0.0
                        },
                    },
                })
                .collect();
            objects.push(ScriptedObject {
                class_id: class_id.clone(),
                appearance_index,
                pose,
                speed_mps,
                controls,
            });
        }
    }
    let instance = ScenarioInstance {
        id: format!("{}#{}", spec.id, seed),
        workspace: spec.workspace.clone(),
        start: spec.start,
        goal: spec.goal.clone(),
        env: spec.env,
        objects,
        priors: spec.priors.clone(),
        nominal_speed_mps: spec.nominal_speed_mps,
    };
    instance.validate(classes)?;
    Ok(instance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededScenario {
    #[serde(flatten)]
    pub spec: ScenarioSpec,
    pub seeds: Vec<u64>,
}

/// On-disk task description: classes plus sampled and/or explicit instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub schema_version: u32,
    pub classes: Vec<ObjectClass>,
    #[serde(default)]
    pub scenarios: Vec<SeededScenario>,
    #[serde(default)]
    pub instances: Vec<ScenarioInstance>,
}

impl TaskFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v
            .get("schema_version")
            .and_then(|s| s.as_u64())
            .unwrap_or(0) as u32;
        if found != TASK_SCHEMA_VERSION {
            return Err(Error::Schema {
                found,
                expected: TASK_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Samples every seeded scenario and merges the explicit instances.
    pub fn build_task(&self) -> Result<Task> {
        let mut instances = self.instances.clone();
        for s in &self.scenarios {
            for &seed in &s.seeds {
                instances.push(sample_instance(&s.spec, &self.classes, seed)?);
            }
        }
        for i in &instances {
            i.validate(&self.classes)?;
        }
        Task::new(instances)
    }
}
