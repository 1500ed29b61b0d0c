//! Perception pipelines, the FNR/FPR interval model, 2.5D self-occlusion ray
//! casting and the coverage of a mounted pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, polygon_contains, Cell, CellSet, Point, PolarGridSpec, Pose2};
use crate::percreq::ReqKey;
use crate::planner::RobotBody;
use crate::util::sha256_hex;
use crate::world::{Appearance, EnvCondition, Light, ObjectClass, Weather};

/// Two-sided 95% normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Lidar,
    Camera,
}

/// Logistic coefficients over the ppp features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticCoeffs {
    pub bias: f64,
    /// per metre of radial distance
    pub distance: f64,
    /// per radian of |relative bearing|
    pub bearing: f64,
    pub visible_fraction: f64,
    /// per unit of ln(1 + hit count)
    pub hits: f64,
    pub night: f64,
    pub rain: f64,
    /// per metre of cube-root target volume
    pub size: f64,
}

impl LogisticCoeffs {
    pub fn is_finite(&self) -> bool {
        [
            self.bias,
            self.distance,
            self.bearing,
            self.visible_fraction,
            self.hits,
            self.night,
            self.rain,
            self.size,
        ]
        .iter()
        .all(|c| c.is_finite())
    }

    pub fn eval(&self, x: &Features) -> f64 {
        self.bias
            + self.distance * x.distance
            + self.bearing * x.bearing
            + self.visible_fraction * x.visible_fraction
            + self.hits * x.log_hits
            + self.night * x.night
            + self.rain * x.rain
            + self.size * x.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfCalib {
    pub fnr: LogisticCoeffs,
    pub fpr: LogisticCoeffs,
    /// Effective sample size of the Wilson interval; `null` means exact
    /// (zero-width) intervals.
    pub pseudo_count: Option<f64>,
}

impl PerfCalib {
    pub fn validate(&self) -> Result<()> {
        if !self.fnr.is_finite() || !self.fpr.is_finite() {
            return Err(Error::Invalid(
                "calibration coefficients must be finite".into(),
            ));
        }
        if let Some(n) = self.pseudo_count {
            if !(n > 0.0) {
                return Err(Error::Invalid("pseudo_count must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionPipeline {
    pub id: String,
    pub sensor_kind: SensorKind,
    pub fov_h_rad: f64,
    pub fov_v_rad: f64,
    pub range_max_m: f64,
    /// Azimuth × elevation channels (lidar beams or down-sampled pixels).
    pub resolution: [usize; 2],
    pub price_chf: f64,
    pub mass_kg: f64,
    pub power_w: f64,
    pub detector_gflops: f64,
    pub calib: PerfCalib,
}

impl PerceptionPipeline {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fov_h_rad > 0.0
            && self.fov_h_rad <= 2.0 * PI + 1e-12
            && self.fov_v_rad > 0.0
            && self.fov_v_rad < PI
            && self.range_max_m > 0.0
            && self.resolution[0] > 0
            && self.resolution[1] > 0
            && self.price_chf >= 0.0
            && self.mass_kg >= 0.0
            && self.power_w >= 0.0
            && self.detector_gflops >= 0.0;
        if !ok {
            return Err(Error::Invalid(format!(
                "pipeline {}: bad parameters",
                self.id
            )));
        }
        self.calib.validate()
    }
}

/// A pipeline fixed at a mount point of a body with a yaw/pitch choice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MountedPipeline {
    pub pipeline: String,
    pub body: String,
    pub mount: String,
    /// Yaw and pitch in millidegrees so the type stays hashable and exact.
    pub yaw_mdeg: i64,
    pub pitch_mdeg: i64,
}

impl MountedPipeline {
    pub fn new(pipeline: &str, body: &str, mount: &str, yaw_rad: f64, pitch_rad: f64) -> Self {
        MountedPipeline {
            pipeline: pipeline.into(),
            body: body.into(),
            mount: mount.into(),
            yaw_mdeg: (yaw_rad.to_degrees() * 1000.0).round() as i64,
            pitch_mdeg: (pitch_rad.to_degrees() * 1000.0).round() as i64,
        }
    }

    pub fn yaw_rad(&self) -> f64 {
        (self.yaw_mdeg as f64 / 1000.0).to_radians()
    }

    pub fn pitch_rad(&self) -> f64 {
        (self.pitch_mdeg as f64 / 1000.0).to_radians()
    }

    pub fn id(&self) -> String {
        format!(
            "{}@{}:{}:{}:{}",
            self.pipeline,
            self.body,
            self.mount,
            self.yaw_mdeg as f64 / 1000.0,
            self.pitch_mdeg as f64 / 1000.0
        )
    }

    pub fn sensor_pose(&self, body: &RobotBody) -> Result<SensorPose> {
        if body.id != self.body {
            return Err(Error::Invalid(format!(
                "{} is not mounted on body {}",
                self.id(),
                body.id
            )));
        }
        let m = body.mount(&self.mount).ok_or_else(|| {
            Error::UnresolvedReferences(vec![format!("{}:{}", body.id, self.mount)])
        })?;
        Ok(SensorPose {
            position: m.position_m,
            yaw: self.yaw_rad(),
            pitch: self.pitch_rad(),
        })
    }
}

/// Sensor origin in the body frame with its boresight yaw and pitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
}

impl SensorPose {
    pub fn planar(&self) -> Pose2 {
        Pose2::new(self.position[0], self.position[1], self.yaw)
    }
}

/// Upright box target standing on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetBox {
    pub pose: Pose2,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl TargetBox {
    pub fn of(appearance: &Appearance, pose: Pose2) -> Self {
        TargetBox {
            pose,
            length: appearance.length_m,
            width: appearance.width_m,
            height: appearance.height_m,
        }
    }

    pub fn polygon(&self) -> Vec<Point> {
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]]
            .iter()
            .map(|&p| self.pose.transform_point(p))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub hit_count: u32,
    pub visible_fraction: f64,
    pub in_fov: bool,
}

/// Entry/exit parameters of a ray against a vertical convex prism
/// `poly × [0, height]` (Cyrus–Beck clipping). `None` if the ray misses.
pub fn ray_prism(
    origin: [f64; 3],
    dir: [f64; 3],
    poly: &[Point],
    height: f64,
) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    if dir[2].abs() < 1e-15 {
        if origin[2] < 0.0 || origin[2] > height {
            return None;
        }
    } else {
        let (a, b) = ((0.0 - origin[2]) / dir[2], (height - origin[2]) / dir[2]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        // outward normal of a counter-clockwise edge
        let nx = q[1] - p[1];
        let ny = p[0] - q[0];
        let num = nx * (origin[0] - p[0]) + ny * (origin[1] - p[1]);
        let den = nx * dir[0] + ny * dir[1];
        if den.abs() < 1e-15 {
            if num > 0.0 {
                return None;
            }
        } else {
            let t = -num / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

fn channel_angle(i: usize, n: usize, fov: f64) -> f64 {
    -fov / 2.0 + (i as f64 + 0.5) * fov / n as f64
}

fn channels_in(lo: f64, hi: f64, n: usize, fov: f64, wrap: bool) -> Vec<usize> {
    let step = fov / n as f64;
    let mut out = BTreeSet::new();
    let shifts: &[f64] = if wrap {
        &[-2.0 * PI, 0.0, 2.0 * PI]
    } else {
        &[0.0]
    };
    for s in shifts {
        let a = ((lo + s + fov / 2.0) / step - 0.5).ceil().max(0.0);
        let b = ((hi + s + fov / 2.0) / step - 0.5)
            .floor()
            .min(n as f64 - 1.0);
        if a <= b {
            for i in a as usize..=b as usize {
                out.insert(i);
            }
        }
    }
    out.into_iter().collect()
}

fn distance_to_polygon(poly: &[Point], p: Point) -> f64 {
    if polygon_contains(poly, p) {
        return 0.0;
    }
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let t =
                (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Body prisms in the body frame, each as (polygon, height).
fn body_prisms(body: &RobotBody) -> Vec<(Vec<Point>, f64)> {
    body.height_profile
        .iter()
        .map(|e| (e.footprint.vertices().to_vec(), e.height_m))
        .collect()
}

/// Casts the sensor's rays at an upright box. Only channels whose direction
/// can reach the box are traced; every other ray misses it by construction.
pub fn cast_rays(
    sensor: &SensorPose,
    pipeline: &PerceptionPipeline,
    body: &RobotBody,
    target: &TargetBox,
) -> VisibilityReport {
    cast_rays_with(sensor, pipeline, &body_prisms(body), target)
}

fn cast_rays_with(
    sensor: &SensorPose,
    pipeline: &PerceptionPipeline,
    prisms: &[(Vec<Point>, f64)],
    target: &TargetBox,
) -> VisibilityReport {
    let o = sensor.position;
    let rel = sensor.planar().relative(&target.pose);
    let in_fov = rel.y.atan2(rel.x).abs() <= pipeline.fov_h_rad / 2.0 + 1e-12
        && rel.range() <= pipeline.range_max_m;
    let poly = target.polygon();
    let origin2 = [o[0], o[1]];
    let full_wrap = pipeline.fov_h_rad >= 2.0 * PI - 1e-12;
    let [n_az, n_el] = pipeline.resolution;
    let az_channels = if polygon_contains(&poly, origin2) {
        (0..n_az).collect()
    } else {
        let c = (target.pose.y - o[1]).atan2(target.pose.x - o[0]);
        let rels: Vec<f64> = poly
            .iter()
            .map(|p| normalize_angle((p[1] - o[1]).atan2(p[0] - o[0]) - c))
            .collect();
        let lo = rels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let base = normalize_angle(c - sensor.yaw);
        channels_in(
            base + lo - 1e-9,
            base + hi + 1e-9,
            n_az,
            pipeline.fov_h_rad,
            full_wrap,
        )
    };
    let d_min = distance_to_polygon(&poly, origin2);
    let d_max = poly
        .iter()
        .map(|p| (p[0] - o[0]).hypot(p[1] - o[1]))
        .fold(0.0, f64::max);
    let el_hi = (target.height - o[2]).atan2(if target.height > o[2] { d_min } else { d_max });
    let el_lo = (0.0 - o[2]).atan2(if o[2] > 0.0 { d_min } else { d_max });
    let el_channels = channels_in(
        el_lo - sensor.pitch - 1e-9,
        el_hi - sensor.pitch + 1e-9,
        n_el,
        pipeline.fov_v_rad,
        false,
    );
    let (mut reach, mut hits) = (0u32, 0u32);
    for &i in &az_channels {
        let az = sensor.yaw + channel_angle(i, n_az, pipeline.fov_h_rad);
        let (sa, ca) = az.sin_cos();
        for &j in &el_channels {
            let el = sensor.pitch + channel_angle(j, n_el, pipeline.fov_v_rad);
            let (se, ce) = el.sin_cos();
            let dir = [ce * ca, ce * sa, se];
            let Some((t_in, _)) = ray_prism(o, dir, &poly, target.height) else {
                continue;
            };
            if t_in > pipeline.range_max_m {
                continue;
            }
            reach += 1;
            let blocked = prisms.iter().any(|(bp, h)| {
                ray_prism(o, dir, bp, *h).is_some_and(|(b_in, b_out)| b_out > 1e-9 && b_in < t_in)
            });
            if !blocked {
                hits += 1;
            }
        }
    }
    VisibilityReport {
        hit_count: hits,
        visible_fraction: if reach > 0 {
            hits as f64 / reach as f64
        } else {
            0.0
        },
        in_fov,
    }
}

/// ppp feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub distance: f64,
    pub bearing: f64,
    pub visible_fraction: f64,
    pub log_hits: f64,
    pub night: f64,
    pub rain: f64,
    pub size: f64,
}

impl Features {
    pub fn new(
        q_sensor: &Pose2,
        appearance: &Appearance,
        env: EnvCondition,
        vis: &VisibilityReport,
    ) -> Self {
        Features {
            distance: q_sensor.range(),
            bearing: q_sensor.y.atan2(q_sensor.x).abs(),
            visible_fraction: vis.visible_fraction,
            log_hits: (vis.hit_count as f64).ln_1p(),
            night: if env.light == Light::Night { 1.0 } else { 0.0 },
            rain: if env.weather == Weather::Rain {
                1.0
            } else {
                0.0
            },
            size: (appearance.length_m * appearance.width_m * appearance.height_m).cbrt(),
        }
    }
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// 95% Wilson score interval around `p` with `n` effective samples.
pub fn wilson(p: f64, n: Option<f64>) -> [f64; 2] {
    let Some(n) = n.filter(|n| n.is_finite()) else {
        return [p, p];
    };
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // centre² − half² = p² / denom, which avoids cancellation near 0 and 1
    let lo = (p * p / (denom * (centre + half))).clamp(0.0, 1.0);
    let hi = if p <= 0.5 {
        (centre + half).clamp(0.0, 1.0)
    } else {
        let q = 1.0 - p;
        let centre_q = (q + z2 / (2.0 * n)) / denom;
        (1.0 - q * q / (denom * (centre_q + half))).clamp(0.0, 1.0)
    };
    [lo.min(p), hi.max(p)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfInterval {
    pub fnr: [f64; 2],
    pub fpr: [f64; 2],
}

/// FNR / FPR confidence intervals for a target at `q_sensor` (sensor frame).
pub fn ppp(
    q_sensor: &Pose2,
    appearance: &Appearance,
    pipeline: &PerceptionPipeline,
    env: EnvCondition,
    vis: &VisibilityReport,
) -> PerfInterval {
    if !vis.in_fov || vis.hit_count == 0 {
        return PerfInterval {
            fnr: [1.0, 1.0],
            fpr: [0.0, 0.0],
        };
    }
    let x = Features::new(q_sensor, appearance, env, vis);
    let c = &pipeline.calib;
    PerfInterval {
        fnr: wilson(logistic(c.fnr.eval(&x)), c.pseudo_count),
        fpr: wilson(logistic(c.fpr.eval(&x)), c.pseudo_count),
    }
}

/// The ten representative target poses of a cell: centre and four corners,
/// each at both ends of the θ-interval.
pub fn coverage_representatives(grid: &PolarGridSpec, cell: &Cell) -> Vec<Pose2> {
    let (lo, hi) = grid.theta_interval(cell.theta());
    let mut out = Vec::with_capacity(10);
    for corner in crate::geom::Corner::ALL {
        let [x, y] = grid.cell_point(cell, corner);
        for th in [lo, hi] {
            out.push(Pose2 { x, y, theta: th });
        }
    }
    out
}

/// Cells whose every representative is detected with both upper bounds
/// strictly below `epsilon`, for each requested environment.
fn mppcc_envs(
    appearance: &Appearance,
    sensor: &SensorPose,
    pipeline: &PerceptionPipeline,
    prisms: &[(Vec<Point>, f64)],
    envs: &[EnvCondition],
    epsilon: f64,
    grid: &PolarGridSpec,
) -> Vec<BTreeSet<Cell>> {
    if !(epsilon > 0.0) || envs.is_empty() {
        return vec![BTreeSet::new(); envs.len()];
    }
    let planar = sensor.planar();
    let per_cell: Vec<(Cell, Vec<bool>)> = grid
        .cells()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|cell| {
            let mut ok = vec![true; envs.len()];
            for rep in coverage_representatives(grid, &cell) {
                let target = TargetBox::of(appearance, rep);
                let q = planar.relative(&rep);
                let vis = cast_rays_with(sensor, pipeline, prisms, &target);
                for (k, env) in envs.iter().enumerate() {
                    if ok[k] {
                        let iv = ppp(&q, appearance, pipeline, *env, &vis);
                        ok[k] = iv.fnr[1] < epsilon && iv.fpr[1] < epsilon;
                    }
                }
                if ok.iter().all(|b| !b) {
                    break;
                }
            }
            (cell, ok)
        })
        .collect();
    (0..envs.len())
        .map(|k| {
            per_cell
                .iter()
                .filter(|(_, ok)| ok[k])
                .map(|(c, _)| *c)
                .collect()
        })
        .collect()
}

/// Coverage of one appearance of a class by a mounted pipeline.
pub fn mppcc(
    appearance: &Appearance,
    mpp: &MountedPipeline,
    pipeline: &PerceptionPipeline,
    body: &RobotBody,
    env: EnvCondition,
    epsilon: f64,
    grid: &PolarGridSpec,
) -> Result<CellSet> {
    let sensor = mpp.sensor_pose(body)?;
    let cells = mppcc_envs(
        appearance,
        &sensor,
        pipeline,
        &body_prisms(body),
        &[env],
        epsilon,
        grid,
    );
    CellSet::from_cells(grid, cells.into_iter().next().unwrap_or_default())
}

/// Coverage of a mounted pipeline per (class, env). A class counts as covered
/// in a cell only if every one of its appearances is.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSet {
    pub mpp: MountedPipeline,
    pub epsilon: f64,
    pub entries: BTreeMap<ReqKey, CellSet>,
}

impl CoverageSet {
    pub fn get(&self, class_id: &str, env: EnvCondition) -> Option<&CellSet> {
        self.entries.get(&ReqKey {
            class_id: class_id.to_string(),
            env,
        })
    }

    pub fn covers(&self, key: &ReqKey, cell: &Cell) -> bool {
        self.entries.get(key).is_some_and(|s| s.contains(cell))
    }

    pub fn to_file(&self) -> CoverageFile {
        let grid = self.entries.values().next().map(|s| s.grid.clone());
        CoverageFile {
            mpp: self.mpp.clone(),
            epsilon: self.epsilon,
            grid,
            entries: self
                .entries
                .iter()
                .map(|(k, s)| {
                    let (light, weather) = k.env.tokens();
                    CoverageEntry {
                        class: k.class_id.clone(),
                        light: light.into(),
                        weather: weather.into(),
                        cells: s.cells.iter().map(|c| [c.0, c.1, c.2]).collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_file(f: &CoverageFile, grid: &PolarGridSpec) -> Result<Self> {
        if f.grid.as_ref().is_some_and(|g| g != grid) {
            return Err(Error::GridMismatch);
        }
        let mut entries = BTreeMap::new();
        for e in &f.entries {
            let key = ReqKey {
                class_id: e.class.clone(),
                env: EnvCondition::parse(&e.light, &e.weather)?,
            };
            entries.insert(
                key,
                CellSet::from_cells(grid, e.cells.iter().map(|c| Cell(c[0], c[1], c[2])))?,
            );
        }
        Ok(CoverageSet {
            mpp: f.mpp.clone(),
            epsilon: f.epsilon,
            entries,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageFile {
    pub mpp: MountedPipeline,
    pub epsilon: f64,
    pub grid: Option<PolarGridSpec>,
    pub entries: Vec<CoverageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub class: String,
    pub light: String,
    pub weather: String,
    pub cells: Vec<[u16; 3]>,
}

pub fn coverage(
    mpp: &MountedPipeline,
    pipeline: &PerceptionPipeline,
    body: &RobotBody,
    classes: &[ObjectClass],
    envs: &[EnvCondition],
    epsilon: f64,
    grid: &PolarGridSpec,
) -> Result<CoverageSet> {
    let sensor = mpp.sensor_pose(body)?;
    let prisms = body_prisms(body);
    let mut entries = BTreeMap::new();
    for class in classes {
        let mut acc: Option<Vec<BTreeSet<Cell>>> = None;
        for wa in &class.appearances {
            let sets = mppcc_envs(
                &wa.appearance,
                &sensor,
                pipeline,
                &prisms,
                envs,
                epsilon,
                grid,
            );
            acc = Some(match acc {
                None => sets,
                Some(prev) => prev
                    .iter()
                    .zip(&sets)
                    .map(|(a, b)| a.intersection(b).copied().collect())
                    .collect(),
            });
        }
        for (env, cells) in envs.iter().zip(acc.unwrap_or_default()) {
            entries.insert(
                ReqKey {
                    class_id: class.id.clone(),
                    env: *env,
                },
                CellSet::from_cells(grid, cells)?,
            );
        }
    }
    Ok(CoverageSet {
        mpp: mpp.clone(),
        epsilon,
        entries,
    })
}

/// Content key of a coverage computation; any input change changes the key.
pub fn coverage_cache_key(
    mpp: &MountedPipeline,
    pipeline: &PerceptionPipeline,
    body: &RobotBody,
    class: &ObjectClass,
    env: EnvCondition,
    epsilon: f64,
    grid: &PolarGridSpec,
) -> Result<String> {
    let blob = serde_json::to_string(&(
        "coverage/v1",
        mpp,
        pipeline,
        (&body.id, &body.height_profile, &body.mount_points),
        class,
        env,
        epsilon.to_bits(),
        grid.fingerprint(),
    ))?;
    Ok(sha256_hex(blob.as_bytes()))
}

/// Reference ray/prism intersection by enumerating prism faces; used to
/// cross-check [`ray_prism`].
pub fn ray_prism_faces(
    origin: [f64; 3],
    dir: [f64; 3],
    poly: &[Point],
    height: f64,
) -> Option<f64> {
    let inside =
        polygon_contains(poly, [origin[0], origin[1]]) && origin[2] >= 0.0 && origin[2] <= height;
    if inside {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t >= 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    for z in [0.0, height] {
        if dir[2].abs() > 1e-15 {
            let t = (z - origin[2]) / dir[2];
            let p = [origin[0] + t * dir[0], origin[1] + t * dir[1]];
            if polygon_contains(poly, p) {
                consider(t);
            }
        }
    }
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        // solve origin + t·dir = a + s·e (planar), then check z and s
        let den = dir[0] * ey - dir[1] * ex;
        if den.abs() < 1e-15 {
            continue;
        }
        let (wx, wy) = (a[0] - origin[0], a[1] - origin[1]);
        let t = (wx * ey - wy * ex) / den;
        let s = (wx * dir[1] - wy * dir[0]) / den;
        let z = origin[2] + t * dir[2];
        if (-1e-12..=1.0 + 1e-12).contains(&s) && z >= -1e-12 && z <= height + 1e-12 {
            consider(t);
        }
    }
    best
}

#[cfg(test)]
mod tests;
