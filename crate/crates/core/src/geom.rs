//! Planar pose algebra, convex footprints, the log-polar orientation-binned grid
//! and discrete cell sets.
//!
//! Every region that downstream modules reason about (requirements, sensor
//! coverage) is a [`CellSet`] on a shared [`PolarGridSpec`], so containment is
//! exact set inclusion rather than a polygon-clipping tolerance question.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const TWO_PI: f64 = 2.0 * PI;

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = (theta + PI).rem_euclid(TWO_PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if a >= PI {
        a -= TWO_PI;
    }
    if a < -PI {
        a = -PI;
    }
    a
}

/// A rigid transform in SE(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self ∘ other`: `other` expressed in the frame of `self`, mapped out.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Expresses `world` in the frame of `self` (`self⁻¹ ∘ world`).
    pub fn relative(&self, world: &Pose2) -> Pose2 {
        self.inverse().compose(world)
    }

    pub fn transform_point(&self, p: Point) -> Point {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Composition of two poses; `theta` is renormalized into `[-π, π)`.
pub fn se2_compose(a: &Pose2, b: &Pose2) -> Pose2 {
    a.compose(b)
}

pub fn se2_inverse(a: &Pose2) -> Pose2 {
    a.inverse()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// A convex, counter-clockwise polygon in its own body frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Footprint {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Footprint {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        Footprint::new(v)
    }
}

impl From<Footprint> for Vec<Point> {
    fn from(f: Footprint) -> Self {
        f.vertices
    }
}

impl Footprint {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "footprint needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidGeometry("non-finite footprint vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let c = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if c <= 0.0 {
                return Err(Error::InvalidGeometry(
                    "footprint must be strictly convex and counter-clockwise".into(),
                ));
            }
        }
        let f = Footprint { vertices };
        // A star polygon passes the local turn test but winds twice.
        if f.area() <= 0.0 || f.winding_turns() != 1 {
            return Err(Error::InvalidGeometry(
                "footprint is not a simple convex polygon".into(),
            ));
        }
        Ok(f)
    }

    fn winding_turns(&self) -> i32 {
        let n = self.vertices.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let h1 = (b[1] - a[1]).atan2(b[0] - a[0]);
            let h2 = (c[1] - b[1]).atan2(c[0] - b[0]);
            total += normalize_angle(h2 - h1);
        }
        (total / TWO_PI).round() as i32
    }

    /// Axis-aligned rectangle centred on the origin, `length` along x.
    pub fn rectangle(length: f64, width: f64) -> Result<Self> {
        let (hl, hw) = (length / 2.0, width / 2.0);
        Footprint::new(vec![[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    }

    /// Rectangle with explicit x extent `[x_min, x_max]` and y extent `[y_min, y_max]`.
    pub fn aabb(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        Footprint::new(vec![
            [x_min, y_min],
            [x_max, y_min],
            [x_max, y_max],
            [x_min, y_max],
        ])
    }

    /// Regular `n`-gon inscribed in a circle of `radius`.
    pub fn regular(radius: f64, n: usize) -> Result<Self> {
        let v = (0..n)
            .map(|i| {
                let a = TWO_PI * i as f64 / n as f64;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Footprint::new(v)
    }

    /// Convex hull (monotone chain) of an arbitrary point cloud.
    pub fn convex_hull(points: &[Point]) -> Result<Self> {
        let mut pts: Vec<Point> = points.to_vec();
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::InvalidGeometry(
                "hull needs 3 distinct points".into(),
            ));
        }
        let mut lower: Vec<Point> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2
                && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0
            {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<Point> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2
                && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0
            {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Footprint::new(lower)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    /// Distance from the frame origin to the furthest vertex.
    pub fn circumradius(&self) -> f64 {
        self.vertices
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    pub fn transformed(&self, pose: &Pose2) -> Vec<Point> {
        self.vertices
            .iter()
            .map(|&p| pose.transform_point(p))
            .collect()
    }

    /// Boundary-inclusive point containment in the body frame.
    pub fn contains_point(&self, p: Point) -> bool {
        polygon_contains(&self.vertices, p)
    }

    /// True when every vertex of `other` lies inside `self` (both in body frame).
    pub fn contains(&self, other: &Footprint) -> bool {
        other.vertices.iter().all(|&p| self.contains_point(p))
    }

    pub fn bounds(&self) -> (Point, Point) {
        bounds_of(&self.vertices)
    }
}

pub(crate) fn bounds_of(poly: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        lo[0] = lo[0].min(p[0]);
        lo[1] = lo[1].min(p[1]);
        hi[0] = hi[0].max(p[0]);
        hi[1] = hi[1].max(p[1]);
    }
    (lo, hi)
}

/// Boundary-inclusive containment for a convex CCW polygon.
pub fn polygon_contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= -1e-12)
}

fn project(poly: &[Point], axis: Point) -> (f64, f64) {
    poly.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p[0] * axis[0] + p[1] * axis[1];
            (lo.min(d), hi.max(d))
        })
}

/// Smallest projected overlap over all separating-axis candidates. Negative
/// means a separating gap exists, zero means touching.
fn min_axis_overlap(a: &[Point], b: &[Point]) -> f64 {
    let mut min_overlap = f64::INFINITY;
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let (ex, ey) = (q[0] - p[0], q[1] - p[1]);
            let len = ex.hypot(ey);
            let axis = [-ey / len, ex / len];
            let (a_lo, a_hi) = project(a, axis);
            let (b_lo, b_hi) = project(b, axis);
            let overlap = a_hi.min(b_hi) - a_lo.max(b_lo);
            if overlap < min_overlap {
                min_overlap = overlap;
            }
        }
    }
    min_overlap
}

/// Tolerance (m) separating "touching" from "overlapping" for the strict test.
pub const STRICT_OVERLAP_TOL: f64 = 1e-9;

/// Convex polygons in world coordinates intersect, boundary contact included.
pub fn polygons_overlap(a: &[Point], b: &[Point]) -> bool {
    min_axis_overlap(a, b) >= -1e-12
}

/// Convex polygons share interior area (touching does not count).
pub fn polygons_overlap_strict(a: &[Point], b: &[Point]) -> bool {
    min_axis_overlap(a, b) > STRICT_OVERLAP_TOL
}

/// Separating-axis test for two placed footprints; contact counts as overlap.
pub fn footprints_overlap(f1: &Footprint, p1: &Pose2, f2: &Footprint, p2: &Pose2) -> bool {
    let r = f1.circumradius() + f2.circumradius();
    if p1.distance(p2) > r + 1e-9 {
        return false;
    }
    polygons_overlap(&f1.transformed(p1), &f2.transformed(p2))
}

/// Interiors intersect with positive area.
pub fn footprints_overlap_strict(f1: &Footprint, p1: &Pose2, f2: &Footprint, p2: &Pose2) -> bool {
    let r = f1.circumradius() + f2.circumradius();
    if p1.distance(p2) > r {
        return false;
    }
    polygons_overlap_strict(&f1.transformed(p1), &f2.transformed(p2))
}

/// Grid cell index triple `(radial, angular, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub u16, pub u16, pub u16);

impl Cell {
    pub fn radial(&self) -> usize {
        self.0 as usize
    }
    pub fn angular(&self) -> usize {
        self.1 as usize
    }
    pub fn theta(&self) -> usize {
        self.2 as usize
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0, self.1, self.2)
    }
}

/// Log-polar grid around the ego origin with uniform azimuth bins and
/// uniform relative-heading (θ) intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct PolarGridSpec {
    r_min: f64,
    r_max: f64,
    n_radial: usize,
    n_angular: usize,
    n_theta: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    r_min_m: f64,
    r_max_m: f64,
    n_radial: usize,
    n_angular: usize,
    n_theta: usize,
}

impl TryFrom<RawGrid> for PolarGridSpec {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        PolarGridSpec::new(r.r_min_m, r.r_max_m, r.n_radial, r.n_angular, r.n_theta)
    }
}

impl From<PolarGridSpec> for RawGrid {
    fn from(g: PolarGridSpec) -> Self {
        RawGrid {
            r_min_m: g.r_min,
            r_max_m: g.r_max,
            n_radial: g.n_radial,
            n_angular: g.n_angular,
            n_theta: g.n_theta,
        }
    }
}

/// Where a representative sits inside its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    Center,
    LoLo,
    LoHi,
    HiLo,
    HiHi,
}

impl Corner {
    pub const ALL: [Corner; 5] = [
        Corner::Center,
        Corner::LoLo,
        Corner::LoHi,
        Corner::HiLo,
        Corner::HiHi,
    ];
}

impl PolarGridSpec {
    pub fn new(
        r_min: f64,
        r_max: f64,
        n_radial: usize,
        n_angular: usize,
        n_theta: usize,
    ) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < r_min < r_max, got {r_min}, {r_max}"
            )));
        }
        if n_radial == 0 || n_angular == 0 || n_theta == 0 {
            return Err(Error::InvalidGrid("bin counts must be positive".into()));
        }
        if n_radial > u16::MAX as usize
            || n_angular > u16::MAX as usize
            || n_theta > u16::MAX as usize
        {
            return Err(Error::InvalidGrid("bin counts exceed u16 range".into()));
        }
        Ok(PolarGridSpec {
            r_min,
            r_max,
            n_radial,
            n_angular,
            n_theta,
        })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn n_radial(&self) -> usize {
        self.n_radial
    }
    pub fn n_angular(&self) -> usize {
        self.n_angular
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_cells(&self) -> usize {
        self.n_radial * self.n_angular * self.n_theta
    }

    /// `edge_i = r_min · (r_max / r_min)^(i / n_radial)`.
    pub fn radial_edge(&self, i: usize) -> f64 {
        if i == self.n_radial {
            return self.r_max;
        }
        self.r_min * (self.r_max / self.r_min).powf(i as f64 / self.n_radial as f64)
    }

    pub fn angular_edge(&self, j: usize) -> f64 {
        -PI + TWO_PI * j as f64 / self.n_angular as f64
    }

    pub fn theta_edge(&self, k: usize) -> f64 {
        -PI + TWO_PI * k as f64 / self.n_theta as f64
    }

    /// Half-open `[lo, hi)` heading interval of θ-bin `k`.
    pub fn theta_interval(&self, k: usize) -> (f64, f64) {
        (self.theta_edge(k), self.theta_edge(k + 1))
    }

    fn uniform_bin(angle: f64, n: usize) -> usize {
        let a = normalize_angle(angle);
        let idx = ((a + PI) / TWO_PI * n as f64).floor() as isize;
        idx.clamp(0, n as isize - 1) as usize
    }

    pub fn angular_bin(&self, azimuth: f64) -> usize {
        Self::uniform_bin(azimuth, self.n_angular)
    }

    pub fn theta_bin(&self, theta: f64) -> usize {
        Self::uniform_bin(theta, self.n_theta)
    }

    /// Radial bin for `r`, or `None` outside `[r_min, r_max)`.
    pub fn radial_bin(&self, r: f64) -> Option<usize> {
        if !(r >= self.r_min && r < self.r_max) {
            return None;
        }
        let f = (r / self.r_min).ln() / (self.r_max / self.r_min).ln() * self.n_radial as f64;
        let mut i = (f.floor() as usize).min(self.n_radial - 1);
        // Guard the log rounding against the exact edge values.
        if r < self.radial_edge(i) {
            i -= 1;
        } else if i + 1 < self.n_radial && r >= self.radial_edge(i + 1) {
            i += 1;
        }
        Some(i)
    }

    /// Cell containing `q`, absent outside the radial range.
    pub fn cell_of(&self, q: &Pose2) -> Option<Cell> {
        let r = q.range();
        let ri = self.radial_bin(r)?;
        let ai = self.angular_bin(q.y.atan2(q.x));
        let ti = self.theta_bin(q.theta);
        Some(Cell(ri as u16, ai as u16, ti as u16))
    }

    /// Like [`cell_of`](Self::cell_of) but clamps out-of-range radii onto the
    /// innermost / outermost ring so no pose is dropped.
    pub fn cell_of_clamped(&self, q: &Pose2) -> Cell {
        let r = q.range();
        let ri = if r < self.r_min {
            0
        } else {
            self.radial_bin(r).unwrap_or(self.n_radial - 1)
        };
        let az = if r > 0.0 { q.y.atan2(q.x) } else { 0.0 };
        Cell(
            ri as u16,
            self.angular_bin(az) as u16,
            self.theta_bin(q.theta) as u16,
        )
    }

    pub fn contains_cell(&self, c: &Cell) -> bool {
        c.radial() < self.n_radial && c.angular() < self.n_angular && c.theta() < self.n_theta
    }

    /// Planar position of a cell's centre or radial/azimuth corner.
    pub fn cell_point(&self, c: &Cell, corner: Corner) -> Point {
        let (r_lo, r_hi) = (
            self.radial_edge(c.radial()),
            self.radial_edge(c.radial() + 1),
        );
        let (a_lo, a_hi) = (
            self.angular_edge(c.angular()),
            self.angular_edge(c.angular() + 1),
        );
        let (r, a) = match corner {
            Corner::Center => ((r_lo + r_hi) / 2.0, (a_lo + a_hi) / 2.0),
            Corner::LoLo => (r_lo, a_lo),
            Corner::LoHi => (r_lo, a_hi),
            Corner::HiLo => (r_hi, a_lo),
            Corner::HiHi => (r_hi, a_hi),
        };
        [r * a.cos(), r * a.sin()]
    }

    pub fn theta_mid(&self, k: usize) -> f64 {
        let (lo, hi) = self.theta_interval(k);
        (lo + hi) / 2.0
    }

    /// Iterates all cells in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_radial).flat_map(move |r| {
            (0..self.n_angular).flat_map(move |a| {
                (0..self.n_theta).map(move |t| Cell(r as u16, a as u16, t as u16))
            })
        })
    }

    /// Stable fingerprint for cache keys.
    pub fn fingerprint(&self) -> String {
        format!(
            "polar:{:e}:{:e}:{}:{}:{}",
            self.r_min, self.r_max, self.n_radial, self.n_angular, self.n_theta
        )
    }
}

/// A discrete "multipolygon": a set of cells on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub grid: PolarGridSpec,
    pub cells: BTreeSet<Cell>,
}

impl CellSet {
    pub fn empty(grid: &PolarGridSpec) -> Self {
        CellSet {
            grid: grid.clone(),
            cells: BTreeSet::new(),
        }
    }

    pub fn from_cells(grid: &PolarGridSpec, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut s = CellSet::empty(grid);
        for c in cells {
            s.insert(c)?;
        }
        Ok(s)
    }

    pub fn insert(&mut self, c: Cell) -> Result<bool> {
        if !self.grid.contains_cell(&c) {
            return Err(Error::InvalidGrid(format!("cell {c} outside grid")));
        }
        Ok(self.cells.insert(c))
    }

    pub fn contains(&self, c: &Cell) -> bool {
        self.cells.contains(c)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn check_grid(&self, other: &CellSet) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `self ⊆ other`.
    pub fn is_subset(&self, other: &CellSet) -> Result<bool> {
        self.check_grid(other)?;
        Ok(self.cells.is_subset(&other.cells))
    }

    pub fn union_with(&mut self, other: &CellSet) -> Result<()> {
        self.check_grid(other)?;
        self.cells.extend(other.cells.iter().copied());
        Ok(())
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.check_grid(other)?;
        Ok(CellSet {
            grid: self.grid.clone(),
            cells: self.cells.intersection(&other.cells).copied().collect(),
        })
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.check_grid(other)?;
        Ok(CellSet {
            grid: self.grid.clone(),
            cells: self.cells.difference(&other.cells).copied().collect(),
        })
    }
}

pub fn cellset_subset(a: &CellSet, b: &CellSet) -> Result<bool> {
    a.is_subset(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: &Pose2, b: &Pose2, tol: f64) -> bool {
        (a.x - b.x).abs() < tol
            && (a.y - b.y).abs() < tol
            && normalize_angle(a.theta - b.theta).abs() < tol
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::new(0.3, -2.0, 1.0);
        assert_eq!(Pose2::IDENTITY.compose(&p), p);
        let t = Pose2::new(1.0, 0.0, 0.0);
        assert_eq!(t.compose(&t), Pose2::new(2.0, 0.0, 0.0));
        let r = Pose2::new(0.0, 0.0, FRAC_PI_2).compose(&Pose2::new(1.0, 0.0, 0.0));
        assert!(close(&r, &Pose2::new(0.0, 1.0, FRAC_PI_2), 1e-15));
    }

    #[test]
    fn normalize_wraps_into_half_open_range() {
        assert_eq!(normalize_angle(PI), -PI);
        assert_eq!(normalize_angle(-PI), -PI);
        assert!((normalize_angle(3.0 * PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert!(normalize_angle(-1e-18) < PI);
    }

    #[test]
    fn footprint_validation() {
        assert!(Footprint::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        // clockwise
        assert!(Footprint::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err());
        // collinear middle vertex is not strictly convex
        assert!(Footprint::new(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 1.0]]).is_err());
        let sq = Footprint::rectangle(1.0, 1.0).unwrap();
        assert!((sq.area() - 1.0).abs() < 1e-12);
        let hull =
            Footprint::convex_hull(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.2], [1.0, 1.0], [0.0, 1.0]])
                .unwrap();
        assert_eq!(hull.vertices().len(), 4);
    }

    #[test]
    fn overlap_examples() {
        let sq = Footprint::rectangle(1.0, 1.0).unwrap();
        let o = Pose2::IDENTITY;
        assert!(footprints_overlap(&sq, &o, &sq, &o));
        assert!(!footprints_overlap(
            &sq,
            &o,
            &sq,
            &Pose2::new(10.0, 0.0, 0.0)
        ));
        // edge contact counts for the inclusive test only
        let touch = Pose2::new(1.0, 0.0, 0.0);
        assert!(footprints_overlap(&sq, &o, &sq, &touch));
        assert!(!footprints_overlap_strict(&sq, &o, &sq, &touch));
        assert!(footprints_overlap_strict(
            &sq,
            &o,
            &sq,
            &Pose2::new(0.9, 0.0, 0.0)
        ));
        // rotated square: corner reaches in further than the axis-aligned extent
        let rot = Pose2::new(1.2, 0.0, PI / 4.0);
        assert!(footprints_overlap(&sq, &o, &sq, &rot));
    }

    #[test]
    fn cell_of_examples() {
        let g = PolarGridSpec::new(1.0, 100.0, 2, 8, 4).unwrap();
        let c = g.cell_of(&Pose2::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(
            c,
            Cell(0, g.angular_bin(0.0) as u16, g.theta_bin(0.0) as u16)
        );
        assert!(g.cell_of(&Pose2::new(100.0, 0.0, 0.0)).is_none());
        assert!(g.cell_of(&Pose2::new(0.99, 0.0, 0.0)).is_none());
        assert_eq!(g.cell_of(&Pose2::new(9.99, 0.0, 0.0)).unwrap().0, 0);
        assert_eq!(g.cell_of(&Pose2::new(10.01, 0.0, 0.0)).unwrap().0, 1);
        assert!((g.radial_edge(1) - 10.0).abs() < 1e-12);
        assert_eq!(g.cell_of(&Pose2::new(10.0, 0.0, 0.0)).unwrap().0, 1);
        // θ = -π sits in the first interval
        assert_eq!(g.theta_bin(-PI), 0);
        assert_eq!(g.cell_of_clamped(&Pose2::new(0.2, 0.0, 0.0)).0, 0);
        assert_eq!(g.cell_of_clamped(&Pose2::new(500.0, 0.0, 0.0)).0, 1);
    }

    #[test]
    fn cellset_subset_examples() {
        let g = PolarGridSpec::new(1.0, 10.0, 3, 4, 2).unwrap();
        let (c1, c2, c3) = (Cell(0, 0, 0), Cell(1, 2, 1), Cell(2, 3, 0));
        let empty = CellSet::empty(&g);
        let a = CellSet::from_cells(&g, [c1, c2]).unwrap();
        assert!(cellset_subset(&empty, &a).unwrap());
        assert!(cellset_subset(&CellSet::from_cells(&g, [c1]).unwrap(), &a).unwrap());
        assert!(!cellset_subset(&CellSet::from_cells(&g, [c1, c3]).unwrap(), &a).unwrap());
        let other = PolarGridSpec::new(1.0, 10.0, 3, 4, 4).unwrap();
        assert!(matches!(
            cellset_subset(&CellSet::empty(&other), &a),
            Err(Error::GridMismatch)
        ));
        assert!(CellSet::empty(&g).insert(Cell(3, 0, 0)).is_err());
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-50.0..50.0f64, -50.0..50.0f64, -4.0..4.0f64).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!(close(&l, &r, 1e-9));
        }

        #[test]
        fn inverse_cancels(a in pose()) {
            let e = a.inverse().compose(&a);
            prop_assert!(close(&e, &Pose2::IDENTITY, 1e-12));
        }

        #[test]
        fn overlap_symmetric_and_rigid(a in pose(), b in pose(), g in pose(),
                                       l1 in 0.5..6.0f64, w1 in 0.5..3.0f64, l2 in 0.5..6.0f64, w2 in 0.5..3.0f64) {
            // keep poses close enough that both outcomes occur
            let b = Pose2::new(a.x + b.x / 8.0, a.y + b.y / 8.0, b.theta);
            let f1 = Footprint::rectangle(l1, w1).unwrap();
            let f2 = Footprint::rectangle(l2, w2).unwrap();
            let ab = footprints_overlap(&f1, &a, &f2, &b);
            prop_assert_eq!(ab, footprints_overlap(&f2, &b, &f1, &a));
            let (ga, gb) = (g.compose(&a), g.compose(&b));
            let moved = footprints_overlap(&f1, &ga, &f2, &gb);
            // the rigid transform can only flip a result sitting on the contact boundary
            if ab != moved {
                let gap = min_axis_overlap(&f1.transformed(&a), &f2.transformed(&b));
                prop_assert!(gap.abs() < 1e-9);
            }
        }

        #[test]
        fn cell_of_is_half_open_partition(r in 0.5..40.0f64, az in -4.0..4.0f64, th in -4.0..4.0f64) {
            let g = PolarGridSpec::new(1.0, 30.0, 7, 12, 6).unwrap();
            let q = Pose2::new(r * az.cos(), r * az.sin(), th);
            match g.cell_of(&q) {
                None => prop_assert!(q.range() < 1.0 || q.range() >= 30.0),
                Some(c) => {
                    prop_assert!(g.contains_cell(&c));
                    let rr = q.range();
                    prop_assert!(g.radial_edge(c.radial()) <= rr && rr < g.radial_edge(c.radial() + 1));
                    let (lo, hi) = g.theta_interval(c.theta());
                    prop_assert!(lo <= q.theta && q.theta < hi);
                }
            }
        }

        #[test]
        fn subset_is_partial_order(xs in proptest::collection::vec(0u16..6, 0..8),
                                   ys in proptest::collection::vec(0u16..6, 0..8),
                                   zs in proptest::collection::vec(0u16..6, 0..8)) {
            let g = PolarGridSpec::new(1.0, 10.0, 6, 1, 1).unwrap();
            let mk = |v: &Vec<u16>| CellSet::from_cells(&g, v.iter().map(|&i| Cell(i, 0, 0))).unwrap();
            let (a, b, c) = (mk(&xs), mk(&ys), mk(&zs));
            prop_assert!(a.is_subset(&a).unwrap());
            if a.is_subset(&b).unwrap() && b.is_subset(&a).unwrap() {
                prop_assert_eq!(&a, &b);
            }
            if a.is_subset(&b).unwrap() && b.is_subset(&c).unwrap() {
                prop_assert!(a.is_subset(&c).unwrap());
            }
        }
    }
}
