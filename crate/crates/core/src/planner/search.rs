//! Single planning calls: lattice A* and RRT / RRT* with Dubins steering.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::Rng;

use super::{
    instance_hash, DubinsPath, OccupancyOracle, OccupancyQuery, PlannerKind, PlannerSpec, QueryLog,
    RobotBody,
};
use crate::geom::{polygon_contains, Point, Pose2};
use crate::util::{keyed_rng, snap};
use crate::world::ScenarioInstance;

/// Curvature used when the body has no turning-radius bound.
const KAPPA_CAP: f64 = 0.5;
/// Turning radius standing in for "straight only" in Dubins steering.
const STRAIGHT_RHO: f64 = 1e4;
const PATH_DT: f64 = 0.05;

/// Point of a planned path in the ego frame of the planning call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub pose: Pose2,
    pub v: f64,
}

struct Ctx<'a> {
    spec: &'a PlannerSpec,
    instance: &'a ScenarioInstance,
    anchor: Pose2,
    t_issue: f64,
    goal: Vec<Point>,
    goal_pt: Point,
    v_max: f64,
    oracle: &'a mut dyn OccupancyOracle,
    log: &'a mut QueryLog,
    checks: u32,
}

impl Ctx<'_> {
    fn occupied(&mut self, pose: &Pose2, tau: f64) -> bool {
        let tau = tau.min(self.spec.horizon_s);
        let q = OccupancyQuery::new(
            &self.instance.id,
            pose,
            tau,
            self.instance.env,
            &self.anchor,
        );
        self.checks += 1;
        let hit = self.oracle.occupied(&q, self.t_issue);
        self.log.queries.push(q);
        hit
    }

    fn in_goal(&self, p: &Pose2) -> bool {
        polygon_contains(&self.goal, [p.x, p.y])
    }

    fn h(&self, p: &Pose2) -> f64 {
        if self.in_goal(p) {
            0.0
        } else {
            (p.x - self.goal_pt[0]).hypot(p.y - self.goal_pt[1]) / self.v_max.max(1e-9)
        }
    }

    /// Heuristic plus a penalty for pointing away from the goal, so the
    /// executed prefix does not leave the robot facing a wall.
    fn score(&self, p: &Pose2) -> f64 {
        let bearing = (self.goal_pt[1] - p.y).atan2(self.goal_pt[0] - p.x);
        self.h(p) + (1.0 - (p.theta - bearing).cos()) * self.spec.horizon_s
    }
}

/// One planning call from `anchor` (world pose) at current speed `speed`.
/// Returns a path in the ego frame, or `None` when the robot has to hold.
#[allow(clippy::too_many_arguments)]
pub fn plan_once(
    spec: &PlannerSpec,
    body: &RobotBody,
    instance: &ScenarioInstance,
    anchor: &Pose2,
    t_issue: f64,
    speed: f64,
    cycle: u64,
    oracle: &mut dyn OccupancyOracle,
    log: &mut QueryLog,
) -> Option<Vec<PathSample>> {
    let inv = anchor.inverse();
    let goal: Vec<Point> = instance
        .goal
        .vertices()
        .iter()
        .map(|&p| inv.transform_point(p))
        .collect();
    let n = goal.len() as f64;
    let goal_pt = [
        goal.iter().map(|p| p[0]).sum::<f64>() / n,
        goal.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let lim = &body.limits;
    let mut ctx = Ctx {
        spec,
        instance,
        anchor: *anchor,
        t_issue,
        goal,
        goal_pt,
        v_max: lim.v_max,
        oracle,
        log,
        checks: 0,
    };
    let target = instance.nominal_speed_mps.min(lim.v_max);
    let up = snap(target.min(speed + lim.a_max * spec.replan_period_s), 1);
    let down = snap((speed - lim.d_max * spec.replan_period_s).max(0.0), 1);
    let mut speeds = vec![up];
    for v in [snap(speed, 1), down, snap(up / 2.0, 1)] {
        if v > 0.0 && !speeds.contains(&v) {
            speeds.push(v);
        }
    }
    let mut result = None;
    for v in speeds.into_iter().filter(|&v| v > 0.0) {
        let found = match spec.kind {
            PlannerKind::LatticeAstar => lattice(&mut ctx, body, v),
            PlannerKind::Rrt | PlannerKind::RrtStar => {
                let mut rng =
                    keyed_rng(&[spec.seed, instance_hash(&instance.id), cycle, v.to_bits()]);
                rrt(
                    &mut ctx,
                    body,
                    v,
                    spec.kind == PlannerKind::RrtStar,
                    &mut rng,
                )
            }
        };
        if found.is_some() {
            result = found;
            break;
        }
    }
    if result.is_none() {
        // Holding still is the fallback; check that it is at least safe.
        let steps = (spec.horizon_s / spec.check_spacing_s).floor() as usize;
        for j in 0..=steps {
            if ctx.occupied(&Pose2::IDENTITY, j as f64 * spec.check_spacing_s) {
                break;
            }
        }
    }
    let checks = ctx.checks;
    ctx.log.checks_per_replan.push(checks);
    result
}

fn arc(p: &Pose2, kappa: f64, s: f64) -> Pose2 {
    if kappa.abs() < 1e-12 {
        Pose2::new(p.x + s * p.theta.cos(), p.y + s * p.theta.sin(), p.theta)
    } else {
        let th = p.theta + kappa * s;
        Pose2::new(
            p.x + (th.sin() - p.theta.sin()) / kappa,
            p.y - (th.cos() - p.theta.cos()) / kappa,
            th,
        )
    }
}

struct HeapItem {
    f: f64,
    seq: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.seq.cmp(&self.seq))
    }
}

struct LNode {
    pose: Pose2,
    depth: usize,
    parent: usize,
    kappa: f64,
}

fn lattice(ctx: &mut Ctx, body: &RobotBody, v: f64) -> Option<Vec<PathSample>> {
    let spec = ctx.spec;
    let dp = spec.primitive_duration_s;
    let depth_max = ((spec.horizon_s / dp) + 1e-9).floor().max(1.0) as usize;
    let k = body.limits.max_curvature().min(KAPPA_CAP);
    let kappas: Vec<f64> = if k > 0.0 {
        vec![0.0, k, -k, k / 2.0, -k / 2.0]
    } else {
        vec![0.0]
    };
    let m = (dp / spec.check_spacing_s).ceil().max(1.0) as usize;
    let mut nodes = vec![LNode {
        pose: Pose2::IDENTITY,
        depth: 0,
        parent: 0,
        kappa: 0.0,
    }];
    let mut open = BinaryHeap::new();
    open.push(HeapItem {
        f: ctx.h(&Pose2::IDENTITY),
        seq: 0,
    });
    let mut expansions = 0;
    let mut chosen = None;
    while let Some(HeapItem { seq, .. }) = open.pop() {
        let (pose, depth) = (nodes[seq].pose, nodes[seq].depth);
        if seq != 0 && (depth == depth_max || ctx.in_goal(&pose)) {
            chosen = Some(seq);
            break;
        }
        if expansions >= spec.budget {
            break;
        }
        expansions += 1;
        for &kappa in &kappas {
            let mut free = true;
            for j in 1..=m {
                let s = v * dp * j as f64 / m as f64;
                let tau = (depth as f64 + j as f64 / m as f64) * dp;
                if ctx.occupied(&arc(&pose, kappa, s), tau) {
                    free = false;
                    break;
                }
            }
            if free {
                let child = arc(&pose, kappa, v * dp);
                nodes.push(LNode {
                    pose: child,
                    depth: depth + 1,
                    parent: seq,
                    kappa,
                });
                let f = (depth + 1) as f64 * dp + ctx.h(&child);
                open.push(HeapItem {
                    f,
                    seq: nodes.len() - 1,
                });
            }
        }
    }
    let chosen = chosen.or_else(|| {
        (1..nodes.len()).min_by(|&a, &b| {
            nodes[b]
                .depth
                .cmp(&nodes[a].depth)
                .then(ctx.h(&nodes[a].pose).total_cmp(&ctx.h(&nodes[b].pose)))
        })
    })?;
    let mut chain = vec![chosen];
    while chain[chain.len() - 1] != 0 {
        chain.push(nodes[chain[chain.len() - 1]].parent);
    }
    chain.reverse();
    let per = (dp / PATH_DT).round().max(1.0) as usize;
    let mut out = vec![PathSample {
        t: 0.0,
        pose: Pose2::IDENTITY,
        v,
    }];
    for w in chain.windows(2) {
        let (from, to) = (&nodes[w[0]], &nodes[w[1]]);
        for j in 1..=per {
            let frac = j as f64 / per as f64;
            out.push(PathSample {
                t: (from.depth as f64 + frac) * dp,
                pose: arc(&from.pose, to.kappa, v * dp * frac),
                v,
            });
        }
    }
    Some(out)
}

struct RNode {
    pose: Pose2,
    cost: f64,
    parent: usize,
    edge: Option<DubinsPath>,
}

fn edge_free(ctx: &mut Ctx, path: &DubinsPath, len: f64, start_cost: f64, v: f64) -> bool {
    let ds = v * ctx.spec.check_spacing_s;
    let n = (len / ds).ceil().max(1.0) as usize;
    for j in 1..=n {
        let s = len * j as f64 / n as f64;
        if ctx.occupied(&path.sample(s), (start_cost + s) / v) {
            return false;
        }
    }
    true
}

fn rrt<R: Rng>(
    ctx: &mut Ctx,
    body: &RobotBody,
    v: f64,
    star: bool,
    rng: &mut R,
) -> Option<Vec<PathSample>> {
    let spec = ctx.spec;
    let reach = v * spec.horizon_s;
    let step = v * spec.primitive_duration_s;
    let r = body.limits.turn_radius_min;
    let rho = if r == 0.0 {
        1.0 / KAPPA_CAP
    } else if r.is_infinite() {
        STRAIGHT_RHO
    } else {
        r
    };
    let max_cost = reach + 1e-9;
    let mut nodes = vec![RNode {
        pose: Pose2::IDENTITY,
        cost: 0.0,
        parent: 0,
        edge: None,
    }];
    for _ in 0..spec.budget {
        let u: f64 = rng.random();
        let target = if u < spec.goal_bias {
            let g = ctx.goal_pt;
            let d = g[0].hypot(g[1]);
            let scale = if d > reach { reach / d } else { 1.0 };
            Pose2::new(g[0] * scale, g[1] * scale, g[1].atan2(g[0]))
        } else {
            let r = reach * rng.random::<f64>().sqrt();
            let a = rng.random_range(-PI / 2.0..PI / 2.0);
            let dh = rng.random_range(-PI / 6.0..PI / 6.0);
            let (x, y) = (r * a.cos(), r * a.sin());
            // sampled configurations face the goal
            Pose2::new(x, y, (ctx.goal_pt[1] - y).atan2(ctx.goal_pt[0] - x) + dh)
        };
        let nearest = (0..nodes.len())
            .min_by(|&a, &b| {
                let da = (nodes[a].pose.x - target.x).hypot(nodes[a].pose.y - target.y);
                let db = (nodes[b].pose.x - target.x).hypot(nodes[b].pose.y - target.y);
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        let Some(path) = DubinsPath::shortest(&nodes[nearest].pose, &target, rho) else {
            continue;
        };
        let seg = path.length().min(step);
        if seg <= 1e-9 {
            continue;
        }
        let x_new = path.sample(seg);
        if !star {
            let c = nodes[nearest].cost + seg;
            if c > max_cost {
                continue;
            }
            let truncated = DubinsPath::shortest(&nodes[nearest].pose, &x_new, rho).unwrap_or(path);
            if edge_free(ctx, &truncated, seg, nodes[nearest].cost, v) {
                nodes.push(RNode {
                    pose: x_new,
                    cost: c,
                    parent: nearest,
                    edge: Some(truncated),
                });
            }
            continue;
        }
        let n = nodes.len() as f64;
        let r_near = (2.0 * reach * ((n + 1.0).ln() / (n + 1.0)).sqrt()).min(2.0 * step);
        let mut near: Vec<usize> = (0..nodes.len())
            .filter(|&i| i == nearest || nodes[i].pose.distance(&x_new) <= r_near)
            .collect();
        let mut candidates: Vec<(f64, usize, DubinsPath)> = near
            .iter()
            .filter_map(|&i| {
                let p = DubinsPath::shortest(&nodes[i].pose, &x_new, rho)?;
                Some((nodes[i].cost + p.length(), i, p))
            })
            .filter(|c| c.0 <= max_cost)
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut parent = None;
        for (c, i, p) in candidates {
            if edge_free(ctx, &p, p.length(), nodes[i].cost, v) {
                parent = Some((c, i, p));
                break;
            }
        }
        let Some((c, pi, p)) = parent else {
            continue;
        };
        nodes.push(RNode {
            pose: x_new,
            cost: c,
            parent: pi,
            edge: Some(p),
        });
        let new_idx = nodes.len() - 1;
        near.retain(|&i| i != pi && i != 0);
        for i in near {
            let Some(p) = DubinsPath::shortest(&x_new, &nodes[i].pose, rho) else {
                continue;
            };
            let c_new = c + p.length();
            if c_new + 1e-9 < nodes[i].cost
                && c_new <= max_cost
                && !is_ancestor(&nodes, i, new_idx)
                && edge_free(ctx, &p, p.length(), c, v)
            {
                let delta = nodes[i].cost - c_new;
                nodes[i].parent = new_idx;
                nodes[i].edge = Some(p);
                shift_subtree(&mut nodes, i, delta);
            }
        }
    }
    if nodes.len() == 1 {
        return None;
    }
    let best = (1..nodes.len())
        .min_by(|&a, &b| {
            let (ga, gb) = (ctx.in_goal(&nodes[a].pose), ctx.in_goal(&nodes[b].pose));
            gb.cmp(&ga)
                .then(
                    ctx.score(&nodes[a].pose)
                        .total_cmp(&ctx.score(&nodes[b].pose)),
                )
                .then(nodes[a].cost.total_cmp(&nodes[b].cost))
        })
        .unwrap_or(1);
    let mut chain = vec![best];
    while chain[chain.len() - 1] != 0 {
        chain.push(nodes[chain[chain.len() - 1]].parent);
    }
    chain.reverse();
    let mut out = vec![PathSample {
        t: 0.0,
        pose: Pose2::IDENTITY,
        v,
    }];
    for w in chain.windows(2) {
        let (from, to) = (&nodes[w[0]], &nodes[w[1]]);
        let edge = to.edge.as_ref()?;
        let len = edge.length();
        let k = (len / (v * PATH_DT)).ceil().max(1.0) as usize;
        for j in 1..=k {
            let s = len * j as f64 / k as f64;
            out.push(PathSample {
                t: (from.cost + s) / v,
                pose: edge.sample(s),
                v,
            });
        }
    }
    Some(out)
}

fn is_ancestor(nodes: &[RNode], candidate: usize, mut of: usize) -> bool {
    while of != 0 {
        if of == candidate {
            return true;
        }
        of = nodes[of].parent;
    }
    candidate == 0
}

fn shift_subtree(nodes: &mut [RNode], root: usize, delta: f64) {
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        nodes[i].cost -= delta;
        stack.extend((1..nodes.len()).filter(|&j| j != i && nodes[j].parent == i));
    }
}
