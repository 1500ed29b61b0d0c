//! Monotone co-design: posets, antichains, design problems with
//! implementations, their compositions and the fixed-point solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod codei;

pub const DEFAULT_KLEENE_CAP: usize = 10_000;

/// Fixed-point resolution of numeric coordinates.
pub const NUM_SCALE: f64 = 1e6;

/// Poset element. Numbers are stored in millionths so that equality and
/// hashing are exact; `i64::MAX` stands for +∞.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Bot,
    Num(i64),
    Token(String),
    Set(BTreeSet<String>),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn num(x: f64) -> Value {
        if x == f64::INFINITY {
            return Value::Num(i64::MAX);
        }
        Value::Num((x * NUM_SCALE).round() as i64)
    }

    pub fn inf() -> Value {
        Value::Num(i64::MAX)
    }

    pub fn token(s: impl Into<String>) -> Value {
        Value::Token(s.into())
    }

    pub fn set<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Value {
        Value::Set(items.into_iter().map(Into::into).collect())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(i64::MAX) => Some(f64::INFINITY),
            Value::Num(v) => Some(*v as f64 / NUM_SCALE),
            _ => None,
        }
    }

    pub fn tuple(&self) -> Option<&[Value]> {
        match self {
            Value::Tuple(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bot => write!(f, "⊥"),
            Value::Num(i64::MAX) => write!(f, "inf"),
            Value::Num(_) => write!(f, "{}", self.as_f64().unwrap_or(f64::NAN)),
            Value::Token(t) => write!(f, "{t}"),
            Value::Set(s) => write!(f, "{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(",")),
            Value::Tuple(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Poset {
    /// Nonnegative quantities with +∞; `opposite` reverses the order.
    Num {
        name: String,
        unit: String,
        opposite: bool,
    },
    /// Named tokens under an explicit order, plus a bottom element below all.
    Tokens {
        name: String,
        order: BTreeSet<(String, String)>,
    },
    /// Finite sets of names ordered by inclusion.
    Sets {
        name: String,
    },
    Product(Vec<Poset>),
}

impl Poset {
    pub fn num(name: &str, unit: &str) -> Poset {
        Poset::Num {
            name: name.into(),
            unit: unit.into(),
            opposite: false,
        }
    }

    pub fn opposite(name: &str, unit: &str) -> Poset {
        Poset::Num {
            name: name.into(),
            unit: unit.into(),
            opposite: true,
        }
    }

    /// Discrete tokens: distinct tokens are incomparable.
    pub fn tokens(name: &str) -> Poset {
        Poset::Tokens {
            name: name.into(),
            order: BTreeSet::new(),
        }
    }

    /// Tokens with `below` pairs `(a, b)` meaning a ⪯ b; closed transitively.
    pub fn tokens_ordered(name: &str, below: impl IntoIterator<Item = (String, String)>) -> Poset {
        let mut order: BTreeSet<(String, String)> =
            below.into_iter().filter(|(a, b)| a != b).collect();
        loop {
            let extra: Vec<(String, String)> = order
                .iter()
                .flat_map(|(a, b)| {
                    order
                        .iter()
                        .filter(move |(c, _)| c == b)
                        .map(move |(_, d)| (a.clone(), d.clone()))
                })
                .filter(|(a, d)| a != d && !order.contains(&(a.clone(), d.clone())))
                .collect();
            if extra.is_empty() {
                break;
            }
            order.extend(extra);
        }
        Poset::Tokens {
            name: name.into(),
            order,
        }
    }

    pub fn sets(name: &str) -> Poset {
        Poset::Sets { name: name.into() }
    }

    pub fn product(parts: Vec<Poset>) -> Poset {
        Poset::Product(parts)
    }

    pub fn name(&self) -> String {
        match self {
            Poset::Num {
                name,
                unit,
                opposite,
            } => {
                format!("{}{name}[{unit}]", if *opposite { "op " } else { "" })
            }
            Poset::Tokens { name, .. } | Poset::Sets { name } => name.clone(),
            Poset::Product(p) => format!(
                "({})",
                p.iter().map(|x| x.name()).collect::<Vec<_>>().join(" × ")
            ),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Poset::Num { .. }, Value::Num(x)) => *x >= 0,
            (Poset::Tokens { .. }, Value::Bot | Value::Token(_)) => true,
            (Poset::Sets { .. }, Value::Set(_)) => true,
            (Poset::Product(ps), Value::Tuple(vs)) => {
                ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| p.contains(v))
            }
            _ => false,
        }
    }

    pub fn leq(&self, a: &Value, b: &Value) -> bool {
        match (self, a, b) {
            (Poset::Num { opposite, .. }, Value::Num(x), Value::Num(y)) => {
                if *opposite {
                    x >= y
                } else {
                    x <= y
                }
            }
            (Poset::Tokens { .. }, Value::Bot, _) => true,
            (Poset::Tokens { order, .. }, Value::Token(x), Value::Token(y)) => {
                x == y || order.contains(&(x.clone(), y.clone()))
            }
            (Poset::Sets { .. }, Value::Set(x), Value::Set(y)) => x.is_subset(y),
            (Poset::Product(ps), Value::Tuple(xs), Value::Tuple(ys)) => {
                ps.len() == xs.len()
                    && xs.len() == ys.len()
                    && ps
                        .iter()
                        .zip(xs.iter().zip(ys))
                        .all(|(p, (x, y))| p.leq(x, y))
            }
            _ => false,
        }
    }

    pub fn bottom(&self) -> Value {
        match self {
            Poset::Num {
                opposite: false, ..
            } => Value::Num(0),
            Poset::Num { opposite: true, .. } => Value::inf(),
            Poset::Tokens { .. } => Value::Bot,
            Poset::Sets { .. } => Value::Set(BTreeSet::new()),
            Poset::Product(ps) => Value::Tuple(ps.iter().map(|p| p.bottom()).collect()),
        }
    }

    /// Least upper bound, if one exists.
    pub fn join(&self, a: &Value, b: &Value) -> Option<Value> {
        match (self, a, b) {
            (Poset::Num { opposite, .. }, Value::Num(x), Value::Num(y)) => {
                Some(Value::Num(if *opposite { *x.min(y) } else { *x.max(y) }))
            }
            (Poset::Tokens { .. }, Value::Bot, v) | (Poset::Tokens { .. }, v, Value::Bot) => {
                Some(v.clone())
            }
            (Poset::Tokens { order, .. }, Value::Token(x), Value::Token(y)) => {
                if self.leq(a, b) {
                    return Some(b.clone());
                }
                if self.leq(b, a) {
                    return Some(a.clone());
                }
                let ups: BTreeSet<&String> = order
                    .iter()
                    .filter(|(p, _)| p == x)
                    .map(|(_, q)| q)
                    .filter(|q| order.contains(&(y.clone(), (*q).clone())))
                    .collect();
                let least: Vec<&&String> = ups
                    .iter()
                    .filter(|u| {
                        ups.iter()
                            .all(|v| *u == v || order.contains(&((**u).clone(), (**v).clone())))
                    })
                    .collect();
                least.first().map(|u| Value::Token((**u).clone()))
            }
            (Poset::Sets { .. }, Value::Set(x), Value::Set(y)) => {
                Some(Value::Set(x.union(y).cloned().collect()))
            }
            (Poset::Product(ps), Value::Tuple(xs), Value::Tuple(ys))
                if ps.len() == xs.len() && xs.len() == ys.len() =>
            {
                let parts: Option<Vec<Value>> = ps
                    .iter()
                    .zip(xs.iter().zip(ys))
                    .map(|(p, (x, y))| p.join(x, y))
                    .collect();
                parts.map(Value::Tuple)
            }
            _ => None,
        }
    }

    pub fn parts(&self) -> Option<&[Poset]> {
        match self {
            Poset::Product(p) => Some(p),
            _ => None,
        }
    }
}

/// One concrete design choice: ordered (block, choice) pairs.
pub type Implementation = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntichainPoint {
    pub value: Value,
    pub impls: Vec<Implementation>,
}

/// Pairwise incomparable points, each with the implementations reaching it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antichain {
    pub points: Vec<AntichainPoint>,
}

impl Antichain {
    pub fn empty() -> Self {
        Antichain { points: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn values(&self) -> Vec<&Value> {
        self.points.iter().map(|p| &p.value).collect()
    }

    pub fn value_set(&self) -> BTreeSet<Value> {
        self.points.iter().map(|p| p.value.clone()).collect()
    }

    pub fn is_antichain(&self, poset: &Poset) -> bool {
        self.points.iter().enumerate().all(|(i, p)| {
            self.points
                .iter()
                .enumerate()
                .all(|(j, q)| i == j || !poset.leq(&p.value, &q.value))
        })
    }
}

fn group(points: Vec<(Value, Vec<Implementation>)>) -> BTreeMap<Value, BTreeSet<Implementation>> {
    let mut by: BTreeMap<Value, BTreeSet<Implementation>> = BTreeMap::new();
    for (v, impls) in points {
        by.entry(v).or_default().extend(impls);
    }
    by
}

fn extreme(poset: &Poset, points: Vec<(Value, Vec<Implementation>)>, minimal: bool) -> Antichain {
    let by = group(points);
    let keys: Vec<&Value> = by.keys().collect();
    let points = by
        .iter()
        .filter(|(v, _)| {
            !keys.iter().any(|w| {
                *w != *v
                    && if minimal {
                        poset.leq(w, v)
                    } else {
                        poset.leq(v, w)
                    }
            })
        })
        .map(|(v, impls)| AntichainPoint {
            value: v.clone(),
            impls: impls.iter().cloned().collect(),
        })
        .collect();
    Antichain { points }
}

/// Minimal elements of `points`; identical values pool their implementations.
pub fn antichain_merge(
    poset: &Poset,
    points: Vec<(Value, Vec<Implementation>)>,
) -> Result<Antichain> {
    if let Some((v, _)) = points.iter().find(|(v, _)| !poset.contains(v)) {
        return Err(Error::PosetMismatch(format!(
            "{v} is not an element of {}",
            poset.name()
        )));
    }
    Ok(extreme(poset, points, true))
}

/// Maximal elements, the dual of [`antichain_merge`].
pub fn antichain_merge_max(
    poset: &Poset,
    points: Vec<(Value, Vec<Implementation>)>,
) -> Result<Antichain> {
    if let Some((v, _)) = points.iter().find(|(v, _)| !poset.contains(v)) {
        return Err(Error::PosetMismatch(format!(
            "{v} is not an element of {}",
            poset.name()
        )));
    }
    Ok(extreme(poset, points, false))
}

fn concat(a: &Implementation, b: &Implementation) -> Implementation {
    a.iter().chain(b).cloned().collect()
}

/// Monotone design problem with implementations.
pub trait Mdpi: Send + Sync {
    fn name(&self) -> String;
    fn fun(&self) -> &Poset;
    fn res(&self) -> &Poset;
    /// Minimal antichain of resources providing `f`.
    fn h(&self, f: &Value) -> Result<Antichain>;
    /// Maximal antichain of functionalities provided by `r`.
    fn h_dual(&self, _r: &Value) -> Result<Antichain> {
        Err(Error::Invalid(format!(
            "{}: resource-side query not available",
            self.name()
        )))
    }
}

pub type DynMdpi = Arc<dyn Mdpi>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogOption {
    pub provides: Value,
    pub requires: Value,
    pub label: Implementation,
}

/// Tabulated design problem: each option provides a functionality at a cost.
pub struct CatalogMdpi {
    pub name: String,
    pub fun: Poset,
    pub res: Poset,
    pub options: Vec<CatalogOption>,
}

impl CatalogMdpi {
    pub fn new(name: &str, fun: Poset, res: Poset, options: Vec<CatalogOption>) -> Result<Self> {
        for o in &options {
            if !fun.contains(&o.provides) || !res.contains(&o.requires) {
                return Err(Error::PosetMismatch(format!(
                    "{name}: option {:?} outside its posets",
                    o.label
                )));
            }
        }
        Ok(CatalogMdpi {
            name: name.into(),
            fun,
            res,
            options,
        })
    }
}

impl Mdpi for CatalogMdpi {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn fun(&self) -> &Poset {
        &self.fun
    }
    fn res(&self) -> &Poset {
        &self.res
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        let pts = self
            .options
            .iter()
            .filter(|o| self.fun.leq(f, &o.provides))
            .map(|o| (o.requires.clone(), vec![o.label.clone()]))
            .collect();
        antichain_merge(&self.res, pts)
    }
    fn h_dual(&self, r: &Value) -> Result<Antichain> {
        let pts = self
            .options
            .iter()
            .filter(|o| self.res.leq(&o.requires, r))
            .map(|o| (o.provides.clone(), vec![o.label.clone()]))
            .collect();
        antichain_merge_max(&self.fun, pts)
    }
}

pub struct IdentityMdpi {
    pub poset: Poset,
}

impl Mdpi for IdentityMdpi {
    fn name(&self) -> String {
        format!("id{}", self.poset.name())
    }
    fn fun(&self) -> &Poset {
        &self.poset
    }
    fn res(&self) -> &Poset {
        &self.poset
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        antichain_merge(&self.poset, vec![(f.clone(), vec![vec![]])])
    }
    fn h_dual(&self, r: &Value) -> Result<Antichain> {
        antichain_merge_max(&self.poset, vec![(r.clone(), vec![vec![]])])
    }
}

type MapFn = dyn Fn(&Value) -> Result<Option<Value>> + Send + Sync;

/// Single-valued monotone map; `None` marks an infeasible functionality.
pub struct MapMdpi {
    pub name: String,
    pub fun: Poset,
    pub res: Poset,
    map: Box<MapFn>,
}

impl MapMdpi {
    pub fn new(
        name: &str,
        fun: Poset,
        res: Poset,
        map: impl Fn(&Value) -> Result<Option<Value>> + Send + Sync + 'static,
    ) -> Self {
        MapMdpi {
            name: name.into(),
            fun,
            res,
            map: Box::new(map),
        }
    }

    /// Sum of numeric coordinates: F = Num^k, R = Num.
    pub fn sum(name: &str, parts: Vec<Poset>, out: Poset) -> Self {
        MapMdpi::new(name, Poset::product(parts), out, |f| {
            let t = f
                .tuple()
                .ok_or_else(|| Error::PosetMismatch("sum expects a tuple".into()))?;
            let mut acc: i64 = 0;
            for v in t {
                match v {
                    Value::Num(i64::MAX) => return Ok(Some(Value::inf())),
                    Value::Num(x) => acc = acc.saturating_add(*x),
                    _ => return Err(Error::PosetMismatch("sum over non-numeric values".into())),
                }
            }
            Ok(Some(Value::Num(acc)))
        })
    }

    /// Requires the demanded value on `k` separate wires.
    pub fn tee(name: &str, poset: Poset, k: usize) -> Self {
        MapMdpi::new(
            name,
            poset.clone(),
            Poset::product(vec![poset; k]),
            move |f| Ok(Some(Value::Tuple(vec![f.clone(); k]))),
        )
    }
}

impl Mdpi for MapMdpi {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn fun(&self) -> &Poset {
        &self.fun
    }
    fn res(&self) -> &Poset {
        &self.res
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        match (self.map)(f)? {
            Some(r) => antichain_merge(&self.res, vec![(r, vec![vec![]])]),
            None => Ok(Antichain::empty()),
        }
    }
}

type OnDemandFn = dyn Fn(&Value) -> Result<Antichain> + Send + Sync;

/// Design problem whose map is computed when first asked and then memoized.
pub struct OnDemandMdpi {
    pub name: String,
    pub fun: Poset,
    pub res: Poset,
    compute: Box<OnDemandFn>,
    memo: Mutex<BTreeMap<Value, Antichain>>,
    calls: AtomicUsize,
}

impl OnDemandMdpi {
    pub fn new(
        name: &str,
        fun: Poset,
        res: Poset,
        compute: impl Fn(&Value) -> Result<Antichain> + Send + Sync + 'static,
    ) -> Self {
        OnDemandMdpi {
            name: name.into(),
            fun,
            res,
            compute: Box::new(compute),
            memo: Mutex::new(BTreeMap::new()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Number of evaluations that missed the memo.
    pub fn evaluations(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Mdpi for OnDemandMdpi {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn fun(&self) -> &Poset {
        &self.fun
    }
    fn res(&self) -> &Poset {
        &self.res
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        if let Some(a) = self.memo.lock().expect("memo lock").get(f) {
            return Ok(a.clone());
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let raw = (self.compute)(f)?;
        let a = antichain_merge(
            &self.res,
            raw.points.into_iter().map(|p| (p.value, p.impls)).collect(),
        )?;
        self.memo
            .lock()
            .expect("memo lock")
            .insert(f.clone(), a.clone());
        Ok(a)
    }
}

pub struct SeriesMdpi {
    a: DynMdpi,
    b: DynMdpi,
}

pub fn compose_series(a: DynMdpi, b: DynMdpi) -> Result<DynMdpi> {
    if a.res() != b.fun() {
        return Err(Error::PosetMismatch(format!(
            "{} requires {} but {} provides {}",
            a.name(),
            a.res().name(),
            b.name(),
            b.fun().name()
        )));
    }
    Ok(Arc::new(SeriesMdpi { a, b }))
}

impl Mdpi for SeriesMdpi {
    fn name(&self) -> String {
        format!("({} ; {})", self.a.name(), self.b.name())
    }
    fn fun(&self) -> &Poset {
        self.a.fun()
    }
    fn res(&self) -> &Poset {
        self.b.res()
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        let mut pts = Vec::new();
        for p1 in self.a.h(f)?.points {
            for p2 in self.b.h(&p1.value)?.points {
                let impls = p1
                    .impls
                    .iter()
                    .flat_map(|i1| p2.impls.iter().map(move |i2| concat(i1, i2)))
                    .collect();
                pts.push((p2.value.clone(), impls));
            }
        }
        antichain_merge(self.res(), pts)
    }
    fn h_dual(&self, r: &Value) -> Result<Antichain> {
        let mut pts = Vec::new();
        for p2 in self.b.h_dual(r)?.points {
            for p1 in self.a.h_dual(&p2.value)?.points {
                let impls = p1
                    .impls
                    .iter()
                    .flat_map(|i1| p2.impls.iter().map(move |i2| concat(i1, i2)))
                    .collect();
                pts.push((p1.value.clone(), impls));
            }
        }
        antichain_merge_max(self.fun(), pts)
    }
}

pub struct ParallelMdpi {
    a: DynMdpi,
    b: DynMdpi,
    fun: Poset,
    res: Poset,
}

pub fn compose_parallel(a: DynMdpi, b: DynMdpi) -> DynMdpi {
    let fun = Poset::product(vec![a.fun().clone(), b.fun().clone()]);
    let res = Poset::product(vec![a.res().clone(), b.res().clone()]);
    Arc::new(ParallelMdpi { a, b, fun, res })
}

fn pair(v: &Value) -> Result<(&Value, &Value)> {
    match v {
        Value::Tuple(t) if t.len() == 2 => Ok((&t[0], &t[1])),
        _ => Err(Error::PosetMismatch(format!("expected a pair, got {v}"))),
    }
}

fn product_points(x: Antichain, y: Antichain) -> Vec<(Value, Vec<Implementation>)> {
    let mut pts = Vec::new();
    for p in &x.points {
        for q in &y.points {
            let impls = p
                .impls
                .iter()
                .flat_map(|i1| q.impls.iter().map(move |i2| concat(i1, i2)))
                .collect();
            pts.push((Value::Tuple(vec![p.value.clone(), q.value.clone()]), impls));
        }
    }
    pts
}

impl Mdpi for ParallelMdpi {
    fn name(&self) -> String {
        format!("({} ∥ {})", self.a.name(), self.b.name())
    }
    fn fun(&self) -> &Poset {
        &self.fun
    }
    fn res(&self) -> &Poset {
        &self.res
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        let (f1, f2) = pair(f)?;
        antichain_merge(&self.res, product_points(self.a.h(f1)?, self.b.h(f2)?))
    }
    fn h_dual(&self, r: &Value) -> Result<Antichain> {
        let (r1, r2) = pair(r)?;
        antichain_merge_max(
            &self.fun,
            product_points(self.a.h_dual(r1)?, self.b.h_dual(r2)?),
        )
    }
}

/// Feedback on the second coordinate: the inner problem has F = F₁ × L and
/// R = R₁ × L, and the loop imposes r_L ⪯ f_L.
pub struct LoopMdpi {
    name: String,
    inner: DynMdpi,
    fun: Poset,
    res: Poset,
    cap: usize,
    last_iterations: AtomicUsize,
}

pub fn compose_loop(name: &str, inner: DynMdpi, cap: usize) -> Result<Arc<LoopMdpi>> {
    let (Some(fp), Some(rp)) = (inner.fun().parts(), inner.res().parts()) else {
        return Err(Error::PosetMismatch("loop needs product posets".into()));
    };
    if fp.len() != 2 || rp.len() != 2 || fp[1] != rp[1] {
        return Err(Error::PosetMismatch(format!(
            "{}: loop wire posets differ",
            inner.name()
        )));
    }
    Ok(Arc::new(LoopMdpi {
        name: name.into(),
        fun: fp[0].clone(),
        res: rp[0].clone(),
        inner,
        cap,
        last_iterations: AtomicUsize::new(0),
    }))
}

impl LoopMdpi {
    pub fn last_iterations(&self) -> usize {
        self.last_iterations.load(Ordering::SeqCst)
    }

    /// Kleene ascent from the bottom antichain; returns the fixed point and
    /// the number of iterations taken.
    pub fn solve(&self, f: &Value) -> Result<(Antichain, usize)> {
        let full = self.inner.res().clone();
        let loop_poset = &full.parts().expect("checked")[1];
        let mut current = antichain_merge(&full, vec![(full.bottom(), vec![vec![]])])?;
        for k in 1..=self.cap {
            let mut pts = Vec::new();
            for s in &current.points {
                let (_, s_loop) = pair(&s.value)?;
                let arg = Value::Tuple(vec![f.clone(), s_loop.clone()]);
                for a in self.inner.h(&arg)?.points {
                    if let Some(j) = full.join(&a.value, &s.value) {
                        pts.push((j, a.impls.clone()));
                    }
                }
            }
            let next = antichain_merge(&full, pts)?;
            if next.value_set() == current.value_set() {
                self.last_iterations.store(k, Ordering::SeqCst);
                let _ = loop_poset;
                return Ok((next, k));
            }
            current = next;
        }
        Err(Error::Divergence {
            name: self.name.clone(),
            iterations: self.cap,
        })
    }
}

impl Mdpi for LoopMdpi {
    fn name(&self) -> String {
        format!("loop {}", self.name)
    }
    fn fun(&self) -> &Poset {
        &self.fun
    }
    fn res(&self) -> &Poset {
        &self.res
    }
    fn h(&self, f: &Value) -> Result<Antichain> {
        let (fixed, _) = self.solve(f)?;
        let mut pts = Vec::new();
        for p in fixed.points {
            let (r, _) = pair(&p.value)?;
            pts.push((r.clone(), p.impls));
        }
        antichain_merge(&self.res, pts)
    }
}

/// True if every point of h(small) lies below some point of h(big), which is
/// what monotonicity demands for small ⪯ big.
pub fn h_monotone_on(d: &dyn Mdpi, small: &Value, big: &Value) -> Result<bool> {
    let lo = d.h(small)?;
    let hi = d.h(big)?;
    Ok(hi
        .points
        .iter()
        .all(|q| lo.points.iter().any(|p| d.res().leq(&p.value, &q.value))))
}

/// Reference to a port of a node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PortRef {
    pub node: String,
    pub port: String,
}

impl PortRef {
    pub fn new(node: &str, port: &str) -> Self {
        PortRef {
            node: node.into(),
            port: port.into(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

pub struct Node {
    pub name: String,
    pub mdpi: DynMdpi,
    pub fun_ports: Vec<String>,
    pub res_ports: Vec<String>,
}

impl Node {
    fn fun_poset(&self, i: usize) -> &Poset {
        if self.fun_ports.len() == 1 {
            self.mdpi.fun()
        } else {
            &self.mdpi.fun().parts().expect("validated")[i]
        }
    }

    fn res_poset(&self, i: usize) -> &Poset {
        if self.res_ports.len() == 1 {
            self.mdpi.res()
        } else {
            &self.mdpi.res().parts().expect("validated")[i]
        }
    }

    fn pack(&self, vals: Vec<Value>) -> Value {
        if self.fun_ports.len() == 1 {
            vals.into_iter().next().expect("one port")
        } else {
            Value::Tuple(vals)
        }
    }

    fn unpack(&self, v: Value) -> Result<Vec<Value>> {
        if self.res_ports.len() == 1 {
            return Ok(vec![v]);
        }
        match v {
            Value::Tuple(t) if t.len() == self.res_ports.len() => Ok(t),
            other => Err(Error::PosetMismatch(format!(
                "{}: unexpected resource {other}",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    /// Resource port of the requiring node.
    pub from: PortRef,
    /// Functionality port of the providing node.
    pub to: PortRef,
    pub is_loop: bool,
}

/// Multigraph of design problems. Every functionality port is fed by one
/// edge or exposed; every resource port feeds one edge or is exposed.
pub struct Diagram {
    pub name: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub exposed_fun: Vec<PortRef>,
    pub exposed_res: Vec<PortRef>,
    pub kleene_cap: usize,
    order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub antichain: Antichain,
    pub kleene_iterations: usize,
}

#[derive(Clone)]
struct State {
    live: BTreeMap<PortRef, Value>,
    impls: Vec<Implementation>,
}

impl Diagram {
    pub fn new(
        name: &str,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        exposed_fun: Vec<PortRef>,
        exposed_res: Vec<PortRef>,
    ) -> Result<Self> {
        let mut d = Diagram {
            name: name.into(),
            nodes,
            edges,
            exposed_fun,
            exposed_res,
            kleene_cap: DEFAULT_KLEENE_CAP,
            order: vec![],
        };
        d.validate()?;
        Ok(d)
    }

    fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    fn fun_port(&self, p: &PortRef) -> Option<(usize, usize)> {
        let n = self.node_index(&p.node)?;
        let i = self.nodes[n].fun_ports.iter().position(|x| x == &p.port)?;
        Some((n, i))
    }

    fn res_port(&self, p: &PortRef) -> Option<(usize, usize)> {
        let n = self.node_index(&p.node)?;
        let i = self.nodes[n].res_ports.iter().position(|x| x == &p.port)?;
        Some((n, i))
    }

    fn validate(&mut self) -> Result<()> {
        let mut names = BTreeSet::new();
        for n in &self.nodes {
            if !names.insert(n.name.clone()) {
                return Err(Error::Invalid(format!("duplicate node {}", n.name)));
            }
            let arity_ok =
                |ports: usize, p: &Poset| ports == 1 || p.parts().is_some_and(|x| x.len() == ports);
            if n.fun_ports.is_empty()
                || n.res_ports.is_empty()
                || !arity_ok(n.fun_ports.len(), n.mdpi.fun())
                || !arity_ok(n.res_ports.len(), n.mdpi.res())
            {
                return Err(Error::PosetMismatch(format!(
                    "{}: ports do not match its posets",
                    n.name
                )));
            }
        }
        let mut fed: BTreeMap<PortRef, usize> = BTreeMap::new();
        let mut used: BTreeMap<PortRef, usize> = BTreeMap::new();
        let mut missing = Vec::new();
        for e in &self.edges {
            let (Some((a, i)), Some((b, j))) = (self.res_port(&e.from), self.fun_port(&e.to))
            else {
                missing.push(format!("{} -> {}", e.from, e.to));
                continue;
            };
            if self.nodes[a].res_poset(i) != self.nodes[b].fun_poset(j) {
                return Err(Error::PosetMismatch(format!(
                    "{} ({}) -> {} ({})",
                    e.from,
                    self.nodes[a].res_poset(i).name(),
                    e.to,
                    self.nodes[b].fun_poset(j).name()
                )));
            }
            *used.entry(e.from.clone()).or_default() += 1;
            *fed.entry(e.to.clone()).or_default() += 1;
        }
        for p in &self.exposed_fun {
            if self.fun_port(p).is_none() {
                missing.push(p.to_string());
            }
            *fed.entry(p.clone()).or_default() += 1;
        }
        for p in &self.exposed_res {
            if self.res_port(p).is_none() {
                missing.push(p.to_string());
            }
            *used.entry(p.clone()).or_default() += 1;
        }
        if !missing.is_empty() {
            return Err(Error::UnresolvedReferences(missing));
        }
        for n in &self.nodes {
            for p in &n.fun_ports {
                let r = PortRef::new(&n.name, p);
                if fed.get(&r) != Some(&1) {
                    return Err(Error::Invalid(format!(
                        "functionality port {r} must be fed exactly once"
                    )));
                }
            }
            for p in &n.res_ports {
                let r = PortRef::new(&n.name, p);
                if used.get(&r) != Some(&1) {
                    return Err(Error::Invalid(format!(
                        "resource port {r} must be consumed exactly once"
                    )));
                }
            }
        }
        // topological order over forward edges: requiring node before provider
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in self.edges.iter().filter(|e| !e.is_loop) {
            let a = self.node_index(&e.from.node).expect("checked");
            let b = self.node_index(&e.to.node).expect("checked");
            succ[a].push(b);
            indeg[b] += 1;
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Invalid(format!(
                "{}: cycle among non-loop edges",
                self.name
            )));
        }
        self.order = order;
        Ok(())
    }

    pub fn loop_edges(&self) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.is_loop).collect()
    }

    pub fn fun_poset(&self) -> Poset {
        Poset::product(
            self.exposed_fun
                .iter()
                .map(|p| {
                    let (n, i) = self.fun_port(p).expect("validated");
                    self.nodes[n].fun_poset(i).clone()
                })
                .collect(),
        )
    }

    pub fn res_poset(&self) -> Poset {
        Poset::product(
            self.exposed_res
                .iter()
                .map(|p| {
                    let (n, i) = self.res_port(p).expect("validated");
                    self.nodes[n].res_poset(i).clone()
                })
                .collect(),
        )
    }

    fn loop_poset(&self) -> Poset {
        Poset::product(
            self.loop_edges()
                .iter()
                .map(|e| {
                    let (n, i) = self.fun_port(&e.to).expect("validated");
                    self.nodes[n].fun_poset(i).clone()
                })
                .collect(),
        )
    }

    /// Evaluates the acyclic part with loop functionalities fixed to
    /// `loop_f`. Returns points over (exposed resources, loop resources).
    fn eval_dag(
        &self,
        demand: &[Value],
        loop_f: &[Value],
    ) -> Result<Vec<(Value, Vec<Implementation>)>> {
        let mut inputs: BTreeMap<PortRef, Value> = BTreeMap::new();
        for (p, v) in self.exposed_fun.iter().zip(demand) {
            inputs.insert(p.clone(), v.clone());
        }
        let loops = self.loop_edges();
        for (e, v) in loops.iter().zip(loop_f) {
            inputs.insert(e.to.clone(), v.clone());
        }
        let feeder: BTreeMap<&PortRef, &PortRef> = self
            .edges
            .iter()
            .filter(|e| !e.is_loop)
            .map(|e| (&e.to, &e.from))
            .collect();
        let mut states = vec![State {
            live: BTreeMap::new(),
            impls: vec![vec![]],
        }];
        for &ni in &self.order {
            let node = &self.nodes[ni];
            let mut next = Vec::new();
            for st in &states {
                let mut live = st.live.clone();
                let mut args = Vec::with_capacity(node.fun_ports.len());
                for p in &node.fun_ports {
                    let r = PortRef::new(&node.name, p);
                    let v = match feeder.get(&r) {
                        Some(src) => live.remove(*src).ok_or_else(|| {
                            Error::Invalid(format!("{src} evaluated out of order"))
                        })?,
                        None => inputs
                            .get(&r)
                            .cloned()
                            .ok_or_else(|| Error::Invalid(format!("no value for {r}")))?,
                    };
                    args.push(v);
                }
                for pt in node.mdpi.h(&node.pack(args))?.points {
                    let mut l2 = live.clone();
                    for (p, v) in node.res_ports.iter().zip(node.unpack(pt.value)?) {
                        l2.insert(PortRef::new(&node.name, p), v);
                    }
                    let impls: Vec<Implementation> = st
                        .impls
                        .iter()
                        .flat_map(|a| pt.impls.iter().map(move |b| concat(a, b)))
                        .collect();
                    next.push(State { live: l2, impls });
                }
            }
            states = self.prune(next);
            if states.is_empty() {
                break;
            }
        }
        let loop_sources: Vec<&PortRef> = loops.iter().map(|e| &e.from).collect();
        let mut out = Vec::with_capacity(states.len());
        for st in states {
            let ext: Option<Vec<Value>> = self
                .exposed_res
                .iter()
                .map(|p| st.live.get(p).cloned())
                .collect();
            let lp: Option<Vec<Value>> = loop_sources
                .iter()
                .map(|p| st.live.get(*p).cloned())
                .collect();
            let (Some(ext), Some(lp)) = (ext, lp) else {
                return Err(Error::Invalid("dangling resource wire".into()));
            };
            out.push((
                Value::Tuple(vec![Value::Tuple(ext), Value::Tuple(lp)]),
                st.impls,
            ));
        }
        Ok(out)
    }

    fn wire_poset(&self, p: &PortRef) -> &Poset {
        let (n, i) = self.res_port(p).expect("live wires are resource ports");
        self.nodes[n].res_poset(i)
    }

    /// Drops states whose live wires are dominated by another state's.
    fn prune(&self, states: Vec<State>) -> Vec<State> {
        let mut merged: BTreeMap<Vec<(PortRef, Value)>, Vec<Implementation>> = BTreeMap::new();
        for s in states {
            let key: Vec<(PortRef, Value)> = s.live.into_iter().collect();
            merged.entry(key).or_default().extend(s.impls);
        }
        let keys: Vec<&Vec<(PortRef, Value)>> = merged.keys().collect();
        let below = |a: &Vec<(PortRef, Value)>, b: &Vec<(PortRef, Value)>| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|((pa, va), (pb, vb))| pa == pb && self.wire_poset(pa).leq(va, vb))
        };
        let keep: Vec<bool> = keys
            .iter()
            .map(|k| !keys.iter().any(|o| o != k && below(o, k)))
            .collect();
        merged
            .into_iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|((key, mut impls), _)| {
                impls.sort();
                impls.dedup();
                State {
                    live: key.into_iter().collect(),
                    impls,
                }
            })
            .collect()
    }
}

/// Minimal antichain of exposed resources for a demanded functionality,
/// solving loop wires by Kleene ascent. An empty antichain certifies
/// infeasibility.
pub fn solve_fix_fun_min_res(diagram: &Diagram, demand: &Value) -> Result<Solution> {
    let fun = diagram.fun_poset();
    if !fun.contains(demand) {
        return Err(Error::PosetMismatch(format!(
            "demand {demand} not in {}",
            fun.name()
        )));
    }
    let demand = demand.tuple().expect("product poset").to_vec();
    let ext = diagram.res_poset();
    let lp = diagram.loop_poset();
    let full = Poset::product(vec![ext.clone(), lp.clone()]);
    let n_loops = diagram.loop_edges().len();
    let mut current = antichain_merge(&full, vec![(full.bottom(), vec![vec![]])])?;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > diagram.kleene_cap {
            return Err(Error::Divergence {
                name: diagram.name.clone(),
                iterations: diagram.kleene_cap,
            });
        }
        let mut pts = Vec::new();
        for s in &current.points {
            let (_, s_loop) = pair(&s.value)?;
            let loop_f = s_loop.tuple().expect("tuple").to_vec();
            for (a, impls) in diagram.eval_dag(&demand, &loop_f)? {
                if let Some(j) = full.join(&a, &s.value) {
                    pts.push((j, impls));
                }
            }
        }
        let next = antichain_merge(&full, pts)?;
        let done = n_loops == 0 || next.value_set() == current.value_set();
        current = next;
        if done {
            break;
        }
    }
    let mut pts = Vec::new();
    for p in current.points {
        let (r, _) = pair(&p.value)?;
        pts.push((r.clone(), p.impls));
    }
    Ok(Solution {
        antichain: antichain_merge(&ext, pts)?,
        kleene_iterations: iterations,
    })
}

/// Maximal antichain of functionalities affordable with `budget`.
pub fn solve_fix_res_max_fun(d: &dyn Mdpi, budget: &Value) -> Result<Antichain> {
    if !d.res().contains(budget) {
        return Err(Error::PosetMismatch(format!(
            "budget {budget} not in {}",
            d.res().name()
        )));
    }
    d.h_dual(budget)
}

/// Wraps a single design problem as a one-node diagram.
pub fn single_node_diagram(
    name: &str,
    mdpi: DynMdpi,
    fun_ports: &[&str],
    res_ports: &[&str],
) -> Result<Diagram> {
    let node = Node {
        name: name.into(),
        mdpi,
        fun_ports: fun_ports.iter().map(|s| s.to_string()).collect(),
        res_ports: res_ports.iter().map(|s| s.to_string()).collect(),
    };
    let ef = fun_ports.iter().map(|p| PortRef::new(name, p)).collect();
    let er = res_ports.iter().map(|p| PortRef::new(name, p)).collect();
    Diagram::new(name, vec![node], vec![], ef, er)
}

#[cfg(test)]
mod tests;
