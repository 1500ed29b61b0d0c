//! Sensor selection and placement as exact multi-weighted set cover.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Cell;
use crate::percperf::{CoverageSet, MountedPipeline};
use crate::percreq::{ReqKey, RequirementSet};
use crate::plot;

/// Resource coordinates of the catalog cost functions, in order.
pub const RESOURCE_NAMES: [&str; 4] = ["price_chf", "mass_kg", "power_w", "compute_gflops"];

/// Two weighted costs closer than this are treated as equal when breaking ties.
pub const COST_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub key: ReqKey,
    pub cell: Cell,
}

impl Atom {
    pub fn theta_idx(&self) -> usize {
        self.cell.theta()
    }

    fn sort_key(&self) -> (&ReqKey, u16, u16, u16) {
        (&self.key, self.cell.2, self.cell.0, self.cell.1)
    }

    pub fn label(&self) -> String {
        let (l, w) = self.key.env.tokens();
        format!(
            "{}/{l}/{w}/θ{}/r{}a{}",
            self.key.class_id, self.cell.2, self.cell.0, self.cell.1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    /// Candidates sharing a group share a mount point; at most one is chosen.
    pub mount_group: String,
    /// Raw resource vector, one entry per cost function.
    pub raw: Vec<f64>,
}

impl Candidate {
    pub fn of_mpp(mpp: &MountedPipeline, raw: Vec<f64>) -> Self {
        Candidate {
            id: mpp.id(),
            mount_group: format!("{}:{}", mpp.body, mpp.mount),
            raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverInstance {
    pub cost_names: Vec<String>,
    pub atoms: Vec<Atom>,
    pub candidates: Vec<Candidate>,
    pub normalizers: Vec<f64>,
    /// Normalized cost vectors in [0, 1]^W.
    pub costs: Vec<Vec<f64>>,
    /// Column view of A: atoms covered per candidate (sorted).
    pub covers: Vec<Vec<usize>>,
    /// Row view of A: candidates covering each atom (sorted).
    pub coverers: Vec<Vec<usize>>,
    /// Rows of F: candidate indices sharing one mount point.
    pub mount_rows: Vec<Vec<usize>>,
}

impl CoverInstance {
    /// Assembles an instance without checking coverability.
    pub fn from_parts(
        cost_names: Vec<String>,
        atoms: Vec<Atom>,
        candidates: Vec<Candidate>,
        covers: Vec<Vec<usize>>,
        normalizers: Vec<f64>,
    ) -> Result<Self> {
        let w = cost_names.len();
        if w == 0 || normalizers.len() != w {
            return Err(Error::Invalid(
                "need one positive normalizer per cost function".into(),
            ));
        }
        if normalizers.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Err(Error::Invalid(
                "normalizers must be positive and finite".into(),
            ));
        }
        if covers.len() != candidates.len() {
            return Err(Error::Invalid(
                "one coverage column per candidate required".into(),
            ));
        }
        let mut costs = Vec::with_capacity(candidates.len());
        for c in &candidates {
            if c.raw.len() != w || c.raw.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::Invalid(format!(
                    "candidate {}: bad resource vector",
                    c.id
                )));
            }
            costs.push(c.raw.iter().zip(&normalizers).map(|(r, n)| r / n).collect());
        }
        let mut coverers = vec![Vec::new(); atoms.len()];
        let mut cols = Vec::with_capacity(covers.len());
        for (l, col) in covers.into_iter().enumerate() {
            let col: BTreeSet<usize> = col.into_iter().collect();
            if col.iter().any(|&n| n >= atoms.len()) {
                return Err(Error::Invalid("coverage refers to a missing atom".into()));
            }
            for &n in &col {
                coverers[n].push(l);
            }
            cols.push(col.into_iter().collect());
        }
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (l, c) in candidates.iter().enumerate() {
            groups.entry(&c.mount_group).or_default().push(l);
        }
        let mount_rows = groups.into_values().collect();
        Ok(CoverInstance {
            cost_names,
            atoms,
            candidates,
            normalizers,
            costs,
            covers: cols,
            coverers,
            mount_rows,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Dense N×L coverage matrix.
    pub fn a_matrix(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.n_candidates()]; self.n_atoms()];
        for (l, col) in self.covers.iter().enumerate() {
            for &n in col {
                a[n][l] = 1;
            }
        }
        a
    }

    /// Dense D×L mount-exclusivity matrix.
    pub fn f_matrix(&self) -> Vec<Vec<u8>> {
        self.mount_rows
            .iter()
            .map(|row| {
                let mut r = vec![0u8; self.n_candidates()];
                for &l in row {
                    r[l] = 1;
                }
                r
            })
            .collect()
    }

    pub fn uncoverable(&self) -> Vec<usize> {
        (0..self.n_atoms())
            .filter(|&n| self.coverers[n].is_empty())
            .collect()
    }

    pub fn weighted_costs(&self, weights: &[f64]) -> Vec<f64> {
        self.costs
            .iter()
            .map(|c| c.iter().zip(weights).map(|(c, w)| c * w).sum())
            .collect()
    }

    /// Independent re-check of A·x ≥ 1 and F·x ≤ 1.
    pub fn is_feasible(&self, chosen: &[usize]) -> bool {
        let set: BTreeSet<usize> = chosen.iter().copied().collect();
        if set.len() != chosen.len() || set.iter().any(|&l| l >= self.n_candidates()) {
            return false;
        }
        let covered = self
            .coverers
            .iter()
            .all(|row| row.iter().any(|l| set.contains(l)));
        let exclusive = self
            .mount_rows
            .iter()
            .all(|row| row.iter().filter(|l| set.contains(l)).count() <= 1);
        covered && exclusive
    }

    pub fn selection(&self, chosen: Vec<usize>, weights: &[f64]) -> Selection {
        let wc = self.weighted_costs(weights);
        let mut chosen = chosen;
        chosen.sort_unstable();
        Selection {
            ids: chosen
                .iter()
                .map(|&l| self.candidates[l].id.clone())
                .collect(),
            weighted_cost: canonical_cost(&wc, &chosen),
            raw: raw_sum(self, &chosen),
            chosen,
        }
    }
}

fn canonical_cost(wc: &[f64], sorted: &[usize]) -> f64 {
    sorted.iter().map(|&l| wc[l]).sum()
}

fn raw_sum(inst: &CoverInstance, sorted: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; inst.cost_names.len()];
    for &l in sorted {
        for (o, r) in out.iter_mut().zip(&inst.candidates[l].raw) {
            *o += r;
        }
    }
    out
}

/// Builds the cover instance for one body from its requirement set and the
/// coverage sets of its mounted pipelines (`raw[l]` belongs to `coverages[l]`).
pub fn build_instance(
    req: &RequirementSet,
    coverages: &[CoverageSet],
    raw: &[Vec<f64>],
    normalizers: &[f64],
) -> Result<CoverInstance> {
    if coverages.len() != raw.len() {
        return Err(Error::Invalid(
            "one resource vector per coverage set required".into(),
        ));
    }
    for c in coverages {
        if c.entries.values().any(|s| s.grid != req.grid) {
            return Err(Error::GridMismatch);
        }
    }
    let mut atoms: Vec<Atom> = req
        .atoms()
        .map(|(k, c)| Atom {
            key: k.clone(),
            cell: c,
        })
        .collect();
    atoms.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let covers = coverages
        .iter()
        .map(|cov| {
            atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| cov.covers(&a.key, &a.cell))
                .map(|(n, _)| n)
                .collect()
        })
        .collect();
    let candidates = coverages
        .iter()
        .zip(raw)
        .map(|(c, r)| Candidate::of_mpp(&c.mpp, r.clone()))
        .collect();
    let inst = CoverInstance::from_parts(
        RESOURCE_NAMES.iter().map(|s| s.to_string()).collect(),
        atoms,
        candidates,
        covers,
        normalizers.to_vec(),
    )?;
    let bad = inst.uncoverable();
    if !bad.is_empty() {
        return Err(Error::Uncoverable(
            bad.iter().map(|&n| inst.atoms[n].label()).collect(),
        ));
    }
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: Vec<usize>,
    pub ids: Vec<String>,
    pub weighted_cost: f64,
    pub raw: Vec<f64>,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut inv, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        inv += (i % base) as f64 * f;
        i /= base;
        f /= base as f64;
    }
    inv
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut k = 2u64;
    while out.len() < n {
        if out.iter().all(|p| !k.is_multiple_of(*p)) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Halton points (index from 1, prime bases) normalized onto the simplex.
pub fn halton_weights(w: usize, n: usize) -> Vec<Vec<f64>> {
    let bases = first_primes(w);
    let mut out = Vec::with_capacity(n);
    let mut i = 1u64;
    while out.len() < n && w > 0 {
        let p: Vec<f64> = bases.iter().map(|&b| radical_inverse(i, b)).collect();
        let s: f64 = p.iter().sum();
        if s > 0.0 {
            out.push(p.iter().map(|x| x / s).collect());
        }
        i += 1;
    }
    out
}

struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn full(n: usize) -> Self {
        let mut b = Bits::new(n);
        for i in 0..n {
            b.set(i);
        }
        b
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn and_count(&self, other: &Bits) -> u32 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }
    fn is_subset(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

impl Clone for Bits {
    fn clone(&self) -> Self {
        Bits(self.0.clone())
    }
}

struct Search<'a> {
    wc: &'a [f64],
    /// reduced rows: candidate bitsets
    rows: Vec<Bits>,
    /// per candidate: reduced-row bitset
    cand_rows: Vec<Bits>,
    /// per candidate: same-mount candidates including itself
    mates: Vec<Vec<usize>>,
    covers_all: Vec<Bits>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn offer(&mut self, chosen: &[usize]) {
        let mut s = chosen.to_vec();
        s.sort_unstable();
        // Redundant leaves are skipped: their irredundant core is reached on
        // another branch at no higher cost.
        for i in 0..s.len() {
            let mut union = Bits::new(self.rows.len());
            for (j, &l) in s.iter().enumerate() {
                if j != i {
                    for (u, c) in union.0.iter_mut().zip(&self.covers_all[l].0) {
                        *u |= c;
                    }
                }
            }
            if union.and_count(&Bits::full(self.rows.len())) == self.rows.len() as u32 {
                return;
            }
        }
        let cost = canonical_cost(self.wc, &s);
        let better = match &self.best {
            None => true,
            Some((bc, bs)) => {
                cost < bc - COST_TIE_TOL || ((cost - bc).abs() <= COST_TIE_TOL && s < *bs)
            }
        };
        if better {
            self.best = Some((cost, s));
        }
    }

    fn bound(&self, uncovered: &Bits, avail: &Bits) -> Option<f64> {
        let n_l: Vec<u32> = self
            .cand_rows
            .iter()
            .map(|r| r.and_count(uncovered))
            .collect();
        let mut lb = 0.0;
        for r in uncovered.ones() {
            let m = self.rows[r]
                .ones()
                .filter(|&l| avail.get(l))
                .map(|l| self.wc[l] / n_l[l] as f64)
                .fold(f64::INFINITY, f64::min);
            if !m.is_finite() {
                return None;
            }
            lb += m;
        }
        Some(lb)
    }

    fn recurse(&mut self, chosen: &mut Vec<usize>, cost: f64, uncovered: &Bits, avail: &Bits) {
        if uncovered.is_empty() {
            self.offer(chosen);
            return;
        }
        let Some(lb) = self.bound(uncovered, avail) else {
            return;
        };
        if let Some((bc, _)) = &self.best {
            if cost + lb > bc + 1e-9 {
                return;
            }
        }
        let row = uncovered
            .ones()
            .min_by_key(|&r| (self.rows[r].and_count(avail), r))
            .expect("nonempty");
        let mut opts: Vec<(f64, usize)> = self.rows[row]
            .ones()
            .filter(|&l| avail.get(l))
            .map(|l| {
                (
                    self.wc[l] / self.cand_rows[l].and_count(uncovered) as f64,
                    l,
                )
            })
            .collect();
        opts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut avail_here = avail.clone();
        for (_, l) in opts {
            let mut next_avail = avail_here.clone();
            for &m in &self.mates[l] {
                next_avail.clear(m);
            }
            let mut next_unc = uncovered.clone();
            for (u, c) in next_unc.0.iter_mut().zip(&self.cand_rows[l].0) {
                *u &= !c;
            }
            chosen.push(l);
            self.recurse(chosen, cost + self.wc[l], &next_unc, &next_avail);
            chosen.pop();
            avail_here.clear(l);
        }
    }
}

/// Exact optimum of the weighted cover with mount exclusivity. Among optimal
/// inclusion-minimal selections the lexicographically smallest index set wins.
pub fn solve_cover(inst: &CoverInstance, weights: &[f64]) -> Result<Selection> {
    if weights.len() != inst.cost_names.len() {
        return Err(Error::Invalid(
            "weight vector length must match the cost functions".into(),
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(
            "weights must be nonnegative and sum to 1".into(),
        ));
    }
    let bad = inst.uncoverable();
    if !bad.is_empty() {
        return Err(Error::Uncoverable(
            bad.iter().map(|&n| inst.atoms[n].label()).collect(),
        ));
    }
    let l_count = inst.n_candidates();
    if inst.n_atoms() == 0 {
        return Ok(inst.selection(vec![], weights));
    }
    // Rows whose coverer set contains another row's are implied by it.
    let mut unique: BTreeMap<Vec<usize>, ()> = BTreeMap::new();
    for row in &inst.coverers {
        unique.insert(row.clone(), ());
    }
    let unique: Vec<Vec<usize>> = unique.into_keys().collect();
    let bitrows: Vec<Bits> = unique
        .iter()
        .map(|r| {
            let mut b = Bits::new(l_count);
            r.iter().for_each(|&l| b.set(l));
            b
        })
        .collect();
    let rows: Vec<Bits> = (0..bitrows.len())
        .filter(|&i| {
            !(0..bitrows.len())
                .any(|j| j != i && bitrows[j].is_subset(&bitrows[i]) && unique[j] != unique[i])
        })
        .map(|i| bitrows[i].clone())
        .collect();
    let mut cand_rows: Vec<Bits> = (0..l_count).map(|_| Bits::new(rows.len())).collect();
    for (r, row) in rows.iter().enumerate() {
        for l in row.ones() {
            cand_rows[l].set(r);
        }
    }
    let mut mates = vec![Vec::new(); l_count];
    for group in &inst.mount_rows {
        for &l in group {
            mates[l] = group.clone();
        }
    }
    let wc = inst.weighted_costs(weights);
    let mut search = Search {
        wc: &wc,
        covers_all: cand_rows.clone(),
        rows,
        cand_rows,
        mates,
        best: None,
    };
    if let Some(g) = greedy(&search) {
        search.offer(&g);
    }
    let uncovered = Bits::full(search.rows.len());
    search.recurse(&mut Vec::new(), 0.0, &uncovered, &Bits::full(l_count));
    match search.best {
        Some((_, s)) => Ok(inst.selection(s, weights)),
        None => Err(Error::CoverInfeasible(format!(
            "mount exclusivity over {} mount point(s) prevents covering every atom",
            inst.mount_rows.len()
        ))),
    }
}

fn greedy(s: &Search) -> Option<Vec<usize>> {
    let mut uncovered = Bits::full(s.rows.len());
    let mut avail = Bits::full(s.cand_rows.len());
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let best = avail
            .ones()
            .filter_map(|l| {
                let n = s.cand_rows[l].and_count(&uncovered);
                (n > 0).then(|| (s.wc[l] / n as f64, l))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?;
        let l = best.1;
        chosen.push(l);
        for &m in &s.mates[l] {
            avail.clear(m);
        }
        for (u, c) in uncovered.0.iter_mut().zip(&s.cand_rows[l].0) {
            *u &= !c;
        }
    }
    Some(chosen)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub raw: Vec<f64>,
    pub selections: Vec<Selection>,
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub cost_names: Vec<String>,
    pub normalizers: Vec<f64>,
    pub points: Vec<ParetoPoint>,
}

/// `a ⪯ b` componentwise.
pub fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// `a` dominates `b`: ≤ everywhere and < somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    weakly_dominates(a, b) && a.iter().zip(b).any(|(x, y)| x < y)
}

fn cmp_vec(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl ParetoFront {
    /// Minimal antichain of the given (resource vector, selection, weight)
    /// triples; equal vectors are merged.
    pub fn from_solutions(
        cost_names: Vec<String>,
        normalizers: Vec<f64>,
        sols: Vec<(Selection, Vec<f64>)>,
    ) -> Self {
        let mut by_raw: Vec<ParetoPoint> = Vec::new();
        for (sel, w) in sols {
            if let Some(p) = by_raw.iter_mut().find(|p| p.raw == sel.raw) {
                if !p.selections.iter().any(|s| s.chosen == sel.chosen) {
                    p.selections.push(sel);
                }
                p.weights.push(w);
            } else {
                by_raw.push(ParetoPoint {
                    raw: sel.raw.clone(),
                    selections: vec![sel],
                    weights: vec![w],
                });
            }
        }
        let snapshot: Vec<Vec<f64>> = by_raw.iter().map(|p| p.raw.clone()).collect();
        let mut points: Vec<ParetoPoint> = by_raw
            .into_iter()
            .filter(|p| !snapshot.iter().any(|q| dominates(q, &p.raw)))
            .collect();
        for p in &mut points {
            p.selections.sort_by(|a, b| a.chosen.cmp(&b.chosen));
        }
        points.sort_by(|a, b| cmp_vec(&a.raw, &b.raw));
        ParetoFront {
            cost_names,
            normalizers,
            points,
        }
    }

    pub fn is_antichain(&self) -> bool {
        self.points.iter().enumerate().all(|(i, p)| {
            self.points
                .iter()
                .enumerate()
                .all(|(j, q)| i == j || !weakly_dominates(&q.raw, &p.raw))
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.cost_names.join(",");
        out.push_str(",selection,weights\n");
        for p in &self.points {
            for s in &p.selections {
                let vals: Vec<String> = p.raw.iter().map(|v| format!("{v}")).collect();
                let w: Vec<String> = p.weights[0].iter().map(|v| format!("{v:.6}")).collect();
                out.push_str(&format!(
                    "{},{},{}\n",
                    vals.join(","),
                    s.ids.join(";"),
                    w.join(";")
                ));
            }
        }
        out
    }

    /// One scatter plot per pair of resource coordinates.
    pub fn to_svgs(&self, title: &str) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let n = self.cost_names.len();
        for i in 0..n {
            for j in i + 1..n {
                let pts: Vec<(f64, f64, String)> = self
                    .points
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (p.raw[i], p.raw[j], format!("{k}")))
                    .collect();
                let name = format!("{}__{}", self.cost_names[i], self.cost_names[j]);
                out.push((
                    name,
                    plot::scatter_svg(title, &self.cost_names[i], &self.cost_names[j], &pts),
                ));
            }
        }
        out
    }
}

/// Weighted-sum sweep over Halton weights; recovers the supported points of
/// the Pareto front.
pub fn pareto_sweep(inst: &CoverInstance, n_weights: usize) -> Result<ParetoFront> {
    let weights = halton_weights(inst.cost_names.len(), n_weights.max(1));
    let sols: Vec<Result<(Selection, Vec<f64>)>> = weights
        .into_par_iter()
        .map(|w| solve_cover(inst, &w).map(|s| (s, w)))
        .collect();
    let mut ok = Vec::with_capacity(sols.len());
    for s in sols {
        ok.push(s?);
    }
    Ok(ParetoFront::from_solutions(
        inst.cost_names.clone(),
        inst.normalizers.clone(),
        ok,
    ))
}

/// Exhaustive reference solvers over all 2^L subsets.
pub mod oracle {
    use super::*;

    pub const MAX_CANDIDATES: usize = 22;

    fn check(inst: &CoverInstance) -> Result<()> {
        if inst.n_candidates() > MAX_CANDIDATES {
            return Err(Error::Invalid(format!(
                "brute force limited to {MAX_CANDIDATES} candidates, got {}",
                inst.n_candidates()
            )));
        }
        Ok(())
    }

    fn subset(mask: u64, l: usize) -> Vec<usize> {
        (0..l).filter(|i| mask >> i & 1 == 1).collect()
    }

    fn irredundant(inst: &CoverInstance, s: &[usize]) -> bool {
        (0..s.len()).all(|i| {
            let rest: Vec<usize> = s
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, l)| *l)
                .collect();
            !inst
                .coverers
                .iter()
                .all(|row| row.iter().any(|l| rest.contains(l)))
        })
    }

    /// Every feasible subset, as sorted index lists.
    pub fn feasible_subsets(inst: &CoverInstance) -> Result<Vec<Vec<usize>>> {
        check(inst)?;
        let l = inst.n_candidates();
        Ok((0u64..1 << l)
            .map(|m| subset(m, l))
            .filter(|s| inst.is_feasible(s))
            .collect())
    }

    pub fn solve(inst: &CoverInstance, weights: &[f64]) -> Result<Option<Selection>> {
        let wc = inst.weighted_costs(weights);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for s in feasible_subsets(inst)? {
            if !irredundant(inst, &s) {
                continue;
            }
            let c = canonical_cost(&wc, &s);
            let better = match &best {
                None => true,
                Some((bc, bs)) => {
                    c < bc - COST_TIE_TOL || ((c - bc).abs() <= COST_TIE_TOL && s < *bs)
                }
            };
            if better {
                best = Some((c, s));
            }
        }
        Ok(best.map(|(_, s)| inst.selection(s, weights)))
    }

    /// Random instance for cross-checks: `l` candidates over `n` atoms with
    /// `w` cost functions; about one candidate in three shares a mount.
    pub fn random_instance(seed: u64, l: usize, n: usize, w: usize) -> CoverInstance {
        use rand::Rng;
        let mut rng = crate::util::keyed_rng(&[0x5e1ec7, seed]);
        let atoms: Vec<Atom> = (0..n)
            .map(|i| Atom {
                key: ReqKey {
                    class_id: "x".into(),
                    env: crate::world::EnvCondition::DAY_DRY,
                },
                cell: Cell(i as u16, 0, 0),
            })
            .collect();
        let n_mounts = (l - l / 3).max(1);
        let candidates: Vec<Candidate> = (0..l)
            .map(|i| Candidate {
                id: format!("c{i}"),
                mount_group: format!(
                    "m{}",
                    if i < n_mounts {
                        i
                    } else {
                        rng.random_range(0..n_mounts)
                    }
                ),
                raw: (0..w)
                    .map(|_| (rng.random_range(1..=100) as f64) / 10.0)
                    .collect(),
            })
            .collect();
        let density = rng.random_range(0.15..0.6);
        let covers = (0..l)
            .map(|_| (0..n).filter(|_| rng.random_bool(density)).collect())
            .collect();
        CoverInstance::from_parts(
            (0..w).map(|j| format!("r{j}")).collect(),
            atoms,
            candidates,
            covers,
            vec![10.0; w],
        )
        .expect("well-formed random instance")
    }

    /// Raw resource vectors of the true Pareto front.
    pub fn front(inst: &CoverInstance) -> Result<Vec<Vec<f64>>> {
        let vecs: Vec<Vec<f64>> = feasible_subsets(inst)?
            .iter()
            .map(|s| raw_sum(inst, s))
            .collect();
        let mut out: Vec<Vec<f64>> = vecs
            .iter()
            .filter(|v| !vecs.iter().any(|q| dominates(q, v)))
            .cloned()
            .collect();
        out.sort_by(|a, b| cmp_vec(a, b));
        out.dedup();
        Ok(out)
    }
}
