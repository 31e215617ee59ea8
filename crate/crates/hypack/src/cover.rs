//! Edge-disjoint near-spanning collections of L-cycles and L-paths, from a
//! fractional cycle decomposition and a randomized greedy matching in the
//! blow-up graph whose edges are (cycle, collection) pairs.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hgraph::Hypergraph;
use crate::tight::{canonical_cycle, cycle_edges, is_tight_cycle, KType, PathCollection};

struct CycleSearch<'a> {
    h: &'a Hypergraph,
    l: usize,
    limit: usize,
    seq: Vec<usize>,
    used: Vec<bool>,
    out: Vec<Vec<usize>>,
    overflow: bool,
}

impl CycleSearch<'_> {
    fn closes(&self) -> bool {
        let k = self.h.k();
        let n = self.seq.len();
        (1..k).all(|i| {
            let w: Vec<usize> = (0..k).map(|j| self.seq[(n - k + i + j) % n]).collect();
            self.h.contains_edge(&w)
        })
    }

    fn run(&mut self) {
        if self.overflow {
            return;
        }
        let k = self.h.k();
        if self.seq.len() == self.l {
            if self.seq[1] < self.seq[self.l - 1] && self.closes() {
                if self.out.len() == self.limit {
                    self.overflow = true;
                    return;
                }
                self.out.push(self.seq.clone());
            }
            return;
        }
        let start = self.seq[0];
        for &v in self.h.vertices() {
            if v <= start || self.used[v] {
                continue;
            }
            if self.seq.len() >= k - 1 {
                let mut w = self.seq[self.seq.len() + 1 - k..].to_vec();
                w.push(v);
                if !self.h.contains_edge(&w) {
                    continue;
                }
            }
            self.used[v] = true;
            self.seq.push(v);
            self.run();
            self.seq.pop();
            self.used[v] = false;
        }
    }
}

/// All L-cycles in canonical form, or `None` if there are more than `limit`.
pub fn enumerate_cycles(h: &Hypergraph, l: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    if l <= h.k() {
        return Some(Vec::new());
    }
    let mut s = CycleSearch { h, l, limit, seq: Vec::new(), used: vec![false; h.universe()], out: Vec::new(), overflow: false };
    for &v in h.vertices() {
        s.seq = vec![v];
        s.used[v] = true;
        s.run();
        s.used[v] = false;
        if s.overflow {
            return None;
        }
    }
    Some(s.out)
}

fn random_cycle_through<R: Rng>(h: &Hypergraph, l: usize, e: &[usize], budget: &mut usize, rng: &mut R) -> Option<Vec<usize>> {
    let k = h.k();
    let mut seq = e.to_vec();
    seq.shuffle(rng);
    let mut used = vec![false; h.universe()];
    for &v in &seq {
        used[v] = true;
    }
    fn go<R: Rng>(h: &Hypergraph, l: usize, k: usize, seq: &mut Vec<usize>, used: &mut [bool], budget: &mut usize, rng: &mut R) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        if seq.len() == l {
            return is_tight_cycle(h, seq);
        }
        let tail = seq[seq.len() + 1 - k..].to_vec();
        let mut cands = h.neighborhood(&{
            let mut t = tail.clone();
            t.sort_unstable();
            t
        })
        .unwrap_or_default();
        cands.retain(|&v| !used[v]);
        cands.shuffle(rng);
        for v in cands {
            used[v] = true;
            seq.push(v);
            if go(h, l, k, seq, used, budget, rng) {
                return true;
            }
            seq.pop();
            used[v] = false;
        }
        false
    }
    go(h, l, k, &mut seq, &mut used, budget, rng).then(|| canonical_cycle(&seq))
}

/// Options for building the cycle family the LP runs over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyOpts {
    /// Enumerate exhaustively when there are at most this many L-cycles.
    pub limit: usize,
    /// Otherwise sample this many cycles through every edge.
    pub per_edge: usize,
    /// DFS node budget per sampled cycle.
    pub budget: usize,
    pub seed: u64,
}

impl Default for FamilyOpts {
    fn default() -> Self {
        Self { limit: 20_000, per_edge: 8, budget: 4_000, seed: 0 }
    }
}

/// Exhaustive L-cycle family when small enough, else a per-edge random sample.
pub fn cycle_family(h: &Hypergraph, l: usize, opts: &FamilyOpts) -> Vec<Vec<usize>> {
    if let Some(all) = enumerate_cycles(h, l, opts.limit) {
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for e in h.edges() {
        for _ in 0..opts.per_edge {
            let mut budget = opts.budget;
            if let Some(c) = random_cycle_through(h, l, e, &mut budget, &mut rng) {
                seen.insert(c);
            }
        }
    }
    seen.into_iter().collect()
}

/// Nonnegative weights on L-cycles; per-edge sums are 1 for a decomposition
/// and at most 1 for a packing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionalCycleDecomposition {
    pub l: usize,
    pub cycles: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub exact: bool,
}

impl FractionalCycleDecomposition {
    /// `Σ_{C ∋ e} ω(C)` per edge id of `h`.
    pub fn edge_sums(&self, h: &Hypergraph) -> Vec<f64> {
        let mut sums = vec![0.0; h.m()];
        for (c, &w) in self.cycles.iter().zip(&self.weights) {
            for e in cycle_edges(c, h.k()) {
                if let Some(id) = h.edge_id(&e) {
                    sums[id] += w;
                }
            }
        }
        sums
    }

    pub fn max_edge_error(&self, h: &Hypergraph) -> f64 {
        self.edge_sums(h).iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `(min, max)` over positive weights.
    pub fn weight_range(&self) -> (f64, f64) {
        self.weights
            .iter()
            .filter(|&&w| w > 0.0)
            .fold((f64::INFINITY, 0.0), |(lo, hi), &w| (lo.min(w), hi.max(w)))
    }

    pub fn support(&self) -> Vec<(Vec<usize>, f64)> {
        self.cycles.iter().cloned().zip(self.weights.iter().copied()).filter(|(_, w)| *w > 1e-12).collect()
    }
}

const EDGE_TOL: f64 = 1e-9;

fn cycle_lp(h: &Hypergraph, l: usize, family: Vec<Vec<usize>>, exact: bool) -> Result<FractionalCycleDecomposition> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    let k = h.k();
    let ids: Vec<Vec<usize>> = family
        .iter()
        .map(|c| cycle_edges(c, k).iter().map(|e| h.edge_id(e).expect("family cycles lie in the host")).collect())
        .collect();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); h.m()];
    for (ci, es) in ids.iter().enumerate() {
        for &e in es {
            rows[e].push(ci);
        }
    }
    if exact {
        if let Some(id) = rows.iter().position(|r| r.is_empty()) {
            return Err(Error::Infeasible(format!("edge {:?} lies on no {l}-cycle of the family", h.edge(id))));
        }
    }
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let obj = if exact { 0.0 } else { 1.0 };
    let vars: Vec<_> = family.iter().map(|_| p.add_var(obj, (0.0, f64::INFINITY))).collect();
    for row in rows.iter().filter(|r| !r.is_empty()) {
        let expr: Vec<_> = row.iter().map(|&c| (vars[c], 1.0)).collect();
        p.add_constraint(expr, if exact { ComparisonOp::Eq } else { ComparisonOp::Le }, 1.0);
    }
    let sol = p
        .solve()
        .map_err(|e| Error::Infeasible(format!("cycle LP: {e}")))?
        .into_solution()
        .map_err(|_| Error::Infeasible("cycle LP interrupted".into()))?;
    let weights: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
    let out = FractionalCycleDecomposition { l, cycles: family, weights, exact };
    if exact && out.max_edge_error(h) > EDGE_TOL {
        return Err(Error::Infeasible(format!("per-edge sums off by {:.2e}", out.max_edge_error(h))));
    }
    Ok(out)
}

/// Fractional L-cycle decomposition over the family from `opts`, by LP.
pub fn fractional_cycle_decomposition(h: &Hypergraph, l: usize, opts: &FamilyOpts) -> Result<FractionalCycleDecomposition> {
    if l <= h.k() {
        return Err(Error::Param(format!("cycle length {l} must exceed k = {}", h.k())));
    }
    cycle_lp(h, l, cycle_family(h, l, opts), true)
}

/// Largest fractional L-cycle packing (per-edge sums at most 1) over the same family.
pub fn fractional_cycle_packing(h: &Hypergraph, l: usize, opts: &FamilyOpts) -> Result<FractionalCycleDecomposition> {
    if l <= h.k() {
        return Err(Error::Param(format!("cycle length {l} must exceed k = {}", h.k())));
    }
    let family = cycle_family(h, l, opts);
    if family.is_empty() {
        return Err(Error::Infeasible(format!("no {l}-cycles")));
    }
    cycle_lp(h, l, family, false)
}

/// Coverage and type-occupancy gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverGates {
    pub mu: f64,
    pub cap_con: f64,
    pub cap_end: f64,
    pub retries: usize,
}

impl Default for CoverGates {
    fn default() -> Self {
        Self { mu: 0.2, cap_con: 1.0, cap_end: 1.0, retries: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub collections: Vec<Vec<Vec<usize>>>,
    pub coverage: Vec<usize>,
    pub gates_met: bool,
    pub attempts: usize,
}

/// `r` edge-disjoint collections of vertex-disjoint cycles: a greedy matching over
/// (cycle, collection) pairs taken in exponential-clock order with rate `ω(C)`.
pub fn extract_cycle_collections(
    h: &Hypergraph,
    frac: &FractionalCycleDecomposition,
    r: usize,
    gates: &CoverGates,
    seed: u64,
) -> Result<Extraction> {
    let k = h.k();
    let min_deg = h.vertices().iter().map(|&v| h.degree(v)).min().unwrap_or(0);
    if r * k > min_deg {
        return Err(Error::Param(format!("r = {r} exceeds min degree / k = {}", min_deg / k)));
    }
    if r == 0 {
        return Ok(Extraction { collections: Vec::new(), coverage: Vec::new(), gates_met: true, attempts: 0 });
    }
    let support = frac.support();
    let edge_ids: Vec<Vec<usize>> = support
        .iter()
        .map(|(c, _)| cycle_edges(c, k).iter().map(|e| h.edge_id(e).expect("cycle in host")).collect())
        .collect();
    let need = ((1.0 - gates.mu) * h.n() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Extraction> = None;
    for attempt in 1..=gates.retries.max(1) {
        let mut items: Vec<(f64, usize, usize)> = Vec::with_capacity(support.len() * r);
        for (ci, (_, w)) in support.iter().enumerate() {
            for i in 0..r {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                items.push((-u.ln() / w, ci, i));
            }
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut edge_used = vec![false; h.m()];
        let mut vert_used = vec![vec![false; h.universe()]; r];
        let mut collections: Vec<Vec<Vec<usize>>> = vec![Vec::new(); r];
        for (_, ci, i) in items {
            let c = &support[ci].0;
            if c.iter().any(|&v| vert_used[i][v]) || edge_ids[ci].iter().any(|&e| edge_used[e]) {
                continue;
            }
            for &v in c {
                vert_used[i][v] = true;
            }
            for &e in &edge_ids[ci] {
                edge_used[e] = true;
            }
            collections[i].push(c.clone());
        }
        let coverage: Vec<usize> = collections.iter().map(|cs| cs.iter().map(|c| c.len()).sum()).collect();
        let gates_met = coverage.iter().all(|&c| c >= need);
        let ext = Extraction { collections, coverage, gates_met, attempts: attempt };
        if gates_met {
            return Ok(ext);
        }
        let better = best.as_ref().is_none_or(|b| ext.coverage.iter().min() > b.coverage.iter().min());
        if better {
            best = Some(ext);
        }
    }
    let mut b = best.expect("at least one attempt");
    b.attempts = gates.retries.max(1);
    Ok(b)
}

/// Tight cycles, vertex-disjoint within a collection, edge-disjoint across all.
pub fn validate_collections(h: &Hypergraph, collections: &[Vec<Vec<usize>>]) -> Result<()> {
    let mut edges: HashSet<Vec<usize>> = HashSet::new();
    for (i, col) in collections.iter().enumerate() {
        let mut seen = HashSet::new();
        for c in col {
            if !is_tight_cycle(h, c) {
                return Err(Error::Domain(format!("collection {i}: {c:?} is not a tight cycle")));
            }
            for &v in c {
                if !seen.insert(v) {
                    return Err(Error::Domain(format!("collection {i}: vertex {v} repeated")));
                }
            }
            for e in cycle_edges(c, h.k()) {
                if !edges.insert(e.clone()) {
                    return Err(Error::Domain(format!("edge {e:?} used twice")));
                }
            }
        }
    }
    Ok(())
}

/// Delete `k-1` consecutive edges of a cycle at a uniformly random rotation.
pub fn open_cycle<R: Rng>(c: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    let l = c.len();
    let r = rng.gen_range(0..l);
    (0..l).map(|j| c[(r + k - 1 + j) % l]).collect()
}

/// Largest `|I_τ(e)|` over k-sets `e`, per type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeSummary {
    pub max_lo: usize,
    /// `max_con[j-1]` for j in 1..=k.
    pub max_con: Vec<usize>,
    pub max_end: Vec<usize>,
    pub gates_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBundle {
    pub k: usize,
    pub n: usize,
    pub collections: Vec<Vec<Vec<usize>>>,
    pub coverage: Vec<usize>,
    pub types: TypeSummary,
}

impl CoverBundle {
    pub fn path_collections(&self) -> Vec<PathCollection> {
        self.collections
            .iter()
            .map(|c| PathCollection::new(self.k, c.clone()).expect("paths of a collection are disjoint"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }
}

/// `|I_τ(e)|` for every type occurring at `e`.
pub fn type_counts(cols: &[PathCollection], e: &[usize]) -> BTreeMap<KType, usize> {
    let mut out = BTreeMap::new();
    for c in cols {
        *out.entry(c.classify(e)).or_default() += 1;
    }
    out
}

fn summarize(h: &Hypergraph, cols: &[PathCollection], gates: &CoverGates) -> TypeSummary {
    let k = h.k();
    let n = h.n() as f64;
    let r = cols.len() as f64;
    let mut s = TypeSummary { max_lo: 0, max_con: vec![0; k], max_end: vec![0; k], gates_met: true };
    for e in h.vertices().iter().copied().combinations(k) {
        for (t, c) in type_counts(cols, &e) {
            match t {
                KType::Leftover => s.max_lo = s.max_lo.max(c),
                KType::Con(j) => s.max_con[j - 1] = s.max_con[j - 1].max(c),
                KType::End(j) => s.max_end[j - 1] = s.max_end[j - 1].max(c),
            }
        }
    }
    let lo_ok = s.max_lo as f64 <= gates.mu * r;
    let con_ok = (1..=k).all(|j| s.max_con[j - 1] as f64 <= gates.cap_con * n.powi((k - j).max(1) as i32));
    let end_ok = (1..k).all(|j| s.max_end[j - 1] as f64 <= gates.cap_end * n.powi((k - j) as i32));
    s.gates_met = lo_ok && con_ok && end_ok;
    s
}

/// Open every cycle into a path and tabulate type statistics.
pub fn cycles_to_paths(h: &Hypergraph, collections: &[Vec<Vec<usize>>], gates: &CoverGates, seed: u64) -> CoverBundle {
    let k = h.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paths: Vec<Vec<Vec<usize>>> =
        collections.iter().map(|col| col.iter().map(|c| open_cycle(c, k, &mut rng)).collect()).collect();
    let coverage = paths.iter().map(|c| c.iter().map(|p| p.len()).sum()).collect();
    let cols: Vec<PathCollection> = paths.iter().map(|c| PathCollection::new(k, c.clone()).expect("disjoint")).collect();
    let types = summarize(h, &cols, gates);
    CoverBundle { k, n: h.n(), collections: paths, coverage, types }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverRun {
    pub cycles: Extraction,
    pub bundle: CoverBundle,
    pub weight_range: (f64, f64),
    pub exact: bool,
}

/// Decomposition (or packing fallback), extraction, and conversion in one call.
pub fn cover(h: &Hypergraph, l: usize, r: usize, opts: &FamilyOpts, gates: &CoverGates, seed: u64) -> Result<CoverRun> {
    let frac = match fractional_cycle_decomposition(h, l, opts) {
        Ok(f) => f,
        Err(Error::Infeasible(_)) => fractional_cycle_packing(h, l, opts)?,
        Err(e) => return Err(e),
    };
    let cycles = extract_cycle_collections(h, &frac, r, gates, seed)?;
    validate_collections(h, &cycles.collections)?;
    let bundle = cycles_to_paths(h, &cycles.collections, gates, seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(CoverRun { cycles, bundle, weight_range: frac.weight_range(), exact: frac.exact })
}
