//! Uniform hypergraphs with degree, codegree and neighbourhood queries.
//!
//! Vertices are dense integer ids below a fixed universe size. Subgraphs keep
//! the ids of their parent and carry an explicit vertex set, so `induced` on
//! `{0,1,2,3}` of `K_5^(3)` compares equal to `K_4^(3)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use itertools::Itertools;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

/// Cap on `n^j` above which the `j`-subset index is not materialised.
pub const DEFAULT_INDEX_CAP: usize = 10_000_000;

type SubsetIndex = HashMap<Vec<usize>, Vec<usize>>;

#[derive(Debug, Clone)]
pub struct Hypergraph {
    k: usize,
    universe: usize,
    vertices: Vec<usize>,
    member: Vec<bool>,
    edges: Vec<Vec<usize>>,
    edge_index: HashMap<Vec<usize>, usize>,
    incidence: Vec<Vec<usize>>,
    index_cap: usize,
    codegree_index: Vec<OnceLock<Option<SubsetIndex>>>,
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.vertices == other.vertices && self.edges == other.edges
    }
}

impl Eq for Hypergraph {}

impl Hypergraph {
    /// Builds a k-graph on vertices `0..n`. Edges may list vertices in any order.
    pub fn new<I, E>(k: usize, n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: AsRef<[usize]>,
    {
        Self::on_vertices(k, n, (0..n).collect(), edges)
    }

    /// Builds a k-graph whose vertex set is `vertices`, a subset of `0..universe`.
    pub fn on_vertices<I, E>(k: usize, universe: usize, vertices: Vec<usize>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: AsRef<[usize]>,
    {
        if k < 2 {
            return Err(Error::Domain(format!("uniformity {k} < 2")));
        }
        let mut member = vec![false; universe];
        for &v in &vertices {
            if v >= universe {
                return Err(Error::Domain(format!("vertex {v} outside universe {universe}")));
            }
            if member[v] {
                return Err(Error::Domain(format!("vertex {v} listed twice")));
            }
            member[v] = true;
        }
        let mut vertices = vertices;
        vertices.sort_unstable();
        let mut list = Vec::new();
        for e in edges {
            let mut e = e.as_ref().to_vec();
            if e.len() != k {
                return Err(Error::Domain(format!("edge {e:?} does not have {k} vertices")));
            }
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Domain(format!("edge {e:?} repeats a vertex")));
            }
            if let Some(&v) = e.iter().find(|&&v| v >= universe || !member[v]) {
                return Err(Error::Domain(format!("edge {e:?} uses vertex {v} outside the vertex set")));
            }
            list.push(e);
        }
        list.sort_unstable();
        for w in list.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge(w[0].clone()));
            }
        }
        Ok(Self::from_sorted(k, universe, vertices, member, list))
    }

    fn from_sorted(k: usize, universe: usize, vertices: Vec<usize>, member: Vec<bool>, edges: Vec<Vec<usize>>) -> Self {
        let mut incidence = vec![Vec::new(); universe];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (id, e) in edges.iter().enumerate() {
            edge_index.insert(e.clone(), id);
            for &v in e {
                incidence[v].push(id);
            }
        }
        Self {
            k,
            universe,
            vertices,
            member,
            edges,
            edge_index,
            incidence,
            index_cap: DEFAULT_INDEX_CAP,
            codegree_index: (0..k).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn complete(k: usize, n: usize) -> Self {
        let edges: Vec<Vec<usize>> = (0..n).combinations(k).collect();
        Self::from_sorted(k, n, (0..n).collect(), vec![true; n], edges)
    }

    pub fn empty(k: usize, n: usize) -> Self {
        Self::from_sorted(k, n, (0..n).collect(), vec![true; n], Vec::new())
    }

    /// The tight cycle `0,1,...,n-1` as a hypergraph.
    pub fn tight_cycle(k: usize, n: usize) -> Result<Self> {
        if n < k + 1 {
            return Err(Error::Domain(format!("tight cycle needs at least {} vertices", k + 1)));
        }
        let edges: Vec<Vec<usize>> = (0..n).map(|i| (0..k).map(|j| (i + j) % n).collect()).collect();
        Self::new(k, n, edges)
    }

    pub fn with_index_cap(mut self, cap: usize) -> Self {
        self.index_cap = cap;
        self.codegree_index = (0..self.k).map(|_| OnceLock::new()).collect();
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of vertices in the vertex set.
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    /// Upper bound on vertex ids.
    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn has_vertex(&self, v: usize) -> bool {
        v < self.universe && self.member[v]
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &[usize] {
        &self.edges[id]
    }

    /// Id of the edge spanned by `set`, in any order.
    pub fn edge_id(&self, set: &[usize]) -> Option<usize> {
        if set.len() != self.k {
            return None;
        }
        let mut key = set.to_vec();
        key.sort_unstable();
        self.edge_index.get(&key).copied()
    }

    pub fn contains_edge(&self, set: &[usize]) -> bool {
        self.edge_id(set).is_some()
    }

    /// Edge ids containing `v`.
    pub fn incident(&self, v: usize) -> &[usize] {
        if v < self.universe {
            &self.incidence[v]
        } else {
            &[]
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident(v).len()
    }

    fn check_subset(&self, x: &[usize]) -> Result<Vec<usize>> {
        if x.is_empty() || x.len() >= self.k {
            return Err(Error::Domain(format!("subset size {} not in [1, {}]", x.len(), self.k - 1)));
        }
        let mut s = x.to_vec();
        s.sort_unstable();
        if s.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(format!("subset {x:?} repeats a vertex")));
        }
        if let Some(&v) = s.iter().find(|&&v| !self.has_vertex(v)) {
            return Err(Error::Domain(format!("invalid vertex {v}")));
        }
        Ok(s)
    }

    fn index_for(&self, j: usize) -> Option<&SubsetIndex> {
        self.codegree_index[j]
            .get_or_init(|| {
                let size = (self.universe as f64).powi(j as i32);
                if size > self.index_cap as f64 {
                    return None;
                }
                let mut idx: SubsetIndex = HashMap::new();
                for (id, e) in self.edges.iter().enumerate() {
                    for sub in e.iter().copied().combinations(j) {
                        idx.entry(sub).or_default().push(id);
                    }
                }
                Some(idx)
            })
            .as_ref()
    }

    /// Ids of edges containing every vertex of `x` (`1 <= |x| <= k-1`).
    pub fn containing_edges(&self, x: &[usize]) -> Result<Vec<usize>> {
        let s = self.check_subset(x)?;
        Ok(self.containing_sorted(&s))
    }

    fn containing_sorted(&self, s: &[usize]) -> Vec<usize> {
        if let Some(idx) = self.index_for(s.len()) {
            return idx.get(s).cloned().unwrap_or_default();
        }
        let pivot = s.iter().copied().min_by_key(|&v| self.incidence[v].len()).unwrap();
        self.incidence[pivot]
            .iter()
            .copied()
            .filter(|&id| s.iter().all(|v| self.edges[id].binary_search(v).is_ok()))
            .collect()
    }

    /// `d_H(x)`: number of edges containing `x`.
    pub fn codegree(&self, x: &[usize]) -> Result<usize> {
        Ok(self.containing_edges(x)?.len())
    }

    /// `N_H(x)` for a (k-1)-set `x`, sorted.
    pub fn neighborhood(&self, x: &[usize]) -> Result<Vec<usize>> {
        if x.len() != self.k - 1 {
            return Err(Error::Domain(format!("neighbourhood needs a {}-set", self.k - 1)));
        }
        let s = self.check_subset(x)?;
        let mut out: Vec<usize> = self
            .containing_sorted(&s)
            .into_iter()
            .map(|id| *self.edges[id].iter().find(|v| s.binary_search(v).is_err()).unwrap())
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// All (k-1)-subsets of the vertex set, lexicographic.
    pub fn ksets_minus_one(&self) -> Vec<Vec<usize>> {
        self.vertices.iter().copied().combinations(self.k - 1).collect()
    }

    /// Minimum (k-1)-codegree over the vertex set.
    pub fn min_codegree(&self) -> usize {
        if self.n() < self.k - 1 {
            return 0;
        }
        self.ksets_minus_one()
            .iter()
            .map(|x| self.containing_sorted(x).len())
            .min()
            .unwrap_or(0)
    }

    /// Subgraph induced on `u`.
    pub fn induced(&self, u: &[usize]) -> Result<Hypergraph> {
        let mut keep = vec![false; self.universe];
        for &v in u {
            if !self.has_vertex(v) {
                return Err(Error::Domain(format!("vertex {v} not in the graph")));
            }
            keep[v] = true;
        }
        let mut verts: Vec<usize> = u.to_vec();
        verts.sort_unstable();
        verts.dedup();
        let edges: Vec<Vec<usize>> = self.edges.iter().filter(|e| e.iter().all(|&v| keep[v])).cloned().collect();
        Ok(Self::from_sorted(self.k, self.universe, verts, keep, edges))
    }

    /// Subgraph induced on the vertex set minus `removed`.
    pub fn without_vertices(&self, removed: &[usize]) -> Result<Hypergraph> {
        let mut gone = vec![false; self.universe];
        for &v in removed {
            if v < self.universe {
                gone[v] = true;
            }
        }
        let keep: Vec<usize> = self.vertices.iter().copied().filter(|&v| !gone[v]).collect();
        self.induced(&keep)
    }

    /// `H - S` for a set of edge ids `S`.
    pub fn remove_edges(&self, ids: &[usize]) -> Result<Hypergraph> {
        let mut drop = vec![false; self.m()];
        for &id in ids {
            if id >= self.m() {
                return Err(Error::Domain(format!("edge id {id} out of range")));
            }
            drop[id] = true;
        }
        let edges = self.edges.iter().enumerate().filter(|(i, _)| !drop[*i]).map(|(_, e)| e.clone()).collect();
        Ok(Self::from_sorted(self.k, self.universe, self.vertices.clone(), self.member.clone(), edges))
    }

    /// `H - S` where `S` is given as vertex tuples; tuples that are not edges are ignored.
    pub fn remove_edge_sets<E: AsRef<[usize]>>(&self, sets: &[E]) -> Hypergraph {
        let ids: Vec<usize> = sets.iter().filter_map(|e| self.edge_id(e.as_ref())).collect();
        self.remove_edges(&ids).expect("ids come from this graph")
    }

    /// Spanning subgraph keeping the given edge ids.
    pub fn spanning(&self, ids: &[usize]) -> Hypergraph {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let edges = ids.iter().map(|&i| self.edges[i].clone()).collect();
        Self::from_sorted(self.k, self.universe, self.vertices.clone(), self.member.clone(), edges)
    }

    /// Applies a vertex relabelling `perm` (a permutation of `0..universe`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Hypergraph> {
        let vertices: Vec<usize> = self.vertices.iter().map(|&v| perm[v]).collect();
        let edges: Vec<Vec<usize>> = self.edges.iter().map(|e| e.iter().map(|&v| perm[v]).collect()).collect();
        Self::on_vertices(self.k, self.universe, vertices, edges)
    }

    /// Parses the text format: a `k n m` header then `m` lines of `k` ids.
    pub fn parse(text: &str) -> Result<Hypergraph> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let nums = parse_ints(header, hl + 1)?;
        if nums.len() != 3 {
            return Err(Error::Parse { line: hl + 1, msg: "header must be `k n m`".into() });
        }
        let (k, n, m) = (nums[0], nums[1], nums[2]);
        if k < 2 {
            return Err(Error::Parse { line: hl + 1, msg: format!("uniformity {k} < 2") });
        }
        let mut edges = Vec::with_capacity(m);
        let mut seen = HashMap::with_capacity(m);
        for (i, line) in lines {
            let e = parse_ints(line, i + 1)?;
            if e.len() != k {
                return Err(Error::Parse { line: i + 1, msg: format!("expected {k} vertex ids, found {}", e.len()) });
            }
            if let Some(&v) = e.iter().find(|&&v| v >= n) {
                return Err(Error::Parse { line: i + 1, msg: format!("vertex {v} out of range 0..{n}") });
            }
            let mut key = e.clone();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Parse { line: i + 1, msg: "repeated vertex in edge".into() });
            }
            if let Some(prev) = seen.insert(key.clone(), i + 1) {
                return Err(Error::Parse { line: i + 1, msg: format!("duplicate edge {key:?} (first on line {prev})") });
            }
            edges.push(key);
        }
        if edges.len() != m {
            return Err(Error::Parse { line: hl + 1, msg: format!("header declares {m} edges, found {}", edges.len()) });
        }
        Hypergraph::new(k, n, edges)
    }

    /// Writes the text format with sorted edges in lexicographic order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.k, self.universe, self.m());
        for e in &self.edges {
            let _ = writeln!(s, "{}", e.iter().map(|v| v.to_string()).join(" "));
        }
        s
    }
}

fn parse_ints(line: &str, lineno: usize) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse { line: lineno, msg: format!("bad integer `{t}`") }))
        .collect()
}

/// Dense bitset over vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Bits(Vec<u64>);

impl Bits {
    pub fn new(universe: usize) -> Self {
        Bits(vec![0; universe.div_ceil(64).max(1)])
    }
    pub fn set(&mut self, v: usize) {
        self.0[v / 64] |= 1 << (v % 64);
    }
    pub fn and_count(&self, o: &Bits) -> usize {
        self.0.iter().zip(&o.0).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }
    pub fn and_count_masked(&self, o: &Bits, mask: &Bits) -> usize {
        self.0.iter().zip(&o.0).zip(&mask.0).map(|((a, b), c)| (a & b & c).count_ones() as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub degrees: Vec<usize>,
    /// `k|E|/n`.
    pub r_mean: Ratio<i64>,
    /// `max_v |d(v)/r_mean - 1|`.
    pub rho_star: Ratio<i64>,
    /// Minimum `|N(x) ∩ N(y)|` over distinct (k-1)-sets.
    pub eta_count: Option<usize>,
    /// Minimum `|N(x) ∩ N(y)|` over disjoint (k-1)-sets.
    pub eta_disjoint_count: Option<usize>,
    pub delta_codegree: usize,
}

impl RegularityReport {
    pub fn r_mean_f64(&self) -> f64 {
        ratio_f64(&self.r_mean)
    }
    pub fn rho(&self) -> f64 {
        ratio_f64(&self.rho_star)
    }
    /// All-pairs intersection density, absent when `n < 2(k-1)`.
    pub fn eta_star(&self) -> Option<f64> {
        self.eta_count.map(|c| c as f64 / self.n as f64)
    }
    pub fn eta_disjoint(&self) -> Option<f64> {
        self.eta_disjoint_count.map(|c| c as f64 / self.n as f64)
    }
}

pub(crate) fn ratio_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Neighbourhood bitsets of every (k-1)-set, in `ksets_minus_one` order.
pub(crate) fn neighborhood_bits(h: &Hypergraph) -> (Vec<Vec<usize>>, Vec<Bits>) {
    let sets = h.ksets_minus_one();
    let bits = sets
        .iter()
        .map(|x| {
            let mut b = Bits::new(h.universe());
            for id in h.containing_sorted(x) {
                for &v in h.edge(id) {
                    if x.binary_search(&v).is_err() {
                        b.set(v);
                    }
                }
            }
            b
        })
        .collect();
    (sets, bits)
}

/// Degrees, regularity and intersection statistics of `h`.
pub fn regularity_report(h: &Hypergraph) -> RegularityReport {
    let (k, n, m) = (h.k(), h.n(), h.m());
    let degrees: Vec<usize> = h.vertices().iter().map(|&v| h.degree(v)).collect();
    let km = (k * m) as i64;
    let (r_mean, rho_star) = if n == 0 || m == 0 {
        (Ratio::from_integer(0), Ratio::from_integer(0))
    } else {
        let worst = degrees.iter().map(|&d| (d as i64 * n as i64 - km).abs()).max().unwrap_or(0);
        (Ratio::new(km, n as i64), Ratio::new(worst, km))
    };
    let (sets, bits) = neighborhood_bits(h);
    let delta_codegree = bits.iter().map(|b| b.and_count(b)).min().unwrap_or(0);
    let (mut all, mut disjoint) = (None::<usize>, None::<usize>);
    if n >= 2 * (k - 1) {
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                let c = bits[i].and_count(&bits[j]);
                all = Some(all.map_or(c, |a| a.min(c)));
                if sets[i].iter().all(|v| sets[j].binary_search(v).is_err()) {
                    disjoint = Some(disjoint.map_or(c, |a| a.min(c)));
                }
            }
        }
    }
    RegularityReport { k, n, m, degrees, r_mean, rho_star, eta_count: all, eta_disjoint_count: disjoint, delta_codegree }
}

#[derive(Debug, Clone, Serialize)]
pub struct SetTransfer {
    pub set: Vec<usize>,
    pub observed: usize,
    pub expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexTransfer {
    pub v: usize,
    pub observed: usize,
    pub expected: f64,
    /// `observed / expected`, 1 when both vanish.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub theta: f64,
    pub eps: f64,
    pub tolerance: f64,
    /// Whether `eps <= (1-theta)/(8k^2)` as the transfer bound requires.
    pub eps_in_range: bool,
    pub precondition_failures: Vec<SetTransfer>,
    pub vertices: Vec<VertexTransfer>,
}

impl TransferReport {
    pub fn precondition_holds(&self) -> bool {
        self.precondition_failures.is_empty()
    }
    pub fn all_pass(&self) -> bool {
        self.vertices.iter().all(|v| v.pass)
    }
}

const SLACK: f64 = 1e-12;

/// Checks `d_{H[U∪x]}(x) = (1±eps)θ d_H(x)` for every (k-1)-set and the
/// resulting vertex bound `d_{H[U∪{v}]}(v) = (1±8k³eps)θ^{k-1} d_H(v)`.
pub fn degree_transfer_check(h: &Hypergraph, u: &[usize], theta: f64, eps: f64) -> TransferReport {
    let k = h.k();
    let mut in_u = vec![false; h.universe()];
    for &v in u {
        if v < h.universe() {
            in_u[v] = true;
        }
    }
    let mut failures = Vec::new();
    for x in h.ksets_minus_one() {
        let ids = h.containing_sorted(&x);
        let d = ids.len() as f64;
        let obs = ids.iter().filter(|&&id| h.edge(id).iter().all(|v| in_u[*v] || x.binary_search(v).is_ok())).count();
        let expected = theta * d;
        if (obs as f64 - expected).abs() > eps * expected + SLACK {
            failures.push(SetTransfer { set: x, observed: obs, expected });
        }
    }
    let tolerance = 8.0 * (k as f64).powi(3) * eps;
    let scale = theta.powi(k as i32 - 1);
    let vertices = h
        .vertices()
        .iter()
        .map(|&v| {
            let d = h.degree(v) as f64;
            let obs = h.incident(v).iter().filter(|&&id| h.edge(id).iter().all(|&w| w == v || in_u[w])).count();
            let expected = scale * d;
            let ratio = if expected == 0.0 {
                if obs == 0 { 1.0 } else { f64::INFINITY }
            } else {
                obs as f64 / expected
            };
            let pass = (obs as f64 - expected).abs() <= tolerance * expected + SLACK;
            VertexTransfer { v, observed: obs, expected, ratio, pass }
        })
        .collect();
    TransferReport {
        theta,
        eps,
        tolerance,
        eps_in_range: eps <= (1.0 - theta) / (8.0 * (k * k) as f64) + SLACK,
        precondition_failures: failures,
        vertices,
    }
}

/// Measures `θ` as the mean of `|N(x)∩U|/d(x)` over (k-1)-sets with positive
/// codegree and `eps` as the largest relative deviation from it.
pub fn measure_transfer(h: &Hypergraph, u: &[usize]) -> Option<(f64, f64)> {
    let mut in_u = vec![false; h.universe()];
    for &v in u {
        if v < h.universe() {
            in_u[v] = true;
        }
    }
    let ratios: Vec<f64> = h
        .ksets_minus_one()
        .iter()
        .filter_map(|x| {
            let ids = h.containing_sorted(x);
            if ids.is_empty() {
                return None;
            }
            let obs = ids.iter().filter(|&&id| h.edge(id).iter().all(|v| in_u[*v] || x.binary_search(v).is_ok())).count();
            Some(obs as f64 / ids.len() as f64)
        })
        .collect();
    if ratios.is_empty() {
        return None;
    }
    let theta = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if theta == 0.0 {
        return None;
    }
    let eps = ratios.iter().map(|r| (r / theta - 1.0).abs()).fold(0.0, f64::max);
    Some((theta, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k5_minus() -> Hypergraph {
        let edges: Vec<Vec<usize>> = (0..5).combinations(3).filter(|e| e != &vec![0, 1, 2]).collect();
        Hypergraph::new(3, 5, edges).unwrap()
    }

    #[test]
    fn test_codegree_examples() {
        let h = Hypergraph::complete(3, 5);
        assert_eq!(h.codegree(&[0, 1]).unwrap(), 3);
        assert_eq!(h.codegree(&[0]).unwrap(), 6);
        let g = Hypergraph::new(3, 4, [[0, 1, 2], [0, 1, 3]]).unwrap();
        assert_eq!(g.codegree(&[2, 3]).unwrap(), 0);
        assert!(h.codegree(&[0, 1, 2]).is_err());
        assert!(h.codegree(&[7]).is_err());
        assert!(h.codegree(&[]).is_err());
    }

    #[test]
    fn test_neighborhood_examples() {
        let h = Hypergraph::complete(3, 5);
        assert_eq!(h.neighborhood(&[0, 1]).unwrap(), vec![2, 3, 4]);
        let g = Hypergraph::new(3, 5, [[0, 1, 2]]).unwrap();
        assert_eq!(g.neighborhood(&[1, 2]).unwrap(), vec![0]);
        assert!(g.neighborhood(&[3, 4]).unwrap().is_empty());
    }

    #[test]
    fn test_index_cap_fallback_agrees() {
        let h = Hypergraph::complete(3, 7);
        let g = Hypergraph::complete(3, 7).with_index_cap(0);
        for x in h.ksets_minus_one() {
            assert_eq!(h.containing_edges(&x).unwrap(), g.containing_edges(&x).unwrap());
        }
    }

    #[test]
    fn test_regularity_complete() {
        let r = regularity_report(&Hypergraph::complete(3, 6));
        assert_eq!(r.eta_star(), Some(1.0 / 3.0));
        assert_eq!(r.eta_disjoint(), Some(1.0 / 3.0));
        let r = regularity_report(&Hypergraph::complete(3, 5));
        assert_eq!(r.rho_star, Ratio::from_integer(0));
        assert_eq!(r.r_mean, Ratio::from_integer(6));
        assert_eq!(r.delta_codegree, 3);
    }

    #[test]
    fn test_regularity_k5_minus_edge() {
        // degrees {5,5,5,6,6}, r_mean 27/5: deviations 2/27 and 3/27
        let r = regularity_report(&k5_minus());
        assert_eq!(r.degrees, vec![5, 5, 5, 6, 6]);
        assert_eq!(r.r_mean, Ratio::new(27, 5));
        assert_eq!(r.rho_star, Ratio::new(1, 9));
    }

    #[test]
    fn test_eta_absent_when_small() {
        let r = regularity_report(&Hypergraph::complete(4, 5));
        assert_eq!(r.eta_star(), None);
        assert_eq!(r.eta_disjoint(), None);
    }

    #[test]
    fn test_induced_and_remove() {
        let h = Hypergraph::complete(3, 5);
        let g = h.induced(&[0, 1, 2, 3]).unwrap();
        assert_eq!(g.m(), 4);
        assert_eq!(g.vertices(), &[0, 1, 2, 3]);
        let all: Vec<usize> = (0..h.m()).collect();
        let e = h.remove_edges(&all).unwrap();
        assert_eq!(e.m(), 0);
        assert_eq!(e.n(), 5);
        let k4 = Hypergraph::complete(3, 4);
        let id = k4.edge_id(&[2, 0, 1]).unwrap();
        assert_eq!(k4.remove_edges(&[id]).unwrap().m(), 3);
        assert!(h.induced(&[9]).is_err());
        assert!(h.remove_edges(&[500]).is_err());
    }

    #[test]
    fn test_text_roundtrip() {
        let h = k5_minus();
        let back = Hypergraph::parse(&h.to_text()).unwrap();
        assert_eq!(h, back);
        let t = "3 4 2\n2 1 0\n3 1 0\n";
        let g = Hypergraph::parse(t).unwrap();
        assert_eq!(g.to_text(), "3 4 2\n0 1 2\n0 1 3\n");
    }

    #[test]
    fn test_parse_errors() {
        match Hypergraph::parse("3 4 2\n0 1 2\n0 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match Hypergraph::parse("3 4 2\n0 1 2\n2 0 1\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        assert!(Hypergraph::parse("3 4 1\n0 1 x\n").is_err());
        assert!(Hypergraph::new(3, 4, [[0, 1, 2], [2, 1, 0]]).is_err());
    }

    #[test]
    fn test_transfer_identity_and_empty() {
        let h = k5_minus();
        let all: Vec<usize> = (0..5).collect();
        let rep = degree_transfer_check(&h, &all, 1.0, 0.0);
        assert!(rep.precondition_holds());
        assert!(rep.all_pass());
        assert!(rep.vertices.iter().all(|v| v.ratio == 1.0));
        let rep = degree_transfer_check(&h, &[], 0.1, 0.0);
        assert!(!rep.precondition_holds());
        assert_eq!(rep.precondition_failures.len(), 10);
    }

    fn random_graph(k: usize, n: usize, bits: &[bool]) -> Hypergraph {
        let edges: Vec<Vec<usize>> = (0..n).combinations(k).zip(bits.iter().cycle()).filter(|(_, &b)| b).map(|(e, _)| e).collect();
        Hypergraph::new(k, n, edges).unwrap()
    }

    proptest! {
        #[test]
        fn prop_neighborhood_size_is_codegree(bits in proptest::collection::vec(any::<bool>(), 1..60), n in 4usize..8) {
            let h = random_graph(3, n, &bits);
            for x in h.ksets_minus_one() {
                prop_assert_eq!(h.neighborhood(&x).unwrap().len(), h.codegree(&x).unwrap());
            }
        }

        #[test]
        fn prop_handshake(bits in proptest::collection::vec(any::<bool>(), 1..80), n in 4usize..9, k in 2usize..5) {
            let h = random_graph(k, n, &bits);
            let total: usize = h.vertices().iter().map(|&v| h.degree(v)).sum();
            prop_assert_eq!(total, k * h.m());
        }

        #[test]
        fn prop_codegree_matches_bruteforce(bits in proptest::collection::vec(any::<bool>(), 1..60), n in 4usize..8) {
            let h = random_graph(3, n, &bits);
            for j in 1..3 {
                for x in (0..n).combinations(j) {
                    let brute = h.edges().iter().filter(|e| x.iter().all(|v| e.contains(v))).count();
                    prop_assert_eq!(h.codegree(&x).unwrap(), brute);
                }
            }
        }

        #[test]
        fn prop_report_relabel_invariant(bits in proptest::collection::vec(any::<bool>(), 1..60), n in 4usize..8, rot in 0usize..8) {
            let h = random_graph(3, n, &bits);
            let perm: Vec<usize> = (0..n).map(|v| (v + rot) % n).rev().collect();
            let mut inv = perm.clone();
            inv.sort_unstable();
            prop_assume!(inv == (0..n).collect::<Vec<_>>());
            let g = h.relabel(&perm).unwrap();
            let (a, b) = (regularity_report(&h), regularity_report(&g));
            prop_assert_eq!(a.rho_star, b.rho_star);
            prop_assert_eq!(a.eta_count, b.eta_count);
            prop_assert_eq!(a.eta_disjoint_count, b.eta_disjoint_count);
            prop_assert_eq!(a.delta_codegree, b.delta_codegree);
            prop_assert_eq!(regularity_report(&h), a);
        }

        #[test]
        fn prop_identity_operations(bits in proptest::collection::vec(any::<bool>(), 1..60), n in 4usize..8) {
            let h = random_graph(3, n, &bits);
            let all: Vec<usize> = (0..n).collect();
            prop_assert_eq!(&h.induced(&all).unwrap(), &h);
            prop_assert_eq!(&h.remove_edges(&[]).unwrap(), &h);
            let rep = degree_transfer_check(&h, &all, 1.0, 0.0);
            prop_assert!(rep.precondition_holds() && rep.all_pass());
        }
    }
}
