//! Tight paths, tight cycles, cycle factors and the classification of k-sets
//! against a collection of vertex-disjoint paths.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgraph::Hypergraph;

fn distinct(seq: &[usize]) -> bool {
    let mut s = seq.to_vec();
    s.sort_unstable();
    s.windows(2).all(|w| w[0] != w[1])
}

/// True iff `seq` has no repeats and every k consecutive vertices form an edge.
pub fn is_tight_path(h: &Hypergraph, seq: &[usize]) -> bool {
    !seq.is_empty()
        && seq.iter().all(|&v| h.has_vertex(v))
        && distinct(seq)
        && seq.windows(h.k()).all(|w| h.contains_edge(w))
}

/// True iff `seq` has at least k+1 distinct vertices and every cyclic window is an edge.
pub fn is_tight_cycle(h: &Hypergraph, seq: &[usize]) -> bool {
    let k = h.k();
    seq.len() > k && seq.iter().all(|&v| h.has_vertex(v)) && distinct(seq) && cycle_windows(seq, k).all(|w| h.contains_edge(&w))
}

/// The k-windows of a path, as sorted vertex sets.
pub fn path_edges(seq: &[usize], k: usize) -> Vec<Vec<usize>> {
    seq.windows(k)
        .map(|w| {
            let mut e = w.to_vec();
            e.sort_unstable();
            e
        })
        .collect()
}

fn cycle_windows(seq: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = seq.len();
    (0..n).map(move |i| (0..k).map(|j| seq[(i + j) % n]).collect())
}

/// The cyclic k-windows of a cycle, as sorted vertex sets.
pub fn cycle_edges(seq: &[usize], k: usize) -> Vec<Vec<usize>> {
    cycle_windows(seq, k)
        .map(|mut e| {
            e.sort_unstable();
            e
        })
        .collect()
}

/// Rotation starting at the minimum vertex, in the lexicographically smaller direction.
pub fn canonical_cycle(seq: &[usize]) -> Vec<usize> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let p = (0..n).min_by_key(|&i| seq[i]).unwrap();
    let fwd: Vec<usize> = (0..n).map(|i| seq[(p + i) % n]).collect();
    let bwd: Vec<usize> = (0..n).map(|i| seq[(p + n - i) % n]).collect();
    fwd.min(bwd)
}

/// The smaller of a path and its reversal.
pub fn canonical_path(seq: &[usize]) -> Vec<usize> {
    let rev: Vec<usize> = seq.iter().rev().copied().collect();
    rev.min(seq.to_vec())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TightPath {
    pub seq: Vec<usize>,
}

impl TightPath {
    pub fn new(h: &Hypergraph, seq: Vec<usize>) -> Result<Self> {
        if !is_tight_path(h, &seq) {
            return Err(Error::Domain(format!("{seq:?} is not a tight path")));
        }
        Ok(Self { seq })
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Number of edges, `len - k + 1` once `len >= k`.
    pub fn edge_count(&self, k: usize) -> usize {
        (self.seq.len() + 1).saturating_sub(k)
    }

    pub fn edges(&self, k: usize) -> Vec<Vec<usize>> {
        path_edges(&self.seq, k)
    }

    /// Ordered starting edge `v_1..v_k`.
    pub fn start(&self, k: usize) -> &[usize] {
        &self.seq[..k.min(self.seq.len())]
    }

    /// Ordered ending edge `v_{l-k+1}..v_l`.
    pub fn end(&self, k: usize) -> &[usize] {
        &self.seq[self.seq.len().saturating_sub(k)..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightCycle {
    pub seq: Vec<usize>,
}

impl TightCycle {
    pub fn new(h: &Hypergraph, seq: Vec<usize>) -> Result<Self> {
        if !is_tight_cycle(h, &seq) {
            return Err(Error::Domain(format!("{seq:?} is not a tight cycle")));
        }
        Ok(Self { seq })
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn canonical(&self) -> Vec<usize> {
        canonical_cycle(&self.seq)
    }

    pub fn edges(&self, k: usize) -> Vec<Vec<usize>> {
        cycle_edges(&self.seq, k)
    }
}

/// Equality up to rotation and reflection.
pub fn same_cycle(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && canonical_cycle(a) == canonical_cycle(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleFactor {
    pub cycles: Vec<Vec<usize>>,
}

impl CycleFactor {
    pub fn new(cycles: Vec<Vec<usize>>) -> Self {
        Self { cycles }
    }

    pub fn lengths(&self) -> Vec<usize> {
        let mut l: Vec<usize> = self.cycles.iter().map(|c| c.len()).collect();
        l.sort_unstable();
        l
    }

    pub fn girth(&self) -> Option<usize> {
        self.cycles.iter().map(|c| c.len()).min()
    }

    pub fn edges(&self, k: usize) -> Vec<Vec<usize>> {
        self.cycles.iter().flat_map(|c| cycle_edges(c, k)).collect()
    }

    /// Canonical form: each cycle canonical, cycles sorted.
    pub fn canonical(&self) -> CycleFactor {
        let mut cycles: Vec<Vec<usize>> = self.cycles.iter().map(|c| canonical_cycle(c)).collect();
        cycles.sort();
        CycleFactor { cycles }
    }
}

/// Multiset of cycle lengths a factor must realise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorShape {
    pub lengths: Vec<usize>,
}

impl FactorShape {
    pub fn new(mut lengths: Vec<usize>) -> Self {
        lengths.sort_unstable();
        Self { lengths }
    }

    pub fn hamilton(n: usize) -> Self {
        Self { lengths: vec![n] }
    }

    pub fn total(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn girth(&self) -> Option<usize> {
        self.lengths.iter().copied().min()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FactorIssue {
    NotTight { cycle: usize },
    TooShort { cycle: usize, len: usize },
    Overlap { vertex: usize },
    UnknownVertex { vertex: usize },
    Missing { vertices: Vec<usize> },
    Lengths { got: Vec<usize>, want: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactorCheck {
    pub issues: Vec<FactorIssue>,
}

impl FactorCheck {
    pub fn ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Structural checks shared by factor validation: tightness, disjointness, spanning.
pub fn factor_issues(h: &Hypergraph, f: &CycleFactor) -> Vec<FactorIssue> {
    let mut issues = Vec::new();
    let mut seen = vec![false; h.universe()];
    for (i, c) in f.cycles.iter().enumerate() {
        if c.len() <= h.k() {
            issues.push(FactorIssue::TooShort { cycle: i, len: c.len() });
        } else if !is_tight_cycle(h, c) {
            issues.push(FactorIssue::NotTight { cycle: i });
        }
        for &v in c {
            if !h.has_vertex(v) {
                issues.push(FactorIssue::UnknownVertex { vertex: v });
            } else if seen[v] {
                issues.push(FactorIssue::Overlap { vertex: v });
            } else {
                seen[v] = true;
            }
        }
    }
    let missing: Vec<usize> = h.vertices().iter().copied().filter(|&v| !seen[v]).collect();
    if !missing.is_empty() {
        issues.push(FactorIssue::Missing { vertices: missing });
    }
    issues
}

/// True iff `f` is a cycle factor of `h` whose length multiset equals `target`'s.
pub fn verify_factor_copy(h: &Hypergraph, f: &CycleFactor, target: &FactorShape) -> FactorCheck {
    let mut issues = factor_issues(h, f);
    if f.lengths() != target.lengths {
        issues.push(FactorIssue::Lengths { got: f.lengths(), want: target.lengths.clone() });
    }
    FactorCheck { issues }
}

/// Boundary of a path: first and last k vertices when `l >= 2k+1`, else the whole path.
pub fn boundary(seq: &[usize], k: usize) -> Vec<Vec<usize>> {
    let l = seq.len();
    if l > 2 * k {
        vec![seq[..k].to_vec(), seq[l - k..].to_vec()]
    } else {
        vec![seq.to_vec()]
    }
}

/// Interior `v_{k+1}..v_{l-k}` when `l >= 2k+1`, else empty.
pub fn interior(seq: &[usize], k: usize) -> Vec<usize> {
    let l = seq.len();
    if l > 2 * k {
        seq[k..l - k].to_vec()
    } else {
        Vec::new()
    }
}

/// Type of a k-set relative to a path collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KType {
    End(usize),
    Leftover,
    Con(usize),
}

impl fmt::Display for KType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KType::End(j) => write!(f, "{j}-end"),
            KType::Leftover => write!(f, "lo"),
            KType::Con(j) => write!(f, "{j}-con"),
        }
    }
}

impl Serialize for KType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// All end-sets of a path: prefixes `{v_1..v_i}` and the final k-set.
pub fn end_sets(seq: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1..=seq.len())
        .map(|i| {
            let mut s = seq[..i].to_vec();
            s.sort_unstable();
            s
        })
        .collect();
    if seq.len() >= k {
        let mut s = seq[seq.len() - k..].to_vec();
        s.sort_unstable();
        out.push(s);
    }
    out
}

/// Vertex-disjoint paths with a position index for classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCollection {
    k: usize,
    paths: Vec<Vec<usize>>,
    position: BTreeMap<usize, (usize, usize)>,
    end_set_index: HashSet<Vec<usize>>,
}

impl PathCollection {
    pub fn new(k: usize, paths: Vec<Vec<usize>>) -> Result<Self> {
        let mut position = BTreeMap::new();
        let mut end_set_index = HashSet::new();
        for (p, seq) in paths.iter().enumerate() {
            for (i, &v) in seq.iter().enumerate() {
                if position.insert(v, (p, i)).is_some() {
                    return Err(Error::Domain(format!("vertex {v} lies on two paths")));
                }
            }
            end_set_index.extend(end_sets(seq, k));
        }
        Ok(Self { k, paths, position, end_set_index })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    /// `|V(P)|`.
    pub fn coverage(&self) -> usize {
        self.position.len()
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.position.contains_key(&v)
    }

    pub fn covered(&self) -> Vec<usize> {
        self.position.keys().copied().collect()
    }

    pub fn is_end_set(&self, set: &[usize]) -> bool {
        let mut s = set.to_vec();
        s.sort_unstable();
        self.end_set_index.contains(&s)
    }

    pub fn edges(&self) -> Vec<Vec<usize>> {
        self.paths.iter().flat_map(|p| path_edges(p, self.k)).collect()
    }

    /// Classification of the k-set `e`: ending beats leftover beats concentrated.
    pub fn classify(&self, e: &[usize]) -> KType {
        let k = self.k;
        let mut by_path: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in e {
            if let Some(&(p, i)) = self.position.get(v) {
                by_path.entry(p).or_default().push(i);
            }
        }
        let mut end = 0;
        for (&p, pos) in &by_path {
            let l = self.paths[p].len();
            let mut pos = pos.clone();
            pos.sort_unstable();
            let prefix = pos.iter().enumerate().take_while(|(j, &i)| *j == i).count();
            end = end.max(prefix);
            if l >= k && (l - k..l).all(|i| pos.binary_search(&i).is_ok()) {
                end = end.max(k);
            }
        }
        if end > 0 {
            return KType::End(end);
        }
        if by_path.values().map(|p| p.len()).sum::<usize>() < e.len() {
            return KType::Leftover;
        }
        KType::Con(by_path.values().map(|p| p.len()).max().unwrap_or(0))
    }
}

/// Classification by enumerating every subset of `e` against every end-set
/// and path vertex set; independent of `PathCollection`'s position index.
pub fn classify_by_definition(e: &[usize], paths: &[Vec<usize>], k: usize) -> KType {
    let all_end: Vec<Vec<usize>> = paths.iter().flat_map(|p| end_sets(p, k)).collect();
    let mut end = 0;
    let mut con = 0;
    for j in 1..=e.len() {
        for sub in e.iter().copied().combinations(j) {
            let mut s = sub.clone();
            s.sort_unstable();
            if all_end.contains(&s) {
                end = end.max(j);
            }
            if paths.iter().any(|p| s.iter().all(|v| p.contains(v))) {
                con = con.max(j);
            }
        }
    }
    if end > 0 {
        return KType::End(end);
    }
    let covered = e.iter().all(|v| paths.iter().any(|p| p.contains(v)));
    if !covered {
        return KType::Leftover;
    }
    KType::Con(con)
}

/// JSON document `{"factors":[{"cycles":[[v..]]}]}` in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorsDoc {
    pub factors: Vec<CycleFactor>,
}

impl FactorsDoc {
    pub fn new(factors: &[CycleFactor]) -> Self {
        Self { factors: factors.iter().map(|f| f.canonical()).collect() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }
}
