//! Brute-force ground truth used by tests and the acceptance suite.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracmatch::EdgeWeighting;
use crate::hgraph::Hypergraph;
use crate::scalar::{Scalar, Q};
use crate::tight::{cycle_edges, factor_issues, is_tight_path, CycleFactor, FactorIssue, FactorShape};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegKResult {
    pub r: usize,
    /// Edge ids of a spanning subgraph in which every vertex has degree exactly `r`.
    pub witness: Vec<usize>,
    pub nodes: u64,
}

struct RegSearch<'a> {
    h: &'a Hypergraph,
    order: Vec<usize>,
    r: usize,
    deg: Vec<usize>,
    rem: Vec<usize>,
    chosen: Vec<usize>,
    nodes: u64,
}

impl RegSearch<'_> {
    fn run(&mut self, i: usize) -> bool {
        self.nodes += 1;
        if i == self.order.len() {
            return self.h.vertices().iter().all(|&v| self.deg[v] == self.r);
        }
        let id = self.order[i];
        let e = self.h.edge(id).to_vec();
        for &v in &e {
            self.rem[v] -= 1;
        }
        if e.iter().all(|&v| self.deg[v] < self.r) {
            for &v in &e {
                self.deg[v] += 1;
            }
            self.chosen.push(id);
            if self.run(i + 1) {
                return true;
            }
            self.chosen.pop();
            for &v in &e {
                self.deg[v] -= 1;
            }
        }
        if e.iter().all(|&v| self.deg[v] + self.rem[v] >= self.r) && self.run(i + 1) {
            return true;
        }
        for &v in &e {
            self.rem[v] += 1;
        }
        false
    }
}

/// Largest `r` divisible by k with an exactly r-regular spanning subgraph, by backtracking.
pub fn reg_k(h: &Hypergraph, cap: usize) -> Result<RegKResult> {
    if h.m() > cap {
        return Err(Error::CapExceeded(format!("{} edges > cap {cap}", h.m())));
    }
    let k = h.k();
    let min_deg = h.vertices().iter().map(|&v| h.degree(v)).min().unwrap_or(0);
    let mut order: Vec<usize> = (0..h.m()).collect();
    order.sort_by_key(|&id| (h.edge(id).iter().map(|&v| h.degree(v)).min(), id));
    let mut nodes = 0;
    let mut r = min_deg / k * k;
    while r > 0 {
        let mut rem = vec![0; h.universe()];
        for &v in h.vertices() {
            rem[v] = h.degree(v);
        }
        let mut s = RegSearch { h, order: order.clone(), r, deg: vec![0; h.universe()], rem, chosen: Vec::new(), nodes: 0 };
        let found = s.run(0);
        nodes += s.nodes;
        if found {
            let mut witness = s.chosen;
            witness.sort_unstable();
            return Ok(RegKResult { r, witness, nodes });
        }
        r -= k;
    }
    Ok(RegKResult { r: 0, witness: Vec::new(), nodes })
}

/// `reg_k` by scanning all `2^|E|` edge subsets.
pub fn reg_k_enumerate(h: &Hypergraph, cap: usize) -> Result<RegKResult> {
    let m = h.m();
    if m > cap || m >= 63 {
        return Err(Error::CapExceeded(format!("{m} edges > cap {cap}")));
    }
    let mut best = RegKResult { r: 0, witness: Vec::new(), nodes: 0 };
    let mut deg = vec![0usize; h.universe()];
    for mask in 0u64..(1u64 << m) {
        deg.iter_mut().for_each(|d| *d = 0);
        for id in (0..m).filter(|id| mask >> id & 1 == 1) {
            for &v in h.edge(id) {
                deg[v] += 1;
            }
        }
        let r = h.vertices().first().map_or(0, |&v| deg[v]);
        if r > best.r && r.is_multiple_of(h.k()) && h.vertices().iter().all(|&v| deg[v] == r) {
            best = RegKResult { r, witness: (0..m).filter(|id| mask >> id & 1 == 1).collect(), nodes: 0 };
        }
    }
    best.nodes = 1u64 << m;
    Ok(best)
}

/// Default vertex cap for Hamilton search.
pub const HAMILTON_CAP: usize = 14;

fn hamilton_dfs(h: &Hypergraph, seq: &mut Vec<usize>, used: &mut [bool]) -> bool {
    let k = h.k();
    let n = h.n();
    if seq.len() == n {
        let first = &seq[..k - 1];
        return (0..k - 1).all(|i| {
            let w: Vec<usize> = seq[n - k + 1 + i..].iter().chain(first[..=i].iter()).copied().collect();
            h.contains_edge(&w)
        });
    }
    for &v in h.vertices() {
        if used[v] {
            continue;
        }
        if seq.len() >= k - 1 {
            let mut w = seq[seq.len() + 1 - k..].to_vec();
            w.push(v);
            if !h.contains_edge(&w) {
                continue;
            }
        }
        used[v] = true;
        seq.push(v);
        if hamilton_dfs(h, seq, used) {
            return true;
        }
        seq.pop();
        used[v] = false;
    }
    false
}

/// A Hamilton tight cycle, or `None` when exhaustive search proves there is none.
pub fn hamilton_exists(h: &Hypergraph, cap: usize) -> Result<Option<Vec<usize>>> {
    let n = h.n();
    if n > cap {
        return Err(Error::CapExceeded(format!("n = {n} > cap {cap}")));
    }
    if n <= h.k() {
        return Ok(None);
    }
    let start = h.vertices()[0];
    let mut used = vec![false; h.universe()];
    used[start] = true;
    let mut seq = vec![start];
    Ok(hamilton_dfs(h, &mut seq, &mut used).then_some(seq))
}

/// Exact law of `X_1..X_t` for the (L,ω)-walk, by forward enumeration with
/// transition weights recomputed from the edge list.
pub fn walk_distribution(h: &Hypergraph, w: &EdgeWeighting<Q>, l: usize, t: usize, cap: usize) -> Result<Vec<(Vec<usize>, Q)>> {
    let n = h.n();
    if l == 0 || t == 0 {
        return Err(Error::Param("L and t must be positive".into()));
    }
    if (n as f64).powi(t as i32) > cap as f64 {
        return Err(Error::CapExceeded(format!("n^t = {n}^{t} > cap {cap}")));
    }
    let k = h.k();
    let omega = |x: &[usize]| -> Q {
        h.edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| x.iter().all(|v| e.contains(v)))
            .fold(Q::from_usize(0), |a, (id, _)| a + w.weight(id).clone())
    };
    let mut memo: HashMap<Vec<usize>, Vec<(usize, Q)>> = HashMap::new();
    let mut layer: Vec<(Vec<usize>, Q)> = vec![(Vec::new(), Q::from_usize(1))];
    for step in 1..=t {
        let m = (k - 1).min((step - 1) % l);
        let mut next = Vec::new();
        for (prefix, p) in layer {
            let mut x = prefix[prefix.len() - m..].to_vec();
            x.sort_unstable();
            let law = memo.entry(x.clone()).or_insert_with(|| {
                let denom = omega(&x) * Q::from_usize(k - m);
                if !denom.is_positive() {
                    return Vec::new();
                }
                h.vertices()
                    .iter()
                    .filter(|v| !x.contains(v))
                    .map(|&v| {
                        let mut y = x.clone();
                        y.push(v);
                        (v, omega(&y) / denom.clone())
                    })
                    .filter(|(_, q)| q.is_positive())
                    .collect()
            });
            if law.is_empty() {
                return Err(Error::StuckWalk(prefix));
            }
            for (v, q) in law.iter() {
                let mut s = prefix.clone();
                s.push(*v);
                next.push((s, p.clone() * q.clone()));
            }
        }
        layer = next;
    }
    Ok(layer)
}

/// Every ordered `2k`-sequence over `V ∖ {x}` that is a tight path and stays one
/// with `x` inserted after position k.
pub fn absorbers_brute(h: &Hypergraph, x: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    let k = h.k();
    let rest: Vec<usize> = h.vertices().iter().copied().filter(|&v| v != x).collect();
    let count: f64 = (0..2 * k).map(|i| rest.len().saturating_sub(i) as f64).product();
    if count > cap as f64 {
        return Err(Error::CapExceeded(format!("{count} sequences > cap {cap}")));
    }
    Ok(rest
        .iter()
        .copied()
        .permutations(2 * k)
        .filter(|seq| {
            let mut with = seq[..k].to_vec();
            with.push(x);
            with.extend_from_slice(&seq[k..]);
            is_tight_path(h, seq) && is_tight_path(h, &with)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PackingReport {
    pub factor_issues: Vec<(usize, FactorIssue)>,
    /// Edges used more than once across all factors.
    pub shared_edges: Vec<Vec<usize>>,
    pub factors: usize,
}

impl PackingReport {
    pub fn pass(&self) -> bool {
        self.factor_issues.is_empty() && self.shared_edges.is_empty()
    }
}

/// Tightness, spanning, disjointness, global edge-disjointness, and (when given) length multisets.
pub fn validate_packing(h: &Hypergraph, factors: &[CycleFactor], targets: Option<&[FactorShape]>) -> PackingReport {
    let mut issues = Vec::new();
    let mut uses: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for (i, f) in factors.iter().enumerate() {
        for issue in factor_issues(h, f) {
            issues.push((i, issue));
        }
        if let Some(want) = targets.and_then(|t| t.get(i)) {
            if f.lengths() != want.lengths {
                issues.push((i, FactorIssue::Lengths { got: f.lengths(), want: want.lengths.clone() }));
            }
        }
        for c in &f.cycles {
            if c.len() > h.k() {
                for e in cycle_edges(c, h.k()) {
                    *uses.entry(e).or_default() += 1;
                }
            }
        }
    }
    let shared_edges = uses.into_iter().filter(|(_, c)| *c > 1).map(|(e, _)| e).collect();
    PackingReport { factor_issues: issues, shared_edges, factors: factors.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracmatch::uniform_weighting;
    use crate::tight::is_tight_cycle;
    use num_traits::One;
    use proptest::prelude::*;

    #[test]
    fn test_reg_complete() {
        let r = reg_k(&Hypergraph::complete(3, 4), 64).unwrap();
        assert_eq!(r.r, 3);
        assert_eq!(r.witness.len(), 4);
        let r = reg_k(&Hypergraph::complete(3, 5), 64).unwrap();
        assert_eq!(r.r, 6);
        assert_eq!(r.witness.len(), 10);
    }

    #[test]
    fn test_reg_degree_one_vertex() {
        // Vertex 5 lies in one edge; the others have degree at least 3.
        let mut edges: Vec<Vec<usize>> = (0..5).combinations(3).collect();
        edges.push(vec![0, 1, 5]);
        let h = Hypergraph::new(3, 6, edges).unwrap();
        assert_eq!(reg_k(&h, 64).unwrap().r, 0);
        assert_eq!(reg_k_enumerate(&h, 20).unwrap().r, 0);
    }

    #[test]
    fn test_reg_refuses_over_cap() {
        assert!(matches!(reg_k(&Hypergraph::complete(3, 8), 10), Err(Error::CapExceeded(_))));
        assert!(matches!(reg_k_enumerate(&Hypergraph::complete(3, 7), 20), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn test_hamilton_examples() {
        let h = Hypergraph::complete(3, 7);
        let c = hamilton_exists(&h, HAMILTON_CAP).unwrap().unwrap();
        assert!(is_tight_cycle(&h, &c));
        let edges: Vec<Vec<usize>> = (0..4).combinations(3).chain((4..8).combinations(3)).collect();
        let two = Hypergraph::new(3, 8, edges).unwrap();
        assert!(hamilton_exists(&two, HAMILTON_CAP).unwrap().is_none());
        let cyc = Hypergraph::tight_cycle(3, 9).unwrap();
        let c = hamilton_exists(&cyc, HAMILTON_CAP).unwrap().unwrap();
        assert!(crate::tight::same_cycle(&c, &(0..9).collect::<Vec<_>>()));
        assert!(hamilton_exists(&Hypergraph::complete(3, 15), HAMILTON_CAP).is_err());
    }

    #[test]
    fn test_walk_distribution_mass_and_base() {
        let h = Hypergraph::complete(3, 4);
        let w = uniform_weighting::<Q>(&h).unwrap();
        let d = walk_distribution(&h, &w, 3, 3, 1 << 16).unwrap();
        assert_eq!(d.len(), 24);
        assert!(d.iter().all(|(_, p)| *p == Q::from_frac(1, 24)));
        let d1 = walk_distribution(&h, &w, 3, 1, 100).unwrap();
        assert!(d1.iter().all(|(_, p)| *p == Q::from_frac(1, 4)));
        let d5 = walk_distribution(&h, &w, 2, 5, 1 << 16).unwrap();
        assert!(d5.iter().fold(Q::from_usize(0), |a, (_, p)| a + p.clone()).is_one());
    }

    #[test]
    fn test_absorbers_brute_k7() {
        let h = Hypergraph::complete(3, 7);
        assert_eq!(absorbers_brute(&h, 0, 1 << 20).unwrap().len(), 720);
    }

    #[test]
    fn test_validate_packing_fixtures() {
        let h = Hypergraph::complete(3, 7);
        let a: Vec<usize> = (0..7).collect();
        let b: Vec<usize> = vec![0, 2, 4, 6, 1, 3, 5];
        let good = vec![CycleFactor::new(vec![a.clone()]), CycleFactor::new(vec![b])];
        let rep = validate_packing(&h, &good, Some(&[FactorShape::hamilton(7), FactorShape::hamilton(7)]));
        assert!(rep.pass(), "{rep:?}");
        let dup = vec![CycleFactor::new(vec![a.clone()]), CycleFactor::new(vec![vec![1, 2, 3, 4, 5, 6, 0]])];
        let rep = validate_packing(&h, &dup, None);
        assert!(!rep.pass());
        assert!(rep.shared_edges.contains(&vec![0, 1, 2]));
        let short = vec![CycleFactor::new(vec![(0..6).collect()])];
        let rep = validate_packing(&h, &short, None);
        assert_eq!(rep.factor_issues, vec![(0, FactorIssue::Missing { vertices: vec![6] })]);
        assert!(validate_packing(&h, &[], None).pass());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn prop_reg_backtracking_matches_enumeration(n in 4usize..7, bits in any::<u64>()) {
            let all: Vec<Vec<usize>> = (0..n).combinations(3).collect();
            let edges: Vec<Vec<usize>> = all.into_iter().enumerate().filter(|(i, _)| bits >> (i % 64) & 1 == 1).map(|(_, e)| e).take(20).collect();
            let h = Hypergraph::new(3, n, edges).unwrap();
            let a = reg_k(&h, 64).unwrap();
            let b = reg_k_enumerate(&h, 20).unwrap();
            prop_assert_eq!(a.r, b.r);
            let sub = h.spanning(&a.witness);
            prop_assert!(h.vertices().iter().all(|&v| sub.degree(v) == a.r));
        }
    }
}
