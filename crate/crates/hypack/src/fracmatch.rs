//! Perfect fractional matchings: uniform start, walk redistribution, LP fallback,
//! balancedness, and random sparsification toward an intersecting subgraph.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hgraph::{regularity_report, Hypergraph, RegularityReport};
use crate::scalar::Scalar;

/// Edge weights indexed by edge id of the host.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeighting<S> {
    weights: Vec<S>,
}

impl<S: Scalar> EdgeWeighting<S> {
    pub fn new(weights: Vec<S>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, edge: usize) -> &S {
        &self.weights[edge]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `ω(∅)`.
    pub fn total(&self) -> S {
        self.weights.iter().cloned().fold(S::zero(), |a, b| a + b)
    }

    /// `ω(x)`: total weight of edges containing the vertex set `x`.
    pub fn omega(&self, h: &Hypergraph, x: &[usize]) -> Result<S> {
        match x.len() {
            0 => Ok(self.total()),
            j if j == h.k() => Ok(h.edge_id(x).map_or_else(S::zero, |id| self.weights[id].clone())),
            j if j > h.k() => Ok(S::zero()),
            _ => Ok(h
                .containing_edges(x)?
                .into_iter()
                .fold(S::zero(), |a, id| a + self.weights[id].clone())),
        }
    }

    /// `ω(v)` for every vertex of the universe.
    pub fn vertex_sums(&self, h: &Hypergraph) -> Vec<S> {
        let mut out = vec![S::zero(); h.universe()];
        for (id, e) in h.edges().iter().enumerate() {
            for &v in e {
                out[v] = out[v].clone() + self.weights[id].clone();
            }
        }
        out
    }

    /// Largest `|ω(v) - 1|` over vertices of `h`.
    pub fn max_vertex_deviation(&self, h: &Hypergraph) -> f64 {
        let sums = self.vertex_sums(h);
        h.vertices().iter().map(|&v| (sums[v].to_f64() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Every vertex sum equals 1 (exactly for rationals, within `tol` for floats).
    pub fn is_perfect(&self, h: &Hypergraph, tol: f64) -> bool {
        let sums = self.vertex_sums(h);
        h.vertices().iter().all(|&v| sums[v].near(&S::one(), tol))
    }

    pub fn to_f64(&self) -> EdgeWeighting<f64> {
        EdgeWeighting { weights: self.weights.iter().map(|w| w.to_f64()).collect() }
    }

    /// Lines `edge_id value`.
    pub fn to_text(&self) -> String {
        self.weights.iter().enumerate().map(|(i, w)| format!("{i} {}\n", w.format_value())).collect()
    }

    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let mut weights: Vec<Option<S>> = vec![None; m];
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse { line: ln + 1, msg: msg.into() };
            let (id, val) = line.split_once(' ').ok_or_else(|| err("expected `edge_id value`"))?;
            let id: usize = id.parse().map_err(|_| err("bad edge id"))?;
            let val = S::parse_value(val.trim()).ok_or_else(|| err("bad weight"))?;
            let slot = weights.get_mut(id).ok_or_else(|| err("edge id out of range"))?;
            *slot = Some(val);
        }
        let weights = weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| w.ok_or(Error::Parse { line: 0, msg: format!("missing weight for edge {i}") }))
            .collect::<Result<Vec<S>>>()?;
        Ok(Self { weights })
    }
}

/// `max_e ω(e) / min_e ω(e)`.
pub fn balancedness<S: Scalar>(w: &EdgeWeighting<S>) -> S {
    let mut it = w.weights.iter();
    let first = match it.next() {
        Some(f) => f.clone(),
        None => return S::one(),
    };
    let (lo, hi) = it.fold((first.clone(), first), |(lo, hi), x| {
        (if *x < lo { x.clone() } else { lo }, if *x > hi { x.clone() } else { hi })
    });
    hi / lo
}

/// `ω_0(e) = n / (k|E|)`.
pub fn uniform_weighting<S: Scalar>(h: &Hypergraph) -> Result<EdgeWeighting<S>> {
    if h.m() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let w = S::from_frac(h.n() as i64, (h.k() * h.m()) as i64);
    Ok(EdgeWeighting::new(vec![w; h.m()]))
}

/// Self-avoiding `(k+1)`-vertex walks grouped by ordered endpoint pair.
#[derive(Debug, Clone, Default)]
pub struct WalkRegistry {
    pairs: BTreeMap<(usize, usize), Vec<Vec<usize>>>,
}

impl WalkRegistry {
    /// All walks `s, x_1..x_{k-1}, t` with both windows edges; pairs with more
    /// than `cap` walks keep a seeded random subset of size `cap`.
    pub fn enumerate(h: &Hypergraph, cap: Option<usize>, seed: u64) -> Self {
        let mut pairs: BTreeMap<(usize, usize), Vec<Vec<usize>>> = BTreeMap::new();
        for x in h.ksets_minus_one() {
            let nb = h.neighborhood(&x).expect("valid (k-1)-set");
            if nb.len() < 2 {
                continue;
            }
            let orders: Vec<Vec<usize>> = x.iter().copied().permutations(x.len()).collect();
            for &s in &nb {
                for &t in &nb {
                    if s == t {
                        continue;
                    }
                    let list = pairs.entry((s, t)).or_default();
                    for mid in &orders {
                        let mut w = Vec::with_capacity(mid.len() + 2);
                        w.push(s);
                        w.extend_from_slice(mid);
                        w.push(t);
                        list.push(w);
                    }
                }
            }
        }
        if let Some(cap) = cap {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for list in pairs.values_mut() {
                if list.len() > cap {
                    list.shuffle(&mut rng);
                    list.truncate(cap);
                }
            }
        }
        Self { pairs }
    }

    pub fn walks(&self, s: usize, t: usize) -> &[Vec<usize>] {
        self.pairs.get(&(s, t)).map_or(&[], |v| v.as_slice())
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn walk_count(&self) -> usize {
        self.pairs.values().map(|v| v.len()).sum()
    }
}

/// Default number of walks kept per ordered pair.
pub const DEFAULT_WALK_CAP: usize = 500;

/// Shift `ω_0` along every registered walk so that each vertex sum becomes 1.
///
/// A walk from `s` to `t` moves `ξ(s)/(n|W_{s,t}|)` from its first window to its last.
pub fn redistribute_pfm<S: Scalar>(h: &Hypergraph, reg: &WalkRegistry) -> Result<EdgeWeighting<S>> {
    let base = uniform_weighting::<S>(h)?;
    let k = h.k();
    let n = h.n();
    let w0 = base.weights[0].clone();
    let mut weights = base.weights;
    for &s in h.vertices() {
        let xi = w0.clone() * S::from_usize(h.degree(s)) - S::one();
        for &t in h.vertices() {
            if s == t {
                continue;
            }
            let walks = reg.walks(s, t);
            if walks.is_empty() {
                return Err(Error::NotConnected { s, t });
            }
            if xi.is_zero() {
                continue;
            }
            let mut net: HashMap<usize, i64> = HashMap::new();
            for w in walks {
                let first = h.edge_id(&w[..k]).expect("registered window");
                let last = h.edge_id(&w[1..]).expect("registered window");
                *net.entry(first).or_default() -= 1;
                *net.entry(last).or_default() += 1;
            }
            let a = xi.clone() / S::from_usize(n * walks.len());
            for (id, c) in net {
                if c != 0 {
                    weights[id] = weights[id].clone() + a.clone() * S::from_frac(c, 1);
                }
            }
        }
    }
    check_positive(&weights)?;
    Ok(EdgeWeighting::new(weights))
}

fn check_positive<S: Scalar>(weights: &[S]) -> Result<()> {
    let worst = weights
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal));
    match worst {
        Some((edge, w)) if !w.is_positive() => Err(Error::BalanceViolation { edge, value: w.format_value() }),
        _ => Ok(()),
    }
}

/// Perfect fractional matching maximising the minimum edge weight (LP).
pub fn lp_pfm(h: &Hypergraph) -> Result<EdgeWeighting<f64>> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    if h.m() == 0 {
        return Err(Error::EmptyEdgeSet);
    }
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let t = p.add_var(1.0, (0.0, 1.0));
    let vars: Vec<_> = (0..h.m()).map(|_| p.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for &x in &vars {
        p.add_constraint([(x, 1.0), (t, -1.0)], ComparisonOp::Ge, 0.0);
    }
    for &v in h.vertices() {
        let row: Vec<_> = h.incident(v).iter().map(|&id| (vars[id], 1.0)).collect();
        p.add_constraint(row, ComparisonOp::Eq, 1.0);
    }
    let sol = p
        .solve()
        .map_err(|e| Error::Infeasible(format!("fractional matching LP: {e}")))?
        .into_solution()
        .map_err(|_| Error::Infeasible("fractional matching LP interrupted".into()))?;
    let weights: Vec<f64> = vars.iter().map(|&x| sol.var_value(x).max(0.0)).collect();
    let worst = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if worst <= 1e-12 {
        let edge = weights.iter().position(|&w| w == worst).unwrap_or(0);
        return Err(Error::BalanceViolation { edge, value: worst.format_value() });
    }
    Ok(EdgeWeighting::new(weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PfmSource {
    Redistribution,
    Lp,
}

/// Redistribution in float mode; LP when it fails or drifts past `1e-9`.
pub fn pfm_with_fallback(h: &Hypergraph, seed: u64) -> Result<(EdgeWeighting<f64>, PfmSource)> {
    let reg = WalkRegistry::enumerate(h, Some(DEFAULT_WALK_CAP), seed);
    match redistribute_pfm::<f64>(h, &reg) {
        Ok(w) if w.max_vertex_deviation(h) <= 1e-9 => Ok((w, PfmSource::Redistribution)),
        Ok(_) | Err(Error::BalanceViolation { .. }) => Ok((lp_pfm(h)?, PfmSource::Lp)),
        Err(e) => Err(e),
    }
}

/// Acceptance gates for a sparsified subgraph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparsifyGates {
    pub eta_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub retries: usize,
}

impl Default for SparsifyGates {
    fn default() -> Self {
        Self { eta_min: None, rho_max: None, retries: 20 }
    }
}

impl SparsifyGates {
    pub fn accepts(&self, r: &RegularityReport) -> bool {
        let eta_ok = self.eta_min.is_none_or(|g| r.eta_star().is_some_and(|e| e >= g));
        let rho_ok = self.rho_max.is_none_or(|g| r.rho() <= g);
        eta_ok && rho_ok
    }
}

#[derive(Debug, Clone)]
pub struct Sparsified {
    pub graph: Hypergraph,
    pub report: RegularityReport,
    pub attempts: usize,
}

/// Keep edge `e` with probability `(1-eps)·[e ∈ F] + eps·ω(e)/ω_max`.
pub fn sparsify_intersecting(
    h: &Hypergraph,
    f: &Hypergraph,
    eps: f64,
    pfm: &EdgeWeighting<f64>,
    seed: u64,
    gates: &SparsifyGates,
) -> Result<Sparsified> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Param(format!("eps = {eps} outside [0, 1]")));
    }
    if pfm.len() != h.m() {
        return Err(Error::Param("weighting does not match host".into()));
    }
    let wmax = pfm.weights().iter().cloned().fold(0.0, f64::max);
    let probs: Vec<f64> = h
        .edges()
        .iter()
        .enumerate()
        .map(|(id, e)| {
            let base = if f.contains_edge(e) { 1.0 - eps } else { 0.0 };
            let extra = if wmax > 0.0 { eps * pfm.weight(id) / wmax } else { 0.0 };
            (base + extra).min(1.0)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for attempt in 1..=gates.retries.max(1) {
        let keep: Vec<usize> = (0..h.m()).filter(|&id| probs[id] >= 1.0 || rng.gen::<f64>() < probs[id]).collect();
        let graph = h.spanning(&keep);
        let report = regularity_report(&graph);
        if gates.accepts(&report) {
            return Ok(Sparsified { graph, report, attempts: attempt });
        }
        last = Some(report);
    }
    let r = last.expect("at least one attempt");
    Err(Error::RetriesExhausted {
        stage: "sparsify".into(),
        reason: format!("last eta = {:?}, rho = {:.4}", r.eta_star(), r.rho()),
    })
}
