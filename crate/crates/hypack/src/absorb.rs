//! x-absorbers, (a,ℓ)-blocks, the staged absorbing structure, Hall-type
//! disjoint perfect matchings, and absorption of a leftover set.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracmatch::pfm_with_fallback;
use crate::hgraph::{regularity_report, Hypergraph};
use crate::tight::is_tight_path;
use crate::walker::WalkSampler;

/// `seq` with `x` inserted after its first `k` vertices.
pub fn insert_center(seq: &[usize], x: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    out.extend_from_slice(&seq[..k]);
    out.push(x);
    out.extend_from_slice(&seq[k..]);
    out
}

/// True iff `seq` is a 2k-vertex tight path that stays tight with `x` at its centre.
pub fn is_absorber(h: &Hypergraph, seq: &[usize], x: usize) -> bool {
    let k = h.k();
    seq.len() == 2 * k && h.has_vertex(x) && !seq.contains(&x) && is_tight_path(h, seq) && is_tight_path(h, &insert_center(seq, x, k))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Absorber {
    pub seq: Vec<usize>,
    pub x: usize,
}

struct AbsorberSearch<'a> {
    h: &'a Hypergraph,
    x: usize,
    cap: usize,
    seq: Vec<usize>,
    used: Vec<bool>,
    out: Vec<Vec<usize>>,
}

impl AbsorberSearch<'_> {
    fn combined_tail_ok(&self) -> bool {
        let k = self.h.k();
        let p = self.seq.len();
        let combined: Vec<usize> = if p <= k {
            self.seq.clone()
        } else {
            insert_center(&self.seq, self.x, k)
        };
        combined.len() < k || self.h.contains_edge(&combined[combined.len() - k..])
    }

    fn run(&mut self) {
        let k = self.h.k();
        if self.out.len() >= self.cap {
            return;
        }
        if self.seq.len() == 2 * k {
            self.out.push(self.seq.clone());
            return;
        }
        for i in 0..self.h.n() {
            let v = self.h.vertices()[i];
            if self.used[v] {
                continue;
            }
            self.seq.push(v);
            let p = self.seq.len();
            let ok = (p < k || self.h.contains_edge(&self.seq[p - k..]))
                && self.combined_tail_ok()
                && (p != k || {
                    let mut w = self.seq[1..].to_vec();
                    w.push(self.x);
                    self.h.contains_edge(&w)
                });
            if ok {
                self.used[v] = true;
                self.run();
                self.used[v] = false;
            }
            self.seq.pop();
        }
    }
}

/// Ordered x-absorbers in `h`, at most `cap` of them.
pub fn enumerate_absorbers(h: &Hypergraph, x: usize, cap: Option<usize>) -> Vec<Absorber> {
    if !h.has_vertex(x) {
        return Vec::new();
    }
    let mut used = vec![false; h.universe()];
    used[x] = true;
    let mut s = AbsorberSearch { h, x, cap: cap.unwrap_or(usize::MAX), seq: Vec::new(), used, out: Vec::new() };
    s.run();
    s.out.into_iter().map(|seq| Absorber { seq, x }).collect()
}

/// Maximum bipartite matching (Hopcroft–Karp). Returns, per left vertex, its partner.
pub fn max_matching(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    let left = adj.len();
    let mut ml: Vec<Option<usize>> = vec![None; left];
    let mut mr: Vec<Option<usize>> = vec![None; right];
    let mut dist = vec![INF; left];
    loop {
        let mut queue = std::collections::VecDeque::new();
        for u in 0..left {
            if ml[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match mr[v] {
                    None => found = true,
                    Some(w) if dist[w] == INF => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        fn augment(u: usize, adj: &[Vec<usize>], ml: &mut [Option<usize>], mr: &mut [Option<usize>], dist: &mut [usize]) -> bool {
            for &v in &adj[u] {
                let ok = match mr[v] {
                    None => true,
                    Some(w) => dist[w] == dist[u] + 1 && augment(w, adj, ml, mr, dist),
                };
                if ok {
                    ml[u] = Some(v);
                    mr[v] = Some(u);
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..left {
            if ml[u].is_none() {
                augment(u, adj, &mut ml, &mut mr, &mut dist);
            }
        }
    }
    ml
}

/// Up to `count` pairwise edge-disjoint perfect matchings, found by repeatedly
/// taking a maximum matching and deleting its edges. Each matching maps left `i`
/// to right `m[i]`.
pub fn disjoint_perfect_matchings(adj: &[Vec<usize>], count: usize) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut adj: Vec<Vec<usize>> = adj.to_vec();
    let mut out = Vec::new();
    while out.len() < count {
        let m = max_matching(&adj, n);
        if m.iter().any(|p| p.is_none()) {
            break;
        }
        let m: Vec<usize> = m.into_iter().map(|p| p.unwrap()).collect();
        for (u, &v) in m.iter().enumerate() {
            adj[u].retain(|&w| w != v);
        }
        out.push(m);
    }
    out
}

/// `⌈(δ₁ + δ₂ − n)/2⌉` clamped at zero.
pub fn hall_guarantee(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    if n == 0 {
        return 0;
    }
    let d1 = adj.iter().map(|a| a.len()).min().unwrap_or(0);
    let mut right = vec![0usize; n];
    for a in adj {
        for &v in a {
            right[v] += 1;
        }
    }
    let d2 = right.into_iter().min().unwrap_or(0);
    let s = (d1 + d2) as i64 - n as i64;
    if s <= 0 {
        0
    } else {
        (s as usize).div_ceil(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorbParams {
    /// Path length L.
    pub l: usize,
    /// Absorber slots per block.
    pub a: usize,
    /// Spacer length between slots.
    pub ell: usize,
    pub theta: f64,
    /// Walk length per stage; `max(k+1, ⌈n^{1/3}⌉)` when unset.
    pub t_star: Option<usize>,
    pub retries: usize,
    /// Added to `2ρ` in the residual regularity gate.
    pub rho_slack: f64,
    /// Each vertex needs `coverage · ϑ⁴n` absorbing blocks; the default is 3.
    pub coverage: f64,
}

impl Default for AbsorbParams {
    fn default() -> Self {
        Self { l: 12, a: 2, ell: 1, theta: 0.5, t_star: None, retries: 20, rho_slack: 0.0, coverage: 3.0 }
    }
}

impl AbsorbParams {
    pub fn t_star(&self, k: usize, n: usize) -> usize {
        self.t_star.unwrap_or_else(|| (k + 1).max((n as f64).cbrt().ceil() as usize))
    }

    pub fn block_len(&self, k: usize) -> usize {
        self.a * (2 * k + self.ell)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRef {
    pub path: usize,
    /// 0-based index of the block's first vertex in its path.
    pub offset: usize,
    /// Vertices of the outer graph with an absorber among the block's slots.
    pub absorbable: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorbingStructure {
    pub k: usize,
    pub a: usize,
    pub ell: usize,
    pub theta: f64,
    pub paths: Vec<Vec<usize>>,
    pub blocks: Vec<BlockRef>,
    pub sigma: Vec<usize>,
}

impl AbsorbingStructure {
    /// Structure over given paths: every aligned block whose slots leave at most
    /// `ϑ⁴n` vertices of `h_plus` unabsorbable is kept.
    pub fn from_paths(h_plus: &Hypergraph, a: usize, ell: usize, theta: f64, n: usize, paths: Vec<Vec<usize>>) -> Self {
        let k = h_plus.k();
        let bl = a * (2 * k + ell);
        let bad_cap = theta.powi(4) * n as f64;
        let mut blocks = Vec::new();
        let mut sigma = vec![0; paths.len()];
        for (p, seq) in paths.iter().enumerate() {
            if bl == 0 {
                break;
            }
            for i in 0..seq.len() / bl {
                let offset = i * bl;
                let block = &seq[offset..offset + bl];
                let absorbable: Vec<usize> = h_plus
                    .vertices()
                    .iter()
                    .copied()
                    .filter(|&x| slot_for(h_plus, block, x, ell).is_some())
                    .collect();
                let missing = h_plus.n() - absorbable.len();
                if missing as f64 <= bad_cap {
                    blocks.push(BlockRef { path: p, offset, absorbable });
                    sigma[p] += 1;
                }
            }
        }
        Self { k, a, ell, theta, paths, blocks, sigma }
    }

    pub fn empty(k: usize, a: usize, ell: usize, theta: f64) -> Self {
        Self { k, a, ell, theta, paths: Vec::new(), blocks: Vec::new(), sigma: Vec::new() }
    }

    /// `c = Σσ = |𝓑|`.
    pub fn capacity(&self) -> usize {
        self.blocks.len()
    }

    /// `c ≥ ϑ⁴n`.
    pub fn meets_capacity(&self, n: usize) -> bool {
        self.capacity() as f64 >= self.theta.powi(4) * n as f64
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.paths.concat();
        v.sort_unstable();
        v
    }

    pub fn block_seq(&self, b: usize) -> &[usize] {
        let r = &self.blocks[b];
        &self.paths[r.path][r.offset..r.offset + self.a * (2 * self.k + self.ell)]
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            paths: &'a [Vec<usize>],
            blocks: Vec<(usize, usize, usize)>,
            sigma: &'a [usize],
            capacity: usize,
        }
        let blocks = self.blocks.iter().map(|b| (b.path, b.offset, b.absorbable.len())).collect();
        serde_json::to_string(&Dump { paths: &self.paths, blocks, sigma: &self.sigma, capacity: self.capacity() })
            .expect("plain data")
    }
}

/// Lowest-index slot of `block` that is an x-absorber, i.e. `A_x(B)`.
pub fn slot_for(h_plus: &Hypergraph, block: &[usize], x: usize, ell: usize) -> Option<usize> {
    let k = h_plus.k();
    let unit = 2 * k + ell;
    (0..block.len() / unit).find(|&i| is_absorber(h_plus, &block[i * unit..i * unit + 2 * k], x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildReport {
    pub attempts: usize,
    pub stages: usize,
    pub paths_per_stage: usize,
    pub t_star: usize,
    pub failed_stages: usize,
    pub fatal: bool,
    pub failures: Vec<String>,
}

/// Items (i)–(iv) of the construction for a finished structure.
pub fn structure_item_failures(
    h_plus: &Hypergraph,
    h: &Hypergraph,
    s: &AbsorbingStructure,
    l: usize,
    rho_gate: f64,
    coverage: f64,
) -> Vec<String> {
    let n = h.n() as f64;
    let th = s.theta;
    let mut fails = Vec::new();
    if s.paths.len() as f64 > th * th * n / l as f64 {
        fails.push(format!("(i) {} paths > {:.3}", s.paths.len(), th * th * n / l as f64));
    }
    let rest = h.without_vertices(&s.vertices()).expect("structure lies inside host");
    if rest.m() > 0 && regularity_report(&rest).rho() > rho_gate + 1e-12 {
        fails.push(format!("(ii) residual rho {:.4} > {:.4}", regularity_report(&rest).rho(), rho_gate));
    }
    if !s.paths.is_empty() {
        let need = coverage * th.powi(4) * n;
        for &x in h_plus.vertices() {
            let have = s.blocks.iter().filter(|b| b.absorbable.binary_search(&x).is_ok()).count();
            if (have as f64) < need {
                fails.push(format!("(iii) vertex {x} has {have} absorbing blocks < {need:.3}"));
                break;
            }
        }
    }
    for b in &s.blocks {
        if (h_plus.n() - b.absorbable.len()) as f64 > th.powi(4) * n {
            fails.push(format!("(iv) block at path {} offset {} is bad", b.path, b.offset));
            break;
        }
    }
    fails
}

/// Staged random-walk construction of an absorbing structure in `h ⊆ h_plus`,
/// retried as a whole until the post-checks pass.
pub fn build_absorbing_structure(
    h_plus: &Hypergraph,
    h: &Hypergraph,
    params: &AbsorbParams,
    seed: u64,
) -> Result<(AbsorbingStructure, BuildReport)> {
    let k = h.k();
    let n = h.n();
    if params.l == 0 || params.a == 0 || !(0.0..=1.0).contains(&params.theta) {
        return Err(Error::Param("absorbing structure needs L, a > 0 and theta in [0, 1]".into()));
    }
    let t_star = params.t_star(k, n);
    let stages = (params.theta * params.theta * n as f64 / t_star as f64).floor() as usize;
    let per_stage = t_star / params.l;
    let rho_gate = 2.0 * regularity_report(h).rho() + params.rho_slack;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = BuildReport {
        attempts: 0,
        stages,
        paths_per_stage: per_stage,
        t_star,
        failed_stages: 0,
        fatal: false,
        failures: Vec::new(),
    };
    for _ in 0..params.retries.max(1) {
        report.attempts += 1;
        report.failed_stages = 0;
        report.fatal = false;
        let mut residual = h.clone();
        let mut paths: Vec<Vec<usize>> = Vec::new();
        if per_stage > 0 {
            for _ in 0..stages {
                let pfm = match pfm_with_fallback(&residual, rng.gen()) {
                    Ok((w, _)) => w,
                    Err(_) => {
                        report.fatal = true;
                        break;
                    }
                };
                let walk = match WalkSampler::new(&residual, &pfm, params.l)?.sample(t_star, &mut rng) {
                    Ok(w) => w,
                    Err(_) => {
                        report.fatal = true;
                        break;
                    }
                };
                let distinct: BTreeSet<usize> = walk.iter().copied().collect();
                if distinct.len() < walk.len() {
                    report.failed_stages += 1;
                    continue;
                }
                residual = residual.without_vertices(&walk)?;
                for p in 0..per_stage {
                    paths.push(walk[p * params.l..(p + 1) * params.l].to_vec());
                }
                if residual.m() > 0 && regularity_report(&residual).rho() > rho_gate + 1e-12 {
                    report.failed_stages += 1;
                    break;
                }
            }
        }
        if report.fatal {
            report.failures = vec!["fatal: no perfect fractional matching in residual".into()];
            continue;
        }
        let s = AbsorbingStructure::from_paths(h_plus, params.a, params.ell, params.theta, n, paths);
        let fails = structure_item_failures(h_plus, h, &s, params.l, rho_gate, params.coverage);
        if fails.is_empty() {
            report.failures.clear();
            return Ok((s, report));
        }
        report.failures = fails;
    }
    Err(Error::RetriesExhausted { stage: "absorbing-structure".into(), reason: report.failures.join("; ") })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Absorbed {
    /// `φ(P)` for each structure path, in order.
    pub paths: Vec<Vec<usize>>,
    /// `(x, block index)` pairs of the chosen matching.
    pub assignment: Vec<(usize, usize)>,
    /// Number of disjoint perfect matchings the choice was made from.
    pub matchings: usize,
}

/// Insert every `x ∈ X` at the centre of `A_x(B)` for its matched block `B`.
pub fn absorb(h_plus: &Hypergraph, s: &AbsorbingStructure, x_set: &[usize], seed: u64) -> Result<Absorbed> {
    let c = s.capacity();
    if x_set.len() != c {
        return Err(Error::Param(format!("|X| = {} but capacity is {c}", x_set.len())));
    }
    let used: BTreeSet<usize> = s.vertices().into_iter().collect();
    if let Some(x) = x_set.iter().find(|x| used.contains(x)) {
        return Err(Error::Param(format!("vertex {x} of X lies on a structure path")));
    }
    if c == 0 {
        return Ok(Absorbed { paths: s.paths.clone(), assignment: Vec::new(), matchings: 0 });
    }
    let adj: Vec<Vec<usize>> = x_set
        .iter()
        .map(|&x| (0..c).filter(|&b| slot_for(h_plus, s.block_seq(b), x, s.ell).is_some()).collect())
        .collect();
    let family = disjoint_perfect_matchings(&adj, usize::MAX);
    if family.is_empty() {
        let m = max_matching(&adj, c);
        let unmatched: Vec<usize> = x_set.iter().zip(&m).filter(|(_, p)| p.is_none()).map(|(&x, _)| x).collect();
        return Err(Error::AbsorptionInfeasible(unmatched));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = family.choose(&mut rng).expect("nonempty family");
    let unit = 2 * s.k + s.ell;
    let mut inserts: Vec<Vec<(usize, usize)>> = vec![Vec::new(); s.paths.len()];
    let mut assignment = Vec::with_capacity(c);
    for (i, &b) in chosen.iter().enumerate() {
        let x = x_set[i];
        let blk = &s.blocks[b];
        let slot = slot_for(h_plus, s.block_seq(b), x, s.ell).expect("matched along an edge");
        inserts[blk.path].push((blk.offset + slot * unit + s.k, x));
        assignment.push((x, b));
    }
    let mut paths = Vec::with_capacity(s.paths.len());
    for (p, seq) in s.paths.iter().enumerate() {
        let mut out = seq.clone();
        let mut ins = inserts[p].clone();
        ins.sort_unstable_by_key(|a| std::cmp::Reverse(a.0));
        for (pos, x) in ins {
            out.insert(pos, x);
        }
        let k = s.k;
        let ends_ok = out.len() < k || (out[..k] == seq[..k] && out[out.len() - k..] == seq[seq.len() - k..]);
        if !is_tight_path(h_plus, &out) || !ends_ok {
            return Err(Error::Stage { stage: "absorb".into(), reason: format!("path {p} broken after insertion") });
        }
        paths.push(out);
    }
    assignment.sort_unstable();
    Ok(Absorbed { paths, assignment, matchings: family.len() })
}
