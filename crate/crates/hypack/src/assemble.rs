//! Reservoir, probabilistic connection, the layer transform from a path
//! collection to a cycle factor, and the multi-layer packing loop.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::absorb::{absorb, build_absorbing_structure};
use crate::cover::cover;
use crate::error::{stage, Error, Result};
use crate::fracmatch::{pfm_with_fallback, sparsify_intersecting, SparsifyGates};
use crate::hgraph::{neighborhood_bits, regularity_report, Bits, Hypergraph};
use crate::oracles::validate_packing;
use crate::profile::Profile;
use crate::tight::{is_tight_path, path_edges, verify_factor_copy, CycleFactor, FactorShape, FactorsDoc, PathCollection};

/// `(x)_l = x(x-1)...(x-l+1)`.
pub fn falling_factorial(x: usize, l: usize) -> f64 {
    (0..l).map(|i| x.saturating_sub(i) as f64).product()
}

/// Inner sequences `I` over `pool` such that every window of `from ++ I ++ to`
/// that meets `I` is an edge of `f`.
pub fn enumerate_connectors(f: &Hypergraph, from: &[usize], to: &[usize], lambda: usize, pool: &[usize]) -> Vec<Vec<usize>> {
    let k = f.k();
    let blocked: BTreeSet<usize> = from.iter().chain(to).copied().collect();
    let pool: Vec<usize> = pool.iter().copied().filter(|v| !blocked.contains(v)).collect();
    let mut out = Vec::new();
    let mut seq = from.to_vec();
    let mut used = BTreeSet::new();
    fn closes(f: &Hypergraph, seq: &[usize], to: &[usize], k: usize) -> bool {
        (1..k).all(|i| {
            let mut w = seq[seq.len() - (k - i)..].to_vec();
            w.extend_from_slice(&to[..i]);
            f.contains_edge(&w)
        })
    }
    fn go(
        f: &Hypergraph,
        to: &[usize],
        lambda: usize,
        k: usize,
        base: usize,
        pool: &[usize],
        seq: &mut Vec<usize>,
        used: &mut BTreeSet<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if seq.len() - base == lambda {
            if closes(f, seq, to, k) {
                out.push(seq[base..].to_vec());
            }
            return;
        }
        for &v in pool {
            if used.contains(&v) {
                continue;
            }
            let mut w = seq[seq.len() + 1 - k..].to_vec();
            w.push(v);
            if !f.contains_edge(&w) {
                continue;
            }
            used.insert(v);
            seq.push(v);
            go(f, to, lambda, k, base, pool, seq, used, out);
            seq.pop();
            used.remove(&v);
        }
    }
    if from.len() < k.saturating_sub(1) || to.len() < k.saturating_sub(1) || lambda == 0 {
        return out;
    }
    let base = seq.len();
    go(f, to, lambda, k, base, &pool, &mut seq, &mut used, &mut out);
    out
}

/// `(from, to, lambda)`.
type ConnectorKey = (Vec<usize>, Vec<usize>, usize);

#[derive(Debug, Clone, Serialize)]
pub struct Reservoir {
    pub vertices: Vec<usize>,
    pub beta: f64,
    pub ell0: usize,
    pub ell1: usize,
    pub attempts: usize,
    #[serde(skip)]
    table: BTreeMap<ConnectorKey, Vec<Vec<usize>>>,
}

impl Reservoir {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// All connectors with `lambda` inner vertices in `R`, cached per query.
    pub fn connectors(&mut self, f: &Hypergraph, from: &[usize], to: &[usize], lambda: usize) -> &[Vec<usize>] {
        let key = (from.to_vec(), to.to_vec(), lambda);
        let r = &self.vertices;
        self.table.entry(key).or_insert_with(|| enumerate_connectors(f, from, to, lambda, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReservoirOpts {
    pub retries: usize,
    pub audit_pairs: usize,
    pub audit_factor: f64,
    /// Ceiling for `ρ(F - R)`; unchecked when absent.
    pub rho_gate: Option<f64>,
}

fn ordered_edge<R: Rng>(e: &[usize], rng: &mut R) -> Vec<usize> {
    let mut v = e.to_vec();
    v.shuffle(rng);
    v
}

/// Independent inclusion with probability `3β/4`, retried until the size window,
/// the regularity of `F - R`, and the connector audit on sampled end-edge pairs hold.
pub fn build_reservoir(f: &Hypergraph, beta: f64, ell0: usize, ell1: usize, opts: &ReservoirOpts, seed: u64) -> Result<Reservoir> {
    if ell0 > ell1 || ell0 == 0 {
        return Err(Error::Param(format!("need 1 <= ell0 <= ell1, got {ell0} and {ell1}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Param(format!("beta = {beta} outside [0, 1]")));
    }
    let n = f.n() as f64;
    let (lo, hi) = (beta * n / 2.0, beta * n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::from("no attempt");
    for attempt in 1..=opts.retries.max(1) {
        let r: Vec<usize> = f.vertices().iter().copied().filter(|_| rng.gen::<f64>() < 0.75 * beta).collect();
        let size = r.len() as f64;
        if size < lo - 1e-9 || size > hi + 1e-9 {
            last = format!("(i) |R| = {} outside [{lo:.2}, {hi:.2}]", r.len());
            continue;
        }
        let rest = f.without_vertices(&r)?;
        if let Some(g) = opts.rho_gate {
            let rho = regularity_report(&rest).rho();
            if rest.m() > 0 && rho > g + 1e-12 {
                last = format!("(iii) rho(F - R) = {rho:.4} > {g:.4}");
                continue;
            }
        }
        let mut res = Reservoir { vertices: r, beta, ell0, ell1, attempts: attempt, table: BTreeMap::new() };
        let mut audit_fail = None;
        if rest.m() >= 2 {
            'pairs: for _ in 0..opts.audit_pairs {
                let s = rest.edge(rng.gen_range(0..rest.m())).to_vec();
                let t = rest.edge(rng.gen_range(0..rest.m())).to_vec();
                if s.iter().any(|v| t.contains(v)) {
                    continue;
                }
                let (s, t) = (ordered_edge(&s, &mut rng), ordered_edge(&t, &mut rng));
                for l in ell0..=ell1 {
                    let need = opts.audit_factor * falling_factorial(res.len(), l);
                    let have = res.connectors(f, &s, &t, l).len();
                    if (have as f64) < need - 1e-9 {
                        audit_fail = Some(format!("(ii) {have} connectors {s:?} -> {t:?} with {l} inner < {need:.2}"));
                        break 'pairs;
                    }
                }
            }
        }
        match audit_fail {
            Some(m) => last = m,
            None => return Ok(res),
        }
    }
    Err(Error::RetriesExhausted { stage: "reservoir".into(), reason: last })
}

/// One endpoint pair: connect the ordered edge `from` to the ordered edge `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Connection {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub lambda: usize,
}

/// For each pair in order, a uniformly random connector through `R` avoiding all
/// endpoints and every earlier pick.
pub fn connect(f: &Hypergraph, pairs: &[Connection], res: &mut Reservoir, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut avoid: BTreeSet<usize> = pairs.iter().flat_map(|p| p.from.iter().chain(&p.to)).copied().collect();
    let mut out = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let cands: Vec<&Vec<usize>> =
            res.connectors(f, &p.from, &p.to, p.lambda).iter().filter(|c| c.iter().all(|v| !avoid.contains(v))).collect();
        let pick = (*cands.choose(&mut rng).ok_or(Error::ConnectionFailed(i))?).clone();
        avoid.extend(pick.iter().copied());
        out.push(pick);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct LayerReport {
    pub attempts: usize,
    /// Failed attempts per stage.
    pub failures: BTreeMap<String, usize>,
    pub kept_paths: usize,
    pub v1: usize,
    pub reservoir: usize,
    pub structure_paths: usize,
    pub capacity: usize,
    pub l_prime: usize,
    pub cover_paths: usize,
    pub groups: Vec<usize>,
    pub inner: usize,
    pub leftover: usize,
    /// Used F-edges by type relative to the input paths.
    pub f_edge_types: BTreeMap<String, usize>,
    pub stage_ms: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layer {
    pub factor: CycleFactor,
    /// Edges of F on the factor, sorted.
    pub f_edges: Vec<Vec<usize>>,
    pub report: LayerReport,
}

struct Item {
    seq: Vec<usize>,
    sigma: usize,
    structure: Option<usize>,
}

struct LayerCtx<'a> {
    h: &'a Hypergraph,
    f: &'a Hypergraph,
    paths: &'a [Vec<usize>],
    target: &'a FactorShape,
    p: &'a Profile,
    sets: Vec<Vec<usize>>,
    bits: Vec<Bits>,
    eta: f64,
    rho_f: f64,
    path_edges: BTreeSet<Vec<usize>>,
}

impl LayerCtx<'_> {
    fn good(&self, v_hat: &[usize]) -> bool {
        let n = self.h.n() as f64;
        let size = v_hat.len() as f64;
        let d = self.p.delta;
        if size < d * n / 2.0 - 1e-9 || size > 1.5 * d * n + 1e-9 {
            return false;
        }
        let mut mask = Bits::new(self.h.universe());
        for &v in v_hat {
            mask.set(v);
        }
        let need = self.p.good_eta * self.eta * size;
        for i in 0..self.sets.len() {
            for j in i + 1..self.sets.len() {
                if (self.bits[i].and_count_masked(&self.bits[j], &mask) as f64) < need - 1e-9 {
                    return false;
                }
            }
        }
        let sub = self.f.induced(v_hat).expect("subset of V");
        sub.m() == 0 || regularity_report(&sub).rho() <= self.p.good_rho * self.rho_f + self.p.rho_slack + 1e-12
    }
}

fn timed<T>(ms: &mut BTreeMap<String, u64>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f();
    ms.insert(name.to_string(), t.elapsed().as_millis() as u64);
    out
}

/// Largest divisor of `n` in `[lo, hi]`.
fn auto_length(n: usize, lo: usize, hi: usize) -> Option<usize> {
    (lo..=hi.min(n)).rev().find(|d| n.is_multiple_of(*d))
}

/// Split `rem` into `z` parts in `[lo, hi]` as evenly as possible.
fn spread(rem: usize, z: usize, lo: usize, hi: usize) -> Option<Vec<usize>> {
    if z == 0 || rem < z * lo || rem > z * hi {
        return None;
    }
    Some((0..z).map(|i| rem / z + usize::from(i < rem % z)).collect())
}

fn layer_attempt(ctx: &LayerCtx, seed: u64, rep: &mut LayerReport) -> Result<Layer> {
    let (h, f, p) = (ctx.h, ctx.f, ctx.p);
    let k = h.k();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ms = BTreeMap::new();

    let kept: Vec<usize> = timed(&mut ms, "good-subset", || {
        for _ in 0..p.good_retries.max(1) {
            let kept: Vec<usize> = (0..ctx.paths.len()).filter(|_| rng.gen::<f64>() >= p.delta).collect();
            let covered: BTreeSet<usize> = kept.iter().flat_map(|&i| ctx.paths[i].iter().copied()).collect();
            let v_hat: Vec<usize> = h.vertices().iter().copied().filter(|v| !covered.contains(v)).collect();
            if ctx.good(&v_hat) {
                return Ok(kept);
            }
        }
        Err(stage("good-subset", "no good subset within the retry budget"))
    })?;
    let covered: BTreeSet<usize> = kept.iter().flat_map(|&i| ctx.paths[i].iter().copied()).collect();
    let v1: Vec<usize> = h.vertices().iter().copied().filter(|v| !covered.contains(v)).collect();
    let f1 = f.induced(&v1)?;
    rep.kept_paths = kept.len();
    rep.v1 = v1.len();

    let mut res = timed(&mut ms, "reservoir", || {
        let opts = ReservoirOpts {
            retries: p.reservoir_retries,
            audit_pairs: p.audit_pairs,
            audit_factor: p.audit_factor(),
            rho_gate: Some(p.good_rho * regularity_report(&f1).rho() + p.rho_slack),
        };
        build_reservoir(&f1, p.beta, p.ell0, p.ell1, &opts, rng.gen()).map_err(|e| stage("reservoir", e.to_string()))
    })?;
    rep.reservoir = res.len();

    let extended: Vec<Vec<usize>> = timed(&mut ms, "extend", || {
        let mut taken: BTreeSet<usize> = res.vertices.iter().copied().collect();
        let mut out = Vec::new();
        for &i in &kept {
            let path = &ctx.paths[i];
            let (a, b) = (&path[..k], &path[path.len() - k..]);
            let pick = |x: Vec<usize>, taken: &BTreeSet<usize>, rng: &mut ChaCha8Rng| -> Result<usize> {
                let mut x = x;
                x.sort_unstable();
                let cands: Vec<usize> = f
                    .neighborhood(&x)?
                    .into_iter()
                    .filter(|v| v1.binary_search(v).is_ok() && !taken.contains(v))
                    .collect();
                cands.choose(rng).copied().ok_or_else(|| stage("extend", format!("no F-neighbour of {x:?}")))
            };
            let mut u = vec![0; k];
            for j in (0..k).rev() {
                let x: Vec<usize> = u[j + 1..].iter().chain(&a[..j]).copied().collect();
                u[j] = pick(x, &taken, &mut rng)?;
                taken.insert(u[j]);
            }
            let mut v = vec![0; k];
            for j in 0..k {
                let x: Vec<usize> = b[j + 1..].iter().chain(&v[..j]).copied().collect();
                v[j] = pick(x, &taken, &mut rng)?;
                taken.insert(v[j]);
            }
            out.push(u.iter().chain(path).chain(&v).copied().collect());
        }
        Ok(out)
    })?;

    let ext_vertices: BTreeSet<usize> =
        extended.iter().flat_map(|s| s[..k].iter().chain(&s[s.len() - k..])).copied().collect();
    let v2: Vec<usize> = v1.iter().copied().filter(|&v| !res.contains(v) && !ext_vertices.contains(&v)).collect();
    let f2 = f.induced(&v2)?;
    let (structure, _) = timed(&mut ms, "absorbing-structure", || {
        build_absorbing_structure(&f1, &f2, &p.absorb_params(), rng.gen())
            .map_err(|e| stage("absorbing-structure", e.to_string()))
    })?;
    rep.structure_paths = structure.paths.len();
    rep.capacity = structure.capacity();

    let on_structure: BTreeSet<usize> = structure.vertices().into_iter().collect();
    let v3: Vec<usize> = v2.iter().copied().filter(|v| !on_structure.contains(v)).collect();
    let w_hat: Vec<Vec<usize>> = timed(&mut ms, "cover", || {
        if v3.is_empty() {
            return Ok(Vec::new());
        }
        let f3 = f.induced(&v3)?;
        let lp = if p.l_prime > 0 {
            p.l_prime
        } else {
            auto_length(v3.len(), k + 1, p.l_prime_max)
                .ok_or_else(|| stage("cover", format!("no cycle length in [{}, {}] divides {}", k + 1, p.l_prime_max, v3.len())))?
        };
        rep.l_prime = lp;
        let min_deg = f3.vertices().iter().map(|&v| f3.degree(v)).min().unwrap_or(0);
        let r = p.cover_r.min(min_deg / k);
        if r == 0 {
            return Err(stage("cover", format!("F[V3] has minimum degree {min_deg} < k")));
        }
        let run = cover(&f3, lp, r, &p.family(rng.gen()), &p.layer_cover_gates(), rng.gen())
            .map_err(|e| stage("cover", e.to_string()))?;
        let pick = rng.gen_range(0..run.bundle.collections.len());
        Ok(run.bundle.collections[pick].clone())
    })?;
    rep.cover_paths = w_hat.len();

    let mut items: Vec<Item> = extended.into_iter().map(|seq| Item { seq, sigma: 0, structure: None }).collect();
    items.extend(w_hat.into_iter().map(|seq| Item { seq, sigma: 0, structure: None }));
    items.extend(
        structure.paths.iter().enumerate().map(|(j, s)| Item { seq: s.clone(), sigma: structure.sigma[j], structure: Some(j) }),
    );

    let groups: Vec<(Vec<usize>, Vec<usize>)> = timed(&mut ms, "group", || {
        let mut free: Vec<bool> = vec![true; items.len()];
        let mut groups = Vec::new();
        for &li in &ctx.target.lengths {
            let cost = |i: usize| items[i].seq.len() + items[i].sigma + p.ell0;
            let mut order: Vec<usize> = (0..items.len()).filter(|&i| free[i]).collect();
            order.sort_by_key(|&i| (items[i].structure.is_none(), cost(i), i));
            let mut z = Vec::new();
            let mut used = 0;
            for i in order {
                if used + cost(i) <= li {
                    used += cost(i);
                    z.push(i);
                }
            }
            let base: usize = z.iter().map(|&i| items[i].seq.len() + items[i].sigma).sum();
            let lambdas = spread(li - base, z.len(), p.ell0, p.ell1)
                .ok_or_else(|| stage("group", format!("length {li} cannot be budgeted over {} paths", z.len())))?;
            for &i in &z {
                free[i] = false;
            }
            groups.push((z, lambdas));
        }
        if let Some(i) = free.iter().position(|&f| f) {
            return Err(stage("group", format!("path {i} left without a cycle")));
        }
        Ok(groups)
    })?;
    rep.groups = groups.iter().map(|g| g.0.len()).collect();

    let mut pairs = Vec::new();
    for (z, lambdas) in &groups {
        for (g, &i) in z.iter().enumerate() {
            let next = &items[z[(g + 1) % z.len()]].seq;
            let cur = &items[i].seq;
            pairs.push(Connection { from: cur[cur.len() - k..].to_vec(), to: next[..k].to_vec(), lambda: lambdas[g] });
        }
    }
    let inner = timed(&mut ms, "connect", || connect(&f1, &pairs, &mut res, rng.gen()).map_err(|e| stage("connect", e.to_string())))?;
    rep.inner = inner.iter().map(|c| c.len()).sum();

    let on_cycles: BTreeSet<usize> = items.iter().flat_map(|i| i.seq.iter()).chain(inner.iter().flatten()).copied().collect();
    let x_set: Vec<usize> = v1.iter().copied().filter(|v| !on_cycles.contains(v)).collect();
    rep.leftover = x_set.len();
    if x_set.len() != structure.capacity() {
        return Err(stage("budget", format!("|X| = {} but capacity is {}", x_set.len(), structure.capacity())));
    }
    let absorbed = timed(&mut ms, "absorb", || {
        absorb(&f1, &structure, &x_set, rng.gen()).map_err(|e| stage("absorb", e.to_string()))
    })?;

    let mut cycles = Vec::new();
    let mut ci = 0;
    for (z, _) in &groups {
        let mut seq = Vec::new();
        for &i in z {
            match items[i].structure {
                Some(j) => seq.extend_from_slice(&absorbed.paths[j]),
                None => seq.extend_from_slice(&items[i].seq),
            }
            seq.extend_from_slice(&inner[ci]);
            ci += 1;
        }
        cycles.push(seq);
    }
    let factor = CycleFactor::new(cycles);
    let check = verify_factor_copy(h, &factor, ctx.target);
    if !check.ok() {
        return Err(stage("verify", format!("{:?}", check.issues)));
    }
    let mut f_edges = Vec::new();
    for e in factor.edges(k) {
        if f.contains_edge(&e) {
            f_edges.push(e);
        } else if !ctx.path_edges.contains(&e) {
            return Err(stage("verify", format!("edge {e:?} lies neither in F nor on the input paths")));
        }
    }
    f_edges.sort();
    let typed = PathCollection::new(k, ctx.paths.to_vec())?;
    for e in &f_edges {
        *rep.f_edge_types.entry(typed.classify(e).to_string()).or_default() += 1;
    }
    rep.stage_ms = ms;
    Ok(Layer { factor, f_edges, report: rep.clone() })
}

/// Check everything the layer needs before any randomness is spent.
pub fn layer_preconditions(h: &Hypergraph, f: &Hypergraph, paths: &[Vec<usize>], target: &FactorShape, p: &Profile) -> Result<()> {
    let n = h.n();
    if target.total() != n {
        return Err(Error::Param(format!("target lengths sum to {} but n = {n}", target.total())));
    }
    let girth = target.girth().unwrap_or(0);
    if (girth as f64) < p.girth_mult * p.l as f64 {
        return Err(Error::Param(format!("target girth {girth} below {} * {}", p.girth_mult, p.l)));
    }
    if let Some(e) = f.edges().iter().find(|e| !h.contains_edge(e)) {
        return Err(Error::Param(format!("F-edge {e:?} is not an edge of H")));
    }
    let col = PathCollection::new(h.k(), paths.to_vec())?;
    for q in paths {
        if !is_tight_path(h, q) {
            return Err(Error::Param(format!("{q:?} is not a tight path of H")));
        }
        if let Some(e) = path_edges(q, h.k()).into_iter().find(|e| f.contains_edge(e)) {
            return Err(Error::Param(format!("path edge {e:?} lies in F")));
        }
    }
    if (col.coverage() as f64) < (1.0 - p.mu) * n as f64 - 1e-9 {
        return Err(Error::Param(format!("paths cover {} < (1 - mu) n", col.coverage())));
    }
    Ok(())
}

/// Build a copy of `target` inside `paths ∪ F`, retrying whole attempts.
pub fn layer_transform(
    h: &Hypergraph,
    f: &Hypergraph,
    paths: &[Vec<usize>],
    target: &FactorShape,
    p: &Profile,
    seed: u64,
) -> Result<Layer> {
    layer_preconditions(h, f, paths, target, p)?;
    let (sets, bits) = neighborhood_bits(f);
    let report = regularity_report(f);
    let ctx = LayerCtx {
        h,
        f,
        paths,
        target,
        p,
        sets,
        bits,
        eta: report.eta_star().unwrap_or(0.0),
        rho_f: report.rho(),
        path_edges: paths.iter().flat_map(|q| path_edges(q, h.k())).collect(),
    };
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=p.layer_retries.max(1) {
        let mut rep = LayerReport { attempts: attempt, ..Default::default() };
        match layer_attempt(&ctx, master.gen(), &mut rep) {
            Ok(mut layer) => {
                layer.report.failures = failures;
                return Ok(layer);
            }
            Err(Error::Stage { stage, .. }) => *failures.entry(stage).or_default() += 1,
            Err(e) => return Err(e),
        }
    }
    let summary = failures.iter().map(|(s, c)| format!("{s}: {c}")).join(", ");
    Err(Error::RetriesExhausted { stage: "layer".into(), reason: summary })
}

/// Consumed F-codegree of every (k-1)-set, incremental and per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageLedger {
    pub k: usize,
    pub cap: usize,
    pub min_codegree: usize,
    pub consumed: BTreeMap<Vec<usize>, usize>,
    /// `Y_i^x`: codegree consumed in layer `i`.
    pub layers: Vec<BTreeMap<Vec<usize>, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerSnapshot {
    pub layer: usize,
    pub cap: usize,
    pub max_consumed: usize,
    pub argmax: Option<Vec<usize>>,
    pub consumed_edges: usize,
}

impl UsageLedger {
    pub fn new(k: usize, n: usize, p: &Profile) -> Self {
        Self {
            k,
            cap: (p.cap_fraction * n as f64).ceil() as usize,
            min_codegree: p.min_codegree,
            consumed: BTreeMap::new(),
            layers: Vec::new(),
        }
    }

    fn tally(k: usize, edges: &[Vec<usize>]) -> BTreeMap<Vec<usize>, usize> {
        let mut out = BTreeMap::new();
        for e in edges {
            for x in e.iter().copied().combinations(k - 1) {
                *out.entry(x).or_default() += 1;
            }
        }
        out
    }

    pub fn record(&mut self, f_edges: &[Vec<usize>]) {
        let y = Self::tally(self.k, f_edges);
        for (x, c) in &y {
            *self.consumed.entry(x.clone()).or_default() += c;
        }
        self.layers.push(y);
    }

    /// From-scratch consumption over the F-edges of every layer.
    pub fn recompute(k: usize, layers: &[Vec<Vec<usize>>]) -> BTreeMap<Vec<usize>, usize> {
        Self::tally(k, &layers.concat())
    }

    /// Every (k-1)-set `x` must have consumed at most `cap` F-edges and keep
    /// at least `min_codegree` unconsumed ones.
    pub fn check(&self, f: &Hypergraph) -> Result<()> {
        for x in f.ksets_minus_one() {
            let used = self.consumed.get(&x).copied().unwrap_or(0);
            let d = f.codegree(&x)?;
            let cap = self.cap.min(d.saturating_sub(self.min_codegree));
            if used > cap || d < self.min_codegree {
                return Err(Error::BudgetExceeded { set: x, used, cap });
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        let best = self.consumed.iter().max_by_key(|(x, c)| (**c, std::cmp::Reverse((*x).clone())));
        LedgerSnapshot {
            layer: self.layers.len(),
            cap: self.cap,
            max_consumed: best.map_or(0, |(_, c)| *c),
            argmax: best.map(|(x, _)| x.clone()),
            consumed_edges: self.consumed.values().sum::<usize>() / self.k.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Packing {
    pub requested: usize,
    pub factors: Vec<CycleFactor>,
    pub layers: Vec<LayerReport>,
    pub ledger: Vec<LedgerSnapshot>,
    /// Why the loop stopped early, if it did.
    pub failure: Option<String>,
}

impl Packing {
    pub fn complete(&self) -> bool {
        self.failure.is_none() && self.factors.len() == self.requested
    }
}

/// Turn path collection `i` into a copy of `targets[i]` for each `i`, with F shrinking
/// by the consumed edges after every layer.
pub fn pack_factors(
    h: &Hypergraph,
    f: &Hypergraph,
    collections: &[Vec<Vec<usize>>],
    targets: &[FactorShape],
    p: &Profile,
    seed: u64,
) -> Result<Packing> {
    let k = h.k();
    if targets.len() > collections.len() {
        return Err(Error::Param(format!("{} targets but only {} path collections", targets.len(), collections.len())));
    }
    for col in collections {
        if let Some(e) = col.iter().flat_map(|q| path_edges(q, k)).find(|e| f.contains_edge(e)) {
            return Err(Error::Param(format!("cover edge {e:?} lies in F")));
        }
    }
    let mut ledger = UsageLedger::new(k, h.n(), p);
    let mut out = Packing { requested: targets.len(), factors: Vec::new(), layers: Vec::new(), ledger: Vec::new(), failure: None };
    let mut consumed: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, target) in targets.iter().enumerate() {
        ledger.check(f)?;
        let fi = f.remove_edge_sets(&consumed.concat());
        match layer_transform(h, &fi, &collections[i], target, p, rng.gen()) {
            Ok(layer) => {
                ledger.record(&layer.f_edges);
                consumed.push(layer.f_edges);
                if UsageLedger::recompute(k, &consumed) != ledger.consumed {
                    return Err(stage("ledger", "incremental and recomputed consumption differ"));
                }
                out.ledger.push(ledger.snapshot());
                out.factors.push(layer.factor);
                out.layers.push(layer.report);
            }
            Err(e @ Error::Param(_)) => return Err(e),
            Err(e) => {
                out.failure = Some(format!("layer {i}: {e}"));
                break;
            }
        }
    }
    let report = validate_packing(h, &out.factors, Some(&targets[..out.factors.len()]));
    if !report.pass() {
        return Err(stage("pack", format!("emitted factors fail validation: {:?}", report)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverSummary {
    pub l: usize,
    pub coverage: Vec<usize>,
    pub gates_met: bool,
    pub attempts: usize,
    pub weight_range: (f64, f64),
    pub exact: bool,
}

/// Everything needed to reproduce and audit one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub profile: Profile,
    pub n: usize,
    pub k: usize,
    pub targets: Vec<FactorShape>,
    pub requested: usize,
    pub achieved: usize,
    pub reserve_edges: usize,
    pub reserve_rho: f64,
    pub reserve_eta: Option<f64>,
    pub sparsify_attempts: usize,
    pub cover: Option<CoverSummary>,
    pub layers: Vec<LayerReport>,
    pub ledger: Vec<LedgerSnapshot>,
    pub failure: Option<String>,
    pub factors: FactorsDoc,
    pub elapsed_ms: u64,
}

impl Manifest {
    /// Zero every wall-clock field so identical runs compare byte-for-byte.
    pub fn normalize(&mut self) {
        self.elapsed_ms = 0;
        for l in &mut self.layers {
            for v in l.stage_ms.values_mut() {
                *v = 0;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub factors: Vec<CycleFactor>,
    pub manifest: Manifest,
}

impl Decomposition {
    pub fn complete(&self) -> bool {
        self.manifest.failure.is_none() && self.manifest.achieved == self.manifest.requested
    }
}

/// Factor shapes separated by `;`, cycle lengths within a factor by `,` (e.g. `12;4,8`).
pub fn parse_targets(text: &str) -> Result<Vec<FactorShape>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|f| {
            f.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| Error::Param(format!("bad cycle length {x:?}"))))
                .collect::<Result<Vec<_>>>()
                .map(FactorShape::new)
        })
        .collect()
}

/// Target shapes must partition `n` and respect the girth gate.
pub fn check_targets(n: usize, targets: &[FactorShape], p: &Profile) -> Result<()> {
    for t in targets {
        if t.total() != n {
            return Err(Error::Param(format!("target {:?} sums to {} but n = {n}", t.lengths, t.total())));
        }
        let g = t.girth().unwrap_or(0);
        if (g as f64) < p.girth_mult * p.l as f64 {
            return Err(Error::Param(format!("target girth {g} below {} * {}", p.girth_mult, p.l)));
        }
    }
    Ok(())
}

/// Reserve graph by sparsification, global path cover of `H - F`, then the packing loop.
pub fn decompose(h: &Hypergraph, targets: &[FactorShape], p: &Profile, seed: u64) -> Result<Decomposition> {
    let start = Instant::now();
    check_targets(h.n(), targets, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, _) = pfm_with_fallback(h, rng.gen()).map_err(|e| stage("pfm", e.to_string()))?;
    let gates = SparsifyGates { eta_min: p.reserve_eta_min, rho_max: p.reserve_rho_max, retries: p.sparsify_retries };
    let sp = sparsify_intersecting(h, &h.spanning(&[]), p.reserve, &w, rng.gen(), &gates)
        .map_err(|e| stage("sparsify", e.to_string()))?;
    let f = sp.graph;
    let rest = h.remove_edge_sets(f.edges());
    let mut manifest = Manifest {
        seed,
        profile: p.clone(),
        n: h.n(),
        k: h.k(),
        targets: targets.to_vec(),
        requested: targets.len(),
        achieved: 0,
        reserve_edges: f.m(),
        reserve_rho: sp.report.rho(),
        reserve_eta: sp.report.eta_star(),
        sparsify_attempts: sp.attempts,
        cover: None,
        layers: Vec::new(),
        ledger: Vec::new(),
        failure: None,
        factors: FactorsDoc::new(&[]),
        elapsed_ms: 0,
    };
    let mut factors = Vec::new();
    if !targets.is_empty() {
        match cover(&rest, p.l, targets.len(), &p.family(rng.gen()), &p.cover_gates(), rng.gen()) {
            Ok(run) => {
                manifest.cover = Some(CoverSummary {
                    l: p.l,
                    coverage: run.bundle.coverage.clone(),
                    gates_met: run.cycles.gates_met,
                    attempts: run.cycles.attempts,
                    weight_range: run.weight_range,
                    exact: run.exact,
                });
                if !run.cycles.gates_met {
                    manifest.failure = Some(format!("cover: coverage {:?} below (1 - mu) n", run.bundle.coverage));
                } else {
                    let packing = pack_factors(h, &f, &run.bundle.collections, targets, p, rng.gen())?;
                    manifest.achieved = packing.factors.len();
                    manifest.layers = packing.layers;
                    manifest.ledger = packing.ledger;
                    manifest.failure = packing.failure;
                    factors = packing.factors;
                }
            }
            Err(e) => manifest.failure = Some(format!("cover: {e}")),
        }
    }
    manifest.factors = FactorsDoc::new(&factors);
    manifest.elapsed_ms = start.elapsed().as_millis() as u64;
    Ok(Decomposition { factors, manifest })
}

/// Independent runs over `seeds` in parallel; the first complete run in seed order
/// wins, otherwise the run with the most factors (earliest on ties).
pub fn decompose_parallel(h: &Hypergraph, targets: &[FactorShape], p: &Profile, seeds: &[u64]) -> Result<Decomposition> {
    let runs: Vec<Result<Decomposition>> = seeds.par_iter().map(|&s| decompose(h, targets, p, s)).collect();
    let mut best: Option<Decomposition> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(d) if d.complete() => return Ok(d),
            Ok(d) => {
                if best.as_ref().is_none_or(|b| d.manifest.achieved > b.manifest.achieved) {
                    best = Some(d);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| Error::Param("no seeds given".into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k12_profile() -> Profile {
        Profile { delta: 0.7, audit_pairs: 0, mu: 0.5, ..Profile::default() }
    }

    #[test]
    fn test_falling_factorial() {
        assert_eq!(falling_factorial(5, 2), 20.0);
        assert_eq!(falling_factorial(3, 4), 0.0);
        assert_eq!(falling_factorial(4, 0), 1.0);
    }

    #[test]
    fn test_reservoir_full_beta() {
        let f = Hypergraph::complete(3, 10);
        let opts = ReservoirOpts { retries: 200, audit_pairs: 0, audit_factor: 1.0, rho_gate: None };
        let r = build_reservoir(&f, 1.0, 2, 4, &opts, 3).unwrap();
        assert!(r.len() >= 5 && r.len() <= 10);
        assert!(build_reservoir(&f, 0.4, 4, 2, &opts, 3).is_err());
    }

    #[test]
    fn test_reservoir_k14_audit() {
        let f = Hypergraph::complete(3, 14);
        let opts = ReservoirOpts { retries: 50, audit_pairs: 50, audit_factor: 0.4, rho_gate: Some(0.1) };
        let r = build_reservoir(&f, 0.4, 2, 4, &opts, 7).unwrap();
        assert!((r.len() as f64) >= 2.8 && (r.len() as f64) <= 5.6);
    }

    #[test]
    fn test_connectors_complete_count() {
        let f = Hypergraph::complete(3, 9);
        let pool: Vec<usize> = (6..9).collect();
        let c = enumerate_connectors(&f, &[0, 1, 2], &[3, 4, 5], 2, &pool);
        assert_eq!(c.len(), 6);
        for inner in &c {
            let seq: Vec<usize> = [0, 1, 2].iter().chain(inner).chain(&[3, 4, 5]).copied().collect();
            assert!(is_tight_path(&f, &seq));
        }
    }

    #[test]
    fn test_connect_examples() {
        let f = Hypergraph::complete(3, 9);
        let mut res = Reservoir { vertices: vec![6, 7, 8], beta: 0.4, ell0: 2, ell1: 2, attempts: 1, table: BTreeMap::new() };
        assert!(connect(&f, &[], &mut res, 0).unwrap().is_empty());
        let pair = Connection { from: vec![0, 1, 2], to: vec![3, 4, 5], lambda: 2 };
        let w = connect(&f, &[pair], &mut res, 1).unwrap();
        let seq: Vec<usize> = [0, 1, 2].iter().chain(&w[0]).chain(&[3, 4, 5]).copied().collect();
        assert!(is_tight_path(&f, &seq));
    }

    #[test]
    fn test_connect_shared_vertex_fails_second() {
        // Graph edges: paths 0-a-b-1 and 2-b-c-3 are the only connectors (k = 2).
        let (a, b, c) = (4, 5, 6);
        let edges = vec![vec![0, a], vec![a, b], vec![b, 1], vec![2, b], vec![b, c], vec![c, 3]];
        let f = Hypergraph::new(2, 7, edges).unwrap();
        let mut res = Reservoir { vertices: vec![a, b, c], beta: 0.4, ell0: 2, ell1: 2, attempts: 1, table: BTreeMap::new() };
        let pairs = vec![
            Connection { from: vec![0], to: vec![1], lambda: 2 },
            Connection { from: vec![2], to: vec![3], lambda: 2 },
        ];
        assert_eq!(connect(&f, &pairs[..1], &mut res, 0).unwrap(), vec![vec![a, b]]);
        assert_eq!(connect(&f, &pairs, &mut res, 0), Err(Error::ConnectionFailed(1)));
    }

    #[test]
    fn test_spread_and_auto_length() {
        assert_eq!(spread(7, 2, 2, 6), Some(vec![4, 3]));
        assert_eq!(spread(13, 2, 2, 6), None);
        assert_eq!(spread(3, 2, 2, 6), None);
        assert_eq!(auto_length(8, 4, 12), Some(8));
        assert_eq!(auto_length(9, 4, 6), None);
        assert_eq!(auto_length(12, 4, 6), Some(6));
    }

    fn k12_fixture() -> (Hypergraph, Hypergraph, Vec<Vec<usize>>) {
        let h = Hypergraph::complete(3, 12);
        let paths = vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]];
        let used: Vec<Vec<usize>> = paths.iter().flat_map(|q| path_edges(q, 3)).collect();
        let f = h.remove_edge_sets(&used);
        (h, f, paths)
    }

    #[test]
    fn test_layer_k12_hamilton() {
        let (h, f, paths) = k12_fixture();
        let p = Profile { l: 5, ..k12_profile() };
        let target = FactorShape::hamilton(12);
        let layer = layer_transform(&h, &f, &paths, &target, &p, 11).unwrap();
        assert!(verify_factor_copy(&h, &layer.factor, &target).ok());
        assert!(layer.f_edges.iter().all(|e| f.contains_edge(e)));
        assert_eq!(layer.report.leftover, layer.report.capacity);
    }

    #[test]
    fn test_layer_param_errors() {
        let (h, f, paths) = k12_fixture();
        let p = Profile { l: 5, ..k12_profile() };
        let short = FactorShape::new(vec![4, 8]);
        assert!(matches!(layer_transform(&h, &f, &paths, &short, &p, 0), Err(Error::Param(_))));
        let wrong = FactorShape::new(vec![11]);
        assert!(matches!(layer_transform(&h, &f, &paths, &wrong, &p, 0), Err(Error::Param(_))));
        assert!(matches!(layer_transform(&h, &h, &paths, &FactorShape::hamilton(12), &p, 0), Err(Error::Param(_))));
    }

    #[test]
    fn test_ledger_recompute_and_gate() {
        let p = Profile::default();
        let mut l = UsageLedger::new(3, 12, &p);
        assert_eq!(l.cap, 3);
        let a = vec![vec![0, 1, 2], vec![1, 2, 3]];
        let b = vec![vec![1, 2, 4]];
        l.record(&a);
        l.record(&b);
        assert_eq!(UsageLedger::recompute(3, &[a, b]), l.consumed);
        assert_eq!(l.consumed[&vec![1, 2]], 3);
        let h = Hypergraph::complete(3, 8);
        assert!(l.check(&h).is_ok());
        l.record(&[vec![1, 2, 5]]);
        assert!(matches!(l.check(&h), Err(Error::BudgetExceeded { used: 4, .. })));
    }

    #[test]
    fn test_ledger_tiny_codegree_trips() {
        let h = Hypergraph::complete(3, 8);
        let f = h.remove_edge_sets(&(2..8).map(|v| vec![0, 1, v]).collect::<Vec<_>>());
        let l = UsageLedger::new(3, 8, &Profile::default());
        assert_eq!(l.check(&f), Err(Error::BudgetExceeded { set: vec![0, 1], used: 0, cap: 0 }));
    }

    #[test]
    fn test_pack_single_equals_layer() {
        let (h, f, paths) = k12_fixture();
        let p = Profile { l: 5, ..k12_profile() };
        let target = FactorShape::hamilton(12);
        let pk = pack_factors(&h, &f, std::slice::from_ref(&paths), std::slice::from_ref(&target), &p, 5).unwrap();
        assert!(pk.complete());
        assert_eq!(pk.factors.len(), 1);
        assert_eq!(pk.ledger[0].layer, 1);
    }
}
