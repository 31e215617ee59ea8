//! (L,ω)-random walks: transition law, seeded sampler, and the tuple-law check.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracmatch::EdgeWeighting;
use crate::hgraph::Hypergraph;
use crate::oracles::walk_distribution;
use crate::scalar::{Scalar, Q};

/// Memory length `min(k-1, (t-1) mod L)` for step `t` (1-based).
pub fn memory(k: usize, l: usize, t: usize) -> usize {
    (k - 1).min((t - 1) % l)
}

/// Unnormalised extension weights `ω(x ∪ {v})` for every `v ∉ x`, with `x` sorted.
fn extension_weights<S: Scalar>(h: &Hypergraph, w: &EdgeWeighting<S>, x: &[usize]) -> Result<Vec<(usize, S)>> {
    let mut acc: BTreeMap<usize, S> = BTreeMap::new();
    let ids: Vec<usize> = if x.is_empty() { (0..h.m()).collect() } else { h.containing_edges(x)? };
    for id in ids {
        for &v in h.edge(id) {
            if x.binary_search(&v).is_err() {
                let e = acc.entry(v).or_insert_with(S::zero);
                *e = e.clone() + w.weight(id).clone();
            }
        }
    }
    Ok(acc.into_iter().filter(|(_, p)| p.is_positive()).collect())
}

fn suffix_set(history: &[usize], m: usize) -> Vec<usize> {
    let mut x = history[history.len() - m..].to_vec();
    x.sort_unstable();
    x
}

/// Law of `X_t` given `X_1..X_{t-1} = history`, with `t = history.len() + 1`.
///
/// `P(v) = ω(suffix + v) / ((k - m) ω(suffix))`; the support excludes the suffix.
pub fn transition_dist<S: Scalar>(
    h: &Hypergraph,
    w: &EdgeWeighting<S>,
    history: &[usize],
    l: usize,
) -> Result<Vec<(usize, S)>> {
    if l == 0 {
        return Err(Error::Param("L must be positive".into()));
    }
    if let Some(&v) = history.iter().find(|&&v| !h.has_vertex(v)) {
        return Err(Error::Domain(format!("vertex {v} not in host")));
    }
    let k = h.k();
    let m = memory(k, l, history.len() + 1);
    let x = suffix_set(history, m);
    let ext = extension_weights(h, w, &x)?;
    let denom = w.omega(h, &x)? * S::from_usize(k - m);
    if !denom.is_positive() || ext.is_empty() {
        return Err(Error::StuckWalk(history.to_vec()));
    }
    Ok(ext.into_iter().map(|(v, p)| (v, p / denom.clone())).collect())
}

/// Seeded (L,ω)-walk sampler with a CDF cached per conditioning set.
pub struct WalkSampler<'a> {
    h: &'a Hypergraph,
    w: &'a EdgeWeighting<f64>,
    l: usize,
    cache: HashMap<Vec<usize>, (Vec<usize>, Vec<f64>)>,
}

impl<'a> WalkSampler<'a> {
    pub fn new(h: &'a Hypergraph, w: &'a EdgeWeighting<f64>, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Param("L must be positive".into()));
        }
        Ok(Self { h, w, l, cache: HashMap::new() })
    }

    fn step<R: Rng>(&mut self, history: &[usize], rng: &mut R) -> Result<usize> {
        let m = memory(self.h.k(), self.l, history.len() + 1);
        let x = suffix_set(history, m);
        if !self.cache.contains_key(&x) {
            let ext = extension_weights(self.h, self.w, &x)?;
            let mut total = 0.0;
            let mut support = Vec::with_capacity(ext.len());
            let mut cdf = Vec::with_capacity(ext.len());
            for (v, p) in ext {
                total += p;
                support.push(v);
                cdf.push(total);
            }
            self.cache.insert(x.clone(), (support, cdf));
        }
        let (support, cdf) = &self.cache[&x];
        let total = match cdf.last() {
            Some(&t) if t > 0.0 => t,
            _ => return Err(Error::StuckWalk(history.to_vec())),
        };
        let u = rng.gen::<f64>() * total;
        let i = cdf.partition_point(|&c| c <= u).min(support.len() - 1);
        Ok(support[i])
    }

    /// One walk `X_1..X_{t_star}`.
    pub fn sample<R: Rng>(&mut self, t_star: usize, rng: &mut R) -> Result<Vec<usize>> {
        let mut seq = Vec::with_capacity(t_star);
        for _ in 0..t_star {
            let v = self.step(&seq, rng)?;
            seq.push(v);
        }
        Ok(seq)
    }
}

pub fn sample_walk(h: &Hypergraph, w: &EdgeWeighting<f64>, l: usize, t_star: usize, seed: u64) -> Result<Vec<usize>> {
    if t_star == 0 {
        return Err(Error::Param("t_star must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WalkSampler::new(h, w, l)?.sample(t_star, &mut rng)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Closed-form law of an ordered j-tuple ending at step `t <= L`:
/// `(k-j)! ω(tuple) / (k! ω(∅))`, zero on tuples with repeats.
pub fn tuple_formula(h: &Hypergraph, w: &EdgeWeighting<Q>, tuple: &[usize]) -> Result<Q> {
    let k = h.k();
    let mut set = tuple.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.len() != tuple.len() || tuple.len() > k {
        return Ok(Q::from_usize(0));
    }
    let num = w.omega(h, &set)? * Q::from_usize(factorial(k - tuple.len()));
    Ok(num / (w.total() * Q::from_usize(factorial(k))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleLaw {
    pub tuple: Vec<usize>,
    #[serde(serialize_with = "crate::scalar::serialize_q")]
    pub enumerated: Q,
    #[serde(serialize_with = "crate::scalar::serialize_q")]
    pub formula: Q,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleMarginals {
    pub l: usize,
    pub t: usize,
    pub j: usize,
    pub entries: Vec<TupleLaw>,
}

impl TupleMarginals {
    pub fn agree(&self) -> bool {
        self.entries.iter().all(|e| e.enumerated == e.formula)
    }

    /// Lines `tuple : p_enum p_formula`.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                let t: Vec<String> = e.tuple.iter().map(|v| v.to_string()).collect();
                format!("{} : {} {}\n", t.join(" "), e.enumerated.format_value(), e.formula.format_value())
            })
            .collect()
    }
}

fn marginals_from_law(h: &Hypergraph, w: &EdgeWeighting<Q>, law: &[(Vec<usize>, Q)], t: usize, j: usize) -> Result<Vec<TupleLaw>> {
    let mut enumerated: BTreeMap<Vec<usize>, Q> = BTreeMap::new();
    for (seq, p) in law {
        let key = seq[t - j..t].to_vec();
        let e = enumerated.entry(key).or_insert_with(|| Q::from_usize(0));
        *e = e.clone() + p.clone();
    }
    let mut keys: Vec<Vec<usize>> = enumerated.keys().cloned().collect();
    for e in h.edges() {
        for sub in itertools::Itertools::combinations(e.iter().copied(), j) {
            for perm in itertools::Itertools::permutations(sub.into_iter(), j) {
                keys.push(perm);
            }
        }
    }
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|tuple| {
            let formula = tuple_formula(h, w, &tuple)?;
            let enumerated = enumerated.get(&tuple).cloned().unwrap_or_else(|| Q::from_usize(0));
            Ok(TupleLaw { tuple, enumerated, formula })
        })
        .collect()
}

/// Both routes for `P[X_{t-j+1}..X_t = tuple]`: exhaustive enumeration and the closed form.
pub fn tuple_marginal_oracle(
    h: &Hypergraph,
    w: &EdgeWeighting<Q>,
    l: usize,
    t: usize,
    j: usize,
    cap: usize,
) -> Result<TupleMarginals> {
    if t == 0 || t > l || j == 0 || j > h.k().min(t) {
        return Err(Error::Param(format!("need 1 <= j <= min(k, t) and 1 <= t <= L (t={t}, L={l}, j={j})")));
    }
    let law = walk_distribution(h, w, l, t, cap)?;
    Ok(TupleMarginals { l, t, j, entries: marginals_from_law(h, w, &law, t, j)? })
}

/// Every `(t, j)` with `t <= L`, `j <= min(k, t, j_max)` from one enumeration to depth `L`.
pub fn tuple_marginals_upto(
    h: &Hypergraph,
    w: &EdgeWeighting<Q>,
    l: usize,
    j_max: usize,
    cap: usize,
) -> Result<Vec<TupleMarginals>> {
    let mut out = Vec::new();
    let mut law = walk_distribution(h, w, l, l, cap)?;
    for t in (1..=l).rev() {
        if t < l {
            let mut shorter: BTreeMap<Vec<usize>, Q> = BTreeMap::new();
            for (seq, p) in law {
                let e = shorter.entry(seq[..t].to_vec()).or_insert_with(|| Q::from_usize(0));
                *e = e.clone() + p;
            }
            law = shorter.into_iter().collect();
        }
        for j in 1..=h.k().min(t).min(j_max) {
            out.push(TupleMarginals { l, t, j, entries: marginals_from_law(h, w, &law, t, j)? });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub trials: usize,
    pub hits: usize,
    pub rate: f64,
    /// Half-width of the 95% normal interval.
    pub radius: f64,
}

/// Fraction of sampled walks with no repeated vertex.
pub fn self_avoiding_rate(
    h: &Hypergraph,
    w: &EdgeWeighting<f64>,
    l: usize,
    t_star: usize,
    trials: usize,
    seed: u64,
) -> Result<RateEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = WalkSampler::new(h, w, l)?;
    let mut seen = vec![usize::MAX; h.universe()];
    let mut hits = 0;
    for trial in 0..trials {
        let walk = sampler.sample(t_star, &mut rng)?;
        let mut ok = true;
        for &v in &walk {
            if seen[v] == trial {
                ok = false;
                break;
            }
            seen[v] = trial;
        }
        hits += ok as usize;
    }
    let rate = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
    let radius = if trials == 0 { 1.0 } else { 1.96 * (rate * (1.0 - rate) / trials as f64).sqrt() };
    Ok(RateEstimate { trials, hits, rate, radius })
}

/// One walk per line, space-separated.
pub fn walks_to_text(walks: &[Vec<usize>]) -> String {
    walks
        .iter()
        .map(|w| {
            let s: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            s.join(" ") + "\n"
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracmatch::uniform_weighting;
    use num_traits::One;

    #[test]
    fn test_initial_law_uniform_under_pfm() {
        let h = Hypergraph::complete(3, 5);
        let w = uniform_weighting::<Q>(&h).unwrap();
        let d = transition_dist(&h, &w, &[], 4).unwrap();
        assert_eq!(d.len(), 5);
        assert!(d.iter().all(|(_, p)| *p == Q::from_frac(1, 5)));
    }

    #[test]
    fn test_k4_second_step() {
        let h = Hypergraph::complete(3, 4);
        let w = uniform_weighting::<Q>(&h).unwrap();
        let d = transition_dist(&h, &w, &[0], 3).unwrap();
        assert_eq!(d, vec![(1, Q::from_frac(1, 3)), (2, Q::from_frac(1, 3)), (3, Q::from_frac(1, 3))]);
    }

    #[test]
    fn test_memory_reset() {
        assert_eq!(memory(3, 4, 1), 0);
        assert_eq!(memory(3, 4, 4), 2);
        assert_eq!(memory(3, 4, 5), 0);
        assert_eq!(memory(3, 2, 2), 1);
        let h = Hypergraph::complete(3, 5);
        let w = uniform_weighting::<Q>(&h).unwrap();
        let d = transition_dist(&h, &w, &[0, 1], 2).unwrap();
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn test_stuck_walk() {
        let h = Hypergraph::new(3, 5, [[0, 1, 2]]).unwrap();
        let w = EdgeWeighting::new(vec![Q::one()]);
        assert_eq!(transition_dist(&h, &w, &[0, 1, 2], 5).unwrap(), vec![(0, Q::one())]);
        assert!(matches!(transition_dist(&h, &w, &[0, 3], 5), Err(Error::StuckWalk(_))));
        assert!(matches!(transition_dist(&h, &w, &[3], 5), Err(Error::StuckWalk(_))));
        assert!(matches!(transition_dist(&h, &w, &[7], 5), Err(Error::Domain(_))));
    }

    #[test]
    fn test_k4_ordered_edge_law() {
        let h = Hypergraph::complete(3, 4);
        let w = uniform_weighting::<Q>(&h).unwrap();
        let m = tuple_marginal_oracle(&h, &w, 3, 3, 3, 1 << 20).unwrap();
        assert!(m.agree());
        let positive: Vec<_> = m.entries.iter().filter(|e| e.enumerated.is_positive()).collect();
        assert_eq!(positive.len(), 24);
        assert!(positive.iter().all(|e| e.enumerated == Q::from_frac(1, 24)));
    }

    #[test]
    fn test_marginals_upto_matches_single() {
        let h = Hypergraph::complete(3, 5).remove_edge_sets(&[[0, 1, 2]]);
        let reg = crate::fracmatch::WalkRegistry::enumerate(&h, None, 0);
        let w = crate::fracmatch::redistribute_pfm::<Q>(&h, &reg).unwrap();
        let all = tuple_marginals_upto(&h, &w, 4, 3, 1 << 20).unwrap();
        assert!(all.iter().all(|m| m.agree()));
        for m in &all {
            if m.j == 1 {
                assert!(m.entries.iter().all(|e| e.enumerated == Q::from_frac(1, 5)));
            }
        }
        let single = tuple_marginal_oracle(&h, &w, 4, 3, 2, 1 << 20).unwrap();
        assert_eq!(all.iter().find(|m| m.t == 3 && m.j == 2).unwrap(), &single);
    }

    #[test]
    fn test_oracle_refuses_bad_params() {
        let h = Hypergraph::complete(3, 4);
        let w = uniform_weighting::<Q>(&h).unwrap();
        assert!(tuple_marginal_oracle(&h, &w, 2, 3, 1, 1000).is_err());
        assert!(matches!(tuple_marginal_oracle(&h, &w, 6, 6, 1, 10), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn test_sampler_deterministic_and_valid() {
        let h = Hypergraph::complete(3, 6);
        let w = uniform_weighting::<f64>(&h).unwrap();
        let a = sample_walk(&h, &w, 4, 10, 7).unwrap();
        assert_eq!(a, sample_walk(&h, &w, 4, 10, 7).unwrap());
        assert_eq!(a.len(), 10);
        for (i, win) in a.windows(3).enumerate() {
            if i % 4 + 3 <= 4 {
                assert!(h.contains_edge(win));
            }
        }
    }

    #[test]
    fn test_uniform_ordered_edge_frequencies() {
        let h = Hypergraph::complete(3, 4);
        let w = uniform_weighting::<f64>(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = WalkSampler::new(&h, &w, 3).unwrap();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let trials = 48_000;
        for _ in 0..trials {
            *counts.entry(s.sample(3, &mut rng).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let expect = trials as f64 / 24.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 23 degrees of freedom, 0.01 critical value 41.64.
        assert!(chi2 < 41.64, "chi2 = {chi2}");
    }

    #[test]
    fn test_self_avoiding_rates() {
        let h = Hypergraph::complete(3, 8);
        let w = uniform_weighting::<f64>(&h).unwrap();
        assert_eq!(self_avoiding_rate(&h, &w, 20, 3, 500, 1).unwrap().rate, 1.0);
        assert_eq!(self_avoiding_rate(&h, &w, 20, 2, 500, 1).unwrap().rate, 1.0);
        let r5 = self_avoiding_rate(&h, &w, 20, 5, 4000, 2).unwrap().rate;
        let r8 = self_avoiding_rate(&h, &w, 20, 8, 4000, 3).unwrap().rate;
        assert!(r8 < r5 && r5 < 1.0);
    }

    #[test]
    fn test_block_starts_independent() {
        let h = Hypergraph::complete(3, 5);
        let w = uniform_weighting::<f64>(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = WalkSampler::new(&h, &w, 3).unwrap();
        let mut joint = [[0usize; 5]; 5];
        let trials = 25_000;
        for _ in 0..trials {
            let walk = s.sample(6, &mut rng).unwrap();
            joint[walk[0]][walk[3]] += 1;
        }
        let expect = trials as f64 / 25.0;
        let chi2: f64 = joint.iter().flatten().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 24 degrees of freedom against the uniform product law, 0.01 critical value 42.98.
        assert!(chi2 < 42.98, "chi2 = {chi2}");
    }
}
