//! Acceptance criteria 1-10. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hypack::absorb::{disjoint_perfect_matchings, enumerate_absorbers, hall_guarantee, is_absorber};
use hypack::assemble::layer_transform;
use hypack::fracmatch::{balancedness, pfm_with_fallback, redistribute_pfm, WalkRegistry, DEFAULT_WALK_CAP};
use hypack::hgraph::{degree_transfer_check, measure_transfer};
use hypack::oracles::{absorbers_brute, reg_k, reg_k_enumerate, validate_packing};
use hypack::profile::Profile;
use hypack::tight::{classify_by_definition, path_edges, verify_factor_copy, FactorsDoc};
use hypack::walker::{tuple_marginals_upto, WalkSampler};
use hypack::{regularity_report, EdgeWeighting, FactorShape, Hypergraph, PathCollection, Scalar, Q};

type Outcome = (bool, String);

fn gnp(k: usize, n: usize, p: f64, rng: &mut ChaCha8Rng) -> Hypergraph {
    let edges: Vec<Vec<usize>> = (0..n).combinations(k).filter(|_| rng.gen::<f64>() < p).collect();
    Hypergraph::new(k, n, edges).expect("distinct sorted edges")
}

/// Delete edges from `K_n^(3)` always at a currently highest-degree vertex, keeping degrees within a few units.
fn near_regular(n: usize, keep: f64, rng: &mut ChaCha8Rng) -> Hypergraph {
    let mut edges: Vec<Vec<usize>> = (0..n).combinations(3).collect();
    let target = (keep * edges.len() as f64).round() as usize;
    let mut deg = vec![(n - 1) * (n - 2) / 2; n];
    edges.shuffle(rng);
    while edges.len() > target {
        let max = *deg.iter().max().unwrap();
        let score = |e: &Vec<usize>| e.iter().map(|&v| deg[v]).sum::<usize>();
        let hot: Vec<usize> = (0..edges.len()).filter(|&i| edges[i].iter().any(|&v| deg[v] == max)).collect();
        let best = hot.iter().map(|&i| score(&edges[i])).max().unwrap();
        let cands: Vec<usize> = hot.into_iter().filter(|&i| score(&edges[i]) == best).collect();
        let e = edges.swap_remove(*cands.choose(rng).unwrap());
        for v in e {
            deg[v] -= 1;
        }
    }
    Hypergraph::new(3, n, edges).expect("distinct sorted edges")
}

fn exact_pfm(h: &Hypergraph, seed: u64) -> Option<EdgeWeighting<Q>> {
    redistribute_pfm::<Q>(h, &WalkRegistry::enumerate(h, Some(DEFAULT_WALK_CAP), seed)).ok()
}

fn k12_profile() -> Profile {
    Profile::parse(include_str!("../../../profiles/k12.profile")).expect("profile parses")
}

fn c1_walk_law() -> Outcome {
    let mut graphs = vec![("K4".to_string(), Hypergraph::complete(3, 4)), ("K5".to_string(), Hypergraph::complete(3, 5))];
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    while graphs.len() < 22 {
        let n = rng.gen_range(6..=8);
        let h = gnp(3, n, 0.85, &mut rng);
        if regularity_report(&h).eta_star().is_some_and(|e| e >= 0.2) && exact_pfm(&h, 0).is_some() {
            graphs.push((format!("G{}", graphs.len() - 1), h));
        }
    }
    let mut checked = 0usize;
    for (name, h) in &graphs {
        let w = exact_pfm(h, 0).expect("checked above");
        for l in 1..=6 {
            let all = match tuple_marginals_upto(h, &w, l, 3, 2_000_000) {
                Ok(a) => a,
                Err(e) => return (false, format!("{name} L={l}: {e}")),
            };
            for m in &all {
                if !m.agree() {
                    return (false, format!("{name} L={l} t={} j={} disagrees", m.t, m.j));
                }
                checked += m.entries.len();
            }
        }
    }
    (true, format!("{} graphs, L,t <= 6, j <= 3, {checked} tuples agree exactly", graphs.len()))
}

fn c2_sampler() -> Outcome {
    let h = Hypergraph::complete(3, 8);
    let (w, _) = pfm_with_fallback(&h, 0).expect("K8 has a PFM");
    const SAMPLES: usize = 1_000_000;
    const T: usize = 12;
    const THREADS: usize = 8;
    let counts: Vec<Vec<Vec<usize>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..THREADS)
            .map(|i| {
                let (h, w) = (&h, &w);
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(2000 + i as u64);
                    let mut sampler = WalkSampler::new(h, w, 6).unwrap();
                    let mut c = vec![vec![0usize; 8]; T];
                    for _ in 0..SAMPLES / THREADS {
                        for (t, v) in sampler.sample(T, &mut rng).unwrap().into_iter().enumerate() {
                            c[t][v] += 1;
                        }
                    }
                    c
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut worst: f64 = 0.0;
    for t in 0..T {
        for v in 0..8 {
            let hits: usize = counts.iter().map(|c| c[t][v]).sum();
            worst = worst.max((hits as f64 / SAMPLES as f64 - 0.125).abs());
        }
    }
    (worst <= 0.005, format!("max |P[X_t = v] - 1/8| = {worst:.5} over t <= 12, 10^6 walks"))
}

fn c3_pfm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut exact, mut balanced, mut made) = (0, 0, 0);
    while made < 50 {
        let n = rng.gen_range(8..=16);
        let h = near_regular(n, rng.gen_range(0.6..0.9), &mut rng);
        if regularity_report(&h).rho() > 0.1 {
            continue;
        }
        made += 1;
        let Some(w) = exact_pfm(&h, made as u64) else { continue };
        if w.vertex_sums(&h).iter().all(|s| *s == Q::from_usize(1)) {
            exact += 1;
        }
        if balancedness(&w) <= Q::from_usize(2) {
            balanced += 1;
        }
    }
    (exact == 50 && balanced >= 45, format!("exact vertex sums {exact}/50, balancedness <= 2 on {balanced}/50"))
}

fn c4_absorbers() -> Outcome {
    let h = Hypergraph::complete(3, 7);
    for x in 0..7 {
        let found = enumerate_absorbers(&h, x, None);
        if found.iter().any(|a| !is_absorber(&h, &a.seq, x)) {
            return (false, format!("x={x}: an enumerated absorber fails insertion"));
        }
        let ours: BTreeSet<Vec<usize>> = found.into_iter().map(|a| a.seq).collect();
        let brute: BTreeSet<Vec<usize>> = absorbers_brute(&h, x, 10_000).unwrap().into_iter().collect();
        if ours.len() != 720 || ours != brute {
            return (false, format!("x={x}: {} enumerated, {} by brute force", ours.len(), brute.len()));
        }
    }
    (true, "K7: 720 absorbers per vertex, all insert, equal to brute force".into())
}

fn matchings_ok(adj: &[Vec<usize>], ms: &[Vec<usize>]) -> bool {
    let mut used = BTreeSet::new();
    ms.iter().all(|m| {
        m.iter().copied().collect::<BTreeSet<_>>().len() == adj.len()
            && m.iter().enumerate().all(|(u, &v)| adj[u].contains(&v) && used.insert((u, v)))
    })
}

fn c5_hall() -> Outcome {
    let (mut cases, mut violations) = (0, 0);
    let mut check = |adj: &[Vec<usize>]| {
        let g = hall_guarantee(adj);
        if g > 0 {
            cases += 1;
            let ms = disjoint_perfect_matchings(adj, g);
            if ms.len() < g || !matchings_ok(adj, &ms) {
                violations += 1;
            }
        }
    };
    for mask in 0u32..1 << 16 {
        let adj: Vec<Vec<usize>> = (0..4).map(|u| (0..4).filter(|v| mask >> (4 * u + v) & 1 == 1).collect()).collect();
        check(&adj);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..200 {
        let p = rng.gen_range(0.5..0.95);
        let adj: Vec<Vec<usize>> = (0..8).map(|_| (0..8).filter(|_| rng.gen::<f64>() < p).collect()).collect();
        check(&adj);
    }
    (violations == 0, format!("{cases} instances with positive guarantee, {violations} violations"))
}

fn c6_classify() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let k = rng.gen_range(3..=4);
        let n = rng.gen_range(2 * k..=16);
        let mut verts: Vec<usize> = (0..n).collect();
        verts.shuffle(&mut rng);
        let mut paths = Vec::new();
        let mut rest = &verts[..rng.gen_range(0..=n)];
        while !rest.is_empty() {
            let len = rng.gen_range(1..=rest.len().min(3 * k));
            paths.push(rest[..len].to_vec());
            rest = &rest[len..];
        }
        let mut e = rand::seq::index::sample(&mut rng, n, k).into_vec();
        e.sort_unstable();
        let col = PathCollection::new(k, paths.clone()).unwrap();
        if col.classify(&e) != classify_by_definition(&e, &paths, k) {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("10^4 instances, k in {{3,4}}, {mismatches} mismatches"))
}

fn c7_layer() -> Outcome {
    let h = Hypergraph::complete(3, 12);
    let paths = vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]];
    let used: Vec<Vec<usize>> = paths.iter().flat_map(|q| path_edges(q, 3)).collect();
    let f = h.remove_edge_sets(&used);
    let p = Profile { l: 5, layer_retries: 20, ..k12_profile() };
    let target = FactorShape::hamilton(12);
    let (mut ok, mut budget_ok) = (0, 0);
    for seed in 0..10 {
        if let Ok(layer) = layer_transform(&h, &f, &paths, &target, &p, seed) {
            if verify_factor_copy(&h, &layer.factor, &target).ok() {
                ok += 1;
                if layer.report.leftover == layer.report.capacity {
                    budget_ok += 1;
                }
            }
        }
    }
    (ok >= 9 && budget_ok == ok, format!("{ok}/10 seeds verified, budget identity in {budget_ok}/{ok}"))
}

fn c8_packing() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let h = Hypergraph::complete(3, 12);
    let input = dir.path().join("k12.txt");
    std::fs::write(&input, h.to_text()).unwrap();
    let profile: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "profiles", "k12.profile"].iter().collect();
    let targets = vec![FactorShape::hamilton(12); 2];
    let (mut full, mut valid, mut slowest) = (0, 0, Duration::ZERO);
    for seed in 0..10u64 {
        let factors = dir.path().join(format!("f{seed}.json"));
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_hypack"))
            .args(["decompose", "--hamilton", "2", "--seed", &seed.to_string()])
            .arg("--profile")
            .arg(&profile)
            .arg("--factors")
            .arg(&factors)
            .arg(&input)
            .output()
            .unwrap()
            .status;
        let took = start.elapsed();
        slowest = slowest.max(took);
        let Ok(text) = std::fs::read_to_string(&factors) else { continue };
        let doc = FactorsDoc::from_json(&text).unwrap();
        let report = validate_packing(&h, &doc.factors, Some(&targets[..doc.factors.len()]));
        let cli_verify = Command::new(env!("CARGO_BIN_EXE_hypack"))
            .arg("verify")
            .arg(&input)
            .arg(&factors)
            .stdout(Stdio::null())
            .status()
            .unwrap();
        if report.pass() && cli_verify.success() {
            valid += 1;
        }
        if status.code() == Some(0) && doc.factors.len() == 2 && took.as_secs() <= 120 {
            full += 1;
        }
    }
    (
        full >= 7 && valid == 10,
        format!("{full}/10 seeds with 2 verified factors, validate_packing passes on {valid}/10 outputs, slowest {slowest:.2?}"),
    )
}

fn c9_regk() -> Outcome {
    let k4 = reg_k(&Hypergraph::complete(3, 4), 100).unwrap();
    let k5 = reg_k(&Hypergraph::complete(3, 5), 100).unwrap();
    if (k4.r, k4.witness.len(), k5.r, k5.witness.len()) != (3, 4, 6, 10) {
        return (false, format!("K4 -> {}, K5 -> {}", k4.r, k5.r));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut fixtures = 0;
    while fixtures < 60 {
        let n = rng.gen_range(4..=8);
        let h = gnp(3, n, rng.gen_range(0.2..0.9), &mut rng);
        if h.m() == 0 || h.m() > 20 {
            continue;
        }
        fixtures += 1;
        let (a, b) = (reg_k(&h, 100).unwrap(), reg_k_enumerate(&h, 100).unwrap());
        let regular = h.spanning(&a.witness);
        if a.r != b.r || h.vertices().iter().any(|&v| regular.degree(v) != a.r) {
            return (false, format!("fixture {fixtures}: search {} vs enumeration {}", a.r, b.r));
        }
    }
    (true, format!("reg_3(K4) = 3, reg_3(K5) = 6, {fixtures} fixtures with |E| <= 20 agree"))
}

fn c10_transfer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut graphs = vec![Hypergraph::complete(3, 5), Hypergraph::complete(3, 8), Hypergraph::complete(4, 7)];
    for _ in 0..20 {
        let n = rng.gen_range(6..=12);
        graphs.push(gnp(3, n, rng.gen_range(0.3..0.9), &mut rng));
    }
    for (i, h) in graphs.iter().enumerate() {
        let r = degree_transfer_check(h, h.vertices(), 1.0, 0.0);
        if !(r.precondition_holds() && r.all_pass()) {
            return (false, format!("identity case fails on graph {i}"));
        }
    }
    let mut pass = 0;
    const TRIALS: usize = 100;
    for _ in 0..TRIALS {
        let n = rng.gen_range(10..=14);
        let h = gnp(3, n, rng.gen_range(0.6..0.9), &mut rng);
        let size = rng.gen_range(n / 2..n);
        let u = rand::seq::index::sample(&mut rng, n, size).into_vec();
        let Some((theta, eps)) = measure_transfer(&h, &u) else { continue };
        let r = degree_transfer_check(&h, &u, theta, eps);
        if r.precondition_holds() && r.all_pass() {
            pass += 1;
        }
    }
    (
        pass * 100 >= 95 * TRIALS,
        format!("identity passes on {} graphs; random dense within 8k^3 eps on {pass}/{TRIALS}", graphs.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("walk law exactness", c1_walk_law),
        ("sampler agreement", c2_sampler),
        ("PFM exactness", c3_pfm),
        ("absorber correctness", c4_absorbers),
        ("Hall guarantee", c5_hall),
        ("classification oracle equivalence", c6_classify),
        ("layer validity", c7_layer),
        ("packing validity", c8_packing),
        ("reg_k oracle", c9_regk),
        ("degree-transfer check", c10_transfer),
    ];
    let results: Vec<(Outcome, Duration)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(_, f)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
                        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
                        (false, format!("panicked: {}", msg.unwrap_or_default()))
                    });
                    (out, start.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), ((ok, detail), took))) in criteria.iter().zip(results).enumerate() {
        println!("criterion {:>2} {name}: {} ({detail}; {took:.1?})", i + 1, if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
