use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use hypack::absorb::enumerate_absorbers;
use hypack::assemble::{decompose, decompose_parallel, parse_targets, Decomposition};
use hypack::cover::cover;
use hypack::fracmatch::{pfm_with_fallback, redistribute_pfm, WalkRegistry, DEFAULT_WALK_CAP};
use hypack::oracles::{reg_k, validate_packing};
use hypack::profile::Profile;
use hypack::tight::FactorsDoc;
use hypack::walker::WalkSampler;
use hypack::{regularity_report, Error, FactorShape, Hypergraph, Scalar, Q};

const EXIT_PARTIAL: u8 = 10;
const EXIT_PARSE: u8 = 20;
const EXIT_PARAM: u8 = 21;
const EXIT_IO: u8 = 22;
const EXIT_CAP: u8 = 23;
const EXIT_STAGE: u8 = 30;
const EXIT_VERIFY: u8 = 31;

#[derive(Parser)]
#[command(name = "hypack", version, about = "Tight cycle packings in dense uniform hypergraphs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Global {
    /// Master seed; every random choice derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Profile file of `key = value` lines.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Override one profile key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Cmd {
    /// Degree, codegree and intersection statistics.
    Analyze {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Largest k-divisible r with an r-regular spanning subgraph (exhaustive).
    Regsub {
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        cap: usize,
    },
    /// Perfect fractional matching.
    Pfm {
        input: PathBuf,
        /// Exact rational redistribution instead of float with LP fallback.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = DEFAULT_WALK_CAP)]
        walk_cap: usize,
    },
    /// Sample weighted walks under a perfect fractional matching.
    Walk {
        input: PathBuf,
        #[arg(long = "len", default_value_t = 6)]
        l: usize,
        #[arg(long, default_value_t = 12)]
        t: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Enumerate absorbers of a vertex.
    Absorbers {
        input: PathBuf,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Fractional cycle decomposition and extraction of disjoint cycle collections.
    Cover {
        input: PathBuf,
        /// Cycle length; defaults to the profile's `l`.
        #[arg(long = "len")]
        l: Option<usize>,
        #[arg(long, default_value_t = 1)]
        r: usize,
    },
    /// Full packing pipeline.
    Decompose {
        input: PathBuf,
        #[command(flatten)]
        targets: TargetArgs,
        /// Also write the factors document here.
        #[arg(long)]
        factors: Option<PathBuf>,
        /// Run this many seeds in parallel; the first complete run in seed order wins.
        #[arg(long, default_value_t = 1)]
        parallel_seeds: u64,
        /// Zero wall-clock fields so identical runs are byte-identical.
        #[arg(long)]
        normalize: bool,
    },
    /// Check a factors document against the host.
    Verify {
        input: PathBuf,
        factors: PathBuf,
        #[command(flatten)]
        targets: TargetArgs,
    },
}

#[derive(Args)]
struct TargetArgs {
    /// Factor shapes separated by `;`, cycle lengths within a factor by `,` (e.g. `12;4,8`).
    #[arg(long)]
    targets: Option<String>,
    /// Shortcut for this many Hamilton-cycle targets.
    #[arg(long)]
    hamilton: Option<usize>,
}

impl TargetArgs {
    fn resolve(&self, n: usize) -> Result<Option<Vec<FactorShape>>, Error> {
        match (&self.targets, self.hamilton) {
            (Some(_), Some(_)) => Err(Error::Param("give --targets or --hamilton, not both".into())),
            (Some(text), None) => parse_targets(text).map(Some),
            (None, Some(c)) => Ok(Some(vec![FactorShape::hamilton(n); c])),
            (None, None) => Ok(None),
        }
    }
}

/// Resolved configuration embedded in every emitted document.
#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    input: String,
    seed: u64,
    profile: &'a Profile,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: RunConfig<'a>,
    result: T,
}

struct Ctx {
    global: Global,
    profile: Profile,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.global.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit(&self, text: &str) -> Result<(), Error> {
        match &self.global.out {
            Some(p) => fs::write(p, text)?,
            None => {
                let mut out = io::stdout().lock();
                out.write_all(text.as_bytes())?;
                if !text.ends_with('\n') {
                    out.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, command: &str, input: &Path, result: T) -> Result<(), Error> {
        let doc = Envelope {
            config: RunConfig { command, input: input.display().to_string(), seed: self.global.seed, profile: &self.profile },
            result,
        };
        self.emit(&serde_json::to_string_pretty(&doc).expect("plain data"))
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Hypergraph, Error> {
    Hypergraph::parse(&read_text(path)?)
}

fn load_profile(g: &Global) -> Result<Profile, Error> {
    let mut p = match &g.profile {
        Some(path) => Profile::parse(&read_text(path)?)?,
        None => Profile::default(),
    };
    for s in &g.sets {
        p.set(s)?;
    }
    Ok(p)
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::DuplicateEdge(_) | Error::EmptyEdgeSet => EXIT_PARSE,
        Error::Param(_) | Error::Domain(_) => EXIT_PARAM,
        Error::Io(_) => EXIT_IO,
        Error::CapExceeded(_) => EXIT_CAP,
        _ => EXIT_STAGE,
    }
}

fn analyze(ctx: &Ctx, input: &Path, json: bool) -> Result<u8, Error> {
    let h = load_graph(input)?;
    let rep = regularity_report(&h);
    let max_deg = rep.degrees.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max_deg + 1];
    for &d in &rep.degrees {
        hist[d] += 1;
    }
    let histogram: Vec<(usize, usize)> = hist.into_iter().enumerate().filter(|&(_, c)| c > 0).collect();
    if json {
        #[derive(Serialize)]
        struct Analysis {
            k: usize,
            n: usize,
            m: usize,
            delta_codegree: usize,
            eta_star: Option<f64>,
            rho_star: String,
            degree_histogram: Vec<(usize, usize)>,
        }
        let a = Analysis {
            k: rep.k,
            n: rep.n,
            m: rep.m,
            delta_codegree: rep.delta_codegree,
            eta_star: rep.eta_star(),
            rho_star: rep.rho_star.to_string(),
            degree_histogram: histogram,
        };
        ctx.emit_json("analyze", input, a)?;
    } else {
        let mut s = format!("k {}\nn {}\nm {}\ndelta_codegree {}\n", rep.k, rep.n, rep.m, rep.delta_codegree);
        match rep.eta_star() {
            Some(e) => s += &format!("eta_star {e}\n"),
            None => s += "eta_star none\n",
        }
        s += &format!("rho_star {}\n", rep.rho_star);
        for (d, c) in histogram {
            s += &format!("degree {d} {c}\n");
        }
        ctx.emit(&s)?;
    }
    Ok(0)
}

fn regsub(ctx: &Ctx, input: &Path, cap: usize) -> Result<u8, Error> {
    let h = load_graph(input)?;
    let r = reg_k(&h, cap)?;
    ctx.note(format!("search nodes {}", r.nodes));
    ctx.emit_json("regsub", input, r)?;
    Ok(0)
}

fn pfm(ctx: &Ctx, input: &Path, exact: bool, walk_cap: usize) -> Result<u8, Error> {
    #[derive(Serialize)]
    struct Pfm {
        source: &'static str,
        max_vertex_deviation: f64,
        balancedness: String,
        weights: Vec<String>,
    }
    let h = load_graph(input)?;
    let doc = if exact {
        let reg = WalkRegistry::enumerate(&h, Some(walk_cap), ctx.global.seed);
        let w = redistribute_pfm::<Q>(&h, &reg)?;
        Pfm {
            source: "redistribution-exact",
            max_vertex_deviation: w.max_vertex_deviation(&h),
            balancedness: hypack::fracmatch::balancedness(&w).format_value(),
            weights: w.weights().iter().map(|x| x.format_value()).collect(),
        }
    } else {
        let (w, src) = pfm_with_fallback(&h, ctx.global.seed)?;
        Pfm {
            source: match src {
                hypack::fracmatch::PfmSource::Redistribution => "redistribution",
                hypack::fracmatch::PfmSource::Lp => "lp",
            },
            max_vertex_deviation: w.max_vertex_deviation(&h),
            balancedness: hypack::fracmatch::balancedness(&w).format_value(),
            weights: w.weights().iter().map(|x| x.format_value()).collect(),
        }
    };
    ctx.emit_json("pfm", input, doc)?;
    Ok(0)
}

fn walk(ctx: &Ctx, input: &Path, l: usize, t: usize, count: usize) -> Result<u8, Error> {
    let h = load_graph(input)?;
    let (w, _) = pfm_with_fallback(&h, ctx.global.seed)?;
    let mut sampler = WalkSampler::new(&h, &w, l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.global.seed);
    let walks = (0..count).map(|_| sampler.sample(t, &mut rng)).collect::<Result<Vec<_>, _>>()?;
    ctx.emit_json("walk", input, walks)?;
    Ok(0)
}

fn absorbers(ctx: &Ctx, input: &Path, x: usize, cap: Option<usize>) -> Result<u8, Error> {
    let h = load_graph(input)?;
    if !h.has_vertex(x) {
        return Err(Error::Param(format!("vertex {x} not in the hypergraph")));
    }
    let found: Vec<Vec<usize>> = enumerate_absorbers(&h, x, cap).into_iter().map(|a| a.seq).collect();
    ctx.note(format!("{} absorbers", found.len()));
    ctx.emit_json("absorbers", input, found)?;
    Ok(0)
}

fn cover_cmd(ctx: &Ctx, input: &Path, l: Option<usize>, r: usize) -> Result<u8, Error> {
    let h = load_graph(input)?;
    let p = &ctx.profile;
    let run = cover(&h, l.unwrap_or(p.l), r, &p.family(ctx.global.seed), &p.cover_gates(), ctx.global.seed)?;
    let met = run.cycles.gates_met;
    ctx.emit_json("cover", input, run.bundle)?;
    Ok(if met { 0 } else { EXIT_PARTIAL })
}

fn decompose_cmd(
    ctx: &Ctx,
    input: &Path,
    targets: &TargetArgs,
    factors_path: Option<&Path>,
    parallel: u64,
    normalize: bool,
) -> Result<u8, Error> {
    let h = load_graph(input)?;
    let targets = targets.resolve(h.n())?.ok_or_else(|| Error::Param("no targets given".into()))?;
    let seed = ctx.global.seed;
    let mut d: Decomposition = if parallel > 1 {
        let seeds: Vec<u64> = (0..parallel).map(|i| seed.wrapping_add(i)).collect();
        decompose_parallel(&h, &targets, &ctx.profile, &seeds)?
    } else {
        decompose(&h, &targets, &ctx.profile, seed)?
    };
    if normalize {
        d.manifest.normalize();
    }
    if let Some(path) = factors_path {
        fs::write(path, FactorsDoc::new(&d.factors).to_json())?;
    }
    ctx.emit(&d.manifest.to_json())?;
    if let Some(f) = &d.manifest.failure {
        eprintln!("failure: {f}");
    }
    ctx.note(format!("achieved {} of {}", d.manifest.achieved, d.manifest.requested));
    Ok(if d.complete() { 0 } else { EXIT_PARTIAL })
}

fn verify(ctx: &Ctx, input: &Path, factors: &Path, targets: &TargetArgs) -> Result<u8, Error> {
    let h = load_graph(input)?;
    let doc = FactorsDoc::from_json(&read_text(factors)?)?;
    if doc.factors.is_empty() {
        eprintln!("warning: empty factor list");
    }
    let targets = targets.resolve(h.n())?;
    if let Some(t) = &targets {
        if t.len() != doc.factors.len() {
            return Err(Error::Param(format!("{} targets for {} factors", t.len(), doc.factors.len())));
        }
    }
    let report = validate_packing(&h, &doc.factors, targets.as_deref());
    let pass = report.pass();
    #[derive(Serialize)]
    struct Verdict {
        pass: bool,
        #[serde(flatten)]
        report: hypack::oracles::PackingReport,
    }
    ctx.emit_json("verify", input, Verdict { pass, report })?;
    Ok(if pass { 0 } else { EXIT_VERIFY })
}

fn run(cli: Cli) -> Result<u8, Error> {
    let profile = load_profile(&cli.global)?;
    let ctx = Ctx { global: cli.global, profile };
    match &cli.cmd {
        Cmd::Analyze { input, json } => analyze(&ctx, input, *json),
        Cmd::Regsub { input, cap } => regsub(&ctx, input, *cap),
        Cmd::Pfm { input, exact, walk_cap } => pfm(&ctx, input, *exact, *walk_cap),
        Cmd::Walk { input, l, t, count } => walk(&ctx, input, *l, *t, *count),
        Cmd::Absorbers { input, x, cap } => absorbers(&ctx, input, *x, *cap),
        Cmd::Cover { input, l, r } => cover_cmd(&ctx, input, *l, *r),
        Cmd::Decompose { input, targets, factors, parallel_seeds, normalize } => {
            decompose_cmd(&ctx, input, targets, factors.as_deref(), *parallel_seeds, *normalize)
        }
        Cmd::Verify { input, factors, targets } => verify(&ctx, input, factors, targets),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
