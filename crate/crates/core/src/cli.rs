//! Command-line front end.
//!
//! Vector outputs go to CSV (or JSON arrays with `--format json`), scalar
//! summaries to JSON. Every random draw comes from a stream addressed by the
//! master seed and a fixed chunk or replicate index, so outputs do not depend
//! on `--threads`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::analytics::{default_fraction_grid, ks_distance, mean_and_se, two_sample_ks, EmpiricalSfs};
use crate::distributions::{
    gen_ld_pgf, ld_pgf, ld_pmf, ld_tail_asymptote, sample_gen_ld, sample_ld, tail_from_pmf, GenLdParams, LdParams,
};
use crate::error::{Error, Result};
use crate::inference::{bootstrap_ci, estimate_mu, estimate_mu_by_nucleotide, load_fixture, load_vaf};
use crate::limits::{
    expected_isa_violations, isa_violation_prob, mean_sfs_tail, sample_conjecture_sfs, sample_cox_sfs, PointMeasure,
};
use crate::nucleotide::Nucleotide;
use crate::rng::{run_replicates, try_run_replicates, Stream, StreamFactory};
use crate::simulate::{FitnessModel, LineageTree, MutationModel, RateMatrix, Rates, SimOptions, Simulator};

const LD_DOMAIN: u64 = 1;
const GENLD_DOMAIN: u64 = 2;
const COX_DOMAIN: u64 = 3;
const CONJECTURE_DOMAIN: u64 = 4;
const CHUNK: usize = 4096;
/// Truncation point of the exact mass function used for KS distances.
const KS_SUPPORT: usize = 5000;

#[derive(Debug, Parser)]
#[command(
    name = "mutfreq",
    version,
    about = "Mutation frequencies in growing cell populations"
)]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value = "0", value_parser = parse_count)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads (0: all available cores).
    #[arg(long, global = true, default_value = "0", value_parser = parse_usize)]
    pub threads: usize,

    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the population to n cells over independent replicates.
    Simulate(SimulateArgs),
    /// Luria-Delbrück law: mass function, pgf, sampling, tail.
    Ld {
        #[command(subcommand)]
        mode: LdMode,
    },
    /// Generalised Luria-Delbrück law.
    Genld {
        #[command(subcommand)]
        mode: GenLdMode,
    },
    /// Sample the Cox limit of the frequency spectrum.
    Cox(CoxArgs),
    /// Sample the skeleton model of the spectrum with cell death.
    Conjecture(ConjectureArgs),
    /// Infinite sites audit.
    Isa(IsaArgs),
    /// Estimate the mutation rate from allele frequencies.
    Estimate(EstimateArgs),
    /// KS distance of a count sample against a Luria-Delbrück law or another sample.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Target population size.
    #[arg(long, value_parser = parse_usize)]
    pub n: usize,
    /// Uniform per-site mutation probability per daughter.
    #[arg(long)]
    pub mu: Option<f64>,
    /// JSON file with per-site mutation matrices (replaces --mu and --sites).
    #[arg(long)]
    pub rates: Option<PathBuf>,
    #[arg(long, default_value = "1", value_parser = parse_usize)]
    pub sites: usize,
    #[arg(long, default_value_t = 1.0)]
    pub division: f64,
    #[arg(long, default_value_t = 0.0)]
    pub death: f64,
    /// JSON fitness table (replaces --division and --death).
    #[arg(long)]
    pub fitness: Option<PathBuf>,
    #[arg(long, default_value = "1", value_parser = parse_usize)]
    pub replicates: usize,
    /// Comma-separated fractions for tail.csv.
    #[arg(long)]
    pub grid: Option<String>,
    /// Write the genealogy of replicate 0 to tree.csv.
    #[arg(long)]
    pub tree: bool,
    /// Memory ceiling per run, in bytes.
    #[arg(long, value_parser = parse_count)]
    pub memory_budget: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum LdMode {
    Pmf {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value = "100", value_parser = parse_usize)]
        max: usize,
    },
    Pgf {
        #[arg(long)]
        c: f64,
        /// Comma-separated points in [0, 1]; default 0, 0.05, ..., 1.
        #[arg(long)]
        z: Option<String>,
    },
    Sample {
        #[arg(long)]
        c: f64,
        #[arg(long, value_parser = parse_usize)]
        draws: usize,
        #[arg(long, default_value = "100", value_parser = parse_usize)]
        max: usize,
    },
    Tail {
        #[arg(long)]
        c: f64,
        /// Comma-separated counts.
        #[arg(long)]
        m: String,
    },
}

#[derive(Debug, Args)]
pub struct GenLdParamArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub c: f64,
}

impl GenLdParamArgs {
    fn params(&self) -> Result<GenLdParams> {
        GenLdParams::new(self.lambda, self.a, self.b, self.c)
    }
}

#[derive(Debug, Subcommand)]
pub enum GenLdMode {
    Pgf {
        #[command(flatten)]
        params: GenLdParamArgs,
        #[arg(long)]
        z: Option<String>,
    },
    Sample {
        #[command(flatten)]
        params: GenLdParamArgs,
        #[arg(long, value_parser = parse_usize)]
        draws: usize,
        #[arg(long, default_value = "100", value_parser = parse_usize)]
        max: usize,
        /// Add the exact LD(c) mass and the KS distance to it.
        #[arg(long)]
        compare_ld: bool,
    },
}

#[derive(Debug, Args)]
pub struct CoxArgs {
    #[arg(long)]
    pub eta: f64,
    #[arg(long, value_parser = parse_usize)]
    pub draws: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub prune_eps: f64,
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct ConjectureArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, value_parser = parse_usize)]
    pub draws: usize,
    /// Skeleton size at which growth stops.
    #[arg(long, default_value = "1000", value_parser = parse_usize)]
    pub skeleton_n: usize,
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct IsaArgs {
    #[arg(long, value_parser = parse_count)]
    pub n: u64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long, default_value = "1", value_parser = parse_count)]
    pub sites: u64,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV with a `vaf` column and an optional `ref` column.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of sites sequenced.
    #[arg(long, value_parser = parse_count)]
    pub sites: u64,
    #[arg(long, default_value = "0.1:0.25", value_parser = parse_window)]
    pub window: (f64, f64),
    /// Sites per reference base as `A,C,G,T`.
    #[arg(long)]
    pub nucleotide_sites: Option<String>,
    /// Summary JSON providing per-base site totals.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Bootstrap resamples (0 disables the interval).
    #[arg(long, default_value = "1000", value_parser = parse_usize)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// CSV holding the sample.
    #[arg(long)]
    pub sample: PathBuf,
    /// Column of counts (default: the first column).
    #[arg(long)]
    pub column: Option<String>,
    /// Compare against LD(c).
    #[arg(long)]
    pub c: Option<f64>,
    /// Compare against a second sample with the same column.
    #[arg(long)]
    pub other: Option<PathBuf>,
}

/// Accepts plain integers and integral scientific notation (`1e6`).
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.trim().parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 18_446_744_073_709_551_616.0) {
        return Err(format!("not a nonnegative integer: {s:?}"));
    }
    Ok(v as u64)
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    let v = parse_count(s)?;
    usize::try_from(v).map_err(|_| format!("{s} is too large"))
}

/// Parses `a:b`.
pub fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("window must look like a:b, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad window start {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad window end {b:?}"))?;
    Ok((a, b))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::domain(format!("bad {what} entry {x:?}")))
        })
        .collect()
}

fn parse_grid(s: &Option<String>) -> Result<Vec<f64>> {
    match s {
        None => Ok(default_fraction_grid()),
        Some(s) => {
            let g: Vec<f64> = parse_list(s, "grid")?;
            if let Some(a) = g.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
                return Err(Error::domain(format!("grid point {a} is not inside (0, 1)")));
            }
            Ok(g)
        }
    }
}

fn parse_z(s: &Option<String>) -> Result<Vec<f64>> {
    match s {
        None => Ok((0..=20).map(|i| i as f64 / 20.0).collect()),
        Some(s) => parse_list(s, "z"),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    U(u64),
    F(f64),
    Null,
}

impl Val {
    fn text(&self) -> String {
        match self {
            Val::U(v) => v.to_string(),
            Val::F(v) => v.to_string(),
            Val::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Val::U(v) => json!(v),
            Val::F(v) if v.is_finite() => json!(v),
            _ => Value::Null,
        }
    }
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Val>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Val>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

struct Output<'a> {
    dir: &'a Path,
    format: Format,
    written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(dir: &'a Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir,
            format,
            written: Vec::new(),
        })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn table(&mut self, stem: &str, table: &Table) -> Result<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| Error::io(self.dir.join(stem), e.into());
                w.write_record(&table.columns).map_err(io)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(Val::text)).map_err(io)?;
                }
                let bytes = w
                    .into_inner()
                    .map_err(|e| Error::io(self.dir.join(stem), e.into_error()))?;
                self.write_bytes(&format!("{stem}.csv"), &bytes)
            }
            Format::Json => {
                let rows: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: serde_json::Map<String, Value> = table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                self.json(&format!("{stem}.json"), &Value::Array(rows))
            }
        }
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker threads: {e}")))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let factory = StreamFactory::new(cli.seed);
    let mut out = Output::new(&cli.out, cli.format)?;
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args, &factory, &mut out)?,
        Command::Ld { mode } => cmd_ld(mode, &factory, &mut out)?,
        Command::Genld { mode } => cmd_genld(mode, &factory, &mut out)?,
        Command::Cox(args) => cmd_cox(args, &factory, &mut out)?,
        Command::Conjecture(args) => cmd_conjecture(args, &factory, &mut out)?,
        Command::Isa(args) => cmd_isa(args, &mut out)?,
        Command::Estimate(args) => cmd_estimate(args, &factory, &mut out)?,
        Command::Compare(args) => cmd_compare(args, &mut out)?,
    }
    for path in &out.written {
        println!("{}", path.display());
    }
    Ok(())
}

#[derive(Deserialize)]
struct RateFile {
    reference: String,
    matrices: Vec<[[f64; 4]; 4]>,
    #[serde(default)]
    assignment: Option<Vec<u32>>,
}

#[derive(Deserialize)]
struct FitnessFile {
    #[serde(default)]
    selective_sites: Vec<u32>,
    founder: Rates,
    #[serde(default)]
    genotypes: Vec<FitnessEntry>,
}

#[derive(Deserialize)]
struct FitnessEntry {
    genotype: Vec<(u32, Nucleotide)>,
    division: f64,
    death: f64,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: format!("{}: {e}", path.display()),
    })
}

fn mutation_model(args: &SimulateArgs) -> Result<MutationModel> {
    match (&args.rates, args.mu) {
        (Some(_), Some(_)) => Err(Error::config("give either --mu or --rates, not both")),
        (None, None) => Err(Error::config("one of --mu or --rates is required")),
        (None, Some(mu)) => MutationModel::uniform(args.sites, mu),
        (Some(path), None) => {
            let file: RateFile = read_json(path)?;
            let reference = file
                .reference
                .chars()
                .map(|c| c.to_string().parse::<Nucleotide>().map_err(Error::config))
                .collect::<Result<Vec<_>>>()?;
            let assignment = file.assignment.unwrap_or_else(|| vec![0; reference.len()]);
            MutationModel::per_site(
                reference,
                file.matrices.into_iter().map(RateMatrix).collect(),
                assignment,
            )
        }
    }
}

fn fitness_model(args: &SimulateArgs) -> Result<FitnessModel> {
    match &args.fitness {
        None => FitnessModel::neutral(args.division, args.death),
        Some(path) => {
            let file: FitnessFile = read_json(path)?;
            let mut table = HashMap::new();
            for e in file.genotypes {
                table.insert(e.genotype, Rates::new(e.division, e.death)?);
            }
            FitnessModel::new(file.selective_sites, file.founder, table)
        }
    }
}

struct ReplicateSummary {
    b: Vec<u32>,
    b_hat: Vec<u32>,
    events: Vec<u32>,
    attempts: u64,
    tree: Option<LineageTree>,
}

fn cmd_simulate(args: &SimulateArgs, factory: &StreamFactory, out: &mut Output) -> Result<()> {
    let mutation = mutation_model(args)?;
    let fitness = fitness_model(args)?;
    if args.n == 0 || args.replicates == 0 {
        return Err(Error::domain("--n and --replicates must be >= 1"));
    }
    let grid = parse_grid(&args.grid)?;
    let mut options = SimOptions::default();
    if let Some(budget) = args.memory_budget {
        options.memory_budget = budget;
    }
    let plain = Simulator::new(&mutation, &fitness, options)?;
    let with_tree = Simulator::new(
        &mutation,
        &fitness,
        SimOptions {
            keep_tree: true,
            ..options
        },
    )?;

    let runs = try_run_replicates(factory, 0, args.replicates, |i, rng| {
        let sim = if args.tree && i == 0 { &with_tree } else { &plain };
        sim.run(args.n, rng).map(|o| ReplicateSummary {
            b: o.b,
            b_hat: o.b_hat,
            events: o.events,
            attempts: o.attempts,
            tree: o.tree,
        })
    })?;

    let mut b = Table::new(&["replicate", "site", "B", "B_hat", "events"]);
    let mut sfs = EmpiricalSfs::from_counts(&[], args.n as u64);
    let mut attempts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut tail_sums = vec![0.0; grid.len()];
    for (r, run) in runs.iter().enumerate() {
        for i in 0..run.b.len() {
            b.push(vec![
                Val::U(r as u64),
                Val::U(i as u64),
                Val::U(run.b[i] as u64),
                Val::U(run.b_hat[i] as u64),
                Val::U(run.events[i] as u64),
            ]);
        }
        let one = EmpiricalSfs::from_counts(&run.b, args.n as u64);
        for (k, a) in grid.iter().enumerate() {
            tail_sums[k] += one.tail_count(*a) as f64;
        }
        sfs.merge(&one);
        *attempts.entry(run.attempts).or_insert(0) += 1;
    }
    out.table("b", &b)?;

    let mut sfs_table = Table::new(&["k", "count"]);
    for (&k, &c) in &sfs.counts {
        sfs_table.push(vec![Val::U(k), Val::U(c)]);
    }
    out.table("sfs", &sfs_table)?;

    // the theory curve is the neutral pure-birth mean
    let eta = match mutation.uniform_mu() {
        Some(mu) if fitness.is_pure_yule() => Some(mu * mutation.sites() as f64),
        _ => None,
    };
    let mut tail = Table::new(&["a", "count", "theory_mean"]);
    for (k, &a) in grid.iter().enumerate() {
        let theory = match eta {
            Some(eta) => Val::F(mean_sfs_tail(eta, a)?),
            None => Val::Null,
        };
        tail.push(vec![Val::F(a), Val::F(tail_sums[k] / runs.len() as f64), theory]);
    }
    out.table("tail", &tail)?;

    if let Some(tree) = runs.first().and_then(|r| r.tree.as_ref()) {
        let mut buf = Vec::new();
        tree.write_csv(&mut buf)
            .map_err(|e| Error::io(out.dir.join("tree.csv"), e))?;
        out.write_bytes("tree.csv", &buf)?;
    }

    let histogram: serde_json::Map<String, Value> = attempts.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    let founder = fitness.founder();
    let summary = json!({
        "n": args.n,
        "mu": mutation.uniform_mu(),
        "sites": mutation.sites(),
        "division": founder.division,
        "death": founder.death,
        "replicates": args.replicates,
        "seed": factory.seed(),
        "attempts_histogram": histogram,
    });
    out.json("summary.json", &summary)
}

/// `draws` samples in fixed-size chunks, one stream per chunk.
fn parallel_draws<F>(factory: &StreamFactory, domain: u64, draws: usize, sample: F) -> Vec<u64>
where
    F: Fn(&mut Stream) -> u64 + Sync,
{
    let chunks = draws.div_ceil(CHUNK);
    run_replicates(factory, domain, chunks, |i, rng| {
        let len = CHUNK.min(draws - i * CHUNK);
        (0..len).map(|_| sample(rng)).collect::<Vec<u64>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

fn histogram(draws: &[u64], max: usize) -> Vec<f64> {
    let mut h = vec![0.0; max + 1];
    for &d in draws {
        if (d as usize) <= max {
            h[d as usize] += 1.0;
        }
    }
    let total = draws.len().max(1) as f64;
    h.iter_mut().for_each(|x| *x /= total);
    h
}

fn pgf_table(z: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Table> {
    let mut t = Table::new(&["z", "pgf"]);
    for &z in z {
        t.push(vec![Val::F(z), Val::F(f(z)?)]);
    }
    Ok(t)
}

fn cmd_ld(mode: &LdMode, factory: &StreamFactory, out: &mut Output) -> Result<()> {
    match mode {
        LdMode::Pmf { c, max } => {
            let pmf = ld_pmf(&LdParams::new(*c)?, *max);
            let mut t = Table::new(&["m", "pmf", "cdf"]);
            let mut cdf = 0.0;
            for (m, p) in pmf.iter().enumerate() {
                cdf += p;
                t.push(vec![Val::U(m as u64), Val::F(*p), Val::F(cdf)]);
            }
            out.table("ld_pmf", &t)
        }
        LdMode::Pgf { c, z } => {
            let p = LdParams::new(*c)?;
            out.table("ld_pgf", &pgf_table(&parse_z(z)?, |z| ld_pgf(&p, z))?)
        }
        LdMode::Sample { c, draws, max } => {
            let p = LdParams::new(*c)?;
            if *draws == 0 {
                return Err(Error::domain("--draws must be >= 1"));
            }
            let sample = parallel_draws(factory, LD_DOMAIN, *draws, |rng| sample_ld(&p, rng));
            let exact = ld_pmf(&p, KS_SUPPORT.max(*max));
            let ks = ks_distance(&sample, &exact)?;
            let emp = histogram(&sample, *max);
            let mut t = Table::new(&["m", "empirical", "exact", "ks"]);
            for m in 0..=*max {
                t.push(vec![Val::U(m as u64), Val::F(emp[m]), Val::F(exact[m]), Val::F(ks)]);
            }
            out.table("ld_sample", &t)
        }
        LdMode::Tail { c, m } => {
            let p = LdParams::new(*c)?;
            let ms: Vec<u64> = parse_list(m, "m")?;
            let top = ms.iter().copied().max().unwrap_or(0) as usize;
            let pmf = ld_pmf(&p, top);
            let mut t = Table::new(&["m", "tail", "asymptote"]);
            for &m in &ms {
                t.push(vec![
                    Val::U(m),
                    Val::F(tail_from_pmf(&pmf, m as usize)),
                    Val::F(ld_tail_asymptote(&p, m)?),
                ]);
            }
            out.table("ld_tail", &t)
        }
    }
}

fn cmd_genld(mode: &GenLdMode, factory: &StreamFactory, out: &mut Output) -> Result<()> {
    match mode {
        GenLdMode::Pgf { params, z } => {
            let p = params.params()?;
            out.table("genld_pgf", &pgf_table(&parse_z(z)?, |z| gen_ld_pgf(&p, z))?)
        }
        GenLdMode::Sample {
            params,
            draws,
            max,
            compare_ld,
        } => {
            let p = params.params()?;
            if *draws == 0 {
                return Err(Error::domain("--draws must be >= 1"));
            }
            let sample = parallel_draws(factory, GENLD_DOMAIN, *draws, |rng| sample_gen_ld(&p, rng));
            let emp = histogram(&sample, *max);
            if *compare_ld {
                let exact = ld_pmf(&LdParams::new(p.c)?, KS_SUPPORT.max(*max));
                let ks = ks_distance(&sample, &exact)?;
                let mut t = Table::new(&["m", "empirical", "ld_exact", "ks"]);
                for m in 0..=*max {
                    t.push(vec![Val::U(m as u64), Val::F(emp[m]), Val::F(exact[m]), Val::F(ks)]);
                }
                out.table("genld_sample", &t)
            } else {
                let mut t = Table::new(&["m", "empirical"]);
                for (m, e) in emp.iter().enumerate() {
                    t.push(vec![Val::U(m as u64), Val::F(*e)]);
                }
                out.table("genld_sample", &t)
            }
        }
    }
}

fn measure_outputs(
    stem: &str,
    measures: &[PointMeasure],
    grid: &[f64],
    theory: impl Fn(f64) -> Result<Option<f64>>,
    out: &mut Output,
) -> Result<()> {
    let mut atoms = Table::new(&["draw", "fraction", "multiplicity"]);
    for (d, m) in measures.iter().enumerate() {
        for &(x, k) in &m.atoms {
            atoms.push(vec![Val::U(d as u64), Val::F(x), Val::U(k)]);
        }
    }
    out.table(&format!("{stem}_atoms"), &atoms)?;
    let mut tail = Table::new(&["a", "mean", "std_err", "theory_mean"]);
    for &a in grid {
        let masses: Vec<f64> = measures.iter().map(|m| m.mass_above(a) as f64).collect();
        let (mean, se) = mean_and_se(&masses);
        let th = theory(a)?.map_or(Val::Null, Val::F);
        tail.push(vec![Val::F(a), Val::F(mean), Val::F(se), th]);
    }
    out.table(&format!("{stem}_tail"), &tail)
}

fn cmd_cox(args: &CoxArgs, factory: &StreamFactory, out: &mut Output) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    if args.draws == 0 {
        return Err(Error::domain("--draws must be >= 1"));
    }
    let measures = try_run_replicates(factory, COX_DOMAIN, args.draws, |_, rng| {
        sample_cox_sfs(args.eta, args.prune_eps, rng)
    })?;
    measure_outputs("cox", &measures, &grid, |a| mean_sfs_tail(args.eta, a).map(Some), out)
}

fn cmd_conjecture(args: &ConjectureArgs, factory: &StreamFactory, out: &mut Output) -> Result<()> {
    let grid = parse_grid(&args.grid)?;
    if args.draws == 0 {
        return Err(Error::domain("--draws must be >= 1"));
    }
    let measures = try_run_replicates(factory, CONJECTURE_DOMAIN, args.draws, |_, rng| {
        sample_conjecture_sfs(args.alpha, args.beta, args.eta, args.skeleton_n, rng)
    })?;
    // a proven mean is available only without death
    let beta = args.beta;
    let eta = args.eta;
    measure_outputs(
        "conjecture",
        &measures,
        &grid,
        |a| {
            if beta == 0.0 {
                mean_sfs_tail(eta, a).map(Some)
            } else {
                Ok(None)
            }
        },
        out,
    )?;
    out.json(
        "conjecture_summary.json",
        &json!({
            "alpha": args.alpha,
            "beta": args.beta,
            "eta": args.eta,
            "draws": args.draws,
            "skeleton_n": args.skeleton_n,
            "seed": factory.seed(),
        }),
    )
}

fn cmd_isa(args: &IsaArgs, out: &mut Output) -> Result<()> {
    let p = isa_violation_prob(args.n, args.mu)?;
    let expected = expected_isa_violations(args.n, args.mu, args.sites)?;
    let v = json!({
        "n": args.n,
        "mu": args.mu,
        "sites": args.sites,
        "p": p,
        "expected_violations": expected,
    });
    out.json("isa.json", &v)
}

fn nucleotide_sites(args: &EstimateArgs) -> Result<Option<[u64; 4]>> {
    match (&args.nucleotide_sites, &args.fixture) {
        (Some(_), Some(_)) => Err(Error::config("give either --nucleotide-sites or --fixture, not both")),
        (Some(s), None) => {
            let v = s
                .split(',')
                .map(|x| parse_count(x).map_err(Error::config))
                .collect::<Result<Vec<u64>>>()?;
            let arr: [u64; 4] = v
                .try_into()
                .map_err(|_| Error::config("--nucleotide-sites needs four values A,C,G,T"))?;
            Ok(Some(arr))
        }
        (None, Some(path)) => Ok(Some(load_fixture(path)?.sites_array()?)),
        (None, None) => Ok(None),
    }
}

fn cmd_estimate(args: &EstimateArgs, factory: &StreamFactory, out: &mut Output) -> Result<()> {
    let (a, b) = args.window;
    let mut data = load_vaf(&args.input, args.sites)?;
    let mut result = match nucleotide_sites(args)? {
        Some(sites) => {
            data = data.with_per_nucleotide_sites(sites)?;
            estimate_mu_by_nucleotide(&data, a, b)?
        }
        None => estimate_mu(&data, a, b)?,
    };
    if args.bootstrap > 0 {
        result.bootstrap_ci = Some(bootstrap_ci(&data, a, b, args.bootstrap, args.level, factory)?);
    }
    let v = serde_json::to_value(&result).expect("estimate serializes");
    out.json("estimate.json", &v)
}

fn read_counts(path: &Path, column: Option<&str>) -> Result<Vec<u64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let idx = match column {
        None => 0,
        Some(name) => headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("{}: no column {name:?}", path.display()),
        })?,
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = row.get(idx).unwrap_or("");
        out.push(parse_count(cell).map_err(|message| Error::Parse { line, message })?);
    }
    Ok(out)
}

fn cmd_compare(args: &CompareArgs, out: &mut Output) -> Result<()> {
    let sample = read_counts(&args.sample, args.column.as_deref())?;
    let v = match (args.c, &args.other) {
        (Some(c), None) => {
            let pmf = ld_pmf(&LdParams::new(c)?, KS_SUPPORT);
            json!({
                "against": "ld",
                "c": c,
                "sample_size": sample.len(),
                "ks": ks_distance(&sample, &pmf)?,
            })
        }
        (None, Some(other)) => {
            let y = read_counts(other, args.column.as_deref())?;
            json!({
                "against": "sample",
                "sample_size": sample.len(),
                "other_size": y.len(),
                "ks": two_sample_ks(&sample, &y)?,
            })
        }
        _ => return Err(Error::config("give exactly one of --c or --other")),
    };
    out.json("compare.json", &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e9").unwrap(), 1_000_000_000);
        assert_eq!(parse_count("18446744073709551615").unwrap(), u64::MAX);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("1e30").is_err());
    }

    #[test]
    fn window_syntax() {
        assert_eq!(parse_window("0.1:0.25").unwrap(), (0.1, 0.25));
        assert!(parse_window("0.1-0.25").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
