//! Command-line front end.
//!
//! Every artifact starts with `#` lines naming the command and the seed.
//! Paths given to `--out` are relative to `--out-dir`; a run manifest is
//! written next to each artifact.

use crate::airy;
use crate::asymptotics::{self, Classification, LimitKind};
use crate::covariance::{self, CovMatrix, Site, TailPolicy};
use crate::dualpoly;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_list, CsvTable};
use crate::kernels;
use crate::polygrid::{self, Family, RootGrid, SpectrumN};
use crate::sampler::{self, RngStream, ZetaMethod, ZetaSampler};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "BETAINF_THREADS";

#[derive(Parser, Debug)]
#[command(name = "betainf", version, about = "Zero-temperature corners processes and their Airy edge limit")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Directory that relative output paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Artifact file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; falls back to BETAINF_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of `key = value` lines; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Roots of one level.
    Roots(RootsArgs),
    /// All levels of a root grid.
    Grid(GridArgs),
    /// Transition kernel between two levels.
    Kernel(KernelArgs),
    /// Normalized dual polynomials at one level.
    Dualpoly(DualpolyArgs),
    /// Exact covariance matrices.
    Cov(CovArgs),
    /// Monte Carlo samples of the corners fields.
    Sample(SampleArgs),
    /// Paths of the linearized Dyson Brownian motion.
    Dbm(DbmArgs),
    /// Airy zeros, limit covariances and Airy-line samples.
    Airy(AiryArgs),
    /// Airy semigroup entries, row sums and jump intensities.
    Semigroup(SemigroupArgs),
    /// Edge location, Airy scale and top-root comparison.
    Edge(EdgeArgs),
    /// Critical points and bulk lattice spacings.
    Bulk(BulkArgs),
    /// Ladder of finite-N covariances against the Airy limit.
    Converge(ConvergeArgs),
    /// Quick invariant suite with a pass/fail table.
    Selftest,
}

/// A root grid given by a classical family or by a top-level spectrum.
#[derive(Args, Debug, Clone)]
pub struct Source {
    /// `hermite`, `laguerre:ALPHA` or `jacobi:ALPHA,BETA`.
    #[arg(long)]
    pub family: Option<String>,
    /// `two-atom`, `uniform`, `hermite` or a file with one value per line.
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Top level N.
    #[arg(long = "n", visible_alias = "N")]
    pub n: Option<usize>,
}

impl Source {
    fn need_n(&self) -> Result<usize> {
        self.n.ok_or_else(|| Error::invalid("--n is required"))
    }

    pub fn spectrum(&self) -> Result<SpectrumN> {
        let name = self.spectrum.as_deref().unwrap_or("two-atom");
        match name {
            "two-atom" => SpectrumN::two_atom(self.need_n()?),
            "uniform" => SpectrumN::uniform(self.need_n()?),
            "hermite" => SpectrumN::hermite(self.need_n()?),
            path => {
                let s = SpectrumN::parse(&std::fs::read_to_string(path)?)?;
                if let Some(n) = self.n {
                    if n != s.len() {
                        return Err(Error::invalid(format!("--n {n} but {path} holds {} values", s.len())));
                    }
                }
                Ok(s)
            }
        }
    }

    pub fn grid(&self, lowest: usize) -> Result<RootGrid> {
        match (&self.family, &self.spectrum) {
            (Some(_), Some(_)) => Err(Error::invalid("give either --family or --spectrum")),
            (None, Some(_)) => polygrid::appell_levels(&self.spectrum()?, lowest.max(1)),
            (f, None) => {
                let family = Family::parse(f.as_deref().unwrap_or("hermite"))?;
                if family == Family::General {
                    return Err(Error::invalid("the general family needs --spectrum"));
                }
                polygrid::family_grid(family, self.need_n()?)
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct RootsArgs {
    #[command(flatten)]
    pub source: Source,
    /// Level; defaults to N.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[command(flatten)]
    pub source: Source,
    /// Lowest level kept for spectrum grids.
    #[arg(long, default_value_t = 1)]
    pub lowest: usize,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub k: usize,
    /// Upper level; defaults to k + 1.
    #[arg(long)]
    pub l: Option<usize>,
    /// Writes the little-endian binary layout instead of CSV.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Args, Debug)]
pub struct DualpolyArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub k: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovProcess {
    Xi,
    Zeta,
    ZetaClosed,
    Dbm,
}

#[derive(Args, Debug)]
pub struct CovArgs {
    #[arg(long, value_enum)]
    pub process: CovProcess,
    #[command(flatten)]
    pub source: Source,
    /// `k:a,...` for xi and zeta, `i@t,...` for dbm.
    #[arg(long, default_value = "")]
    pub sites: String,
    /// Relative tolerance of the spectral sum.
    #[arg(long, default_value_t = covariance::SPECTRAL_TOL)]
    pub tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleProcess {
    Xi,
    Zeta,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub process: SampleProcess,
    #[command(flatten)]
    pub source: Source,
    /// Top level of zeta samples.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Truncation level of zeta samples.
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Writes framed binary records instead of CSV.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Args, Debug)]
pub struct DbmArgs {
    #[arg(long = "n", visible_alias = "N")]
    pub n: usize,
    /// Observation times, comma separated.
    #[arg(long, default_value = "1")]
    pub times: String,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
}

#[derive(Args, Debug)]
pub struct AiryArgs {
    /// Tabulates the first n zeros.
    #[arg(long, conflicts_with_all = ["cov", "lines"])]
    pub zeros: Option<usize>,
    /// Limit covariance at `i,j,t,s`.
    #[arg(long, conflicts_with = "lines")]
    pub cov: Option<String>,
    /// Samples the Airy line ensemble.
    #[arg(long)]
    pub lines: bool,
    #[arg(long, default_value = "1,2")]
    pub indices: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub times: String,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct SemigroupArgs {
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1)]
    pub i: usize,
    #[arg(long, default_value_t = 50)]
    pub j_max: usize,
    /// Tabulates jump intensities for `i, j <= j_max` instead.
    #[arg(long)]
    pub intensity: bool,
}

#[derive(Args, Debug)]
pub struct EdgeArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub k: usize,
    /// Number of top roots compared with Airy zeros.
    #[arg(long, default_value_t = 3)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct BulkArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub k: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergeKind {
    Gcorners,
    Dbm,
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    #[arg(value_enum)]
    pub kind: ConvergeKind,
    /// Values of N, comma separated.
    #[arg(long = "N", visible_alias = "n", default_value = "100,200,400,800")]
    pub ns: String,
    /// `i,j,t,s`.
    #[arg(long, default_value = "1,1,0,0", allow_hyphen_values = true)]
    pub cell: String,
}

/// Output of one command.
pub enum Artifact {
    Table(CsvTable),
    Binary(Vec<u8>),
}

/// Output of a command plus a flag for commands that report failures.
struct Outcome {
    artifact: Artifact,
    ok: bool,
}

impl From<CsvTable> for Outcome {
    fn from(t: CsvTable) -> Self {
        Outcome { artifact: Artifact::Table(t), ok: true }
    }
}

const SUBCOMMANDS: [&str; 13] = [
    "roots", "grid", "kernel", "dualpoly", "cov", "sample", "dbm", "airy", "semigroup", "edge",
    "bulk", "converge", "selftest",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", no + 1)))?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Inserts config entries right after the subcommand so that later flags override them.
fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let entries = parse_config(&std::fs::read_to_string(&path)?)?;
    let mut extra = Vec::new();
    let mut positional = Vec::new();
    for (k, v) in entries {
        match (k.as_str(), v.as_str()) {
            ("command", _) => positional.push(v),
            ("kind", _) => positional.push(v),
            (_, "true") => extra.push(format!("--{k}")),
            (_, "false") => {}
            _ => {
                extra.push(format!("--{k}"));
                extra.push(v);
            }
        }
    }
    let mut args = args;
    let pos = args.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.as_str())).map(|p| p + 1);
    let at = match pos {
        Some(p) => p + 1,
        None => {
            let Some(cmd) = positional.first().cloned() else {
                return Err(Error::invalid("no subcommand on the command line or in the config"));
            };
            positional.remove(0);
            args.insert(1, cmd);
            2
        }
    };
    let mut insert = positional;
    insert.extend(extra);
    args.splice(at..at, insert);
    Ok(args)
}

fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(t) = flag {
        return if t == 0 { Err(Error::invalid("--threads must be positive")) } else { Ok(t) };
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(Error::invalid(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs the front end and returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(argv: I) -> i32 {
    let raw: Vec<String> = argv.into_iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let args = match merge_config(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli, &args) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Roots(_) => "roots",
        Command::Grid(_) => "grid",
        Command::Kernel(_) => "kernel",
        Command::Dualpoly(_) => "dualpoly",
        Command::Cov(_) => "cov",
        Command::Sample(_) => "sample",
        Command::Dbm(_) => "dbm",
        Command::Airy(_) => "airy",
        Command::Semigroup(_) => "semigroup",
        Command::Edge(_) => "edge",
        Command::Bulk(_) => "bulk",
        Command::Converge(_) => "converge",
        Command::Selftest => "selftest",
    }
}

fn execute(cli: &Cli, args: &[String]) -> Result<bool> {
    let started = Instant::now();
    let c = &cli.common;
    let threads = resolve_threads(c.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| dispatch(&cli.command, c.seed, threads))?;
    let line = args.iter().skip(1).cloned().collect::<Vec<_>>().join(" ");
    let name = command_name(&cli.command);
    let target = c.out.as_ref().map(|p| c.out_dir.join(p));
    match (&outcome.artifact, &target) {
        (Artifact::Binary(_), None) => return Err(Error::invalid("binary output needs --out")),
        (Artifact::Binary(bytes), Some(path)) => write_file(path, bytes)?,
        (Artifact::Table(table), _) => {
            let text = render(table, c.format, name, &line, c.seed);
            match &target {
                Some(path) => write_file(path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    if let Some(path) = &target {
        let manifest = json!({
            "command": name,
            "argv": &args[1..],
            "version": env!("CARGO_PKG_VERSION"),
            "seed": c.seed,
            "threads": threads,
            "format": format!("{:?}", c.format).to_lowercase(),
            "artifact": path.display().to_string(),
            "ok": outcome.ok,
            "wall_time_s": started.elapsed().as_secs_f64(),
        });
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        write_file(&manifest_path(path), text.as_bytes())?;
    }
    Ok(outcome.ok)
}

/// `zeros.csv` gets `zeros.csv.manifest.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn cell_value(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return json!(i);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        _ => json!(s),
    }
}

/// Renders a table as CSV or JSON with the command and seed attached.
pub fn render(table: &CsvTable, format: Format, name: &str, line: &str, seed: u64) -> String {
    match format {
        Format::Csv => {
            let mut t = table.clone();
            t.comments.insert(0, format!("seed={seed}"));
            t.comments.insert(0, format!("betainf {line}"));
            t.render()
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    let obj = table.columns.iter().zip(r).map(|(c, v)| (c.clone(), cell_value(v))).collect();
                    Value::Object(obj)
                })
                .collect();
            let doc = json!({
                "command": name,
                "argv": line,
                "seed": seed,
                "comments": table.comments,
                "columns": table.columns,
                "rows": rows,
            });
            let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
            s.push('\n');
            s
        }
    }
}

fn dispatch(cmd: &Command, seed: u64, threads: usize) -> Result<Outcome> {
    match cmd {
        Command::Roots(a) => roots(a).map(Into::into),
        Command::Grid(a) => Ok(a.source.grid(a.lowest)?.to_csv().into()),
        Command::Kernel(a) => kernel(a),
        Command::Dualpoly(a) => dualpoly_cmd(a).map(Into::into),
        Command::Cov(a) => cov(a).map(Into::into),
        Command::Sample(a) => sample(a, seed, threads),
        Command::Dbm(a) => dbm(a, seed).map(Into::into),
        Command::Airy(a) => airy_cmd(a, seed).map(Into::into),
        Command::Semigroup(a) => semigroup(a).map(Into::into),
        Command::Edge(a) => edge(a).map(Into::into),
        Command::Bulk(a) => bulk(a).map(Into::into),
        Command::Converge(a) => converge(a).map(Into::into),
        Command::Selftest => selftest(),
    }
}

fn roots(a: &RootsArgs) -> Result<CsvTable> {
    let x = match (&a.source.family, &a.source.spectrum) {
        (None, Some(_)) => {
            let s = a.source.spectrum()?;
            asymptotics::level_roots(&s, a.k.unwrap_or(s.len()))?
        }
        _ => {
            let k = a.k.or(a.source.n).ok_or_else(|| Error::invalid("--k or --n is required"))?;
            match Family::parse(a.source.family.as_deref().unwrap_or("hermite"))? {
                Family::Hermite => polygrid::hermite_roots(k)?,
                Family::Laguerre { alpha } => polygrid::laguerre_roots(k, alpha)?,
                Family::Jacobi { alpha, beta } => polygrid::jacobi_roots(k, alpha, beta)?,
                Family::General => return Err(Error::invalid("the general family needs --spectrum")),
            }
        }
    };
    let mut t = CsvTable::new(&["i", "x"]);
    for (i, v) in x.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_f64(*v)]);
    }
    Ok(t)
}

fn kernel(a: &KernelArgs) -> Result<Outcome> {
    let l = a.l.unwrap_or(a.k + 1);
    let grid = a.source.grid(a.k)?;
    let kern = if l == a.k + 1 { kernels::alpha_matrix(&grid, a.k)? } else { kernels::diffusion_kernel(&grid, a.k, l)? };
    if a.binary {
        return Ok(Outcome { artifact: Artifact::Binary(kern.to_binary()), ok: true });
    }
    let mut t = kern.to_csv();
    t.comment(format!("k={} l={l}", a.k));
    Ok(t.into())
}

fn dualpoly_cmd(a: &DualpolyArgs) -> Result<CsvTable> {
    let hermite = a.source.spectrum.is_none() && matches!(a.source.family.as_deref(), None | Some("hermite"));
    let table = if hermite {
        dualpoly::q_table_hermite(a.k)?
    } else {
        dualpoly::q_table(&a.source.grid(a.k)?, a.k)?
    };
    let mut t = table.to_csv();
    t.comment(format!("k={} orthogonality_loss={}", a.k, fmt_f64(table.orthogonality_loss())));
    Ok(t)
}

fn parse_sites(s: &str) -> Result<Vec<Site>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, a) = p.split_once(':').ok_or_else(|| Error::Parse(format!("site {p:?} is not k:a")))?;
            let k = k.trim().parse().map_err(|_| Error::Parse(format!("bad level in {p:?}")))?;
            let a = a.trim().parse().map_err(|_| Error::Parse(format!("bad index in {p:?}")))?;
            Ok((k, a))
        })
        .collect()
}

fn parse_dbm_sites(s: &str) -> Result<Vec<(usize, f64)>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (i, t) = p.split_once('@').ok_or_else(|| Error::Parse(format!("site {p:?} is not i@t")))?;
            let i = i.trim().parse().map_err(|_| Error::Parse(format!("bad index in {p:?}")))?;
            let t = t.trim().parse().map_err(|_| Error::Parse(format!("bad time in {p:?}")))?;
            Ok((i, t))
        })
        .collect()
}

fn cov_table(m: &CovMatrix) -> CsvTable {
    let mut t = m.to_csv();
    t.comment(format!("labels={}", m.labels.join(" ")));
    t.comment(format!("min_eigenvalue={}", fmt_f64(m.min_eigenvalue())));
    t
}

fn cov(a: &CovArgs) -> Result<CsvTable> {
    let m = match a.process {
        CovProcess::Xi => covariance::cov_xi_matrix(&a.source.grid(1)?, &parse_sites(&a.sites)?)?,
        CovProcess::Zeta => covariance::cov_zeta_matrix(&parse_sites(&a.sites)?, TailPolicy::Corrected { tol: a.tol })?,
        CovProcess::ZetaClosed => covariance::cov_zeta_closed_matrix(a.source.need_n()?)?,
        CovProcess::Dbm => covariance::cov_dbm_matrix(a.source.need_n()?, &parse_dbm_sites(&a.sites)?)?,
    };
    if m.dim() == 0 {
        return Err(Error::invalid("--sites is empty"));
    }
    Ok(cov_table(&m))
}

fn sample(a: &SampleArgs, seed: u64, threads: usize) -> Result<Outcome> {
    let (sizes, draws, header) = match a.process {
        SampleProcess::Xi => {
            let grid = a.source.grid(1)?;
            let s = sampler::XiSampler::new(&grid)?;
            let (lo, hi) = (grid.lowest(), grid.n());
            let draws = sampler::monte_carlo(a.samples, seed, threads, |rng| s.sample(rng).flatten())?;
            ((lo..=hi).collect::<Vec<_>>(), draws, json!({"process": "xi", "n": hi}))
        }
        SampleProcess::Zeta => {
            let k_max = a.k_max.or(a.source.n).ok_or_else(|| Error::invalid("--k-max is required"))?;
            let l = a.truncation.unwrap_or_else(|| sampler::default_truncation(k_max));
            let s = ZetaSampler::new(k_max, l, ZetaMethod::Projected)?;
            let draws = sampler::monte_carlo(a.samples, seed, threads, |rng| s.sample(rng).flatten())?;
            let header = json!({"process": "zeta", "k_max": k_max, "truncation": l, "tail_bound": s.tail_bound()});
            ((1..=k_max).collect(), draws, header)
        }
    };
    if a.binary {
        let mut bytes = Vec::new();
        let mut header = header;
        header["seed"] = json!(seed);
        sampler::write_framed(&mut bytes, &header, &draws)?;
        return Ok(Outcome { artifact: Artifact::Binary(bytes), ok: true });
    }
    let mut t = CsvTable::new(&["sample", "k", "i", "value"]);
    t.comment(header.to_string());
    for (n, d) in draws.iter().enumerate() {
        let mut off = 0;
        for &k in &sizes {
            for i in 0..k {
                t.push(vec![n.to_string(), k.to_string(), (i + 1).to_string(), fmt_f64(d[off + i])]);
            }
            off += k;
        }
    }
    Ok(t.into())
}

fn dbm(a: &DbmArgs, seed: u64) -> Result<CsvTable> {
    let times: Vec<f64> = parse_list(&a.times)?;
    let solver = sampler::DbmSolver::new(a.n, &times)?;
    let mut t = CsvTable::new(&["path", "i", "t", "value", "seed"]);
    t.comment(format!("steps={}", solver.steps()));
    for p in 0..a.paths {
        let path = solver.simulate(&mut RngStream::new(seed, p as u64), false);
        for row in path.to_csv().rows {
            let mut r = vec![p.to_string()];
            r.extend(row);
            t.push(r);
        }
    }
    Ok(t)
}

fn airy_cmd(a: &AiryArgs, seed: u64) -> Result<CsvTable> {
    if let Some(cell) = &a.cov {
        let v: Vec<f64> = parse_list(cell)?;
        if v.len() != 4 || v[0] < 1.0 || v[1] < 1.0 || v[0].fract() != 0.0 || v[1].fract() != 0.0 {
            return Err(Error::invalid("--cov takes i,j,t,s with integer i, j >= 1"));
        }
        let (i, j) = (v[0] as usize, v[1] as usize);
        let mut t = CsvTable::new(&["i", "j", "t", "s", "cov"]);
        t.push(vec![i.to_string(), j.to_string(), fmt_f64(v[2]), fmt_f64(v[3]), fmt_f64(airy::limit_cov(i, j, v[2], v[3])?)]);
        return Ok(t);
    }
    if a.lines {
        let indices: Vec<usize> = parse_list(&a.indices)?;
        let times: Vec<f64> = parse_list(&a.times)?;
        return airy::sample_airy_lines(&indices, &times, a.samples, &mut RngStream::new(seed, 0));
    }
    let table = airy::airy_zeros(a.zeros.unwrap_or(10))?;
    let mut t = table.to_csv();
    t.comment(format!("max_residual={}", fmt_f64(table.max_residual())));
    Ok(t)
}

fn semigroup(a: &SemigroupArgs) -> Result<CsvTable> {
    if a.intensity {
        let mut t = CsvTable::new(&["i", "j", "closed_form", "antiderivative", "finite_difference"]);
        for i in 1..=a.j_max {
            for j in 1..=a.j_max {
                let r = airy::intensity(i, j)?;
                t.push(vec![
                    i.to_string(),
                    j.to_string(),
                    fmt_f64(r.closed_form),
                    fmt_f64(r.antiderivative),
                    fmt_f64(r.finite_difference),
                ]);
            }
        }
        return Ok(t);
    }
    let mut t = CsvTable::new(&["t", "i", "j", "value", "error"]);
    let rs = airy::semigroup_row_sum(a.t, a.i, a.j_max)?;
    t.comment(format!("row_sum={} tail_estimate={}", fmt_f64(rs.partial), fmt_f64(rs.tail_estimate)));
    for j in 1..=a.j_max {
        let e = airy::semigroup_p(a.t, a.i, j)?;
        t.push(vec![fmt_f64(e.t), e.i.to_string(), e.j.to_string(), fmt_f64(e.value), fmt_f64(e.error)]);
    }
    Ok(t)
}

fn edge(a: &EdgeArgs) -> Result<CsvTable> {
    let check = asymptotics::edge_check(&a.source.spectrum()?, a.k, a.count)?;
    let r = &check.report;
    let mut t = CsvTable::new(&["i", "scaled_root", "alpha", "rel_error"]);
    t.comment(format!(
        "n={} k={} x_edge={} z_c={} sigma={}",
        r.n,
        r.k,
        fmt_f64(r.x_edge),
        fmt_f64(r.z_c),
        fmt_f64(r.sigma)
    ));
    t.comment(format!("residuals={} {}", fmt_f64(r.residuals.0), fmt_f64(r.residuals.1)));
    for (i, s, al) in &check.rows {
        t.push(vec![i.to_string(), fmt_f64(*s), fmt_f64(*al), fmt_f64((s / al - 1.0).abs())]);
    }
    Ok(t)
}

fn bulk(a: &BulkArgs) -> Result<CsvTable> {
    let s = a.source.spectrum()?;
    let rep = asymptotics::critical_points(&s, a.x, a.k)?;
    let mut t = CsvTable::new(&["x", "k", "u_pred", "v_pred", "u_emp", "v_emp"]);
    t.comment(format!("classification={:?} real_roots={} poles={}", rep.classification, rep.real_roots, rep.poles));
    if let Some((re, im)) = rep.z_c {
        t.comment(format!("z_c={} {}", fmt_f64(re), fmt_f64(im)));
    }
    if rep.classification == Classification::Liquid {
        let c = asymptotics::bulk_check(&s, a.x, a.k)?;
        t.push(vec![
            fmt_f64(c.x),
            c.k.to_string(),
            fmt_f64(c.u_pred),
            fmt_f64(c.v_pred),
            fmt_f64(c.u_emp),
            fmt_f64(c.v_emp),
        ]);
    }
    Ok(t)
}

fn converge(a: &ConvergeArgs) -> Result<CsvTable> {
    let ns: Vec<usize> = parse_list(&a.ns)?;
    let cell: Vec<f64> = parse_list(&a.cell)?;
    if cell.len() != 4 || cell[0] < 1.0 || cell[1] < 1.0 {
        return Err(Error::invalid("--cell takes i,j,t,s with i, j >= 1"));
    }
    let kind = match a.kind {
        ConvergeKind::Gcorners => LimitKind::Gcorners,
        ConvergeKind::Dbm => LimitKind::Dbm,
    };
    let rows = asymptotics::limit_ladder(kind, &ns, cell[0] as usize, cell[1] as usize, cell[2], cell[3])?;
    Ok(asymptotics::ladder_csv(&rows))
}

/// One line of the self-test table.
#[derive(Clone, Debug)]
pub struct CheckRow {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.bound
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Quick invariants across all modules; each row holds a worst-case residual.
pub fn selftest_rows() -> Vec<CheckRow> {
    fn row(name: &'static str, bound: f64, f: impl FnOnce() -> Result<f64>) -> CheckRow {
        CheckRow { name, value: f().unwrap_or(f64::INFINITY), bound }
    }
    vec![
        row("hermite identities k=40", 1e-9, || Ok(polygrid::check_hermite_identities(40)?.max_residual())),
        row("two-atom interlacing N=40", 0.0, || {
            Ok(polygrid::appell_grid(&SpectrumN::two_atom(40)?)?.interlacing_violation())
        }),
        row("kernel rows are stochastic", 1e-12, || {
            let g = polygrid::hermite_grid(20)?;
            let mut worst: f64 = 0.0;
            for k in 1..20 {
                let a = kernels::alpha_matrix(&g, k)?;
                worst = worst.max(max_abs(a.row_sums().into_iter().map(|s| s - 1.0)));
                worst = worst.max(max_abs(a.data().iter().map(|&v| v.min(0.0))));
            }
            Ok(worst)
        }),
        row("kernel semigroup law", 1e-12, || {
            let g = polygrid::jacobi_grid(14, 0.5, 0.5)?;
            let direct = kernels::diffusion_kernel(&g, 4, 12)?;
            let split = kernels::diffusion_kernel(&g, 4, 8)?.then(&kernels::diffusion_kernel(&g, 8, 12)?)?;
            Ok(max_abs(direct.data().iter().zip(split.data()).map(|(a, b)| a - b)))
        }),
        row("dual eigenrelation k=12", 1e-8, || {
            let fams = [Family::Hermite, Family::Laguerre { alpha: 1.5 }, Family::Jacobi { alpha: 0.5, beta: 0.5 }];
            let mut worst: f64 = 0.0;
            for f in fams {
                for m in 0..12 {
                    worst = worst.max(dualpoly::check_eigenrelation(f, 12, m)?);
                }
            }
            Ok(worst)
        }),
        row("spectral zeta = closed form N=5", 1e-10, || {
            let mut worst: f64 = 0.0;
            for i in 1..=5 {
                for j in 1..=5 {
                    let s = covariance::cov_zeta_spectral((5, i), (5, j), TailPolicy::default())?.value;
                    worst = worst.max((s - covariance::cov_zeta_closed_equal_levels(5, i, j)?).abs());
                }
            }
            Ok(worst)
        }),
        row("closed zeta PSD N=30", 1e-10, || Ok((-covariance::cov_zeta_closed_matrix(30)?.min_eigenvalue()).max(0.0))),
        row("DBM covariance scaling c=4", 1e-12, || {
            let mut worst: f64 = 0.0;
            for (i, j, t, s) in [(1, 1, 1.0, 2.0), (2, 3, 0.5, 0.7), (4, 4, 3.0, 3.0)] {
                let a = covariance::cov_dbm(4, i, j, 4.0 * t, 4.0 * s)?;
                let b = 4.0 * covariance::cov_dbm(4, i, j, t, s)?;
                worst = worst.max(((a - b) / b).abs());
            }
            Ok(worst)
        }),
        row("Airy zero residuals n=10", 1e-12, || Ok(airy::airy_zeros(10)?.max_residual())),
        row("Airy mode orthonormality i and j <= 3", 1e-8, || {
            let mut worst: f64 = 0.0;
            for i in 1..=3 {
                for j in 1..=3 {
                    let v = airy::orthonormality(i, j)?.value;
                    worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            Ok(worst)
        }),
        row("intensity antiderivative i and j <= 3", 1e-8, || {
            let mut worst: f64 = 0.0;
            for i in 1..=3 {
                for j in 1..=3 {
                    worst = worst.max(airy::intensity(i, j)?.antiderivative_gap());
                }
            }
            Ok(worst)
        }),
        row("edge double root two-atom N=100", 1e-8, || {
            let r = asymptotics::edge_prediction(&SpectrumN::two_atom(100)?, 25)?;
            Ok(r.residuals.0.max(r.residuals.1))
        }),
    ]
}

fn selftest() -> Result<Outcome> {
    let rows = selftest_rows();
    let mut t = CsvTable::new(&["status", "check", "value", "bound"]);
    for r in &rows {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        eprintln!("{status}  {:<36} {:>10.3e}  (bound {:.0e})", r.name, r.value, r.bound);
        t.push(vec![status.into(), r.name.into(), fmt_f64(r.value), fmt_f64(r.bound)]);
    }
    let ok = rows.iter().all(CheckRow::passed);
    t.comment(format!("passed={}/{}", rows.iter().filter(|r| r.passed()).count(), rows.len()));
    Ok(Outcome { artifact: Artifact::Table(t), ok })
}
