//! Command-line front end for the `hamdich` toolkit.
//!
//! Every command writes CSV and JSON under `--out`. CSV files open with two
//! `#` lines (timestamp, then the run configuration); everything below them
//! depends only on the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;

use hamdich::base_flow::BasePoint;
use hamdich::dichotomy::{classify_family, default_probes, detect_ed, ClassifyOptions, FamilyClass, Verdict};
use hamdich::hamiltonian::{Family, FamilyKind};
use hamdich::lq_control::{solvability_check, synthesize, LQProblem, SynthesisOptions};
use hamdich::param_scan::{find_alpha_star, herglotz_fit, rho_curve, scan, weyl_sampler, HerglotzOptions, ScanOptions};
use hamdich::problem::ProblemFile;
use hamdich::riccati_weyl::{weyl_minus, weyl_plus, WeylMatrix, WeylRole};
use hamdich::rotation::{ed_candidates_from_rotation, rotation_profile, DEFAULT_HORIZON};
use hamdich::{fmt_num, presets, Complex64};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Orbit step of the sample grid.
const GRID_DT: f64 = 0.7548776662466927;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hamdich::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
    #[error("golden mismatch for {example}:\n{table}")]
    GoldenMismatch { example: String, table: String },
}

impl CliError {
    /// 2 for answers that are undecided at the requested tolerance, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(hamdich::Error::NoConvergence { .. } | hamdich::Error::DivergentLimit { .. }) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hamdich", version, about = "Exponential dichotomy, Weyl functions and rotation numbers of linear Hamiltonian systems")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Integration tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Bisection tolerance for α* and ρ.
    #[arg(long, global = true, default_value_t = 2.5e-4)]
    pub bisect_tol: f64,
    /// Number of base points sampled along an orbit.
    #[arg(long, global = true, default_value_t = 8)]
    pub grid: usize,
    /// Horizon of the rotation-number averages.
    #[arg(long = "T", global = true, default_value_t = DEFAULT_HORIZON)]
    pub horizon: f64,
    /// Upper end of bisection brackets; boundaries beyond it are reported as infinite.
    #[arg(long, global = true, default_value_t = 1e3)]
    pub bracket: f64,
    /// Seed of the randomized initial frames.
    #[arg(long, global = true, default_value_t = 11)]
    pub seed: u64,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Read the H3-type family as `H3 − λΔ`.
    #[arg(long, global = true)]
    pub negate_lambda: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Plus,
    Minus,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline on a built-in example, checked against golden values.
    Examples {
        #[arg(value_parser = ["ex1", "ex2", "ex3", "ex4"])]
        name: String,
        /// Golden file replacing the built-in one.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// α*, ρ-curve, Weyl ordering and rotation profile of an H2-type family.
    Scan {
        input: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,0.5")]
        alphas: Vec<f64>,
    },
    /// M⁺ and M⁻ along a line of spectral parameters.
    Weyl {
        input: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
        lambdas: Vec<f64>,
        /// Common imaginary part of the parameters.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        imag: f64,
    },
    /// Rotation numbers along the real family.
    Rotation {
        input: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2,3,4")]
        alphas: Vec<f64>,
    },
    /// Decides between the ED and the bounded-solution alternatives.
    Classify { input: String },
    /// Feedback synthesis for an LQ problem file (or the `scalar` preset).
    Lq {
        input: String,
        #[arg(long, default_value_t = 20.0)]
        t_report: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Herglotz data of M⁺ or M⁻: L, K and measure masses of windows.
    Herglotz {
        input: String,
        #[arg(long, value_enum, default_value_t = Role::Plus)]
        role: Role,
        /// Windows `a:b`, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1:0,0:1,1:2")]
        windows: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Examples { .. } => "examples",
            Command::Scan { .. } => "scan",
            Command::Weyl { .. } => "weyl",
            Command::Rotation { .. } => "rotation",
            Command::Classify { .. } => "classify",
            Command::Lq { .. } => "lq",
            Command::Herglotz { .. } => "herglotz",
        }
    }

    fn args_json(&self) -> serde_json::Value {
        match self {
            Command::Examples { name, golden } => json!({ "name": name, "golden": golden }),
            Command::Scan { input, alphas } => json!({ "input": input, "alphas": alphas }),
            Command::Weyl { input, lambdas, imag } => json!({ "input": input, "lambdas": lambdas, "imag": imag }),
            Command::Rotation { input, alphas } => json!({ "input": input, "alphas": alphas }),
            Command::Classify { input } => json!({ "input": input }),
            Command::Lq { input, t_report, samples } => json!({ "input": input, "t_report": t_report, "samples": samples }),
            Command::Herglotz { input, role, windows } => json!({ "input": input, "role": role, "windows": windows }),
        }
    }
}

/// Resolved configuration of one run; embedded in every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub args: serde_json::Value,
    pub common: CommonArgs,
    pub jobs: usize,
    pub scan: ScanOptions,
}

impl RunConfig {
    pub fn new(cli: &Cli) -> CliResult<Self> {
        let c = &cli.common;
        for (name, v) in [("--tol", c.tol), ("--bisect-tol", c.bisect_tol), ("--T", c.horizon), ("--bracket", c.bracket)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if c.grid == 0 || c.jobs == Some(0) {
            return Err(CliError::Input("--grid and --jobs must be at least 1".into()));
        }
        let mut scan = ScanOptions::default();
        scan.ed.integ_tol = c.tol;
        scan.ed.seed = c.seed;
        scan.uwd.integ_tol = c.tol;
        scan.weyl.integ_tol = 0.1 * c.tol;
        scan.weyl.seed = c.seed.wrapping_add(1);
        scan.cap = c.bracket;
        scan.alpha_tol = c.bisect_tol;
        scan.eps_tol = c.bisect_tol.min(scan.eps_tol);
        scan.rotation_horizon = c.horizon;
        let jobs = c.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Ok(RunConfig { command: cli.command.name().into(), args: cli.command.args_json(), common: c.clone(), jobs, scan })
    }

    fn grid(&self, family: &Family) -> Vec<BasePoint> {
        family.base.flow().grid(self.common.grid, GRID_DT)
    }

    /// Parameter actually fed to the family.
    fn param(&self, family: &Family, lambda: Complex64) -> Complex64 {
        if self.common.negate_lambda && family.kind == FamilyKind::H3 {
            -lambda
        } else {
            lambda
        }
    }

    fn reject_negation(&self, family: &Family, what: &str) -> CliResult<()> {
        if self.common.negate_lambda && family.kind == FamilyKind::H3 {
            return Err(CliError::Input(format!("--negate-lambda is not supported by {what}")));
        }
        Ok(())
    }
}

/// Parses the command line, runs the command inside a pool of `--jobs`
/// threads and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = RunConfig::new(&cli).and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(&cli.command, &cfg))
    });
    match result {
        Ok(o) => o.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: &Command, cfg: &RunConfig) -> CliResult<Outcome> {
    fs::create_dir_all(&cfg.common.out).map_err(|source| CliError::Io { path: cfg.common.out.clone(), source })?;
    match command {
        Command::Examples { name, golden } => cmd_examples(cfg, name, golden.as_deref()),
        Command::Scan { input, alphas } => cmd_scan(cfg, input, alphas),
        Command::Weyl { input, lambdas, imag } => cmd_weyl(cfg, input, lambdas, *imag),
        Command::Rotation { input, alphas } => cmd_rotation(cfg, input, alphas),
        Command::Classify { input } => cmd_classify(cfg, input),
        Command::Lq { input, t_report, samples } => cmd_lq(cfg, input, *t_report, *samples),
        Command::Herglotz { input, role, windows } => cmd_herglotz(cfg, input, *role, windows),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// A problem file path, or the name of a built-in family.
pub fn load_family(input: &str) -> CliResult<Family> {
    let path = Path::new(input);
    if path.exists() {
        let src = read(path)?;
        let p = ProblemFile::parse(&src).map_err(|e| CliError::Input(format!("{input}: {e}")))?;
        return Ok(p.family()?);
    }
    presets::family(input).map_err(|_| {
        CliError::Input(format!("{input}: no such file, and not a preset ({})", presets::NAMES.join(", ")))
    })
}

pub fn load_lq(input: &str) -> CliResult<LQProblem> {
    let path = Path::new(input);
    if path.exists() {
        let src = read(path)?;
        return LQProblem::from_json_str(&src).map_err(|e| CliError::Input(format!("{input}: {e}")));
    }
    presets::lq(input).map_err(|_| CliError::Input(format!("{input}: no such file, and not an LQ preset (scalar)")))
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_file(cfg: &RunConfig, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = cfg.common.out.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// CSV with the timestamp and the configuration as `#` header lines.
pub fn write_csv(cfg: &RunConfig, name: &str, body: &str) -> CliResult<PathBuf> {
    let config = serde_json::to_string(cfg).expect("config serializes");
    let s = format!("# hamdich {VERSION} generated_unix={}\n# config {config}\n{body}", timestamp());
    write_file(cfg, name, &s)
}

pub fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, result: &T) -> CliResult<PathBuf> {
    let doc = json!({
        "tool": "hamdich",
        "version": VERSION,
        "generated_unix": timestamp(),
        "config": cfg,
        "result": result,
    });
    write_file(cfg, name, &serde_json::to_string_pretty(&doc).expect("results serialize"))
}

/// CSV body with the `#` header lines removed.
pub fn csv_body(s: &str) -> String {
    s.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn cmd_scan(cfg: &RunConfig, input: &str, alphas: &[f64]) -> CliResult<Outcome> {
    let fam = load_family(input)?;
    cfg.reject_negation(&fam, "scan")?;
    let grid = cfg.grid(&fam);
    let r = scan(&fam, &grid, alphas, &cfg.scan)?;
    write_csv(cfg, "scan.csv", &r.to_csv())?;
    if let Some(p) = &r.rotation_profile {
        write_csv(cfg, "scan_rotation.csv", &p.to_csv())?;
    }
    write_json(cfg, "scan.json", &json!({ "grid_size": grid.len(), "scan": r }))?;
    println!("alpha* = {}", r.alpha_star.alpha_star);
    let flagged = r.alpha_star.boundary.flagged || r.rho_table.iter().any(|row| row.flagged);
    Ok(if flagged { Outcome::Inconclusive } else { Outcome::Done })
}

fn status_of(e: &hamdich::Error) -> (&'static str, bool) {
    match e {
        hamdich::Error::NcFailure { .. } => ("nc_failure", false),
        hamdich::Error::NonInvertibleTopBlock { .. } => ("non_invertible", false),
        hamdich::Error::FiniteEscape { .. } => ("finite_escape", false),
        hamdich::Error::NoConvergence { .. } => ("no_convergence", true),
        hamdich::Error::DivergentLimit { .. } => ("divergent", true),
        _ => ("error", false),
    }
}

fn matrix_columns(n: usize) -> String {
    let mut s = String::new();
    for i in 1..=n {
        for j in 1..=n {
            let _ = write!(s, ",m{i}{j}_re,m{i}{j}_im");
        }
    }
    s
}

fn matrix_cells(m: Option<&DMatrix<Complex64>>, n: usize) -> String {
    let mut s = String::new();
    for i in 0..n {
        for j in 0..n {
            match m {
                Some(m) => {
                    let _ = write!(s, ",{},{}", fmt_num(m[(i, j)].re), fmt_num(m[(i, j)].im));
                }
                None => s.push_str(",,"),
            }
        }
    }
    s
}

fn cmd_weyl(cfg: &RunConfig, input: &str, lambdas: &[f64], imag: f64) -> CliResult<Outcome> {
    use rayon::prelude::*;
    let fam = load_family(input)?;
    let n = fam.base.n();
    let o = fam.base.flow().origin();
    let jobs: Vec<(f64, WeylRole)> = lambdas.iter().flat_map(|&l| [(l, WeylRole::MPlus), (l, WeylRole::MMinus)]).collect();
    let results: Vec<hamdich::Result<WeylMatrix>> = jobs
        .par_iter()
        .map(|&(l, role)| {
            let f = fam.at(cfg.param(&fam, Complex64::new(l, imag)));
            match role {
                WeylRole::MPlus => weyl_plus(&f, &o, &cfg.scan.weyl),
                _ => weyl_minus(&f, &o, &cfg.scan.weyl),
            }
        })
        .collect();
    let mut body = format!("lambda_re,lambda_im,role,status{}\n", matrix_columns(n));
    let mut inconclusive = false;
    let mut rows = Vec::new();
    for (&(l, role), r) in jobs.iter().zip(&results) {
        let tag = if role == WeylRole::MPlus { "M+" } else { "M-" };
        let (status, undecided) = match r {
            Ok(_) => ("ok", false),
            Err(e) => status_of(e),
        };
        if status == "error" {
            return Err(r.as_ref().unwrap_err().clone().into());
        }
        inconclusive |= undecided;
        let m = r.as_ref().ok().map(|w| &w.m);
        let _ = writeln!(body, "{},{},{tag},{status}{}", fmt_num(l), fmt_num(imag), matrix_cells(m, n));
        rows.push(json!({
            "lambda": [l, imag],
            "role": tag,
            "status": status,
            "weyl": r.as_ref().ok(),
            "error": r.as_ref().err().map(|e| e.to_string()),
        }));
    }
    write_csv(cfg, "weyl.csv", &body)?;
    write_json(cfg, "weyl.json", &rows)?;
    Ok(if inconclusive { Outcome::Inconclusive } else { Outcome::Done })
}

fn cmd_rotation(cfg: &RunConfig, input: &str, alphas: &[f64]) -> CliResult<Outcome> {
    let fam = load_family(input)?;
    cfg.reject_negation(&fam, "rotation")?;
    let o = fam.base.flow().origin();
    let p = rotation_profile(&fam, &o, alphas, cfg.common.horizon, cfg.common.tol)?;
    let candidates = ed_candidates_from_rotation(&p, 1e-3);
    write_csv(cfg, "rotation.csv", &p.to_csv())?;
    write_json(cfg, "rotation.json", &json!({ "profile": p, "ed_candidates": candidates }))?;
    Ok(Outcome::Done)
}

fn cmd_classify(cfg: &RunConfig, input: &str) -> CliResult<Outcome> {
    let fam = load_family(input)?;
    let grid = cfg.grid(&fam);
    let probes: Vec<Complex64> = default_probes().into_iter().map(|p| cfg.param(&fam, p)).collect();
    let r = classify_family(&fam, &grid, &probes, &cfg.scan.ed, &ClassifyOptions::default())?;
    let mut body = String::from("lambda_re,lambda_im,verdict,witness\n");
    for p in &r.probes {
        let verdict = serde_json::to_value(p.verdict).expect("verdict serializes");
        let _ = writeln!(body, "{},{},{},{}", fmt_num(p.lambda.re), fmt_num(p.lambda.im), verdict.as_str().unwrap_or(""), p.witness.is_some());
    }
    write_csv(cfg, "classify.csv", &body)?;
    write_json(cfg, "classify.json", &json!({ "grid_size": grid.len(), "report": r }))?;
    println!("class: {:?}", r.class);
    Ok(if r.class == FamilyClass::Undetermined { Outcome::Inconclusive } else { Outcome::Done })
}

fn cmd_lq(cfg: &RunConfig, input: &str, t_report: f64, samples: usize) -> CliResult<Outcome> {
    let p = load_lq(input)?;
    let mut opts = SynthesisOptions { t_report, samples, ..SynthesisOptions::default() };
    opts.ed = cfg.scan.ed;
    opts.weyl = cfg.scan.weyl;
    opts.grid_count = cfg.common.grid;
    let grid = p.flow.grid(opts.grid_count, opts.grid_dt);
    let solv = solvability_check(&p, &grid, &opts.ed)?;
    match solv.solvable {
        None => {
            write_json(cfg, "lq.json", &json!({ "solvability": solv }))?;
            eprintln!("solvability undecided: ED detection was inconclusive");
            return Ok(Outcome::Inconclusive);
        }
        Some(false) => {
            write_json(cfg, "lq.json", &json!({ "solvability": solv }))?;
            return Err(hamdich::Error::NotSolvable(format!("ED {:?}, NC failed or absent", solv.ed.verdict)).into());
        }
        Some(true) => {}
    }
    let s = synthesize(&p, &p.flow.origin(), &opts)?;
    write_csv(cfg, "lq.csv", &s.to_csv())?;
    write_json(cfg, "lq.json", &json!({ "J": s.total_value(), "solvability": solv, "solution": s }))?;
    println!("J = {}", s.total_value());
    Ok(Outcome::Done)
}

fn parse_window(w: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Input(format!("window {w:?} is not of the form a:b"));
    let (a, b) = w.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a < b) {
        return Err(CliError::Input(format!("window {w:?} needs a < b")));
    }
    Ok((a, b))
}

fn cmd_herglotz(cfg: &RunConfig, input: &str, role: Role, windows: &[String]) -> CliResult<Outcome> {
    let fam = load_family(input)?;
    cfg.reject_negation(&fam, "herglotz")?;
    let windows: Vec<(f64, f64)> = windows.iter().map(|w| parse_window(w)).collect::<CliResult<_>>()?;
    let o = fam.base.flow().origin();
    let role = match role {
        Role::Plus => WeylRole::MPlus,
        Role::Minus => WeylRole::MMinus,
    };
    let sampler = weyl_sampler(&fam, &o, role, cfg.scan.weyl);
    let h = herglotz_fit(&sampler, &windows, &HerglotzOptions::default())?;
    let mut body = String::from("a1,a2,mass_trace,atom_left_trace,atom_right_trace,open_mass_trace,extrapolation_defect\n");
    for s in &h.measure_samples {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            fmt_num(s.alpha1),
            fmt_num(s.alpha2),
            fmt_num(s.mass.trace()),
            fmt_num(s.atom_left.trace()),
            fmt_num(s.atom_right.trace()),
            fmt_num(s.open_mass.trace()),
            fmt_num(s.extrapolation_defect)
        );
    }
    write_csv(cfg, "herglotz.csv", &body)?;
    write_json(cfg, "herglotz.json", &h)?;
    Ok(Outcome::Done)
}

/// A number that may be written as `"inf"` or `"-inf"`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(x) => Ok(Num(x)),
            Raw::S(s) => s.trim().parse().map(Num).map_err(|_| serde::de::Error::custom(format!("not a number: {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    pub want: Num,
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectAt {
    pub at: f64,
    pub want: Num,
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectMatrix {
    pub at: f64,
    /// Row-major entries.
    pub want: Vec<Num>,
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Golden {
    pub example: String,
    pub alpha_star: Expect,
    pub weyl_plus: Vec<ExpectMatrix>,
    pub rho: Vec<ExpectAt>,
    pub rotation: Vec<ExpectAt>,
    /// Limit of ρ as α increases to α*.
    #[serde(default)]
    pub rho_limit: Option<Expect>,
}

pub fn builtin_golden(name: &str) -> Option<&'static str> {
    match name {
        "ex1" => Some(include_str!("../golden/ex1.json")),
        "ex2" => Some(include_str!("../golden/ex2.json")),
        "ex3" => Some(include_str!("../golden/ex3.json")),
        "ex4" => Some(include_str!("../golden/ex4.json")),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GoldenRow {
    pub quantity: String,
    pub got: f64,
    pub want: f64,
    pub diff: f64,
    pub tol: f64,
    pub ok: bool,
}

impl GoldenRow {
    fn new(quantity: String, got: f64, want: f64, tol: f64) -> Self {
        let diff = if got == want { 0.0 } else { (got - want).abs() };
        GoldenRow { quantity, got, want, diff, tol, ok: diff <= tol }
    }
}

pub fn golden_table(rows: &[GoldenRow]) -> String {
    let mut s = format!("{:<24} {:>14} {:>14} {:>11} {:>9}\n", "quantity", "got", "want", "diff", "tol");
    for r in rows.iter().filter(|r| !r.ok) {
        let _ = writeln!(s, "{:<24} {:>14.8} {:>14.8} {:>11.3e} {:>9.1e}", r.quantity, r.got, r.want, r.diff, r.tol);
    }
    s
}

/// Quadratic extrapolation of ρ to α* from three points just below it.
fn rho_limit(fam: &Family, grid: &[BasePoint], alpha_star: f64, cfg: &RunConfig) -> CliResult<f64> {
    let offsets = [0.04, 0.02, 0.01];
    let alphas: Vec<f64> = offsets.iter().map(|d| alpha_star - d).collect();
    let rows = rho_curve(fam, grid, &alphas, &cfg.scan)?;
    if rows.iter().any(|r| r.rho.is_infinite()) {
        return Ok(f64::INFINITY);
    }
    let mut v = 0.0;
    for (i, ri) in rows.iter().enumerate() {
        let mut w = 1.0;
        for (j, rj) in rows.iter().enumerate() {
            if i != j {
                w *= (alpha_star - rj.alpha) / (ri.alpha - rj.alpha);
            }
        }
        v += w * ri.rho;
    }
    Ok(v)
}

fn cmd_examples(cfg: &RunConfig, name: &str, golden_path: Option<&Path>) -> CliResult<Outcome> {
    let src = match golden_path {
        Some(p) => read(p)?,
        None => builtin_golden(name).ok_or_else(|| CliError::Input(format!("no golden values for {name}")))?.to_string(),
    };
    let golden: Golden = serde_json::from_str(&src).map_err(|e| CliError::Input(format!("golden file: {e}")))?;
    if golden.example != name {
        return Err(CliError::Input(format!("golden file is for {}, not {name}", golden.example)));
    }
    let fam = presets::family(name)?;
    let n = fam.base.n();
    let grid = cfg.grid(&fam);
    let o = fam.base.flow().origin();
    let mut rows = Vec::new();

    let ed0 = detect_ed(&fam.at_real(0.0), &grid, &cfg.scan.ed)?;

    let mut weyl_body = format!("lambda,role,status{}\n", matrix_columns(n));
    let mut weyl_rows = Vec::new();
    for e in &golden.weyl_plus {
        let f = fam.at_real(e.at);
        for (tag, r) in [("M+", weyl_plus(&f, &o, &cfg.scan.weyl)), ("M-", weyl_minus(&f, &o, &cfg.scan.weyl))] {
            let status = match &r {
                Ok(_) => "ok",
                Err(err) => status_of(err).0,
            };
            let _ = writeln!(weyl_body, "{},{tag},{status}{}", fmt_num(e.at), matrix_cells(r.as_ref().ok().map(|w| &w.m), n));
            if tag == "M+" {
                let got = r.as_ref().map(|w| w.re()).unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN));
                if e.want.len() != n * n {
                    return Err(CliError::Input(format!("golden weyl_plus({}) needs {} entries", e.at, n * n)));
                }
                for i in 0..n {
                    for j in 0..n {
                        let q = if n == 1 { format!("M+({})", e.at) } else { format!("M+({})[{},{}]", e.at, i + 1, j + 1) };
                        rows.push(GoldenRow::new(q, got[(i, j)], e.want[i * n + j].0, e.tol));
                    }
                }
            }
            weyl_rows.push(json!({ "lambda": e.at, "role": tag, "status": status, "weyl": r.as_ref().ok() }));
        }
    }

    let mut alphas: Vec<f64> = golden.rotation.iter().map(|e| e.at).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let profile = rotation_profile(&fam, &o, &alphas, cfg.common.horizon, cfg.common.tol)?;
    for e in &golden.rotation {
        let got = profile.rows.iter().find(|r| r.alpha == e.at).map_or(f64::NAN, |r| r.estimate.value);
        rows.push(GoldenRow::new(format!("rotation({})", e.at), got, e.want.0, e.tol));
    }

    let alpha_star = find_alpha_star(&fam, &grid, &cfg.scan)?;
    rows.push(GoldenRow::new("alpha*".into(), alpha_star.alpha_star, golden.alpha_star.want.0, golden.alpha_star.tol));

    let rho_alphas: Vec<f64> = golden.rho.iter().map(|e| e.at).collect();
    let rho = rho_curve(&fam, &grid, &rho_alphas, &cfg.scan)?;
    for e in &golden.rho {
        let got = rho.iter().find(|r| r.alpha == e.at).map_or(f64::NAN, |r| r.rho);
        rows.push(GoldenRow::new(format!("rho({})", e.at), got, e.want.0, e.tol));
    }
    let limit = if alpha_star.alpha_star.is_finite() { Some(rho_limit(&fam, &grid, alpha_star.alpha_star, cfg)?) } else { None };
    if let Some(e) = &golden.rho_limit {
        rows.push(GoldenRow::new("rho_limit".into(), limit.unwrap_or(f64::NAN), e.want.0, e.tol));
    }

    let mut rho_body = String::from("alpha,rho,capped,flagged\n");
    for r in &rho {
        let _ = writeln!(rho_body, "{},{},{},{}", fmt_num(r.alpha), fmt_num(r.rho), r.capped, r.flagged);
    }
    let mut golden_body = String::from("quantity,got,want,diff,tol,ok\n");
    for r in &rows {
        let _ = writeln!(golden_body, "{},{},{},{},{},{}", r.quantity, fmt_num(r.got), fmt_num(r.want), fmt_num(r.diff), fmt_num(r.tol), r.ok);
    }
    write_csv(cfg, &format!("{name}_weyl.csv"), &weyl_body)?;
    write_csv(cfg, &format!("{name}_rotation.csv"), &profile.to_csv())?;
    write_csv(cfg, &format!("{name}_rho.csv"), &rho_body)?;
    write_csv(cfg, &format!("{name}_golden.csv"), &golden_body)?;
    write_json(
        cfg,
        &format!("{name}.json"),
        &json!({
            "example": name,
            "grid_size": grid.len(),
            "ed_at_zero": { "verdict": ed0.verdict, "beta_hat": ed0.beta_hat, "eta_hat": ed0.eta_hat },
            "weyl": weyl_rows,
            "rotation_profile": profile,
            "alpha_star": alpha_star,
            "rho": rho,
            "rho_limit": limit,
            "golden": rows,
        }),
    )?;

    let bad = rows.iter().filter(|r| !r.ok).count();
    if bad > 0 {
        return Err(CliError::GoldenMismatch { example: name.into(), table: golden_table(&rows) });
    }
    println!("{name}: {} golden values match", rows.len());
    let flagged = alpha_star.boundary.flagged || rho.iter().any(|r| r.flagged) || ed0.verdict == Verdict::Inconclusive;
    Ok(if flagged { Outcome::Inconclusive } else { Outcome::Done })
}
