//! Command-line front end.
//!
//! [`parse_args`] turns an argument vector into a validated [`RunConfig`];
//! [`run`] executes it. Every config can print itself back as a canonical
//! argument line ([`RunConfig::echo`]) that reproduces the run, and that line
//! heads every CSV report as `# config: ...`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::conditions::{RegionOptions, SupportAnalyzer, SupportSizes};
use crate::error::{Error, Result};
use crate::experiments::{
    condition_failure_study, gaussian_matrix, grid_search_recovery, region_study, sample_signal,
    stream_rng, EnsembleSpec, EntryScale, GeometricGrid, NoiseMode, RecoveryConfig, Selection,
    SignalSpec, StatSummary, StdKind, StudyOptions,
};
use crate::io::{format_sig6, read_matrix, read_vector, write_matrix, write_report, write_vector, CsvReport};
use crate::linalg::{Beta, IndexSet};
use crate::solvers::{
    solve_multi_alternating, solve_multi_reduced, support, AlternatingOptions, IstaOptions,
    PenaltyParams, DEFAULT_ZERO_TOL,
};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20240101;

/// Exit status of `certify` when the support is not certified.
pub const EXIT_NOT_CERTIFIED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "unmix", version, about = "Support recovery for sparse signals in noisy mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Check the recovery condition for one support.
    Certify(CertifyArgs),
    /// Worst case over all supports of size k.
    Region(RegionArgs),
    /// Minimize the single- or multi-penalty functional.
    Solve(SolveArgs),
    /// Condition-failure fractions over a Gaussian ensemble.
    McConditions(McConditionsArgs),
    /// R and Σ statistics over a Gaussian ensemble.
    McRegion(McRegionArgs),
    /// Grid-search comparison of single- and multi-penalty recovery.
    McRecovery(McRecoveryArgs),
    /// Draw one Gaussian matrix.
    GenMatrix(GenMatrixArgs),
    /// Draw one sparse signal and noise vector.
    GenSignal(GenSignalArgs),
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct CertifyArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_parser = parse_beta)]
    pub beta: Beta,
    /// Comma-separated column indices, e.g. 0,3,7.
    #[arg(long, value_delimiter = ',', required = true)]
    pub support: Vec<usize>,
    #[arg(long, value_parser = parse_positive)]
    pub c: Option<f64>,
    #[arg(long, value_parser = parse_positive)]
    pub d: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct RegionArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, value_parser = parse_beta)]
    pub beta: Beta,
    #[arg(long, value_parser = parse_count)]
    pub k: usize,
    /// Include all supports of size 1..=k instead of exactly k.
    #[arg(long)]
    pub up_to: bool,
    /// Write Θ^max sampled on --theta-grid to this CSV.
    #[arg(long)]
    pub theta_samples: Option<PathBuf>,
    /// Linear grid "start,stop,count" for Θ^max samples.
    #[arg(long, value_parser = parse_linear_grid, default_value = "0,100,101")]
    pub theta_grid: LinearGrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SolveMode {
    Reduced,
    Alternating,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct SolveArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_positive)]
    pub alpha: f64,
    #[arg(long, value_parser = parse_beta)]
    pub beta: Beta,
    #[arg(long, value_enum, default_value_t = SolveMode::Reduced)]
    pub mode: SolveMode,
    #[arg(long, value_parser = parse_count, default_value_t = 50)]
    pub outer: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 50)]
    pub inner: usize,
    /// Stop once the optimality residual falls to this value. Reduced mode
    /// defaults to 1e-10; alternating mode runs all iterations unless set.
    #[arg(long, value_parser = parse_nonnegative)]
    pub tol: Option<f64>,
    /// Iteration cap in reduced mode.
    #[arg(long, value_parser = parse_count, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, value_parser = parse_positive, default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    #[arg(long, default_value = "u.txt")]
    pub u_out: PathBuf,
    #[arg(long, default_value = "v.txt")]
    pub v_out: PathBuf,
}

/// Options shared by the ensemble studies.
#[derive(Args, Debug, Clone, PartialEq)]
pub struct EnsembleArgs {
    #[arg(long, value_parser = parse_count, default_value_t = 30)]
    pub m: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 60)]
    pub n: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 20)]
    pub matrices: usize,
    /// Entry standard deviation: "unit", "inv-sqrt-m" or a positive number.
    #[arg(long, default_value = "inv-sqrt-m")]
    pub scale: EntryScale,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Include all supports of size 1..=k instead of exactly k.
    #[arg(long)]
    pub up_to: bool,
    #[arg(long, value_parser = parse_std_kind, default_value = "population")]
    pub std: StdKind,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct McConditionsArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, value_parser = parse_beta_list, default_value = "inf,10,1,0.1")]
    pub betas: BetaList,
    /// Summary CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-matrix failure fractions.
    #[arg(long)]
    pub per_matrix: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct McRegionArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, value_parser = parse_beta_list, default_value = "0.1,0.3,0.5,1,5")]
    pub betas: BetaList,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Θ^max curves per matrix and β.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long, value_parser = parse_linear_grid, default_value = "0,100,101")]
    pub theta_grid: LinearGrid,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct McRecoveryArgs {
    #[arg(long, value_parser = parse_count, default_value_t = 30)]
    pub problems: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 50)]
    pub m: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 100)]
    pub n: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 7)]
    pub k: usize,
    /// Lower bound on nonzero magnitudes.
    #[arg(long, value_parser = parse_positive, default_value_t = 1.5)]
    pub c: f64,
    /// Noise level, ‖v‖∞.
    #[arg(long, value_parser = parse_positive, default_value_t = 0.3)]
    pub d: f64,
    /// Upper bound on nonzero magnitudes.
    #[arg(long, value_parser = parse_positive, default_value_t = 3.0)]
    pub ceiling: f64,
    #[arg(long, value_parser = parse_geometric_grid, default_value = "0.0002,1.25,51")]
    pub alpha_grid: GeometricGrid,
    #[arg(long, value_parser = parse_geometric_grid, default_value = "0.01,1.15,31")]
    pub beta_grid: GeometricGrid,
    #[arg(long, value_parser = parse_count, default_value_t = 50)]
    pub outer: usize,
    #[arg(long, value_parser = parse_count, default_value_t = 50)]
    pub inner: usize,
    /// "ae": smallest error first; "sd": smallest support mismatch first.
    #[arg(long, default_value = "ae")]
    pub selection: Selection,
    /// Let the multi-penalty search also pick β = ∞.
    #[arg(long)]
    pub include_inf: bool,
    #[arg(long, value_parser = parse_positive, default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
    #[arg(long, default_value = "inv-sqrt-m")]
    pub scale: EntryScale,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_parser = parse_std_kind, default_value = "population")]
    pub std: StdKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Best solution per problem and method.
    #[arg(long)]
    pub trials: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct GenMatrixArgs {
    #[arg(long, value_parser = parse_count)]
    pub m: usize,
    #[arg(long, value_parser = parse_count)]
    pub n: usize,
    #[arg(long, default_value = "inv-sqrt-m")]
    pub scale: EntryScale,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Stream index; matrix `i` of an ensemble with the same seed and scale.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct GenSignalArgs {
    #[arg(long, value_parser = parse_count)]
    pub n: usize,
    #[arg(long, value_parser = parse_count)]
    pub k: usize,
    #[arg(long, value_parser = parse_positive)]
    pub c: f64,
    #[arg(long, value_parser = parse_positive)]
    pub d: f64,
    #[arg(long, value_parser = parse_positive)]
    pub ceiling: Option<f64>,
    /// "exact": ‖v‖∞ = d. "strict": ‖v‖∞ < d.
    #[arg(long, value_parser = parse_noise_mode, default_value = "exact")]
    pub noise: NoiseMode,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub u_out: PathBuf,
    #[arg(long)]
    pub v_out: PathBuf,
    /// With --y-out, also write y = A(u + v) for this matrix.
    #[arg(long, requires = "y_out")]
    pub matrix: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    pub y_out: Option<PathBuf>,
}

/// Comma-separated β values, kept in the order given.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaList(pub Vec<Beta>);

/// Evenly spaced `count` points from `start` to `stop`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl LinearGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

/// A validated invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
}

fn parse_beta(s: &str) -> std::result::Result<Beta, String> {
    Beta::from_str(s).map_err(|_| format!("expected a positive number or \"inf\", got {s:?}"))
}

fn parse_beta_list(s: &str) -> std::result::Result<BetaList, String> {
    let betas = s
        .split(',')
        .map(|t| parse_beta(t.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(BetaList(betas))
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn parse_nonnegative(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        _ => Err(format!("expected a nonnegative number, got {s:?}")),
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn parse_geometric_grid(s: &str) -> std::result::Result<GeometricGrid, String> {
    GeometricGrid::from_str(s).map_err(|e| e.to_string())
}

fn parse_linear_grid(s: &str) -> std::result::Result<LinearGrid, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("expected \"start,stop,count\", got {s:?}");
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].parse().map_err(|_| bad())?;
    let count = parse_count(parts[2])?;
    if !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(bad());
    }
    Ok(LinearGrid { start, stop, count })
}

fn parse_std_kind(s: &str) -> std::result::Result<StdKind, String> {
    match s {
        "population" => Ok(StdKind::Population),
        "sample" => Ok(StdKind::Sample),
        _ => Err(format!("expected \"population\" or \"sample\", got {s:?}")),
    }
}

fn parse_noise_mode(s: &str) -> std::result::Result<NoiseMode, String> {
    match s {
        "exact" => Ok(NoiseMode::Exact),
        "strict" => Ok(NoiseMode::Strict),
        _ => Err(format!("expected \"exact\" or \"strict\", got {s:?}")),
    }
}

/// Parses an argument vector, program name first.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Usage(e.to_string()))?;
    Ok(RunConfig { command: cli.command })
}

fn join_betas(betas: &[Beta]) -> String {
    betas.iter().map(Beta::to_string).collect::<Vec<_>>().join(",")
}

fn std_name(kind: StdKind) -> &'static str {
    match kind {
        StdKind::Population => "population",
        StdKind::Sample => "sample",
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

impl RunConfig {
    /// Canonical argument line, with every default spelled out.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut flag = |name: &str, value: String| {
            let _ = write!(s, " --{name} {value}");
        };
        let name = match &self.command {
            Command::Certify(a) => {
                flag("matrix", path_str(&a.matrix));
                flag("beta", a.beta.to_string());
                flag(
                    "support",
                    a.support.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
                );
                if let Some(c) = a.c {
                    flag("c", c.to_string());
                }
                if let Some(d) = a.d {
                    flag("d", d.to_string());
                }
                "certify"
            }
            Command::Region(a) => {
                flag("matrix", path_str(&a.matrix));
                flag("beta", a.beta.to_string());
                flag("k", a.k.to_string());
                flag("theta-grid", linear_grid_str(&a.theta_grid));
                if let Some(p) = &a.theta_samples {
                    flag("theta-samples", path_str(p));
                }
                if a.up_to {
                    s.push_str(" --up-to");
                }
                "region"
            }
            Command::Solve(a) => {
                flag("matrix", path_str(&a.matrix));
                flag("data", path_str(&a.data));
                flag("alpha", a.alpha.to_string());
                flag("beta", a.beta.to_string());
                flag(
                    "mode",
                    match a.mode {
                        SolveMode::Reduced => "reduced".into(),
                        SolveMode::Alternating => "alternating".into(),
                    },
                );
                flag("outer", a.outer.to_string());
                flag("inner", a.inner.to_string());
                if let Some(t) = a.tol {
                    flag("tol", t.to_string());
                }
                flag("max-iters", a.max_iters.to_string());
                flag("zero-tol", a.zero_tol.to_string());
                flag("u-out", path_str(&a.u_out));
                flag("v-out", path_str(&a.v_out));
                "solve"
            }
            Command::McConditions(a) => {
                ensemble_flags(&mut flag, &a.ensemble);
                flag("betas", join_betas(&a.betas.0));
                if let Some(p) = &a.out {
                    flag("out", path_str(p));
                }
                if let Some(p) = &a.per_matrix {
                    flag("per-matrix", path_str(p));
                }
                if a.ensemble.up_to {
                    s.push_str(" --up-to");
                }
                "mc-conditions"
            }
            Command::McRegion(a) => {
                ensemble_flags(&mut flag, &a.ensemble);
                flag("betas", join_betas(&a.betas.0));
                flag("theta-grid", linear_grid_str(&a.theta_grid));
                if let Some(p) = &a.out {
                    flag("out", path_str(p));
                }
                if let Some(p) = &a.curves {
                    flag("curves", path_str(p));
                }
                if a.ensemble.up_to {
                    s.push_str(" --up-to");
                }
                "mc-region"
            }
            Command::McRecovery(a) => {
                flag("problems", a.problems.to_string());
                flag("m", a.m.to_string());
                flag("n", a.n.to_string());
                flag("k", a.k.to_string());
                flag("c", a.c.to_string());
                flag("d", a.d.to_string());
                flag("ceiling", a.ceiling.to_string());
                flag("alpha-grid", a.alpha_grid.to_string());
                flag("beta-grid", a.beta_grid.to_string());
                flag("outer", a.outer.to_string());
                flag("inner", a.inner.to_string());
                flag("selection", a.selection.to_string());
                flag("zero-tol", a.zero_tol.to_string());
                flag("scale", a.scale.to_string());
                flag("seed", a.seed.to_string());
                flag("std", std_name(a.std).into());
                if let Some(p) = &a.out {
                    flag("out", path_str(p));
                }
                if let Some(p) = &a.trials {
                    flag("trials", path_str(p));
                }
                if a.include_inf {
                    s.push_str(" --include-inf");
                }
                "mc-recovery"
            }
            Command::GenMatrix(a) => {
                flag("m", a.m.to_string());
                flag("n", a.n.to_string());
                flag("scale", a.scale.to_string());
                flag("seed", a.seed.to_string());
                flag("index", a.index.to_string());
                flag("out", path_str(&a.out));
                "gen-matrix"
            }
            Command::GenSignal(a) => {
                flag("n", a.n.to_string());
                flag("k", a.k.to_string());
                flag("c", a.c.to_string());
                flag("d", a.d.to_string());
                if let Some(x) = a.ceiling {
                    flag("ceiling", x.to_string());
                }
                flag(
                    "noise",
                    match a.noise {
                        NoiseMode::Exact => "exact".into(),
                        NoiseMode::Strict => "strict".into(),
                    },
                );
                flag("seed", a.seed.to_string());
                flag("index", a.index.to_string());
                flag("u-out", path_str(&a.u_out));
                flag("v-out", path_str(&a.v_out));
                if let Some(p) = &a.matrix {
                    flag("matrix", path_str(p));
                }
                if let Some(p) = &a.y_out {
                    flag("y-out", path_str(p));
                }
                "gen-signal"
            }
        };
        format!("{name}{s}")
    }
}

fn linear_grid_str(g: &LinearGrid) -> String {
    format!("{},{},{}", g.start, g.stop, g.count)
}

fn ensemble_flags(flag: &mut impl FnMut(&str, String), e: &EnsembleArgs) {
    flag("m", e.m.to_string());
    flag("n", e.n.to_string());
    flag("k", e.k.to_string());
    flag("matrices", e.matrices.to_string());
    flag("scale", e.scale.to_string());
    flag("seed", e.seed.to_string());
    flag("std", std_name(e.std).into());
}

fn region_options(up_to: bool) -> RegionOptions {
    RegionOptions {
        sizes: if up_to { SupportSizes::UpTo } else { SupportSizes::Exactly },
        ..RegionOptions::default()
    }
}

fn study_options(e: &EnsembleArgs) -> StudyOptions {
    StudyOptions {
        region: region_options(e.up_to),
        std_kind: e.std,
    }
}

fn ensemble_spec(e: &EnsembleArgs) -> Result<EnsembleSpec> {
    EnsembleSpec::gaussian(e.m, e.n, e.matrices, e.scale.std_for(e.m), e.seed)
}

fn emit(report: &CsvReport, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => write_report(report, p),
        None => out
            .write_all(&report.to_bytes()?)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn line(out: &mut dyn Write, text: String) -> Result<()> {
    writeln!(out, "{text}").map_err(|e| Error::io("<stdout>", e))
}

fn summary_cells(s: &StatSummary) -> Vec<String> {
    [s.minimum, s.median, s.mean, s.std_dev, s.maximum]
        .iter()
        .map(|&x| format_sig6(x))
        .collect()
}

/// Runs a parsed command, writing human-readable results and stdout CSVs to
/// `out`. Returns the process exit status.
pub fn run(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let echo = config.echo();
    match &config.command {
        Command::Certify(a) => {
            let matrix = read_matrix(&a.matrix)?;
            let support = IndexSet::new(a.support.clone(), matrix.cols())?;
            let cert = SupportAnalyzer::new(&matrix, a.beta)?.certificate(&support)?;
            // alpha_max(c, d) = (c - d * signal_norm) / sensitivity
            let (offset, slope) = cert.alpha_max_fn;
            line(out, format!("support={}", cert.support))?;
            line(out, format!("beta={}", cert.beta))?;
            line(out, format!("condition_value={}", num(cert.condition_value)))?;
            line(out, format!("satisfiable={}", cert.satisfiable))?;
            line(out, format!("cd_bound={}", num(cert.cd_bound)))?;
            line(out, format!("alpha_min_per_d={}", num(cert.alpha_min_per_d)))?;
            line(out, format!("signal_norm={}", num(offset)))?;
            line(out, format!("sensitivity={}", num(slope)))?;
            let mut admissible = cert.satisfiable;
            match (a.c, a.d) {
                (Some(c), Some(d)) => {
                    if c <= d {
                        return Err(Error::Usage(format!("--c must exceed --d, got c = {c}, d = {d}")));
                    }
                    match cert.alpha_interval(c, d) {
                        Some(iv) => {
                            line(out, format!("alpha_lo={}", num(iv.lo)))?;
                            line(out, format!("alpha_hi={}", num(iv.hi)))?;
                        }
                        None => {
                            line(out, "alpha_interval=empty".into())?;
                            admissible = false;
                        }
                    }
                }
                (None, None) => {}
                _ => return Err(Error::Usage("--c and --d must be given together".into())),
            }
            Ok(if admissible { 0 } else { EXIT_NOT_CERTIFIED })
        }
        Command::Region(a) => {
            let matrix = read_matrix(&a.matrix)?;
            let keep_curve = a.theta_samples.is_some();
            let analysis = SupportAnalyzer::new(&matrix, a.beta)?.analyze_region(
                a.k,
                &region_options(a.up_to),
                keep_curve,
            )?;
            let s = &analysis.summary;
            line(out, format!("beta={}", s.beta))?;
            line(out, format!("k={}", s.k))?;
            line(out, format!("r_value={}", num(s.r_value)))?;
            line(out, format!("sigma_value={}", num(s.sigma_value)))?;
            line(out, format!("theta_min={}", num(s.theta_min)))?;
            line(out, format!("worst_support={}", s.worst_support))?;
            line(out, format!("failure_fraction={}", num(s.failure_fraction)))?;
            line(out, format!("supports_checked={}", s.supports_checked))?;
            if let Some(path) = &a.theta_samples {
                let mut report =
                    CsvReport::new(&["theta", "theta_max", "theta_min"]).with_config(echo);
                for t in a.theta_grid.values() {
                    report.push(vec![
                        format_sig6(t),
                        format_sig6(analysis.curve.eval(t)),
                        format_sig6(s.theta_min),
                    ]);
                }
                write_report(&report, path)?;
            }
            Ok(0)
        }
        Command::Solve(a) => {
            let matrix = read_matrix(&a.matrix)?;
            let y = read_vector(&a.data)?;
            let params = PenaltyParams::new(a.alpha, a.beta)?;
            let result = match a.mode {
                SolveMode::Reduced => solve_multi_reduced(
                    &matrix,
                    &y,
                    &params,
                    &IstaOptions {
                        max_iters: a.max_iters,
                        tol: a.tol.unwrap_or(IstaOptions::default().tol),
                    },
                )?,
                SolveMode::Alternating => solve_multi_alternating(
                    &matrix,
                    &y,
                    &params,
                    &AlternatingOptions {
                        outer_iters: a.outer,
                        inner_iters: a.inner,
                        tol: a.tol,
                    },
                )?,
            };
            write_vector(&a.u_out, &result.u)?;
            write_vector(&a.v_out, &result.v)?;
            line(out, format!("iterations={}", result.iterations))?;
            line(out, format!("objective={}", num(result.final_objective())))?;
            line(out, format!("optimality_residual={}", num(result.optimality_residual)))?;
            line(out, format!("support={}", support(&result.u, a.zero_tol)))?;
            Ok(0)
        }
        Command::McConditions(a) => {
            let spec = ensemble_spec(&a.ensemble)?;
            let rows =
                condition_failure_study(&spec, a.ensemble.k, &a.betas.0, &study_options(&a.ensemble))?;
            let mut report = CsvReport::new(&[
                "beta", "minimum", "median", "mean", "std_dev", "maximum", "matrices",
            ])
            .with_config(echo.clone());
            for row in &rows {
                let mut cells = vec![row.beta.to_string()];
                cells.extend(summary_cells(&row.summary));
                cells.push(row.summary.count.to_string());
                report.push(cells);
            }
            emit(&report, a.out.as_deref(), out)?;
            if let Some(path) = &a.per_matrix {
                let mut per = CsvReport::new(&["beta", "matrix", "failure_fraction"]).with_config(echo);
                for row in &rows {
                    for (i, f) in row.per_matrix.iter().enumerate() {
                        per.push(vec![row.beta.to_string(), i.to_string(), format_sig6(*f)]);
                    }
                }
                write_report(&per, path)?;
            }
            Ok(0)
        }
        Command::McRegion(a) => {
            let spec = ensemble_spec(&a.ensemble)?;
            let grid = if a.curves.is_some() { a.theta_grid.values() } else { Vec::new() };
            let rows = region_study(&spec, a.ensemble.k, &a.betas.0, &grid, &study_options(&a.ensemble))?;
            let mut report = CsvReport::new(&[
                "beta",
                "r_min",
                "r_median",
                "r_max",
                "infinite_r",
                "sigma_min",
                "sigma_median",
                "sigma_max",
                "theta_min_median",
            ])
            .with_config(echo.clone());
            let nan = || "nan".to_string();
            for row in &rows {
                let r = row.r.as_ref();
                report.push(vec![
                    row.beta.to_string(),
                    r.map_or_else(nan, |s| format_sig6(s.minimum)),
                    r.map_or_else(nan, |s| format_sig6(s.median)),
                    r.map_or_else(nan, |s| format_sig6(s.maximum)),
                    row.infinite_r.to_string(),
                    format_sig6(row.sigma.minimum),
                    format_sig6(row.sigma.median),
                    format_sig6(row.sigma.maximum),
                    row.theta_min.as_ref().map_or_else(nan, |s| format_sig6(s.median)),
                ]);
            }
            emit(&report, a.out.as_deref(), out)?;
            if let Some(path) = &a.curves {
                let mut curves =
                    CsvReport::new(&["beta", "matrix", "theta", "theta_max"]).with_config(echo);
                for row in &rows {
                    for (i, samples) in row.theta_max_samples.iter().enumerate() {
                        for (t, v) in grid.iter().zip(samples) {
                            curves.push(vec![
                                row.beta.to_string(),
                                i.to_string(),
                                format_sig6(*t),
                                format_sig6(*v),
                            ]);
                        }
                    }
                }
                write_report(&curves, path)?;
            }
            Ok(0)
        }
        Command::McRecovery(a) => {
            let ensemble = EnsembleSpec::gaussian(a.m, a.n, a.problems, a.scale.std_for(a.m), a.seed)?;
            let signal = SignalSpec {
                n: a.n,
                sparsity: a.k,
                magnitude_floor: a.c,
                magnitude_ceiling: a.ceiling,
                noise_linf: a.d,
                noise_mode: NoiseMode::Exact,
            };
            let mut cfg =
                RecoveryConfig::new(ensemble, signal, a.alpha_grid.values(), a.beta_grid.values());
            cfg.include_infinite_beta = a.include_inf;
            cfg.solver = AlternatingOptions {
                outer_iters: a.outer,
                inner_iters: a.inner,
                tol: None,
            };
            cfg.single_iters = a.outer * a.inner;
            cfg.selection = a.selection;
            cfg.zero_tol = a.zero_tol;
            cfg.std_kind = a.std;
            let rep = grid_search_recovery(&cfg)?;

            let mut report = CsvReport::new(&["method", "statistic", "ae", "sd", "alpha", "beta"])
                .with_config(echo.clone());
            for (method, summary) in [("single", &rep.single), ("multi", &rep.multi)] {
                type Field = fn(&StatSummary) -> f64;
                let stats: [(&str, Field); 4] = [
                    ("minimum", |s| s.minimum),
                    ("median", |s| s.median),
                    ("mean", |s| s.mean),
                    ("maximum", |s| s.maximum),
                ];
                for (stat, get) in stats {
                    let beta = match &summary.beta {
                        Some(b) => format_sig6(get(b)),
                        None if method == "single" => "inf".into(),
                        None => "nan".into(),
                    };
                    report.push(vec![
                        method.into(),
                        stat.into(),
                        format_sig6(get(&summary.ae)),
                        format_sig6(get(&summary.sd)),
                        format_sig6(get(&summary.alpha)),
                        beta,
                    ]);
                }
            }
            emit(&report, a.out.as_deref(), out)?;
            if let Some(path) = &a.trials {
                let mut trials = CsvReport::new(&["trial", "method", "alpha", "beta", "ae", "sd"])
                    .with_config(echo);
                for t in &rep.trials {
                    trials.push(vec![
                        t.trial_id.to_string(),
                        t.method.to_string(),
                        format_sig6(t.chosen_alpha),
                        if t.chosen_beta.is_infinite() {
                            "inf".into()
                        } else {
                            format_sig6(t.chosen_beta.as_f64())
                        },
                        format_sig6(t.ae),
                        t.sd.to_string(),
                    ]);
                }
                write_report(&trials, path)?;
            }
            Ok(0)
        }
        Command::GenMatrix(a) => {
            let spec = EnsembleSpec::gaussian(a.m, a.n, a.index + 1, a.scale.std_for(a.m), a.seed)?;
            write_matrix(&a.out, &gaussian_matrix(&spec, a.index)?)?;
            Ok(0)
        }
        Command::GenSignal(a) => {
            let spec = SignalSpec {
                n: a.n,
                sparsity: a.k,
                magnitude_floor: a.c,
                magnitude_ceiling: a.ceiling.unwrap_or(2.0 * a.c),
                noise_linf: a.d,
                noise_mode: a.noise,
            };
            let mut rng = stream_rng(a.seed, crate::experiments::domain::SIGNAL, a.index as u64);
            let sample = sample_signal(&spec, None, &mut rng)?;
            write_vector(&a.u_out, &sample.u)?;
            write_vector(&a.v_out, &sample.v)?;
            if let (Some(mpath), Some(ypath)) = (&a.matrix, &a.y_out) {
                let matrix = read_matrix(mpath)?;
                if matrix.cols() != a.n {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix has {} columns, signal length is {}",
                        matrix.cols(),
                        a.n
                    )));
                }
                let y: DVector<f64> = matrix.as_dmatrix() * (&sample.u + &sample.v);
                write_vector(ypath, &y)?;
            }
            line(out, format!("support={}", sample.support))?;
            Ok(0)
        }
    }
}

/// Entry point used by the binary: parses, runs and maps errors to exit
/// statuses (0 success, 1 failure, 2 usage, 3 support not certified).
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 2,
            };
        }
    };
    let config = RunConfig { command: cli.command };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&config, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        parse_args(std::iter::once("unmix").chain(args.iter().copied()))
    }

    #[test]
    fn certify_args() {
        let cfg = parse(&["certify", "--matrix", "A.txt", "--beta", "inf", "--support", "0,3,7"]).unwrap();
        match cfg.command {
            Command::Certify(a) => {
                assert!(a.beta.is_infinite());
                assert_eq!(a.support, vec![0, 3, 7]);
                assert_eq!(a.matrix, PathBuf::from("A.txt"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn beta_domain_guard() {
        let err = parse(&["solve", "--matrix", "A", "--data", "y", "--alpha", "1", "--beta", "0"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--beta"));
        assert!(parse(&["solve", "--matrix", "A", "--data", "y", "--alpha", "1", "--beta", "-1"]).is_err());
        assert!(parse(&["solve", "--matrix", "A", "--data", "y", "--alpha", "0", "--beta", "1"]).is_err());
    }

    #[test]
    fn alpha_grid_flag() {
        let cfg = parse(&["mc-recovery", "--alpha-grid", "0.0002,1.25,51"]).unwrap();
        let Command::McRecovery(a) = cfg.command else { panic!() };
        let vals = a.alpha_grid.values();
        assert_eq!(vals.len(), 51);
        assert_eq!(vals[0], 0.0002);
        assert!((vals[50] - 0.0002 * 1.25f64.powi(50)).abs() < 1e-12 * vals[50]);
        assert!(parse(&["mc-recovery", "--alpha-grid", "0.0002,1.25,0"]).is_err());
    }

    #[test]
    fn echo_reparses_to_same_config() {
        let cases: &[&[&str]] = &[
            &["mc-conditions", "--betas", "inf,10,1,0.1", "--m", "12"],
            &["mc-region", "--scale", "unit", "--up-to", "--curves", "c.csv"],
            &["mc-recovery", "--problems", "3", "--selection", "sd", "--include-inf"],
            &["certify", "--matrix", "A", "--beta", "2.5", "--support", "1,2", "--c", "3", "--d", "1"],
            &["solve", "--matrix", "A", "--data", "y", "--alpha", "0.1", "--beta", "inf"],
            &["gen-signal", "--n", "10", "--k", "2", "--c", "1", "--d", "0.1", "--noise", "strict", "--u-out", "u", "--v-out", "v"],
            &["gen-matrix", "--m", "3", "--n", "4", "--scale", "0.5", "--out", "A"],
            &["region", "--matrix", "A", "--beta", "1", "--k", "2", "--theta-grid", "0,5,6"],
        ];
        for args in cases {
            let cfg = parse(args).unwrap();
            let echo = cfg.echo();
            let again = parse(&echo.split(' ').collect::<Vec<_>>()).unwrap();
            assert_eq!(again, cfg, "{echo}");
            assert_eq!(again.echo(), echo);
        }
    }

    #[test]
    fn list_parsers() {
        let b = parse_beta_list("0.1,inf").unwrap();
        assert_eq!(b.0, vec![Beta::finite(0.1).unwrap(), Beta::INFINITE]);
        assert!(parse_beta_list("1,0").is_err());
        let g = parse_linear_grid("0,1,5").unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_linear_grid("1,0,3").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(parse(&["certify", "--bogus"]).unwrap_err().exit_code(), 2);
        assert_eq!(parse(&["frobnicate"]).unwrap_err().exit_code(), 2);
    }
}
