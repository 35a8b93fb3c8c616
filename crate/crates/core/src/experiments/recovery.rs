use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Beta, IndexSet};
use crate::solvers::{
    support, AlternatingOptions, IstaOptions, MultiPenaltyProblem, DEFAULT_ZERO_TOL,
};

use super::domain;
use super::ensemble::{gaussian_matrix, stream_rng, EnsembleSpec};
use super::signal::{sample_signal, SignalSpec};
use super::stats::{summarize_with, StatSummary, StdKind};

/// `start · ratio^i` for `i = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl GeometricGrid {
    pub fn new(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(start.is_finite() && start > 0.0 && ratio.is_finite() && ratio > 0.0) || count == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid needs start > 0, ratio > 0 and count >= 1, got {start},{ratio},{count}"
            )));
        }
        Ok(GeometricGrid { start, ratio, count })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.start * self.ratio.powi(i as i32))
            .collect()
    }
}

impl fmt::Display for GeometricGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.start, self.ratio, self.count)
    }
}

impl FromStr for GeometricGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidArgument(format!("grid must be start,ratio,count; got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].parse().map_err(|_| bad())?;
        let ratio = parts[1].parse().map_err(|_| bad())?;
        let count = parts[2].parse().map_err(|_| bad())?;
        GeometricGrid::new(start, ratio, count)
    }
}

/// Which grid point counts as "best" for a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Selection {
    /// Smallest AE, then smallest SD, then smaller α, then smaller β.
    #[default]
    AeFirst,
    /// Smallest SD, then smallest AE, then smaller α, then smaller β.
    SdFirst,
}

impl FromStr for Selection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(Selection::AeFirst),
            "sd" => Ok(Selection::SdFirst),
            _ => Err(Error::InvalidArgument(format!("selection must be ae or sd, got {s:?}"))),
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::AeFirst => "ae",
            Selection::SdFirst => "sd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Single,
    Multi,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Single => "single",
            Method::Multi => "multi",
        })
    }
}

#[derive(Clone, Debug)]
pub struct RecoveryConfig {
    /// One matrix per problem; `matrix_count` is the number of problems.
    pub ensemble: EnsembleSpec,
    pub signal: SignalSpec,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Adds β = ∞ (the single-penalty solutions) to the multi-penalty grid.
    pub include_infinite_beta: bool,
    pub solver: AlternatingOptions,
    /// Iterations for the single-penalty solver; tolerance is never used.
    pub single_iters: usize,
    pub selection: Selection,
    pub zero_tol: f64,
    pub std_kind: StdKind,
}

impl RecoveryConfig {
    pub fn new(
        ensemble: EnsembleSpec,
        signal: SignalSpec,
        alpha_grid: Vec<f64>,
        beta_grid: Vec<f64>,
    ) -> Self {
        let solver = AlternatingOptions::default();
        RecoveryConfig {
            ensemble,
            signal,
            alpha_grid,
            beta_grid,
            include_infinite_beta: false,
            single_iters: solver.outer_iters * solver.inner_iters,
            solver,
            selection: Selection::AeFirst,
            zero_tol: DEFAULT_ZERO_TOL,
            std_kind: StdKind::Population,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub method: Method,
    pub chosen_alpha: f64,
    pub chosen_beta: Beta,
    /// `‖u − u†‖₂`
    pub ae: f64,
    /// `#(supp(u) Δ supp(u†))`
    pub sd: usize,
}

#[derive(Clone, Debug)]
pub struct MethodSummary {
    pub ae: StatSummary,
    pub sd: StatSummary,
    pub alpha: StatSummary,
    /// Finite chosen β only; `None` for single-penalty.
    pub beta: Option<StatSummary>,
}

#[derive(Clone, Debug)]
pub struct RecoveryReport {
    pub trials: Vec<TrialRecord>,
    pub single: MethodSummary,
    pub multi: MethodSummary,
}

#[derive(Clone, Copy)]
struct Candidate {
    alpha: f64,
    beta: Beta,
    ae: f64,
    sd: usize,
}

impl Candidate {
    fn better_than(&self, other: &Candidate, rule: Selection) -> bool {
        let primary = match rule {
            Selection::AeFirst => self
                .ae
                .total_cmp(&other.ae)
                .then(self.sd.cmp(&other.sd)),
            Selection::SdFirst => self.sd.cmp(&other.sd).then(self.ae.total_cmp(&other.ae)),
        };
        primary
            .then(self.alpha.total_cmp(&other.alpha))
            .then(self.beta.as_f64().total_cmp(&other.beta.as_f64()))
            == Ordering::Less
    }
}

fn pick(best: &mut Option<Candidate>, cand: Candidate, rule: Selection) {
    if best.is_none_or(|b| cand.better_than(&b, rule)) {
        *best = Some(cand);
    }
}

fn score(u: &DVector<f64>, truth: &DVector<f64>, true_support: &IndexSet, zero_tol: f64) -> (f64, usize) {
    let ae = (u - truth).norm();
    let sd = support(u, zero_tol).symmetric_difference_len(true_support);
    (ae, sd)
}

fn run_problem(config: &RecoveryConfig, index: usize) -> Result<(TrialRecord, TrialRecord)> {
    let a = gaussian_matrix(&config.ensemble, index)?;
    let mut rng = stream_rng(config.ensemble.master_seed, domain::SIGNAL, index as u64);
    let sample = sample_signal(&config.signal, None, &mut rng)?;
    let y = a.as_dmatrix() * (&sample.u + &sample.v);
    let problem = MultiPenaltyProblem::new(&a, &y)?;
    let rule = config.selection;
    let tol = config.zero_tol;

    let ista_opts = IstaOptions {
        max_iters: config.single_iters,
        tol: 0.0,
    };
    let mut best_single = None;
    let mut single_candidates = Vec::with_capacity(config.alpha_grid.len());
    for &alpha in &config.alpha_grid {
        let res = problem.ista(alpha, &ista_opts)?;
        let (ae, sd) = score(&res.u, &sample.u, &sample.support, tol);
        let cand = Candidate {
            alpha,
            beta: Beta::INFINITE,
            ae,
            sd,
        };
        pick(&mut best_single, cand, rule);
        single_candidates.push(cand);
    }

    let mut best_multi = None;
    for &beta in &config.beta_grid {
        let system = problem.noise_system(beta)?;
        let beta = Beta::finite(beta)?;
        for &alpha in &config.alpha_grid {
            let res = problem.alternating(alpha, &system, &config.solver)?;
            let (ae, sd) = score(&res.u, &sample.u, &sample.support, tol);
            pick(&mut best_multi, Candidate { alpha, beta, ae, sd }, rule);
        }
    }
    if config.include_infinite_beta {
        for cand in single_candidates {
            pick(&mut best_multi, cand, rule);
        }
    }

    let record = |method, c: Candidate| TrialRecord {
        trial_id: index,
        method,
        chosen_alpha: c.alpha,
        chosen_beta: c.beta,
        ae: c.ae,
        sd: c.sd,
    };
    let single = best_single.ok_or_else(|| Error::InvalidArgument("empty alpha grid".into()))?;
    let multi = best_multi.ok_or_else(|| Error::InvalidArgument("empty beta grid".into()))?;
    Ok((record(Method::Single, single), record(Method::Multi, multi)))
}

fn method_summary(records: &[&TrialRecord], with_beta: bool, kind: StdKind) -> Result<MethodSummary> {
    let ae: Vec<f64> = records.iter().map(|r| r.ae).collect();
    let sd: Vec<f64> = records.iter().map(|r| r.sd as f64).collect();
    let alpha: Vec<f64> = records.iter().map(|r| r.chosen_alpha).collect();
    let beta = if with_beta {
        let b: Vec<f64> = records.iter().map(|r| r.chosen_beta.as_f64()).collect();
        match summarize_with(&b, kind) {
            Ok(s) => Some(s),
            Err(Error::EmptyInput) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(MethodSummary {
        ae: summarize_with(&ae, kind)?,
        sd: summarize_with(&sd, kind)?,
        alpha: summarize_with(&alpha, kind)?,
        beta,
    })
}

/// Grid-search comparison of single- and multi-penalty recovery: for each
/// problem every grid point is solved from zero and the best solution per
/// method is kept.
pub fn grid_search_recovery(config: &RecoveryConfig) -> Result<RecoveryReport> {
    config.ensemble.validate()?;
    config.signal.validate()?;
    if config.signal.n != config.ensemble.cols {
        return Err(Error::DimensionMismatch(format!(
            "signal length {} but matrices have {} columns",
            config.signal.n, config.ensemble.cols
        )));
    }
    if config.alpha_grid.is_empty() || (config.beta_grid.is_empty() && !config.include_infinite_beta) {
        return Err(Error::InvalidArgument("parameter grids must be nonempty".into()));
    }
    let pairs: Vec<(TrialRecord, TrialRecord)> = (0..config.ensemble.matrix_count)
        .into_par_iter()
        .map(|i| run_problem(config, i))
        .collect::<Result<_>>()?;

    let mut trials = Vec::with_capacity(2 * pairs.len());
    for (s, m) in pairs {
        trials.push(s);
        trials.push(m);
    }
    let single: Vec<&TrialRecord> = trials.iter().filter(|t| t.method == Method::Single).collect();
    let multi: Vec<&TrialRecord> = trials.iter().filter(|t| t.method == Method::Multi).collect();
    Ok(RecoveryReport {
        single: method_summary(&single, false, config.std_kind)?,
        multi: method_summary(&multi, true, config.std_kind)?,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::NoiseMode;

    #[test]
    fn grid_values() {
        let g: GeometricGrid = "0.0002,1.25,51".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 51);
        assert_eq!(v[0], 0.0002);
        assert!((v[50] - 0.0002 * 1.25f64.powi(50)).abs() < 1e-12);
        assert!("1,2".parse::<GeometricGrid>().is_err());
        assert!("1,2,0".parse::<GeometricGrid>().is_err());
    }

    fn small_config(seed: u64) -> RecoveryConfig {
        let ensemble = EnsembleSpec::gaussian(20, 40, 3, 1.0 / 20f64.sqrt(), seed).unwrap();
        let signal = SignalSpec {
            n: 40,
            sparsity: 3,
            magnitude_floor: 1.5,
            magnitude_ceiling: 3.0,
            noise_linf: 0.3,
            noise_mode: NoiseMode::Exact,
        };
        let mut cfg = RecoveryConfig::new(
            ensemble,
            signal,
            GeometricGrid::new(0.01, 2.0, 8).unwrap().values(),
            GeometricGrid::new(0.1, 3.0, 3).unwrap().values(),
        );
        cfg.solver.outer_iters = 10;
        cfg.single_iters = 500;
        cfg
    }

    #[test]
    fn deterministic_report() {
        let a = grid_search_recovery(&small_config(3)).unwrap();
        let b = grid_search_recovery(&small_config(3)).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.trials.len(), 6);
    }

    #[test]
    fn infinite_column_never_hurts() {
        let mut cfg = small_config(8);
        cfg.include_infinite_beta = true;
        let report = grid_search_recovery(&cfg).unwrap();
        for pair in report.trials.chunks(2) {
            assert!(pair[1].ae <= pair[0].ae);
        }
    }
}
