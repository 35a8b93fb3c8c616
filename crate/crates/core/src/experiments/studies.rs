use crate::conditions::{RegionOptions, RegionSummary, SupportAnalyzer};
use crate::error::{Error, Result};
use crate::linalg::Beta;

use super::ensemble::{gaussian_matrix, EnsembleSpec};
use super::stats::{summarize_with, StatSummary, StdKind};

#[derive(Clone, Copy, Debug, Default)]
pub struct StudyOptions {
    pub region: RegionOptions,
    pub std_kind: StdKind,
}

#[derive(Clone, Debug)]
pub struct ConditionStudyRow {
    pub beta: Beta,
    pub summary: StatSummary,
    /// Failure fraction of each matrix, in ensemble order.
    pub per_matrix: Vec<f64>,
}

/// Fraction of size-`k` supports failing the recovery condition, per
/// matrix and β, summarized across the ensemble.
pub fn condition_failure_study(
    spec: &EnsembleSpec,
    k: usize,
    betas: &[Beta],
    opts: &StudyOptions,
) -> Result<Vec<ConditionStudyRow>> {
    check(spec, k, betas)?;
    let mut fractions = vec![Vec::with_capacity(spec.matrix_count); betas.len()];
    for index in 0..spec.matrix_count {
        let a = gaussian_matrix(spec, index)?;
        for (slot, &beta) in fractions.iter_mut().zip(betas) {
            let analysis = SupportAnalyzer::new(&a, beta)?.analyze_region(k, &opts.region, false)?;
            slot.push(analysis.summary.failure_fraction);
        }
    }
    betas
        .iter()
        .zip(fractions)
        .map(|(&beta, per_matrix)| {
            Ok(ConditionStudyRow {
                beta,
                summary: summarize_with(&per_matrix, opts.std_kind)?,
                per_matrix,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RegionStudyRow {
    pub beta: Beta,
    /// Over matrices with finite `R`; `None` when every matrix fails.
    pub r: Option<StatSummary>,
    pub sigma: StatSummary,
    pub theta_min: Option<StatSummary>,
    /// Matrices for which some support fails, giving `R = ∞`.
    pub infinite_r: usize,
    pub per_matrix: Vec<RegionSummary>,
    /// `Θ^max` sampled on the requested grid, one row per matrix.
    pub theta_max_samples: Vec<Vec<f64>>,
}

/// `R_{β,k}`, `Σ_{β,k}` and `Θ^min_{β,k}` per matrix and β.
pub fn region_study(
    spec: &EnsembleSpec,
    k: usize,
    betas: &[Beta],
    theta_grid: &[f64],
    opts: &StudyOptions,
) -> Result<Vec<RegionStudyRow>> {
    check(spec, k, betas)?;
    let keep_curve = !theta_grid.is_empty();
    let mut per_beta: Vec<(Vec<RegionSummary>, Vec<Vec<f64>>)> =
        vec![(Vec::new(), Vec::new()); betas.len()];
    for index in 0..spec.matrix_count {
        let a = gaussian_matrix(spec, index)?;
        for ((summaries, samples), &beta) in per_beta.iter_mut().zip(betas) {
            let analysis =
                SupportAnalyzer::new(&a, beta)?.analyze_region(k, &opts.region, keep_curve)?;
            if keep_curve {
                samples.push(theta_grid.iter().map(|&t| analysis.curve.eval(t)).collect());
            }
            summaries.push(analysis.summary);
        }
    }
    betas
        .iter()
        .zip(per_beta)
        .map(|(&beta, (per_matrix, theta_max_samples))| {
            let r: Vec<f64> = per_matrix.iter().map(|s| s.r_value).collect();
            let sigma: Vec<f64> = per_matrix.iter().map(|s| s.sigma_value).collect();
            let theta: Vec<f64> = per_matrix.iter().map(|s| s.theta_min).collect();
            let optional = |vals: &[f64]| match summarize_with(vals, opts.std_kind) {
                Ok(s) => Ok(Some(s)),
                Err(Error::EmptyInput) => Ok(None),
                Err(e) => Err(e),
            };
            Ok(RegionStudyRow {
                beta,
                r: optional(&r)?,
                sigma: summarize_with(&sigma, opts.std_kind)?,
                theta_min: optional(&theta)?,
                infinite_r: r.iter().filter(|v| v.is_infinite()).count(),
                per_matrix,
                theta_max_samples,
            })
        })
        .collect()
}

fn check(spec: &EnsembleSpec, k: usize, betas: &[Beta]) -> Result<()> {
    spec.validate()?;
    if betas.is_empty() {
        return Err(Error::InvalidArgument("at least one beta is required".into()));
    }
    if k == 0 || k > spec.rows || k > spec.cols {
        return Err(Error::InvalidArgument(format!(
            "support size k = {k} must lie in 1..={}",
            spec.rows.min(spec.cols)
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ensemble_never_fails() {
        let spec = EnsembleSpec::identity(8, 3).unwrap();
        let betas = [Beta::INFINITE, Beta::finite(1.0).unwrap(), Beta::finite(0.1).unwrap()];
        let rows = condition_failure_study(&spec, 3, &betas, &StudyOptions::default()).unwrap();
        assert_eq!(rows.len(), 3);
        for row in rows {
            assert_eq!(row.per_matrix, vec![0.0; 3]);
            assert_eq!(row.summary.maximum, 0.0);
        }
    }

    #[test]
    fn region_study_identity_values() {
        let spec = EnsembleSpec::identity(6, 2).unwrap();
        let betas = [Beta::finite(0.5).unwrap()];
        let rows = region_study(&spec, 2, &betas, &[2.0, 4.0], &StudyOptions::default()).unwrap();
        let row = &rows[0];
        assert_eq!(row.infinite_r, 0);
        assert!((row.r.unwrap().median - 2.0).abs() < 1e-12);
        assert!((row.sigma.median - 3.0).abs() < 1e-12);
        // (ϑ − 1)/Σ with Σ = 3
        assert!((row.theta_max_samples[0][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((row.theta_max_samples[1][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_k() {
        let spec = EnsembleSpec::identity(4, 1).unwrap();
        assert!(condition_failure_study(&spec, 5, &[Beta::INFINITE], &StudyOptions::default()).is_err());
        assert!(condition_failure_study(&spec, 2, &[], &StudyOptions::default()).is_err());
    }
}
