//! Exact-support-recovery certificates and admissible-parameter regions.
//!
//! For an operator `A`, a noise weight β and a candidate support `I` (with
//! complement `J`) four norms decide everything:
//!
//! * `q_I = ‖A_{β,J}* A_I (A_{β,I}* A_I)⁻¹‖∞`, which must be below one;
//! * `n_I = ‖A_{β,J}* (A_I (A_{β,I}* A_I)⁻¹ A_{β,I}* − Id) A‖∞`;
//! * `Σ_I = ‖(A_{β,I}* A_I)⁻¹‖∞`;
//! * `s_I = ‖(A_{β,I}* A_I)⁻¹ A_{β,I}* A‖∞`.
//!
//! Signals with entries above `c` on `I` and noise below `d` in sup-norm are
//! recovered with the correct support by every
//! `α ∈ [d·n_I/(1 − q_I), (c − d·s_I)/Σ_I)`, which is nonempty exactly when
//! `c/d > s_I + n_I Σ_I/(1 − q_I)`.
//!
//! All of these only involve the `N×N` cross-Gram matrix `M = A_β* A`, which
//! [`SupportAnalyzer`] computes once per `(A, β)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{inf_op_norm, regularized_operator, Beta, GramSystem, IndexSet, Matrix};
use crate::subsets::{binomial, next_combination, unrank};

/// Default refusal threshold for exhaustive support enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Per-support norms. Singular Gram systems give infinite values throughout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportQuantities {
    /// `q_I`; the support is certifiable iff this is below one.
    pub condition_value: f64,
    /// `n_I`
    pub noise_norm: f64,
    /// `Σ_I`
    pub sensitivity: f64,
    /// `s_I`
    pub signal_norm: f64,
}

impl SupportQuantities {
    fn singular() -> Self {
        SupportQuantities {
            condition_value: f64::INFINITY,
            noise_norm: f64::INFINITY,
            sensitivity: f64::INFINITY,
            signal_norm: f64::INFINITY,
        }
    }

    pub fn satisfiable(&self) -> bool {
        self.condition_value < 1.0
    }

    /// `n_I/(1 − q_I)`: lower bound on `α/‖v‖∞`.
    pub fn theta_min(&self) -> f64 {
        if self.satisfiable() {
            self.noise_norm / (1.0 - self.condition_value)
        } else {
            f64::INFINITY
        }
    }

    /// Smallest `c/d` for which the support is certified.
    pub fn cd_bound(&self) -> f64 {
        if self.satisfiable() {
            self.theta_min() * self.sensitivity + self.signal_norm
        } else {
            f64::INFINITY
        }
    }

    /// `(ϑ − s_I)/Σ_I`: upper bound on `α/‖v‖∞` at signal-to-noise ratio ϑ.
    pub fn theta_max(&self, theta: f64) -> f64 {
        if !self.sensitivity.is_finite() {
            return f64::NEG_INFINITY;
        }
        if self.sensitivity == 0.0 {
            return f64::INFINITY;
        }
        (theta - self.signal_norm) / self.sensitivity
    }

    pub fn alpha_interval(&self, c: f64, d: f64) -> Option<AlphaInterval> {
        if !self.satisfiable() {
            return None;
        }
        let lo = d * self.theta_min();
        let hi = if self.sensitivity == 0.0 {
            f64::INFINITY
        } else {
            (c - d * self.signal_norm) / self.sensitivity
        };
        (lo < hi).then_some(AlphaInterval { lo, hi })
    }
}

/// Half-open interval `[lo, hi)` of admissible α.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AlphaInterval {
    pub fn contains(&self, alpha: f64) -> bool {
        self.lo <= alpha && alpha < self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Everything needed to certify one support for one β.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub support: IndexSet,
    pub beta: Beta,
    pub condition_value: f64,
    /// Infinite when the support is not certifiable.
    pub cd_bound: f64,
    /// Lower α endpoint per unit of `d`.
    pub alpha_min_per_d: f64,
    /// `(s_I, Σ_I)`: admissible α stay below `(c − d·s_I)/Σ_I`.
    pub alpha_max_fn: (f64, f64),
    pub satisfiable: bool,
}

impl Certificate {
    fn from_quantities(support: IndexSet, beta: Beta, q: &SupportQuantities) -> Self {
        Certificate {
            support,
            beta,
            condition_value: q.condition_value,
            cd_bound: q.cd_bound(),
            alpha_min_per_d: q.theta_min(),
            alpha_max_fn: (q.signal_norm, q.sensitivity),
            satisfiable: q.satisfiable(),
        }
    }

    pub fn quantities(&self) -> SupportQuantities {
        let noise_norm = if self.satisfiable {
            self.alpha_min_per_d * (1.0 - self.condition_value)
        } else {
            f64::INFINITY
        };
        SupportQuantities {
            condition_value: self.condition_value,
            noise_norm,
            sensitivity: self.alpha_max_fn.1,
            signal_norm: self.alpha_max_fn.0,
        }
    }

    pub fn alpha_interval(&self, c: f64, d: f64) -> Option<AlphaInterval> {
        self.quantities().alpha_interval(c, d)
    }
}

/// Cross-Gram matrix `A_β* A` for one `(A, β)`, row-major.
#[derive(Clone, Debug)]
pub struct SupportAnalyzer {
    n: usize,
    beta: Beta,
    cross: Vec<f64>,
}

struct Scratch {
    in_support: Vec<bool>,
    rows: Vec<f64>,
    w: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            in_support: vec![false; n],
            rows: Vec::new(),
            w: Vec::new(),
        }
    }
}

impl SupportAnalyzer {
    pub fn new(a: &Matrix, beta: Beta) -> Result<Self> {
        let a_beta = regularized_operator(a, beta)?;
        let cross = a_beta.as_dmatrix().tr_mul(a.as_dmatrix());
        let n = a.cols();
        Ok(SupportAnalyzer {
            n,
            beta,
            cross: cross.transpose().as_slice().to_vec(),
        })
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn quantities(&self, support: &IndexSet) -> Result<SupportQuantities> {
        if support.ambient() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "support over {} indices, operator has {} columns",
                support.ambient(),
                self.n
            )));
        }
        Ok(self.quantities_for(support.as_slice(), &mut Scratch::new(self.n)))
    }

    pub fn certificate(&self, support: &IndexSet) -> Result<Certificate> {
        let q = self.quantities(support)?;
        Ok(Certificate::from_quantities(support.clone(), self.beta, &q))
    }

    #[inline]
    fn row(&self, j: usize) -> &[f64] {
        &self.cross[j * self.n..(j + 1) * self.n]
    }

    fn quantities_for(&self, idx: &[usize], scratch: &mut Scratch) -> SupportQuantities {
        let n = self.n;
        let k = idx.len();
        if k == 0 {
            let noise_norm = (0..n)
                .map(|j| self.row(j).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            return SupportQuantities {
                condition_value: 0.0,
                noise_norm,
                sensitivity: 0.0,
                signal_norm: 0.0,
            };
        }

        let gram = DMatrix::from_fn(k, k, |r, s| self.cross[idx[r] * n + idx[s]]);
        let Ok(system) = GramSystem::factor(gram) else {
            return SupportQuantities::singular();
        };
        let ginv = system.solve(&DMatrix::identity(k, k));
        let sensitivity = inf_op_norm(&ginv);

        scratch.rows.clear();
        for &i in idx {
            scratch.rows.extend_from_slice(self.row(i));
            scratch.in_support[i] = true;
        }
        let rows = &scratch.rows;

        // s_I = ‖G⁻¹ M[I,:]‖∞
        let mut signal_norm = 0.0f64;
        for r in 0..k {
            let mut sum = 0.0;
            for col in 0..n {
                let mut p = 0.0;
                for t in 0..k {
                    p += ginv[(r, t)] * rows[t * n + col];
                }
                sum += p.abs();
            }
            signal_norm = signal_norm.max(sum);
        }

        // Rows of W = M[J,I] G⁻¹ give q_I; rows of W M[I,:] − M[J,:] give n_I.
        let mut condition_value = 0.0f64;
        let mut noise_norm = 0.0f64;
        scratch.w.resize(k, 0.0);
        for j in 0..n {
            if scratch.in_support[j] {
                continue;
            }
            let mj = self.row(j);
            let mut q_row = 0.0;
            for s in 0..k {
                let mut acc = 0.0;
                for r in 0..k {
                    acc += mj[idx[r]] * ginv[(r, s)];
                }
                scratch.w[s] = acc;
                q_row += acc.abs();
            }
            let mut n_row = 0.0;
            for col in 0..n {
                let mut acc = -mj[col];
                for s in 0..k {
                    acc += scratch.w[s] * rows[s * n + col];
                }
                n_row += acc.abs();
            }
            condition_value = condition_value.max(q_row);
            noise_norm = noise_norm.max(n_row);
        }

        for &i in idx {
            scratch.in_support[i] = false;
        }
        if condition_value.is_nan() || noise_norm.is_nan() || signal_norm.is_nan() {
            return SupportQuantities::singular();
        }
        SupportQuantities {
            condition_value,
            noise_norm,
            sensitivity,
            signal_norm,
        }
    }
}

/// `‖A_{β,J}* A_I (A_{β,I}* A_I)⁻¹‖∞`; singular Gram systems give +∞.
pub fn condition_value(a: &Matrix, beta: Beta, support: &IndexSet) -> Result<f64> {
    Ok(SupportAnalyzer::new(a, beta)?
        .quantities(support)?
        .condition_value)
}

/// Smallest certified `c/d` ratio, +∞ when `q_I ≥ 1`.
pub fn cd_bound(a: &Matrix, beta: Beta, support: &IndexSet) -> Result<f64> {
    Ok(SupportAnalyzer::new(a, beta)?.quantities(support)?.cd_bound())
}

pub fn alpha_interval(
    a: &Matrix,
    beta: Beta,
    support: &IndexSet,
    c: f64,
    d: f64,
) -> Result<Option<AlphaInterval>> {
    if !(d > 0.0 && c > d) {
        return Err(Error::InvalidArgument(format!(
            "need c > d > 0, got c = {c}, d = {d}"
        )));
    }
    Ok(SupportAnalyzer::new(a, beta)?
        .quantities(support)?
        .alpha_interval(c, d))
}

pub fn certificate(a: &Matrix, beta: Beta, support: &IndexSet) -> Result<Certificate> {
    SupportAnalyzer::new(a, beta)?.certificate(support)
}

/// Which support sizes the class-level quantities range over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SupportSizes {
    /// Only `|I| = k`.
    #[default]
    Exactly,
    /// Every `1 ≤ |I| ≤ k`.
    UpTo,
}

#[derive(Clone, Copy, Debug)]
pub struct RegionOptions {
    pub sizes: SupportSizes,
    pub enumeration_cap: u128,
    /// Supports per parallel work item. Results are reduced in chunk order.
    pub chunk_size: usize,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            sizes: SupportSizes::Exactly,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            chunk_size: 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSummary {
    pub beta: Beta,
    pub k: usize,
    /// Minimal recoverable signal-to-noise ratio; +∞ if any support fails.
    pub r_value: f64,
    /// Largest `Σ_I`.
    pub sigma_value: f64,
    /// Largest `n_I/(1 − q_I)`; +∞ if any support fails.
    pub theta_min: f64,
    /// First support (lexicographically) attaining `r_value`.
    pub worst_support: IndexSet,
    pub failure_fraction: f64,
    pub supports_checked: u128,
}

/// Upper admissible bound `ϑ ↦ min_I (ϑ − s_I)/Σ_I` as the family of lines
/// it is the lower envelope of.
#[derive(Clone, Debug, Default)]
pub struct ThetaMaxCurve {
    lines: Vec<SupportQuantities>,
}

impl ThetaMaxCurve {
    pub fn eval(&self, theta: f64) -> f64 {
        self.lines
            .iter()
            .map(|q| q.theta_max(theta))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct RegionAnalysis {
    pub summary: RegionSummary,
    pub curve: ThetaMaxCurve,
}

struct Partial {
    r_value: f64,
    worst: Option<Vec<usize>>,
    sigma: f64,
    theta_min: f64,
    failures: u128,
    total: u128,
    lines: Vec<SupportQuantities>,
}

impl Partial {
    fn empty() -> Self {
        Partial {
            r_value: f64::NEG_INFINITY,
            worst: None,
            sigma: f64::NEG_INFINITY,
            theta_min: f64::NEG_INFINITY,
            failures: 0,
            total: 0,
            lines: Vec::new(),
        }
    }

    fn push(&mut self, idx: &[usize], q: &SupportQuantities, keep_line: bool) {
        let r = q.cd_bound();
        if self.worst.is_none() || r > self.r_value {
            self.r_value = r;
            self.worst = Some(idx.to_vec());
        }
        self.sigma = self.sigma.max(q.sensitivity);
        self.theta_min = self.theta_min.max(q.theta_min());
        if !q.satisfiable() {
            self.failures += 1;
        }
        self.total += 1;
        if keep_line {
            self.lines.push(*q);
        }
    }

    /// `later` must cover supports that come after `self` in enumeration order.
    fn merge(mut self, later: Partial) -> Partial {
        if later.worst.is_some() && (self.worst.is_none() || later.r_value > self.r_value) {
            self.r_value = later.r_value;
            self.worst = later.worst;
        }
        self.sigma = self.sigma.max(later.sigma);
        self.theta_min = self.theta_min.max(later.theta_min);
        self.failures += later.failures;
        self.total += later.total;
        self.lines.extend(later.lines);
        self
    }
}

/// Number of supports [`analyze_region`] would visit.
pub fn enumeration_count(n: usize, k: usize, sizes: SupportSizes) -> Option<u128> {
    match sizes {
        SupportSizes::Exactly => binomial(n, k),
        SupportSizes::UpTo => (1..=k).try_fold(0u128, |acc, s| acc.checked_add(binomial(n, s)?)),
    }
}

impl SupportAnalyzer {
    /// Exhaustive pass over all supports of the requested sizes.
    pub fn analyze_region(
        &self,
        k: usize,
        options: &RegionOptions,
        keep_curve: bool,
    ) -> Result<RegionAnalysis> {
        let n = self.n;
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "support size k = {k} must lie in 1..={n}"
            )));
        }
        let count = enumeration_count(n, k, options.sizes).unwrap_or(u128::MAX);
        if count > options.enumeration_cap {
            return Err(Error::EnumerationTooLarge {
                count,
                cap: options.enumeration_cap,
            });
        }
        let sizes: Vec<usize> = match options.sizes {
            SupportSizes::Exactly => vec![k],
            SupportSizes::UpTo => (1..=k).collect(),
        };
        let chunk = options.chunk_size.max(1) as u128;
        let mut tasks = Vec::new();
        for &size in &sizes {
            let total = binomial(n, size).expect("bounded by cap");
            let mut start = 0;
            while start < total {
                let end = (start + chunk).min(total);
                tasks.push((size, start, end));
                start = end;
            }
        }

        let partials: Vec<Partial> = tasks
            .par_iter()
            .map(|&(size, start, end)| {
                let mut scratch = Scratch::new(n);
                let mut part = Partial::empty();
                let mut c = unrank(n, size, start);
                for rank in start..end {
                    let q = self.quantities_for(&c, &mut scratch);
                    part.push(&c, &q, keep_curve);
                    if rank + 1 < end {
                        next_combination(&mut c, n);
                    }
                }
                part
            })
            .collect();
        let total = partials
            .into_iter()
            .fold(Partial::empty(), |acc, p| acc.merge(p));

        let worst = total.worst.expect("at least one support enumerated");
        let summary = RegionSummary {
            beta: self.beta,
            k,
            r_value: total.r_value,
            sigma_value: total.sigma,
            theta_min: total.theta_min,
            worst_support: IndexSet::new(worst, n)?,
            failure_fraction: total.failures as f64 / total.total as f64,
            supports_checked: total.total,
        };
        Ok(RegionAnalysis {
            summary,
            curve: ThetaMaxCurve { lines: total.lines },
        })
    }
}

pub fn region_summary(
    a: &Matrix,
    beta: Beta,
    k: usize,
    options: &RegionOptions,
) -> Result<RegionSummary> {
    check_k(a, k)?;
    Ok(SupportAnalyzer::new(a, beta)?
        .analyze_region(k, options, false)?
        .summary)
}

/// `Θ^max_{β,k}(ϑ) = min_I (ϑ − s_I)/Σ_I`.
pub fn theta_max(
    a: &Matrix,
    beta: Beta,
    k: usize,
    theta: f64,
    options: &RegionOptions,
) -> Result<f64> {
    check_k(a, k)?;
    Ok(SupportAnalyzer::new(a, beta)?
        .analyze_region(k, options, true)?
        .curve
        .eval(theta))
}

fn check_k(a: &Matrix, k: usize) -> Result<()> {
    if k > a.rows() {
        return Err(Error::InvalidArgument(format!(
            "support size k = {k} exceeds the number of measurements {}",
            a.rows()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(idx: &[usize], n: usize) -> IndexSet {
        IndexSet::new(idx.to_vec(), n).unwrap()
    }

    #[test]
    fn identity_single_penalty_remark_values() {
        let id = Matrix::identity(6);
        let i = set(&[0, 2, 5], 6);
        assert_eq!(condition_value(&id, Beta::INFINITE, &i).unwrap(), 0.0);
        assert!((cd_bound(&id, Beta::INFINITE, &i).unwrap() - 2.0).abs() < 1e-12);
        let iv = alpha_interval(&id, Beta::INFINITE, &i, 3.0, 1.0).unwrap().unwrap();
        assert!((iv.lo - 1.0).abs() < 1e-12 && (iv.hi - 2.0).abs() < 1e-12);
        assert!(iv.contains(1.0) && !iv.contains(2.0));
    }

    #[test]
    fn identity_finite_beta() {
        let id = Matrix::identity(5);
        let i = set(&[1, 3], 5);
        let beta = Beta::finite(1.0).unwrap();
        assert!((cd_bound(&id, beta, &i).unwrap() - 2.0).abs() < 1e-12);
        let iv = alpha_interval(&id, beta, &i, 3.0, 1.0).unwrap().unwrap();
        assert!((iv.lo - 0.5).abs() < 1e-12 && (iv.hi - 1.0).abs() < 1e-12);
        let cert = certificate(&id, beta, &i).unwrap();
        assert!(cert.satisfiable);
        assert!((cert.alpha_max_fn.1 - 2.0).abs() < 1e-12);
        assert!((cert.alpha_min_per_d - 0.5).abs() < 1e-12);
        assert_eq!(cert.alpha_interval(3.0, 1.0), Some(iv));
    }

    #[test]
    fn empty_interval_below_bound() {
        let id = Matrix::identity(4);
        let i = set(&[0], 4);
        // c/d = 2 is not strictly above the bound 2
        assert_eq!(alpha_interval(&id, Beta::INFINITE, &i, 2.0, 1.0).unwrap(), None);
        assert!(alpha_interval(&id, Beta::INFINITE, &i, 1.0, 1.0).is_err());
    }

    #[test]
    fn singular_gram_counts_as_failure() {
        let a = Matrix::from_row_major(2, 3, vec![1.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let i = set(&[0, 1], 3);
        assert_eq!(condition_value(&a, Beta::INFINITE, &i).unwrap(), f64::INFINITY);
        assert_eq!(cd_bound(&a, Beta::INFINITE, &i).unwrap(), f64::INFINITY);
        assert_eq!(alpha_interval(&a, Beta::INFINITE, &i, 3.0, 1.0).unwrap(), None);
    }

    #[test]
    fn identity_region() {
        let id = Matrix::identity(7);
        let opts = RegionOptions::default();
        let r = region_summary(&id, Beta::INFINITE, 3, &opts).unwrap();
        assert!((r.r_value - 2.0).abs() < 1e-12);
        assert!((r.sigma_value - 1.0).abs() < 1e-12);
        assert!((r.theta_min - 1.0).abs() < 1e-12);
        assert_eq!(r.failure_fraction, 0.0);
        assert_eq!(r.supports_checked, 35);
        assert_eq!(r.worst_support.as_slice(), &[0, 1, 2]);

        let beta = 0.25;
        let r = region_summary(&id, Beta::finite(beta).unwrap(), 3, &opts).unwrap();
        assert!((r.r_value - 2.0).abs() < 1e-12);
        assert!((r.sigma_value - (beta + 1.0) / beta).abs() < 1e-12);
        assert!((r.theta_min - beta / (beta + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn theta_max_identity() {
        let id = Matrix::identity(5);
        let opts = RegionOptions::default();
        let v = theta_max(&id, Beta::finite(1.0).unwrap(), 2, 2.0, &opts).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap_refused() {
        let id = Matrix::identity(30);
        let opts = RegionOptions {
            enumeration_cap: 100,
            ..Default::default()
        };
        assert!(matches!(
            region_summary(&id, Beta::INFINITE, 3, &opts),
            Err(Error::EnumerationTooLarge { count: 4060, cap: 100 })
        ));
        assert!(region_summary(&id, Beta::INFINITE, 0, &opts).is_err());
    }

    #[test]
    fn up_to_sizes_counts_all() {
        let id = Matrix::identity(6);
        let opts = RegionOptions {
            sizes: SupportSizes::UpTo,
            ..Default::default()
        };
        let r = region_summary(&id, Beta::INFINITE, 3, &opts).unwrap();
        assert_eq!(r.supports_checked, 6 + 15 + 20);
        assert_eq!(r.worst_support.as_slice(), &[0]);
    }
}
