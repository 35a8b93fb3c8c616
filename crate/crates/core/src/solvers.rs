//! Iterative soft-thresholding for the `ℓ¹` problem and for the multi-penalty
//! functional
//!
//! ```text
//! T(u, v) = ½‖A(u + v) − y‖² + α‖u‖₁ + (β/2)‖v‖²
//! ```
//!
//! either through the exact single-penalty reduction or by alternating
//! thresholding steps on `u` with exact minimization in `v`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{reduced_problem, Beta, IndexSet, Matrix};

pub const POWER_ITERATIONS: usize = 100;
/// Step size is this fraction of `1/‖B‖₂²`.
pub const STEP_FACTOR: f64 = 0.95;
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyParams {
    alpha: f64,
    beta: Beta,
}

impl PenaltyParams {
    pub fn new(alpha: f64, beta: Beta) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        Ok(PenaltyParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: DVector<f64>,
    /// Zero for single-penalty solves.
    pub v: DVector<f64>,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub optimality_residual: f64,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NAN)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IstaOptions {
    pub max_iters: usize,
    /// Stop once the optimality residual is at most this; zero disables.
    pub tol: f64,
}

impl Default for IstaOptions {
    fn default() -> Self {
        IstaOptions {
            max_iters: 100_000,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AlternatingOptions {
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Optional stop on the optimality residual, checked after each outer
    /// iteration.
    pub tol: Option<f64>,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        AlternatingOptions {
            outer_iters: 50,
            inner_iters: 50,
            tol: None,
        }
    }
}

pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

pub fn soft_threshold_vec(x: &DVector<f64>, tau: f64) -> DVector<f64> {
    x.map(|v| soft_threshold(v, tau))
}

/// Power-method estimate of `‖B‖₂²` from a fixed all-ones start.
pub fn spectral_norm_sq_estimate(b: &DMatrix<f64>) -> f64 {
    let n = b.ncols();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut bx = DVector::zeros(b.nrows());
    let mut est = 0.0;
    for _ in 0..POWER_ITERATIONS {
        bx.gemv(1.0, b, &x, 0.0);
        x.gemv_tr(1.0, b, &bx, 0.0);
        let norm = x.norm();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        est = norm;
        x /= norm;
    }
    if est > 0.0 {
        est
    } else {
        // Start vector in the null space: fall back to the Frobenius bound.
        b.norm_squared()
    }
}

fn residual_from_gradient(g: &DVector<f64>, u: &DVector<f64>, alpha: f64) -> f64 {
    g.iter()
        .zip(u.iter())
        .map(|(&gi, &ui)| {
            if ui != 0.0 {
                (gi + alpha * ui.signum()).abs()
            } else {
                (gi.abs() - alpha).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Distance of `u` from satisfying `B*(Bu − y) ∈ −α sgn(u)`; zero iff `u`
/// minimizes `½‖Bu − y‖² + α‖u‖₁`.
pub fn optimality_residual(b: &Matrix, y: &DVector<f64>, alpha: f64, u: &DVector<f64>) -> f64 {
    let bm = b.as_dmatrix();
    let g = bm.tr_mul(&(bm * u - y));
    residual_from_gradient(&g, u, alpha)
}

fn l1(u: &DVector<f64>) -> f64 {
    u.iter().map(|x| x.abs()).sum()
}

fn check_data(a: &Matrix, y: &DVector<f64>) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "data has length {}, matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("data contains non-finite values".into()));
    }
    Ok(())
}

fn ista_core(
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    lipschitz: f64,
    opts: &IstaOptions,
) -> Result<SolveResult> {
    let n = b.ncols();
    let step = if lipschitz > 0.0 { STEP_FACTOR / lipschitz } else { 1.0 };
    let mut u = DVector::zeros(n);
    let mut r = DVector::zeros(b.nrows());
    let mut g = DVector::zeros(n);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut residual;
    loop {
        r.copy_from(y);
        r.gemv(1.0, b, &u, -1.0);
        trace.push(0.5 * r.norm_squared() + alpha * l1(&u));
        g.gemv_tr(1.0, b, &r, 0.0);
        residual = residual_from_gradient(&g, &u, alpha);
        if !residual.is_finite() {
            return Err(Error::NonFiniteIterate { iteration: iterations });
        }
        if iterations >= opts.max_iters || residual <= opts.tol {
            break;
        }
        for (ui, gi) in u.iter_mut().zip(g.iter()) {
            *ui = soft_threshold(*ui - step * gi, step * alpha);
        }
        iterations += 1;
    }
    Ok(SolveResult {
        v: DVector::zeros(n),
        u,
        iterations,
        objective_trace: trace,
        optimality_residual: residual,
    })
}

/// ISTA for `½‖Bu − y‖² + α‖u‖₁` from `u = 0` with step `0.95/‖B‖₂²`.
pub fn ista_l1(
    b: &Matrix,
    y: &DVector<f64>,
    alpha: f64,
    opts: &IstaOptions,
) -> Result<SolveResult> {
    check_data(b, y)?;
    PenaltyParams::new(alpha, Beta::INFINITE)?;
    let bm = b.as_dmatrix();
    ista_core(bm, y, alpha, spectral_norm_sq_estimate(bm), opts)
}

/// `T_{α,β}(u, v)`; for infinite β this is `+∞` unless `v = 0`.
pub fn multi_objective(
    a: &Matrix,
    y: &DVector<f64>,
    params: &PenaltyParams,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> f64 {
    let penalty = match params.beta.value() {
        Some(b) => 0.5 * b * v.norm_squared(),
        None if v.iter().all(|&x| x == 0.0) => 0.0,
        None => return f64::INFINITY,
    };
    let r = a.as_dmatrix() * (u + v) - y;
    0.5 * r.norm_squared() + params.alpha * l1(u) + penalty
}

/// Smooth part `½‖A(u + v) − y‖² + (β/2)‖v‖²` of the functional.
pub fn smooth_part(a: &Matrix, y: &DVector<f64>, beta: f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let r = a.as_dmatrix() * (u + v) - y;
    0.5 * r.norm_squared() + 0.5 * beta * v.norm_squared()
}

/// Gradient of [`smooth_part`] with respect to `(u, v)`.
pub fn smooth_gradient(
    a: &Matrix,
    y: &DVector<f64>,
    beta: f64,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let am = a.as_dmatrix();
    let g = am.tr_mul(&(am * (u + v) - y));
    let gv = &g + v * beta;
    (g, gv)
}

/// Indices with `|u_i| > zero_tol`.
pub fn support(u: &DVector<f64>, zero_tol: f64) -> IndexSet {
    let idx: Vec<usize> = u
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > zero_tol)
        .map(|(i, _)| i)
        .collect();
    IndexSet::new(idx, u.len()).expect("indices are increasing and in range")
}

/// Multi-penalty problem data with the quantities shared across parameter
/// values cached: the Lipschitz estimate `‖A‖₂²` and `AA*`.
#[derive(Clone, Debug)]
pub struct MultiPenaltyProblem {
    a: DMatrix<f64>,
    y: DVector<f64>,
    lipschitz: f64,
    outer: DMatrix<f64>,
}

/// Cholesky factor of `β Id + AA*` used for exact noise updates.
#[derive(Clone, Debug)]
pub struct NoiseSystem {
    beta: f64,
    chol: Cholesky<f64, Dyn>,
}

impl MultiPenaltyProblem {
    pub fn new(a: &Matrix, y: &DVector<f64>) -> Result<Self> {
        check_data(a, y)?;
        let am = a.as_dmatrix().clone();
        let lipschitz = spectral_norm_sq_estimate(&am);
        let outer = &am * am.transpose();
        Ok(MultiPenaltyProblem {
            a: am,
            y: y.clone(),
            lipschitz,
            outer,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn noise_system(&self, beta: f64) -> Result<NoiseSystem> {
        Beta::finite(beta)?;
        let mut s = self.outer.clone();
        for i in 0..s.nrows() {
            s[(i, i)] += beta;
        }
        let chol = Cholesky::new(s)
            .ok_or_else(|| Error::NumericalFailure("beta Id + AA* is not positive definite".into()))?;
        Ok(NoiseSystem { beta, chol })
    }

    /// Exact minimizer in `v` for fixed `u`: `A*(β + AA*)⁻¹(y − Au)`.
    pub fn noise_update(&self, system: &NoiseSystem, u: &DVector<f64>) -> DVector<f64> {
        let rhs = &self.y - &self.a * u;
        self.a.tr_mul(&system.chol.solve(&rhs))
    }

    fn objective(&self, alpha: f64, beta: f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let r = &self.a * (u + v) - &self.y;
        0.5 * r.norm_squared() + alpha * l1(u) + 0.5 * beta * v.norm_squared()
    }

    /// Single-penalty ISTA on `(A, y)`.
    pub fn ista(&self, alpha: f64, opts: &IstaOptions) -> Result<SolveResult> {
        PenaltyParams::new(alpha, Beta::INFINITE)?;
        ista_core(&self.a, &self.y, alpha, self.lipschitz, opts)
    }

    /// Alternating scheme from `u = v = 0`: `inner_iters` thresholding steps
    /// on `u` with `v` frozen, then the exact `v` update.
    pub fn alternating(
        &self,
        alpha: f64,
        system: &NoiseSystem,
        opts: &AlternatingOptions,
    ) -> Result<SolveResult> {
        PenaltyParams::new(alpha, Beta::INFINITE)?;
        let beta = system.beta;
        let (m, n) = self.a.shape();
        let step = if self.lipschitz > 0.0 {
            STEP_FACTOR / self.lipschitz
        } else {
            1.0
        };
        let mut u = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        let mut offset = DVector::zeros(m);
        let mut r = DVector::zeros(m);
        let mut g = DVector::zeros(n);
        let mut trace = vec![self.objective(alpha, beta, &u, &v)];
        let mut outer = 0;
        while outer < opts.outer_iters {
            // A v − y is fixed during the inner loop.
            offset.copy_from(&self.y);
            offset.gemv(1.0, &self.a, &v, -1.0);
            for _ in 0..opts.inner_iters {
                r.copy_from(&offset);
                r.gemv(1.0, &self.a, &u, 1.0);
                g.gemv_tr(1.0, &self.a, &r, 0.0);
                for (ui, gi) in u.iter_mut().zip(g.iter()) {
                    *ui = soft_threshold(*ui - step * gi, step * alpha);
                }
            }
            v = self.noise_update(system, &u);
            outer += 1;
            let obj = self.objective(alpha, beta, &u, &v);
            if !obj.is_finite() || u.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteIterate {
                    iteration: outer * opts.inner_iters,
                });
            }
            trace.push(obj);
            if let Some(tol) = opts.tol {
                if self.residual(alpha, &u, &v) <= tol {
                    break;
                }
            }
        }
        let optimality_residual = self.residual(alpha, &u, &v);
        Ok(SolveResult {
            u,
            v,
            iterations: outer,
            objective_trace: trace,
            optimality_residual,
        })
    }

    /// With `v = v(u)` the `u`-gradient `A*(A(u + v) − y)` equals the
    /// gradient of the reduced problem, so this is the reduced residual.
    fn residual(&self, alpha: f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let r = &self.a * (u + v) - &self.y;
        residual_from_gradient(&self.a.tr_mul(&r), u, alpha)
    }
}

/// Multi-penalty solve through the single-penalty reduction; `v` is
/// recovered in closed form. The objective trace is that of the reduced
/// problem, which equals `T(u, v(u))` along the iterates.
pub fn solve_multi_reduced(
    a: &Matrix,
    y: &DVector<f64>,
    params: &PenaltyParams,
    opts: &IstaOptions,
) -> Result<SolveResult> {
    check_data(a, y)?;
    if params.beta.is_infinite() {
        return ista_l1(a, y, params.alpha, opts);
    }
    let reduced = reduced_problem(a, y, params.beta)?;
    let mut result = ista_l1(&reduced.b_matrix, &reduced.y_reduced, params.alpha, opts)?;
    let problem = MultiPenaltyProblem::new(a, y)?;
    let system = problem.noise_system(params.beta.as_f64())?;
    result.v = problem.noise_update(&system, &result.u);
    Ok(result)
}

pub fn solve_multi_alternating(
    a: &Matrix,
    y: &DVector<f64>,
    params: &PenaltyParams,
    opts: &AlternatingOptions,
) -> Result<SolveResult> {
    let problem = MultiPenaltyProblem::new(a, y)?;
    match params.beta.value() {
        None => problem.ista(
            params.alpha,
            &IstaOptions {
                max_iters: opts.outer_iters * opts.inner_iters,
                tol: opts.tol.unwrap_or(0.0),
            },
        ),
        Some(b) => problem.alternating(params.alpha, &problem.noise_system(b)?, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecf(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn soft_threshold_branches() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(1.0, 1.0), 0.0);
        assert_eq!(soft_threshold(2.0, 0.0), 2.0);
        assert_eq!(
            soft_threshold_vec(&vecf(&[3.0, -0.5, -3.0]), 1.0),
            vecf(&[2.0, 0.0, -2.0])
        );
    }

    #[test]
    fn ista_identity_is_soft_threshold() {
        let id = Matrix::identity(5);
        let y = vecf(&[3.0, -0.2, 0.7, -4.5, 1.0]);
        let opts = IstaOptions { max_iters: 200, tol: 0.0 };
        let res = ista_l1(&id, &y, 0.8, &opts).unwrap();
        let expected = soft_threshold_vec(&y, 0.8);
        assert!((&res.u - &expected).amax() < 1e-14);
        assert!(res.optimality_residual <= 1e-14);
        assert!(res.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn residual_cases() {
        let id = Matrix::identity(4);
        let y = vecf(&[2.0, -0.1, 0.5, -3.0]);
        let u = soft_threshold_vec(&y, 0.4);
        assert!(optimality_residual(&id, &y, 0.4, &u) < 1e-12);
        // zero is optimal iff ‖B*y‖∞ ≤ α
        let zero = DVector::zeros(4);
        assert_eq!(optimality_residual(&id, &y, 3.0, &zero), 0.0);
        assert!(optimality_residual(&id, &y, 2.9, &zero) > 0.0);
        let mut bumped = u.clone();
        bumped[1] += 1e-3;
        assert!(optimality_residual(&id, &y, 0.4, &bumped) > 0.0);
    }

    #[test]
    fn reduced_identity_closed_form() {
        let id = Matrix::identity(4);
        let y = vecf(&[3.0, -0.5, 1.2, -2.0]);
        let alpha = 0.4;
        let params = PenaltyParams::new(alpha, Beta::finite(1.0).unwrap()).unwrap();
        let opts = IstaOptions { max_iters: 500, tol: 0.0 };
        let res = solve_multi_reduced(&id, &y, &params, &opts).unwrap();
        let u = soft_threshold_vec(&y, 2.0 * alpha);
        let v = (&y - &u) / 2.0;
        assert!((&res.u - &u).amax() < 1e-12);
        assert!((&res.v - &v).amax() < 1e-12);
    }

    #[test]
    fn alternating_large_alpha_gives_zero_u() {
        let a = Matrix::from_row_major(2, 3, vec![1.0, 0.5, -0.3, 0.2, 1.0, 0.7]).unwrap();
        let y = vecf(&[0.3, -0.4]);
        let beta = 0.7;
        let params = PenaltyParams::new(1e3, Beta::finite(beta).unwrap()).unwrap();
        let res = solve_multi_alternating(&a, &y, &params, &AlternatingOptions::default()).unwrap();
        assert!(res.u.iter().all(|&x| x == 0.0));
        let am = a.as_dmatrix();
        let mut s = am.tr_mul(am);
        for i in 0..3 {
            s[(i, i)] += beta;
        }
        let expected = s.lu().solve(&am.tr_mul(&y)).unwrap();
        assert!((&res.v - &expected).amax() < 1e-12);
    }

    #[test]
    fn infinite_beta_matches_plain_ista() {
        let a = Matrix::from_row_major(2, 3, vec![1.0, 0.5, -0.3, 0.2, 1.0, 0.7]).unwrap();
        let y = vecf(&[1.3, -0.4]);
        let params = PenaltyParams::new(0.1, Beta::INFINITE).unwrap();
        let opts = IstaOptions::default();
        let via_multi = solve_multi_reduced(&a, &y, &params, &opts).unwrap();
        let direct = ista_l1(&a, &y, 0.1, &opts).unwrap();
        assert_eq!(via_multi.u, direct.u);
        assert!(via_multi.v.iter().all(|&x| x == 0.0));
        let obj = multi_objective(&a, &y, &params, &direct.u, &direct.v);
        assert!((obj - direct.final_objective()).abs() < 1e-15);
    }

    #[test]
    fn support_extraction() {
        assert_eq!(support(&vecf(&[0.0, 2.0, 0.0, -1.0]), 1e-10).as_slice(), &[1, 3]);
        assert!(support(&DVector::zeros(3), 1e-10).is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PenaltyParams::new(0.0, Beta::INFINITE).is_err());
        assert!(PenaltyParams::new(f64::NAN, Beta::INFINITE).is_err());
        let id = Matrix::identity(2);
        assert!(ista_l1(&id, &vecf(&[1.0]), 0.1, &IstaOptions::default()).is_err());
    }
}
