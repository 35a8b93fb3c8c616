//! Dense linear algebra kernel.
//!
//! Everything here works on small-to-moderate dense matrices (a few hundred
//! rows at most). The operator norm used throughout the crate is the induced
//! `ℓ∞ → ℓ∞` norm, i.e. the maximum absolute row sum.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, LU};

use crate::error::{Error, Result};

/// Condition numbers above this value make a Gram system count as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Lower clamp applied to the eigenvalues of `Id + AA*/β` before taking the
/// inverse square root.
pub const EIGEN_CLAMP: f64 = 1e-15;

/// Dense real matrix with at least one row and column and finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix(DMatrix<f64>);

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &data))
    }

    pub fn from_dmatrix(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "matrix must be at least 1x1, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if let Some(pos) = inner.iter().position(|x| !x.is_finite()) {
            let (r, c) = (pos % inner.nrows(), pos / inner.nrows());
            return Err(Error::InvalidMatrix(format!("non-finite entry at ({r}, {c})")));
        }
        Ok(Matrix(inner))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity needs a positive dimension");
        Matrix(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_dmatrix(&self.0 * factor)
    }
}

/// Candidate support: strictly increasing column indices below `ambient`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSet {
    indices: Vec<usize>,
    ambient: usize,
}

impl IndexSet {
    /// Builds a set from indices in any order. Duplicates and out-of-range
    /// indices are rejected.
    pub fn new(mut indices: Vec<usize>, ambient: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate index {}", w[0])));
        }
        if let Some(&last) = indices.last() {
            if last >= ambient {
                return Err(Error::IndexOutOfRange { index: last, ambient });
            }
        }
        Ok(IndexSet { indices, ambient })
    }

    pub fn empty(ambient: usize) -> Self {
        IndexSet {
            indices: Vec::new(),
            ambient,
        }
    }

    pub fn full(ambient: usize) -> Self {
        IndexSet {
            indices: (0..ambient).collect(),
            ambient,
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn complement(&self) -> IndexSet {
        let mut out = Vec::with_capacity(self.ambient - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.ambient {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        IndexSet {
            indices: out,
            ambient: self.ambient,
        }
    }

    /// Number of indices in exactly one of the two sets.
    pub fn symmetric_difference_len(&self, other: &IndexSet) -> usize {
        let (a, b) = (&self.indices, &other.indices);
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    count += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    count += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        count + (a.len() - i) + (b.len() - j)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Weight of the quadratic noise penalty. `Beta::INFINITE` is the
/// single-penalty limit in which the noise component is forced to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beta(Option<f64>);

impl Beta {
    pub const INFINITE: Beta = Beta(None);

    pub fn finite(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Beta(Some(value)))
        } else {
            Err(Error::InvalidArgument(format!(
                "beta must be a positive finite number or inf, got {value}"
            )))
        }
    }

    /// `f64::INFINITY` maps to the sentinel; anything else must be positive.
    pub fn from_f64(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Beta::INFINITE)
        } else {
            Beta::finite(value)
        }
    }

    pub fn value(self) -> Option<f64> {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_none()
    }

    pub fn as_f64(self) -> f64 {
        self.0.unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("inf"),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Beta::INFINITE),
            _ => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("cannot parse beta from {s:?}")))?;
                Beta::finite(v)
            }
        }
    }
}

/// Single-penalty problem `½‖B u − y_β‖² + α‖u‖₁` whose minimizer is the
/// sparse component of the multi-penalty minimizer.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub b_matrix: Matrix,
    pub y_reduced: DVector<f64>,
}

/// Maximum absolute row sum.
pub fn inf_op_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn restrict_columns(a: &Matrix, support: &IndexSet) -> Result<Matrix> {
    if support.ambient() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "index set over {} columns applied to a matrix with {} columns",
            support.ambient(),
            a.cols()
        )));
    }
    if support.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot restrict to an empty column set".into(),
        ));
    }
    Ok(Matrix(a.0.select_columns(support.as_slice())))
}

/// `Id + AA*/β` for finite β.
fn regularized_outer(a: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let mut s = a * a.transpose() / beta;
    for i in 0..s.nrows() {
        s[(i, i)] += 1.0;
    }
    s
}

/// Solves `S X = rhs` for symmetric positive definite `S`, falling back to LU
/// if the Cholesky factorization breaks down.
pub(crate) fn spd_solve(s: DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = Cholesky::new(s.clone()) {
        return Ok(chol.solve(rhs));
    }
    LU::new(s)
        .solve(rhs)
        .ok_or_else(|| Error::NumericalFailure("symmetric system is singular".into()))
}

/// `A_β = (Id + AA*/β)⁻¹ A`; the identity map on `A` when β is infinite.
pub fn regularized_operator(a: &Matrix, beta: Beta) -> Result<Matrix> {
    match beta.value() {
        None => Ok(a.clone()),
        Some(b) => {
            let s = regularized_outer(&a.0, b);
            Matrix::from_dmatrix(spd_solve(s, &a.0)?)
        }
    }
}

/// `B_β = (Id + AA*/β)^{-1/2} A` and `y_β = (Id + AA*/β)^{-1/2} y`, through a
/// symmetric eigendecomposition. With infinite β this returns `(A, y)`.
pub fn reduced_problem(a: &Matrix, y: &DVector<f64>, beta: Beta) -> Result<ReducedProblem> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "data has length {}, matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    let Some(b) = beta.value() else {
        return Ok(ReducedProblem {
            b_matrix: a.clone(),
            y_reduced: y.clone(),
        });
    };
    let s = regularized_outer(&a.0, b);
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 0).ok_or_else(|| {
        Error::NumericalFailure("eigendecomposition of Id + AA*/beta did not converge".into())
    })?;
    let q = &eig.eigenvectors;
    let weights = eig.eigenvalues.map(|l| 1.0 / l.max(EIGEN_CLAMP).sqrt());
    // Q diag(w) Qᵀ
    let mut qw = q.clone();
    for (j, mut col) in qw.column_iter_mut().enumerate() {
        col *= weights[j];
    }
    let inv_sqrt = qw * q.transpose();
    Ok(ReducedProblem {
        b_matrix: Matrix::from_dmatrix(&inv_sqrt * &a.0)?,
        y_reduced: &inv_sqrt * y,
    })
}

/// LU-factorized small square system with a 1-norm condition estimate.
#[derive(Clone, Debug)]
pub struct GramSystem {
    lu: LU<f64, Dyn, Dyn>,
    lu_t: LU<f64, Dyn, Dyn>,
    condition: f64,
}

impl GramSystem {
    /// Factors `g`, returning `SingularGram` when a pivot vanishes or the
    /// estimated condition number exceeds [`SINGULAR_CONDITION`].
    pub fn factor(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Gram system must be square and nonempty, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let norm1 = g
            .column_iter()
            .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let lu_t = LU::new(g.transpose());
        let lu = LU::new(g);
        if !lu.is_invertible() || !lu_t.is_invertible() {
            return Err(Error::SingularGram {
                condition: f64::INFINITY,
            });
        }
        let mut sys = GramSystem {
            lu,
            lu_t,
            condition: f64::INFINITY,
        };
        let inv_norm1 = sys.inverse_norm1_estimate();
        sys.condition = norm1 * inv_norm1;
        if !sys.condition.is_finite() || sys.condition > SINGULAR_CONDITION {
            return Err(Error::SingularGram {
                condition: sys.condition,
            });
        }
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        // Invertibility was checked in `factor`.
        self.lu.solve(rhs).expect("factored Gram system is invertible")
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(rhs).expect("factored Gram system is invertible")
    }

    fn solve_transpose_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu_t.solve(rhs).expect("factored Gram system is invertible")
    }

    /// Hager's estimator for `‖G⁻¹‖₁`.
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.dim();
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut estimate = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve_vec(&x);
            estimate = y.iter().map(|v| v.abs()).sum::<f64>();
            if !estimate.is_finite() {
                return f64::INFINITY;
            }
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let z = self.solve_transpose_vec(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            if zmax <= z.dot(&x) || j == last_j {
                break;
            }
            last_j = j;
            x.fill(0.0);
            x[j] = 1.0;
        }
        estimate
    }
}

/// `A_{β,I}* A_I`.
pub fn restricted_gram(a: &Matrix, a_beta: &Matrix, support: &IndexSet) -> Result<DMatrix<f64>> {
    let a_i = restrict_columns(a, support)?;
    let ab_i = restrict_columns(a_beta, support)?;
    Ok(ab_i.0.tr_mul(&a_i.0))
}

/// `(A_{β,I}* A_I)⁻¹ · rhs` by factor-then-solve.
pub fn gram_inverse_apply(
    a: &Matrix,
    beta: Beta,
    support: &IndexSet,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if rhs.nrows() != support.len() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, support has {} indices",
            rhs.nrows(),
            support.len()
        )));
    }
    let a_beta = regularized_operator(a, beta)?;
    let g = restricted_gram(a, &a_beta, support)?;
    Ok(GramSystem::factor(g)?.solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_major(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn inf_norm_row_sums() {
        let a = m(2, 2, &[1.0, -2.0, 3.0, -4.0]);
        assert_eq!(inf_op_norm(a.as_dmatrix()), 7.0);
        assert_eq!(inf_op_norm(&DMatrix::identity(5, 5)), 1.0);
        assert_eq!(inf_op_norm(&DMatrix::zeros(3, 2)), 0.0);
    }

    #[test]
    fn matrix_rejects_bad_input() {
        assert!(Matrix::from_row_major(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_row_major(0, 2, vec![]).is_err());
        assert!(Matrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn index_set_complement_and_validation() {
        let i = IndexSet::new(vec![3, 0, 5], 7).unwrap();
        assert_eq!(i.as_slice(), &[0, 3, 5]);
        assert_eq!(i.complement().as_slice(), &[1, 2, 4, 6]);
        assert!(IndexSet::new(vec![1, 1], 3).is_err());
        assert!(matches!(
            IndexSet::new(vec![3], 3),
            Err(Error::IndexOutOfRange { index: 3, ambient: 3 })
        ));
        assert!(IndexSet::empty(4).complement() == IndexSet::full(4));
        let j = IndexSet::new(vec![0, 1, 6], 7).unwrap();
        assert_eq!(i.symmetric_difference_len(&j), 4);
        assert_eq!(i.symmetric_difference_len(&i), 0);
    }

    #[test]
    fn beta_parsing() {
        assert!("inf".parse::<Beta>().unwrap().is_infinite());
        assert_eq!("0.5".parse::<Beta>().unwrap().value(), Some(0.5));
        assert!("0".parse::<Beta>().is_err());
        assert!("-1".parse::<Beta>().is_err());
        assert!("nan".parse::<Beta>().is_err());
        assert!(Beta::from_f64(f64::INFINITY).unwrap().is_infinite());
        assert_eq!(Beta::INFINITE.to_string(), "inf");
    }

    #[test]
    fn restrict_identity_and_full() {
        let id = Matrix::identity(3);
        let r = restrict_columns(&id, &IndexSet::new(vec![0, 2], 3).unwrap()).unwrap();
        assert_eq!(r.to_row_major(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let a = m(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(restrict_columns(&a, &IndexSet::full(4)).unwrap(), a);
        let r = restrict_columns(&a, &IndexSet::new(vec![1, 3], 4).unwrap()).unwrap();
        assert_eq!(r.to_row_major(), vec![2.0, 4.0, 6.0, 8.0]);
        assert!(restrict_columns(&a, &IndexSet::full(3)).is_err());
    }

    #[test]
    fn regularized_operator_identity() {
        let id = Matrix::identity(4);
        let ab = regularized_operator(&id, Beta::finite(1.0).unwrap()).unwrap();
        assert!((ab.as_dmatrix() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-15);
        assert_eq!(regularized_operator(&id, Beta::INFINITE).unwrap(), id);
    }

    #[test]
    fn reduced_problem_identity() {
        let id = Matrix::identity(3);
        let y = DVector::from_vec(vec![1.0, -2.0, 4.0]);
        let rp = reduced_problem(&id, &y, Beta::finite(1.0).unwrap()).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((rp.b_matrix.as_dmatrix() - DMatrix::identity(3, 3) * h).amax() < 1e-15);
        assert!((rp.y_reduced - y * h).amax() < 1e-15);
    }

    #[test]
    fn gram_identity_cases() {
        let id = Matrix::identity(5);
        let i = IndexSet::new(vec![1, 4], 5).unwrap();
        let rhs = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let out = gram_inverse_apply(&id, Beta::INFINITE, &i, &rhs).unwrap();
        assert!((&out - &rhs).amax() < 1e-15);
        let out = gram_inverse_apply(&id, Beta::finite(1.0).unwrap(), &i, &rhs).unwrap();
        assert!((&out - &rhs * 2.0).amax() < 1e-14);
    }

    #[test]
    fn gram_singular_detected() {
        // Two identical columns make the restricted Gram matrix singular.
        let a = m(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0]);
        let i = IndexSet::new(vec![0, 1], 3).unwrap();
        let rhs = DMatrix::identity(2, 2);
        assert!(matches!(
            gram_inverse_apply(&a, Beta::INFINITE, &i, &rhs),
            Err(Error::SingularGram { .. })
        ));
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        assert!(matches!(GramSystem::factor(nearly), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn condition_estimate_matches_exact_on_diagonal() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.5, 2.0]));
        let sys = GramSystem::factor(g).unwrap();
        assert!((sys.condition_estimate() - 8.0).abs() < 1e-12);
    }
}
