use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::domain;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Independent RNG stream for `(master_seed, domain, index)`.
pub fn stream_rng(master_seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((domain << 48) ^ index);
    rng
}

/// Per-entry standard deviation of a Gaussian ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum EntryScale {
    /// Standard normal entries.
    Unit,
    /// `1/√m`, giving columns of roughly unit norm.
    #[default]
    InvSqrtRows,
    Fixed(f64),
}

impl EntryScale {
    pub fn std_for(self, rows: usize) -> f64 {
        match self {
            EntryScale::Unit => 1.0,
            EntryScale::InvSqrtRows => 1.0 / (rows as f64).sqrt(),
            EntryScale::Fixed(s) => s,
        }
    }
}

impl fmt::Display for EntryScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryScale::Unit => f.write_str("unit"),
            EntryScale::InvSqrtRows => f.write_str("inv-sqrt-m"),
            EntryScale::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for EntryScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unit" => Ok(EntryScale::Unit),
            "inv-sqrt-m" => Ok(EntryScale::InvSqrtRows),
            t => match t.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(EntryScale::Fixed(v)),
                _ => Err(Error::InvalidArgument(format!(
                    "entry scale must be unit, inv-sqrt-m or a positive number, got {s:?}"
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleKind {
    Gaussian,
    /// Every member is the identity; rows must equal cols.
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub rows: usize,
    pub cols: usize,
    pub matrix_count: usize,
    pub entry_std: f64,
    pub master_seed: u64,
    pub kind: EnsembleKind,
}

impl EnsembleSpec {
    pub fn gaussian(
        rows: usize,
        cols: usize,
        matrix_count: usize,
        entry_std: f64,
        master_seed: u64,
    ) -> Result<Self> {
        let spec = EnsembleSpec {
            rows,
            cols,
            matrix_count,
            entry_std,
            master_seed,
            kind: EnsembleKind::Gaussian,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity(n: usize, matrix_count: usize) -> Result<Self> {
        let spec = EnsembleSpec {
            rows: n,
            cols: n,
            matrix_count,
            entry_std: 1.0,
            master_seed: 0,
            kind: EnsembleKind::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidArgument("ensemble dimensions must be positive".into()));
        }
        if self.matrix_count == 0 {
            return Err(Error::InvalidArgument("matrix_count must be at least 1".into()));
        }
        if !(self.entry_std.is_finite() && self.entry_std > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "entry_std must be positive, got {}",
                self.entry_std
            )));
        }
        if self.kind == EnsembleKind::Identity && self.rows != self.cols {
            return Err(Error::InvalidArgument("identity ensemble must be square".into()));
        }
        Ok(())
    }
}

/// Member `index` of the ensemble. Entries are drawn in row-major order from
/// the stream `(master_seed, MATRIX, index)`.
pub fn gaussian_matrix(spec: &EnsembleSpec, index: usize) -> Result<Matrix> {
    spec.validate()?;
    if index >= spec.matrix_count {
        return Err(Error::InvalidArgument(format!(
            "matrix index {index} out of range for an ensemble of {}",
            spec.matrix_count
        )));
    }
    match spec.kind {
        EnsembleKind::Identity => Ok(Matrix::identity(spec.rows)),
        EnsembleKind::Gaussian => {
            let mut rng = stream_rng(spec.master_seed, domain::MATRIX, index as u64);
            let normal = Normal::new(0.0, spec.entry_std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let data: Vec<f64> = (0..spec.rows * spec.cols)
                .map(|_| normal.sample(&mut rng))
                .collect();
            Matrix::from_dmatrix(DMatrix::from_row_slice(spec.rows, spec.cols, &data))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let spec = EnsembleSpec::gaussian(5, 7, 3, 1.0, 11).unwrap();
        let a = gaussian_matrix(&spec, 1).unwrap();
        assert_eq!(a, gaussian_matrix(&spec, 1).unwrap());
        assert_ne!(a, gaussian_matrix(&spec, 2).unwrap());
        assert!(gaussian_matrix(&spec, 3).is_err());
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let std = 0.7;
        let spec = EnsembleSpec::gaussian(100, 100, 1, std, 5).unwrap();
        let a = gaussian_matrix(&spec, 0).unwrap();
        let mean = a.as_dmatrix().mean();
        assert!(mean.abs() < 4.0 * std / 100.0, "mean {mean}");
    }

    #[test]
    fn inv_sqrt_rows_gives_unit_columns() {
        let m = 60;
        let spec = EnsembleSpec::gaussian(m, 80, 1, EntryScale::InvSqrtRows.std_for(m), 9).unwrap();
        let a = gaussian_matrix(&spec, 0).unwrap();
        let avg: f64 = a
            .as_dmatrix()
            .column_iter()
            .map(|c| c.norm_squared())
            .sum::<f64>()
            / 80.0;
        assert!((avg - 1.0).abs() < 0.1, "average squared column norm {avg}");
    }

    #[test]
    fn identity_ensemble() {
        let spec = EnsembleSpec::identity(4, 2).unwrap();
        assert_eq!(gaussian_matrix(&spec, 1).unwrap(), Matrix::identity(4));
    }

    #[test]
    fn entry_scale_parsing() {
        assert_eq!("unit".parse::<EntryScale>().unwrap(), EntryScale::Unit);
        assert_eq!("inv-sqrt-m".parse::<EntryScale>().unwrap(), EntryScale::InvSqrtRows);
        assert_eq!("0.5".parse::<EntryScale>().unwrap(), EntryScale::Fixed(0.5));
        assert!("-1".parse::<EntryScale>().is_err());
        assert_eq!(EntryScale::InvSqrtRows.std_for(4), 0.5);
    }
}
