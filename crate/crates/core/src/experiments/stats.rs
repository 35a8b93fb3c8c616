use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StdKind {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n − 1`.
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatSummary {
    pub median: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub minimum: f64,
    pub maximum: f64,
    /// Finite values summarized.
    pub count: usize,
    /// Infinite values left out.
    pub excluded_infinite: usize,
}

pub fn summarize(values: &[f64]) -> Result<StatSummary> {
    summarize_with(values, StdKind::Population)
}

/// Summary of the finite values; infinities are counted and dropped.
pub fn summarize_with(values: &[f64], kind: StdKind) -> Result<StatSummary> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("cannot summarize NaN values".into()));
    }
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded_infinite = values.len() - finite.len();
    if finite.is_empty() {
        return Err(Error::EmptyInput);
    }
    finite.sort_by(f64::total_cmp);
    let n = finite.len();
    let median = if n % 2 == 1 {
        finite[n / 2]
    } else {
        0.5 * (finite[n / 2 - 1] + finite[n / 2])
    };
    let mean = finite.iter().sum::<f64>() / n as f64;
    let ss: f64 = finite.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = match kind {
        StdKind::Population => n as f64,
        StdKind::Sample if n > 1 => (n - 1) as f64,
        StdKind::Sample => 1.0,
    };
    Ok(StatSummary {
        median,
        mean,
        std_dev: (ss / denom).sqrt(),
        minimum: finite[0],
        maximum: finite[n - 1],
        count: n,
        excluded_infinite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_values() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert!((s.std_dev - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!((s.minimum, s.maximum), (1.0, 4.0));
        let s = summarize_with(&[4.0, 1.0, 3.0, 2.0], StdKind::Sample).unwrap();
        assert!((s.std_dev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_and_constant() {
        let s = summarize(&[7.0]).unwrap();
        assert_eq!(
            (s.median, s.mean, s.std_dev, s.minimum, s.maximum),
            (7.0, 7.0, 0.0, 7.0, 7.0)
        );
        assert_eq!(summarize(&[3.0; 5]).unwrap().std_dev, 0.0);
    }

    #[test]
    fn infinities_excluded() {
        let s = summarize(&[1.0, f64::INFINITY, 3.0]).unwrap();
        assert_eq!(s.excluded_infinite, 1);
        assert_eq!(s.median, 2.0);
        assert!(matches!(summarize(&[]), Err(Error::EmptyInput)));
        assert!(matches!(summarize(&[f64::INFINITY]), Err(Error::EmptyInput)));
        assert!(summarize(&[f64::NAN]).is_err());
    }
}
