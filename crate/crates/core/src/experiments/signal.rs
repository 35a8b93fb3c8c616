use nalgebra::DVector;
use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::linalg::IndexSet;

/// How the noise sup-norm relates to the bound `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// `‖v‖∞ = d` exactly.
    #[default]
    Exact,
    /// `‖v‖∞ = 0.99·r·d` with `r` uniform on `(0, 1]`, so strictly below `d`.
    Strict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub n: usize,
    pub sparsity: usize,
    /// Every nonzero of `u†` has magnitude strictly above this.
    pub magnitude_floor: f64,
    pub magnitude_ceiling: f64,
    pub noise_linf: f64,
    pub noise_mode: NoiseMode,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sparsity > self.n {
            return Err(Error::InvalidArgument(format!(
                "sparsity {} exceeds dimension {}",
                self.sparsity, self.n
            )));
        }
        if !(self.magnitude_floor > 0.0 && self.magnitude_ceiling > self.magnitude_floor)
            || !self.magnitude_ceiling.is_finite()
        {
            return Err(Error::InvalidArgument(format!(
                "need 0 < magnitude floor < ceiling, got {} and {}",
                self.magnitude_floor, self.magnitude_ceiling
            )));
        }
        let d = self.noise_linf;
        let ok = match self.noise_mode {
            NoiseMode::Exact => d >= 0.0 && d.is_finite(),
            NoiseMode::Strict => d > 0.0 && d.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid noise bound {d}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalSample {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub support: IndexSet,
}

/// Draws `(u†, v)`: `u†` has the given support (uniformly random of size
/// `sparsity` when `None`), random signs and magnitudes uniform on
/// `(floor, ceiling]`; `v` is uniform on `[−1, 1]ᴺ` rescaled per the noise
/// mode.
pub fn sample_signal<R: Rng + ?Sized>(
    spec: &SignalSpec,
    support: Option<&IndexSet>,
    rng: &mut R,
) -> Result<SignalSample> {
    spec.validate()?;
    let n = spec.n;
    let support = match support {
        Some(s) if s.ambient() != n => {
            return Err(Error::DimensionMismatch(format!(
                "support over {} indices for a signal of length {n}",
                s.ambient()
            )))
        }
        Some(s) => s.clone(),
        None => IndexSet::new(rand::seq::index::sample(rng, n, spec.sparsity).into_vec(), n)?,
    };

    let mut u = DVector::zeros(n);
    let span = spec.magnitude_ceiling - spec.magnitude_floor;
    for &i in support.as_slice() {
        // 1 − U with U ∈ [0, 1) lies in (0, 1]
        let t: f64 = 1.0 - rng.random::<f64>();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        u[i] = sign * (spec.magnitude_floor + span * t);
    }

    let mut v: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    let target = match spec.noise_mode {
        NoiseMode::Exact => spec.noise_linf,
        NoiseMode::Strict => spec.noise_linf * 0.99 * (1.0 - rng.random::<f64>()),
    };
    let imax = v.iamax();
    let peak: f64 = v[imax];
    if peak == 0.0 || target == 0.0 {
        v.fill(0.0);
    } else {
        v *= target / peak.abs();
        v[imax] = target * peak.signum();
        // rescaling may push a near-tied entry a hair above the target
        for x in v.iter_mut() {
            *x = x.clamp(-target, target);
        }
    }
    Ok(SignalSample { u, v, support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::stream_rng;

    fn spec(mode: NoiseMode) -> SignalSpec {
        SignalSpec {
            n: 100,
            sparsity: 7,
            magnitude_floor: 1.5,
            magnitude_ceiling: 3.0,
            noise_linf: 0.3,
            noise_mode: mode,
        }
    }

    #[test]
    fn construction_invariants() {
        for seed in 0..50 {
            let mut rng = stream_rng(seed, 2, 0);
            let s = sample_signal(&spec(NoiseMode::Exact), None, &mut rng).unwrap();
            assert_eq!(s.support.len(), 7);
            for &i in s.support.as_slice() {
                assert!(s.u[i].abs() > 1.5 && s.u[i].abs() <= 3.0);
            }
            assert_eq!(s.u.iter().filter(|x| **x != 0.0).count(), 7);
            assert_eq!(s.v.amax(), 0.3);

            let s = sample_signal(&spec(NoiseMode::Strict), None, &mut rng).unwrap();
            assert!(s.v.amax() < 0.3);
        }
    }

    #[test]
    fn fixed_support_and_determinism() {
        let i = IndexSet::new(vec![2, 50, 99], 100).unwrap();
        let mut sp = spec(NoiseMode::Exact);
        sp.sparsity = 3;
        let a = sample_signal(&sp, Some(&i), &mut stream_rng(4, 2, 1)).unwrap();
        let b = sample_signal(&sp, Some(&i), &mut stream_rng(4, 2, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.support, i);
    }

    #[test]
    fn noiseless_and_invalid() {
        let mut sp = spec(NoiseMode::Exact);
        sp.noise_linf = 0.0;
        let s = sample_signal(&sp, None, &mut stream_rng(1, 2, 0)).unwrap();
        assert!(s.v.iter().all(|x| *x == 0.0));
        sp.noise_mode = NoiseMode::Strict;
        assert!(sample_signal(&sp, None, &mut stream_rng(1, 2, 0)).is_err());
        let mut sp = spec(NoiseMode::Exact);
        sp.sparsity = 101;
        assert!(sample_signal(&sp, None, &mut stream_rng(1, 2, 0)).is_err());
    }
}
