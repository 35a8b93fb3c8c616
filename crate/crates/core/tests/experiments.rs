use proptest::prelude::*;
use unmix::experiments::{
    condition_failure_study, grid_search_recovery, EnsembleSpec, EntryScale, GeometricGrid,
    NoiseMode, RecoveryConfig, SignalSpec, StudyOptions,
};
use unmix::{Beta, IndexSet};

/// Failure fractions should shrink with β on nearly every matrix, not just
/// on average.
#[test]
fn failure_fraction_decreases_with_beta_per_matrix() {
    let betas = [
        Beta::INFINITE,
        Beta::finite(10.0).unwrap(),
        Beta::finite(1.0).unwrap(),
        Beta::finite(0.1).unwrap(),
    ];
    let spec = EnsembleSpec::gaussian(30, 60, 20, EntryScale::InvSqrtRows.std_for(30), 7).unwrap();
    let rows = condition_failure_study(&spec, 3, &betas, &StudyOptions::default()).unwrap();
    let ordered = (0..20)
        .filter(|&i| rows.windows(2).all(|w| w[1].per_matrix[i] <= w[0].per_matrix[i]))
        .count();
    assert!(ordered >= 18, "only {ordered}/20 matrices ordered");
}

#[test]
fn noiseless_recovery_has_zero_support_error() {
    let ensemble = EnsembleSpec::gaussian(30, 40, 4, EntryScale::InvSqrtRows.std_for(30), 3).unwrap();
    let signal = SignalSpec {
        n: 40,
        sparsity: 2,
        magnitude_floor: 1.5,
        magnitude_ceiling: 3.0,
        noise_linf: 0.0,
        noise_mode: NoiseMode::Exact,
    };
    let alpha = GeometricGrid::new(1e-4, 2.0, 12).unwrap().values();
    let beta = GeometricGrid::new(0.1, 3.0, 4).unwrap().values();
    let mut cfg = RecoveryConfig::new(ensemble, signal, alpha, beta);
    cfg.solver.outer_iters = 100;
    cfg.single_iters = 20_000;
    let report = grid_search_recovery(&cfg).unwrap();
    for t in &report.trials {
        assert_eq!(t.sd, 0, "{t:?}");
        assert!(t.ae < 0.05, "{t:?}");
    }
}

proptest! {
    #[test]
    fn symmetric_difference_zero_iff_equal(
        (n, a, b) in (1usize..30).prop_flat_map(|n| {
            let all: Vec<usize> = (0..n).collect();
            (Just(n), prop::sample::subsequence(all.clone(), 0..=n), prop::sample::subsequence(all, 0..=n))
        })
    ) {
        let x = IndexSet::new(a, n).unwrap();
        let y = IndexSet::new(b, n).unwrap();
        let sd = x.symmetric_difference_len(&y);
        prop_assert_eq!(sd == 0, x == y);
        prop_assert_eq!(sd, y.symmetric_difference_len(&x));
        prop_assert_eq!(x.symmetric_difference_len(&x.complement()), n);
    }
}
