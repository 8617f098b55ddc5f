mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twinzyg::pairing::{CoefficientVector, PairingError, TwinCorrelationVector, FISHER_EPS};
use twinzyg::{csr_correlation, fisher_inv, fisher_z, pair_to_features, region_average, CsrCoefficients, Parcellation};

fn atanh(r: f64) -> f64 {
    0.5 * ((1.0 + r) / (1.0 - r)).ln()
}

fn cv(v: &[f64]) -> CoefficientVector {
    CoefficientVector::new(v.to_vec())
}

#[test]
fn coefficient_correlation_equals_curve_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let k = 15;
    for _ in 0..10 {
        let c =
            DMatrix::from_fn(k + 1, 2, |l, _| if l == 0 { rng.random_range(-1.0..1.0) } else { rng.random_range(-1.0..1.0) / l as f64 });
        let csr = CsrCoefficients::new(c).unwrap();
        let rho = csr_correlation(&CoefficientVector::from_csr(&csr, 0), &CoefficientVector::from_csr(&csr, 1)).unwrap();
        let oracle = common::quadrature_pearson(|t| csr.evaluate(0, t), |t| csr.evaluate(1, t), 100_000);
        assert!((rho - oracle).abs() < 1e-6, "{rho} vs {oracle}");
    }
}

#[test]
fn fisher_examples() {
    assert_eq!(fisher_z(0.0).unwrap(), 0.0);
    assert!((fisher_z(0.5).unwrap() - 0.549_306_14).abs() < 1e-8);
    assert!((fisher_inv(1.0) - 0.761_59).abs() < 1e-5);
    assert!(fisher_z(f64::NAN).is_err());
    let zmax = fisher_z(1.0).unwrap();
    assert!(zmax.is_finite());
    assert!((zmax - atanh(1.0 - FISHER_EPS)).abs() < 1e-6);
    assert_eq!(fisher_z(-1.0).unwrap(), -zmax);
}

#[test]
fn region_average_examples() {
    let parc = Parcellation::new(vec![1, 1, 2, 2]).unwrap();
    let out = region_average(&[0.4, 0.4, 0.5, -0.5], &parc).unwrap();
    assert!((out.0[0] - 0.4).abs() < 1e-12);
    assert!(out.0[1].abs() < 1e-15);

    let parc = Parcellation::new(vec![1, 1]).unwrap();
    let out = region_average(&[0.2, 0.8], &parc).unwrap();
    let want = ((atanh(0.2) + atanh(0.8)) / 2.0).tanh();
    assert!((out.0[0] - want).abs() < 1e-12);
    assert!((out.0[0] - 0.572_122_461_732).abs() < 1e-9);

    assert!(matches!(region_average(&[0.1], &parc), Err(PairingError::LengthMismatch { .. })));
    assert!(Parcellation::new(vec![1, 3]).is_err());
    assert!(Parcellation::new(vec![0, 1]).is_err());
}

fn random_csr(rng: &mut ChaCha8Rng, k: usize, n: usize) -> CsrCoefficients {
    CsrCoefficients::new(DMatrix::from_fn(k + 1, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
}

#[test]
fn identical_subjects_give_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_csr(&mut rng, 8, 6);
    let parc = Parcellation::new(vec![1, 2, 3, 1, 2, 3]).unwrap();
    let f = pair_to_features(&a, &a, &parc).unwrap();
    assert!(f.0.iter().all(|&r| r <= 1.0 && 1.0 - r <= FISHER_EPS));
}

#[test]
fn singleton_regions_reproduce_voxel_correlations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (a, b) = (random_csr(&mut rng, 8, 5), random_csr(&mut rng, 8, 5));
    let f = pair_to_features(&a, &b, &Parcellation::singletons(5)).unwrap();
    for v in 0..5 {
        let r = csr_correlation(&CoefficientVector::from_csr(&a, v), &CoefficientVector::from_csr(&b, v)).unwrap();
        assert!((f.0[v] - r).abs() < 1e-12);
    }
}

#[test]
fn two_regions_three_voxels_by_hand() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (a, b) = (random_csr(&mut rng, 6, 6), random_csr(&mut rng, 6, 6));
    let labels = vec![2, 1, 1, 2, 1, 2];
    let parc = Parcellation::new(labels.clone()).unwrap();
    let f = pair_to_features(&a, &b, &parc).unwrap();

    let mut sums = [0.0; 2];
    for v in 0..6 {
        let x: Vec<f64> = (1..=6).map(|l| a.matrix()[(l, v)]).collect();
        let y: Vec<f64> = (1..=6).map(|l| b.matrix()[(l, v)]).collect();
        let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
        let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
        sums[labels[v] - 1] += atanh(dot / (nx * ny));
    }
    for k in 0..2 {
        assert!((f.0[k] - (sums[k] / 3.0).tanh()).abs() < 1e-12);
    }
}

#[test]
fn zero_signal_is_reported() {
    let a = CsrCoefficients::new(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
    let b = CsrCoefficients::new(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])).unwrap();
    let err = pair_to_features(&a, &b, &Parcellation::singletons(1)).unwrap_err();
    assert!(matches!(err, PairingError::Voxel { voxel: 0, .. }));
    assert_eq!(csr_correlation(&cv(&[0.0, 0.0]), &cv(&[1.0, 0.0])), Err(PairingError::ZeroNorm));
}

proptest! {
    #[test]
    fn correlation_symmetric_and_scale_invariant(
        a in proptest::collection::vec(-10.0f64..10.0, 6),
        b in proptest::collection::vec(-10.0f64..10.0, 6),
        s in 0.01f64..100.0,
        t in 0.01f64..100.0,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let r = csr_correlation(&cv(&a), &cv(&b)).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((r - csr_correlation(&cv(&b), &cv(&a)).unwrap()).abs() < 1e-12);
        let scaled_a: Vec<f64> = a.iter().map(|v| v * s).collect();
        let scaled_b: Vec<f64> = b.iter().map(|v| v * t).collect();
        prop_assert!((r - csr_correlation(&cv(&scaled_a), &cv(&scaled_b)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fisher_round_trip(rho in -0.999f64..=0.999) {
        prop_assert!((fisher_inv(fisher_z(rho).unwrap()) - rho).abs() < 1e-9);
        prop_assert_eq!(fisher_z(-rho).unwrap(), -fisher_z(rho).unwrap());
    }

    #[test]
    fn region_average_permutation_invariant(
        vals in proptest::collection::vec(-0.99f64..0.99, 2..12),
        rot in 0usize..12,
    ) {
        let parc = Parcellation::new(vec![1; vals.len()]).unwrap();
        let mut shuffled = vals.clone();
        shuffled.rotate_left(rot % vals.len());
        let a: TwinCorrelationVector = region_average(&vals, &parc).unwrap();
        let b = region_average(&shuffled, &parc).unwrap();
        prop_assert!((a.0[0] - b.0[0]).abs() < 1e-12);
        let c = vals[0];
        let constant = region_average(&vec![c; vals.len()], &parc).unwrap();
        prop_assert!((constant.0[0] - c).abs() < 1e-12);
    }
}
