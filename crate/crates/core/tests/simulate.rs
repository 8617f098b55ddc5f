use twinzyg::simulate::{
    generate_dataset, generate_pair, generate_pair_from, study_preset, GaussianSource, SharingMode, SimulationConfig, Zygosity,
};
use twinzyg::PairedDataset;

const PAIRS: usize = 10_000;

fn big(study: u8, sharing: SharingMode, seed: u64) -> SimulationConfig {
    SimulationConfig { pairs_mz: PAIRS, pairs_dz: PAIRS, sharing, seed, ..study_preset(study).unwrap() }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Per-region (mean, variance) of the MZ and DZ correlation features.
fn group_stats(data: &PairedDataset, region: usize) -> [(f64, f64); 2] {
    let pick = |label: u8| -> Vec<f64> {
        data.features().iter().zip(data.labels()).filter(|(_, &t)| t == label).map(|(x, _)| x[region]).collect()
    };
    [mean_var(&pick(1)), mean_var(&pick(0))]
}

#[test]
fn presets() {
    for (s, h) in [(1, vec![1.0; 5]), (2, vec![2.0; 5]), (3, vec![3.0, 2.5, 2.0, 1.5, 1.0])] {
        let c = study_preset(s).unwrap();
        assert_eq!(c.dz_multipliers, h);
        assert_eq!(c.regions(), 5);
        assert_eq!(c.sigma_ind, 0.25);
        assert_eq!((c.pairs_mz, c.pairs_dz), (50, 50));
        assert_eq!(c.ground_truth[2], vec![1.0, 0.5, 1.0 / 3.0, 0.25, 0.2]);
    }
    assert!(study_preset(0).is_err());
}

#[test]
fn marginal_moments() {
    for sharing in [SharingMode::Shared, SharingMode::Independent] {
        let cfg = big(3, sharing, 21);
        for zyg in [Zygosity::Monozygotic, Zygosity::Dizygotic] {
            let pairs: Vec<_> = (0..PAIRS as u64).map(|i| generate_pair(&cfg, zyg, i)).collect();
            for k in [0, 4] {
                let h = if zyg == Zygosity::Dizygotic { cfg.dz_multipliers[k] } else { 1.0 };
                let want_var = (h * h + 1.0) * cfg.sigma_ind.powi(2);
                for l in [0, 3] {
                    let v: Vec<f64> = pairs.iter().map(|p| p.twin_a[k][l]).collect();
                    let (m, var) = mean_var(&v);
                    let c = cfg.ground_truth[k][l];
                    assert!((m - c).abs() < 4.0 * (want_var / PAIRS as f64).sqrt(), "{sharing:?} {zyg:?} mean {m} vs {c}");
                    assert!((var / want_var - 1.0).abs() < 0.05, "{sharing:?} {zyg:?} var {var} vs {want_var}");
                }
            }
        }
    }
}

#[test]
fn study_two_mz_deviation_variance() {
    let cfg = big(2, SharingMode::default(), 22);
    let devs: Vec<f64> = (0..PAIRS as u64)
        .flat_map(|i| {
            let p = generate_pair(&cfg, Zygosity::Monozygotic, i);
            let c = cfg.ground_truth[1].clone();
            p.twin_b[1].iter().zip(c).map(|(v, c)| v - c).collect::<Vec<_>>()
        })
        .collect();
    let (_, var) = mean_var(&devs);
    let want = 2.0 * cfg.sigma_ind.powi(2);
    assert!((var / want - 1.0).abs() < 0.05);
}

struct Zeros;
impl GaussianSource for Zeros {
    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

#[test]
fn shared_twin_term_alone_gives_identical_twins() {
    let cfg = SimulationConfig { sharing: SharingMode::Shared, ..study_preset(3).unwrap() };
    let mut alpha = twinzyg::seed::stream(1, "test", 0);
    let p = generate_pair_from(&cfg, Zygosity::Monozygotic, &mut alpha, &mut Zeros);
    assert_eq!(p.twin_a, p.twin_b);
}

#[test]
fn study_one_groups_match() {
    for sharing in [SharingMode::Shared, SharingMode::Independent] {
        let data = generate_dataset(&big(1, sharing, 23)).unwrap();
        for k in 0..5 {
            let [mz, dz] = group_stats(&data, k);
            assert!((mz.0 - dz.0).abs() < 0.02, "{sharing:?} region {k}: {} vs {}", mz.0, dz.0);
        }
    }
}

#[test]
fn study_three_separation() {
    for sharing in [SharingMode::Shared, SharingMode::Independent] {
        let data = generate_dataset(&big(3, sharing, 24)).unwrap();
        let gaps: Vec<(f64, f64)> = (0..5)
            .map(|k| {
                let [mz, dz] = group_stats(&data, k);
                let se = (mz.1 / PAIRS as f64 + dz.1 / PAIRS as f64).sqrt();
                ((mz.0 - dz.0).abs(), se)
            })
            .collect();
        assert!(gaps[0].0 > 5.0 * gaps[0].1, "{sharing:?} region 1 gap {:?}", gaps[0]);
        assert!(gaps[4].0 < 4.0 * gaps[4].1, "{sharing:?} region 5 gap {:?}", gaps[4]);
        for w in gaps.windows(2) {
            assert!(w[1].0 <= w[0].0, "{sharing:?} gaps not monotone: {gaps:?}");
        }
    }
}

#[test]
fn independent_mode_puts_mz_above_dz() {
    let data = generate_dataset(&big(2, SharingMode::Independent, 25)).unwrap();
    for k in 0..5 {
        let [mz, dz] = group_stats(&data, k);
        assert!(mz.0 > dz.0 + 0.1);
    }
}

#[test]
fn seeds_are_order_independent() {
    let cfg = SimulationConfig { seed: 9, ..study_preset(2).unwrap() };
    let data = generate_dataset(&cfg).unwrap();
    let p7 = generate_pair(&cfg, Zygosity::Monozygotic, 7);
    let direct = twinzyg::simulate::pair_features(&p7).unwrap();
    assert_eq!(data.row(7).0, direct.as_slice());
    assert!(data.features().iter().flatten().all(|r| (-1.0..=1.0).contains(r)));
}
