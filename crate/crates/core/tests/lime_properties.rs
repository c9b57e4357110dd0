use nalgebra::DMatrix;
use proptest::prelude::*;

use gplime_core::lime::{
    explain_all, explain_instance, fit_local_surrogate, global_scores, perturb_samples, proximity_weights,
    select_features, FnModel, LimeConfig, LocalExplanation, Perturbation, RankBy, SelectionStrategy,
};

fn explanation(instance: usize, coefficients: Vec<f64>, r2: f64) -> LocalExplanation {
    LocalExplanation {
        instance,
        intercept: 0.0,
        coefficients,
        r2,
        kernel_width: 1.0,
        samples: 100,
        seed: 0,
    }
}

fn design(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let cfg = LimeConfig {
        samples: n,
        seed,
        ..Default::default()
    };
    perturb_samples(&vec![0.0; d], &cfg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn huge_width_matches_unweighted_fit(seed in 0u64..1000, lambda in 0.0f64..0.2) {
        let z = design(80, 3, seed);
        let y: Vec<f64> = (0..80).map(|i| 2.0 * z[(i, 0)] - z[(i, 1)] * z[(i, 2)] + 0.3).collect();
        let w = proximity_weights(&[0.0, 0.0, 0.0], &z, 1e6);
        let weighted = fit_local_surrogate(&z, &y, &w, lambda).unwrap();
        let plain = fit_local_surrogate(&z, &y, &[1.0; 80], lambda).unwrap();
        prop_assert!((weighted.intercept - plain.intercept).abs() < 1e-6);
        for (a, b) in weighted.coefficients.iter().zip(&plain.coefficients) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_are_in_unit_interval_and_one_at_instance(
        x in proptest::collection::vec(-3.0f64..3.0, 1..6),
        width in 0.1f64..5.0,
        seed in 0u64..100,
    ) {
        let cfg = LimeConfig { samples: 30, seed, ..Default::default() };
        let z = perturb_samples(&x, &cfg);
        let w = proximity_weights(&x, &z, width);
        prop_assert_eq!(w[0], 1.0);
        prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn uniform_perturbations_stay_in_band(x in proptest::collection::vec(-3.0f64..3.0, 1..5), scale in 0.1f64..2.0) {
        let cfg = LimeConfig {
            samples: 50,
            distribution: Perturbation::Uniform,
            perturbation_scale: scale,
            ..Default::default()
        };
        let z = perturb_samples(&x, &cfg);
        let h = scale * 3f64.sqrt();
        for i in 0..z.nrows() {
            for (j, &xj) in x.iter().enumerate() {
                prop_assert!((z[(i, j)] - xj).abs() <= h);
            }
        }
    }

    #[test]
    fn actual_mean_is_bounded_by_mean_abs(
        coefs in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 1..12),
        r2 in proptest::collection::vec(-0.5f64..1.0, 12),
    ) {
        let ex: Vec<LocalExplanation> =
            coefs.into_iter().enumerate().map(|(k, c)| explanation(k, c, r2[k])).collect();
        let rep = global_scores(&ex, RankBy::MeanAbs).unwrap();
        let mut ranks: Vec<usize> = rep.features.iter().map(|f| f.rank).collect();
        ranks.sort_unstable();
        prop_assert_eq!(ranks, vec![1, 2, 3, 4]);
        for f in &rep.features {
            prop_assert!(f.actual_mean.abs() <= f.mean_abs + 1e-12);
            prop_assert!((0.0..=1.0).contains(&f.support_freq));
            prop_assert!(f.weighted_mean >= 0.0);
        }
    }
}

#[test]
fn explanations_do_not_depend_on_thread_count() {
    let model = FnModel {
        d: 3,
        f: |r: &[f64]| r[0].sin() + r[1] * r[2],
    };
    let x = DMatrix::from_fn(12, 3, |i, j| (i * 3 + j) as f64 * 0.1 - 1.0);
    let cfg = LimeConfig {
        samples: 200,
        ..Default::default()
    };
    let par = explain_all(&model, &x, &cfg).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let seq = one.install(|| explain_all(&model, &x, &cfg).unwrap());
    assert_eq!(par, seq);
    let row: Vec<f64> = x.row(5).iter().copied().collect();
    let single = explain_instance(&model, &row, &LimeConfig { seed: cfg.seed + 5, ..cfg.clone() }, 5).unwrap();
    assert_eq!(single, par[5]);
}

#[test]
fn high_threshold_selects_every_nonzero_feature() {
    let ex = vec![
        explanation(0, vec![1.0, 0.0, -2.0, 0.5, 0.0], 0.9),
        explanation(1, vec![1.5, 0.0, -1.0, 0.7, 0.0], 0.8),
    ];
    let rep = global_scores(&ex, RankBy::WeightedMean).unwrap();
    let sel = select_features(&rep, &ex, &SelectionStrategy::Elbow { threshold: 0.999 }).unwrap();
    let mut got = sel.features.clone();
    got.sort_unstable();
    assert_eq!(got, vec![0, 2, 3]);
}

#[test]
fn planted_pair_is_selected_from_six() {
    let model = FnModel {
        d: 6,
        f: |r: &[f64]| 3.0 * r[1] - 2.0 * r[4],
    };
    let x = DMatrix::from_fn(20, 6, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
    let cfg = LimeConfig {
        samples: 400,
        ..Default::default()
    };
    let ex = explain_all(&model, &x, &cfg).unwrap();
    let rep = global_scores(&ex, RankBy::WeightedMean).unwrap();
    let sel = select_features(&rep, &ex, &SelectionStrategy::Elbow { threshold: 0.9 }).unwrap();
    assert_eq!(sel.features, vec![1, 4]);
    let strategy: SelectionStrategy = serde_json::from_str(r#"{"strategy":"bootstrap"}"#).unwrap();
    let boot = select_features(&rep, &ex, &strategy).unwrap();
    let mut got = boot.features.clone();
    got.sort_unstable();
    assert_eq!(got, vec![1, 4]);
    let freq = boot.frequencies.unwrap();
    assert_eq!((freq[1], freq[4]), (1.0, 1.0));
}
