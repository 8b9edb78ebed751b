//! Invariants across module boundaries, checked on random parameters.

use jot_core::featmat::FeatureMatrix;
use jot_core::levy::{Dickman, LevyDensity, TruncationRule};
use jot_core::measures::{sample_jot, thin, ScalingLaw};
use jot_core::pkbridge::{py_block_count_pmf, py_sample};
use jot_core::special::RngStream;
use jot_core::urns::{poisson_bfry_pmf, poisson_bfry_tail, CountUrn, UrnModel, UrnState};
use proptest::prelude::*;

fn scaling() -> impl Strategy<Value = ScalingLaw> {
    prop_oneof![
        Just(ScalingLaw::LargestJump),
        (0.05f64..3.0).prop_map(|a| ScalingLaw::Fixed { a }),
        (0.5f64..4.0, 0.5f64..4.0).prop_map(|(shape, rate)| ScalingLaw::Gamma { shape, rate }),
    ]
}

fn check_matrix(z: &FeatureMatrix, n: usize) -> Result<(), TestCaseError> {
    prop_assert_eq!(z.n_rows(), n);
    for col in z.columns() {
        prop_assert!(!col.rows.is_empty());
        prop_assert!(col.rows.windows(2).all(|r| r[0] < r[1]));
        prop_assert!(col.rows.iter().all(|&r| (r as usize) < n));
    }
    let canon = z.canonicalize();
    prop_assert_eq!(canon.canonicalize().to_dense(), canon.to_dense());
    prop_assert_eq!(canon.stats().sorted_counts(), z.stats().sorted_counts());
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn jot_weights_are_ranked_unit_and_seeded(seed in any::<u64>(), alpha in 0.1f64..0.9, law in scaling()) {
        let lv = LevyDensity::stable(1.0, alpha).unwrap();
        let trunc = TruncationRule::relative(1e-4);
        let a = sample_jot(&lv, &law, &trunc, &mut RngStream::new(seed, 0)).unwrap();
        let b = sample_jot(&lv, &law, &trunc, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(&a.weights, &b.weights);
        prop_assert!(a.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
        prop_assert!(a.weights.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(a.truncation.tail_mass_bound >= 0.0);
    }

    #[test]
    fn thinning_keeps_a_subset(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let lv = LevyDensity::scale_invariant(2.0).unwrap();
        let mut rng = RngStream::new(seed, 1);
        let m = sample_jot(&lv, &ScalingLaw::LargestJump, &TruncationRule::relative(1e-3), &mut rng).unwrap();
        let t = thin(&m, |_| p, &mut rng).unwrap();
        prop_assert!(t.len() <= m.len());
        for (w, id) in t.weights.iter().zip(&t.atoms) {
            let i = m.atoms.iter().position(|x| x == id).unwrap();
            prop_assert_eq!(*w, m.weights[i]);
        }
        let all = thin(&m, |_| 1.0, &mut rng).unwrap();
        prop_assert_eq!(all.weights, m.weights);
    }

    #[test]
    fn urn_matrices_are_well_formed(seed in any::<u64>(), n in 1usize..25, c in 0.2f64..4.0, theta in 0.2f64..4.0) {
        let mut rng = RngStream::new(seed, 2);
        let z = UrnState::new(UrnModel::Ibp { c, theta }).unwrap().run(n, &mut rng).unwrap();
        check_matrix(&z, n)?;
        let z = UrnState::new(UrnModel::StableJot { alpha: 0.5, pstar: ScalingLaw::LargestJump })
            .unwrap()
            .run(n, &mut rng)
            .unwrap();
        check_matrix(&z, n)?;
    }

    #[test]
    fn feature_count_never_decreases(seed in any::<u64>(), sigma in 0.1f64..0.9) {
        let lv = LevyDensity::stable_beta(0.3, 1.0, 0.3).unwrap();
        let mut urn = CountUrn::new(UrnModel::Bfry { sigma, lv }).unwrap();
        let mut rng = RngStream::new(seed, 3);
        let mut last = 0;
        for _ in 0..10 {
            urn.step(&mut rng).unwrap();
            prop_assert!(urn.k_n() >= last);
            last = urn.k_n();
        }
    }

    #[test]
    fn py_partitions_cover_every_object(seed in any::<u64>(), alpha in 0.0f64..0.95, theta in 0.1f64..5.0, n in 1usize..40) {
        let p = py_sample(alpha, theta, n, &mut RngStream::new(seed, 4)).unwrap();
        let mut seen: Vec<u32> = p.blocks.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n as u32).collect::<Vec<_>>());
        let pmf = py_block_count_pmf(alpha, theta, n);
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(pmf[p.blocks.len()] > 0.0);
    }

    #[test]
    fn poisson_bfry_mass_is_one(sigma in 0.1f64..0.9, tau in 0.1f64..5.0) {
        let head: f64 = (0..=200).map(|j| poisson_bfry_pmf(sigma, tau, j).unwrap()).sum();
        let tail = poisson_bfry_tail(sigma, tau, 200).unwrap();
        prop_assert!((head + tail - 1.0).abs() < 1e-8, "{} + {}", head, tail);
    }

    #[test]
    fn dickman_cdf_is_monotone(c in 0.2f64..3.0, t in 0.0f64..6.0, dt in 0.0f64..1.0) {
        let d = Dickman::new(c).unwrap();
        prop_assert!(d.cdf(t) <= d.cdf(t + dt) + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d.cdf(t)));
        prop_assert!(d.pdf(t).unwrap() >= 0.0);
    }
}
