//! Randomized invariants of the dynamics, measurement, and estimation layers.

use proptest::prelude::*;

use starksense::basis::enumerate_basis;
use starksense::bayes::{posterior, PosteriorGrid};
use starksense::dynamics::{evolve, initial_state, outcome_distribution, site_populations};
use starksense::hamiltonian::{build_hamiltonian, ModelParams};
use starksense::measurement::{
    apply_readout_error_bitstrings, correct_readout_bitstrings, sample_counts, seeded_rng,
    CountVector, ReadoutFidelities,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evolution_preserves_norm_and_distribution(
        l in 2u32..=6,
        k in 1u32..=2,
        h in -30.0f64..=0.0,
        t in 0.0f64..=350.0,
    ) {
        let k = k.min(l);
        let basis = enumerate_basis(l, k).unwrap();
        let pattern = basis.pattern(basis.dim() / 2).clone();
        let ham = build_hamiltonian(&ModelParams::new(l, -8.0, h), &basis).unwrap();
        let psi0 = initial_state(&basis, &pattern).unwrap();
        let psi = evolve(&ham, &psi0, t).unwrap();
        let norm: f64 = psi.amplitudes.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-10);
        let dist = outcome_distribution(&psi);
        let total: f64 = dist.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let pops = site_populations(&dist);
        let occupancy: f64 = pops.iter().sum();
        prop_assert!((occupancy - k as f64).abs() < 1e-9);
        prop_assert!(pops.iter().all(|&p| (-1e-12..=1.0 + 1e-12).contains(&p)));
    }

    #[test]
    fn readout_channel_round_trips(
        seed in 0u64..1_000_000,
        f0a in 0.9f64..=0.99,
        f1a in 0.85f64..=0.95,
        f0b in 0.9f64..=0.99,
        f1b in 0.85f64..=0.95,
        f0c in 0.9f64..=0.99,
        f1c in 0.85f64..=0.95,
    ) {
        let fid = ReadoutFidelities::new(vec![f0a, f0b, f0c], vec![f1a, f1b, f1c]).unwrap();
        let mut rng = seeded_rng(seed, 0);
        let raw: Vec<f64> = (0..8).map(|_| rand::Rng::gen_range(&mut rng, 0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let garbled = apply_readout_error_bitstrings(&p, &fid).unwrap();
        prop_assert!((garbled.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let restored = correct_readout_bitstrings(&garbled, &fid).unwrap();
        for (a, b) in p.iter().zip(&restored) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_counts_total_and_posterior_normalized(
        seed in 0u64..1_000_000,
        shots in 1u64..=5000,
    ) {
        let mut rng = seeded_rng(seed, 1);
        let raw: Vec<f64> = (0..9).map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0) + 1e-6).collect();
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let counts = sample_counts(&p, shots, &mut rng).unwrap();
        prop_assert_eq!(counts.counts.iter().sum::<u64>(), shots);
        prop_assert_eq!(counts.total, shots);

        let prior = PosteriorGrid::uniform(-30.0, 0.0, 0.5).unwrap();
        // arbitrary smooth log-likelihood over the grid
        let loglik: Vec<f64> = prior
            .h_grid
            .iter()
            .map(|&h| -(h + 13.0) * (h + 13.0) / 7.0)
            .collect();
        let post = posterior(&loglik, &prior).unwrap();
        prop_assert!((post.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(post.mass.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn count_vector_mean_tracks_distribution(seed in 0u64..100_000) {
        let p = [0.5, 0.3, 0.2];
        let mut rng = seeded_rng(seed, 7);
        let counts: CountVector = sample_counts(&p, 20_000, &mut rng).unwrap();
        for (c, &pi) in counts.counts.iter().zip(&p) {
            let freq = *c as f64 / 20_000.0;
            // 6 sigma of a binomial proportion
            let sigma = (pi * (1.0 - pi) / 20_000.0).sqrt();
            prop_assert!((freq - pi).abs() < 6.0 * sigma + 1e-9);
        }
    }
}
