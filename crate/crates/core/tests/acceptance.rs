//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line (visible with --nocapture; the harness result line
//! mirrors it).

mod common;

use clap::Parser;
use starksense::analysis::{
    avg_cfi, fit_power_law, rolling_exponent, transition_scan, ScalingSeries,
};
use starksense::basis::{enumerate_basis, OccupationPattern};
use starksense::bayes::{
    combine_posteriors, grid_points, posterior, trial_statistics, LikelihoodModel, ModelSource,
    PosteriorGrid, ProbeSpec,
};
use starksense::cli::{self, Cli};
use starksense::dynamics::{evolve, evolved_state_derivative, initial_state};
use starksense::fisher::{cfi_at, cfi_empirical, qfi_at};
use starksense::hamiltonian::{build_hamiltonian, dh_hamiltonian, ModelParams};
use starksense::lindblad::{
    build_sector_basis, outcome_distribution_open, DecoherenceParams, DensityMatrix,
    LindbladPropagator,
};
use starksense::measurement::{
    apply_readout_error_bitstrings, correct_readout_bitstrings, sample_counts, seeded_rng,
    ReadoutFidelities,
};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Exact computational-basis CFI of the L=9 single-excitation probe on a time
/// grid, then K-point sliding window averages.
fn windowed_closed_cfi(gradient_mhz: f64, times: &[f64], k: usize) -> ScalingSeries {
    let basis = enumerate_basis(9, 1).unwrap();
    let ham = build_hamiltonian(&ModelParams::new(9, -8.0, gradient_mhz), &basis).unwrap();
    let dh = dh_hamiltonian(&basis);
    let psi0 = initial_state(&basis, &OccupationPattern::new(vec![5])).unwrap();
    let cfi: Vec<f64> = times
        .iter()
        .map(|&t| cfi_at(&ham, &dh, &psi0, t).unwrap())
        .collect();
    windowed(times, &cfi, k)
}

fn windowed(times: &[f64], cfi: &[f64], k: usize) -> ScalingSeries {
    let mut t_avg = Vec::new();
    let mut f_avg = Vec::new();
    for i in 0..=times.len() - k {
        let (t, f) = avg_cfi(&times[i..i + k], &cfi[i..i + k]).unwrap();
        t_avg.push(t);
        f_avg.push(f);
    }
    ScalingSeries::new(t_avg, f_avg).unwrap()
}

#[test]
fn criterion_01_closed_system_scaling_exponents() {
    let times: Vec<f64> = (0..=60).map(|i| 50.0 + 5.0 * i as f64).collect();
    let beta5 = fit_power_law(&windowed_closed_cfi(-30.0, &times, 5))
        .unwrap()
        .exponent;
    let beta7 = fit_power_law(&windowed_closed_cfi(-30.0, &times, 7))
        .unwrap()
        .exponent;
    report(
        "1 (closed-system scaling)",
        (1.94..=2.04).contains(&beta5) && (1.96..=2.06).contains(&beta7),
        &format!(
            "beta_K5 = {beta5:.4} (band [1.94, 2.04]), beta_K7 = {beta7:.4} (band [1.96, 2.06])"
        ),
    );
}

#[test]
fn criterion_02_decoherence_degrades_scaling() {
    let probe = ProbeSpec::single_excitation_center(9, -8.0);
    let dec = DecoherenceParams::chain_average();
    let times: Vec<f64> = (0..=300).map(|i| 50.0 + 5.0 * i as f64).collect(); // out to 1.55 us
    let open_cfi = cli::open_cfi_series(&probe, -30.0, &dec, &times, 0.1).unwrap();
    let series = windowed(&times, &open_cfi, 5);
    let rolling = rolling_exponent(&series, 200.0).unwrap();
    // disjoint 200 ns windows: every 40th start on the 5 ns grid
    let betas: Vec<f64> = rolling.iter().step_by(40).map(|&(_, b)| b).collect();
    let monotone = betas.windows(2).all(|w| w[1] <= w[0] + 0.05);
    let sublinear = betas.last().is_some_and(|&b| b < 1.0);
    report(
        "2 (decoherence-induced degradation)",
        betas.len() >= 5 && monotone && sublinear,
        &format!("rolling beta over 200 ns windows: {betas:.3?}"),
    );
}

#[test]
fn criterion_03_transition_points() {
    let grid = grid_points(-15.0, -1.0, 1.0).unwrap();
    let single = transition_scan(&[9], 1, -8.0, &grid, 3000.0)
        .unwrap()
        .curves[0]
        .h_c_mhz;
    let double = transition_scan(&[9], 2, -8.0, &grid, 3000.0)
        .unwrap()
        .curves[0]
        .h_c_mhz;
    report(
        "3 (transition points)",
        (single + 6.0).abs() <= 1.0 && (double + 5.0).abs() <= 1.0,
        &format!(
            "h_c(k=1) = {single} MHz (expect -6 +/- 1), h_c(k=2) = {double} MHz (expect -5 +/- 1)"
        ),
    );
}

#[test]
fn criterion_04_cramer_rao_ordering() {
    let probe = ProbeSpec::single_excitation_center(9, -8.0);
    let truth = -30.0;
    // grid brackets the truth so the error distribution is not boundary-clipped
    let (g_min, g_max, g_step) = (-40.0, -20.0, 0.02);
    let h_grid = grid_points(g_min, g_max, g_step).unwrap();
    let prior = PosteriorGrid::uniform(g_min, g_max, g_step).unwrap();
    let basis = enumerate_basis(9, 1).unwrap();
    let ham = build_hamiltonian(&ModelParams::new(9, -8.0, truth), &basis).unwrap();
    let dh = dh_hamiltonian(&basis);
    let psi0 = initial_state(&basis, &OccupationPattern::new(vec![5])).unwrap();

    let reps: u64 = 200;
    let mut detail = String::new();
    let mut pass = true;
    for (k, shots_total, starts) in [
        (5usize, 500u64, vec![50.0, 100.0, 150.0, 200.0, 250.0]),
        (7, 700, vec![50.0, 100.0, 150.0, 200.0]),
    ] {
        for (si, &t1) in starts.iter().enumerate() {
            let times: Vec<f64> = (0..k).map(|i| t1 + 5.0 * i as f64).collect();
            let f_avg = times
                .iter()
                .map(|&t| cfi_at(&ham, &dh, &psi0, t).unwrap())
                .sum::<f64>()
                / k as f64;
            let model =
                LikelihoodModel::build(&probe, &times, &h_grid, &ModelSource::ExactClosed).unwrap();
            let truths: Vec<Vec<f64>> = times
                .iter()
                .map(|&t| probe.closed_distribution(truth, t).unwrap())
                .collect();
            let stats = trial_statistics(
                &model,
                &truths,
                &vec![shots_total / k as u64; k],
                &prior,
                reps,
                9000 + (k * 100 + si) as u64,
            )
            .unwrap();
            // mean squared error about the truth
            let mse = stats
                .estimates
                .iter()
                .map(|e| (e - truth) * (e - truth))
                .sum::<f64>()
                / reps as f64;
            let inv = 1.0 / mse;
            let se_inv = inv * (2.0 / (reps as f64 - 1.0)).sqrt();
            let bound = shots_total as f64 * f_avg;
            let ok = inv <= bound + 2.0 * se_inv;
            pass &= ok;
            detail.push_str(&format!(
                "K={k} t_avg={:.0}: 1/d2h = {inv:.1} vs M*F_avg = {bound:.1} (+2SE {:.1}); ",
                times.iter().sum::<f64>() / k as f64,
                2.0 * se_inv
            ));
        }
    }
    report("4 (Cramer-Rao ordering)", pass, &detail);
}

#[test]
fn criterion_05_cfi_never_exceeds_qfi() {
    let mut worst = f64::NEG_INFINITY;
    for k in [1u32, 2] {
        let basis = enumerate_basis(9, k).unwrap();
        let dh = dh_hamiltonian(&basis);
        let start = if k == 1 {
            OccupationPattern::new(vec![5])
        } else {
            OccupationPattern::new(vec![3, 7])
        };
        let psi0 = initial_state(&basis, &start).unwrap();
        for h_int in -30..=0 {
            let ham = build_hamiltonian(&ModelParams::new(9, -8.0, h_int as f64), &basis).unwrap();
            for t_int in (0..=350).step_by(10) {
                let t = t_int as f64;
                let q = qfi_at(&ham, &dh, &psi0, t).unwrap();
                let c = cfi_at(&ham, &dh, &psi0, t).unwrap();
                worst = worst.max(c - q);
            }
        }
    }
    report(
        "5 (CFI <= QFI)",
        worst <= 1e-8,
        &format!("worst CFI - QFI over the grid = {worst:.2e} MHz^-2 (limit 1e-8)"),
    );
}

#[test]
fn criterion_06_multi_time_posterior_unimodality() {
    let probe = ProbeSpec::single_excitation_center(9, -8.0);
    let times = [80.0, 100.0, 140.0];
    let h_grid = grid_points(-30.0, 0.0, 0.1).unwrap();
    let prior = PosteriorGrid::uniform(-30.0, 0.0, 0.1).unwrap();
    let model = LikelihoodModel::build(&probe, &times, &h_grid, &ModelSource::ExactClosed).unwrap();
    let truths: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| probe.closed_distribution(-20.0, t).unwrap())
        .collect();

    let trials = 200;
    let mut combined_unimodal = 0;
    let mut single_total = 0;
    let mut single_multimodal = 0;
    for r in 0..trials {
        let mut rng = seeded_rng(606, r);
        let mut posts = Vec::new();
        for (i, truth) in truths.iter().enumerate() {
            let counts = sample_counts(truth, 20, &mut rng).unwrap();
            let loglik = model.log_likelihood(&counts, i).unwrap();
            posts.push(posterior(&loglik, &prior).unwrap());
        }
        if combine_posteriors(&posts, &prior)
            .unwrap()
            .local_maxima_above(0.1)
            == 1
        {
            combined_unimodal += 1;
        }
        // single-time protocols: the full M = 60 budget at one time
        for (i, truth) in truths.iter().enumerate() {
            let counts = sample_counts(truth, 60, &mut rng).unwrap();
            let loglik = model.log_likelihood(&counts, i).unwrap();
            let post = posterior(&loglik, &prior).unwrap();
            single_total += 1;
            if post.local_maxima_above(0.1) >= 2 {
                single_multimodal += 1;
            }
        }
    }
    report(
        "6 (multi-time unimodality)",
        combined_unimodal * 10 >= trials * 9 && 2 * single_multimodal > single_total,
        &format!(
            "combined unimodal {combined_unimodal}/{trials} (need >= 90%), single-time multimodal {single_multimodal}/{single_total} (need strict majority)"
        ),
    );
}

#[test]
fn criterion_07_extended_phase_estimates_more_precisely() {
    let h_grid = grid_points(-30.0, 0.0, 0.1).unwrap();
    let prior = PosteriorGrid::uniform(-30.0, 0.0, 0.1).unwrap();
    let times = [80.0, 100.0, 140.0];
    let mut detail = String::new();
    let mut pass = true;
    for (k, initial, per_time) in [(1u32, vec![5u32], 20u64), (2, vec![3, 7], 25)] {
        let probe = ProbeSpec {
            sites: 9,
            excitations: k,
            hopping_mhz: -8.0,
            initial: OccupationPattern::new(initial),
        };
        let model =
            LikelihoodModel::build(&probe, &times, &h_grid, &ModelSource::ExactClosed).unwrap();
        let sd_at = |truth: f64, seed: u64| {
            let dists: Vec<Vec<f64>> = times
                .iter()
                .map(|&t| probe.closed_distribution(truth, t).unwrap())
                .collect();
            trial_statistics(&model, &dists, &vec![per_time; 3], &prior, 50, seed)
                .unwrap()
                .sd
        };
        let extended = sd_at(-3.0, 700 + k as u64);
        let localized = sd_at(-20.0, 710 + k as u64);
        pass &= extended < localized;
        detail.push_str(&format!(
            "k={k}: SD(-3 MHz) = {extended:.3} vs SD(-20 MHz) = {localized:.3}; "
        ));
    }
    report("7 (phase-dependent precision)", pass, &detail);
}

#[test]
fn criterion_08_oracle_equivalences() {
    // (a) subspace vs full-register evolution, L <= 5
    let mut worst_a = 0.0f64;
    for l in 2..=5u32 {
        for k in 1..=l {
            let basis = enumerate_basis(l, k).unwrap();
            let start = basis.pattern(basis.dim() / 2).clone();
            for &(g, t) in &[(-3.0, 120.0), (0.0, 350.0), (-20.0, 57.0)] {
                let ham = build_hamiltonian(&ModelParams::new(l, -8.0, g), &basis).unwrap();
                let psi = evolve(&ham, &initial_state(&basis, &start).unwrap(), t).unwrap();
                let full = common::full_hamiltonian(l, -8.0, g);
                let full_psi = common::full_evolve(&full, common::full_index(&start), t);
                for (i, p) in basis.patterns().iter().enumerate() {
                    worst_a =
                        worst_a.max((psi.amplitudes[i] - full_psi[common::full_index(p)]).norm());
                }
            }
        }
    }

    // (b) exact state derivative vs central finite difference
    let basis = enumerate_basis(9, 1).unwrap();
    let psi0 = initial_state(&basis, &OccupationPattern::new(vec![5])).unwrap();
    let dh = dh_hamiltonian(&basis);
    let mut worst_b = 0.0f64;
    for &(g, t) in &[(-3.0, 100.0), (-30.0, 350.0), (-20.0, 57.0)] {
        let ham = build_hamiltonian(&ModelParams::new(9, -8.0, g), &basis).unwrap();
        let dpsi = evolved_state_derivative(&ham, &dh, &psi0, t).unwrap();
        let eps = 1e-4;
        let hp = build_hamiltonian(&ModelParams::new(9, -8.0, g + eps), &basis).unwrap();
        let hm = build_hamiltonian(&ModelParams::new(9, -8.0, g - eps), &basis).unwrap();
        let pp = evolve(&hp, &psi0, t).unwrap();
        let pm = evolve(&hm, &psi0, t).unwrap();
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..basis.dim() {
            let fd = (pp.amplitudes[i] - pm.amplitudes[i]) / (2.0 * eps);
            diff += (dpsi[i] - fd).norm_sqr();
            scale += dpsi[i].norm_sqr();
        }
        worst_b = worst_b.max((diff / scale).sqrt());
    }

    // (c) Lindblad step halving, (d) infinite-decoherence limit, (e) analytic curves
    let sector = build_sector_basis(9, 2).unwrap();
    let params = ModelParams::new(9, -8.0, -6.0);
    let prop =
        LindbladPropagator::new(&params, &DecoherenceParams::chain_defaults(), &sector).unwrap();
    let rho0 = DensityMatrix::pure_pattern(&sector, &OccupationPattern::new(vec![3, 7])).unwrap();
    let coarse = prop.evolve(&rho0, 350.0, 0.05).unwrap();
    let fine = prop.evolve(&rho0, 350.0, 0.025).unwrap();
    let worst_c = coarse
        .matrix
        .iter()
        .zip(fine.matrix.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);

    let prop_inf =
        LindbladPropagator::new(&params, &DecoherenceParams::infinite(9), &sector).unwrap();
    let rho_inf = prop_inf.evolve(&rho0, 300.0, 0.05).unwrap();
    let basis2 = enumerate_basis(9, 2).unwrap();
    let ham2 = build_hamiltonian(&params, &basis2).unwrap();
    let psi2 = evolve(
        &ham2,
        &initial_state(&basis2, &OccupationPattern::new(vec![3, 7])).unwrap(),
        300.0,
    )
    .unwrap();
    let open_probs = outcome_distribution_open(&rho_inf);
    let mut worst_d = 0.0f64;
    for (i, p) in basis2.patterns().iter().enumerate() {
        let closed = psi2.amplitudes[i].norm_sqr();
        let open = open_probs[sector.index_of(p).unwrap()];
        worst_d = worst_d.max((closed - open).abs());
    }

    let single = build_sector_basis(1, 1).unwrap();
    let sp = ModelParams::new(1, 0.0, 0.0);
    let (t1, t2) = (25.1, 1.9);
    let damp = LindbladPropagator::new(
        &sp,
        &DecoherenceParams::new(vec![t1], vec![f64::INFINITY]).unwrap(),
        &single,
    )
    .unwrap();
    let excited = DensityMatrix::pure_pattern(&single, &OccupationPattern::new(vec![1])).unwrap();
    let decayed = damp.evolve(&excited, 350.0, 0.05).unwrap();
    let expect_decay = (-350.0 / (t1 * 1e3)).exp();
    let rel_decay = (decayed.matrix[(1, 1)].re - expect_decay).abs() / expect_decay;

    let deph = LindbladPropagator::new(
        &sp,
        &DecoherenceParams::new(vec![f64::INFINITY], vec![t2]).unwrap(),
        &single,
    )
    .unwrap();
    let amps = nalgebra::DVector::from_vec(vec![
        num_complex::Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        num_complex::Complex::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
    ]);
    let plus = DensityMatrix::pure_amplitudes(&single, &amps).unwrap();
    let dephased = deph.evolve(&plus, 350.0, 0.05).unwrap();
    let expect_coh = 0.5 * (-350.0 / (t2 * 1e3)).exp();
    let rel_coh = (dephased.matrix[(0, 1)].norm() - expect_coh).abs() / expect_coh;
    let worst_e = rel_decay.max(rel_coh);

    report(
        "8 (oracle equivalences)",
        worst_a < 1e-8 && worst_b < 1e-5 && worst_c < 1e-8 && worst_d < 1e-7 && worst_e < 1e-6,
        &format!(
            "full-register {worst_a:.1e} (<1e-8), derivative rel {worst_b:.1e} (<1e-5), step-halving {worst_c:.1e} (<1e-8), unitary limit {worst_d:.1e} (<1e-7), analytic rel {worst_e:.1e} (<1e-6)"
        ),
    );
}

#[test]
fn criterion_09_statistical_layer() {
    // sampled CFI against the exact backward difference
    let probe = ProbeSpec::single_excitation_center(9, -8.0);
    let eps = 0.1;
    let p_h = probe.closed_distribution(-6.0, 100.0).unwrap();
    let p_m = probe.closed_distribution(-6.0 - eps, 100.0).unwrap();
    let exact = cfi_empirical(&p_h, &p_m, eps).unwrap();
    let (mean, sd) = common::resampled_cfi(&p_h, &p_m, eps, 250_000, 25, 909);
    let cfi_ok = (mean - exact).abs() <= 3.0 * sd / 5.0;

    // readout apply/correct round trip
    let fid = ReadoutFidelities::chain_defaults();
    let dist: Vec<f64> = (0..512)
        .map(|i| (i as f64 + 1.0) / (512.0 * 513.0 / 2.0))
        .collect();
    let garbled = apply_readout_error_bitstrings(&dist, &fid).unwrap();
    let restored = correct_readout_bitstrings(&garbled, &fid).unwrap();
    let round_trip = dist
        .iter()
        .zip(&restored)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // byte identity of a full estimation run
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    std::fs::write(
        &config,
        r#"
seed = 99
[model]
sites = 9
excitations = 1
hopping_mhz = -8.0
initial_pattern = [5]
[times]
start_ns = 0.0
stop_ns = 200.0
step_ns = 20.0
[estimate]
measure_times_ns = [80.0, 100.0, 140.0]
shots = 60
repetitions = 20
true_h = { min = -21.0, max = -3.0, step = 9.0 }
grid = { min = -30.0, max = 0.0, step = 0.1 }
"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = tmp.path().join(sub);
        let cli = Cli::try_parse_from([
            "starksense",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "estimate",
        ])
        .unwrap();
        cli::execute(&cli).unwrap();
        outputs.push(std::fs::read(out.join("estimate.csv")).unwrap());
    }
    let identical = outputs[0] == outputs[1];

    report(
        "9 (statistical layer)",
        cfi_ok && round_trip <= 1e-12 && identical,
        &format!(
            "sampled CFI {mean:.4} vs exact {exact:.4} (3 SE {:.4}), readout round trip {round_trip:.1e} (<=1e-12), byte-identical rerun: {identical}",
            3.0 * sd / 5.0
        ),
    );
}

#[test]
fn criterion_10_hardware_only_results_excluded() {
    // Experimentally measured quantities (hardware beta values, measured
    // heatmaps, device walk fidelities) are out of scope by design; the
    // toolkit covers their simulation counterparts in criteria 1-3 and ships
    // the Bhattacharyya walk-fidelity metric for users with external data.
    let f = starksense::analysis::walk_fidelity(&[0.25, 0.75], &[0.25, 0.75]).unwrap();
    report(
        "10 (hardware-only results excluded)",
        (f - 1.0).abs() < 1e-12,
        "informational: no desk-scale assertion; walk-fidelity metric available",
    );
}
