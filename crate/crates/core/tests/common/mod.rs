//! Shared test oracles, kept deliberately independent of the library's
//! subspace machinery: the full-register oracle works on all 2^L basis states
//! with its own phase bookkeeping.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use starksense::basis::OccupationPattern;

pub type C64 = Complex<f64>;

/// Full 2^L tight-binding Hamiltonian in MHz. Bit b of the state index means
/// site b+1 is occupied; nearest-neighbor hopping J, on-site (j-1)*h.
pub fn full_hamiltonian(l: u32, j_mhz: f64, h_mhz: f64) -> DMatrix<f64> {
    let dim = 1usize << l;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for b in 0..l {
            if s >> b & 1 == 1 {
                diag += b as f64 * h_mhz;
            }
        }
        m[(s, s)] = diag;
        for b in 0..l - 1 {
            if s >> b & 1 == 1 && s >> (b + 1) & 1 == 0 {
                let s2 = s ^ (0b11 << b);
                m[(s, s2)] = j_mhz;
                m[(s2, s)] = j_mhz;
            }
        }
    }
    m
}

/// Index of an occupation pattern in the full register.
pub fn full_index(pattern: &OccupationPattern) -> usize {
    pattern.sites().iter().map(|&s| 1usize << (s - 1)).sum()
}

/// exp(-i * 2*pi*1e-3 * H * t) by Taylor series with scaling and squaring;
/// deliberately avoids any eigendecomposition.
pub fn full_propagator(h_full: &DMatrix<f64>, t_ns: f64) -> DMatrix<C64> {
    let dim = h_full.nrows();
    let scale = 2.0 * std::f64::consts::PI * 1e-3 * t_ns;
    let norm = h_full.norm() * scale.abs();
    // halve until the scaled norm is below 1/2, then a 14-term Taylor series
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let a = h_full.map(|x| C64::new(0.0, -scale * x / 2f64.powi(squarings as i32)));
    let mut u = DMatrix::<C64>::identity(dim, dim);
    let mut term = DMatrix::<C64>::identity(dim, dim);
    for n in 1..=14 {
        term = (&term * &a) / C64::new(n as f64, 0.0);
        u += &term;
    }
    for _ in 0..squarings {
        u = &u * &u;
    }
    u
}

/// Evolve a full-register basis state: amplitudes at time t in ns, matrices in
/// MHz, phase 2*pi*1e-3 per MHz*ns.
pub fn full_evolve(h_full: &DMatrix<f64>, start: usize, t_ns: f64) -> DVector<C64> {
    DVector::from(full_propagator(h_full, t_ns).column(start))
}

/// Mean and sample SD of repeated sampled-CFI estimates (backward difference
/// of empirical frequencies), one RNG stream per repetition.
pub fn resampled_cfi(
    p_at_h: &[f64],
    p_at_h_minus_eps: &[f64],
    eps_mhz: f64,
    shots: u64,
    reps: u64,
    root_seed: u64,
) -> (f64, f64) {
    let estimates: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng_a = starksense::measurement::seeded_rng(root_seed, 2 * r);
            let mut rng_b = starksense::measurement::seeded_rng(root_seed, 2 * r + 1);
            let f_a = starksense::measurement::empirical_distribution(
                &starksense::measurement::sample_counts(p_at_h, shots, &mut rng_a).unwrap(),
            )
            .unwrap();
            let f_b = starksense::measurement::empirical_distribution(
                &starksense::measurement::sample_counts(p_at_h_minus_eps, shots, &mut rng_b)
                    .unwrap(),
            )
            .unwrap();
            starksense::fisher::cfi_empirical(&f_a, &f_b, eps_mhz).unwrap()
        })
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, sd)
}
