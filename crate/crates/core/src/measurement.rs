//! Finite-shot acquisition in the computational basis, per-qubit readout-error
//! channels, and the inverse-matrix readout correction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Shot counts over a set of outcomes, summing to `total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Per-qubit readout fidelities F0 (prepared |0>) and F1 (prepared |1>).
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutFidelities {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
}

impl ReadoutFidelities {
    pub fn new(f0: Vec<f64>, f1: Vec<f64>) -> Result<Self> {
        if f0.len() != f1.len() {
            return Err(Error::InvalidDimension("F0/F1 length mismatch".into()));
        }
        if f0.iter().chain(&f1).any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument(
                "readout fidelities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { f0, f1 })
    }

    pub fn perfect(l: usize) -> Self {
        Self {
            f0: vec![1.0; l],
            f1: vec![1.0; l],
        }
    }

    /// Measured fidelities of the nine chain qubits.
    pub fn chain_defaults() -> Self {
        Self {
            f0: vec![
                0.952, 0.972, 0.938, 0.956, 0.967, 0.987, 0.959, 0.968, 0.948,
            ],
            f1: vec![
                0.901, 0.910, 0.875, 0.898, 0.903, 0.895, 0.904, 0.888, 0.912,
            ],
        }
    }
}

/// Deterministic per-task RNG stream derived from a root seed (splitmix64
/// mixing of the stream index).
pub fn seeded_rng(root_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut z = root_seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha12Rng::seed_from_u64(z)
}

/// Multinomial draw of `total` shots from `probabilities`, via the conditional
/// binomial decomposition. Deterministic given the RNG state.
pub fn sample_counts<R: Rng>(
    probabilities: &[f64],
    total: u64,
    rng: &mut R,
) -> Result<CountVector> {
    if probabilities.iter().any(|&p| p < -1e-9) {
        return Err(Error::InvalidArgument(
            "negative probability in sampling distribution".into(),
        ));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "distribution sums to {sum}, expected 1"
        )));
    }
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining = total;
    let mut mass_left = sum;
    for (i, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probabilities.len() || mass_left <= p {
            counts[i] = remaining;
            break;
        }
        let q = (p.max(0.0) / mass_left).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(rng);
        counts[i] = draw;
        remaining -= draw;
        mass_left -= p;
    }
    Ok(CountVector { counts, total })
}

/// Empirical frequencies n_j / n.
pub fn empirical_distribution(counts: &CountVector) -> Result<Vec<f64>> {
    if counts.total == 0 {
        return Err(Error::InvalidArgument(
            "cannot normalize an empty count vector".into(),
        ));
    }
    Ok(counts
        .counts
        .iter()
        .map(|&c| c as f64 / counts.total as f64)
        .collect())
}

/// Single-qubit readout channel: observed = M . true with
/// M = [[F0, 1-F1], [1-F0, F1]] acting on (P0, P1).
pub fn apply_readout_error(p_true: [f64; 2], fid: &ReadoutFidelities, qubit: usize) -> [f64; 2] {
    let (f0, f1) = (fid.f0[qubit], fid.f1[qubit]);
    [
        f0 * p_true[0] + (1.0 - f1) * p_true[1],
        (1.0 - f0) * p_true[0] + f1 * p_true[1],
    ]
}

/// Raw inverse of the readout channel; entries may be slightly negative from
/// statistical noise.
pub fn correct_readout_raw(
    p_obs: [f64; 2],
    fid: &ReadoutFidelities,
    qubit: usize,
) -> Result<[f64; 2]> {
    let (f0, f1) = (fid.f0[qubit], fid.f1[qubit]);
    let det = f0 + f1 - 1.0;
    if det <= 0.0 {
        return Err(Error::SingularReadout { f0, f1 });
    }
    Ok([
        (f1 * p_obs[0] - (1.0 - f1) * p_obs[1]) / det,
        (f0 * p_obs[1] - (1.0 - f0) * p_obs[0]) / det,
    ])
}

/// Inverse readout correction with negative entries clipped to zero and the
/// vector renormalized.
pub fn correct_readout(p_obs: [f64; 2], fid: &ReadoutFidelities, qubit: usize) -> Result<[f64; 2]> {
    let raw = correct_readout_raw(p_obs, fid, qubit)?;
    let clipped = [raw[0].max(0.0), raw[1].max(0.0)];
    let sum = clipped[0] + clipped[1];
    if sum <= 0.0 {
        return Err(Error::DegeneratePosterior(
            "readout correction produced an all-zero distribution".into(),
        ));
    }
    Ok([clipped[0] / sum, clipped[1] / sum])
}

/// Tensor-product readout channel on a distribution over full L-bit outcome
/// strings (index bit j-1 set means site j read as |1>). Applied as
/// independent per-qubit sweeps.
pub fn apply_readout_error_bitstrings(p_true: &[f64], fid: &ReadoutFidelities) -> Result<Vec<f64>> {
    let l = fid.f0.len();
    if p_true.len() != 1 << l {
        return Err(Error::InvalidDimension(format!(
            "expected 2^{l} outcomes, got {}",
            p_true.len()
        )));
    }
    let mut p = p_true.to_vec();
    for j in 0..l {
        let bit = 1usize << j;
        let (f0, f1) = (fid.f0[j], fid.f1[j]);
        for idx in 0..p.len() {
            if idx & bit == 0 {
                let p0 = p[idx];
                let p1 = p[idx | bit];
                p[idx] = f0 * p0 + (1.0 - f1) * p1;
                p[idx | bit] = (1.0 - f0) * p0 + f1 * p1;
            }
        }
    }
    Ok(p)
}

/// Inverse of the tensor-product channel on bitstring distributions
/// (unclipped).
pub fn correct_readout_bitstrings(p_obs: &[f64], fid: &ReadoutFidelities) -> Result<Vec<f64>> {
    let l = fid.f0.len();
    if p_obs.len() != 1 << l {
        return Err(Error::InvalidDimension(format!(
            "expected 2^{l} outcomes, got {}",
            p_obs.len()
        )));
    }
    let mut p = p_obs.to_vec();
    for j in 0..l {
        let bit = 1usize << j;
        let (f0, f1) = (fid.f0[j], fid.f1[j]);
        let det = f0 + f1 - 1.0;
        if det <= 0.0 {
            return Err(Error::SingularReadout { f0, f1 });
        }
        for idx in 0..p.len() {
            if idx & bit == 0 {
                let p0 = p[idx];
                let p1 = p[idx | bit];
                p[idx] = (f1 * p0 - (1.0 - f1) * p1) / det;
                p[idx | bit] = (f0 * p1 - (1.0 - f0) * p0) / det;
            }
        }
    }
    Ok(p)
}
