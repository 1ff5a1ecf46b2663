//! Quantum Fisher information for pure states, exact classical Fisher
//! information of a model distribution, and the empirical finite-difference
//! CFI built from sampled frequencies.
//!
//! All Fisher quantities are in MHz^-2.

use nalgebra::DVector;

use crate::dynamics::{evolved_state_derivative, QuantumState, C64};
use crate::error::{Error, Result};
use crate::hamiltonian::SpectralHamiltonian;

/// Probabilities below this floor are skipped in exact CFI sums.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Pure-state QFI: 4(<dpsi|dpsi> - |<dpsi|psi>|^2).
pub fn qfi_pure(psi: &QuantumState, dpsi: &DVector<C64>) -> Result<f64> {
    if psi.amplitudes.len() != dpsi.len() {
        return Err(Error::InvalidDimension(
            "state and derivative dimensions differ".into(),
        ));
    }
    let dd: f64 = dpsi.iter().map(|c| c.norm_sqr()).sum();
    let overlap: C64 = dpsi
        .iter()
        .zip(psi.amplitudes.iter())
        .map(|(d, a)| d.conj() * a)
        .sum();
    Ok(4.0 * (dd - overlap.norm_sqr()))
}

/// QFI of the closed-system evolution at time t, using the exact state
/// derivative.
pub fn qfi_at(
    h: &SpectralHamiltonian,
    dh: &nalgebra::DMatrix<f64>,
    psi0: &QuantumState,
    t_ns: f64,
) -> Result<f64> {
    let psi = crate::dynamics::evolve(h, psi0, t_ns)?;
    let dpsi = evolved_state_derivative(h, dh, psi0, t_ns)?;
    qfi_pure(&psi, &dpsi)
}

/// Exact CFI: sum (dp_n)^2 / p_n over outcomes with p_n above the floor.
pub fn cfi_exact(probabilities: &[f64], derivatives: &[f64]) -> Result<f64> {
    if probabilities.len() != derivatives.len() {
        return Err(Error::InvalidDimension(
            "probability and derivative lengths differ".into(),
        ));
    }
    Ok(probabilities
        .iter()
        .zip(derivatives)
        .filter(|(&p, _)| p > PROBABILITY_FLOOR)
        .map(|(&p, &dp)| dp * dp / p)
        .sum())
}

/// Exact computational-basis CFI of the closed-system evolution at time t.
/// dP_n = 2 Re(c_n^* dc_n) from the exact amplitude derivative.
pub fn cfi_at(
    h: &SpectralHamiltonian,
    dh: &nalgebra::DMatrix<f64>,
    psi0: &QuantumState,
    t_ns: f64,
) -> Result<f64> {
    let psi = crate::dynamics::evolve(h, psi0, t_ns)?;
    let dpsi = evolved_state_derivative(h, dh, psi0, t_ns)?;
    let probs: Vec<f64> = psi.amplitudes.iter().map(|c| c.norm_sqr()).collect();
    let dprobs: Vec<f64> = psi
        .amplitudes
        .iter()
        .zip(dpsi.iter())
        .map(|(c, dc)| 2.0 * (c.conj() * dc).re)
        .collect();
    cfi_exact(&probs, &dprobs)
}

/// Finite-difference variant of the CFI used with empirical frequencies:
/// sum_j ((P(h) - P(h - eps)) / eps)^2 / P(h), skipping outcomes whose
/// reference probability is not positive.
pub fn cfi_empirical(p_at_h: &[f64], p_at_h_minus_eps: &[f64], eps_mhz: f64) -> Result<f64> {
    if p_at_h.len() != p_at_h_minus_eps.len() {
        return Err(Error::InvalidDimension(
            "distribution lengths differ".into(),
        ));
    }
    if !(eps_mhz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {eps_mhz}"
        )));
    }
    Ok(p_at_h
        .iter()
        .zip(p_at_h_minus_eps)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &pm)| {
            let d = (p - pm) / eps_mhz;
            d * d / p
        })
        .sum())
}

/// Central-difference variant, exposed for sensitivity analysis.
pub fn cfi_central(p_plus: &[f64], p_minus: &[f64], p_center: &[f64], eps_mhz: f64) -> Result<f64> {
    if p_plus.len() != p_minus.len() || p_plus.len() != p_center.len() {
        return Err(Error::InvalidDimension(
            "distribution lengths differ".into(),
        ));
    }
    if !(eps_mhz > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    Ok(p_center
        .iter()
        .zip(p_plus.iter().zip(p_minus))
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, (&pp, &pm))| {
            let d = (pp - pm) / (2.0 * eps_mhz);
            d * d / p
        })
        .sum())
}
