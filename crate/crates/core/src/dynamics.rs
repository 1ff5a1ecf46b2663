//! Closed-system propagation by spectral decomposition, measurement-outcome
//! distributions, and the exact parametric derivative of the evolved state.
//!
//! Units: energies in MHz, times in ns. The propagator phase is
//! 2*pi*1e-3*lambda*t radians for lambda in MHz and t in ns.

use nalgebra::{Complex, DVector};

use crate::basis::{OccupationPattern, SubspaceBasis};
use crate::error::{Error, Result};
use crate::hamiltonian::SpectralHamiltonian;

pub type C64 = Complex<f64>;

/// MHz * ns -> radians.
pub const PHASE_PER_MHZ_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

/// Eigenphase-difference threshold below which the derivative kernel switches
/// to its degenerate branch.
const DEGENERACY_THRESHOLD: f64 = 1e-9;

/// Normalized amplitude vector over a subspace basis.
#[derive(Debug, Clone)]
pub struct QuantumState {
    pub basis: SubspaceBasis,
    pub amplitudes: DVector<C64>,
}

/// Probability vector over the measurement outcomes of a subspace basis.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    pub basis: SubspaceBasis,
    pub probabilities: DVector<f64>,
}

/// Unit amplitude on the given occupation pattern.
pub fn initial_state(basis: &SubspaceBasis, pattern: &OccupationPattern) -> Result<QuantumState> {
    let idx = basis.index_of(pattern)?;
    let mut amplitudes = DVector::from_element(basis.dim(), C64::new(0.0, 0.0));
    amplitudes[idx] = C64::new(1.0, 0.0);
    Ok(QuantumState {
        basis: basis.clone(),
        amplitudes,
    })
}

fn check_basis(h: &SpectralHamiltonian, psi: &QuantumState) -> Result<()> {
    if h.basis != psi.basis {
        return Err(Error::BasisMismatch(
            "state and Hamiltonian are built on different bases".into(),
        ));
    }
    Ok(())
}

/// exp(-i H t) applied through the eigendecomposition.
pub fn evolve(h: &SpectralHamiltonian, psi0: &QuantumState, t_ns: f64) -> Result<QuantumState> {
    check_basis(h, psi0)?;
    if t_ns < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t_ns}")));
    }
    let v = &h.eigenvectors;
    // coefficients in the eigenbasis
    let coeffs: Vec<C64> = (0..h.basis.dim())
        .map(|m| {
            (0..h.basis.dim())
                .map(|i| psi0.amplitudes[i] * v[(i, m)])
                .sum()
        })
        .collect();
    let mut amplitudes = DVector::from_element(h.basis.dim(), C64::new(0.0, 0.0));
    for (m, c) in coeffs.iter().enumerate() {
        let theta = PHASE_PER_MHZ_NS * h.eigenvalues[m] * t_ns;
        let phase = C64::new(theta.cos(), -theta.sin());
        let cm = c * phase;
        for i in 0..h.basis.dim() {
            amplitudes[i] += cm * v[(i, m)];
        }
    }
    Ok(QuantumState {
        basis: h.basis.clone(),
        amplitudes,
    })
}

/// |c_j|^2 for each basis pattern.
pub fn outcome_distribution(psi: &QuantumState) -> OutcomeDistribution {
    OutcomeDistribution {
        basis: psi.basis.clone(),
        probabilities: psi.amplitudes.map(|c| c.norm_sqr()),
    }
}

/// Per-site populations: each pattern's probability is attributed to every
/// site it occupies. Sums to the excitation number k.
pub fn site_populations(dist: &OutcomeDistribution) -> Vec<f64> {
    let mut pops = vec![0.0; dist.basis.sites() as usize];
    for (i, pat) in dist.basis.patterns().iter().enumerate() {
        for &j in pat.sites() {
            pops[j as usize - 1] += dist.probabilities[i];
        }
    }
    pops
}

/// Exact derivative of `evolve(h, psi0, t)` with respect to the gradient field,
/// via the divided-difference (Daleckii-Krein) kernel in the eigenbasis.
///
/// `dh` is the h-derivative of the Hamiltonian matrix in MHz units.
pub fn evolved_state_derivative(
    h: &SpectralHamiltonian,
    dh: &nalgebra::DMatrix<f64>,
    psi0: &QuantumState,
    t_ns: f64,
) -> Result<DVector<C64>> {
    check_basis(h, psi0)?;
    let dim = h.basis.dim();
    if dh.nrows() != dim || dh.ncols() != dim {
        return Err(Error::InvalidDimension(
            "derivative matrix does not match basis dimension".into(),
        ));
    }
    let v = &h.eigenvectors;
    // A = V^T (s t dH) V, with s the MHz*ns -> rad conversion
    let scale = PHASE_PER_MHZ_NS * t_ns;
    let a = v.transpose() * (dh * scale) * v;
    let thetas: Vec<f64> = h
        .eigenvalues
        .iter()
        .map(|&lam| PHASE_PER_MHZ_NS * lam * t_ns)
        .collect();
    let phases: Vec<C64> = thetas
        .iter()
        .map(|&th| C64::new(th.cos(), -th.sin()))
        .collect();
    // coefficients of psi0 in the eigenbasis
    let coeffs: Vec<C64> = (0..dim)
        .map(|n| (0..dim).map(|i| psi0.amplitudes[i] * v[(i, n)]).sum())
        .collect();
    // kernel K_{mn} = A_{mn} * (e^{-i th_m} - e^{-i th_n})/(th_m - th_n),
    // degenerate limit -i e^{-i th_m} A_{mm}
    let mut eig_out = vec![C64::new(0.0, 0.0); dim];
    for m in 0..dim {
        for n in 0..dim {
            let dtheta = thetas[m] - thetas[n];
            let kernel = if dtheta.abs() < DEGENERACY_THRESHOLD {
                C64::new(0.0, -1.0) * phases[m]
            } else {
                (phases[m] - phases[n]) / dtheta
            };
            eig_out[m] += kernel * a[(m, n)] * coeffs[n];
        }
    }
    let mut out = DVector::from_element(dim, C64::new(0.0, 0.0));
    for (m, c) in eig_out.iter().enumerate() {
        for i in 0..dim {
            out[i] += c * v[(i, m)];
        }
    }
    Ok(out)
}
