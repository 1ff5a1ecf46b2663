//! Stark-Wannier chain Hamiltonian restricted to a fixed-excitation subspace,
//! with its spectral decomposition attached.
//!
//! All matrix entries are stored in MHz; the 2*pi conversion to angular
//! frequency happens in the propagator only.

use nalgebra::{DMatrix, DVector};

use crate::basis::SubspaceBasis;
use crate::error::{Error, Result};

/// Chain parameters: hopping J and gradient field h, both in MHz.
/// The on-site offset of site j is (j - 1) * h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub sites: u32,
    pub hopping_mhz: f64,
    pub gradient_mhz: f64,
}

impl ModelParams {
    pub fn new(sites: u32, hopping_mhz: f64, gradient_mhz: f64) -> Self {
        Self {
            sites,
            hopping_mhz,
            gradient_mhz,
        }
    }

    /// On-site offset (j - 1) * h in MHz, for a 1-based site index.
    pub fn onsite_mhz(&self, site: u32) -> f64 {
        (site - 1) as f64 * self.gradient_mhz
    }
}

/// A real symmetric subspace Hamiltonian together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct SpectralHamiltonian {
    pub basis: SubspaceBasis,
    pub matrix: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, one per column.
    pub eigenvectors: DMatrix<f64>,
}

/// Subspace matrix of the chain Hamiltonian: diagonal entry sum_{j in S}(j-1)h,
/// hopping J between patterns differing by moving one excitation to an
/// adjacent empty site.
pub fn build_hamiltonian(
    params: &ModelParams,
    basis: &SubspaceBasis,
) -> Result<SpectralHamiltonian> {
    if params.sites != basis.sites() {
        return Err(Error::InvalidDimension(format!(
            "params L={} but basis L={}",
            params.sites,
            basis.sites()
        )));
    }
    let dim = basis.dim();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (i, pat) in basis.patterns().iter().enumerate() {
        m[(i, i)] = pat.stark_weight() * params.gradient_mhz;
        for &j in pat.sites() {
            // hop j -> j+1 when the target site is empty; the reverse hop fills
            // in the symmetric entry
            if j < basis.sites() && !pat.contains(j + 1) {
                let mut moved: Vec<u32> = pat.sites().to_vec();
                let pos = moved.iter().position(|&s| s == j).unwrap();
                moved[pos] = j + 1;
                let neighbor = crate::basis::OccupationPattern::new(moved);
                let ni = basis.index_of(&neighbor)?;
                m[(i, ni)] = params.hopping_mhz;
                m[(ni, i)] = params.hopping_mhz;
            }
        }
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(&m);
    Ok(SpectralHamiltonian {
        basis: basis.clone(),
        matrix: m,
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition of a real symmetric matrix by the cyclic Jacobi method,
/// eigenvalues ascending, eigenvectors orthonormal in the matching columns.
///
/// Hand-rolled because nalgebra's SymmetricEigen mis-associates eigenpairs on
/// some matrices in this domain (e.g. the L=9, k=4 subspace at strong
/// gradients returns vectors with O(1) residuals). Jacobi converges
/// unconditionally and the dimensions here (<= a few hundred) keep it cheap.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                // tan of the smaller rotation angle: sign(theta)/(|theta| + sqrt(theta^2+1))
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    1.0 / (theta - (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let (aip, aiq) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * aip - s * aiq;
                    a[(i, q)] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let (api, aqi) = (a[(p, i)], a[(q, i)]);
                    a[(p, i)] = c * api - s * aqi;
                    a[(q, i)] = s * api + c * aqi;
                }
                for i in 0..n {
                    let (vip, viq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &v.column(src));
    }
    (eigenvalues, eigenvectors)
}

/// dH/dh on the subspace: diagonal with entry sum_{j in S}(j - 1); independent
/// of h and J.
pub fn dh_hamiltonian(basis: &SubspaceBasis) -> DMatrix<f64> {
    let dim = basis.dim();
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for (i, pat) in basis.patterns().iter().enumerate() {
        m[(i, i)] = pat.stark_weight();
    }
    m
}
