//! Density-matrix propagation under the Lindblad master equation with
//! per-qubit energy relaxation (T1) and dephasing (T2*), on a basis truncated
//! to excitation sectors 0..k_max.
//!
//! Sigma-minus jump operators connect sector k to k-1, so all lower sectors
//! are retained. Times in ns, decoherence times in microseconds.

use nalgebra::{DMatrix, DVector};

use crate::basis::{enumerate_basis, OccupationPattern, SubspaceBasis};
use crate::dynamics::{C64, PHASE_PER_MHZ_NS};
use crate::error::{Error, Result};
use crate::hamiltonian::ModelParams;

/// Concatenated excitation sectors 0..k_max for an L-site chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    l: u32,
    k_max: u32,
    sectors: Vec<SubspaceBasis>,
    offsets: Vec<usize>,
    dim: usize,
}

pub fn build_sector_basis(l: u32, k_max: u32) -> Result<SectorBasis> {
    if l == 0 || k_max > l {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= L and k_max <= L, got L={l}, k_max={k_max}"
        )));
    }
    let mut sectors = Vec::new();
    let mut offsets = Vec::new();
    let mut dim = 0;
    for k in 0..=k_max {
        let b = enumerate_basis(l, k)?;
        offsets.push(dim);
        dim += b.dim();
        sectors.push(b);
    }
    Ok(SectorBasis {
        l,
        k_max,
        sectors,
        offsets,
        dim,
    })
}

impl SectorBasis {
    pub fn sites(&self) -> u32 {
        self.l
    }

    pub fn max_excitations(&self) -> u32 {
        self.k_max
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sector(&self, k: u32) -> &SubspaceBasis {
        &self.sectors[k as usize]
    }

    pub fn sector_offset(&self, k: u32) -> usize {
        self.offsets[k as usize]
    }

    /// Global index of a pattern (the sector is its excitation count).
    pub fn index_of(&self, pattern: &OccupationPattern) -> Result<usize> {
        let k = pattern.excitations() as u32;
        if k > self.k_max {
            return Err(Error::PatternNotFound(format!(
                "{pattern} exceeds k_max={}",
                self.k_max
            )));
        }
        Ok(self.offsets[k as usize] + self.sectors[k as usize].index_of(pattern)?)
    }

    pub fn pattern(&self, global_index: usize) -> &OccupationPattern {
        let k = self
            .offsets
            .iter()
            .rposition(|&o| o <= global_index)
            .unwrap();
        self.sectors[k].pattern(global_index - self.offsets[k])
    }

    /// Iterate patterns in global-index order.
    pub fn patterns(&self) -> impl Iterator<Item = &OccupationPattern> {
        self.sectors.iter().flat_map(|s| s.patterns().iter())
    }
}

/// Per-qubit T1 and T2* in microseconds. Infinite entries switch the
/// corresponding channel off.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceParams {
    pub t1_us: Vec<f64>,
    pub t2star_us: Vec<f64>,
}

impl DecoherenceParams {
    pub fn new(t1_us: Vec<f64>, t2star_us: Vec<f64>) -> Result<Self> {
        if t1_us.iter().chain(&t2star_us).any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidArgument(
                "decoherence times must be positive (or infinite)".into(),
            ));
        }
        Ok(Self { t1_us, t2star_us })
    }

    pub fn uniform(l: u32, t1_us: f64, t2star_us: f64) -> Result<Self> {
        Self::new(vec![t1_us; l as usize], vec![t2star_us; l as usize])
    }

    pub fn infinite(l: u32) -> Self {
        Self {
            t1_us: vec![f64::INFINITY; l as usize],
            t2star_us: vec![f64::INFINITY; l as usize],
        }
    }

    /// Idle-point coherence times of the nine chain qubits.
    pub fn chain_defaults() -> Self {
        Self {
            t1_us: vec![16.1, 22.9, 13.7, 19.4, 33.1, 26.8, 32.9, 26.8, 34.2],
            t2star_us: vec![2.1, 1.6, 2.0, 2.1, 2.2, 1.5, 1.9, 1.5, 2.1],
        }
    }

    /// The chain averages quoted alongside the table: T1 = 25.1 us,
    /// T2* = 1.9 us on every qubit.
    pub fn chain_average() -> Self {
        Self {
            t1_us: vec![25.1; 9],
            t2star_us: vec![1.9; 9],
        }
    }
}

/// Hermitian, unit-trace matrix over a sector basis.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub basis: SectorBasis,
    pub matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Pure state |pattern><pattern|.
    pub fn pure_pattern(basis: &SectorBasis, pattern: &OccupationPattern) -> Result<Self> {
        let idx = basis.index_of(pattern)?;
        let mut m = DMatrix::from_element(basis.dim(), basis.dim(), C64::new(0.0, 0.0));
        m[(idx, idx)] = C64::new(1.0, 0.0);
        Ok(Self {
            basis: basis.clone(),
            matrix: m,
        })
    }

    /// Pure state from an amplitude vector over the full sector basis.
    pub fn pure_amplitudes(basis: &SectorBasis, amplitudes: &DVector<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::InvalidDimension(
                "amplitude vector does not match sector dimension".into(),
            ));
        }
        let mut m = DMatrix::from_element(basis.dim(), basis.dim(), C64::new(0.0, 0.0));
        for a in 0..basis.dim() {
            for b in 0..basis.dim() {
                m[(a, b)] = amplitudes[a] * amplitudes[b].conj();
            }
        }
        Ok(Self {
            basis: basis.clone(),
            matrix: m,
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.basis.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Expected total excitation number.
    pub fn mean_excitation(&self) -> f64 {
        self.basis
            .patterns()
            .enumerate()
            .map(|(i, p)| p.excitations() as f64 * self.matrix[(i, i)].re)
            .sum()
    }
}

/// Precomputed operator structure for the master equation on a sector basis.
pub struct LindbladPropagator {
    basis: SectorBasis,
    hamiltonian_mhz: DMatrix<f64>,
    /// occupation[j][i]: site j+1 occupied in global pattern i
    occupation: Vec<Vec<bool>>,
    /// per qubit: (from, to) global index pairs under sigma-minus
    jumps: Vec<Vec<(usize, usize)>>,
    /// amplitude-damping rates 1/T1_j in 1/ns
    gamma1: Vec<f64>,
    /// dephasing rates 1/(2 T2*_j) in 1/ns
    gamma_phi: Vec<f64>,
}

impl LindbladPropagator {
    pub fn new(params: &ModelParams, dec: &DecoherenceParams, basis: &SectorBasis) -> Result<Self> {
        if params.sites != basis.sites() {
            return Err(Error::InvalidDimension(
                "params L does not match sector basis".into(),
            ));
        }
        if dec.t1_us.len() != params.sites as usize || dec.t2star_us.len() != params.sites as usize
        {
            return Err(Error::InvalidDimension(
                "decoherence table length does not match L".into(),
            ));
        }
        // block-diagonal Hamiltonian over the sectors
        let dim = basis.dim();
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for k in 0..=basis.max_excitations() {
            let sector = basis.sector(k);
            let off = basis.sector_offset(k);
            let hk = crate::hamiltonian::build_hamiltonian(params, sector)?;
            for a in 0..sector.dim() {
                for b in 0..sector.dim() {
                    h[(off + a, off + b)] = hk.matrix[(a, b)];
                }
            }
        }
        let l = params.sites as usize;
        let mut occupation = vec![Vec::with_capacity(dim); l];
        for pat in basis.patterns() {
            for (j, occ) in occupation.iter_mut().enumerate() {
                occ.push(pat.contains(j as u32 + 1));
            }
        }
        let mut jumps = vec![Vec::new(); l];
        for (i, pat) in basis.patterns().enumerate() {
            for &j in pat.sites() {
                let lowered: Vec<u32> = pat.sites().iter().copied().filter(|&s| s != j).collect();
                let to = basis.index_of(&OccupationPattern::new(lowered))?;
                jumps[j as usize - 1].push((i, to));
            }
        }
        let gamma1 = dec
            .t1_us
            .iter()
            .map(|&t1| {
                if t1.is_finite() {
                    1.0 / (t1 * 1e3)
                } else {
                    0.0
                }
            })
            .collect();
        let gamma_phi = dec
            .t2star_us
            .iter()
            .map(|&t2| {
                if t2.is_finite() {
                    1.0 / (2.0 * t2 * 1e3)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            basis: basis.clone(),
            hamiltonian_mhz: h,
            occupation,
            jumps,
            gamma1,
            gamma_phi,
        })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let dim = self.basis.dim();
        let h = &self.hamiltonian_mhz;
        // -i s [H, rho]
        let mut out = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
        for a in 0..dim {
            for b in 0..dim {
                let mut comm = C64::new(0.0, 0.0);
                for c in 0..dim {
                    comm += h[(a, c)] * rho[(c, b)] - rho[(a, c)] * h[(c, b)];
                }
                out[(a, b)] = C64::new(0.0, -PHASE_PER_MHZ_NS) * comm;
            }
        }
        // dephasing: gamma_phi_j (Z_j rho Z_j - rho); Z is diagonal so the
        // element picks up (z_a z_b - 1)
        for (j, gphi) in self.gamma_phi.iter().enumerate() {
            if *gphi == 0.0 {
                continue;
            }
            let occ = &self.occupation[j];
            for a in 0..dim {
                for b in 0..dim {
                    if occ[a] != occ[b] {
                        out[(a, b)] -= 2.0 * gphi * rho[(a, b)];
                    }
                }
            }
        }
        // dissipation: gamma1_j (s- rho s+ - 1/2 {n_j, rho})
        for (j, g1) in self.gamma1.iter().enumerate() {
            if *g1 == 0.0 {
                continue;
            }
            for &(fa, ta) in &self.jumps[j] {
                for &(fb, tb) in &self.jumps[j] {
                    out[(ta, tb)] += *g1 * rho[(fa, fb)];
                }
            }
            let occ = &self.occupation[j];
            for a in 0..dim {
                for b in 0..dim {
                    let n_ab = (occ[a] as u8 + occ[b] as u8) as f64 * 0.5;
                    if n_ab != 0.0 {
                        out[(a, b)] -= *g1 * n_ab * rho[(a, b)];
                    }
                }
            }
        }
        out
    }

    /// Fixed-step RK4 integration of the master equation.
    pub fn evolve(&self, rho0: &DensityMatrix, t_ns: f64, step_ns: f64) -> Result<DensityMatrix> {
        if rho0.basis != self.basis {
            return Err(Error::BasisMismatch("density matrix basis mismatch".into()));
        }
        if t_ns < 0.0 || !(step_ns > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need t >= 0 and step > 0, got t={t_ns}, step={step_ns}"
            )));
        }
        let mut rho = rho0.matrix.clone();
        let mut remaining = t_ns;
        while remaining > 1e-12 {
            let dt = step_ns.min(remaining);
            let k1 = self.rhs(&rho);
            let k2 = self.rhs(&(&rho + &k1 * C64::new(dt / 2.0, 0.0)));
            let k3 = self.rhs(&(&rho + &k2 * C64::new(dt / 2.0, 0.0)));
            let k4 = self.rhs(&(&rho + &k3 * C64::new(dt, 0.0)));
            rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
                * C64::new(dt / 6.0, 0.0);
            remaining -= dt;
        }
        Ok(DensityMatrix {
            basis: self.basis.clone(),
            matrix: rho,
        })
    }
}

/// Default RK4 step in ns.
pub const DEFAULT_STEP_NS: f64 = 0.05;

/// Diagonal of rho in the computational sector basis.
pub fn outcome_distribution_open(rho: &DensityMatrix) -> DVector<f64> {
    DVector::from_iterator(
        rho.basis.dim(),
        (0..rho.basis.dim()).map(|i| rho.matrix[(i, i)].re),
    )
}
