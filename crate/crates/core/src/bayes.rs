//! Grid-based Bayesian estimation of the gradient field from count data at one
//! or several evolution times, with multi-time posterior combination and trial
//! statistics.

use rayon::prelude::*;

use crate::basis::OccupationPattern;
use crate::dynamics::{evolve, initial_state, outcome_distribution};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, ModelParams};
use crate::lindblad::{
    build_sector_basis, outcome_distribution_open, DecoherenceParams, DensityMatrix,
    LindbladPropagator, DEFAULT_STEP_NS,
};
use crate::measurement::{sample_counts, seeded_rng, CountVector};

/// Probability floor applied before logs when the likelihood table was rebuilt
/// from finite calibration samples.
pub const REBUILT_LIKELIHOOD_FLOOR: f64 = 1e-9;

/// Discretized probability mass over candidate gradient fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub h_grid: Vec<f64>,
    pub mass: Vec<f64>,
}

impl PosteriorGrid {
    /// Uniform prior over an inclusive [h_min, h_max] grid with the given step.
    pub fn uniform(h_min: f64, h_max: f64, step: f64) -> Result<Self> {
        let grid = grid_points(h_min, h_max, step)?;
        let n = grid.len();
        Ok(Self {
            h_grid: grid,
            mass: vec![1.0 / n as f64; n],
        })
    }

    pub fn from_mass(h_grid: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if h_grid.len() != mass.len() || h_grid.is_empty() {
            return Err(Error::InvalidDimension("grid/mass length mismatch".into()));
        }
        if !h_grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || mass.iter().any(|&m| m < 0.0) {
            return Err(Error::DegeneratePosterior(
                "posterior mass must be nonnegative with positive total".into(),
            ));
        }
        Ok(Self {
            h_grid,
            mass: mass.iter().map(|m| m / total).collect(),
        })
    }

    /// Grid point of maximum mass; ties break toward the smallest |h|.
    pub fn map_estimate(&self) -> f64 {
        let mut best = 0usize;
        for i in 1..self.mass.len() {
            let tie = (self.mass[i] - self.mass[best]).abs() <= 1e-12 * self.mass[best].max(1e-300);
            if tie {
                if self.h_grid[i].abs() < self.h_grid[best].abs() {
                    best = i;
                }
            } else if self.mass[i] > self.mass[best] {
                best = i;
            }
        }
        self.h_grid[best]
    }

    /// Number of local maxima whose mass exceeds `frac` times the peak mass.
    pub fn local_maxima_above(&self, frac: f64) -> usize {
        let peak = self.mass.iter().cloned().fold(0.0, f64::max);
        let threshold = frac * peak;
        let n = self.mass.len();
        (0..n)
            .filter(|&i| {
                let left = if i == 0 {
                    f64::NEG_INFINITY
                } else {
                    self.mass[i - 1]
                };
                let right = if i + 1 == n {
                    f64::NEG_INFINITY
                } else {
                    self.mass[i + 1]
                };
                self.mass[i] > threshold && self.mass[i] >= left && self.mass[i] > right
            })
            .count()
    }
}

pub fn grid_points(h_min: f64, h_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || h_max <= h_min {
        return Err(Error::InvalidArgument(format!(
            "invalid grid [{h_min}, {h_max}] step {step}"
        )));
    }
    let n = ((h_max - h_min) / step).round() as usize + 1;
    Ok((0..n).map(|i| h_min + i as f64 * step).collect())
}

/// Source of the likelihood tables.
#[derive(Debug, Clone)]
pub enum ModelSource {
    /// Exact closed-system probabilities.
    ExactClosed,
    /// Exact open-system probabilities (outcomes over the full sector basis).
    ExactOpen(DecoherenceParams),
    /// Empirical tables rebuilt from finite calibration sampling of the
    /// closed-system distribution, linearly interpolated in h.
    Rebuilt {
        calibration_shots: u64,
        calibration_step_mhz: f64,
        seed: u64,
    },
}

/// Outcome-probability tables over (time, h-grid) used as the likelihood.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    pub h_grid: Vec<f64>,
    pub times_ns: Vec<f64>,
    /// tables[t][h] = probability vector over outcomes
    tables: Vec<Vec<Vec<f64>>>,
    floored: bool,
}

/// Everything needed to simulate outcome distributions for a probe.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub sites: u32,
    pub excitations: u32,
    pub hopping_mhz: f64,
    pub initial: OccupationPattern,
}

impl ProbeSpec {
    pub fn single_excitation_center(sites: u32, hopping_mhz: f64) -> Self {
        Self {
            sites,
            excitations: 1,
            hopping_mhz,
            initial: OccupationPattern::new(vec![(sites + 1) / 2]),
        }
    }

    /// Exact closed-system outcome distribution at (h, t).
    pub fn closed_distribution(&self, gradient_mhz: f64, t_ns: f64) -> Result<Vec<f64>> {
        let basis = crate::basis::enumerate_basis(self.sites, self.excitations)?;
        let h = build_hamiltonian(
            &ModelParams::new(self.sites, self.hopping_mhz, gradient_mhz),
            &basis,
        )?;
        let psi0 = initial_state(&basis, &self.initial)?;
        let psi = evolve(&h, &psi0, t_ns)?;
        Ok(outcome_distribution(&psi)
            .probabilities
            .iter()
            .copied()
            .collect())
    }

    /// Exact open-system outcome distribution over the sector basis at (h, t).
    pub fn open_distribution(
        &self,
        gradient_mhz: f64,
        t_ns: f64,
        dec: &DecoherenceParams,
    ) -> Result<Vec<f64>> {
        let sector = build_sector_basis(self.sites, self.excitations)?;
        let prop = LindbladPropagator::new(
            &ModelParams::new(self.sites, self.hopping_mhz, gradient_mhz),
            dec,
            &sector,
        )?;
        let rho0 = DensityMatrix::pure_pattern(&sector, &self.initial)?;
        let rho = prop.evolve(&rho0, t_ns, DEFAULT_STEP_NS)?;
        Ok(outcome_distribution_open(&rho).iter().copied().collect())
    }
}

impl LikelihoodModel {
    /// Build probability tables for every (t, h) pair on the grid.
    pub fn build(
        probe: &ProbeSpec,
        times_ns: &[f64],
        h_grid: &[f64],
        source: &ModelSource,
    ) -> Result<Self> {
        if times_ns.is_empty() || h_grid.is_empty() {
            return Err(Error::InvalidArgument("empty time list or h grid".into()));
        }
        let tables = match source {
            ModelSource::ExactClosed => times_ns
                .par_iter()
                .map(|&t| {
                    h_grid
                        .iter()
                        .map(|&g| probe.closed_distribution(g, t))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            ModelSource::ExactOpen(dec) => times_ns
                .par_iter()
                .map(|&t| {
                    h_grid
                        .par_iter()
                        .map(|&g| probe.open_distribution(g, t, dec))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?,
            ModelSource::Rebuilt {
                calibration_shots,
                calibration_step_mhz,
                seed,
            } => {
                return Self::build_rebuilt(
                    probe,
                    times_ns,
                    h_grid,
                    *calibration_shots,
                    *calibration_step_mhz,
                    *seed,
                );
            }
        };
        Ok(Self {
            h_grid: h_grid.to_vec(),
            times_ns: times_ns.to_vec(),
            tables,
            floored: false,
        })
    }

    /// Calibration-style tables: multinomial-sample the exact distribution on
    /// a (possibly coarser) calibration grid, then interpolate per outcome.
    fn build_rebuilt(
        probe: &ProbeSpec,
        times_ns: &[f64],
        h_grid: &[f64],
        shots: u64,
        calib_step: f64,
        seed: u64,
    ) -> Result<Self> {
        let h_min = h_grid[0];
        let h_max = *h_grid.last().unwrap();
        let calib_grid = grid_points(h_min, h_max, calib_step)?;
        let mut tables = Vec::with_capacity(times_ns.len());
        for (ti, &t) in times_ns.iter().enumerate() {
            let calib: Vec<Vec<f64>> = calib_grid
                .iter()
                .enumerate()
                .map(|(hi, &g)| {
                    let exact = probe.closed_distribution(g, t)?;
                    let mut rng = seeded_rng(seed, (ti as u64) << 32 | hi as u64);
                    let counts = sample_counts(&exact, shots, &mut rng)?;
                    crate::measurement::empirical_distribution(&counts)
                })
                .collect::<Result<Vec<_>>>()?;
            // piecewise-linear interpolation per outcome, renormalized
            let table: Vec<Vec<f64>> = h_grid
                .iter()
                .map(|&g| {
                    let pos = ((g - h_min) / calib_step).clamp(0.0, (calib_grid.len() - 1) as f64);
                    let lo = pos.floor() as usize;
                    let hi = (lo + 1).min(calib_grid.len() - 1);
                    let frac = pos - lo as f64;
                    let mut p: Vec<f64> = calib[lo]
                        .iter()
                        .zip(&calib[hi])
                        .map(|(a, b)| a * (1.0 - frac) + b * frac)
                        .collect();
                    let sum: f64 = p.iter().sum();
                    if sum > 0.0 {
                        for v in &mut p {
                            *v /= sum;
                        }
                    }
                    p
                })
                .collect();
            tables.push(table);
        }
        Ok(Self {
            h_grid: h_grid.to_vec(),
            times_ns: times_ns.to_vec(),
            tables,
            floored: true,
        })
    }

    pub fn time_index(&self, t_ns: f64) -> Result<usize> {
        self.times_ns
            .iter()
            .position(|&t| (t - t_ns).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidArgument(format!("no model entry for t = {t_ns} ns")))
    }

    pub fn distribution(&self, time_index: usize, h_index: usize) -> &[f64] {
        &self.tables[time_index][h_index]
    }

    /// log f({n_j} | h) over the h grid, up to an h-independent constant.
    pub fn log_likelihood(&self, counts: &CountVector, time_index: usize) -> Result<Vec<f64>> {
        if time_index >= self.tables.len() {
            return Err(Error::InvalidArgument(format!(
                "time index {time_index} out of range"
            )));
        }
        let table = &self.tables[time_index];
        if table[0].len() != counts.counts.len() {
            return Err(Error::InvalidDimension(format!(
                "counts over {} outcomes but model has {}",
                counts.counts.len(),
                table[0].len()
            )));
        }
        Ok(table
            .iter()
            .map(|probs| {
                counts
                    .counts
                    .iter()
                    .zip(probs)
                    .filter(|(&n, _)| n > 0)
                    .map(|(&n, &p)| {
                        let p_eff = if self.floored {
                            p.max(REBUILT_LIKELIHOOD_FLOOR)
                        } else {
                            p
                        };
                        if p_eff > 0.0 {
                            n as f64 * p_eff.ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .sum()
            })
            .collect())
    }
}

/// Bayes' rule: posterior mass proportional to exp(loglik) * prior,
/// max-subtracted for stability.
pub fn posterior(loglik: &[f64], prior: &PosteriorGrid) -> Result<PosteriorGrid> {
    if loglik.len() != prior.h_grid.len() {
        return Err(Error::InvalidDimension(
            "likelihood and prior grids differ".into(),
        ));
    }
    let max = loglik
        .iter()
        .zip(&prior.mass)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegeneratePosterior(
            "likelihood is zero everywhere the prior has mass".into(),
        ));
    }
    let mass: Vec<f64> = loglik
        .iter()
        .zip(&prior.mass)
        .map(|(&l, &p)| if p > 0.0 { (l - max).exp() * p } else { 0.0 })
        .collect();
    PosteriorGrid::from_mass(prior.h_grid.clone(), mass)
}

/// Product of statistically independent posteriors sharing one prior, with the
/// prior's double counting divided out.
pub fn combine_posteriors(
    posteriors: &[PosteriorGrid],
    prior: &PosteriorGrid,
) -> Result<PosteriorGrid> {
    let first = posteriors
        .first()
        .ok_or_else(|| Error::InvalidArgument("no posteriors to combine".into()))?;
    for p in posteriors {
        if p.h_grid != prior.h_grid {
            return Err(Error::BasisMismatch("posterior grids differ".into()));
        }
    }
    let n = first.h_grid.len();
    let extra = posteriors.len() as i32 - 1;
    let mass: Vec<f64> = (0..n)
        .map(|i| {
            let prod: f64 = posteriors.iter().map(|p| p.mass[i]).product();
            if prior.mass[i] > 0.0 {
                prod / prior.mass[i].powi(extra)
            } else {
                0.0
            }
        })
        .collect();
    PosteriorGrid::from_mass(prior.h_grid.clone(), mass)
        .map_err(|_| Error::DegeneratePosterior("combined posterior has zero total mass".into()))
}

/// One sample -> estimate pipeline run: draw counts from the per-time truth
/// distributions, form per-time posteriors, combine, and take the MAP.
pub fn run_trial<R: rand::Rng>(
    model: &LikelihoodModel,
    truth_distributions: &[Vec<f64>],
    shots_per_time: &[u64],
    prior: &PosteriorGrid,
    rng: &mut R,
) -> Result<f64> {
    if truth_distributions.len() != model.times_ns.len()
        || shots_per_time.len() != model.times_ns.len()
    {
        return Err(Error::InvalidDimension(
            "truth/shots lists must match the model's time list".into(),
        ));
    }
    let mut posteriors = Vec::with_capacity(model.times_ns.len());
    for (i, truth) in truth_distributions.iter().enumerate() {
        let counts = sample_counts(truth, shots_per_time[i], rng)?;
        let loglik = model.log_likelihood(&counts, i)?;
        posteriors.push(posterior(&loglik, prior)?);
    }
    Ok(combine_posteriors(&posteriors, prior)?.map_estimate())
}

/// Summary statistics over repeated estimation trials.
#[derive(Debug, Clone)]
pub struct TrialStats {
    pub estimates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Sample variance of the estimates.
    pub variance: f64,
}

/// Run the full sample -> estimate pipeline `reps` times with independent RNG
/// streams derived from `root_seed`.
pub fn trial_statistics(
    model: &LikelihoodModel,
    truth_distributions: &[Vec<f64>],
    shots_per_time: &[u64],
    prior: &PosteriorGrid,
    reps: u64,
    root_seed: u64,
) -> Result<TrialStats> {
    if reps < 2 {
        return Err(Error::InvalidArgument("need at least 2 repetitions".into()));
    }
    let estimates: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded_rng(root_seed, r);
            run_trial(model, truth_distributions, shots_per_time, prior, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let variance = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(TrialStats {
        mean,
        sd: variance.sqrt(),
        variance,
        estimates,
    })
}
