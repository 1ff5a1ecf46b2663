//! Derived analyses: multi-time averaged CFI, power-law scaling fits, the
//! localization-transition scan via long-time QFI/t^2, and the quantum-walk
//! fidelity metric.

use rayon::prelude::*;

use crate::basis::{enumerate_basis, OccupationPattern};
use crate::dynamics::initial_state;
use crate::error::{Error, Result};
use crate::fisher::qfi_at;
use crate::hamiltonian::{build_hamiltonian, dh_hamiltonian, ModelParams};

/// A positive series y(t_avg) to be fitted as y ~ c * t^beta.
#[derive(Debug, Clone)]
pub struct ScalingSeries {
    pub t_avg_ns: Vec<f64>,
    pub y: Vec<f64>,
}

impl ScalingSeries {
    pub fn new(t_avg_ns: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t_avg_ns.len() != y.len() {
            return Err(Error::InvalidDimension("series length mismatch".into()));
        }
        if !t_avg_ns.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(
                "t_avg must be strictly increasing".into(),
            ));
        }
        Ok(Self { t_avg_ns, y })
    }
}

/// Mean of per-time CFIs and mean time.
pub fn avg_cfi(times_ns: &[f64], cfi_values: &[f64]) -> Result<(f64, f64)> {
    if times_ns.is_empty() || times_ns.len() != cfi_values.len() {
        return Err(Error::InvalidDimension(
            "need equal, nonempty time and CFI lists".into(),
        ));
    }
    let k = times_ns.len() as f64;
    Ok((
        times_ns.iter().sum::<f64>() / k,
        cfi_values.iter().sum::<f64>() / k,
    ))
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Least-squares slope of log y versus log t.
pub fn fit_power_law(series: &ScalingSeries) -> Result<PowerLawFit> {
    let n = series.y.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 points to fit, got {n}"
        )));
    }
    if series.y.iter().any(|&y| !(y > 0.0)) || series.t_avg_ns.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument(
            "power-law fit requires strictly positive t and y".into(),
        ));
    }
    let xs: Vec<f64> = series.t_avg_ns.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = series.y.iter().map(|y| y.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n as f64;
    let ym = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        residual,
    })
}

/// `fit_power_law` applied over sliding windows of width `window_ns`; returns
/// (window center, exponent) pairs.
pub fn rolling_exponent(series: &ScalingSeries, window_ns: f64) -> Result<Vec<(f64, f64)>> {
    let n = series.t_avg_ns.len();
    let t_max = series.t_avg_ns[n - 1];
    let mut out = Vec::new();
    for start in 0..n {
        let t0 = series.t_avg_ns[start];
        let end = series.t_avg_ns[start..]
            .iter()
            .take_while(|&&t| t <= t0 + window_ns + 1e-9)
            .count()
            + start;
        if end - start >= 3 {
            let sub = ScalingSeries::new(
                series.t_avg_ns[start..end].to_vec(),
                series.y[start..end].to_vec(),
            )?;
            let fit = fit_power_law(&sub)?;
            out.push(((t0 + series.t_avg_ns[end - 1]) / 2.0, fit.exponent));
        }
        // stop once a window has reached the end of the series; later starts
        // would only fit shrinking tails
        if series.t_avg_ns[end - 1] >= t_max - 1e-9 {
            break;
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(
            "window too small: no span holds 3 or more points".into(),
        ));
    }
    Ok(out)
}

/// Long-time plateau of QFI/t^2 versus gradient field for one or several chain
/// lengths, with the per-length peak position.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TransitionScan {
    pub h_grid_mhz: Vec<f64>,
    pub curves: Vec<TransitionCurve>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TransitionCurve {
    pub sites: u32,
    /// Time-averaged QFI/t^2 over the final quarter of the horizon, per h.
    pub plateau: Vec<f64>,
    /// argmax of the plateau curve over the h grid.
    pub h_c_mhz: f64,
    /// False when the last-quarter and preceding-quarter means differ by more
    /// than 5% at the peak.
    pub converged: bool,
}

/// Initial pattern used in the scan: center site for k=1; sites at one and two
/// thirds of the chain for k=2.
pub fn scan_initial_pattern(sites: u32, excitations: u32) -> Result<OccupationPattern> {
    match excitations {
        1 => Ok(OccupationPattern::new(vec![(sites + 1) / 2])),
        2 => {
            let a = (((sites + 1) as f64) / 3.0).round().max(1.0) as u32;
            let b = sites + 1 - a;
            if a >= b {
                return Err(Error::InvalidDimension(format!(
                    "chain of {sites} sites too short for a double-excitation scan"
                )));
            }
            Ok(OccupationPattern::new(vec![a, b]))
        }
        k => Err(Error::InvalidArgument(format!(
            "transition scan supports k = 1 or 2, got {k}"
        ))),
    }
}

/// QFI/t^2 sampled over (0, horizon]; returns the plateau statistics at one
/// (L, h) point.
fn plateau_at(
    sites: u32,
    excitations: u32,
    hopping_mhz: f64,
    gradient_mhz: f64,
    horizon_ns: f64,
    n_samples: usize,
) -> Result<(f64, bool)> {
    let basis = enumerate_basis(sites, excitations)?;
    let h = build_hamiltonian(&ModelParams::new(sites, hopping_mhz, gradient_mhz), &basis)?;
    let dh = dh_hamiltonian(&basis);
    let psi0 = initial_state(&basis, &scan_initial_pattern(sites, excitations)?)?;
    let dt = horizon_ns / n_samples as f64;
    let normalized: Vec<f64> = (1..=n_samples)
        .map(|i| {
            let t = i as f64 * dt;
            Ok(qfi_at(&h, &dh, &psi0, t)? / (t * t))
        })
        .collect::<Result<Vec<_>>>()?;
    let q = n_samples / 4;
    let last: f64 = normalized[n_samples - q..].iter().sum::<f64>() / q as f64;
    let prev: f64 = normalized[n_samples - 2 * q..n_samples - q]
        .iter()
        .sum::<f64>()
        / q as f64;
    let converged = (last - prev).abs() <= 0.05 * last.abs().max(1e-300);
    Ok((last, converged))
}

/// Scan QFI/t^2 plateaus over an h grid for each chain length; the peak marks
/// the localization transition.
pub fn transition_scan(
    sites_list: &[u32],
    excitations: u32,
    hopping_mhz: f64,
    h_grid_mhz: &[f64],
    horizon_ns: f64,
) -> Result<TransitionScan> {
    if h_grid_mhz.len() < 3 {
        return Err(Error::InvalidArgument("h grid too small".into()));
    }
    let n_samples = 400;
    let curves = sites_list
        .iter()
        .map(|&l| {
            let points: Vec<(f64, bool)> = h_grid_mhz
                .par_iter()
                .map(|&g| plateau_at(l, excitations, hopping_mhz, g, horizon_ns, n_samples))
                .collect::<Result<Vec<_>>>()?;
            let plateau: Vec<f64> = points.iter().map(|p| p.0).collect();
            let peak = plateau
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            if !points[peak].1 {
                return Err(Error::NonConvergence(format!(
                    "QFI/t^2 plateau not converged at L={l}, h={} MHz; extend the horizon",
                    h_grid_mhz[peak]
                )));
            }
            Ok(TransitionCurve {
                sites: l,
                plateau,
                h_c_mhz: h_grid_mhz[peak],
                converged: points[peak].1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionScan {
        h_grid_mhz: h_grid_mhz.to_vec(),
        curves,
    })
}

/// Bhattacharyya coefficient between two normalized distributions.
pub fn walk_fidelity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDimension(
            "distributions have different lengths".into(),
        ));
    }
    for (name, d) in [("p", p), ("q", q)] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > 1e-6 || d.iter().any(|&x| x < -1e-12) {
            return Err(Error::InvalidArgument(format!(
                "{name} is not a normalized distribution (sum {s})"
            )));
        }
    }
    Ok(p.iter()
        .zip(q)
        .map(|(&a, &b)| (a.max(0.0) * b.max(0.0)).sqrt())
        .sum())
}
