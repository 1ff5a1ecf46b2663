//! Configuration-driven command-line front end. Each subcommand turns a TOML
//! run configuration (or a named preset) into deterministic CSV/JSON
//! artifacts; every output embeds the config hash, seed, and toolkit version.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    avg_cfi, fit_power_law, rolling_exponent, scan_initial_pattern, transition_scan, ScalingSeries,
};
use crate::basis::{enumerate_basis, OccupationPattern};
use crate::bayes::{grid_points, LikelihoodModel, ModelSource, PosteriorGrid, ProbeSpec};
use crate::dynamics::{evolve, initial_state, outcome_distribution, site_populations};
use crate::error::{Error, Result};
use crate::fisher::{cfi_at, cfi_central, cfi_empirical, qfi_at};
use crate::hamiltonian::{build_hamiltonian, dh_hamiltonian, ModelParams};
use crate::lindblad::{
    build_sector_basis, DecoherenceParams, DensityMatrix, LindbladPropagator, SectorBasis,
    DEFAULT_STEP_NS,
};
use crate::measurement::{
    apply_readout_error, empirical_distribution, sample_counts, seeded_rng, ReadoutFidelities,
};

/// Simulate and analyze gradient-field sensing on a qubit chain.
#[derive(Debug, Parser)]
#[command(name = "starksense", version = crate::VERSION)]
pub struct Cli {
    /// Path to a TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named built-in configuration (fig2a, fig3e, fig4_k5, fig5d, sm_s6, sm_s7).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Override the config's root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker thread count (default: all cores; env STARKSENSE_THREADS also works).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Site populations over time (closed system, plus open/observed variants).
    Transport,
    /// QFI and the exact, sampled, and open-system CFI over time.
    Fisher,
    /// Bayesian h estimation: single-time and multi-time protocols over a truth grid.
    Estimate,
    /// Windowed average-CFI scaling and its power-law exponent.
    Scaling,
    /// QFI/t^2 plateau scan over h for several chain lengths.
    Transition,
}

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub times: TimeGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<DecoherenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<TransitionSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sites: u32,
    pub excitations: u32,
    pub hopping_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_mhz: Option<f64>,
    /// 1-based occupied sites at t = 0; defaults to the standard scan pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_pattern: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start_ns: f64,
    pub stop_ns: f64,
    pub step_ns: f64,
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_ns > 0.0) || self.stop_ns < self.start_ns {
            return Err(Error::Config(format!(
                "invalid time grid [{}, {}] step {}",
                self.start_ns, self.stop_ns, self.step_ns
            )));
        }
        let n = ((self.stop_ns - self.start_ns) / self.step_ns).round() as usize + 1;
        Ok((0..n)
            .map(|i| self.start_ns + i as f64 * self.step_ns)
            .collect())
    }
}

/// Either a named table ("chain" = per-qubit idle-point values,
/// "chain_average" = uniform averages) or explicit per-qubit lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_us: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_us: Option<Vec<f64>>,
}

impl DecoherenceSection {
    pub fn resolve(&self, sites: u32) -> Result<DecoherenceParams> {
        let params = match (self.table.as_deref(), &self.t1_us, &self.t2star_us) {
            (Some("chain"), None, None) => DecoherenceParams::chain_defaults(),
            (Some("chain_average"), None, None) => DecoherenceParams::chain_average(),
            (Some(other), _, _) => {
                return Err(Error::Config(format!(
                    "unknown decoherence table '{other}' (expected 'chain' or 'chain_average')"
                )))
            }
            (None, Some(t1), Some(t2)) => DecoherenceParams::new(t1.clone(), t2.clone())?,
            _ => {
                return Err(Error::Config(
                    "decoherence needs either 'table' or both 't1_us' and 't2star_us'".into(),
                ))
            }
        };
        if params.t1_us.len() != sites as usize {
            return Err(Error::Config(format!(
                "decoherence table covers {} qubits but the model has {} sites",
                params.t1_us.len(),
                sites
            )));
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<Vec<f64>>,
}

impl ReadoutSection {
    pub fn resolve(&self, sites: u32) -> Result<ReadoutFidelities> {
        let fid = match (self.table.as_deref(), &self.f0, &self.f1) {
            (Some("chain"), None, None) => ReadoutFidelities::chain_defaults(),
            (Some(other), _, _) => {
                return Err(Error::Config(format!(
                    "unknown readout table '{other}' (expected 'chain')"
                )))
            }
            (None, Some(f0), Some(f1)) => ReadoutFidelities::new(f0.clone(), f1.clone())?,
            _ => {
                return Err(Error::Config(
                    "readout needs either 'table' or both 'f0' and 'f1'".into(),
                ))
            }
        };
        if fid.f0.len() != sites as usize {
            return Err(Error::Config(format!(
                "readout table covers {} qubits but the model has {} sites",
                fid.f0.len(),
                sites
            )));
        }
        Ok(fid)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub measure_times_ns: Vec<f64>,
    /// Total shot budget M, split equally across the measurement times.
    pub shots: u64,
    pub repetitions: u64,
    /// Likelihood source: "exact", "open", or "rebuilt".
    #[serde(default = "default_model")]
    pub model: String,
    pub true_h: GridSection,
    pub grid: GridSection,
    #[serde(default = "default_calibration_shots")]
    pub calibration_shots: u64,
    #[serde(default = "default_calibration_step")]
    pub calibration_step_mhz: f64,
}

fn default_model() -> String {
    "exact".into()
}
fn default_calibration_shots() -> u64 {
    100_000
}
fn default_calibration_step() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherSection {
    #[serde(default = "default_empirical_shots")]
    pub empirical_shots: u64,
    /// Finite-difference step for the sampled and open-system CFI columns.
    #[serde(default = "default_fd_step")]
    pub fd_step_mhz: f64,
}

fn default_empirical_shots() -> u64 {
    250_000
}
fn default_fd_step() -> f64 {
    0.1
}

impl Default for FisherSection {
    fn default() -> Self {
        Self {
            empirical_shots: default_empirical_shots(),
            fd_step_mhz: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    /// Number K of time points averaged per window.
    pub window_points: usize,
    /// Spacing between consecutive window times (the time grid must use the
    /// same step so windows fall on grid points).
    pub window_spacing_ns: f64,
    /// Also run the open-system variant and its rolling exponent.
    #[serde(default)]
    pub open: bool,
    #[serde(default = "default_rolling_window")]
    pub rolling_window_ns: f64,
}

fn default_rolling_window() -> f64 {
    200.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSection {
    pub sizes: Vec<u32>,
    pub h: GridSection,
    pub horizon_ns: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn initial_pattern(&self) -> Result<OccupationPattern> {
        match &self.model.initial_pattern {
            Some(sites) => {
                let p = OccupationPattern::new(sites.clone());
                if p.excitations() != self.model.excitations as usize
                    || p.sites().iter().any(|&s| s == 0 || s > self.model.sites)
                {
                    return Err(Error::Config(format!(
                        "initial pattern {p} does not fit L={}, k={}",
                        self.model.sites, self.model.excitations
                    )));
                }
                Ok(p)
            }
            None => scan_initial_pattern(self.model.sites, self.model.excitations),
        }
    }

    pub fn probe(&self) -> Result<ProbeSpec> {
        Ok(ProbeSpec {
            sites: self.model.sites,
            excitations: self.model.excitations,
            hopping_mhz: self.model.hopping_mhz,
            initial: self.initial_pattern()?,
        })
    }

    fn gradient(&self) -> Result<f64> {
        self.model
            .gradient_mhz
            .ok_or_else(|| Error::Config("this command needs model.gradient_mhz".into()))
    }
}

pub fn preset_toml(name: &str) -> Option<&'static str> {
    match name {
        "fig2a" => Some(include_str!("../presets/fig2a.toml")),
        "fig3e" => Some(include_str!("../presets/fig3e.toml")),
        "fig4_k5" => Some(include_str!("../presets/fig4_k5.toml")),
        "fig5d" => Some(include_str!("../presets/fig5d.toml")),
        "sm_s6" => Some(include_str!("../presets/sm_s6.toml")),
        "sm_s7" => Some(include_str!("../presets/sm_s7.toml")),
        _ => None,
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "use either --config or --preset, not both".into(),
            ))
        }
        (Some(path), None) => std::fs::read_to_string(path)?,
        (None, Some(name)) => preset_toml(name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?
            .to_string(),
        (None, None) => {
            return Err(Error::Config(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    let mut config = RunConfig::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

// ---------------------------------------------------------------------------
// Output plumbing

struct Artifacts {
    dir: PathBuf,
    header: String,
}

impl Artifacts {
    fn new(out_dir: &Path, config: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        let canonical = config.to_toml()?;
        let hash = Sha256::digest(canonical.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        let header = format!(
            "# config_sha256 = {hex}\n# seed = {}\n# version = {}\n",
            config.seed,
            crate::VERSION
        );
        Ok(Self {
            dir: out_dir.to_path_buf(),
            header,
        })
    }

    /// CSV with the provenance header, a column row, and one row per record.
    fn write_csv(&self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        buf.extend_from_slice(self.header.as_bytes());
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(columns)
            .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let buf = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        File::create(&path)?.write_all(&buf)?;
        Ok(path)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let text =
            serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        File::create(&path)?.write_all(text.as_bytes())?;
        Ok(path)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// Per-site occupancy marginals of a sector-basis diagonal distribution.
fn open_site_populations(basis: &SectorBasis, probs: &[f64]) -> Vec<f64> {
    let mut pops = vec![0.0; basis.sites() as usize];
    for (i, pattern) in basis.patterns().enumerate() {
        for &site in pattern.sites() {
            pops[site as usize - 1] += probs[i];
        }
    }
    pops
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_transport(config: &RunConfig, art: &Artifacts) -> Result<Vec<PathBuf>> {
    let gradient = config.gradient()?;
    let pattern = config.initial_pattern()?;
    let basis = enumerate_basis(config.model.sites, config.model.excitations)?;
    let h = build_hamiltonian(
        &ModelParams::new(config.model.sites, config.model.hopping_mhz, gradient),
        &basis,
    )?;
    let psi0 = initial_state(&basis, &pattern)?;
    let times = config.times.points()?;
    let readout = config
        .readout
        .as_ref()
        .map(|r| r.resolve(config.model.sites))
        .transpose()?;

    let l = config.model.sites as usize;
    let mut columns: Vec<String> = vec!["t_ns".into()];
    columns.extend((1..=l).map(|j| format!("p_site_{j}")));
    if readout.is_some() {
        columns.extend((1..=l).map(|j| format!("p_obs_site_{j}")));
    }
    let column_refs: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();

    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let psi = evolve(&h, &psi0, t)?;
        let pops = site_populations(&outcome_distribution(&psi));
        let mut row = vec![fmt(t)];
        row.extend(pops.iter().map(|&p| fmt(p)));
        if let Some(fid) = &readout {
            // occupancy marginal through the single-qubit readout channel
            row.extend(
                pops.iter()
                    .enumerate()
                    .map(|(j, &p)| fmt(apply_readout_error([1.0 - p, p], fid, j)[1])),
            );
        }
        rows.push(row);
    }
    let mut written = vec![art.write_csv("transport.csv", &column_refs, &rows)?];

    if let Some(dec) = &config.decoherence {
        let dec = dec.resolve(config.model.sites)?;
        let sector = build_sector_basis(config.model.sites, config.model.excitations)?;
        let prop = LindbladPropagator::new(
            &ModelParams::new(config.model.sites, config.model.hopping_mhz, gradient),
            &dec,
            &sector,
        )?;
        let mut rho = DensityMatrix::pure_pattern(&sector, &pattern)?;
        let mut t_now = 0.0;
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            rho = prop.evolve(&rho, t - t_now, DEFAULT_STEP_NS)?;
            t_now = t;
            let probs: Vec<f64> = crate::lindblad::outcome_distribution_open(&rho)
                .iter()
                .copied()
                .collect();
            let pops = open_site_populations(&sector, &probs);
            let mut row = vec![fmt(t)];
            row.extend(pops.iter().map(|&p| fmt(p)));
            rows.push(row);
        }
        let open_columns: Vec<String> = std::iter::once("t_ns".to_string())
            .chain((1..=l).map(|j| format!("p_site_{j}")))
            .collect();
        let open_refs: Vec<&str> = open_columns.iter().map(|c| c.as_str()).collect();
        written.push(art.write_csv("transport_open.csv", &open_refs, &rows)?);
    }
    Ok(written)
}

fn cmd_fisher(config: &RunConfig, art: &Artifacts) -> Result<Vec<PathBuf>> {
    let gradient = config.gradient()?;
    let section = config.fisher.clone().unwrap_or_default();
    let eps = section.fd_step_mhz;
    if !(eps > 0.0) {
        return Err(Error::Config("fisher.fd_step_mhz must be positive".into()));
    }
    let probe = config.probe()?;
    let times = config.times.points()?;

    let basis = enumerate_basis(probe.sites, probe.excitations)?;
    let dh = dh_hamiltonian(&basis);
    let h = build_hamiltonian(
        &ModelParams::new(probe.sites, probe.hopping_mhz, gradient),
        &basis,
    )?;
    let psi0 = initial_state(&basis, &probe.initial)?;

    // Open-system variant with the configured (or idle-point) decoherence,
    // propagated incrementally at h and h +/- eps for a central difference.
    let dec = match &config.decoherence {
        Some(d) => d.resolve(probe.sites)?,
        None if probe.sites == 9 => DecoherenceParams::chain_defaults(),
        None => {
            return Err(Error::Config(
                "fisher needs a [decoherence] table when sites != 9".into(),
            ))
        }
    };
    let sector = build_sector_basis(probe.sites, probe.excitations)?;
    let rho0 = DensityMatrix::pure_pattern(&sector, &probe.initial)?;
    let offsets = [-eps, 0.0, eps];
    let props: Vec<LindbladPropagator> = offsets
        .iter()
        .map(|d| {
            LindbladPropagator::new(
                &ModelParams::new(probe.sites, probe.hopping_mhz, gradient + d),
                &dec,
                &sector,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rhos = vec![rho0.clone(), rho0.clone(), rho0];
    let mut t_now = 0.0;

    let columns = ["t_ns", "qfi", "cfi_exact", "cfi_empirical", "cfi_open"];
    let mut rows = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let qfi = qfi_at(&h, &dh, &psi0, t)?;
        let cfi = cfi_at(&h, &dh, &psi0, t)?;

        let p_h = probe.closed_distribution(gradient, t)?;
        let p_minus = probe.closed_distribution(gradient - eps, t)?;
        let mut rng_h = seeded_rng(config.seed, 2 * i as u64);
        let mut rng_m = seeded_rng(config.seed, 2 * i as u64 + 1);
        let f_h =
            empirical_distribution(&sample_counts(&p_h, section.empirical_shots, &mut rng_h)?)?;
        let f_m = empirical_distribution(&sample_counts(
            &p_minus,
            section.empirical_shots,
            &mut rng_m,
        )?)?;
        let cfi_emp = cfi_empirical(&f_h, &f_m, eps)?;

        for (rho, prop) in rhos.iter_mut().zip(&props) {
            *rho = prop.evolve(rho, t - t_now, DEFAULT_STEP_NS)?;
        }
        t_now = t;
        let dists: Vec<Vec<f64>> = rhos
            .iter()
            .map(|r| {
                crate::lindblad::outcome_distribution_open(r)
                    .iter()
                    .copied()
                    .collect()
            })
            .collect();
        let cfi_open = cfi_central(&dists[2], &dists[0], &dists[1], eps)?;

        rows.push(vec![
            fmt(t),
            fmt(qfi),
            fmt(cfi),
            fmt(cfi_emp),
            fmt(cfi_open),
        ]);
    }
    Ok(vec![art.write_csv("fisher.csv", &columns, &rows)?])
}

fn cmd_estimate(config: &RunConfig, art: &Artifacts) -> Result<Vec<PathBuf>> {
    let section = config
        .estimate
        .as_ref()
        .ok_or_else(|| Error::Config("estimate needs an [estimate] section".into()))?;
    let probe = config.probe()?;
    let times = &section.measure_times_ns;
    let k = times.len();
    if k == 0 {
        return Err(Error::Config("estimate.measure_times_ns is empty".into()));
    }
    if section.shots % k as u64 != 0 {
        return Err(Error::Config(format!(
            "estimate.shots = {} is not divisible by the {} measurement times",
            section.shots, k
        )));
    }
    let per_time = section.shots / k as u64;
    let h_grid = grid_points(section.grid.min, section.grid.max, section.grid.step)?;
    let truths = grid_points(section.true_h.min, section.true_h.max, section.true_h.step)?;
    let prior = PosteriorGrid::uniform(section.grid.min, section.grid.max, section.grid.step)?;

    let source = match section.model.as_str() {
        "exact" => ModelSource::ExactClosed,
        "open" => {
            let dec = config
                .decoherence
                .as_ref()
                .ok_or_else(|| {
                    Error::Config("estimate.model = 'open' needs a [decoherence] section".into())
                })?
                .resolve(probe.sites)?;
            ModelSource::ExactOpen(dec)
        }
        "rebuilt" => ModelSource::Rebuilt {
            calibration_shots: section.calibration_shots,
            calibration_step_mhz: section.calibration_step_mhz,
            seed: config.seed ^ 0xC0FFEE,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown estimate.model '{other}' (expected exact/open/rebuilt)"
            )))
        }
    };
    let model = LikelihoodModel::build(&probe, times, &h_grid, &source)?;

    let truth_dist = |g: f64, t: f64| -> Result<Vec<f64>> {
        match &source {
            ModelSource::ExactOpen(dec) => probe.open_distribution(g, t, dec),
            _ => probe.closed_distribution(g, t),
        }
    };

    let columns = ["true_h_mhz", "protocol", "h_est_mhz", "sd_mhz"];
    let mut rows = Vec::new();
    for (ti, &truth) in truths.iter().enumerate() {
        let dists: Vec<Vec<f64>> = times
            .iter()
            .map(|&t| truth_dist(truth, t))
            .collect::<Result<Vec<_>>>()?;
        // single-time protocols: the whole budget at one time, zero elsewhere
        let mut protocols: Vec<(String, Vec<u64>)> = times
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                let mut shots = vec![0u64; k];
                shots[j] = section.shots;
                (format!("t{t}"), shots)
            })
            .collect();
        protocols.push(("multi".into(), vec![per_time; k]));

        for (pi, (name, shots)) in protocols.iter().enumerate() {
            let root = config.seed.wrapping_add(
                ((ti * protocols.len() + pi) as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15),
            );
            let stats = crate::bayes::trial_statistics(
                &model,
                &dists,
                shots,
                &prior,
                section.repetitions,
                root,
            )?;
            rows.push(vec![
                fmt(truth),
                name.clone(),
                fmt(stats.mean),
                fmt(stats.sd),
            ]);
        }
    }
    Ok(vec![art.write_csv("estimate.csv", &columns, &rows)?])
}

/// Sliding K-point window averages of a CFI-vs-time series.
fn windowed_series(times: &[f64], cfi: &[f64], k: usize) -> Result<ScalingSeries> {
    if k < 2 || times.len() < k {
        return Err(Error::Config(format!(
            "need at least window_points = {k} >= 2 time samples"
        )));
    }
    let mut t_avg = Vec::new();
    let mut f_avg = Vec::new();
    for i in 0..=times.len() - k {
        let (t, f) = avg_cfi(&times[i..i + k], &cfi[i..i + k])?;
        t_avg.push(t);
        f_avg.push(f);
    }
    ScalingSeries::new(t_avg, f_avg)
}

fn cmd_scaling(config: &RunConfig, art: &Artifacts) -> Result<Vec<PathBuf>> {
    let section = config
        .scaling
        .as_ref()
        .ok_or_else(|| Error::Config("scaling needs a [scaling] section".into()))?;
    let gradient = config.gradient()?;
    if (config.times.step_ns - section.window_spacing_ns).abs() > 1e-9 {
        return Err(Error::Config(
            "times.step_ns must equal scaling.window_spacing_ns so windows fall on the grid".into(),
        ));
    }
    let probe = config.probe()?;
    let times = config.times.points()?;

    let basis = enumerate_basis(probe.sites, probe.excitations)?;
    let dh = dh_hamiltonian(&basis);
    let h = build_hamiltonian(
        &ModelParams::new(probe.sites, probe.hopping_mhz, gradient),
        &basis,
    )?;
    let psi0 = initial_state(&basis, &probe.initial)?;
    let cfi: Vec<f64> = times
        .iter()
        .map(|&t| cfi_at(&h, &dh, &psi0, t))
        .collect::<Result<Vec<_>>>()?;
    let series = windowed_series(&times, &cfi, section.window_points)?;
    let fit = fit_power_law(&series)?;

    let columns = ["t_avg_ns", "f_avg_mhz2"];
    let rows: Vec<Vec<String>> = series
        .t_avg_ns
        .iter()
        .zip(&series.y)
        .map(|(&t, &f)| vec![fmt(t), fmt(f)])
        .collect();
    let mut written = vec![art.write_csv("scaling.csv", &columns, &rows)?];

    let mut summary = serde_json::json!({
        "command": "scaling",
        "window_points": section.window_points,
        "closed_fit": fit,
    });

    if section.open {
        let dec = config
            .decoherence
            .as_ref()
            .ok_or_else(|| Error::Config("scaling.open needs a [decoherence] section".into()))?
            .resolve(probe.sites)?;
        let open_cfi = open_cfi_series(&probe, gradient, &dec, &times, 0.1)?;
        let open_series = windowed_series(&times, &open_cfi, section.window_points)?;
        let rolling = rolling_exponent(&open_series, section.rolling_window_ns)?;

        let rows: Vec<Vec<String>> = open_series
            .t_avg_ns
            .iter()
            .zip(&open_series.y)
            .map(|(&t, &f)| vec![fmt(t), fmt(f)])
            .collect();
        written.push(art.write_csv("scaling_open.csv", &columns, &rows)?);
        let roll_rows: Vec<Vec<String>> =
            rolling.iter().map(|&(t, b)| vec![fmt(t), fmt(b)]).collect();
        written.push(art.write_csv(
            "scaling_open_rolling.csv",
            &["window_start_ns", "beta"],
            &roll_rows,
        )?);
        summary["rolling_window_ns"] = serde_json::json!(section.rolling_window_ns);
        summary["open_final_beta"] = serde_json::json!(rolling.last().map(|&(_, b)| b));
    }
    written.push(art.write_json("scaling.json", &summary)?);
    Ok(written)
}

/// Open-system computational-basis CFI over a time grid via a central
/// difference of incrementally propagated populations.
pub fn open_cfi_series(
    probe: &ProbeSpec,
    gradient_mhz: f64,
    dec: &DecoherenceParams,
    times_ns: &[f64],
    eps_mhz: f64,
) -> Result<Vec<f64>> {
    let sector = build_sector_basis(probe.sites, probe.excitations)?;
    let rho0 = DensityMatrix::pure_pattern(&sector, &probe.initial)?;
    let offsets = [-eps_mhz, 0.0, eps_mhz];
    let props: Vec<LindbladPropagator> = offsets
        .iter()
        .map(|d| {
            LindbladPropagator::new(
                &ModelParams::new(probe.sites, probe.hopping_mhz, gradient_mhz + d),
                dec,
                &sector,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rhos = vec![rho0.clone(), rho0.clone(), rho0];
    let mut t_now = 0.0;
    let mut out = Vec::with_capacity(times_ns.len());
    for &t in times_ns {
        for (rho, prop) in rhos.iter_mut().zip(&props) {
            *rho = prop.evolve(rho, t - t_now, DEFAULT_STEP_NS)?;
        }
        t_now = t;
        let dists: Vec<Vec<f64>> = rhos
            .iter()
            .map(|r| {
                crate::lindblad::outcome_distribution_open(r)
                    .iter()
                    .copied()
                    .collect()
            })
            .collect();
        out.push(cfi_central(&dists[2], &dists[0], &dists[1], eps_mhz)?);
    }
    Ok(out)
}

fn cmd_transition(config: &RunConfig, art: &Artifacts) -> Result<Vec<PathBuf>> {
    let section = config
        .transition
        .as_ref()
        .ok_or_else(|| Error::Config("transition needs a [transition] section".into()))?;
    let h_grid = grid_points(section.h.min, section.h.max, section.h.step)?;
    let scan = transition_scan(
        &section.sizes,
        config.model.excitations,
        config.model.hopping_mhz,
        &h_grid,
        section.horizon_ns,
    )?;

    let columns = ["sites", "h_mhz", "qfi_over_t2"];
    let mut rows = Vec::new();
    for curve in &scan.curves {
        for (&g, &v) in scan.h_grid_mhz.iter().zip(&curve.plateau) {
            rows.push(vec![curve.sites.to_string(), fmt(g), fmt(v)]);
        }
    }
    let csv = art.write_csv("transition.csv", &columns, &rows)?;
    let summary = serde_json::json!({
        "command": "transition",
        "curves": scan.curves.iter().map(|c| serde_json::json!({
            "sites": c.sites,
            "h_c_mhz": c.h_c_mhz,
            "converged": c.converged,
        })).collect::<Vec<_>>(),
    });
    let json = art.write_json("transition.json", &summary)?;
    Ok(vec![csv, json])
}

// ---------------------------------------------------------------------------
// Entry point

/// Exit code mapping: 0 success, 2 config, 3 non-convergence, 4 degenerate
/// posterior, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::NonConvergence(_) => 3,
        Error::DegeneratePosterior(_) => 4,
        _ => 1,
    }
}

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let threads = cli.threads.or_else(|| {
        std::env::var("STARKSENSE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // ignore the error if a global pool already exists (e.g. in tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let config = load_config(cli)?;
    let art = Artifacts::new(&cli.out, &config)?;
    match cli.command {
        Command::Transport => cmd_transport(&config, &art),
        Command::Fisher => cmd_fisher(&config, &art),
        Command::Estimate => cmd_estimate(&config, &art),
        Command::Scaling => cmd_scaling(&config, &art),
        Command::Transition => cmd_transition(&config, &art),
    }
}

/// Parse argv, run, and report; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version printing; usage errors are config errors
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
