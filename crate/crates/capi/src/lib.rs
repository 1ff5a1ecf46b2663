//! C ABI for the chain-sensing toolkit: opaque probe handles, flat buffers,
//! and integer status codes. Every entry point is panic-safe; pointers are
//! only written on STARKSENSE_STATUS_OK.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use starksense::basis::OccupationPattern;
use starksense::bayes::{
    grid_points, trial_statistics, LikelihoodModel, ModelSource, PosteriorGrid, ProbeSpec,
};
use starksense::dynamics::{evolve, initial_state, outcome_distribution, site_populations};
use starksense::error::Error;
use starksense::fisher::{cfi_at, qfi_at};
use starksense::hamiltonian::{build_hamiltonian, dh_hamiltonian, ModelParams};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarksenseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDimension = 3,
    PatternNotFound = 4,
    SingularReadout = 5,
    DegeneratePosterior = 6,
    NonConvergence = 7,
    Internal = 8,
}

fn status_of(err: &Error) -> StarksenseStatus {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) => StarksenseStatus::InvalidArgument,
        Error::InvalidDimension(_) | Error::BasisMismatch(_) => StarksenseStatus::InvalidDimension,
        Error::PatternNotFound(_) => StarksenseStatus::PatternNotFound,
        Error::SingularReadout { .. } => StarksenseStatus::SingularReadout,
        Error::DegeneratePosterior(_) => StarksenseStatus::DegeneratePosterior,
        Error::NonConvergence(_) => StarksenseStatus::NonConvergence,
        Error::Io(_) => StarksenseStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> StarksenseStatus) -> StarksenseStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(StarksenseStatus::Internal)
}

/// Opaque probe handle: chain geometry, initial pattern, and the outcome
/// basis dimension are fixed at construction.
pub struct StarksenseProbe {
    spec: ProbeSpec,
    dim: usize,
}

/// Toolkit version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn starksense_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a probe. `initial_sites` lists the 1-based occupied sites
/// (`initial_len` of them, equal to `excitations`). On success writes a heap
/// handle to `out`; release it with `starksense_probe_free`.
///
/// # Safety
/// `initial_sites` must point to `initial_len` readable `u32`s (or be NULL
/// with `initial_len == 0`); `out` must be a valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_new(
    sites: u32,
    excitations: u32,
    hopping_mhz: f64,
    initial_sites: *const u32,
    initial_len: usize,
    out: *mut *mut StarksenseProbe,
) -> StarksenseStatus {
    if out.is_null() || (initial_sites.is_null() && initial_len > 0) {
        return StarksenseStatus::NullPointer;
    }
    let occupied: Vec<u32> = std::slice::from_raw_parts(initial_sites, initial_len).to_vec();
    guarded(|| {
        let initial = OccupationPattern::new(occupied);
        if initial.excitations() != excitations as usize
            || initial.sites().iter().any(|&s| s == 0 || s > sites)
        {
            return StarksenseStatus::InvalidArgument;
        }
        let basis = match starksense::basis::enumerate_basis(sites, excitations) {
            Ok(b) => b,
            Err(e) => return status_of(&e),
        };
        let probe = StarksenseProbe {
            spec: ProbeSpec {
                sites,
                excitations,
                hopping_mhz,
                initial,
            },
            dim: basis.dim(),
        };
        unsafe { *out = Box::into_raw(Box::new(probe)) };
        StarksenseStatus::Ok
    })
}

/// Release a probe handle. NULL is a no-op.
///
/// # Safety
/// `probe` must be NULL or a handle from `starksense_probe_new` that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_free(probe: *mut StarksenseProbe) {
    if !probe.is_null() {
        drop(Box::from_raw(probe));
    }
}

/// Number of measurement outcomes (the subspace dimension).
///
/// # Safety
/// `probe` must be a live handle; `out` must be valid and writable.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_dim(
    probe: *const StarksenseProbe,
    out: *mut usize,
) -> StarksenseStatus {
    if probe.is_null() || out.is_null() {
        return StarksenseStatus::NullPointer;
    }
    *out = (*probe).dim;
    StarksenseStatus::Ok
}

/// Closed-system outcome distribution at (gradient, t). `out` must hold
/// `starksense_probe_dim` doubles.
///
/// # Safety
/// `probe` must be a live handle; `out` must point to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_distribution(
    probe: *const StarksenseProbe,
    gradient_mhz: f64,
    t_ns: f64,
    out: *mut f64,
    out_len: usize,
) -> StarksenseStatus {
    if probe.is_null() || out.is_null() {
        return StarksenseStatus::NullPointer;
    }
    let probe = &*probe;
    if out_len != probe.dim {
        return StarksenseStatus::InvalidDimension;
    }
    guarded(
        || match probe.spec.closed_distribution(gradient_mhz, t_ns) {
            Ok(p) => {
                unsafe { std::slice::from_raw_parts_mut(out, out_len) }.copy_from_slice(&p);
                StarksenseStatus::Ok
            }
            Err(e) => status_of(&e),
        },
    )
}

/// Per-site occupancy at (gradient, t). `out` must hold `sites` doubles.
///
/// # Safety
/// `probe` must be a live handle; `out` must point to `out_len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_site_populations(
    probe: *const StarksenseProbe,
    gradient_mhz: f64,
    t_ns: f64,
    out: *mut f64,
    out_len: usize,
) -> StarksenseStatus {
    if probe.is_null() || out.is_null() {
        return StarksenseStatus::NullPointer;
    }
    let probe = &*probe;
    if out_len != probe.spec.sites as usize {
        return StarksenseStatus::InvalidDimension;
    }
    guarded(|| {
        let result = (|| {
            let basis =
                starksense::basis::enumerate_basis(probe.spec.sites, probe.spec.excitations)?;
            let ham = build_hamiltonian(
                &ModelParams::new(probe.spec.sites, probe.spec.hopping_mhz, gradient_mhz),
                &basis,
            )?;
            let psi0 = initial_state(&basis, &probe.spec.initial)?;
            let psi = evolve(&ham, &psi0, t_ns)?;
            Ok::<_, Error>(site_populations(&outcome_distribution(&psi)))
        })();
        match result {
            Ok(p) => {
                unsafe { std::slice::from_raw_parts_mut(out, out_len) }.copy_from_slice(&p);
                StarksenseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Quantum (`out_qfi`) and computational-basis classical (`out_cfi`) Fisher
/// information in MHz^-2 at (gradient, t). Either output may be NULL.
///
/// # Safety
/// `probe` must be a live handle; each non-NULL output must be writable.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_fisher(
    probe: *const StarksenseProbe,
    gradient_mhz: f64,
    t_ns: f64,
    out_qfi: *mut f64,
    out_cfi: *mut f64,
) -> StarksenseStatus {
    if probe.is_null() {
        return StarksenseStatus::NullPointer;
    }
    let probe = &*probe;
    guarded(|| {
        let result = (|| {
            let basis =
                starksense::basis::enumerate_basis(probe.spec.sites, probe.spec.excitations)?;
            let ham = build_hamiltonian(
                &ModelParams::new(probe.spec.sites, probe.spec.hopping_mhz, gradient_mhz),
                &basis,
            )?;
            let dh = dh_hamiltonian(&basis);
            let psi0 = initial_state(&basis, &probe.spec.initial)?;
            Ok::<_, Error>((
                qfi_at(&ham, &dh, &psi0, t_ns)?,
                cfi_at(&ham, &dh, &psi0, t_ns)?,
            ))
        })();
        match result {
            Ok((q, c)) => {
                if !out_qfi.is_null() {
                    unsafe { *out_qfi = q };
                }
                if !out_cfi.is_null() {
                    unsafe { *out_cfi = c };
                }
                StarksenseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Repeated multi-time Bayesian estimation of the gradient. Shots are split
/// equally over `times_ns`; the posterior grid spans [grid_min, grid_max]
/// with `grid_step`. Writes the mean MAP estimate and its SD over
/// `repetitions` seeded trials.
///
/// # Safety
/// `probe` must be a live handle; `times_ns` must point to `n_times` readable
/// doubles; `out_mean` and `out_sd` must be valid and writable.
#[no_mangle]
pub unsafe extern "C" fn starksense_probe_estimate(
    probe: *const StarksenseProbe,
    true_gradient_mhz: f64,
    times_ns: *const f64,
    n_times: usize,
    total_shots: u64,
    grid_min: f64,
    grid_max: f64,
    grid_step: f64,
    repetitions: u64,
    seed: u64,
    out_mean: *mut f64,
    out_sd: *mut f64,
) -> StarksenseStatus {
    if probe.is_null() || times_ns.is_null() || out_mean.is_null() || out_sd.is_null() {
        return StarksenseStatus::NullPointer;
    }
    let probe = &*probe;
    if n_times == 0 || total_shots % n_times as u64 != 0 {
        return StarksenseStatus::InvalidArgument;
    }
    let times = std::slice::from_raw_parts(times_ns, n_times).to_vec();
    guarded(|| {
        let result = (|| {
            let h_grid = grid_points(grid_min, grid_max, grid_step)?;
            let prior = PosteriorGrid::uniform(grid_min, grid_max, grid_step)?;
            let model =
                LikelihoodModel::build(&probe.spec, &times, &h_grid, &ModelSource::ExactClosed)?;
            let truths = times
                .iter()
                .map(|&t| probe.spec.closed_distribution(true_gradient_mhz, t))
                .collect::<starksense::Result<Vec<_>>>()?;
            trial_statistics(
                &model,
                &truths,
                &vec![total_shots / n_times as u64; n_times],
                &prior,
                repetitions,
                seed,
            )
        })();
        match result {
            Ok(stats) => {
                unsafe {
                    *out_mean = stats.mean;
                    *out_sd = stats.sd;
                }
                StarksenseStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Bhattacharyya coefficient between two length-`len` distributions.
///
/// # Safety
/// `p` and `q` must each point to `len` readable doubles; `out` must be valid
/// and writable.
#[no_mangle]
pub unsafe extern "C" fn starksense_walk_fidelity(
    p: *const f64,
    q: *const f64,
    len: usize,
    out: *mut f64,
) -> StarksenseStatus {
    if p.is_null() || q.is_null() || out.is_null() {
        return StarksenseStatus::NullPointer;
    }
    let (p, q) = (
        std::slice::from_raw_parts(p, len),
        std::slice::from_raw_parts(q, len),
    );
    guarded(|| match starksense::analysis::walk_fidelity(p, q) {
        Ok(f) => {
            unsafe { *out = f };
            StarksenseStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_nul_terminated() {
        let ptr = starksense_version();
        let s = unsafe { std::ffi::CStr::from_ptr(ptr) };
        assert_eq!(s.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn probe_lifecycle_and_distribution() {
        unsafe {
            let mut probe: *mut StarksenseProbe = std::ptr::null_mut();
            let initial = [5u32];
            let st = starksense_probe_new(9, 1, -8.0, initial.as_ptr(), 1, &mut probe);
            assert_eq!(st, StarksenseStatus::Ok);
            let mut dim = 0usize;
            assert_eq!(starksense_probe_dim(probe, &mut dim), StarksenseStatus::Ok);
            assert_eq!(dim, 9);

            let mut dist = vec![0.0f64; dim];
            let st = starksense_probe_distribution(probe, -3.0, 0.0, dist.as_mut_ptr(), dim);
            assert_eq!(st, StarksenseStatus::Ok);
            assert!((dist[4] - 1.0).abs() < 1e-12);

            // wrong buffer length is rejected before any write
            let st = starksense_probe_distribution(probe, -3.0, 0.0, dist.as_mut_ptr(), dim - 1);
            assert_eq!(st, StarksenseStatus::InvalidDimension);

            starksense_probe_free(probe);
            starksense_probe_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn fisher_and_fidelity() {
        unsafe {
            let mut probe: *mut StarksenseProbe = std::ptr::null_mut();
            let initial = [5u32];
            starksense_probe_new(9, 1, -8.0, initial.as_ptr(), 1, &mut probe);
            let (mut q, mut c) = (0.0f64, 0.0f64);
            let st = starksense_probe_fisher(probe, -6.0, 100.0, &mut q, &mut c);
            assert_eq!(st, StarksenseStatus::Ok);
            assert!(q > 0.0 && c > 0.0 && c <= q + 1e-9);
            starksense_probe_free(probe);

            let p = [0.5f64, 0.5];
            let r = [0.5f64, 0.5];
            let mut f = 0.0f64;
            assert_eq!(
                starksense_walk_fidelity(p.as_ptr(), r.as_ptr(), 2, &mut f),
                StarksenseStatus::Ok
            );
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_probe_is_rejected() {
        unsafe {
            let mut probe: *mut StarksenseProbe = std::ptr::null_mut();
            let initial = [11u32];
            let st = starksense_probe_new(9, 1, -8.0, initial.as_ptr(), 1, &mut probe);
            assert_eq!(st, StarksenseStatus::InvalidArgument);
            assert!(probe.is_null());
            assert_eq!(
                starksense_probe_new(9, 1, -8.0, std::ptr::null(), 1, &mut probe),
                StarksenseStatus::NullPointer
            );
        }
    }

    #[test]
    fn estimation_round_trip() {
        unsafe {
            let mut probe: *mut StarksenseProbe = std::ptr::null_mut();
            let initial = [5u32];
            starksense_probe_new(9, 1, -8.0, initial.as_ptr(), 1, &mut probe);
            let times = [80.0f64, 100.0, 140.0];
            let (mut mean, mut sd) = (0.0f64, 0.0f64);
            let st = starksense_probe_estimate(
                probe,
                -6.0,
                times.as_ptr(),
                3,
                60,
                -30.0,
                0.0,
                0.1,
                20,
                1234,
                &mut mean,
                &mut sd,
            );
            assert_eq!(st, StarksenseStatus::Ok);
            assert!((mean + 6.0).abs() < 1.0, "mean {mean}");
            assert!(sd >= 0.0);
            // indivisible shot budget is rejected
            let st = starksense_probe_estimate(
                probe,
                -6.0,
                times.as_ptr(),
                3,
                61,
                -30.0,
                0.0,
                0.1,
                20,
                1,
                &mut mean,
                &mut sd,
            );
            assert_eq!(st, StarksenseStatus::InvalidArgument);
            starksense_probe_free(probe);
        }
    }
}
