//! C ABI over the squeezing engine: opaque parameter handles, status
//! codes, and out-pointer results. The generated header lives in
//! `include/dmpa.h`.

use std::os::raw::c_double;

use dmpa::model::{derived, to_db, ValidatedParams};
use dmpa::{
    analytic::analytic_optimum, bae_variance, conditional_steady_state, optimal_detuning,
    unconditional_steady_state, v0, Error, SystemParams,
};

/// Opaque validated parameter set.
pub struct DmpaParams(ValidatedParams);

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmpaStatus {
    Ok = 0,
    /// Parameters violate their domain (negative rates, eta outside (0,1], ...).
    InvalidArgument = 1,
    /// Above threshold: chi^2 >= delta^2 + gamma^2.
    Unstable = 2,
    /// The solver or optimizer failed to converge.
    NoConvergence = 3,
    NullPointer = 4,
}

fn status_for(err: &Error) -> DmpaStatus {
    match err {
        Error::Unstable { .. } => DmpaStatus::Unstable,
        Error::NoConvergence { .. } | Error::NoStableDetuning => DmpaStatus::NoConvergence,
        _ => DmpaStatus::InvalidArgument,
    }
}

unsafe fn write_out(ptr: *mut c_double, value: f64) {
    if !ptr.is_null() {
        *ptr = value;
    }
}

/// Validate parameters and allocate a handle. On success writes the
/// handle to `out` and returns `Ok`; the handle must be released with
/// `dmpa_params_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dmpa_params_new(
    gamma: c_double,
    chi: c_double,
    delta: c_double,
    theta: c_double,
    mu: c_double,
    eta: c_double,
    n_thermal: c_double,
    out: *mut *mut DmpaParams,
) -> DmpaStatus {
    if out.is_null() {
        return DmpaStatus::NullPointer;
    }
    let params = SystemParams {
        gamma,
        chi,
        delta,
        theta,
        mu,
        eta,
        n_thermal,
    };
    match params.validate() {
        Ok(vp) => {
            *out = Box::into_raw(Box::new(DmpaParams(vp)));
            DmpaStatus::Ok
        }
        Err(e) => {
            *out = std::ptr::null_mut();
            status_for(&e)
        }
    }
}

/// Release a handle from `dmpa_params_new`. Passing null is a no-op.
///
/// # Safety
/// `p` must be null or a pointer from `dmpa_params_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dmpa_params_free(p: *mut DmpaParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Whether the linearized dynamics are stable (chi^2 < delta^2 + gamma^2).
///
/// # Safety
/// `p` must be a live handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_is_stable(p: *const DmpaParams, out: *mut bool) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    if !out.is_null() {
        *out = p.0.is_stable();
    }
    DmpaStatus::Ok
}

/// Conditional steady-state covariance. Any out pointer may be null.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dmpa_steady_state(
    p: *const DmpaParams,
    v_x: *mut c_double,
    v_y: *mut c_double,
    c: *mut c_double,
    residual: *mut c_double,
) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    match conditional_steady_state(&p.0) {
        Ok(ss) => {
            write_out(v_x, ss.cov.v_x);
            write_out(v_y, ss.cov.v_y);
            write_out(c, ss.cov.c);
            write_out(residual, ss.residual);
            DmpaStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// Unconditional steady-state covariance under linear feedback `-g <x>`.
///
/// # Safety
/// `p` must be a live handle; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_unconditional_steady_state(
    p: *const DmpaParams,
    feedback_gain: c_double,
    v_x: *mut c_double,
    v_y: *mut c_double,
    c: *mut c_double,
) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    match unconditional_steady_state(&p.0, feedback_gain) {
        Ok(ss) => {
            write_out(v_x, ss.cov.v_x);
            write_out(v_y, ss.cov.v_y);
            write_out(c, ss.cov.c);
            DmpaStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// Pump-off conditional variance (closed form).
///
/// # Safety
/// `p` must be a live handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_v0(p: *const DmpaParams, out: *mut c_double) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    write_out(out, v0(&p.0));
    DmpaStatus::Ok
}

/// Back-action-evading conditional variance (closed form).
///
/// # Safety
/// `p` must be a live handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_bae_variance(p: *const DmpaParams, out: *mut c_double) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    write_out(out, bae_variance(&p.0));
    DmpaStatus::Ok
}

/// Conditioning parameter z and normalized nonlinearity chi'.
///
/// # Safety
/// `p` must be a live handle; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_derived(
    p: *const DmpaParams,
    z: *mut c_double,
    chi_prime: *mut c_double,
) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    let d = derived(&p.0);
    write_out(z, d.z);
    write_out(chi_prime, d.chi_prime);
    DmpaStatus::Ok
}

/// Minimize the conditional `v_x` over detuning; the handle's `delta`
/// is ignored.
///
/// # Safety
/// `p` must be a live handle; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_optimal_detuning(
    p: *const DmpaParams,
    delta_opt: *mut c_double,
    v_x_opt: *mut c_double,
) -> DmpaStatus {
    let Some(p) = p.as_ref() else {
        return DmpaStatus::NullPointer;
    };
    match optimal_detuning(&p.0) {
        Ok(res) => {
            write_out(delta_opt, res.delta_opt);
            write_out(v_x_opt, res.v_x_opt);
            DmpaStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// High-conditioning closed-form optimum at normalized nonlinearity
/// `chi_prime`: detuning offset `delta'_opt - chi'` and variance ratio
/// `V_Xopt / V_0`.
///
/// # Safety
/// Out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_analytic_optimum(
    chi_prime: c_double,
    delta_offset_prime: *mut c_double,
    v_ratio: *mut c_double,
) -> DmpaStatus {
    match analytic_optimum(chi_prime) {
        Ok(opt) => {
            write_out(delta_offset_prime, opt.delta_offset_prime);
            write_out(v_ratio, opt.v_ratio);
            DmpaStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

/// Squeezing in dB relative to the zero-point variance 1/2; positive
/// means below zero-point.
///
/// # Safety
/// `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn dmpa_to_db(variance: c_double, out: *mut c_double) -> DmpaStatus {
    match to_db(variance) {
        Ok(db) => {
            write_out(out, db);
            DmpaStatus::Ok
        }
        Err(e) => status_for(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    unsafe fn new_params(chi: f64, delta: f64, mu: f64) -> *mut DmpaParams {
        let mut p = ptr::null_mut();
        let st = dmpa_params_new(1.0, chi, delta, std::f64::consts::FRAC_PI_4, mu, 1.0, 0.0, &mut p);
        assert_eq!(st, DmpaStatus::Ok);
        p
    }

    #[test]
    fn lifecycle_and_steady_state() {
        unsafe {
            let p = new_params(2.0, 3.0, 0.5);
            let mut stable = false;
            assert_eq!(dmpa_is_stable(p, &mut stable), DmpaStatus::Ok);
            assert!(stable);
            let (mut vx, mut vy, mut c, mut res) = (0.0, 0.0, 0.0, 0.0);
            assert_eq!(
                dmpa_steady_state(p, &mut vx, &mut vy, &mut c, &mut res),
                DmpaStatus::Ok
            );
            assert!(vx > 0.0 && vy > 0.0 && vx * vy > c * c);
            assert!(res < 1e-10);
            dmpa_params_free(p);
        }
    }

    #[test]
    fn invalid_and_unstable_status() {
        unsafe {
            let mut p = ptr::null_mut();
            let st = dmpa_params_new(1.0, 2.0, 0.0, 0.0, 0.5, 2.0, 0.0, &mut p);
            assert_eq!(st, DmpaStatus::InvalidArgument);
            assert!(p.is_null());

            let p = new_params(2.0, 0.0, 0.5);
            let st = dmpa_steady_state(p, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
            assert_eq!(st, DmpaStatus::Unstable);
            dmpa_params_free(p);
        }
    }

    #[test]
    fn null_pointer_status() {
        unsafe {
            assert_eq!(
                dmpa_params_new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, ptr::null_mut()),
                DmpaStatus::NullPointer
            );
            assert_eq!(dmpa_v0(ptr::null(), ptr::null_mut()), DmpaStatus::NullPointer);
            dmpa_params_free(ptr::null_mut());
        }
    }

    #[test]
    fn closed_forms_match_core() {
        unsafe {
            let p = new_params(0.0, 0.0, 0.5);
            let mut v = 0.0;
            assert_eq!(dmpa_v0(p, &mut v), DmpaStatus::Ok);
            let mut bae = 0.0;
            assert_eq!(dmpa_bae_variance(p, &mut bae), DmpaStatus::Ok);
            assert!(v > bae);
            let mut db = 0.0;
            assert_eq!(dmpa_to_db(0.25, &mut db), DmpaStatus::Ok);
            assert!((db - 10.0 * 2f64.log10()).abs() < 1e-12);
            assert_eq!(dmpa_to_db(-1.0, &mut db), DmpaStatus::InvalidArgument);
            dmpa_params_free(p);
        }
    }

    #[test]
    fn optimum_matches_exact_low_measurement_limit() {
        unsafe {
            let p = new_params(5.0, 0.0, 0.0);
            let (mut d, mut v) = (0.0, 0.0);
            assert_eq!(dmpa_optimal_detuning(p, &mut d, &mut v), DmpaStatus::Ok);
            assert!((d - 6.0).abs() < 1e-5 * 6.0);
            dmpa_params_free(p);

            let (mut off, mut ratio) = (0.0, 0.0);
            assert_eq!(dmpa_analytic_optimum(1e-6, &mut off, &mut ratio), DmpaStatus::Ok);
            assert!((off - 1.0).abs() < 1e-3);
            assert!((ratio - 1.0).abs() < 1e-3);
        }
    }
}
