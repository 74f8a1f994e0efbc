//! Numerical optimization of the steady-state squeezed variance over
//! detuning, and jointly over measurement strength.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derived, to_db, ValidatedParams};
use crate::steadystate::conditional_steady_state;

/// Outcome of a detuning (and optionally measurement) optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub delta_opt: f64,
    pub mu_opt: Option<f64>,
    pub v_x_opt: f64,
    pub v_db: f64,
    pub evaluations: u64,
    pub bracket: (f64, f64),
    /// Set when the objective was flat (pump off) and the bracket
    /// midpoint was returned.
    pub flat: bool,
}

/// Scalar minimization by golden-section search with parabolic
/// interpolation (Brent). Returns `(x_min, f_min, evaluations)`.
pub fn brent_min<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    max_iter: usize,
) -> (f64, f64, u64) {
    const GOLD: f64 = 0.381_966_011_250_105;
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let mut evals: u64 = 0;
    let mut x = lo + GOLD * (hi - lo);
    let mut w = x;
    let mut v = x;
    let mut fx = f(x);
    evals += 1;
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let m = 0.5 * (lo + hi);
        let tol1 = rel_tol * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (hi - lo) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // parabolic fit through (v, w, x)
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (lo - x) && p < q * (hi - x) {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { hi - x } else { lo - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx, evals)
}

/// Minimize the conditional `v_x` over detuning at fixed
/// `(gamma, chi, mu, eta, N)`; the input `delta` is ignored.
pub fn optimal_detuning(p: &ValidatedParams) -> Result<OptimizationResult> {
    let gamma = p.gamma;
    let chi = p.chi;
    let z = derived(p).z;
    let evaluations = std::cell::Cell::new(0u64);

    let objective = |delta: f64| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        Ok(conditional_steady_state(&p.with_delta(delta))?.cov.v_x)
    };

    // bracket just inside the stability region up to a generous multiple
    // of the conditioning-normalized scale
    // margin keeps chi^2 < delta_lo^2 + gamma^2 true in floating point
    let delta_lo = ((chi * chi - gamma * gamma).max(0.0)
        + 1e-9 * (chi * chi + gamma * gamma))
        .sqrt();
    let mut delta_hi = chi + 50.0 * (gamma * gamma + z).sqrt();
    let mid = 0.5 * (delta_lo + delta_hi);
    let mut f_hi = objective(delta_hi)?;
    let f_mid = objective(mid)?;
    let mut expand = 0;
    let flat_hint = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    while f_hi <= f_mid && !flat_hint(f_hi, f_mid) && expand < 40 {
        delta_hi *= 2.0;
        f_hi = objective(delta_hi)?;
        expand += 1;
    }
    if expand >= 40 {
        return Err(Error::NoStableDetuning);
    }

    // coarse pre-scan guards against landing in a secondary basin
    const SCAN: usize = 64;
    let mut best_idx = 0;
    let mut best_val = f64::INFINITY;
    let mut scan_min = f64::INFINITY;
    let mut scan_max = f64::NEG_INFINITY;
    let mut grid = [0.0f64; SCAN];
    for (i, slot) in grid.iter_mut().enumerate() {
        let t = i as f64 / (SCAN - 1) as f64;
        *slot = delta_lo + t * (delta_hi - delta_lo);
        let v = objective(*slot)?;
        scan_min = scan_min.min(v);
        scan_max = scan_max.max(v);
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }

    // flat objective (pump off): every detuning is equivalent
    if scan_max - scan_min <= 1e-12 * scan_max.max(1e-300) {
        let delta = 0.5 * (delta_lo + delta_hi);
        let v = objective(delta)?;
        return Ok(OptimizationResult {
            delta_opt: delta,
            mu_opt: None,
            v_x_opt: v,
            v_db: to_db(v)?,
            evaluations: evaluations.get(),
            bracket: (delta_lo, delta_hi),
            flat: true,
        });
    }

    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(SCAN - 1)];
    let f = |d: f64| objective(d).unwrap_or(f64::INFINITY);
    let (delta_opt, v_x_opt, _) = brent_min(f, lo, hi, 1e-11, 200);

    if !v_x_opt.is_finite() {
        return Err(Error::NoConvergence {
            residual: f64::NAN,
            iterations: evaluations.get(),
        });
    }
    debug_assert!(chi * chi < delta_opt * delta_opt + gamma * gamma);

    // confirm a local minimum: non-negative central-difference curvature
    let h = 1e-5 * (gamma * gamma + z).sqrt();
    let f_plus = objective(delta_opt + h).unwrap_or(f64::INFINITY);
    let f_minus = objective((delta_opt - h).max(delta_lo)).unwrap_or(f64::INFINITY);
    if f_plus + f_minus - 2.0 * v_x_opt < -1e-7 * v_x_opt {
        return Err(Error::NoConvergence {
            residual: f_plus + f_minus - 2.0 * v_x_opt,
            iterations: evaluations.get(),
        });
    }

    Ok(OptimizationResult {
        delta_opt,
        mu_opt: None,
        v_x_opt,
        v_db: to_db(v_x_opt)?,
        evaluations: evaluations.get(),
        bracket: (lo, hi),
        flat: false,
    })
}

/// Maximize dB squeezing of the detuning-optimized variance over the
/// measurement strength: log-grid scan at >= 50 points per decade, then
/// local refinement. The input `mu` and `delta` are ignored.
pub fn optimal_measurement(
    p: &ValidatedParams,
    mu_range: (f64, f64),
) -> Result<OptimizationResult> {
    let (mu_lo, mu_hi) = mu_range;
    if !(mu_lo > 0.0 && mu_hi > mu_lo) {
        return Err(Error::SweepSpec(format!(
            "mu range must be positive and increasing, got ({mu_lo}, {mu_hi})"
        )));
    }
    let decades = (mu_hi / mu_lo).log10();
    let points = ((decades * 50.0).ceil() as usize + 1).max(8);
    let mut evaluations: u64 = 0;

    let at_mu = |mu: f64| -> Result<OptimizationResult> {
        let res = optimal_detuning(&p.with_mu(mu)?)?;
        Ok(res)
    };

    let log_lo = mu_lo.ln();
    let log_hi = mu_hi.ln();
    let mut best: Option<(usize, f64, OptimizationResult)> = None;
    let mut grid = vec![0.0f64; points];
    for i in 0..points {
        let mu = (log_lo + (log_hi - log_lo) * i as f64 / (points - 1) as f64).exp();
        grid[i] = mu;
        let res = at_mu(mu)?;
        evaluations += res.evaluations;
        if best.as_ref().map_or(true, |(_, v, _)| res.v_x_opt < *v) {
            best = Some((i, res.v_x_opt, res));
        }
    }
    let (best_idx, _, best_res) = best.unwrap();

    // interior optimum: refine on log(mu); endpoint optimum: keep it
    let (mu_opt, result) = if best_idx == 0 || best_idx == points - 1 {
        (grid[best_idx], best_res)
    } else {
        let lo = grid[best_idx - 1].ln();
        let hi = grid[best_idx + 1].ln();
        let mut f = |log_mu: f64| -> f64 {
            at_mu(log_mu.exp()).map_or(f64::INFINITY, |res| res.v_x_opt)
        };
        let (log_best, _, extra) = brent_min(&mut f, lo, hi, 1e-6, 80);
        evaluations += extra;
        let mu = log_best.exp();
        let res = at_mu(mu)?;
        evaluations += res.evaluations;
        (mu, res)
    };

    Ok(OptimizationResult {
        mu_opt: Some(mu_opt),
        evaluations,
        ..result
    })
}
