//! Closed-form optimal squeezing in the high-conditioning limit.
//!
//! Valid for conditioning `z >> gamma^2`; used elsewhere as a lower
//! bound and cross-check for the numerical optimizer, never as ground
//! truth at moderate conditioning.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form optimum at a given normalized nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticOptimum {
    /// Optimal detuning offset `delta'_opt - chi'`, in `(1/sqrt(3), 1]`.
    pub delta_offset_prime: f64,
    /// Optimal variance relative to the pump-off value, `V_Xopt / V_0`.
    pub v_ratio: f64,
    /// Cube-root intermediate of the optimality cubic.
    pub g_value: Complex64,
}

/// Evaluate the closed-form optimum for `chi_prime >= 0`.
///
/// The cube root is taken on the principal branch; the combination
/// `Re{G} + sqrt(3) Im{G}` is then real by construction.
pub fn analytic_optimum(chi_prime: f64) -> Result<AnalyticOptimum> {
    if !(chi_prime >= 0.0) {
        return Err(Error::NegativeChiPrime(chi_prime));
    }
    let x = chi_prime;
    let disc = (27.0 * x.powi(4) + 36.0 * x * x + 16.0).sqrt();
    let inner = Complex64::new(27.0 * x.powi(3), 6.0 * 3f64.sqrt() * disc);
    let g = inner.powf(1.0 / 3.0);
    let u = (g.re + 3f64.sqrt() * g.im - 3.0 * x) / 6.0;
    // arranged to limit cancellation as u -> 1/sqrt(3)
    let radicand = 2.0 + 3.0 * u * u - 1.0 / (u * u);
    let radicand = if (-1e-9..0.0).contains(&radicand) {
        0.0
    } else {
        radicand
    };
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand {
            chi_prime,
            radicand,
        });
    }
    Ok(AnalyticOptimum {
        delta_offset_prime: u,
        v_ratio: 0.5 * radicand.sqrt(),
        g_value: g,
    })
}

/// Closed-form minimum variance `v0 * v_ratio(chi_prime)`.
pub fn analytic_vx(chi_prime: f64, v0: f64) -> Result<f64> {
    Ok(v0 * analytic_optimum(chi_prime)?.v_ratio)
}
