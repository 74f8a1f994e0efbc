//! Model parameters, validation and derived quantities.
//!
//! All rates are expressed in units of the mechanical amplitude damping
//! `gamma`; the paper-facing normalization is recovered by dividing any
//! rate by `gamma`. The zero-point quadrature variance is 1/2.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Deref;

use crate::error::{Error, ParamViolation, Result};

/// Normalized parameters of the measured, parametrically driven oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Mechanical amplitude damping rate.
    pub gamma: f64,
    /// Parametric nonlinearity `chi = omega_m * k_r / (2 k_0)`.
    pub chi: f64,
    /// Pump half-detuning; the drive runs at `2 (omega_m + delta)`.
    pub delta: f64,
    /// Drive phase (radians). The solvers work at `pi/4` and rotate the
    /// output covariance for any other value.
    pub theta: f64,
    /// Continuous measurement strength.
    pub mu: f64,
    /// Detector quantum efficiency, in `[0, 1]`.
    pub eta: f64,
    /// Mean thermal phonon number (real-valued temperature proxy).
    pub n_thermal: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            chi: 0.0,
            delta: 0.0,
            theta: PI / 4.0,
            mu: 0.0,
            eta: 1.0,
            n_thermal: 0.0,
        }
    }
}

impl SystemParams {
    /// Check every constraint and wrap the parameters on success.
    ///
    /// All violations are reported at once, not just the first.
    pub fn validate(self) -> Result<ValidatedParams> {
        let mut violations = Vec::new();
        for (name, value) in [
            ("gamma", self.gamma),
            ("chi", self.chi),
            ("delta", self.delta),
            ("theta", self.theta),
            ("mu", self.mu),
            ("eta", self.eta),
            ("n_thermal", self.n_thermal),
        ] {
            if !value.is_finite() {
                violations.push(ParamViolation::NonFinite { name, value });
            }
        }
        if self.gamma <= 0.0 {
            violations.push(ParamViolation::NonPositiveGamma(self.gamma));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            violations.push(ParamViolation::EfficiencyOutOfRange(self.eta));
        }
        for (name, value) in [
            ("chi", self.chi),
            ("mu", self.mu),
            ("n_thermal", self.n_thermal),
        ] {
            if value < 0.0 {
                violations.push(ParamViolation::NegativeRate { name, value });
            }
        }
        if violations.is_empty() {
            Ok(ValidatedParams(self))
        } else {
            Err(Error::InvalidParams(violations))
        }
    }

    /// Below-threshold condition `chi^2 < delta^2 + gamma^2` (strict).
    ///
    /// Equivalent to both eigenvalues `-gamma +/- sqrt(chi^2 - delta^2)`
    /// of the drift matrix having negative real part.
    pub fn is_stable(&self) -> bool {
        self.chi * self.chi < self.delta * self.delta + self.gamma * self.gamma
    }

    pub(crate) fn ensure_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::Unstable {
                chi: self.chi,
                delta: self.delta,
                gamma: self.gamma,
            })
        }
    }
}

/// Parameters that have passed [`SystemParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(SystemParams);

impl Deref for ValidatedParams {
    type Target = SystemParams;
    fn deref(&self) -> &SystemParams {
        &self.0
    }
}

impl ValidatedParams {
    pub fn params(&self) -> &SystemParams {
        &self.0
    }

    /// Re-validate a copy with one field changed. Used by the optimizer
    /// and sweep engine, which vary a single parameter at a time.
    pub fn with_delta(&self, delta: f64) -> ValidatedParams {
        let mut p = self.0;
        p.delta = delta;
        ValidatedParams(p)
    }

    pub fn with_mu(&self, mu: f64) -> Result<ValidatedParams> {
        let mut p = self.0;
        p.mu = mu;
        p.validate()
    }
}

/// Physical-parameter context used to derive normalized inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Mechanical resonance angular frequency.
    pub omega_m: f64,
    /// Quality factor `Q = omega_m / gamma`.
    pub quality: f64,
    /// Spring-constant modulation depth `k_r / k_0`.
    pub spring_mod_ratio: f64,
}

impl PhysicalParams {
    /// Validate and report soft warnings on regime assumptions.
    pub fn check(&self) -> Result<Vec<String>> {
        let mut violations = Vec::new();
        if self.omega_m <= 0.0 {
            violations.push(ParamViolation::NegativeRate {
                name: "omega_m",
                value: self.omega_m,
            });
        }
        if self.quality <= 0.0 {
            violations.push(ParamViolation::NegativeRate {
                name: "quality",
                value: self.quality,
            });
        }
        if self.spring_mod_ratio < 0.0 {
            violations.push(ParamViolation::NegativeRate {
                name: "spring_mod_ratio",
                value: self.spring_mod_ratio,
            });
        }
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        let mut warnings = Vec::new();
        if self.spring_mod_ratio > 0.1 {
            warnings.push(format!(
                "spring modulation k_r/k_0 = {} exceeds 0.1; perturbative treatment questionable",
                self.spring_mod_ratio
            ));
        }
        if self.chi() / self.omega_m > 0.1 {
            warnings.push(format!(
                "chi/omega_m = {} exceeds 0.1; rotating-wave approximation questionable",
                self.chi() / self.omega_m
            ));
        }
        Ok(warnings)
    }

    /// Nonlinearity `chi = (omega_m / 2) * k_r / k_0` in absolute units.
    pub fn chi(&self) -> f64 {
        0.5 * self.omega_m * self.spring_mod_ratio
    }

    /// Damping `gamma = omega_m / Q` in absolute units.
    pub fn gamma(&self) -> f64 {
        self.omega_m / self.quality
    }

    /// Build gamma-normalized system parameters (gamma = 1 internally).
    /// `mu`, `delta` are given in absolute units and rescaled.
    pub fn to_system(&self, delta: f64, theta: f64, mu: f64, eta: f64, n_thermal: f64) -> SystemParams {
        let g = self.gamma();
        SystemParams {
            gamma: 1.0,
            chi: self.chi() / g,
            delta: delta / g,
            theta,
            mu: mu / g,
            eta,
            n_thermal,
        }
    }
}

/// Quantities derived from the primary parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Conditioning parameter `z = 8 eta mu gamma (N + N_BA + 1/2)`.
    pub z: f64,
    /// Back-action phonons `N_BA = mu / (2 gamma)`.
    pub n_ba: f64,
    /// Normalized nonlinearity `chi' = chi / sqrt(gamma^2 + z)`.
    pub chi_prime: f64,
    /// Per-quadrature diffusion constant `D = 2 gamma (N + 1/2) + mu`.
    pub diffusion: f64,
}

/// Compute the derived quantities for a validated parameter set.
pub fn derived(p: &ValidatedParams) -> DerivedQuantities {
    let n_ba = p.mu / (2.0 * p.gamma);
    let z = 8.0 * p.eta * p.mu * p.gamma * (p.n_thermal + n_ba + 0.5);
    DerivedQuantities {
        z,
        n_ba,
        chi_prime: p.chi / (p.gamma * p.gamma + z).sqrt(),
        diffusion: 2.0 * p.gamma * (p.n_thermal + 0.5) + p.mu,
    }
}

/// High-temperature, back-action-negligible approximation to `chi'`
/// in terms of mechanical properties. Diagnostic only.
pub fn chi_prime_mechanical(quality: f64, spring_mod_ratio: f64, n: f64, eta: f64, mu_over_gamma: f64) -> f64 {
    quality * spring_mod_ratio / (4.0 * (2.0 * n * eta * mu_over_gamma).sqrt())
}

/// Squeezing in dB relative to the zero-point variance 1/2.
/// Positive values mean the variance is below zero-point.
pub fn to_db(variance: f64) -> Result<f64> {
    if variance <= 0.0 || !variance.is_finite() {
        return Err(Error::NonPositiveVariance(variance));
    }
    Ok(-10.0 * (variance / 0.5).log10())
}

/// Inverse of [`to_db`].
pub fn from_db(db: f64) -> f64 {
    0.5 * 10f64.powf(-db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(chi: f64, delta: f64, mu: f64, eta: f64, n: f64) -> SystemParams {
        SystemParams {
            chi,
            delta,
            mu,
            eta,
            n_thermal: n,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_validate() {
        assert!(SystemParams::default().validate().is_ok());
    }

    #[test]
    fn efficiency_out_of_range() {
        let err = p(0.0, 0.0, 0.0, 1.5, 0.0).validate().unwrap_err();
        match err {
            Error::InvalidParams(v) => {
                assert_eq!(v, vec![ParamViolation::EfficiencyOutOfRange(1.5)])
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn all_violations_reported() {
        let bad = SystemParams {
            gamma: -1.0,
            chi: -2.0,
            eta: 2.0,
            ..Default::default()
        };
        match bad.validate().unwrap_err() {
            Error::InvalidParams(v) => assert_eq!(v.len(), 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn near_threshold_valid_and_stable() {
        let vp = p(50.0, 50.99, 0.1, 1.0, 0.0).validate().unwrap();
        assert!(vp.is_stable());
    }

    #[test]
    fn stability_examples() {
        assert!(p(0.0, 0.0, 0.0, 1.0, 0.0).is_stable());
        // boundary chi = gamma at delta = 0 is excluded
        assert!(!p(1.0, 0.0, 0.0, 1.0, 0.0).is_stable());
        assert!(!p(50.0, 49.0, 0.0, 1.0, 0.0).is_stable());
        assert!(p(50.0, 50.0, 0.0, 1.0, 0.0).is_stable());
    }

    #[test]
    fn stability_symmetries() {
        for (chi, delta) in [(0.5, 0.2), (2.0, 1.9), (3.0, 2.9)] {
            let a = p(chi, delta, 0.0, 1.0, 0.0);
            let b = p(chi, -delta, 0.0, 1.0, 0.0);
            assert_eq!(a.is_stable(), b.is_stable());
            for s in [0.1, 3.0, 1e3] {
                let c = SystemParams {
                    gamma: s,
                    chi: s * chi,
                    delta: s * delta,
                    ..Default::default()
                };
                assert_eq!(a.is_stable(), c.is_stable());
            }
        }
    }

    #[test]
    fn derived_examples() {
        let vp = p(0.0, 0.0, 0.0, 1.0, 2.0).validate().unwrap();
        let d = derived(&vp);
        assert_eq!(d.z, 0.0);
        assert_eq!(d.n_ba, 0.0);
        assert_relative_eq!(d.diffusion, 2.0 * 2.5);

        let vp = p(0.0, 0.0, 1.0, 1.0, 0.5).validate().unwrap();
        let d = derived(&vp);
        assert_relative_eq!(d.n_ba, 0.5);
        assert_relative_eq!(d.z, 12.0);
        assert_relative_eq!(d.diffusion, 3.0);

        let vp = p(0.0, 0.0, 0.1, 1.0, 1000.0).validate().unwrap();
        let d = derived(&vp);
        assert_relative_eq!(d.z, 0.8 * (1000.0 + 0.05 + 0.5), max_relative = 1e-12);
    }

    #[test]
    fn derived_scale_invariance() {
        // z/gamma^2, chi', N_BA unchanged under (gamma,chi,delta,mu) -> s*(...)
        let base = p(2.0, 1.0, 0.3, 0.8, 5.0).validate().unwrap();
        let d0 = derived(&base);
        for s in [0.25, 7.0] {
            let scaled = SystemParams {
                gamma: s,
                chi: 2.0 * s,
                delta: s,
                mu: 0.3 * s,
                eta: 0.8,
                n_thermal: 5.0,
                ..Default::default()
            }
            .validate()
            .unwrap();
            let d = derived(&scaled);
            assert_relative_eq!(d.z / (s * s), d0.z, max_relative = 1e-12);
            assert_relative_eq!(d.chi_prime, d0.chi_prime, max_relative = 1e-12);
            assert_relative_eq!(d.n_ba, d0.n_ba, max_relative = 1e-12);
        }
    }

    #[test]
    fn chi_prime_matches_mechanical_estimate() {
        // weak measurement, high temperature: exact chi' approaches the
        // Q (k_r/k_0) / (4 sqrt(2 N eta mu / gamma)) estimate
        let quality = 1e5;
        let ratio = 1e-3;
        let (n, eta, mu) = (1e6, 1.0, 1e-4);
        let phys = PhysicalParams {
            omega_m: 1e5,
            quality,
            spring_mod_ratio: ratio,
        };
        let vp = phys.to_system(0.0, PI / 4.0, mu * phys.gamma(), eta, n).validate().unwrap();
        let exact = derived(&vp).chi_prime;
        let approx = chi_prime_mechanical(quality, ratio, n, eta, mu);
        assert_relative_eq!(exact, approx, max_relative = 1e-3);
    }

    #[test]
    fn db_examples_and_roundtrip() {
        assert_relative_eq!(to_db(0.5).unwrap(), 0.0);
        assert_relative_eq!(to_db(0.25).unwrap(), 3.0103, max_relative = 1e-4);
        assert_relative_eq!(to_db(0.125).unwrap(), 6.0206, max_relative = 1e-4);
        assert!(to_db(0.0).is_err());
        for v in [1e-6, 0.37, 1.0, 512.0] {
            assert_relative_eq!(from_db(to_db(v).unwrap()), v, max_relative = 1e-12);
        }
    }

    #[test]
    fn physical_params_warnings() {
        let phys = PhysicalParams {
            omega_m: 1.0,
            quality: 100.0,
            spring_mod_ratio: 0.5,
        };
        let warnings = phys.check().unwrap();
        assert_eq!(warnings.len(), 2);
        let tame = PhysicalParams {
            omega_m: 1.0,
            quality: 100.0,
            spring_mod_ratio: 0.01,
        };
        assert!(tame.check().unwrap().is_empty());
    }
}
