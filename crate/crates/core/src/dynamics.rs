//! Time-domain evolution: deterministic Riccati integration of the
//! conditional covariance and stochastic simulation of the conditional
//! means driven by measurement innovations.
//!
//! The covariance of a linear-Gaussian system is deterministic given the
//! parameters and the initial condition; only the means see the noise.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SystemParams, ValidatedParams};
use crate::steadystate::{
    conditional_steady_state, drift_matrix, rk4_step, CovarianceState, DriftDiffusion,
};

/// Conditional quadrature means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanState {
    pub x_mean: f64,
    pub y_mean: f64,
}

impl MeanState {
    pub fn new(x_mean: f64, y_mean: f64) -> Self {
        Self { x_mean, y_mean }
    }
}

/// One simulated trajectory: means, deterministic covariances and the
/// measurement-record increments that generated the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub params: SystemParams,
    pub times: Vec<f64>,
    pub means: Vec<MeanState>,
    pub covariances: Vec<CovarianceState>,
    /// Record increments `r dt = <X> dt + dW_X / (2 sqrt(eta mu))`,
    /// one per step. Empty when the measurement is off.
    pub record_x: Vec<f64>,
    pub record_y: Vec<f64>,
    pub seed: u64,
    pub feedback_gain: f64,
    pub dt: f64,
}

/// Largest admissible step for the explicit schemes.
pub fn max_step(p: &ValidatedParams) -> f64 {
    0.01 / p.gamma.max(p.chi).max(p.delta.abs()).max(p.mu)
}

fn check_step(p: &ValidatedParams, dt: f64) -> Result<()> {
    let guard = max_step(p);
    if dt <= 0.0 || dt > guard {
        return Err(Error::StepTooLarge { dt, max_dt: guard });
    }
    Ok(())
}

/// Integrate `dV/dt = A V + V A^T + D I - 4 eta mu V^2` with classical
/// RK4. Returns the covariance at every grid point, including `t = 0`.
pub fn integrate_riccati(
    p: &ValidatedParams,
    v_init: &CovarianceState,
    t_final: f64,
    dt: f64,
) -> Result<Vec<CovarianceState>> {
    p.ensure_stable()?;
    check_step(p, dt)?;
    let dd = drift_matrix(p);
    let steps = (t_final / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = *v_init;
    out.push(v);
    for i in 0..steps {
        v = rk4_step(&dd, &v, dt);
        if !(v.v_x.is_finite() && v.v_y.is_finite() && v.c.is_finite()) {
            return Err(Error::NonFiniteState { t: (i + 1) as f64 * dt });
        }
        if !v.is_positive_definite() {
            return Err(Error::PositivityLost { t: (i + 1) as f64 * dt });
        }
        out.push(v);
    }
    Ok(out)
}

/// Smallest relaxation rate of the covariance flow; `20 /` this is a
/// safe horizon for convergence to the steady state.
pub fn slowest_rate(p: &ValidatedParams) -> f64 {
    let disc = p.chi * p.chi - p.delta * p.delta;
    let drift_rate = if disc > 0.0 {
        p.gamma - disc.sqrt()
    } else {
        p.gamma
    };
    // conditioning only speeds up covariance relaxation
    drift_rate.max(1e-12 * p.gamma)
}

struct MeanStepper {
    m: [[f64; 2]; 2], // I + (A - gI) dt
    gain2: f64,       // 2 sqrt(eta mu)
}

impl MeanStepper {
    fn new(dd: &DriftDiffusion, g: f64, dt: f64) -> Self {
        Self {
            m: [
                [1.0 + (dd.a[0][0] - g) * dt, dd.a[0][1] * dt],
                [dd.a[1][0] * dt, 1.0 + (dd.a[1][1] - g) * dt],
            ],
            gain2: dd.k_gain.sqrt(), // sqrt(4 eta mu) = 2 sqrt(eta mu)
        }
    }

    fn step(&self, mean: &MeanState, v: &CovarianceState, dw: (f64, f64)) -> MeanState {
        MeanState::new(
            self.m[0][0] * mean.x_mean + self.m[0][1] * mean.y_mean
                + self.gain2 * (v.v_x * dw.0 + v.c * dw.1),
            self.m[1][0] * mean.x_mean + self.m[1][1] * mean.y_mean
                + self.gain2 * (v.c * dw.0 + v.v_y * dw.1),
        )
    }
}

/// Euler-Maruyama simulation of the conditional means under feedback
/// `-g <x>`, alongside the deterministic covariance. Reproducible for a
/// given seed (ChaCha12 + Box-Muller-free ziggurat normals).
pub fn simulate_trajectory(
    p: &ValidatedParams,
    v_init: &CovarianceState,
    mean_init: &MeanState,
    t_final: f64,
    dt: f64,
    seed: u64,
    feedback_gain: f64,
) -> Result<TrajectoryRecord> {
    let covariances = integrate_riccati(p, v_init, t_final, dt)?;
    let steps = covariances.len() - 1;
    let dd = drift_matrix(p);
    let stepper = MeanStepper::new(&dd, feedback_gain, dt);
    let measuring = dd.k_gain > 0.0;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let sqrt_dt = dt.sqrt();

    let mut means = Vec::with_capacity(steps + 1);
    let mut record_x = Vec::with_capacity(if measuring { steps } else { 0 });
    let mut record_y = Vec::with_capacity(if measuring { steps } else { 0 });
    let mut mean = *mean_init;
    means.push(mean);
    for i in 0..steps {
        let dw = if measuring {
            let gx: f64 = normal.sample(&mut rng);
            let gy: f64 = normal.sample(&mut rng);
            (gx * sqrt_dt, gy * sqrt_dt)
        } else {
            (0.0, 0.0)
        };
        if measuring {
            record_x.push(mean.x_mean * dt + dw.0 / stepper.gain2);
            record_y.push(mean.y_mean * dt + dw.1 / stepper.gain2);
        }
        mean = stepper.step(&mean, &covariances[i], dw);
        if !(mean.x_mean.is_finite() && mean.y_mean.is_finite()) {
            return Err(Error::NonFiniteState { t: (i + 1) as f64 * dt });
        }
        means.push(mean);
    }

    Ok(TrajectoryRecord {
        params: *p.params(),
        times: (0..=steps).map(|i| i as f64 * dt).collect(),
        means,
        covariances,
        record_x,
        record_y,
        seed,
        feedback_gain,
        dt,
    })
}

/// Re-run the filter on a stored measurement record. With the original
/// parameters this reproduces the stored means; with perturbed
/// parameters it diverges (model-sensitivity probe).
pub fn refilter(
    record: &TrajectoryRecord,
    p: &ValidatedParams,
    v_init: &CovarianceState,
) -> Result<Vec<MeanState>> {
    let steps = record.times.len().saturating_sub(1);
    if record.means.len() != steps + 1 || record.covariances.len() != steps + 1 {
        return Err(Error::ParamsMismatch(
            "trajectory sequences have inconsistent lengths".into(),
        ));
    }
    let dd = drift_matrix(p);
    let measuring = dd.k_gain > 0.0;
    if measuring && record.record_x.len() != steps {
        return Err(Error::ParamsMismatch(format!(
            "record holds {} increments for {} steps",
            record.record_x.len(),
            steps
        )));
    }
    if !measuring {
        return Err(Error::ParamsMismatch(
            "filter parameters have eta*mu = 0; no record to condition on".into(),
        ));
    }
    let covariances = integrate_riccati(p, v_init, steps as f64 * record.dt, record.dt)?;
    let stepper = MeanStepper::new(&dd, record.feedback_gain, record.dt);
    let mut mean = record.means[0];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(mean);
    for i in 0..steps {
        // innovation implied by the stored record and the current estimate
        let dw = (
            (record.record_x[i] - mean.x_mean * record.dt) * stepper.gain2,
            (record.record_y[i] - mean.y_mean * record.dt) * stepper.gain2,
        );
        mean = stepper.step(&mean, &covariances[i], dw);
        out.push(mean);
    }
    Ok(out)
}

/// Ensemble second-moment estimate of the stationary conditional means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMoments {
    /// Sample `E[<x><x>^T]` entries (xx, yy, xy) at the final time.
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
    /// Standard errors of the three entries.
    pub se_xx: f64,
    pub se_yy: f64,
    pub se_xy: f64,
    pub trajectories: u64,
}

/// Monte-Carlo second moments of the means at stationarity. The
/// covariance is pinned at the conditional steady state, so each
/// trajectory is a cheap linear recursion; trajectories run in parallel
/// with per-trajectory seeds derived from `seed`.
pub fn ensemble_mean_moments(
    p: &ValidatedParams,
    feedback_gain: f64,
    n_traj: u64,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<EnsembleMoments> {
    p.ensure_stable()?;
    check_step(p, dt)?;
    let v_ss = conditional_steady_state(p)?.cov;
    let dd = drift_matrix(p);
    let stepper = MeanStepper::new(&dd, feedback_gain, dt);
    let steps = (t_final / dt).round() as usize;
    let sqrt_dt = dt.sqrt();

    let terminal: Vec<(f64, f64)> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_add(i).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let normal = StandardNormal;
            let mut mean = MeanState::new(0.0, 0.0);
            for _ in 0..steps {
                let gx: f64 = normal.sample(&mut rng);
                let gy: f64 = normal.sample(&mut rng);
                mean = stepper.step(&mean, &v_ss, (gx * sqrt_dt, gy * sqrt_dt));
            }
            (mean.x_mean, mean.y_mean)
        })
        .collect();

    let n = n_traj as f64;
    let mut sums = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for &(x, y) in &terminal {
        let w = [x * x, y * y, x * y];
        for k in 0..3 {
            sums[k] += w[k];
            sq[k] += w[k] * w[k];
        }
    }
    let m: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let se: Vec<f64> = (0..3)
        .map(|k| ((sq[k] / n - m[k] * m[k]).max(0.0) / n).sqrt())
        .collect();
    Ok(EnsembleMoments {
        xx: m[0],
        yy: m[1],
        xy: m[2],
        se_xx: se[0],
        se_yy: se[1],
        se_xy: se[2],
        trajectories: n_traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steadystate::solve_lyapunov;
    use approx::assert_relative_eq;

    fn vp(chi: f64, delta: f64, mu: f64, eta: f64, n: f64) -> ValidatedParams {
        SystemParams {
            chi,
            delta,
            mu,
            eta,
            n_thermal: n,
            ..Default::default()
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn step_guard_enforced() {
        let p = vp(50.0, 51.0, 0.4, 1.0, 0.0);
        let v = CovarianceState::new(0.5, 0.5, 0.0);
        assert!(matches!(
            integrate_riccati(&p, &v, 1.0, 0.01),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn fixed_point_is_stationary() {
        let p = vp(5.0, 5.5, 0.4, 0.8, 2.0);
        let ss = conditional_steady_state(&p).unwrap().cov;
        let traj = integrate_riccati(&p, &ss, 10.0, 1e-3).unwrap();
        let last = traj.last().unwrap();
        assert_relative_eq!(last.v_x, ss.v_x, max_relative = 1e-10);
        assert_relative_eq!(last.v_y, ss.v_y, max_relative = 1e-10);
        assert!((last.c - ss.c).abs() <= 1e-10 * ss.v_x);
    }

    #[test]
    fn undriven_relaxation_matches_closed_form() {
        // chi = mu = 0: V(t) = V_T + (V_i - V_T) e^{-2 gamma t} entrywise
        let n = 1.5;
        let p = vp(0.0, 0.0, 0.0, 1.0, n);
        let v_i = 7.0;
        let traj = integrate_riccati(&p, &CovarianceState::new(v_i, v_i, 0.0), 3.0, 1e-3).unwrap();
        let v_t = n + 0.5;
        for (i, v) in traj.iter().enumerate() {
            let t = i as f64 * 1e-3;
            let expected = v_t + (v_i - v_t) * (-2.0 * t).exp();
            assert_relative_eq!(v.v_x, expected, max_relative = 1e-8);
            assert_relative_eq!(v.v_y, expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn thermal_start_converges_to_steady_solver() {
        let p = vp(5.0, 5.8, 0.4, 1.0, 0.0);
        let ss = conditional_steady_state(&p).unwrap().cov;
        let traj =
            integrate_riccati(&p, &CovarianceState::new(0.5, 0.5, 0.0), 20.0, 1e-3).unwrap();
        let last = traj.last().unwrap();
        assert_relative_eq!(last.v_x, ss.v_x, max_relative = 1e-8);
        assert_relative_eq!(last.v_y, ss.v_y, max_relative = 1e-8);
    }

    #[test]
    fn covariances_independent_of_seed_and_positive() {
        let p = vp(2.0, 2.5, 0.3, 1.0, 1.0);
        let v0 = CovarianceState::new(1.5, 1.5, 0.0);
        let m0 = MeanState::new(0.3, -0.2);
        let a = simulate_trajectory(&p, &v0, &m0, 2.0, 1e-3, 7, 0.0).unwrap();
        let b = simulate_trajectory(&p, &v0, &m0, 2.0, 1e-3, 991, 0.0).unwrap();
        assert_eq!(a.covariances, b.covariances);
        assert_ne!(a.means, b.means);
        for v in &a.covariances {
            assert!(v.is_positive_definite());
        }
        assert_eq!(a.times.len(), a.means.len());
        assert_eq!(a.record_x.len(), a.times.len() - 1);
    }

    #[test]
    fn deterministic_decay_without_measurement() {
        let p = vp(0.0, 0.0, 0.0, 1.0, 0.0);
        let traj = simulate_trajectory(
            &p,
            &CovarianceState::new(0.5, 0.5, 0.0),
            &MeanState::new(1.0, 0.0),
            3.0,
            1e-3,
            0,
            0.0,
        )
        .unwrap();
        assert!(traj.record_x.is_empty());
        for (i, m) in traj.means.iter().enumerate() {
            let t = i as f64 * 1e-3;
            // Euler decay (1 - gamma dt)^i tracks e^{-gamma t} to O(dt)
            assert_relative_eq!(m.x_mean, (-t).exp(), max_relative = 3e-3);
            assert_eq!(m.y_mean, 0.0);
        }
    }

    #[test]
    fn refilter_roundtrip() {
        let p = vp(3.0, 3.5, 0.5, 0.9, 1.0);
        let v0 = CovarianceState::new(1.5, 1.5, 0.0);
        let traj =
            simulate_trajectory(&p, &v0, &MeanState::new(0.0, 0.0), 2.0, 1e-3, 42, 0.0).unwrap();
        let replay = refilter(&traj, &p, &v0).unwrap();
        for (a, b) in traj.means.iter().zip(&replay) {
            assert!((a.x_mean - b.x_mean).abs() < 1e-10);
            assert!((a.y_mean - b.y_mean).abs() < 1e-10);
        }
    }

    #[test]
    fn refilter_with_perturbed_detuning_diverges() {
        let p = vp(3.0, 3.5, 0.5, 0.9, 1.0);
        let v0 = CovarianceState::new(1.5, 1.5, 0.0);
        let traj =
            simulate_trajectory(&p, &v0, &MeanState::new(0.0, 0.0), 2.0, 1e-3, 42, 0.0).unwrap();
        let perturbed = vp(3.0, 3.6, 0.5, 0.9, 1.0);
        let replay = refilter(&traj, &perturbed, &v0).unwrap();
        let end_orig = traj.means.last().unwrap();
        let end_new = replay.last().unwrap();
        let gap = (end_orig.x_mean - end_new.x_mean).hypot(end_orig.y_mean - end_new.y_mean);
        assert!(gap > 0.0);
    }

    #[test]
    fn refilter_zeroed_innovations_is_pure_drift() {
        let p = vp(0.0, 0.0, 0.5, 1.0, 0.0);
        let v0 = CovarianceState::new(0.5, 0.5, 0.0);
        let dt = 1e-3;
        let steps = 500usize;
        // build a record whose innovations vanish: r dt = <x> dt along
        // the noiseless filter path
        let base =
            simulate_trajectory(&p, &v0, &MeanState::new(1.0, 0.0), steps as f64 * dt, dt, 0, 0.0)
                .unwrap();
        let mut record = base.clone();
        // noiseless path: mean follows (1 - gamma dt)^i at chi = delta = 0
        let dd = drift_matrix(&p);
        let stepper = MeanStepper::new(&dd, 0.0, dt);
        let mut mean = MeanState::new(1.0, 0.0);
        for i in 0..steps {
            record.record_x[i] = mean.x_mean * dt;
            record.record_y[i] = mean.y_mean * dt;
            mean = stepper.step(&mean, &record.covariances[i], (0.0, 0.0));
        }
        let replay = refilter(&record, &p, &v0).unwrap();
        for (i, m) in replay.iter().enumerate() {
            let drift = (1.0 - dt).powi(i as i32);
            assert_relative_eq!(m.x_mean, drift, max_relative = 1e-9);
        }
    }

    #[test]
    fn refilter_without_measurement_rejected() {
        let p = vp(0.0, 0.0, 0.0, 1.0, 0.0);
        let v0 = CovarianceState::new(0.5, 0.5, 0.0);
        let traj =
            simulate_trajectory(&p, &v0, &MeanState::new(1.0, 0.0), 0.5, 1e-3, 0, 0.0).unwrap();
        assert!(matches!(
            refilter(&traj, &p, &v0),
            Err(Error::ParamsMismatch(_))
        ));
    }

    #[test]
    fn ensemble_matches_lyapunov_moderate_case() {
        // small system, quick statistical check of the ensemble path
        let p = vp(1.0, 1.5, 0.4, 1.0, 0.5);
        let v_ss = conditional_steady_state(&p).unwrap().cov;
        let dd = drift_matrix(&p);
        let q = CovarianceState::new(
            dd.k_gain * (v_ss.v_x * v_ss.v_x + v_ss.c * v_ss.c),
            dd.k_gain * (v_ss.v_y * v_ss.v_y + v_ss.c * v_ss.c),
            dd.k_gain * v_ss.c * (v_ss.v_x + v_ss.v_y),
        );
        let expected = solve_lyapunov(&dd.a, &q).unwrap();
        let est = ensemble_mean_moments(&p, 0.0, 4000, 12.0, 2e-3, 1).unwrap();
        assert!((est.xx - expected.v_x).abs() < 4.0 * est.se_xx);
        assert!((est.yy - expected.v_y).abs() < 4.0 * est.se_yy);
        assert!((est.xy - expected.c).abs() < 4.0 * est.se_xy);
    }

    #[test]
    fn feedback_monotonically_shrinks_mean_excess() {
        let p = vp(2.0, 2.5, 0.4, 1.0, 0.5);
        let mut last = f64::INFINITY;
        for g in [0.0, 1.0, 10.0, 100.0] {
            let est = ensemble_mean_moments(&p, g, 2000, 10.0, 1e-3, 5).unwrap();
            let trace = est.xx + est.yy;
            assert!(trace <= last + 3.0 * (est.se_xx + est.se_yy), "g = {g}");
            last = trace;
        }
    }
}
