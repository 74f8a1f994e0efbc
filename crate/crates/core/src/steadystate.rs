//! Steady-state conditional and unconditional covariances.
//!
//! The conditional second moments obey the matrix Riccati equation
//! `dV/dt = A V + V A^T + D I - 4 eta mu V^2`; its fixed point is the
//! coupled scalar system solved here. Without conditioning the quadratic
//! term drops and the fixed point is the Lyapunov covariance.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{derived, to_db, ValidatedParams};

/// Symmetric 2x2 second-moment matrix of the quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceState {
    pub v_x: f64,
    pub v_y: f64,
    pub c: f64,
}

impl CovarianceState {
    pub fn new(v_x: f64, v_y: f64, c: f64) -> Self {
        Self { v_x, v_y, c }
    }

    pub fn det(&self) -> f64 {
        self.v_x * self.v_y - self.c * self.c
    }

    pub fn is_positive_definite(&self) -> bool {
        self.v_x > 0.0 && self.det() > 0.0
    }

    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.v_x, self.c], [self.c, self.v_y]]
    }

    pub fn from_matrix(m: [[f64; 2]; 2]) -> Self {
        Self::new(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))
    }

    /// Congruence by a counterclockwise rotation: `V' = R(phi) V R(phi)^T`.
    pub fn rotated(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let r = [[c, -s], [s, c]];
        let m = mat_mul(&r, &mat_mul(&self.as_matrix(), &transpose(&r)));
        Self::from_matrix(m)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.v_x + other.v_x, self.v_y + other.v_y, self.c + other.c)
    }
}

/// Eigen-variances of the covariance and the minor-axis angle in
/// `(-pi/2, pi/2]`. Rotating the state by `-angle` diagonalizes it with
/// `v_min` on the X axis.
pub fn principal_variances(cov: &CovarianceState) -> (f64, f64, f64) {
    let mean = 0.5 * (cov.v_x + cov.v_y);
    let half_diff = 0.5 * (cov.v_x - cov.v_y);
    let radius = (half_diff * half_diff + cov.c * cov.c).sqrt();
    let v_min = mean - radius;
    let v_max = mean + radius;
    // major-axis angle, then rotate by pi/2 for the minor axis
    let major = 0.5 * (2.0 * cov.c).atan2(cov.v_x - cov.v_y);
    let mut minor = major - PI / 2.0;
    if minor <= -PI / 2.0 {
        minor += PI;
    }
    if radius == 0.0 {
        minor = 0.0;
    }
    (v_min, v_max, minor)
}

/// Drift matrix, scalar diffusion and conditioning gain of the moment
/// dynamics in the `theta = pi/4` frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusion {
    /// Drift `A = [[-gamma, chi - delta], [chi + delta, -gamma]]`.
    pub a: [[f64; 2]; 2],
    /// Diffusion constant multiplying the identity.
    pub d: f64,
    /// Conditioning strength `4 eta mu`.
    pub k_gain: f64,
}

/// Moment dynamics coefficients: mean drift `d<x>/dt = A <x>` and
/// covariance flow `dV/dt = A V + V A^T + d I - k_gain V^2`.
pub fn drift_matrix(p: &ValidatedParams) -> DriftDiffusion {
    let d = derived(p);
    DriftDiffusion {
        a: [
            [-p.gamma, p.chi - p.delta],
            [p.chi + p.delta, -p.gamma],
        ],
        d: d.diffusion,
        k_gain: 4.0 * p.eta * p.mu,
    }
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn transpose(a: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Solve `A V + V A^T + Q = 0` for symmetric `V` with 2x2 `A` and
/// symmetric `Q`. Exact elimination of the three independent entries.
pub fn solve_lyapunov(a: &[[f64; 2]; 2], q: &CovarianceState) -> Result<CovarianceState> {
    let (a11, a12, a21, a22) = (a[0][0], a[0][1], a[1][0], a[1][1]);
    // rows: d/dt of (V_xx, V_yy, V_xy) = 0
    let m = [
        [2.0 * a11, 0.0, 2.0 * a12],
        [0.0, 2.0 * a22, 2.0 * a21],
        [a21, a12, a11 + a22],
    ];
    let rhs = [-q.v_x, -q.v_y, -q.c];
    let det = det3(&m);
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if det.abs() <= 1e-14 * scale.powi(3).max(1e-300) {
        return Err(Error::NoConvergence {
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    let sol = cramer3(&m, &rhs, det);
    Ok(CovarianceState::new(sol[0], sol[1], sol[2]))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn cramer3(m: &[[f64; 3]; 3], rhs: &[f64; 3], det: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for col in 0..3 {
        let mut mc = *m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        out[col] = det3(&mc) / det;
    }
    out
}

/// Right-hand side of the covariance flow `A V + V A^T + d I - k V^2`.
pub(crate) fn riccati_rhs(dd: &DriftDiffusion, v: &CovarianceState) -> CovarianceState {
    let a = &dd.a;
    let (vx, vy, c) = (v.v_x, v.v_y, v.c);
    let dvx = 2.0 * (a[0][0] * vx + a[0][1] * c) + dd.d - dd.k_gain * (vx * vx + c * c);
    let dvy = 2.0 * (a[1][1] * vy + a[1][0] * c) + dd.d - dd.k_gain * (vy * vy + c * c);
    let dc = a[1][0] * vx + a[0][1] * vy + (a[0][0] + a[1][1]) * c - dd.k_gain * c * (vx + vy);
    CovarianceState::new(dvx, dvy, dc)
}

/// Which path produced a steady-state solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    /// Damped fixed-point iteration of the coupled scalar equations,
    /// polished by Newton steps.
    FixedPoint,
    /// Linear Lyapunov solve (conditioning off or negligible).
    Lyapunov,
    /// Time integration of the Riccati flow to stationarity.
    Integration,
}

/// A steady-state covariance together with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub cov: CovarianceState,
    /// Relative residual of the stationarity conditions.
    pub residual: f64,
    pub iterations: u64,
    pub method: SolveMethod,
}

const REL_TOL: f64 = 1e-13;
const ITER_CAP: u64 = 1_000_000;
/// Below this conditioning strength (relative to gamma) the scalar fixed
/// point is 0/0 and the Lyapunov branch takes over.
const LYAPUNOV_SWITCH: f64 = 1e-12;

/// Pump-off back-action-limited conditional variance.
/// Evaluated in a cancellation-free form; reduces to `N + 1/2` at
/// `eta mu = 0`.
pub fn v0(p: &ValidatedParams) -> f64 {
    let d = derived(p);
    // (sqrt(g^2+z)-g)/(4 eta mu) == 2 g (N+N_BA+1/2)/(sqrt(g^2+z)+g)
    2.0 * p.gamma * (p.n_thermal + d.n_ba + 0.5)
        / ((p.gamma * p.gamma + d.z).sqrt() + p.gamma)
}

/// Conditional variance of an ideal back-action-evading measurement:
/// the pump-off closed form with the back-action phonons removed.
pub fn bae_variance(p: &ValidatedParams) -> f64 {
    let z = 8.0 * p.eta * p.mu * p.gamma * (p.n_thermal + 0.5);
    2.0 * p.gamma * (p.n_thermal + 0.5) / ((p.gamma * p.gamma + z).sqrt() + p.gamma)
}

struct ScalarSystem {
    gamma: f64,
    chi: f64,
    delta: f64,
    z: f64,
    d: f64,
    k: f64,
}

impl ScalarSystem {
    fn new(p: &ValidatedParams) -> Self {
        let d = derived(p);
        Self {
            gamma: p.gamma,
            chi: p.chi,
            delta: p.delta,
            z: d.z,
            d: d.diffusion,
            k: 4.0 * p.eta * p.mu,
        }
    }

    fn radicands(&self, c: f64) -> (f64, f64) {
        let g2z = self.gamma * self.gamma + self.z;
        let kc = self.k * c;
        (
            g2z + 2.0 * self.k * (self.chi - self.delta) * c - kc * kc,
            g2z + 2.0 * self.k * (self.chi + self.delta) * c - kc * kc,
        )
    }

    fn c_target(&self, vx: f64, vy: f64) -> f64 {
        (self.chi * (vx + vy) - self.delta * (vy - vx))
            / (self.k * (vx + vy) + 2.0 * self.gamma)
    }

    /// Polynomial form of the stationarity conditions (no square roots).
    fn f(&self, vx: f64, vy: f64, c: f64) -> [f64; 3] {
        [
            self.k * (vx * vx + c * c) + 2.0 * self.gamma * vx
                - 2.0 * (self.chi - self.delta) * c
                - self.d,
            self.k * (vy * vy + c * c) + 2.0 * self.gamma * vy
                - 2.0 * (self.chi + self.delta) * c
                - self.d,
            c * (self.k * (vx + vy) + 2.0 * self.gamma) - self.chi * (vx + vy)
                + self.delta * (vy - vx),
        ]
    }

    fn jacobian(&self, vx: f64, vy: f64, c: f64) -> [[f64; 3]; 3] {
        [
            [
                2.0 * self.k * vx + 2.0 * self.gamma,
                0.0,
                2.0 * self.k * c - 2.0 * (self.chi - self.delta),
            ],
            [
                0.0,
                2.0 * self.k * vy + 2.0 * self.gamma,
                2.0 * self.k * c - 2.0 * (self.chi + self.delta),
            ],
            [
                self.k * c - self.chi - self.delta,
                self.k * c - self.chi + self.delta,
                self.k * (vx + vy) + 2.0 * self.gamma,
            ],
        ]
    }

    /// Residual of the stationarity conditions relative to the equation
    /// scale (diffusion vs damping balance).
    fn rel_residual(&self, vx: f64, vy: f64, c: f64) -> f64 {
        let f = self.f(vx, vy, c);
        let scale = self
            .d
            .max(2.0 * self.gamma * vx.abs().max(vy.abs()))
            .max(self.k * (vx * vx + vy * vy + c * c))
            .max(1e-300);
        f.iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale
    }
}

/// Conditional steady state in the internal `theta = pi/4` frame.
fn conditional_pi4(p: &ValidatedParams) -> Result<SteadyState> {
    p.ensure_stable()?;
    let dd = drift_matrix(p);
    if dd.k_gain < LYAPUNOV_SWITCH * p.gamma {
        let cov = solve_lyapunov(&dd.a, &CovarianceState::new(dd.d, dd.d, 0.0))?;
        let sys = ScalarSystem::new(p);
        return Ok(SteadyState {
            residual: residual_lyapunov(&sys, &cov),
            cov,
            iterations: 0,
            method: SolveMethod::Lyapunov,
        });
    }

    let sys = ScalarSystem::new(p);
    let start = v0(p);
    let (mut vx, mut vy, mut c) = (start, start, 0.0);
    let mut iterations: u64 = 0;
    let mut converged = false;
    let mut next_newton_at: u64 = 4;

    // Damped fixed-point stage: relax each of V_X, V_Y, C toward the
    // value implied by the other two.
    while iterations < ITER_CAP {
        iterations += 1;
        let mut c_new = c + 0.5 * (sys.c_target(vx, vy) - c);
        // keep the square-root arguments non-negative by shrinking the
        // C step, never by clamping the radicand
        let mut shrink = 0;
        loop {
            let (r1, r2) = sys.radicands(c_new);
            if r1 >= 0.0 && r2 >= 0.0 {
                break;
            }
            shrink += 1;
            if shrink > 200 {
                break;
            }
            c_new = c + 0.5 * (c_new - c);
        }
        let (r1, r2) = sys.radicands(c_new);
        if r1 < 0.0 || r2 < 0.0 {
            break; // hand off to the integration fallback
        }
        let vx_t = (r1.sqrt() - sys.gamma) / sys.k;
        let vy_t = (r2.sqrt() - sys.gamma) / sys.k;
        let vx_new = vx + 0.5 * (vx_t - vx);
        let vy_new = vy + 0.5 * (vy_t - vy);
        (vx, vy, c) = (vx_new, vy_new, c_new);
        if !vx.is_finite() || !vy.is_finite() || !c.is_finite() {
            break;
        }
        let res = sys.rel_residual(vx, vy, c);
        if res <= REL_TOL {
            converged = true;
            break;
        }
        // Newton finishes the job quadratically once the damped
        // iteration has shaped the guess; a failed attempt backs off
        // exponentially and the damped iteration keeps going
        if iterations >= next_newton_at {
            match newton_polish(&sys, vx, vy, c) {
                Some((nx, ny, nc, n_iter)) => {
                    (vx, vy, c) = (nx, ny, nc);
                    iterations += n_iter;
                    converged = sys.rel_residual(vx, vy, c) <= REL_TOL;
                    if converged {
                        break;
                    }
                    next_newton_at = iterations * 2;
                }
                None => next_newton_at = iterations * 2,
            }
        }
    }

    if converged && vx > 0.0 && vy > 0.0 {
        return Ok(SteadyState {
            cov: CovarianceState::new(vx, vy, c),
            residual: sys.rel_residual(vx, vy, c),
            iterations,
            method: SolveMethod::FixedPoint,
        });
    }

    integrate_to_stationary(p, &dd, &sys, iterations)
}

fn newton_polish(
    sys: &ScalarSystem,
    mut vx: f64,
    mut vy: f64,
    mut c: f64,
) -> Option<(f64, f64, f64, u64)> {
    for it in 0..50u64 {
        let f = sys.f(vx, vy, c);
        let j = sys.jacobian(vx, vy, c);
        let det = det3(&j);
        if det.abs() < 1e-300 {
            return None;
        }
        let rhs = [-f[0], -f[1], -f[2]];
        let step = cramer3(&j, &rhs, det);
        vx += step[0];
        vy += step[1];
        c += step[2];
        if !(vx.is_finite() && vy.is_finite() && c.is_finite()) || vx <= 0.0 || vy <= 0.0 {
            return None;
        }
        if sys.rel_residual(vx, vy, c) <= REL_TOL {
            if !is_stabilizing(sys, vx, vy, c) {
                return None;
            }
            return Some((vx, vy, c, it + 1));
        }
    }
    if !is_stabilizing(sys, vx, vy, c) {
        return None;
    }
    Some((vx, vy, c, 50))
}

/// The physical Riccati root makes the closed-loop drift `A - k V`
/// Hurwitz; other roots of the polynomial system do not.
fn is_stabilizing(sys: &ScalarSystem, vx: f64, vy: f64, c: f64) -> bool {
    if vx * vy <= c * c {
        return false;
    }
    let m = [
        [-sys.gamma - sys.k * vx, sys.chi - sys.delta - sys.k * c],
        [sys.chi + sys.delta - sys.k * c, -sys.gamma - sys.k * vy],
    ];
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    tr < 0.0 && det > 0.0
}

fn residual_lyapunov(sys: &ScalarSystem, cov: &CovarianceState) -> f64 {
    // linear branch residual: same equations with k = 0
    let lin = ScalarSystem { k: 0.0, ..*sys };
    lin.rel_residual(cov.v_x, cov.v_y, cov.c)
}

/// Fallback: march the Riccati flow from the pump-off state until the
/// time derivative vanishes.
fn integrate_to_stationary(
    p: &ValidatedParams,
    dd: &DriftDiffusion,
    sys: &ScalarSystem,
    prior_iterations: u64,
) -> Result<SteadyState> {
    let start = v0(p);
    let mut v = CovarianceState::new(start, start, 0.0);
    let rate_scale = p
        .gamma
        .max(p.chi)
        .max(p.delta.abs())
        .max(p.mu)
        .max((p.gamma * p.gamma + sys.z).sqrt())
        .max(dd.k_gain * start);
    let dt = 0.05 / rate_scale;
    let stop = 1e-12 * sys.d.max(1.0);
    let max_steps: u64 = 50_000_000;
    let mut iterations = prior_iterations;
    for _ in 0..max_steps {
        iterations += 1;
        v = rk4_step(dd, &v, dt);
        if !v.v_x.is_finite() || !v.v_y.is_finite() || !v.c.is_finite() {
            return Err(Error::NoConvergence {
                residual: f64::INFINITY,
                iterations,
            });
        }
        let rhs = riccati_rhs(dd, &v);
        let speed = rhs.v_x.abs().max(rhs.v_y.abs()).max(rhs.c.abs());
        if speed < stop {
            return Ok(SteadyState {
                residual: sys.rel_residual(v.v_x, v.v_y, v.c),
                cov: v,
                iterations,
                method: SolveMethod::Integration,
            });
        }
    }
    Err(Error::NoConvergence {
        residual: sys.rel_residual(v.v_x, v.v_y, v.c),
        iterations,
    })
}

pub(crate) fn rk4_step(dd: &DriftDiffusion, v: &CovarianceState, dt: f64) -> CovarianceState {
    let k1 = riccati_rhs(dd, v);
    let k2 = riccati_rhs(dd, &advance(v, &k1, 0.5 * dt));
    let k3 = riccati_rhs(dd, &advance(v, &k2, 0.5 * dt));
    let k4 = riccati_rhs(dd, &advance(v, &k3, dt));
    CovarianceState::new(
        v.v_x + dt / 6.0 * (k1.v_x + 2.0 * k2.v_x + 2.0 * k3.v_x + k4.v_x),
        v.v_y + dt / 6.0 * (k1.v_y + 2.0 * k2.v_y + 2.0 * k3.v_y + k4.v_y),
        v.c + dt / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c),
    )
}

fn advance(v: &CovarianceState, slope: &CovarianceState, h: f64) -> CovarianceState {
    CovarianceState::new(v.v_x + h * slope.v_x, v.v_y + h * slope.v_y, v.c + h * slope.c)
}

/// Steady-state covariance conditioned on the measurement record.
///
/// Solved in the `pi/4` frame; for any other drive phase the output is
/// rotated by `theta - pi/4`.
pub fn conditional_steady_state(p: &ValidatedParams) -> Result<SteadyState> {
    let mut ss = conditional_pi4(p)?;
    let phi = p.theta - PI / 4.0;
    if phi != 0.0 {
        ss.cov = ss.cov.rotated(phi);
    }
    Ok(ss)
}

/// Steady-state covariance without using the record, under linear
/// feedback `-g <x>` on the conditional means. The excess over the
/// conditional state is the stationary covariance of the means.
pub fn unconditional_steady_state(p: &ValidatedParams, feedback_gain: f64) -> Result<SteadyState> {
    p.ensure_stable()?;
    let mut ss = conditional_pi4(p)?;
    let dd = drift_matrix(p);
    if dd.k_gain > 0.0 {
        let v = ss.cov;
        // innovation noise feeding the means: 4 eta mu V^2
        let q = CovarianceState::new(
            dd.k_gain * (v.v_x * v.v_x + v.c * v.c),
            dd.k_gain * (v.v_y * v.v_y + v.c * v.c),
            dd.k_gain * v.c * (v.v_x + v.v_y),
        );
        let a_fb = [
            [dd.a[0][0] - feedback_gain, dd.a[0][1]],
            [dd.a[1][0], dd.a[1][1] - feedback_gain],
        ];
        let excess = solve_lyapunov(&a_fb, &q)?;
        ss.cov = ss.cov.add(&excess);
    }
    let phi = p.theta - PI / 4.0;
    if phi != 0.0 {
        ss.cov = ss.cov.rotated(phi);
    }
    Ok(ss)
}

/// Convenience: squeezing of `v_x` in dB for a solved steady state.
pub fn steady_db(ss: &SteadyState) -> Result<f64> {
    to_db(ss.cov.v_x)
}
