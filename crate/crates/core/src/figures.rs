//! Data generation for the optimal-squeezing figures: squeezing ratio
//! vs normalized nonlinearity, and optimal-squeezing maps over
//! measurement strength, temperature and efficiency.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::analytic::analytic_optimum;
use crate::error::Result;
use crate::model::{derived, SystemParams};
use crate::optimize::optimal_detuning;
use crate::steadystate::v0;
use crate::sweep::{self, Axis, GridSpec, Objective, SweepResult, SweepSpec};

/// One point of a squeezing-ratio curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    /// Normalized nonlinearity `chi' = chi / sqrt(gamma^2 + z)`.
    pub chi_prime: f64,
    /// `V_Xopt / V_0`.
    pub v_ratio: f64,
    /// `delta'_opt - chi'`.
    pub delta_offset_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub label: String,
    pub n_thermal: Option<f64>,
    pub points: Vec<RatioPoint>,
}

/// Default curve grid: log-spaced `chi'` spanning `[0.05, 20]`.
pub fn default_chi_prime_grid() -> Vec<f64> {
    GridSpec::Log {
        start: 0.05,
        stop: 20.0,
        count: 41,
    }
    .expand()
    .expect("static grid")
}

/// Numeric optimal-squeezing curve at fixed measurement strength and
/// phonon number, parameterized by `chi'`.
pub fn ratio_curve_numeric(
    mu: f64,
    eta: f64,
    n_thermal: f64,
    chi_primes: &[f64],
) -> Result<RatioCurve> {
    let mut points = Vec::with_capacity(chi_primes.len());
    for &xp in chi_primes {
        let base = SystemParams {
            mu,
            eta,
            n_thermal,
            ..Default::default()
        }
        .validate()?;
        let scale = (base.gamma * base.gamma + derived(&base).z).sqrt();
        let mut p = *base.params();
        p.chi = xp * scale;
        let vp = p.validate()?;
        let res = optimal_detuning(&vp)?;
        points.push(RatioPoint {
            chi_prime: xp,
            v_ratio: res.v_x_opt / v0(&vp),
            delta_offset_prime: res.delta_opt / scale - xp,
        });
    }
    Ok(RatioCurve {
        label: format!("numeric_N{n_thermal}"),
        n_thermal: Some(n_thermal),
        points,
    })
}

/// Exact no-measurement reference: `Delta_opt - chi = gamma`, giving
/// `V_opt/V_T = 1 - chi / (2 (chi + gamma))` with `chi' = chi/gamma`.
pub fn ratio_curve_no_measurement(chi_primes: &[f64]) -> RatioCurve {
    let points = chi_primes
        .iter()
        .map(|&xp| RatioPoint {
            chi_prime: xp,
            v_ratio: 1.0 - xp / (2.0 * (xp + 1.0)),
            delta_offset_prime: 1.0,
        })
        .collect();
    RatioCurve {
        label: "reference_mu0".into(),
        n_thermal: None,
        points,
    }
}

/// High-conditioning closed-form reference curve.
pub fn ratio_curve_analytic(chi_primes: &[f64]) -> Result<RatioCurve> {
    let points = chi_primes
        .iter()
        .map(|&xp| {
            let opt = analytic_optimum(xp)?;
            Ok(RatioPoint {
                chi_prime: xp,
                v_ratio: opt.v_ratio,
                delta_offset_prime: opt.delta_offset_prime,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioCurve {
        label: "reference_analytic".into(),
        n_thermal: None,
        points,
    })
}

/// The phonon numbers of the published ratio curves.
pub const RATIO_CURVE_NS: [f64; 5] = [0.0, 1.0, 10.0, 100.0, 1000.0];

/// All curves of the squeezing-ratio figure at `mu/gamma = 0.1, eta = 1`.
pub fn ratio_figure(chi_primes: &[f64]) -> Result<Vec<RatioCurve>> {
    let mut curves = Vec::new();
    curves.push(ratio_curve_no_measurement(chi_primes));
    curves.push(ratio_curve_analytic(chi_primes)?);
    for n in RATIO_CURVE_NS {
        curves.push(ratio_curve_numeric(0.1, 1.0, n, chi_primes)?);
    }
    Ok(curves)
}

fn write_curve_csv(curve: &RatioCurve, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# dmpa v{} curve {}", sweep::VERSION, curve.label)?;
    writeln!(out, "# mu=0.1 eta=1 gamma=1 theta=pi/4")?;
    writeln!(out, "chi_prime,v_ratio,delta_offset_prime")?;
    for p in &curve.points {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e}",
            p.chi_prime, p.v_ratio, p.delta_offset_prime
        )?;
    }
    Ok(())
}

/// Emit one CSV per curve into `dir`.
pub fn write_ratio_figure(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let curves = ratio_figure(&default_chi_prime_grid())?;
    let mut written = Vec::new();
    for curve in &curves {
        let path = dir.join(format!("fig2_{}.csv", curve.label));
        write_curve_csv(curve, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Panels of the optimal-squeezing map figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapPanel {
    /// Detuning-optimized squeezing over (mu, N) at eta = 1.
    A,
    /// Back-action-evading variance over (mu, N) at eta = 1.
    B,
    /// Detuning-optimized squeezing over (mu, eta) at N = 0.
    C,
    /// Back-action-evading variance over (mu, eta) at N = 0.
    D,
}

impl std::str::FromStr for MapPanel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "a" | "A" => Ok(MapPanel::A),
            "b" | "B" => Ok(MapPanel::B),
            "c" | "C" => Ok(MapPanel::C),
            "d" | "D" => Ok(MapPanel::D),
            other => Err(format!("unknown panel '{other}', expected a|b|c|d")),
        }
    }
}

const MAP_GRID: usize = 60;

/// Sweep specification behind each panel, at `chi/gamma = 50`.
pub fn map_panel_spec(panel: MapPanel) -> SweepSpec {
    let mu_axis = Axis {
        param: sweep::ParamName::Mu,
        grid: GridSpec::Log {
            start: 0.01,
            stop: 10.0,
            count: MAP_GRID,
        },
    };
    let n_axis = Axis {
        param: sweep::ParamName::N,
        grid: GridSpec::Log {
            start: 0.01,
            stop: 10.0,
            count: MAP_GRID,
        },
    };
    let eta_axis = Axis {
        param: sweep::ParamName::Eta,
        grid: GridSpec::Linear {
            start: 0.1,
            stop: 1.0,
            count: MAP_GRID,
        },
    };
    let fixed = SystemParams {
        chi: 50.0,
        ..Default::default()
    };
    let (axis2, objective) = match panel {
        MapPanel::A => (n_axis, Objective::VxOptimalDelta),
        MapPanel::B => (n_axis, Objective::Bae),
        MapPanel::C => (eta_axis, Objective::VxOptimalDelta),
        MapPanel::D => (eta_axis, Objective::Bae),
    };
    SweepSpec {
        axis1: mu_axis,
        axis2,
        fixed,
        objective,
    }
}

/// Run one map panel.
pub fn map_panel(panel: MapPanel) -> Result<SweepResult> {
    sweep::run_sweep(&map_panel_spec(panel))
}

/// Write one panel as CSV with squeezing-threshold marker columns.
pub fn write_map_panel(panel: MapPanel, result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# dmpa v{} map panel {:?}", sweep::VERSION, panel)?;
    writeln!(out, "# generated_at: {}", result.generated_at)?;
    let f = &result.spec.fixed;
    writeln!(
        out,
        "# fixed: gamma={} chi={} theta={} eta={} n={}",
        f.gamma, f.chi, f.theta, f.eta, f.n_thermal
    )?;
    writeln!(
        out,
        "{},{},v_x,v_db,delta_opt,stable,below_zero_point,below_3db",
        result.spec.axis1.param.as_str(),
        result.spec.axis2.param.as_str()
    )?;
    for r in &result.rows {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{},{},{}",
            r.axis1,
            r.axis2,
            r.v_x,
            r.v_db,
            r.delta_opt.map_or("".to_string(), |d| format!("{d:.17e}")),
            r.stable,
            r.v_x < 0.5,
            r.v_x < 0.25
        )?;
    }
    Ok(())
}
