//! Two-axis parameter sweeps with CSV/JSON output; the machinery behind
//! the figure-regeneration subcommands.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{derived, to_db, SystemParams};
use crate::optimize::optimal_detuning;
use crate::steadystate::{bae_variance, conditional_steady_state, v0};
use crate::analytic;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Parameter a sweep axis may range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Gamma,
    Chi,
    Delta,
    Theta,
    Mu,
    Eta,
    N,
}

impl ParamName {
    fn apply(&self, p: &mut SystemParams, value: f64) {
        match self {
            ParamName::Gamma => p.gamma = value,
            ParamName::Chi => p.chi = value,
            ParamName::Delta => p.delta = value,
            ParamName::Theta => p.theta = value,
            ParamName::Mu => p.mu = value,
            ParamName::Eta => p.eta = value,
            ParamName::N => p.n_thermal = value,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamName::Gamma => "gamma",
            ParamName::Chi => "chi",
            ParamName::Delta => "delta",
            ParamName::Theta => "theta",
            ParamName::Mu => "mu",
            ParamName::Eta => "eta",
            ParamName::N => "n",
        }
    }
}

/// Grid definition: explicit values or a linear/log range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Values { values: Vec<f64> },
    Linear { start: f64, stop: f64, count: usize },
    Log { start: f64, stop: f64, count: usize },
}

impl GridSpec {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let grid = match self {
            GridSpec::Values { values } => values.clone(),
            GridSpec::Linear { start, stop, count } => {
                if *count == 0 {
                    return Err(Error::SweepSpec("grid count must be positive".into()));
                }
                if *count == 1 {
                    vec![*start]
                } else {
                    (0..*count)
                        .map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64)
                        .collect()
                }
            }
            GridSpec::Log { start, stop, count } => {
                if *start <= 0.0 || *stop <= 0.0 {
                    return Err(Error::SweepSpec(
                        "log grid endpoints must be positive".into(),
                    ));
                }
                if *count == 0 {
                    return Err(Error::SweepSpec("grid count must be positive".into()));
                }
                if *count == 1 {
                    vec![*start]
                } else {
                    let (l0, l1) = (start.ln(), stop.ln());
                    (0..*count)
                        .map(|i| (l0 + (l1 - l0) * i as f64 / (*count - 1) as f64).exp())
                        .collect()
                }
            }
        };
        if grid.is_empty() {
            return Err(Error::SweepSpec("grid must be non-empty".into()));
        }
        if !grid.iter().all(|v| v.is_finite()) {
            return Err(Error::SweepSpec("grid values must be finite".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: ParamName,
    pub grid: GridSpec,
}

/// What to evaluate at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Conditional `v_x` at the detuning in `fixed` (or on the axis).
    VxAtGivenDelta,
    /// Conditional `v_x` minimized over detuning.
    VxOptimalDelta,
    /// Back-action-evading closed form.
    Bae,
    /// Pump-off conditional variance.
    V0,
    /// High-conditioning closed-form optimum.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    pub fixed: SystemParams,
    pub objective: Objective,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axis1.param == self.axis2.param {
            return Err(Error::SweepSpec(format!(
                "swept parameters must be distinct, both are '{}'",
                self.axis1.param.as_str()
            )));
        }
        self.axis1.grid.expand()?;
        self.axis2.grid.expand()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis1: f64,
    pub axis2: f64,
    pub v_x: f64,
    pub v_db: f64,
    pub delta_opt: Option<f64>,
    pub stable: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub version: String,
    pub generated_at: String,
    pub rows: Vec<SweepRow>,
}

fn evaluate_point(spec: &SweepSpec, a1: f64, a2: f64) -> SweepRow {
    let mut params = spec.fixed;
    spec.axis1.param.apply(&mut params, a1);
    spec.axis2.param.apply(&mut params, a2);
    let nan_row = |stable| SweepRow {
        axis1: a1,
        axis2: a2,
        v_x: f64::NAN,
        v_db: f64::NAN,
        delta_opt: None,
        stable,
        residual: f64::NAN,
    };
    let vp = match params.validate() {
        Ok(vp) => vp,
        Err(_) => return nan_row(false),
    };
    let needs_stability = matches!(
        spec.objective,
        Objective::VxAtGivenDelta | Objective::VxOptimalDelta
    );
    if needs_stability && !vp.is_stable() {
        return nan_row(false);
    }
    let stable = vp.is_stable();
    match spec.objective {
        Objective::VxAtGivenDelta => match conditional_steady_state(&vp) {
            Ok(ss) => SweepRow {
                axis1: a1,
                axis2: a2,
                v_x: ss.cov.v_x,
                v_db: to_db(ss.cov.v_x).unwrap_or(f64::NAN),
                delta_opt: None,
                stable,
                residual: ss.residual,
            },
            Err(_) => nan_row(stable),
        },
        Objective::VxOptimalDelta => match optimal_detuning(&vp) {
            Ok(res) => SweepRow {
                axis1: a1,
                axis2: a2,
                v_x: res.v_x_opt,
                v_db: res.v_db,
                delta_opt: Some(res.delta_opt),
                stable,
                residual: 0.0,
            },
            Err(_) => nan_row(stable),
        },
        Objective::Bae => {
            let v = bae_variance(&vp);
            SweepRow {
                axis1: a1,
                axis2: a2,
                v_x: v,
                v_db: to_db(v).unwrap_or(f64::NAN),
                delta_opt: None,
                stable,
                residual: 0.0,
            }
        }
        Objective::V0 => {
            let v = v0(&vp);
            SweepRow {
                axis1: a1,
                axis2: a2,
                v_x: v,
                v_db: to_db(v).unwrap_or(f64::NAN),
                delta_opt: None,
                stable,
                residual: 0.0,
            }
        }
        Objective::Analytic => {
            let d = derived(&vp);
            match analytic::analytic_optimum(d.chi_prime) {
                Ok(opt) => {
                    let v = opt.v_ratio * v0(&vp);
                    let scale = (vp.gamma * vp.gamma + d.z).sqrt();
                    SweepRow {
                        axis1: a1,
                        axis2: a2,
                        v_x: v,
                        v_db: to_db(v).unwrap_or(f64::NAN),
                        delta_opt: Some((opt.delta_offset_prime + d.chi_prime) * scale),
                        stable,
                        residual: 0.0,
                    }
                }
                Err(_) => nan_row(stable),
            }
        }
    }
}

/// Evaluate the objective on the full grid, parallel over points, with
/// deterministic axis1-major row ordering.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let grid1 = spec.axis1.grid.expand()?;
    let grid2 = spec.axis2.grid.expand()?;
    let points: Vec<(f64, f64)> = grid1
        .iter()
        .flat_map(|&a| grid2.iter().map(move |&b| (a, b)))
        .collect();
    let rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(a1, a2)| evaluate_point(spec, a1, a2))
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        version: VERSION.to_string(),
        generated_at: chrono::Utc::now().to_rfc3339(),
        rows,
    })
}

fn params_comment(p: &SystemParams) -> String {
    format!(
        "# fixed: gamma={} chi={} delta={} theta={} mu={} eta={} n={}",
        p.gamma, p.chi, p.delta, p.theta, p.mu, p.eta, p.n_thermal
    )
}

/// Write the result as CSV with a `#`-prefixed provenance header.
pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    writeln!(out, "# dmpa sweep v{}", result.version)?;
    writeln!(out, "# generated_at: {}", result.generated_at)?;
    writeln!(out, "{}", params_comment(&result.spec.fixed))?;
    writeln!(
        out,
        "# objective: {}",
        serde_json::to_string(&result.spec.objective)?.trim_matches('"')
    )?;
    writeln!(
        out,
        "{},{},v_x,v_db,delta_opt,stable,residual",
        result.spec.axis1.param.as_str(),
        result.spec.axis2.param.as_str()
    )?;
    for r in &result.rows {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.3e}",
            r.axis1,
            r.axis2,
            r.v_x,
            r.v_db,
            r.delta_opt.map_or("".to_string(), |d| format!("{d:.17e}")),
            r.stable,
            r.residual
        )?;
    }
    Ok(())
}

pub fn write_csv_file(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(result, std::io::BufWriter::new(file))
}

pub fn write_json_file(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), result)?;
    Ok(())
}

pub fn read_spec_file(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| {
        Error::SweepSpec(format!("{}: {e}", path.display()))
    })?;
    spec.validate()?;
    Ok(spec)
}
