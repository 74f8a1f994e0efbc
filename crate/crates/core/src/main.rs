//! Command-line surface: single-point steady-state queries, detuning and
//! measurement optimization, figure regeneration, general sweeps, and
//! stochastic trajectory simulation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dmpa::dynamics::{ensemble_mean_moments, max_step, simulate_trajectory, MeanState};
use dmpa::figures::{map_panel, map_panel_spec, write_map_panel, write_ratio_figure, MapPanel};
use dmpa::model::{derived, to_db, SystemParams};
use dmpa::steadystate::principal_variances;
use dmpa::sweep::{read_spec_file, run_sweep, write_csv_file, write_json_file};
use dmpa::{
    bae_variance, conditional_steady_state, optimal_detuning, optimal_measurement,
    unconditional_steady_state, v0, Error,
};

#[derive(Parser)]
#[command(
    name = "dmpa",
    version,
    about = "Quadrature squeezing of a detuned parametric oscillator under continuous measurement"
)]
struct Cli {
    /// Worker threads for sweeps and ensembles (default: DMPA_JOBS or all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ParamFlags {
    /// Mechanical damping rate (sets the frequency unit).
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Parametric drive strength.
    #[arg(long, default_value_t = 0.0)]
    chi: f64,
    /// Drive detuning.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Drive phase (pi/4 aligns the squeezed axis with X).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    theta: f64,
    /// Measurement strength.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Detector efficiency in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    /// Thermal phonon number.
    #[arg(long, default_value_t = 0.0)]
    n: f64,
}

impl ParamFlags {
    fn to_params(&self) -> SystemParams {
        SystemParams {
            gamma: self.gamma,
            chi: self.chi,
            delta: self.delta,
            theta: self.theta,
            mu: self.mu,
            eta: self.eta,
            n_thermal: self.n,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Conditional steady-state covariance at one parameter point.
    Steady {
        #[command(flatten)]
        params: ParamFlags,
        /// Minimize v_x over detuning first; the --delta flag is ignored.
        #[arg(long)]
        optimize_delta: bool,
        /// Emit JSON instead of the human-readable report.
        #[arg(long)]
        json: bool,
    },
    /// Optimal detuning (and optionally measurement strength) for squeezing.
    Optimize {
        #[command(flatten)]
        params: ParamFlags,
        /// Also optimize mu over this log range (two values: lo hi).
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        mu_range: Option<Vec<f64>>,
        #[arg(long)]
        json: bool,
    },
    /// Squeezing-ratio curves vs normalized nonlinearity (one CSV per curve).
    Fig2 {
        /// Output directory.
        #[arg(long, default_value = "fig2")]
        out: PathBuf,
    },
    /// Optimal-squeezing map over measurement strength and temperature or efficiency.
    Fig3 {
        /// Output CSV path.
        #[arg(long, default_value = "fig3.csv")]
        out: PathBuf,
        /// a: optimal-detuning (mu, N); b: back-action-evading (mu, N);
        /// c, d: the same pair over (mu, eta).
        #[arg(long)]
        panel: MapPanel,
        /// Also write the raw sweep result as JSON next to the CSV.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a two-axis sweep described by a JSON spec file.
    Sweep {
        /// SweepSpec JSON path.
        spec: PathBuf,
        /// Output base path; writes <out>.csv and <out>.json.
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Stochastic simulation of the conditional means (single or ensemble).
    Simulate {
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        /// Step size (default: the largest admissible explicit step).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Linear feedback gain g in the mean drift -(g) <x>.
        #[arg(long, default_value_t = 0.0)]
        feedback_gain: f64,
        /// Run this many trajectories and report ensemble moments
        /// instead of dumping one trajectory.
        #[arg(long)]
        ensemble: Option<u64>,
        /// Output JSON path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParams(_) | Error::Unstable { .. } | Error::NonPositiveVariance(_) => 2,
        Error::NoConvergence { .. } | Error::NoStableDetuning => 3,
        _ => 1,
    }
}

fn emit<T: serde::Serialize>(value: &T, out: Option<&PathBuf>) -> dmpa::Result<()> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
        }
        None => {
            serde_json::to_writer_pretty(std::io::stdout().lock(), value)?;
            println!();
        }
    }
    Ok(())
}

fn print_params(p: &SystemParams) {
    println!(
        "params: gamma={} chi={} delta={} theta={} mu={} eta={} n={}",
        p.gamma, p.chi, p.delta, p.theta, p.mu, p.eta, p.n_thermal
    );
}

fn cmd_steady(flags: &ParamFlags, optimize_delta: bool, json: bool) -> dmpa::Result<()> {
    let mut vp = flags.to_params().validate()?;
    let mut opt = None;
    if optimize_delta {
        let res = optimal_detuning(&vp)?;
        vp = vp.with_delta(res.delta_opt);
        opt = Some(res);
    }
    let ss = conditional_steady_state(&vp)?;
    let (v_min, v_max, angle) = principal_variances(&ss.cov);
    if json {
        let report = serde_json::json!({
            "params": vp.params(),
            "optimization": opt,
            "cov": ss.cov,
            "det": ss.cov.det(),
            "v_db": to_db(ss.cov.v_x)?,
            "principal": { "v_min": v_min, "v_max": v_max, "angle": angle },
            "v0": v0(&vp),
            "bae": bae_variance(&vp),
            "chi_prime": derived(&vp).chi_prime,
            "stable": vp.is_stable(),
            "residual": ss.residual,
            "iterations": ss.iterations,
        });
        emit(&report, None)?;
        return Ok(());
    }
    print_params(vp.params());
    if let Some(res) = opt {
        println!("delta optimized: delta_opt={:.12e}", res.delta_opt);
    }
    println!("V_X  = {:.12e}", ss.cov.v_x);
    println!("V_Y  = {:.12e}", ss.cov.v_y);
    println!("C    = {:.12e}", ss.cov.c);
    println!("detV = {:.12e}", ss.cov.det());
    println!(
        "squeezing dB (positive = below zero-point) = {:.6}",
        to_db(ss.cov.v_x)?
    );
    println!(
        "principal: v_min={:.12e} v_max={:.12e} angle={:.6}",
        v_min, v_max, angle
    );
    println!("pump-off V_0 = {:.12e}  BAE = {:.12e}", v0(&vp), bae_variance(&vp));
    println!("stable = {}  residual = {:.3e}  iterations = {}", vp.is_stable(), ss.residual, ss.iterations);
    Ok(())
}

fn cmd_optimize(flags: &ParamFlags, mu_range: Option<(f64, f64)>, json: bool) -> dmpa::Result<()> {
    let vp = flags.to_params().validate()?;
    let res = match mu_range {
        Some(range) => optimal_measurement(&vp, range)?,
        None => optimal_detuning(&vp)?,
    };
    if json {
        emit(&res, None)?;
        return Ok(());
    }
    print_params(vp.params());
    println!("delta_opt = {:.12e}", res.delta_opt);
    if let Some(mu) = res.mu_opt {
        println!("mu_opt    = {:.12e}", mu);
    }
    println!("v_x_opt   = {:.12e}", res.v_x_opt);
    println!(
        "squeezing dB (positive = below zero-point) = {:.6}",
        res.v_db
    );
    println!("evaluations = {}  bracket = ({:.6e}, {:.6e})  flat = {}",
        res.evaluations, res.bracket.0, res.bracket.1, res.flat);
    Ok(())
}

fn cmd_simulate(
    flags: &ParamFlags,
    t_final: f64,
    dt: Option<f64>,
    seed: u64,
    feedback_gain: f64,
    ensemble: Option<u64>,
    out: Option<&PathBuf>,
) -> dmpa::Result<()> {
    let vp = flags.to_params().validate()?;
    let dt = dt.unwrap_or_else(|| 0.999 * max_step(&vp));
    match ensemble {
        Some(n_traj) => {
            let moments = ensemble_mean_moments(&vp, feedback_gain, n_traj, t_final, dt, seed)?;
            let cond = conditional_steady_state(&vp)?.cov;
            let total = cond.add(&dmpa::CovarianceState {
                v_x: moments.xx,
                v_y: moments.yy,
                c: moments.xy,
            });
            let lyapunov = unconditional_steady_state(&vp, feedback_gain)?.cov;
            let report = serde_json::json!({
                "params": vp.params(),
                "feedback_gain": feedback_gain,
                "t_final": t_final,
                "dt": dt,
                "seed": seed,
                "mean_moments": moments,
                "conditional": cond,
                "unconditional_estimate": total,
                "unconditional_lyapunov": lyapunov,
                "v_db_estimate": to_db(total.v_x)?,
            });
            emit(&report, out)
        }
        None => {
            let v_init = conditional_steady_state(&vp)?.cov;
            let record = simulate_trajectory(
                &vp,
                &v_init,
                &MeanState::new(0.0, 0.0),
                t_final,
                dt,
                seed,
                feedback_gain,
            )?;
            emit(&record, out)
        }
    }
}

fn run(cli: Cli) -> dmpa::Result<()> {
    if let Some(jobs) = cli.jobs.or_else(|| {
        std::env::var("DMPA_JOBS")
            .ok()
            .and_then(|s| s.parse().ok())
    }) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    match &cli.command {
        Command::Steady {
            params,
            optimize_delta,
            json,
        } => cmd_steady(params, *optimize_delta, *json),
        Command::Optimize {
            params,
            mu_range,
            json,
        } => {
            let range = mu_range.as_ref().map(|v| (v[0], v[1]));
            cmd_optimize(params, range, *json)
        }
        Command::Fig2 { out } => {
            let written = write_ratio_figure(out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Fig3 { out, panel, json } => {
            let result = map_panel(*panel)?;
            write_map_panel(*panel, &result, out)?;
            println!("wrote {}", out.display());
            if *json {
                let jpath = out.with_extension("json");
                write_json_file(&result, &jpath)?;
                println!("wrote {}", jpath.display());
            }
            // keep the CSV spec discoverable without rerunning
            let _ = map_panel_spec(*panel);
            Ok(())
        }
        Command::Sweep { spec, out } => {
            let spec = read_spec_file(spec)?;
            let result = run_sweep(&spec)?;
            let csv = out.with_extension("csv");
            let json = out.with_extension("json");
            write_csv_file(&result, &csv)?;
            write_json_file(&result, &json)?;
            println!("wrote {}", csv.display());
            println!("wrote {}", json.display());
            Ok(())
        }
        Command::Simulate {
            params,
            t_final,
            dt,
            seed,
            feedback_gain,
            ensemble,
            out,
        } => cmd_simulate(
            params,
            *t_final,
            *dt,
            *seed,
            *feedback_gain,
            *ensemble,
            out.as_ref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses 2 for usage errors; this tool reserves 2 for
            // unstable parameters, so remap usage to 1
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
