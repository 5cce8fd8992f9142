use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wair::contact::{static_stance_feasibility, SlopePlane};
use wair::pipeline::{run_scenario, slope_sweep, ScenarioConfig};

#[derive(Parser)]
#[command(name = "wair", version, about = "Plan and verify thruster-assisted incline walking")]
struct Cli {
    /// Log solver progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the seed of the initial-guess perturbation.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::from_file(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(dir) = &self.out_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and replay it through the contact model.
    Run(Common),
    /// Solve the same gait on several slopes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated slope angles in degrees.
        #[arg(long, value_delimiter = ',', required = true)]
        angles: Vec<f64>,
    },
    /// Quasi-static check: can the feet hold the robot on the slope?
    CheckStatic {
        /// Slope angle [deg].
        #[arg(long)]
        slope: f64,
        /// Friction coefficient.
        #[arg(long)]
        mu: f64,
        /// Up-slope thrust [N].
        #[arg(long, default_value_t = 0.0)]
        thrust: f64,
        /// Robot parameters are taken from this scenario when given.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let res = run_scenario(&cfg)?;
            let s = &res.summary;
            for w in &res.warnings {
                log::warn!("{w}");
            }
            println!(
                "slope {}°: {} in {} outer / {} inner iterations, objective {:.6e}",
                s.slope_deg, s.status, s.outer_iterations, s.inner_iterations, s.objective
            );
            println!(
                "progress {:.4} m, mean thrust {:.3} N, peak stance torque {:.3}, min cone margin {:.3e} N",
                s.progress, s.mean_thrust, s.peak_stance_torque, s.min_node_cone_margin
            );
            if s.rollout_completed {
                println!(
                    "rollout progress {:.4} m (relative error {:.3})",
                    s.rollout_progress, s.rollout_progress_rel_error
                );
            }
            println!("artifacts in {}", cfg.output_dir.display());
            Ok(true)
        }
        Command::Sweep { common, angles } => {
            let cfg = common.load()?;
            let res = slope_sweep(&cfg, &angles)?;
            println!(
                "{:>8} {:>10} {:>12} {:>12} {:>10}",
                "slope", "status", "mean_thrust", "peak_torque", "progress"
            );
            for r in &res.rows {
                println!(
                    "{:>8} {:>10} {:>12.4} {:>12.4} {:>10.4}",
                    r.slope_deg, r.status, r.mean_thrust, r.peak_stance_torque, r.progress
                );
                if !r.message.is_empty() {
                    log::error!("slope {}°: {}", r.slope_deg, r.message);
                }
            }
            println!("table in {}", cfg.output_dir.join("sweep_summary.csv").display());
            Ok(res.rows.iter().all(|r| r.converged))
        }
        Command::CheckStatic { slope, mu, thrust, config } => {
            if !(mu > 0.0) {
                bail!("--mu must be positive");
            }
            let robot = match config {
                Some(path) => ScenarioConfig::from_file(&path)?.robot,
                None => Default::default(),
            };
            let plane = SlopePlane::from_degrees(slope);
            let r = static_stance_feasibility(plane.angle, mu, &(thrust * plane.uphill()), &robot);
            println!(
                "{}: required friction {:.4}, available {mu}, margin {:.3} N",
                if r.feasible { "feasible" } else { "infeasible" },
                r.required_ratio,
                r.margin
            );
            Ok(r.feasible)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
