//! End-to-end scenarios: reference generation, transcription, solve,
//! closed-loop replay and artifacts.

pub mod gait;
pub mod io;

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collocation::{
    hermite_segment, segment_eval, BoundaryConditions, CollocationGrid, CostWeights, DecisionLayout,
    DecisionVector, Dynamics, FdScheme, WairTranscription,
};
use crate::contact::{static_stance_feasibility, ContactParams, FrictionSign, SlopePlane};
use crate::dynamics::{
    joint_torque_estimate, layout, ControlInput, HromState, InputVector, RobotParams, StateVector,
    NUM_LEGS, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::integrate::{rollout, Controller, Integrator, RolloutOptions, SampleDiagnostics, Trajectory};
use crate::nlp::{solve, NlpProblem, ScaledProblem, SolveOptions, SolveReport};
use crate::so3::Leg;

pub use gait::{generate_gait_reference, GaitParams, GaitSchedule};

/// Solver settings as exposed in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub opt_tol: f64,
    pub feas_tol: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub fd_scheme: FdScheme,
    /// Margin demanded of the cone and normal-force rows [N].
    pub cone_backoff: f64,
    /// Smoothing of the tangential-force norm in the cone rows [N].
    pub cone_smoothing: f64,
    /// Multiplier on the tracking cost seen by the solver.
    pub objective_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            opt_tol: o.opt_tol,
            feas_tol: o.feas_tol,
            max_outer_iterations: o.max_outer_iterations,
            max_inner_iterations: o.max_inner_iterations,
            initial_penalty: o.initial_penalty,
            penalty_growth: o.penalty_growth,
            // Above this, rounding in the defects times the penalty swamps
            // the stationarity test.
            max_penalty: 1e5,
            fd_scheme: FdScheme::Central,
            cone_backoff: 1e-5,
            cone_smoothing: 1e-3,
            objective_scale: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            opt_tol: self.opt_tol,
            feas_tol: self.feas_tol,
            max_outer_iterations: self.max_outer_iterations,
            max_inner_iterations: self.max_inner_iterations,
            initial_penalty: self.initial_penalty,
            penalty_growth: self.penalty_growth,
            max_penalty: self.max_penalty,
        }
    }
}

/// Closed-loop replay settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub enabled: bool,
    /// [s]
    pub dt: f64,
    /// Width of the smoothed friction sign [m/s].
    pub friction_eps: f64,
    /// Seconds between rows of `rollout.csv`.
    pub record_interval: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            dt: 2e-4,
            friction_eps: 1e-3,
            record_interval: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Slope inclination [deg].
    pub slope_deg: f64,
    /// Horizon [s].
    pub t_f: f64,
    /// Number of collocation nodes.
    #[serde(rename = "N")]
    pub n: usize,
    pub gait: GaitParams,
    pub robot: RobotParams,
    /// Ground model used for the closed-loop replay.
    pub contact: ContactParams,
    pub weights: CostWeights,
    pub thrust_enabled: bool,
    pub cone_mu: f64,
    /// Smallest normal force of a stance foot, as a fraction of `m·g`.
    /// Keeps planned stances away from lift-off, where an open-loop replay
    /// tips over.
    pub min_stance_load: f64,
    pub output_dir: PathBuf,
    /// Require zero body angular velocity at the final node.
    pub terminal_zero_omega: bool,
    /// Hold every foot on the gait's foot trajectory at the nodes. Without
    /// it the GRFs are free inputs and nothing ties the planned feet to the
    /// ground.
    pub pin_feet: bool,
    /// Plan samples written per collocation interval.
    pub samples_per_interval: usize,
    /// Amplitude of the uniform perturbation added to the initial guess
    /// states (nodes after the first).
    pub initial_guess_noise: f64,
    pub seed: u64,
    pub solver: SolverConfig,
    pub rollout: RolloutConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            slope_deg: 0.0,
            t_f: 2.0,
            n: 31,
            gait: GaitParams::default(),
            robot: RobotParams::default(),
            contact: ContactParams::stiff(),
            weights: CostWeights::default(),
            thrust_enabled: true,
            cone_mu: 1.0,
            min_stance_load: 0.05,
            output_dir: PathBuf::from("out"),
            terminal_zero_omega: true,
            pin_feet: true,
            samples_per_interval: 10,
            initial_guess_noise: 0.0,
            seed: 0,
            solver: SolverConfig::default(),
            rollout: RolloutConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(0.0..=60.0).contains(&self.slope_deg) {
            return bad(format!("slope_deg must lie in [0, 60], got {}", self.slope_deg));
        }
        if !(self.t_f > 0.0) {
            return bad(format!("t_f must be positive, got {}", self.t_f));
        }
        if self.n < 3 {
            return bad(format!("N must be at least 3, got {}", self.n));
        }
        if !(self.cone_mu > 0.0) {
            return bad(format!("cone_mu must be positive, got {}", self.cone_mu));
        }
        if !(0.0..0.25).contains(&self.min_stance_load) {
            return bad(format!("min_stance_load must lie in [0, 0.25), got {}", self.min_stance_load));
        }
        if self.samples_per_interval == 0 {
            return bad("samples_per_interval must be at least 1".into());
        }
        if !(self.initial_guess_noise >= 0.0) {
            return bad("initial_guess_noise must be nonnegative".into());
        }
        if self.rollout.enabled && !(self.rollout.dt > 0.0 && self.rollout.friction_eps > 0.0) {
            return bad("rollout dt and friction_eps must be positive".into());
        }
        self.gait.validate()?;
        self.robot.validate()?;
        self.contact.validate()?;
        self.weights.validate()?;
        Ok(())
    }

    pub fn plane(&self) -> SlopePlane {
        SlopePlane::from_degrees(self.slope_deg)
    }
}

/// Transcribed scenario plus the variable scaling used for solving.
pub struct WairProblem {
    pub transcription: WairTranscription,
    pub schedule: GaitSchedule,
    /// Characteristic magnitude of every decision variable.
    pub scale: DVector<f64>,
    pub objective_scale: f64,
    pub warnings: Vec<String>,
}

impl WairProblem {
    /// The problem in scaled variables `z = y / scale`.
    pub fn scaled(&self) -> ScaledProblem<'_> {
        ScaledProblem::new(&self.transcription, self.scale.clone(), self.objective_scale)
    }
}

/// Initial guess: reference states, zero joint accelerations, half of the
/// gravity component along the slope as thrust, and the remaining weight
/// shared equally between the stance feet.
fn initial_guess(
    config: &ScenarioConfig,
    layout: &DecisionLayout,
    reference: &[StateVector],
    stance: &[[bool; NUM_LEGS]],
) -> DVector<f64> {
    let p = &config.robot;
    let plane = config.plane();
    let thrust = if config.thrust_enabled {
        0.5 * p.weight() * plane.angle.sin() * plane.uphill()
    } else {
        Vector3::zeros()
    };
    let support = -(p.m * p.gravity()) - thrust;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut y = DVector::zeros(layout.len());
    for k in 0..layout.nodes {
        let mut x = reference[k];
        if k > 0 && config.initial_guess_noise > 0.0 {
            for v in x.iter_mut() {
                *v += config.initial_guess_noise * rng.random_range(-1.0..1.0);
            }
        }
        y.rows_mut(layout.state_offset(k), STATE_DIM).copy_from(&x);
        let n_stance = stance[k].iter().filter(|s| **s).count().max(1) as f64;
        let mut u = ControlInput {
            u_t: thrust,
            ..Default::default()
        };
        for leg in 0..NUM_LEGS {
            if stance[k][leg] {
                u.u_g[leg] = support / n_stance;
            }
        }
        y.rows_mut(layout.input_offset(k), u.to_vector().len())
            .copy_from(&u.to_vector());
    }
    y[layout.tf_index()] = config.t_f;
    y
}

pub fn build_wair_problem(config: &ScenarioConfig) -> Result<WairProblem> {
    config.validate()?;
    let grid = CollocationGrid::uniform(config.t_f, config.n)?;
    let plane = config.plane();
    let (schedule, reference) = generate_gait_reference(&config.gait, &config.robot, &plane, grid.times())?;
    let layout = DecisionLayout::hrom(config.n);

    let mut warnings = Vec::new();
    if !config.thrust_enabled {
        let check = static_stance_feasibility(plane.angle, config.cone_mu, &Vector3::zeros(), &config.robot);
        if !check.feasible {
            warnings.push(format!(
                "slope {}° needs tangential/normal ratio {:.4} > cone_mu {} without thrust; the problem is likely infeasible",
                config.slope_deg, check.required_ratio, config.cone_mu
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let y0 = initial_guess(config, &layout, &reference, &schedule.stance);
    let boundary = BoundaryConditions {
        initial_state: DVector::from_column_slice(reference[0].as_slice()),
        progress_target: Some(config.gait.speed() * config.t_f),
        zero_terminal_omega: config.terminal_zero_omega,
        t_f: config.t_f,
    };
    let mut transcription = WairTranscription::new(
        grid,
        config.robot.clone(),
        reference
            .iter()
            .map(|x| DVector::from_column_slice(x.as_slice()))
            .collect(),
        config.weights.q_diagonal(),
        config.weights.r_diagonal(),
        schedule.stance.clone(),
        plane,
        config.cone_mu,
        config.thrust_enabled,
        boundary,
        y0,
    )?;
    transcription.fd_scheme = config.solver.fd_scheme;
    transcription.cone_backoff = config.solver.cone_backoff;
    transcription.cone_smoothing = config.solver.cone_smoothing;
    transcription.min_normal_force = config.min_stance_load * config.robot.weight();
    if config.pin_feet {
        transcription.set_foot_targets(&schedule.foot_targets)?;
    }

    let force = config.robot.weight();
    let mut scale = DVector::from_element(layout.len(), 1.0);
    for k in 0..layout.nodes {
        let o = layout.input_offset(k);
        scale.rows_mut(o + layout::U_G, 12).fill(force);
        scale.rows_mut(o + layout::U_T, 3).fill(force);
    }
    Ok(WairProblem {
        transcription,
        schedule,
        scale,
        objective_scale: config.solver.objective_scale,
        warnings,
    })
}

/// Continuous-time view of a solved plan: Hermite states, linear inputs.
#[derive(Debug, Clone)]
pub struct PlanInterpolant {
    pub grid: CollocationGrid,
    pub nodes: DecisionVector,
    derivatives: Vec<DVector<f64>>,
    gait: GaitParams,
}

impl PlanInterpolant {
    pub fn new(grid: CollocationGrid, nodes: DecisionVector, dynamics: &dyn Dynamics, gait: GaitParams) -> Self {
        let derivatives = nodes
            .states
            .iter()
            .zip(&nodes.inputs)
            .map(|(x, u)| dynamics.eval(x.as_slice(), u.as_slice()))
            .collect();
        Self {
            grid,
            nodes,
            derivatives,
            gait,
        }
    }

    pub fn state_at(&self, t: f64) -> Result<StateVector> {
        let (j, s) = self.grid.locate(t)?;
        let seg = hermite_segment(
            &self.nodes.states[j],
            &self.nodes.states[j + 1],
            &self.derivatives[j],
            &self.derivatives[j + 1],
            self.grid.step(j),
        );
        Ok(StateVector::from_column_slice(segment_eval(&seg, s).as_slice()))
    }

    pub fn input_at(&self, t: f64) -> Result<InputVector> {
        let u = crate::collocation::input_interpolant(&self.nodes.inputs, &self.grid, t)?;
        Ok(InputVector::from_column_slice(u.as_slice()))
    }
}

impl Controller for PlanInterpolant {
    fn input(&self, t: f64, _state: &HromState) -> ControlInput {
        let t = t.clamp(self.grid.t_start(), self.grid.t_final());
        ControlInput::from_vector(&self.input_at(t).expect("time clamped to the grid"))
    }

    fn stance(&self, t: f64) -> [bool; NUM_LEGS] {
        self.gait.stance_flags(t)
    }
}

/// Scalar metrics of one scenario (one row of `summary.csv`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub slope_deg: f64,
    pub thrust_enabled: bool,
    pub status: String,
    pub converged: bool,
    pub objective: f64,
    pub max_equality_violation: f64,
    pub max_inequality_violation: f64,
    pub kkt_residual: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Up-slope body displacement of the plan [m].
    pub progress: f64,
    /// Minimum `μ u_z − ‖u_t‖` over stance feet at the nodes [N].
    pub min_node_cone_margin: f64,
    /// Same, over the interpolated plan samples with stance feet [N].
    pub min_fine_cone_margin: f64,
    pub min_node_normal_force: f64,
    /// Mean thrust magnitude over the nodes [N].
    pub mean_thrust: f64,
    pub peak_thrust: f64,
    /// Largest `|τ|` over stance legs and all joint channels at the nodes
    /// (hip channels in N·m, prismatic channel in N).
    pub peak_stance_torque: f64,
    /// Same as `peak_stance_torque`, front legs only.
    pub peak_front_leg_torque: f64,
    /// Largest hip-channel `|τ|` over stance legs [N·m].
    pub peak_hip_torque: f64,
    pub rollout_completed: bool,
    /// Up-slope body displacement of the closed-loop replay [m].
    pub rollout_progress: f64,
    pub rollout_progress_rel_error: f64,
    /// Largest body position gap between replay and plan [m].
    pub rollout_max_position_deviation: f64,
}

pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub summary: ScenarioSummary,
    pub report: SolveReport,
    pub nodes: DecisionVector,
    /// Plan on the fine output grid.
    pub plan: Trajectory,
    pub rollout: Option<Trajectory>,
    pub warnings: Vec<String>,
}

fn plan_trajectory(config: &ScenarioConfig, interp: &PlanInterpolant) -> Result<Trajectory> {
    let grid = &interp.grid;
    let m = config.samples_per_interval;
    let mut times = Vec::with_capacity(grid.intervals() * m + 1);
    for j in 0..grid.intervals() {
        for s in 0..m {
            times.push(grid.times()[j] + grid.step(j) * s as f64 / m as f64);
        }
    }
    times.push(grid.t_final());
    let plane = config.plane();
    let mut traj = Trajectory::default();
    for (k, &t) in times.iter().enumerate() {
        let x = HromState::from_vector_raw(&interp.state_at(t)?);
        let u = ControlInput::from_vector(&interp.input_at(t)?);
        traj.samples.push(SampleDiagnostics::evaluate(&x, u.u_g, &plane, config.cone_mu, &config.robot));
        traj.states.push(x);
        if k + 1 < times.len() {
            traj.inputs.push(u);
        }
    }
    traj.times = times;
    Ok(traj)
}

struct NodeMetrics {
    min_normal: f64,
    mean_thrust: f64,
    peak_thrust: f64,
    peak_torque: f64,
    peak_front: f64,
    peak_hip: f64,
}

fn node_metrics(nodes: &DecisionVector, stance: &[[bool; NUM_LEGS]], plane: &SlopePlane) -> NodeMetrics {
    let mut m = NodeMetrics {
        min_normal: f64::INFINITY,
        mean_thrust: 0.0,
        peak_thrust: 0.0,
        peak_torque: 0.0,
        peak_front: 0.0,
        peak_hip: 0.0,
    };
    let n = nodes.states.len();
    for k in 0..n {
        let x = HromState::from_vector_raw(&StateVector::from_column_slice(nodes.states[k].as_slice()));
        let u = ControlInput::from_vector(&InputVector::from_column_slice(nodes.inputs[k].as_slice()));
        let thrust = u.u_t.norm();
        m.mean_thrust += thrust / n as f64;
        m.peak_thrust = m.peak_thrust.max(thrust);
        let tau = joint_torque_estimate(&x, &u.u_g);
        for leg in Leg::ALL {
            let i = leg.index();
            if !stance[k][i] {
                continue;
            }
            m.min_normal = m.min_normal.min(plane.normal().dot(&u.u_g[i]));
            for c in 0..3 {
                let v = tau[3 * i + c].abs();
                m.peak_torque = m.peak_torque.max(v);
                if leg.is_front() {
                    m.peak_front = m.peak_front.max(v);
                }
                if c < 2 {
                    m.peak_hip = m.peak_hip.max(v);
                }
            }
        }
    }
    m
}

/// Solves and verifies one scenario without treating non-convergence as an
/// error. Artifacts are written to `config.output_dir`.
pub fn execute_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let problem = build_wair_problem(config)?;
    let scaled = problem.scaled();
    let report = solve(&scaled, &config.solver.options());
    let y = scaled.to_inner(&report.x);
    let tr = &problem.transcription;
    let nodes = DecisionVector::unpack(&tr.layout, &y)?;
    let interp = PlanInterpolant::new(tr.grid.clone(), nodes.clone(), &tr.dynamics, config.gait.clone());
    let plan = plan_trajectory(config, &interp)?;
    let plane = config.plane();
    let mut warnings = problem.warnings.clone();

    let min_fine = plan
        .times
        .iter()
        .zip(&plan.samples)
        .flat_map(|(&t, s)| {
            let flags = config.gait.stance_flags(t);
            (0..NUM_LEGS).filter(move |&i| flags[i]).map(move |i| s.cone_margin[i])
        })
        .fold(f64::INFINITY, f64::min);
    let metrics = node_metrics(&nodes, &tr.stance, &plane);
    let progress = tr.progress(&y);

    let mut summary = ScenarioSummary {
        slope_deg: config.slope_deg,
        thrust_enabled: config.thrust_enabled,
        status: report.status.to_string(),
        converged: report.converged(),
        objective: tr.objective(&y),
        max_equality_violation: report.max_equality_violation,
        max_inequality_violation: report.max_inequality_violation,
        kkt_residual: report.kkt_residual,
        outer_iterations: report.iterations,
        inner_iterations: report.inner_iterations,
        progress,
        min_node_cone_margin: tr.min_node_cone_margin(&y),
        min_fine_cone_margin: min_fine,
        min_node_normal_force: metrics.min_normal,
        mean_thrust: metrics.mean_thrust,
        peak_thrust: metrics.peak_thrust,
        peak_stance_torque: metrics.peak_torque,
        peak_front_leg_torque: metrics.peak_front,
        peak_hip_torque: metrics.peak_hip,
        rollout_completed: false,
        rollout_progress: f64::NAN,
        rollout_progress_rel_error: f64::NAN,
        rollout_max_position_deviation: f64::NAN,
    };

    let mut rollout_traj = None;
    if config.rollout.enabled {
        let x0 = HromState::from_vector(&StateVector::from_column_slice(nodes.states[0].as_slice()));
        let steps = (config.t_f / config.rollout.dt).round() as usize;
        let opts = RolloutOptions {
            dt: config.rollout.dt,
            steps,
            friction: FrictionSign::Smooth {
                eps: config.rollout.friction_eps,
            },
            integrator: Integrator::Rk4,
            cone_mu: config.cone_mu,
            record_every: ((config.rollout.record_interval / config.rollout.dt).round() as usize).max(1),
            ..RolloutOptions::default()
        };
        match rollout(&x0, &interp, &plane, &config.contact, &config.robot, &opts) {
            Ok(traj) => {
                let p0 = traj.states[0].p_b;
                let p_end = traj.states.last().unwrap().p_b;
                let rp = plane.uphill().dot(&(p_end - p0));
                let mut deviation: f64 = 0.0;
                for (t, s) in traj.times.iter().zip(&traj.states) {
                    let planned = interp.state_at(t.min(tr.grid.t_final()))?;
                    let pp = Vector3::from_column_slice(&planned.as_slice()[layout::P_B..layout::P_B + 3]);
                    deviation = deviation.max((s.p_b - pp).norm());
                }
                summary.rollout_completed = true;
                summary.rollout_progress = rp;
                summary.rollout_progress_rel_error = (rp - progress).abs() / progress.abs().max(1e-12);
                summary.rollout_max_position_deviation = deviation;
                rollout_traj = Some(traj);
            }
            Err(e) => {
                let msg = format!("closed-loop replay failed: {e}");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    io::write_trajectory_csv(&dir.join("trajectory.csv"), &plan)?;
    if let Some(traj) = &rollout_traj {
        io::write_trajectory_csv(&dir.join("rollout.csv"), traj)?;
    }
    io::write_summary_csv(&dir.join("summary.csv"), std::slice::from_ref(&summary))?;
    let mut header = vec![
        format!("slope_deg = {}", config.slope_deg),
        format!("thrust_enabled = {}", config.thrust_enabled),
        format!("N = {}, t_f = {}", config.n, config.t_f),
        format!(
            "variables = {}, equalities = {}, inequalities = {}",
            tr.num_variables(),
            tr.num_equalities(),
            tr.num_inequalities()
        ),
    ];
    header.extend(warnings.iter().map(|w| format!("warning: {w}")));
    io::write_solver_log(&dir.join("solver.log"), &report, &header)?;

    Ok(ScenarioResult {
        config: config.clone(),
        summary,
        report,
        nodes,
        plan,
        rollout: rollout_traj,
        warnings,
    })
}

/// Like [`execute_scenario`], but a solve that did not converge is an error
/// (artifacts are still written).
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let result = execute_scenario(config)?;
    if !result.report.converged() {
        let r = &result.report;
        return Err(Error::NotConverged(format!(
            "slope {}°: status {}, eq violation {:.3e}, ineq violation {:.3e}, kkt {:.3e} after {} outer iterations (see {})",
            config.slope_deg,
            r.status,
            r.max_equality_violation,
            r.max_inequality_violation,
            r.kkt_residual,
            r.iterations,
            config.output_dir.join("solver.log").display()
        )));
    }
    Ok(result)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub slope_deg: f64,
    pub status: String,
    pub converged: bool,
    pub mean_thrust: f64,
    pub peak_stance_torque: f64,
    pub peak_front_leg_torque: f64,
    pub min_node_cone_margin: f64,
    pub progress: f64,
    pub rollout_progress: f64,
    pub message: String,
}

impl SweepRow {
    fn from_summary(s: &ScenarioSummary) -> Self {
        Self {
            slope_deg: s.slope_deg,
            status: s.status.clone(),
            converged: s.converged,
            mean_thrust: s.mean_thrust,
            peak_stance_torque: s.peak_stance_torque,
            peak_front_leg_torque: s.peak_front_leg_torque,
            min_node_cone_margin: s.min_node_cone_margin,
            progress: s.progress,
            rollout_progress: s.rollout_progress,
            message: String::new(),
        }
    }

    fn failed(slope_deg: f64, err: &Error) -> Self {
        Self {
            slope_deg,
            status: "error".into(),
            converged: false,
            mean_thrust: f64::NAN,
            peak_stance_torque: f64::NAN,
            peak_front_leg_torque: f64::NAN,
            min_node_cone_margin: f64::NAN,
            progress: f64::NAN,
            rollout_progress: f64::NAN,
            message: err.to_string(),
        }
    }
}

pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-angle results in the order of the requested angles.
    pub scenarios: Vec<Result<ScenarioResult>>,
}

/// Output directory of one sweep angle.
pub fn sweep_dir(base: &Path, slope_deg: f64) -> PathBuf {
    base.join(format!("slope_{slope_deg}"))
}

/// Runs every angle with the shared gait, in parallel, writing each
/// scenario under `<output_dir>/slope_<deg>` and the comparison table to
/// `<output_dir>/sweep_summary.csv`. Failed angles still produce a row.
pub fn slope_sweep(base: &ScenarioConfig, angles: &[f64]) -> Result<SweepResult> {
    if angles.len() < 2 {
        return Err(Error::InvalidParameter("a sweep needs at least two angles".into()));
    }
    let configs: Vec<ScenarioConfig> = angles
        .iter()
        .map(|&a| ScenarioConfig {
            slope_deg: a,
            output_dir: sweep_dir(&base.output_dir, a),
            ..base.clone()
        })
        .collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let mut scenarios: Vec<Result<ScenarioResult>> = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(workers) {
        let done: Vec<Result<ScenarioResult>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|cfg| s.spawn(move || execute_scenario(cfg)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::NotConverged("scenario thread panicked".into()))))
                .collect()
        });
        scenarios.extend(done);
    }
    let rows: Vec<SweepRow> = scenarios
        .iter()
        .zip(angles)
        .map(|(r, &a)| match r {
            Ok(res) => SweepRow::from_summary(&res.summary),
            Err(e) => SweepRow::failed(a, e),
        })
        .collect();
    std::fs::create_dir_all(&base.output_dir)?;
    io::write_summary_csv(&base.output_dir.join("sweep_summary.csv"), &rows)?;
    Ok(SweepResult { rows, scenarios })
}
