//! Discrete-time propagation of the reduced-order model and closed-loop
//! rollouts through the compliant contact model.

use nalgebra::Vector3;

use crate::contact::{
    contact_force, friction_cone_margin, slope_frame, ContactParams, FrictionSign, SlopePlane,
};
use crate::dynamics::{
    f_rom_flat, joint_torque_estimate, layout, rotation_block, ControlInput, HromState,
    InputVector, JointVector, RobotParams, StateVector, NUM_LEGS,
};
use crate::error::{Error, Result};
use crate::so3::{integrate_rotation, integrate_rotation_euler, project_to_so3, Leg, RotationMatrix};

/// How the rotation columns are advanced inside an explicit Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationUpdate {
    /// `R exp([ω dt]×)`.
    #[default]
    Exponential,
    /// `R + dt R[ω]×`, then projected back onto SO(3).
    LiteralEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

/// `K + V` with `K = ½ m ṗᵀṗ + ½ ωᵀ J ω` and `V = -m pᵀ g`.
pub fn mechanical_energy(x: &HromState, params: &RobotParams) -> f64 {
    let j = params.inertia();
    let kinetic = 0.5 * params.m * x.dp_b.norm_squared() + 0.5 * x.omega_b.dot(&(j * x.omega_b));
    let potential = -params.m * x.p_b.dot(&params.gravity());
    kinetic + potential
}

fn euler_advance(
    x: &StateVector,
    dx: &StateVector,
    dt: f64,
    rotation: RotationUpdate,
) -> StateVector {
    let mut next = x + dx * dt;
    let r = RotationMatrix::from_matrix_unchecked(rotation_block(x));
    let omega = x.fixed_rows::<3>(layout::OMEGA_B).into_owned();
    let r_next = match rotation {
        RotationUpdate::Exponential => integrate_rotation(&r, &omega, dt),
        RotationUpdate::LiteralEuler => integrate_rotation_euler(&r, &omega, dt),
    };
    next.fixed_rows_mut::<9>(layout::R_B)
        .copy_from_slice(r_next.matrix().as_slice());
    next
}

fn project_rotation(mut x: StateVector) -> StateVector {
    let r = project_to_so3(&rotation_block(&x));
    x.fixed_rows_mut::<9>(layout::R_B).copy_from_slice(r.as_slice());
    x
}

fn rk4_advance(x: &StateVector, dt: f64, deriv: impl Fn(&StateVector) -> StateVector) -> StateVector {
    let k1 = deriv(x);
    let k2 = deriv(&(x + k1 * (0.5 * dt)));
    let k3 = deriv(&(x + k2 * (0.5 * dt)));
    let k4 = deriv(&(x + k3 * dt));
    project_rotation(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// One explicit Euler step, `x + dt f_ROM(x, u)`, with the rotation
/// advanced on SO(3).
pub fn euler_step(x: &HromState, u: &ControlInput, dt: f64, params: &RobotParams) -> HromState {
    euler_step_with(x, u, dt, params, RotationUpdate::Exponential)
}

pub fn euler_step_with(
    x: &HromState,
    u: &ControlInput,
    dt: f64,
    params: &RobotParams,
    rotation: RotationUpdate,
) -> HromState {
    assert!(dt > 0.0, "time step must be positive");
    let xv = x.to_vector();
    let dx = f_rom_flat(&xv, &u.to_vector(), params);
    HromState::from_vector(&euler_advance(&xv, &dx, dt, rotation))
}

/// Classical fourth-order Runge-Kutta step with the input held constant.
pub fn rk4_step(x: &HromState, u: &ControlInput, dt: f64, params: &RobotParams) -> HromState {
    assert!(dt > 0.0, "time step must be positive");
    let uv = u.to_vector();
    let next = rk4_advance(&x.to_vector(), dt, |s| f_rom_flat(s, &uv, params));
    HromState::from_vector(&next)
}

/// Quantities recorded at every trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDiagnostics {
    /// World-frame ground reaction force per foot [N].
    pub grf: [Vector3<f64>; NUM_LEGS],
    /// Friction-cone margin per foot [N], zero for unloaded feet.
    pub cone_margin: [f64; NUM_LEGS],
    pub torque: JointVector,
    pub energy: f64,
}

impl SampleDiagnostics {
    pub fn evaluate(
        state: &HromState,
        grf: [Vector3<f64>; NUM_LEGS],
        plane: &SlopePlane,
        cone_mu: f64,
        params: &RobotParams,
    ) -> Self {
        let rt = slope_frame(plane).matrix().transpose();
        let cone_margin = grf.map(|f| friction_cone_margin(&(rt * f), cone_mu));
        Self {
            grf,
            cone_margin,
            torque: joint_torque_estimate(state, &grf),
            energy: mechanical_energy(state, params),
        }
    }
}

/// Time-stamped states and inputs. `inputs[k]` is applied over
/// `[times[k], times[k + 1])`, so there is one input fewer than samples.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<HromState>,
    pub inputs: Vec<ControlInput>,
    pub samples: Vec<SampleDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Input in effect at sample `k`; the final sample holds the last input.
    pub fn input_at(&self, k: usize) -> &ControlInput {
        &self.inputs[k.min(self.inputs.len().saturating_sub(1))]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.states.len() != n || self.samples.len() != n || self.inputs.len() + 1 != n {
            return Err(Error::Dimension(format!(
                "trajectory lengths: {} times, {} states, {} inputs, {} samples",
                n,
                self.states.len(),
                self.inputs.len(),
                self.samples.len()
            )));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Dimension("trajectory times must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Supplies the open-loop part of the input during a rollout.
pub trait Controller {
    /// Joint accelerations and thrust at time `t`; `u_g` is ignored and
    /// replaced by the contact model.
    fn input(&self, t: f64, state: &HromState) -> ControlInput;

    /// Which legs are allowed to carry load at time `t`.
    fn stance(&self, t: f64) -> [bool; NUM_LEGS];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub dt: f64,
    pub steps: usize,
    pub friction: FrictionSign,
    pub rotation: RotationUpdate,
    pub integrator: Integrator,
    /// Coefficient used for the recorded cone margins.
    pub cone_mu: f64,
    /// Keep every n-th step in the returned trajectory (the final state is
    /// always kept).
    pub record_every: usize,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            steps: 1000,
            friction: FrictionSign::Smooth { eps: 1e-3 },
            rotation: RotationUpdate::Exponential,
            integrator: Integrator::Euler,
            cone_mu: 1.0,
            record_every: 1,
        }
    }
}

const DIVERGENCE_NORM: f64 = 1e6;

fn contact_forces(
    x: &StateVector,
    stance: &[bool; NUM_LEGS],
    plane: &SlopePlane,
    contact: &ContactParams,
    friction: FrictionSign,
    params: &RobotParams,
) -> [Vector3<f64>; NUM_LEGS] {
    let state = HromState::from_vector_raw(x);
    std::array::from_fn(|i| {
        if !stance[i] {
            return Vector3::zeros();
        }
        let leg = Leg::ALL[i];
        let p = state.foot_position(params, leg);
        let v = state.foot_velocity(params, leg);
        contact_force(&p, &v, plane, contact, friction)
    })
}

fn with_grf(mut u: InputVector, grf: &[Vector3<f64>; NUM_LEGS]) -> InputVector {
    for (i, f) in grf.iter().enumerate() {
        u.fixed_rows_mut::<3>(layout::U_G + 3 * i).copy_from(f);
    }
    u
}

/// Closed-loop simulation: joint accelerations and thrust come from the
/// controller, ground reaction forces from the contact model evaluated at
/// the current foot states.
pub fn rollout(
    x0: &HromState,
    controller: &dyn Controller,
    plane: &SlopePlane,
    contact: &ContactParams,
    params: &RobotParams,
    opts: &RolloutOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidParameter("rollout dt must be positive".into()));
    }
    let every = opts.record_every.max(1);
    let mut traj = Trajectory::default();
    let mut x = x0.to_vector();
    let mut pending: Option<ControlInput> = None;

    for step in 0..=opts.steps {
        let t = step as f64 * opts.dt;
        if !x.iter().all(|v| v.is_finite()) || x.norm() > DIVERGENCE_NORM {
            return Err(Error::Divergence { step, t });
        }
        let state = HromState::from_vector_raw(&x);
        let stance = controller.stance(t);
        let planned = controller.input(t, &state).to_vector();
        let grf = contact_forces(&x, &stance, plane, contact, opts.friction, params);
        let u = with_grf(planned, &grf);

        if step % every == 0 || step == opts.steps {
            if let Some(prev) = pending.take() {
                traj.inputs.push(prev);
            }
            traj.times.push(t);
            traj.samples
                .push(SampleDiagnostics::evaluate(&state, grf, plane, opts.cone_mu, params));
            traj.states.push(state);
            pending = Some(ControlInput::from_vector(&u));
        }
        if step == opts.steps {
            break;
        }

        x = match opts.integrator {
            Integrator::Euler => {
                let dx = f_rom_flat(&x, &u, params);
                euler_advance(&x, &dx, opts.dt, opts.rotation)
            }
            Integrator::Rk4 => {
                let stage_t = |frac: f64| t + frac * opts.dt;
                let deriv_at = |s: &StateVector, frac: f64| {
                    let st = HromState::from_vector_raw(s);
                    let tt = stage_t(frac);
                    let stance = controller.stance(tt);
                    let planned = controller.input(tt, &st).to_vector();
                    let grf = contact_forces(s, &stance, plane, contact, opts.friction, params);
                    f_rom_flat(s, &with_grf(planned, &grf), params)
                };
                let k1 = f_rom_flat(&x, &u, params);
                let k2 = deriv_at(&(x + k1 * (0.5 * opts.dt)), 0.5);
                let k3 = deriv_at(&(x + k2 * (0.5 * opts.dt)), 0.5);
                let k4 = deriv_at(&(x + k3 * opts.dt), 1.0);
                project_rotation(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (opts.dt / 6.0))
            }
        };
    }
    Ok(traj)
}

/// Controller with fixed input and stance pattern.
#[derive(Debug, Clone)]
pub struct ConstantController {
    pub input: ControlInput,
    pub stance: [bool; NUM_LEGS],
}

impl Controller for ConstantController {
    fn input(&self, _t: f64, _state: &HromState) -> ControlInput {
        self.input.clone()
    }

    fn stance(&self, _t: f64) -> [bool; NUM_LEGS] {
        self.stance
    }
}
