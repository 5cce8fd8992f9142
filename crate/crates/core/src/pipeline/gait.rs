//! Kinematic crawl reference on the slope.
//!
//! The body moves up the slope at `step_length / cycle_time` with constant
//! height and slope-aligned orientation. Each foot rests at a fixed slope
//! position during stance and, during swing, moves forward one step along a
//! minimum-jerk profile while lifting on a `64 τ³ (1 − τ)³` arc, so both
//! position and velocity are continuous at lift-off and touchdown.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::contact::{slope_frame, SlopePlane};
use crate::dynamics::{HromState, JointVector, RobotParams, StateVector, NUM_LEGS};
use crate::error::{Error, Result};
use crate::so3::{leg_inverse_kinematics, leg_vector_jacobian, Leg, RotationMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParams {
    /// [s]
    pub cycle_time: f64,
    /// Fraction of the cycle each foot spends in stance.
    pub duty_factor: f64,
    /// [m]
    pub step_length: f64,
    /// Swing apex above the plane [m].
    pub step_height: f64,
    /// Lift-off time of each leg as a fraction of the cycle, ordered
    /// LF, RF, LH, RH.
    pub phase_offsets: [f64; NUM_LEGS],
    /// Nominal body height above the plane [m].
    pub body_height: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            cycle_time: 2.0,
            duty_factor: 0.8,
            step_length: 0.12,
            step_height: 0.05,
            // LF → RH → RF → LH
            phase_offsets: [0.0, 0.5, 0.75, 0.25],
            body_height: 0.32,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.cycle_time > 0.0) {
            return bad(format!("cycle_time must be positive, got {}", self.cycle_time));
        }
        if !(self.duty_factor > 0.5 && self.duty_factor < 1.0) {
            return bad(format!("duty_factor must lie in (0.5, 1), got {}", self.duty_factor));
        }
        if !(self.step_length >= 0.0) || !(self.step_height >= 0.0) {
            return bad("step length and height must be nonnegative".into());
        }
        if !(self.body_height > 0.0) {
            return bad(format!("body_height must be positive, got {}", self.body_height));
        }
        if self.phase_offsets.iter().any(|p| !(0.0..1.0).contains(p)) {
            return bad("phase offsets must lie in [0, 1)".into());
        }
        Ok(())
    }

    pub fn swing_duration(&self) -> f64 {
        (1.0 - self.duty_factor) * self.cycle_time
    }

    pub fn speed(&self) -> f64 {
        self.step_length / self.cycle_time
    }

    /// Time since the most recent lift-off of `leg` at or before `t`.
    fn since_liftoff(&self, leg: Leg, t: f64) -> f64 {
        (t - self.phase_offsets[leg.index()] * self.cycle_time).rem_euclid(self.cycle_time)
    }

    /// Normalized swing phase `τ ∈ (0, 1)`, or `None` in stance. Lift-off
    /// and touchdown instants count as stance.
    pub fn swing_phase(&self, leg: Leg, t: f64) -> Option<f64> {
        let local = self.since_liftoff(leg, t);
        let ts = self.swing_duration();
        (local > 0.0 && local < ts).then(|| local / ts)
    }

    pub fn in_stance(&self, leg: Leg, t: f64) -> bool {
        self.swing_phase(leg, t).is_none()
    }

    pub fn stance_flags(&self, t: f64) -> [bool; NUM_LEGS] {
        Leg::ALL.map(|leg| self.in_stance(leg, t))
    }
}

fn min_jerk(tau: f64) -> (f64, f64) {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    (
        t3 * (10.0 - 15.0 * tau + 6.0 * t2),
        30.0 * t2 * (1.0 - 2.0 * tau + t2),
    )
}

fn lift_arc(tau: f64) -> (f64, f64) {
    let a = tau * (1.0 - tau);
    (64.0 * a * a * a, 192.0 * a * a * (1.0 - 2.0 * tau))
}

/// Reference body and feet in slope coordinates `(along, lateral, height)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    pub body: Vector3<f64>,
    pub body_velocity: Vector3<f64>,
    pub feet: [Vector3<f64>; NUM_LEGS],
    pub foot_velocities: [Vector3<f64>; NUM_LEGS],
}

/// Body and foot reference at time `t`.
pub fn kinematic_reference(gait: &GaitParams, params: &RobotParams, t: f64) -> KinematicSample {
    let v = gait.speed();
    let ts = gait.swing_duration();
    let d = gait.duty_factor;
    let body = Vector3::new(v * t, 0.0, gait.body_height);
    let body_velocity = Vector3::new(v, 0.0, 0.0);
    let mut feet = [Vector3::zeros(); NUM_LEGS];
    let mut foot_velocities = [Vector3::zeros(); NUM_LEGS];
    for leg in Leg::ALL {
        let i = leg.index();
        let mount = Vector3::from(params.mounts[i]);
        // stance position fixed at touchdown: half a stance stroke ahead of the hip
        let placed = |touchdown: f64| mount.x + v * touchdown + 0.5 * gait.step_length * d;
        let local = gait.since_liftoff(leg, t);
        let liftoff = t - local;
        let touchdown = liftoff + ts;
        let (x, dx, z, dz) = if local < ts {
            let tau = local / ts;
            let from = placed(touchdown - gait.cycle_time);
            let to = placed(touchdown);
            let (s, ds) = min_jerk(tau);
            let (h, dh) = lift_arc(tau);
            (
                from + (to - from) * s,
                (to - from) * ds / ts,
                gait.step_height * h,
                gait.step_height * dh / ts,
            )
        } else {
            (placed(touchdown), 0.0, 0.0, 0.0)
        };
        feet[i] = Vector3::new(x, mount.y, z);
        foot_velocities[i] = Vector3::new(dx, 0.0, dz);
    }
    KinematicSample {
        body,
        body_velocity,
        feet,
        foot_velocities,
    }
}

/// Reference stance pattern and foot targets at the collocation nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitSchedule {
    pub times: Vec<f64>,
    pub stance: Vec<[bool; NUM_LEGS]>,
    /// World-frame foot reference positions per node.
    pub foot_targets: Vec<[Vector3<f64>; NUM_LEGS]>,
}

/// Full reference state at time `t` (body on the slope, joints by inverse
/// kinematics, joint rates from the leg Jacobian).
pub fn reference_state(
    gait: &GaitParams,
    params: &RobotParams,
    plane: &SlopePlane,
    t: f64,
    node: usize,
) -> Result<(HromState, [Vector3<f64>; NUM_LEGS])> {
    let k = kinematic_reference(gait, params, t);
    let frame: RotationMatrix = slope_frame(plane);
    let s: &Matrix3<f64> = frame.matrix();
    let mut q = JointVector::zeros();
    let mut dq = JointVector::zeros();
    let mut feet_world = [Vector3::zeros(); NUM_LEGS];
    for leg in Leg::ALL {
        let i = leg.index();
        // body axes coincide with slope axes, so slope coordinates are body coordinates
        let l = k.feet[i] - k.body - Vector3::from(params.mounts[i]);
        let fail = |reason: String| Error::InverseKinematics {
            leg: leg.name(),
            node,
            reason,
        };
        let (phi, gamma, r) = leg_inverse_kinematics(&l).ok_or_else(|| fail("degenerate target".into()))?;
        let [r_min, r_max] = params.r_limits;
        if r > r_max || r < r_min {
            return Err(fail(format!("leg length {r:.4} m outside [{r_min}, {r_max}]")));
        }
        let jac = leg_vector_jacobian(phi, gamma, r);
        let rel_vel = k.foot_velocities[i] - k.body_velocity;
        let rates = jac
            .try_inverse()
            .ok_or_else(|| fail("singular leg Jacobian".into()))?
            * rel_vel;
        q.fixed_rows_mut::<3>(3 * i).copy_from(&Vector3::new(phi, gamma, r));
        dq.fixed_rows_mut::<3>(3 * i).copy_from(&rates);
        feet_world[i] = plane.point(&k.feet[i]);
    }
    let state = HromState::new(
        q,
        dq,
        frame,
        plane.point(&k.body),
        Vector3::zeros(),
        s * k.body_velocity,
    );
    Ok((state, feet_world))
}

/// Node schedule and reference states `X_r` on the given node times.
pub fn generate_gait_reference(
    gait: &GaitParams,
    params: &RobotParams,
    plane: &SlopePlane,
    times: &[f64],
) -> Result<(GaitSchedule, Vec<StateVector>)> {
    gait.validate()?;
    let mut stance = Vec::with_capacity(times.len());
    let mut targets = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    for (node, &t) in times.iter().enumerate() {
        let (state, feet) = reference_state(gait, params, plane, t, node)?;
        stance.push(gait.stance_flags(t));
        targets.push(feet);
        states.push(state.to_vector());
    }
    Ok((
        GaitSchedule {
            times: times.to_vec(),
            stance,
            foot_targets: targets,
        },
        states,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn swing_windows_follow_offsets() {
        let g = GaitParams::default();
        assert!(g.in_stance(Leg::LF, 0.0));
        assert!(!g.in_stance(Leg::LF, 0.2));
        assert!(g.in_stance(Leg::LF, 0.4));
        assert!(!g.in_stance(Leg::RH, 0.6));
        assert!(!g.in_stance(Leg::RF, 1.1));
        assert!(!g.in_stance(Leg::LH, 1.7));
        for k in 0..200 {
            let t = k as f64 * 0.01;
            let swinging = Leg::ALL.iter().filter(|l| !g.in_stance(**l, t)).count();
            assert!(swinging <= 1);
        }
    }

    #[test]
    fn profiles_have_zero_end_velocity() {
        for tau in [0.0, 1.0] {
            assert_eq!(min_jerk(tau).1, 0.0);
            assert_eq!(lift_arc(tau).1, 0.0);
        }
        assert_relative_eq!(lift_arc(0.5).0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(min_jerk(1.0).0, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stance_feet_advance_one_step_per_swing() {
        let g = GaitParams::default();
        let p = RobotParams::default();
        let before = kinematic_reference(&g, &p, 0.0).feet[0];
        let after = kinematic_reference(&g, &p, 0.5).feet[0];
        assert_relative_eq!(after.x - before.x, g.step_length, epsilon = 1e-12);
        assert_eq!(after.z, 0.0);
    }

    #[test]
    fn foot_velocity_matches_position_derivative() {
        let g = GaitParams::default();
        let p = RobotParams::default();
        for &t in &[0.13, 0.31, 0.77, 1.2, 1.66] {
            let h = 1e-6;
            let a = kinematic_reference(&g, &p, t + h);
            let b = kinematic_reference(&g, &p, t - h);
            let k = kinematic_reference(&g, &p, t);
            for i in 0..NUM_LEGS {
                let fd = (a.feet[i] - b.feet[i]) / (2.0 * h);
                assert_relative_eq!(fd, k.foot_velocities[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn reference_joints_reach_foot_targets() {
        let g = GaitParams::default();
        let p = RobotParams::default();
        for deg in [0.0, 20.0, 45.0] {
            let plane = SlopePlane::from_degrees(deg);
            let times: Vec<f64> = (0..41).map(|k| k as f64 * 0.05).collect();
            let (schedule, states) = generate_gait_reference(&g, &p, &plane, &times).unwrap();
            for (x, targets) in states.iter().zip(&schedule.foot_targets) {
                let s = HromState::from_vector(x);
                for leg in Leg::ALL {
                    let foot = s.foot_position(&p, leg);
                    assert!((foot - targets[leg.index()]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn swing_apex_reaches_step_height() {
        let g = GaitParams::default();
        let p = RobotParams::default();
        // LF swings during [0, 0.4)
        let apex = kinematic_reference(&g, &p, 0.5 * g.swing_duration()).feet[0];
        assert_relative_eq!(apex.z, g.step_height, epsilon = 1e-12);
        for k in 0..=100 {
            let t = k as f64 * 0.02;
            for f in kinematic_reference(&g, &p, t).feet {
                assert!(f.z >= 0.0 && f.z <= g.step_height + 1e-12);
            }
        }
    }

    #[test]
    fn zero_step_holds_pose() {
        let g = GaitParams {
            step_length: 0.0,
            step_height: 0.0,
            ..Default::default()
        };
        let p = RobotParams::default();
        let plane = SlopePlane::from_degrees(30.0);
        let (first, _) = reference_state(&g, &p, &plane, 0.0, 0).unwrap();
        for k in 1..20 {
            let (s, _) = reference_state(&g, &p, &plane, k as f64 * 0.1, k).unwrap();
            assert!((s.to_vector() - first.to_vector()).amax() < 1e-12);
        }
    }
}
