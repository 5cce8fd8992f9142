//! Equations of motion of the reduced-order model.
//!
//! The body is a single rigid body carrying the whole robot mass; legs are
//! massless, so the mass matrix is constant in `[ṗ_b; ω_b]` coordinates:
//!
//! ```text
//! M [p̈_b; ω̇_b] + H = Σ_i B_g_i u_g_i + B_T u_T
//! M = blockdiag(m I₃, J_b),   H = [-m g; ω_b × J_b ω_b]
//! ```
//!
//! Joint positions are driven directly by their accelerations, `q̈_L = u_L`.

use nalgebra::{Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{
    contact_map_body, foot_position, foot_velocity, leg_vector, leg_vector_jacobian, skew, Leg,
    LegJointState, LegMount, RotationMatrix,
};

pub const NUM_LEGS: usize = 4;
pub const JOINT_DIM: usize = 12;
/// `[q_L, q̇_L, r_b, p_b, ω_b, ṗ_b]`
pub const STATE_DIM: usize = 42;
/// `[u_L, u_g (foot-major xyz), u_T]`
pub const INPUT_DIM: usize = 27;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type InputVector = SVector<f64, INPUT_DIM>;
pub type JointVector = SVector<f64, JOINT_DIM>;

/// Offsets of each block inside a flattened state.
pub mod layout {
    pub const Q_L: usize = 0;
    pub const DQ_L: usize = 12;
    pub const R_B: usize = 24;
    pub const P_B: usize = 33;
    pub const OMEGA_B: usize = 36;
    pub const DP_B: usize = 39;

    pub const U_L: usize = 0;
    pub const U_G: usize = 12;
    pub const U_T: usize = 24;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointAngleLimits {
    /// `[min, max]` of the hip y-rotation [rad].
    pub phi: [f64; 2],
    /// `[min, max]` of the hip x-rotation [rad].
    pub gamma: [f64; 2],
}

/// Lumped physical parameters of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Total mass [kg].
    pub m: f64,
    /// Body-frame inertia tensor [kg m²], row-major.
    #[serde(rename = "J_b")]
    pub j_b: [[f64; 3]; 3],
    /// Body-frame hip offsets [m] in `LF, RF, LH, RH` order.
    pub mounts: [[f64; 3]; 4],
    /// Gravity vector [m/s²].
    pub g: [f64; 3],
    /// `[r_min, r_max]` of the prismatic leg length [m].
    pub r_limits: [f64; 2],
    pub joint_angle_limits: JointAngleLimits,
    /// Bound on every joint-acceleration input (rad/s² or m/s²).
    #[serde(rename = "u_L_max")]
    pub u_l_max: f64,
    /// Bound on the resultant thrust magnitude [N].
    #[serde(rename = "u_T_max_total")]
    pub u_t_max_total: f64,
    /// Thrust of a single ducted fan [N].
    #[serde(rename = "u_T_max_per_fan")]
    pub u_t_max_per_fan: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        let g0 = 9.81;
        let mounts = LegMount::symmetric(0.15, 0.10).map(|m| [m.offset.x, m.offset.y, m.offset.z]);
        Self {
            m: 7.6,
            j_b: [
                [0.0981867, 0.0, 0.0],
                [0.0, 0.0844185, 0.0],
                [0.0, 0.0, 0.164599],
            ],
            mounts,
            g: [0.0, 0.0, -g0],
            r_limits: [0.15, 0.55],
            joint_angle_limits: JointAngleLimits {
                phi: [-1.2, 1.2],
                gamma: [-0.8, 0.8],
            },
            u_l_max: 200.0,
            // four fans at 2 kgf each
            u_t_max_total: 8.0 * g0,
            u_t_max_per_fan: 2.0 * g0,
        }
    }
}

impl RobotParams {
    pub fn inertia(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.j_b[i][j])
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.g)
    }

    pub fn weight(&self) -> f64 {
        self.m * self.gravity().norm()
    }

    pub fn mount(&self, leg: Leg) -> LegMount {
        LegMount {
            leg,
            offset: Vector3::from(self.mounts[leg.index()]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.m)));
        }
        let j = self.inertia();
        if (j - j.transpose()).norm() > 1e-12 * j.norm().max(1.0) {
            return Err(Error::InvalidParameter("J_b must be symmetric".into()));
        }
        if j.cholesky().is_none() {
            return Err(Error::InvalidParameter("J_b must be positive definite".into()));
        }
        if !(self.u_t_max_per_fan > 0.0 && self.u_t_max_total >= self.u_t_max_per_fan) {
            return Err(Error::InvalidParameter(
                "thrust limits require u_T_max_total >= u_T_max_per_fan > 0".into(),
            ));
        }
        let [r_lo, r_hi] = self.r_limits;
        if !(r_lo > 0.0 && r_hi > r_lo) {
            return Err(Error::InvalidParameter("r_limits must satisfy 0 < r_min < r_max".into()));
        }
        let JointAngleLimits { phi, gamma } = self.joint_angle_limits;
        if phi[0] >= phi[1] || gamma[0] >= gamma[1] {
            return Err(Error::InvalidParameter("joint_angle_limits must be increasing".into()));
        }
        if !(self.u_l_max > 0.0) {
            return Err(Error::InvalidParameter("u_L_max must be positive".into()));
        }
        Ok(())
    }
}

/// Full reduced-order state.
#[derive(Debug, Clone, PartialEq)]
pub struct HromState {
    pub q_l: JointVector,
    pub dq_l: JointVector,
    pub r_b: RotationMatrix,
    pub p_b: Vector3<f64>,
    pub omega_b: Vector3<f64>,
    pub dp_b: Vector3<f64>,
}

impl HromState {
    /// Builds a state, re-projecting `r_b` onto SO(3) when it is more than
    /// `1e-6` away from orthonormal.
    pub fn new(
        q_l: JointVector,
        dq_l: JointVector,
        r_b: RotationMatrix,
        p_b: Vector3<f64>,
        omega_b: Vector3<f64>,
        dp_b: Vector3<f64>,
    ) -> Self {
        let r_b = if r_b.orthonormality_error() > 1e-6 {
            RotationMatrix::from_matrix_projected(r_b.into_inner())
        } else {
            r_b
        };
        Self {
            q_l,
            dq_l,
            r_b,
            p_b,
            omega_b,
            dp_b,
        }
    }

    /// Stationary state with identical joints on every leg.
    pub fn standing(p_b: Vector3<f64>, r_b: RotationMatrix, phi: f64, gamma: f64, r: f64) -> Self {
        let mut q_l = JointVector::zeros();
        for leg in 0..NUM_LEGS {
            q_l[3 * leg] = phi;
            q_l[3 * leg + 1] = gamma;
            q_l[3 * leg + 2] = r;
        }
        Self::new(q_l, JointVector::zeros(), r_b, p_b, Vector3::zeros(), Vector3::zeros())
    }

    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<12>(layout::Q_L).copy_from(&self.q_l);
        x.fixed_rows_mut::<12>(layout::DQ_L).copy_from(&self.dq_l);
        x.fixed_rows_mut::<9>(layout::R_B)
            .copy_from_slice(self.r_b.matrix().as_slice());
        x.fixed_rows_mut::<3>(layout::P_B).copy_from(&self.p_b);
        x.fixed_rows_mut::<3>(layout::OMEGA_B).copy_from(&self.omega_b);
        x.fixed_rows_mut::<3>(layout::DP_B).copy_from(&self.dp_b);
        x
    }

    /// Inverse of [`HromState::to_vector`]; applies the same projection rule
    /// as [`HromState::new`].
    pub fn from_vector(x: &StateVector) -> Self {
        let raw = Self::from_vector_raw(x);
        Self::new(raw.q_l, raw.dq_l, raw.r_b, raw.p_b, raw.omega_b, raw.dp_b)
    }

    /// Unpacks without touching the rotation block.
    pub fn from_vector_raw(x: &StateVector) -> Self {
        Self {
            q_l: x.fixed_rows::<12>(layout::Q_L).into_owned(),
            dq_l: x.fixed_rows::<12>(layout::DQ_L).into_owned(),
            r_b: RotationMatrix::from_matrix_unchecked(rotation_block(x)),
            p_b: x.fixed_rows::<3>(layout::P_B).into_owned(),
            omega_b: x.fixed_rows::<3>(layout::OMEGA_B).into_owned(),
            dp_b: x.fixed_rows::<3>(layout::DP_B).into_owned(),
        }
    }

    pub fn leg_joints(&self, leg: Leg) -> LegJointState {
        let i = 3 * leg.index();
        LegJointState {
            phi: self.q_l[i],
            gamma: self.q_l[i + 1],
            r: self.q_l[i + 2],
            phi_dot: self.dq_l[i],
            gamma_dot: self.dq_l[i + 1],
            r_dot: self.dq_l[i + 2],
        }
    }

    pub fn foot_position(&self, params: &RobotParams, leg: Leg) -> Vector3<f64> {
        foot_position(&self.p_b, &self.r_b, &params.mount(leg), &self.leg_joints(leg))
    }

    pub fn foot_velocity(&self, params: &RobotParams, leg: Leg) -> Vector3<f64> {
        foot_velocity(
            &self.dp_b,
            &self.r_b,
            &self.omega_b,
            &params.mount(leg),
            &self.leg_joints(leg),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

pub(crate) fn rotation_block(x: &StateVector) -> Matrix3<f64> {
    Matrix3::from_column_slice(x.fixed_rows::<9>(layout::R_B).as_slice())
}

/// Joint accelerations, per-foot ground reaction forces (world frame) and
/// the resultant thrust at the COM (world frame).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub u_l: JointVector,
    pub u_g: [Vector3<f64>; NUM_LEGS],
    pub u_t: Vector3<f64>,
}

impl Default for ControlInput {
    fn default() -> Self {
        Self {
            u_l: JointVector::zeros(),
            u_g: [Vector3::zeros(); NUM_LEGS],
            u_t: Vector3::zeros(),
        }
    }
}

impl ControlInput {
    pub fn to_vector(&self) -> InputVector {
        let mut u = InputVector::zeros();
        u.fixed_rows_mut::<12>(layout::U_L).copy_from(&self.u_l);
        for (i, f) in self.u_g.iter().enumerate() {
            u.fixed_rows_mut::<3>(layout::U_G + 3 * i).copy_from(f);
        }
        u.fixed_rows_mut::<3>(layout::U_T).copy_from(&self.u_t);
        u
    }

    pub fn from_vector(u: &InputVector) -> Self {
        Self {
            u_l: u.fixed_rows::<12>(layout::U_L).into_owned(),
            u_g: std::array::from_fn(|i| u.fixed_rows::<3>(layout::U_G + 3 * i).into_owned()),
            u_t: u.fixed_rows::<3>(layout::U_T).into_owned(),
        }
    }
}

pub fn mass_inertia(params: &RobotParams) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * params.m));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&params.inertia());
    m
}

/// `H = [-m g; ω_b × J_b ω_b]`.
pub fn bias_forces(state: &HromState, params: &RobotParams) -> Vector6<f64> {
    let j = params.inertia();
    let lin = -params.m * params.gravity();
    let rot = state.omega_b.cross(&(j * state.omega_b));
    Vector6::new(lin.x, lin.y, lin.z, rot.x, rot.y, rot.z)
}

/// `Σ B_g_i u_g_i + B_T u_T` with `B_T = [I₃; 0]`.
pub fn generalized_forces(state: &HromState, input: &ControlInput, params: &RobotParams) -> Vector6<f64> {
    let mut out = Vector6::zeros();
    for leg in Leg::ALL {
        let b = contact_map_body(&state.r_b, &params.mount(leg), &state.leg_joints(leg));
        out += b.transpose() * input.u_g[leg.index()];
    }
    let mut linear = out.fixed_rows_mut::<3>(0);
    linear += input.u_t;
    out
}

/// State derivative `ẋ = f_ROM(x, u)` on flattened vectors.
///
/// The rotation block is used as given, without projection, so that the
/// function is smooth in every entry of `x`.
pub fn f_rom_flat(x: &StateVector, u: &InputVector, params: &RobotParams) -> StateVector {
    let r = rotation_block(x);
    let omega = x.fixed_rows::<3>(layout::OMEGA_B).into_owned();
    let j = params.inertia();

    let mut force = u.fixed_rows::<3>(layout::U_T).into_owned();
    let mut torque = Vector3::zeros();
    for leg in Leg::ALL {
        let i = leg.index();
        let f = u.fixed_rows::<3>(layout::U_G + 3 * i).into_owned();
        if f == Vector3::zeros() {
            continue;
        }
        let l = Vector3::from(params.mounts[i])
            + leg_vector(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        force += f;
        torque += l.cross(&(r.transpose() * f));
    }

    let p_ddot = force / params.m + params.gravity();
    let omega_dot = j
        .try_inverse()
        .expect("inertia validated positive definite")
        * (torque - omega.cross(&(j * omega)));
    let r_dot = r * skew(&omega);

    let mut dx = StateVector::zeros();
    dx.fixed_rows_mut::<12>(layout::Q_L)
        .copy_from(&x.fixed_rows::<12>(layout::DQ_L));
    dx.fixed_rows_mut::<12>(layout::DQ_L)
        .copy_from(&u.fixed_rows::<12>(layout::U_L));
    dx.fixed_rows_mut::<9>(layout::R_B)
        .copy_from_slice(r_dot.as_slice());
    dx.fixed_rows_mut::<3>(layout::P_B)
        .copy_from(&x.fixed_rows::<3>(layout::DP_B));
    dx.fixed_rows_mut::<3>(layout::OMEGA_B).copy_from(&omega_dot);
    dx.fixed_rows_mut::<3>(layout::DP_B).copy_from(&p_ddot);
    dx
}

/// Exact `(∂f/∂x, ∂f/∂u)` of [`f_rom_flat`].
pub fn f_rom_jacobian(
    x: &StateVector,
    u: &InputVector,
    params: &RobotParams,
) -> (SMatrix<f64, STATE_DIM, STATE_DIM>, SMatrix<f64, STATE_DIM, INPUT_DIM>) {
    use layout::*;
    let r = rotation_block(x);
    let omega = x.fixed_rows::<3>(OMEGA_B).into_owned();
    let j = params.inertia();
    let j_inv = j.try_inverse().expect("inertia validated positive definite");
    let mut a = SMatrix::<f64, STATE_DIM, STATE_DIM>::zeros();
    let mut b = SMatrix::<f64, STATE_DIM, INPUT_DIM>::zeros();

    for i in 0..JOINT_DIM {
        a[(Q_L + i, DQ_L + i)] = 1.0;
        b[(DQ_L + i, U_L + i)] = 1.0;
    }
    for i in 0..3 {
        a[(P_B + i, DP_B + i)] = 1.0;
    }

    // Ṙ = R [ω]×, column-major: Ṙ[i, c] sits at R_B + 3c + i
    let s = skew(&omega);
    for i in 0..3 {
        for c in 0..3 {
            for k in 0..3 {
                a[(R_B + 3 * c + i, R_B + 3 * k + i)] = s[(k, c)];
            }
        }
    }
    for axis in 0..3 {
        let d = r * skew(&Vector3::ith(axis, 1.0));
        for c in 0..3 {
            for i in 0..3 {
                a[(R_B + 3 * c + i, OMEGA_B + axis)] = d[(i, c)];
            }
        }
    }

    // ω̇ = J⁻¹ (Σ l_i × Rᵀ f_i − ω × J ω)
    let gyro = skew(&omega) * j - skew(&(j * omega));
    a.fixed_view_mut::<3, 3>(OMEGA_B, OMEGA_B).copy_from(&(-j_inv * gyro));
    let mut d_tau_dr = SMatrix::<f64, 3, 9>::zeros();
    for leg in Leg::ALL {
        let i = leg.index();
        let f = u.fixed_rows::<3>(U_G + 3 * i).into_owned();
        let (phi, gamma, len) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        let l = Vector3::from(params.mounts[i]) + leg_vector(phi, gamma, len);
        let s_l = skew(&l);
        b.fixed_view_mut::<3, 3>(OMEGA_B, U_G + 3 * i).copy_from(&(j_inv * s_l * r.transpose()));
        b.fixed_view_mut::<3, 3>(DP_B, U_G + 3 * i).copy_from(&(Matrix3::identity() / params.m));
        let d_q = -skew(&(r.transpose() * f)) * leg_vector_jacobian(phi, gamma, len);
        a.fixed_view_mut::<3, 3>(OMEGA_B, 3 * i).copy_from(&(j_inv * d_q));
        for col in 0..3 {
            for row in 0..3 {
                // ∂(Rᵀf)/∂R[row, col] = f_row e_col
                let e = Vector3::ith(col, f[row]);
                let mut c = d_tau_dr.column_mut(3 * col + row);
                c += s_l * e;
            }
        }
    }
    a.fixed_view_mut::<3, 9>(OMEGA_B, R_B).copy_from(&(j_inv * d_tau_dr));
    b.fixed_view_mut::<3, 3>(DP_B, U_T).copy_from(&(Matrix3::identity() / params.m));
    (a, b)
}

pub fn f_rom(state: &HromState, input: &ControlInput, params: &RobotParams) -> StateVector {
    f_rom_flat(&state.to_vector(), &input.to_vector(), params)
}

/// Static joint efforts balancing the ground reaction forces through the
/// massless legs: `τ_i = J_legᵀ (-u_g_i)` with `J_leg = ∂p_f/∂(φ, γ, r)`.
///
/// Hip channels are in N·m, the prismatic channel in N. Legs with zero GRF
/// report zero.
pub fn joint_torque_estimate(state: &HromState, u_g: &[Vector3<f64>; NUM_LEGS]) -> JointVector {
    let mut tau = JointVector::zeros();
    for leg in Leg::ALL {
        let i = leg.index();
        let joints = state.leg_joints(leg);
        let jac = state.r_b.matrix() * leg_vector_jacobian(joints.phi, joints.gamma, joints.r);
        let t = jac.transpose() * (-u_g[i]);
        tau.fixed_rows_mut::<3>(3 * i).copy_from(&t);
    }
    tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{rot_x, rot_y, rot_z};
    use approx::assert_relative_eq;

    fn sample_state() -> HromState {
        let mut s = HromState::standing(
            Vector3::new(0.1, -0.2, 0.35),
            rot_z(0.3) * rot_y(-0.4) * rot_x(0.1),
            0.1,
            -0.05,
            0.33,
        );
        for k in 0..12 {
            s.q_l[k] += 0.01 * k as f64;
            s.dq_l[k] = 0.1 * (k as f64 - 5.0);
        }
        s.omega_b = Vector3::new(0.3, -0.7, 0.2);
        s.dp_b = Vector3::new(0.05, 0.0, -0.1);
        s
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let p = RobotParams::default();
        // a slightly non-orthonormal rotation block exercises every entry
        let mut x = sample_state().to_vector();
        x[layout::R_B + 1] += 0.01;
        let u = InputVector::from_fn(|i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
        let (a, b) = f_rom_jacobian(&x, &u, &p);
        let h = 1e-6;
        for c in 0..STATE_DIM + INPUT_DIM {
            let eval = |d: f64| {
                let (mut xs, mut us) = (x, u);
                if c < STATE_DIM {
                    xs[c] += d;
                } else {
                    us[c - STATE_DIM] += d;
                }
                f_rom_flat(&xs, &us, &p)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let exact = if c < STATE_DIM { a.column(c).into_owned() } else { b.column(c - STATE_DIM).into_owned() };
            assert!((fd - exact).amax() < 1e-6, "column {c}");
        }
    }

    #[test]
    fn default_params_are_valid() {
        RobotParams::default().validate().unwrap();
        let mut bad = RobotParams::default();
        bad.m = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = RobotParams::default();
        bad.u_t_max_total = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mass_matrix_blocks() {
        let p = RobotParams::default();
        let m = mass_inertia(&p);
        assert_eq!(m[(0, 0)], 7.6);
        assert_eq!(m[(2, 2)], 7.6);
        assert_eq!(m[(3, 3)], 0.0981867);
        assert_eq!(m[(4, 4)], 0.0844185);
        assert_eq!(m[(5, 5)], 0.164599);
        assert_eq!(m, m.transpose());
        assert!(m.cholesky().is_some());

        let mut unit = p.clone();
        unit.m = 1.0;
        unit.j_b = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(mass_inertia(&unit), Matrix6::identity());
    }

    #[test]
    fn bias_force_cases() {
        let p = RobotParams::default();
        let mut s = sample_state();
        s.omega_b = Vector3::zeros();
        let h = bias_forces(&s, &p);
        assert_relative_eq!(h, Vector6::new(0.0, 0.0, 7.6 * 9.81, 0.0, 0.0, 0.0), epsilon = 1e-12);

        let mut sph = p.clone();
        sph.j_b = [[0.2, 0.0, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, 0.2]];
        s.omega_b = Vector3::new(1.0, -2.0, 0.5);
        assert_relative_eq!(bias_forces(&s, &sph).fixed_rows::<3>(3).norm(), 0.0, epsilon = 1e-15);

        let mut diag = p.clone();
        diag.j_b = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        s.omega_b = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(bias_forces(&s, &diag).fixed_rows::<3>(3).into_owned(), Vector3::zeros());
    }

    #[test]
    fn thrust_only_generalized_force() {
        let p = RobotParams::default();
        let s = sample_state();
        let input = ControlInput {
            u_t: Vector3::new(0.0, 0.0, 10.0),
            ..Default::default()
        };
        let f = generalized_forces(&s, &input, &p);
        assert_relative_eq!(f, Vector6::new(0.0, 0.0, 10.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn foot_below_com_produces_no_moment() {
        let mut p = RobotParams::default();
        p.mounts[0] = [0.0, 0.0, 0.0];
        let s = HromState::standing(Vector3::new(0.0, 0.0, 0.4), RotationMatrix::identity(), 0.0, 0.0, 0.4);
        let mut input = ControlInput::default();
        input.u_g[0] = Vector3::new(0.0, 0.0, 30.0);
        let f = generalized_forces(&s, &input, &p);
        assert_relative_eq!(f.fixed_rows::<3>(3).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(f[2], 30.0);
    }

    #[test]
    fn hover_and_free_fall() {
        let p = RobotParams::default();
        let s = HromState::standing(Vector3::new(0.0, 0.0, 1.0), RotationMatrix::identity(), 0.0, 0.0, 0.3);
        let hover = ControlInput {
            u_t: Vector3::new(0.0, 0.0, p.m * 9.81),
            ..Default::default()
        };
        let dx = f_rom(&s, &hover, &p);
        assert!(dx.norm() < 1e-12, "{dx}");

        let fall = f_rom(&s, &ControlInput::default(), &p);
        assert_relative_eq!(fall.fixed_rows::<3>(layout::DP_B).into_owned(), p.gravity());
        assert_eq!(fall.fixed_rows::<3>(layout::OMEGA_B).into_owned(), Vector3::zeros());
    }

    #[test]
    fn generalized_force_matches_flat_dynamics() {
        let p = RobotParams::default();
        let s = sample_state();
        let mut input = ControlInput::default();
        input.u_g = [
            Vector3::new(1.0, 2.0, 20.0),
            Vector3::new(-3.0, 0.5, 15.0),
            Vector3::zeros(),
            Vector3::new(0.2, -1.0, 25.0),
        ];
        input.u_t = Vector3::new(3.0, -1.0, 8.0);
        let dx = f_rom(&s, &input, &p);
        let gen = generalized_forces(&s, &input, &p);
        let h = bias_forces(&s, &p);
        let m = mass_inertia(&p);
        let acc = m.try_inverse().unwrap() * (gen - h);
        assert_relative_eq!(acc.fixed_rows::<3>(0).into_owned(), dx.fixed_rows::<3>(layout::DP_B).into_owned(), epsilon = 1e-12);
        assert_relative_eq!(acc.fixed_rows::<3>(3).into_owned(), dx.fixed_rows::<3>(layout::OMEGA_B).into_owned(), epsilon = 1e-12);
    }

    #[test]
    fn flatten_round_trip_is_exact() {
        let s = sample_state();
        let v = s.to_vector();
        assert_eq!(v.len(), STATE_DIM);
        assert_eq!(HromState::from_vector(&v), s);
        assert_eq!(&v.as_slice()[layout::R_B..layout::R_B + 9], s.r_b.matrix().as_slice());
        let input = ControlInput {
            u_l: JointVector::from_fn(|i, _| i as f64),
            u_g: [Vector3::new(1.0, 2.0, 3.0), Vector3::new(4.0, 5.0, 6.0), Vector3::zeros(), Vector3::new(7.0, 8.0, 9.0)],
            u_t: Vector3::new(-1.0, -2.0, -3.0),
        };
        assert_eq!(ControlInput::from_vector(&input.to_vector()), input);
    }

    #[test]
    fn torque_on_straight_leg() {
        let s = HromState::standing(Vector3::new(0.0, 0.0, 0.4), RotationMatrix::identity(), 0.0, 0.0, 0.4);
        let mut u_g = [Vector3::zeros(); 4];
        assert_eq!(joint_torque_estimate(&s, &u_g), JointVector::zeros());
        u_g[1] = Vector3::new(0.0, 0.0, 25.0);
        let tau = joint_torque_estimate(&s, &u_g);
        assert_relative_eq!(tau[3], 0.0, epsilon = 1e-14);
        assert_relative_eq!(tau[4], 0.0, epsilon = 1e-14);
        assert_relative_eq!(tau[5], 25.0, epsilon = 1e-14);
        for (k, t) in tau.iter().enumerate() {
            if !(3..6).contains(&k) {
                assert_eq!(*t, 0.0);
            }
        }
    }
}
