//! Rotation algebra and the leg kinematics of the reduced-order model.
//!
//! Conventions used throughout the crate:
//! - `R_b` maps body-frame vectors to the world frame, `a = R_b a^b`.
//! - The body angular velocity `ω_b` is expressed in the body frame, so
//!   `Ṙ_b = R_b [ω_b]×`.
//! - A leg is two hip rotations followed by a prismatic segment:
//!   `l_f^b = R_y(φ) R_x(γ) [0, 0, -r]ᵀ`, mounted at the body-frame hip
//!   offset `l_h^b`.

use nalgebra::{Matrix3, Matrix3x6, Vector3, SVD};
use serde::{Deserialize, Serialize};

/// Cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// A rotation matrix in SO(3) mapping body-frame vectors into the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking or projecting it.
    ///
    /// Used on raw decision-vector data where `R` is only approximately
    /// orthonormal and must be evaluated as given.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Projects an arbitrary (near-rotation) matrix onto SO(3).
    pub fn from_matrix_projected(m: Matrix3<f64>) -> Self {
        Self(project_to_so3(&m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Frobenius norm of `RᵀR - I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    /// Column-major entries `[r_b1, r_b2, r_b3]`.
    pub fn columns_flat(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out.copy_from_slice(self.0.as_slice());
        out
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vector3<f64>> for RotationMatrix {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

impl std::ops::Mul<&Vector3<f64>> for &RotationMatrix {
    type Output = Vector3<f64>;
    fn mul(self, rhs: &Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

pub fn rot_x(angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    RotationMatrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
}

pub fn rot_y(angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    RotationMatrix(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
}

pub fn rot_z(angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    RotationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Nearest rotation in the Frobenius sense (polar decomposition).
pub fn project_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fixed = u;
        u_fixed.column_mut(2).neg_mut();
        r = u_fixed * v_t;
    }
    r
}

/// Exponential map `exp([θ]×)` via Rodrigues' formula.
pub fn exp_so3(theta: &Vector3<f64>) -> Matrix3<f64> {
    let angle = theta.norm();
    let k = skew(theta);
    if angle < 1e-8 {
        // second-order Taylor expansion
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = angle.sin() / angle;
    let b = (1.0 - angle.cos()) / (angle * angle);
    Matrix3::identity() + a * k + b * k * k
}

/// Advances `R` over `dt` with a constant body rate: `R · exp([ω dt]×)`,
/// followed by re-orthonormalization.
pub fn integrate_rotation(r: &RotationMatrix, omega_b: &Vector3<f64>, dt: f64) -> RotationMatrix {
    let step = exp_so3(&(omega_b * dt));
    RotationMatrix(project_to_so3(&(r.0 * step)))
}

/// Literal explicit-Euler update `R + dt R[ω]×` projected back to SO(3).
pub fn integrate_rotation_euler(
    r: &RotationMatrix,
    omega_b: &Vector3<f64>,
    dt: f64,
) -> RotationMatrix {
    let raw = r.0 + dt * r.0 * skew(omega_b);
    RotationMatrix(project_to_so3(&raw))
}

/// Canonical leg ordering: left-front, right-front, left-hind, right-hind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leg {
    LF,
    RF,
    LH,
    RH,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::LF, Leg::RF, Leg::LH, Leg::RH];

    pub fn index(self) -> usize {
        match self {
            Leg::LF => 0,
            Leg::RF => 1,
            Leg::LH => 2,
            Leg::RH => 3,
        }
    }

    pub fn is_front(self) -> bool {
        matches!(self, Leg::LF | Leg::RF)
    }

    pub fn name(self) -> &'static str {
        match self {
            Leg::LF => "LF",
            Leg::RF => "RF",
            Leg::LH => "LH",
            Leg::RH => "RH",
        }
    }
}

/// Body-frame hip position `l_h^b` of one leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegMount {
    pub leg: Leg,
    pub offset: Vector3<f64>,
}

impl LegMount {
    /// Symmetric mounts at `[±half_length, ±half_width, 0]`.
    pub fn symmetric(half_length: f64, half_width: f64) -> [LegMount; 4] {
        Leg::ALL.map(|leg| {
            let sx = if leg.is_front() { 1.0 } else { -1.0 };
            let sy = if matches!(leg, Leg::LF | Leg::LH) { 1.0 } else { -1.0 };
            LegMount {
                leg,
                offset: Vector3::new(sx * half_length, sy * half_width, 0.0),
            }
        })
    }
}

/// Joint positions and rates of one leg.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegJointState {
    /// Hip rotation about the body y-axis [rad].
    pub phi: f64,
    /// Hip rotation about the body x-axis [rad].
    pub gamma: f64,
    /// Prismatic length [m].
    pub r: f64,
    pub phi_dot: f64,
    pub gamma_dot: f64,
    pub r_dot: f64,
}

impl LegJointState {
    pub fn at_rest(phi: f64, gamma: f64, r: f64) -> Self {
        Self {
            phi,
            gamma,
            r,
            ..Default::default()
        }
    }

    pub fn positions(&self) -> Vector3<f64> {
        Vector3::new(self.phi, self.gamma, self.r)
    }

    pub fn rates(&self) -> Vector3<f64> {
        Vector3::new(self.phi_dot, self.gamma_dot, self.r_dot)
    }
}

/// Hip-to-foot vector in the body frame, `R_y(φ) R_x(γ) [0, 0, -r]ᵀ`.
pub fn leg_vector(phi: f64, gamma: f64, r: f64) -> Vector3<f64> {
    let (sp, cp) = phi.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    Vector3::new(-sp * r * cg, r * sg, -cp * r * cg)
}

/// `∂ l_f^b / ∂(φ, γ, r)` in the body frame.
pub fn leg_vector_jacobian(phi: f64, gamma: f64, r: f64) -> Matrix3<f64> {
    let (sp, cp) = phi.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    Matrix3::new(
        -cp * r * cg,
        sp * r * sg,
        -sp * cg,
        0.0,
        r * cg,
        sg,
        sp * r * cg,
        cp * r * sg,
        -cp * cg,
    )
}

/// Closed-form inverse of [`leg_vector`]. Returns `None` for a degenerate
/// (zero-length) target.
pub fn leg_inverse_kinematics(l_f: &Vector3<f64>) -> Option<(f64, f64, f64)> {
    let r = l_f.norm();
    if r < 1e-12 {
        return None;
    }
    let gamma = (l_f.y / r).clamp(-1.0, 1.0).asin();
    let phi = (-l_f.x).atan2(-l_f.z);
    Some((phi, gamma, r))
}

/// World-frame foot position `p_b + R_b l_h^b + R_b l_f^b`.
pub fn foot_position(
    p_b: &Vector3<f64>,
    r_b: &RotationMatrix,
    mount: &LegMount,
    joints: &LegJointState,
) -> Vector3<f64> {
    p_b + r_b.0 * (mount.offset + leg_vector(joints.phi, joints.gamma, joints.r))
}

/// World-frame foot velocity: the time derivative of [`foot_position`],
/// `ṗ_b + R_b(ω_b × l) + R_b J_leg q̇`.
pub fn foot_velocity(
    dp_b: &Vector3<f64>,
    r_b: &RotationMatrix,
    omega_b: &Vector3<f64>,
    mount: &LegMount,
    joints: &LegJointState,
) -> Vector3<f64> {
    let l = mount.offset + leg_vector(joints.phi, joints.gamma, joints.r);
    let joint_part = leg_vector_jacobian(joints.phi, joints.gamma, joints.r) * joints.rates();
    dp_b + r_b.0 * (omega_b.cross(&l) + joint_part)
}

/// `∂ṗ_f / ∂v` with `v = [ṗ_b; ω_b]`: `[I₃, -R_b [l]×]`.
///
/// Its transpose maps a world-frame foot force onto the generalized force
/// `[f; l × (R_bᵀ f)]` acting on the body.
pub fn contact_map_body(
    r_b: &RotationMatrix,
    mount: &LegMount,
    joints: &LegJointState,
) -> Matrix3x6<f64> {
    let l = mount.offset + leg_vector(joints.phi, joints.gamma, joints.r);
    let mut out = Matrix3x6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r_b.0 * skew(&l)));
    out
}

/// World-frame leg Jacobian `∂p_f / ∂(φ, γ, r)`.
pub fn leg_jacobian_world(r_b: &RotationMatrix, joints: &LegJointState) -> Matrix3<f64> {
    r_b.0 * leg_vector_jacobian(joints.phi, joints.gamma, joints.r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn origin_mount() -> LegMount {
        LegMount {
            leg: Leg::LF,
            offset: Vector3::zeros(),
        }
    }

    #[test]
    fn skew_matches_definition() {
        let s = skew(&Vector3::new(1.0, 2.0, 3.0));
        let expected = Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(s, expected);
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let v = Vector3::new(0.3, -1.1, 2.0);
        assert_eq!(skew(&v) * v, Vector3::zeros());
        assert_eq!(s.transpose(), -s);
    }

    #[test]
    fn elementary_rotations() {
        assert_eq!(rot_x(0.0), RotationMatrix::identity());
        let v = rot_y(FRAC_PI_2) * Vector3::new(0.0, 0.0, -1.0);
        assert_relative_eq!(v, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
        let p = rot_x(0.7) * rot_x(-0.7);
        assert_relative_eq!(*p.matrix(), Matrix3::identity(), epsilon = 1e-15);
        for a in [-2.0, 0.3, 1.4] {
            for r in [rot_x(a), rot_y(a), rot_z(a)] {
                assert!(r.orthonormality_error() < 1e-14);
                assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn foot_position_hand_cases() {
        let p0 = Vector3::zeros();
        let id = RotationMatrix::identity();
        let m = origin_mount();
        let straight = foot_position(&p0, &id, &m, &LegJointState::at_rest(0.0, 0.0, 0.5));
        assert_relative_eq!(straight, Vector3::new(0.0, 0.0, -0.5));
        let swung = foot_position(&p0, &id, &m, &LegJointState::at_rest(FRAC_PI_2, 0.0, 0.3));
        assert_relative_eq!(swung, Vector3::new(-0.3, 0.0, 0.0), epsilon = 1e-15);
        let side = foot_position(&p0, &id, &m, &LegJointState::at_rest(0.0, FRAC_PI_2, 0.3));
        assert_relative_eq!(side, Vector3::new(0.0, 0.3, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn foot_velocity_simple_cases() {
        let id = RotationMatrix::identity();
        let m = origin_mount();
        let j = LegJointState::at_rest(0.2, -0.1, 0.4);
        let zero = Vector3::zeros();
        assert_eq!(foot_velocity(&zero, &id, &zero, &m, &j), Vector3::zeros());
        let v = foot_velocity(&Vector3::new(1.0, 0.0, 0.0), &id, &zero, &m, &j);
        assert_relative_eq!(v, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn contact_map_translation_block_is_identity() {
        let r = rot_z(0.4) * rot_y(-0.2);
        let m = LegMount {
            leg: Leg::RH,
            offset: Vector3::new(-0.15, -0.1, 0.0),
        };
        let j = LegJointState::at_rest(0.1, 0.2, 0.35);
        let b = contact_map_body(&r, &m, &j);
        assert_eq!(b.fixed_view::<3, 3>(0, 0).into_owned(), Matrix3::identity());
        let l = m.offset + leg_vector(0.1, 0.2, 0.35);
        assert_relative_eq!(
            b.fixed_view::<3, 3>(0, 3).into_owned(),
            -r.matrix() * skew(&l),
            epsilon = 1e-15
        );
    }

    #[test]
    fn z_spin_exponential() {
        let r = integrate_rotation(
            &RotationMatrix::identity(),
            &Vector3::new(0.0, 0.0, FRAC_PI_2),
            1.0,
        );
        assert_relative_eq!(*r.matrix(), *rot_z(FRAC_PI_2).matrix(), epsilon = 1e-14);
        let r0 = rot_x(0.3) * rot_y(0.2);
        let same = integrate_rotation(&r0, &Vector3::zeros(), 0.1);
        assert_relative_eq!(*same.matrix(), *r0.matrix(), epsilon = 1e-14);
    }

    #[test]
    fn leg_ik_round_trip() {
        for &(phi, gamma, r) in &[(0.0, 0.0, 0.3), (0.4, -0.2, 0.45), (-1.0, 0.6, 0.2)] {
            let l = leg_vector(phi, gamma, r);
            let (p2, g2, r2) = leg_inverse_kinematics(&l).unwrap();
            assert_relative_eq!(p2, phi, epsilon = 1e-12);
            assert_relative_eq!(g2, gamma, epsilon = 1e-12);
            assert_relative_eq!(r2, r, epsilon = 1e-12);
        }
        assert!(leg_inverse_kinematics(&Vector3::zeros()).is_none());
    }

    #[test]
    fn projection_recovers_rotation() {
        let r = rot_z(0.3) * rot_x(-0.8);
        let noisy = r.matrix() + Matrix3::from_element(1e-4);
        let p = RotationMatrix::from_matrix_projected(noisy);
        assert!(p.orthonormality_error() < 1e-14);
        assert!((p.matrix() - r.matrix()).norm() < 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn exp_stays_on_so3(x in -10.0..10.0f64, y in -10.0..10.0f64, z in -10.0..10.0f64) {
            let r = RotationMatrix::from_matrix_unchecked(exp_so3(&Vector3::new(x, y, z)));
            proptest::prop_assert!(r.orthonormality_error() < 1e-12);
            proptest::prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn leg_ik_inverts_fk(phi in -1.2..1.2f64, gamma in -1.2..1.2f64, r in 0.05..0.5f64) {
            let (p, g, l) = leg_inverse_kinematics(&leg_vector(phi, gamma, r)).unwrap();
            proptest::prop_assert!((p - phi).abs() < 1e-9 && (g - gamma).abs() < 1e-9 && (l - r).abs() < 1e-9);
        }
    }
}
