//! Compliant ground contact with Stribeck friction on an inclined plane.
//!
//! In the slope frame (third axis = outward plane normal), a foot that has
//! penetrated the plane (`p_z ≤ 0`) receives
//!
//! ```text
//! u_z = -k1 p_z - k2 ṗ_z                       (clamped at 0, no adhesion)
//! u_j = -s_j u_z sgn(ṗ_j) - μ_v ṗ_j,  j = x, y
//! s_j = μ_c - (μ_c - μ_s) exp(-ṗ_j² / v_s²)
//! ```

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotParams;
use crate::so3::{rot_y, RotationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactParams {
    /// Normal stiffness [N/m].
    pub k1: f64,
    /// Normal damping [N/(m/s)].
    pub k2: f64,
    /// Coulomb (dynamic) friction coefficient.
    pub mu_c: f64,
    /// Static friction coefficient.
    pub mu_s: f64,
    /// Viscous friction coefficient [N/(m/s)].
    pub mu_v: f64,
    /// Stribeck velocity [m/s].
    pub v_s: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            k1: 100.0,
            k2: 1.0e3,
            mu_c: 1.0,
            mu_s: 1.8,
            mu_v: 0.1,
            v_s: 0.05,
        }
    }
}

impl ContactParams {
    /// Defaults with a stiffer ground, giving millimetre-scale static
    /// penetration under the robot's weight.
    pub fn stiff() -> Self {
        Self {
            k1: 1.0e4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.k1 >= 0.0
            && self.k2 >= 0.0
            && self.v_s > 0.0
            && self.mu_c >= 0.0
            && self.mu_s >= self.mu_c
            && self.mu_v >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidParameter(format!(
                "contact parameters out of range: {self:?}"
            )))
        }
    }
}

/// Flat inclined plane rising along the world `+x` direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePlane {
    /// Inclination about the world y-axis [rad], in `[0, π/2)`.
    pub angle: f64,
    pub origin: Vector3<f64>,
}

impl SlopePlane {
    pub fn new(angle: f64) -> Self {
        Self {
            angle,
            origin: Vector3::zeros(),
        }
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn normal(&self) -> Vector3<f64> {
        Vector3::new(-self.angle.sin(), 0.0, self.angle.cos())
    }

    /// Unit vector pointing up the slope.
    pub fn uphill(&self) -> Vector3<f64> {
        Vector3::new(self.angle.cos(), 0.0, self.angle.sin())
    }

    /// Signed distance of `p` above the plane.
    pub fn height(&self, p: &Vector3<f64>) -> f64 {
        self.normal().dot(&(p - self.origin))
    }

    /// Distance travelled up the slope from the plane origin.
    pub fn progress(&self, p: &Vector3<f64>) -> f64 {
        self.uphill().dot(&(p - self.origin))
    }

    /// World point at slope coordinates `(along, lateral, height)`.
    pub fn point(&self, slope_coords: &Vector3<f64>) -> Vector3<f64> {
        self.origin + slope_frame(self) * *slope_coords
    }
}

/// Rotation whose columns are `[uphill, lateral, normal]`; identity on flat
/// ground.
pub fn slope_frame(plane: &SlopePlane) -> RotationMatrix {
    rot_y(-plane.angle)
}

/// How the per-axis `sgn(ṗ_j)` of the friction law is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum FrictionSign {
    /// Discontinuous sign with `sgn(0) = 0`.
    #[default]
    Exact,
    /// `tanh(ṗ_j / eps)`.
    Smooth { eps: f64 },
}

impl FrictionSign {
    fn eval(self, v: f64) -> f64 {
        match self {
            FrictionSign::Exact => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            FrictionSign::Smooth { eps } => (v / eps).tanh(),
        }
    }
}

/// Stribeck coefficient `s = μ_c - (μ_c - μ_s) exp(-v² / v_s²)`.
pub fn stribeck_coefficient(speed: f64, params: &ContactParams) -> f64 {
    params.mu_c - (params.mu_c - params.mu_s) * (-(speed * speed) / (params.v_s * params.v_s)).exp()
}

/// Contact force in the slope frame from a slope-frame foot position and
/// velocity.
pub fn contact_force_local(
    p: &Vector3<f64>,
    v: &Vector3<f64>,
    params: &ContactParams,
    sign: FrictionSign,
) -> Vector3<f64> {
    if p.z > 0.0 {
        return Vector3::zeros();
    }
    let normal = (-params.k1 * p.z - params.k2 * v.z).max(0.0);
    let tangential = |vj: f64| {
        -stribeck_coefficient(vj, params) * normal * sign.eval(vj) - params.mu_v * vj
    };
    Vector3::new(tangential(v.x), tangential(v.y), normal)
}

/// World-frame ground reaction force on a foot.
pub fn contact_force(
    foot_pos: &Vector3<f64>,
    foot_vel: &Vector3<f64>,
    plane: &SlopePlane,
    params: &ContactParams,
    sign: FrictionSign,
) -> Vector3<f64> {
    let frame = slope_frame(plane);
    let rt = frame.matrix().transpose();
    let p = rt * (foot_pos - plane.origin);
    let v = rt * foot_vel;
    frame.matrix() * contact_force_local(&p, &v, params, sign)
}

/// Friction-cone margin `μ u_z - ‖u_t‖` of a slope-frame force. Non-negative
/// means inside the cone; any negative normal force yields a negative value.
pub fn friction_cone_margin(u_local: &Vector3<f64>, mu: f64) -> f64 {
    let tangential = u_local.x.hypot(u_local.y);
    let margin = mu * u_local.z - tangential;
    if u_local.z < 0.0 {
        margin.min(u_local.z)
    } else {
        margin
    }
}

/// Outcome of the quasi-static slope balance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticFeasibility {
    pub feasible: bool,
    /// `μ N - T` of the total support force [N]; `+∞` when no support is
    /// needed.
    pub margin: f64,
    /// Required tangential-to-normal ratio `T / N`.
    pub required_ratio: f64,
    pub normal: f64,
    pub tangential: f64,
}

/// Checks whether the feet can statically balance gravity and a constant
/// world-frame thrust on a slope without leaving the friction cone.
pub fn static_stance_feasibility(
    slope_angle: f64,
    mu: f64,
    thrust: &Vector3<f64>,
    params: &RobotParams,
) -> StaticFeasibility {
    assert!(mu > 0.0, "friction coefficient must be positive");
    let plane = SlopePlane::new(slope_angle);
    let support = -(params.m * params.gravity() + thrust);
    let scale = params.weight().max(1.0);
    if support.norm() <= 1e-12 * scale {
        return StaticFeasibility {
            feasible: true,
            margin: f64::INFINITY,
            required_ratio: 0.0,
            normal: 0.0,
            tangential: 0.0,
        };
    }
    let local = slope_frame(&plane).matrix().transpose() * support;
    let normal = local.z;
    let mut tangential = local.x.hypot(local.y);
    if tangential <= 1e-12 * scale {
        tangential = 0.0;
    }
    let required_ratio = if normal > 0.0 {
        tangential / normal
    } else {
        f64::INFINITY
    };
    StaticFeasibility {
        feasible: normal > 0.0 && required_ratio <= mu,
        margin: mu * normal - tangential,
        required_ratio,
        normal,
        tangential,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn slope_frame_cases() {
        assert_eq!(slope_frame(&SlopePlane::new(0.0)), RotationMatrix::identity());
        let p = SlopePlane::new(FRAC_PI_4);
        let n = slope_frame(&p).matrix().column(2).into_owned();
        let s = FRAC_PI_4.sin();
        assert_relative_eq!(n, Vector3::new(-s, 0.0, s), epsilon = 1e-15);
        assert_relative_eq!(n, p.normal(), epsilon = 1e-15);
        assert!(slope_frame(&p).orthonormality_error() < 1e-15);
        assert_relative_eq!(slope_frame(&p).matrix().column(0).into_owned(), p.uphill(), epsilon = 1e-15);
    }

    #[test]
    fn no_force_above_ground() {
        let f = contact_force(
            &Vector3::new(0.3, 0.1, 0.01),
            &Vector3::new(1.0, -2.0, -3.0),
            &SlopePlane::new(0.0),
            &ContactParams::default(),
            FrictionSign::Exact,
        );
        assert_eq!(f, Vector3::zeros());
    }

    #[test]
    fn static_penetration_on_flat_ground() {
        let f = contact_force(
            &Vector3::new(0.0, 0.0, -0.01),
            &Vector3::zeros(),
            &SlopePlane::new(0.0),
            &ContactParams::default(),
            FrictionSign::Exact,
        );
        assert_relative_eq!(f, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn stribeck_endpoints() {
        let c = ContactParams::default();
        assert_eq!(stribeck_coefficient(0.0, &c), 1.8);
        let expected = 1.0 - (1.0 - 1.8) * (-1.0f64).exp();
        assert_relative_eq!(stribeck_coefficient(c.v_s, &c), expected, epsilon = 1e-15);
        assert!((stribeck_coefficient(10.0 * c.v_s, &c) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn damper_cannot_pull() {
        // separating quickly while still penetrated
        let f = contact_force_local(
            &Vector3::new(0.0, 0.0, -1e-3),
            &Vector3::new(0.5, 0.0, 1.0),
            &ContactParams::stiff(),
            FrictionSign::Exact,
        );
        assert_eq!(f.z, 0.0);
        assert_relative_eq!(f.x, -0.1 * 0.5);
    }

    #[test]
    fn cone_margin_cases() {
        assert_eq!(friction_cone_margin(&Vector3::new(0.0, 0.0, 10.0), 1.0), 10.0);
        assert_relative_eq!(friction_cone_margin(&Vector3::new(8.0, 0.0, 10.0), 0.7), -1.0, epsilon = 1e-12);
        assert_eq!(friction_cone_margin(&Vector3::new(3.0, 4.0, 5.0), 1.0), 0.0);
        assert!(friction_cone_margin(&Vector3::new(0.0, 0.0, -1.0), 1.0) < 0.0);
    }

    #[test]
    fn static_feasibility_cases() {
        let p = RobotParams::default();
        let flat = static_stance_feasibility(0.0, 1.0, &Vector3::zeros(), &p);
        assert!(flat.feasible);
        assert_eq!(flat.required_ratio, 0.0);

        let steep = static_stance_feasibility(FRAC_PI_4, 0.8, &Vector3::zeros(), &p);
        assert!(!steep.feasible);
        assert_relative_eq!(steep.required_ratio, 1.0, epsilon = 1e-12);

        let plane = SlopePlane::new(FRAC_PI_4);
        let thrust = plane.uphill() * p.m * 9.81 * FRAC_PI_4.sin();
        let assisted = static_stance_feasibility(FRAC_PI_4, 0.8, &thrust, &p);
        assert!(assisted.feasible);
        assert_eq!(assisted.required_ratio, 0.0);

        let hover = static_stance_feasibility(0.3, 0.5, &Vector3::new(0.0, 0.0, p.m * 9.81), &p);
        assert!(hover.feasible);
        assert!(hover.margin.is_infinite());
    }

    proptest::proptest! {
        #[test]
        fn ground_never_pulls(
            z in -0.01..0.01f64,
            vx in -2.0..2.0f64,
            vy in -2.0..2.0f64,
            vz in -2.0..2.0f64,
        ) {
            let f = contact_force_local(
                &Vector3::new(0.0, 0.0, z),
                &Vector3::new(vx, vy, vz),
                &ContactParams::stiff(),
                FrictionSign::Smooth { eps: 1e-3 },
            );
            proptest::prop_assert!(f.z >= 0.0);
            if z > 0.0 {
                proptest::prop_assert_eq!(f, Vector3::zeros());
            }
        }

        #[test]
        fn cone_margin_sign_matches_membership(x in -20.0..20.0f64, y in -20.0..20.0f64, z in -20.0..20.0f64, mu in 0.1..1.5f64) {
            let m = friction_cone_margin(&Vector3::new(x, y, z), mu);
            let inside = z >= 0.0 && x.hypot(y) <= mu * z;
            proptest::prop_assert_eq!(m >= 0.0, inside);
        }
    }
}
