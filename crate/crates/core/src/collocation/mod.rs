//! Direct collocation transcription.
//!
//! Inputs are piecewise linear between nodes; states are cubic Hermite
//! interpolants built from node values and node derivatives, so the
//! interpolant derivative matches the dynamics at both ends of every
//! interval by construction. The only remaining defect is evaluated at the
//! interval midpoint:
//!
//! ```text
//! d_j = f(x_int(t_c), u_int(t_c)) − ẋ_int(t_c),   t_c = (t_j + t_{j+1}) / 2
//! ```
//!
//! Decision vector layout: `Y = [x_1 … x_N, u_1 … u_N, t_f]`.

mod wair;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{f_rom_flat, f_rom_jacobian, layout, InputVector, RobotParams, StateVector, INPUT_DIM, STATE_DIM};
use crate::error::{Error, Result};

pub use wair::{BoundaryConditions, WairTranscription};

/// Node times `0 = t_1 < … < t_N = t_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    times: Vec<f64>,
}

impl CollocationGrid {
    pub fn uniform(t_f: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {nodes}")));
        }
        if !(t_f > 0.0) || !t_f.is_finite() {
            return Err(Error::InvalidParameter(format!("t_f must be positive, got {t_f}")));
        }
        let times = (0..nodes)
            .map(|k| t_f * k as f64 / (nodes - 1) as f64)
            .collect();
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidParameter("need at least 2 nodes".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("node times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self, j: usize) -> f64 {
        self.times[j + 1] - self.times[j]
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        0.5 * (self.times[j] + self.times[j + 1])
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.intervals()).map(|j| self.midpoint(j)).collect()
    }

    /// Containing interval and normalized position `s ∈ [0, 1]`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let (t0, t1) = (self.t_start(), self.t_final());
        if !(t >= t0 && t <= t1) {
            return Err(Error::OutOfRange { t, start: t0, end: t1 });
        }
        let j = match self.times.binary_search_by(|probe| probe.total_cmp(&t)) {
            Ok(k) => k.min(self.intervals() - 1),
            Err(k) => k - 1,
        };
        Ok((j, (t - self.times[j]) / self.step(j)))
    }
}

/// Offsets of each node block inside `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionLayout {
    pub nodes: usize,
    pub state_dim: usize,
    pub input_dim: usize,
}

impl DecisionLayout {
    pub fn new(nodes: usize, state_dim: usize, input_dim: usize) -> Self {
        Self {
            nodes,
            state_dim,
            input_dim,
        }
    }

    pub fn hrom(nodes: usize) -> Self {
        Self::new(nodes, STATE_DIM, INPUT_DIM)
    }

    pub fn state_offset(&self, k: usize) -> usize {
        k * self.state_dim
    }

    pub fn input_offset(&self, k: usize) -> usize {
        self.nodes * self.state_dim + k * self.input_dim
    }

    pub fn tf_index(&self) -> usize {
        self.nodes * (self.state_dim + self.input_dim)
    }

    pub fn len(&self) -> usize {
        self.tf_index() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state<'a>(&self, y: &'a DVector<f64>, k: usize) -> &'a [f64] {
        let o = self.state_offset(k);
        &y.as_slice()[o..o + self.state_dim]
    }

    pub fn input<'a>(&self, y: &'a DVector<f64>, k: usize) -> &'a [f64] {
        let o = self.input_offset(k);
        &y.as_slice()[o..o + self.input_dim]
    }
}

/// Unpacked decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub t_f: f64,
}

impl DecisionVector {
    pub fn layout(&self) -> DecisionLayout {
        DecisionLayout::new(
            self.states.len(),
            self.states.first().map_or(0, |x| x.len()),
            self.inputs.first().map_or(0, |u| u.len()),
        )
    }

    pub fn pack(&self) -> Result<DVector<f64>> {
        let l = self.layout();
        if self.inputs.len() != l.nodes
            || self.states.iter().any(|x| x.len() != l.state_dim)
            || self.inputs.iter().any(|u| u.len() != l.input_dim)
        {
            return Err(Error::Dimension("ragged node blocks".into()));
        }
        let mut y = DVector::zeros(l.len());
        for k in 0..l.nodes {
            y.rows_mut(l.state_offset(k), l.state_dim).copy_from(&self.states[k]);
            y.rows_mut(l.input_offset(k), l.input_dim).copy_from(&self.inputs[k]);
        }
        y[l.tf_index()] = self.t_f;
        Ok(y)
    }

    pub fn unpack(layout: &DecisionLayout, y: &DVector<f64>) -> Result<Self> {
        if y.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "decision vector has {} entries, layout expects {}",
                y.len(),
                layout.len()
            )));
        }
        Ok(Self {
            states: (0..layout.nodes)
                .map(|k| DVector::from_column_slice(layout.state(y, k)))
                .collect(),
            inputs: (0..layout.nodes)
                .map(|k| DVector::from_column_slice(layout.input(y, k)))
                .collect(),
            t_f: y[layout.tf_index()],
        })
    }
}

/// Grouped diagonal weights of the tracking cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    /// Joint positions, body orientation entries and body position.
    #[serde(rename = "Q_pose")]
    pub q_pose: f64,
    /// Joint rates, body angular and linear velocity.
    #[serde(rename = "Q_rate")]
    pub q_rate: f64,
    #[serde(rename = "R_uL")]
    pub r_ul: f64,
    #[serde(rename = "R_ug")]
    pub r_ug: f64,
    #[serde(rename = "R_uT")]
    pub r_ut: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            q_pose: 10.0,
            q_rate: 1.0,
            r_ul: 1e-3,
            r_ug: 1e-4,
            r_ut: 1e-3,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.q_pose, self.q_rate, self.r_ul, self.r_ug, self.r_ut];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("cost weights must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn q_diagonal(&self) -> DVector<f64> {
        let mut q = DVector::from_element(STATE_DIM, self.q_rate);
        for (start, len) in [(layout::Q_L, 12), (layout::R_B, 9), (layout::P_B, 3)] {
            q.rows_mut(start, len).fill(self.q_pose);
        }
        q
    }

    pub fn r_diagonal(&self) -> DVector<f64> {
        let mut r = DVector::zeros(INPUT_DIM);
        r.rows_mut(layout::U_L, 12).fill(self.r_ul);
        r.rows_mut(layout::U_G, 12).fill(self.r_ug);
        r.rows_mut(layout::U_T, 3).fill(self.r_ut);
        r
    }
}

/// Cubic `x_int(t_j + s h) = Σ c_k s^k` on one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSegment {
    pub c: [DVector<f64>; 4],
    pub h: f64,
}

pub fn hermite_segment(
    x_j: &DVector<f64>,
    x_j1: &DVector<f64>,
    f_j: &DVector<f64>,
    f_j1: &DVector<f64>,
    h: f64,
) -> HermiteSegment {
    debug_assert!(h > 0.0);
    let c0 = x_j.clone();
    let c1 = h * f_j;
    let c2 = -3.0 * x_j - 2.0 * h * f_j + 3.0 * x_j1 - h * f_j1;
    let c3 = 2.0 * x_j + h * f_j - 2.0 * x_j1 + h * f_j1;
    HermiteSegment {
        c: [c0, c1, c2, c3],
        h,
    }
}

pub fn segment_eval(seg: &HermiteSegment, s: f64) -> DVector<f64> {
    let [c0, c1, c2, c3] = &seg.c;
    c0 + s * (c1 + s * (c2 + s * c3))
}

/// `d/dt x_int`, i.e. the `s`-derivative divided by `h`.
pub fn segment_deriv(seg: &HermiteSegment, s: f64) -> DVector<f64> {
    let [_, c1, c2, c3] = &seg.c;
    (c1 + s * (2.0 * c2 + 3.0 * s * c3)) / seg.h
}

/// Piecewise-linear input at time `t`.
pub fn input_interpolant(inputs: &[DVector<f64>], grid: &CollocationGrid, t: f64) -> Result<DVector<f64>> {
    if inputs.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "{} inputs for {} nodes",
            inputs.len(),
            grid.len()
        )));
    }
    let (k, s) = grid.locate(t)?;
    if s == 0.0 {
        return Ok(inputs[k].clone());
    }
    if s == 1.0 {
        return Ok(inputs[k + 1].clone());
    }
    Ok(&inputs[k] + s * (&inputs[k + 1] - &inputs[k]))
}

/// Continuous-time dynamics `ẋ = f(x, u)`.
pub trait Dynamics: Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn eval(&self, x: &[f64], u: &[f64]) -> DVector<f64>;

    /// Indices into `[x; u]` on which `f` depends nonlinearly. Second
    /// derivatives involving any other entry are taken to be zero.
    fn curvature_variables(&self) -> Vec<usize> {
        (0..self.state_dim() + self.input_dim()).collect()
    }

    /// Exact `(∂f/∂x, ∂f/∂u)`, when available; finite differences are used
    /// otherwise.
    fn jacobian(&self, _x: &[f64], _u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }
}

/// The reduced-order quadruped model on flattened vectors.
#[derive(Debug, Clone)]
pub struct HromDynamics {
    pub params: RobotParams,
}

impl Dynamics for HromDynamics {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn input_dim(&self) -> usize {
        INPUT_DIM
    }

    fn eval(&self, x: &[f64], u: &[f64]) -> DVector<f64> {
        let x = StateVector::from_column_slice(x);
        let u = InputVector::from_column_slice(u);
        DVector::from_column_slice(f_rom_flat(&x, &u, &self.params).as_slice())
    }

    fn jacobian(&self, x: &[f64], u: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let x = StateVector::from_column_slice(x);
        let u = InputVector::from_column_slice(u);
        let (a, b) = f_rom_jacobian(&x, &u, &self.params);
        Some((
            DMatrix::from_column_slice(STATE_DIM, STATE_DIM, a.as_slice()),
            DMatrix::from_column_slice(STATE_DIM, INPUT_DIM, b.as_slice()),
        ))
    }

    /// Joint angles, the rotation block, `ω_b` and the GRFs; the flow is
    /// affine in everything else.
    fn curvature_variables(&self) -> Vec<usize> {
        let g = STATE_DIM + layout::U_G;
        (layout::Q_L..layout::Q_L + 12)
            .chain(layout::R_B..layout::R_B + 9)
            .chain(layout::OMEGA_B..layout::OMEGA_B + 3)
            .chain(g..g + 12)
            .collect()
    }
}

/// Finite-difference scheme for Jacobians; the perturbation of entry `v` is
/// `1e-6 (1 + |v|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    #[default]
    Forward,
    Central,
}

pub(crate) fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

/// `(∂f/∂x, ∂f/∂u)` at one point: [`Dynamics::jacobian`] if it has one,
/// finite differences otherwise.
pub fn dynamics_jacobian(
    dynamics: &dyn Dynamics,
    x: &[f64],
    u: &[f64],
    scheme: FdScheme,
) -> (DMatrix<f64>, DMatrix<f64>) {
    if let Some(jac) = dynamics.jacobian(x, u) {
        return jac;
    }
    let nx = x.len();
    let nu = u.len();
    let base = match scheme {
        FdScheme::Forward => Some(dynamics.eval(x, u)),
        FdScheme::Central => None,
    };
    let mut z: Vec<f64> = x.iter().chain(u).copied().collect();
    let mut jac = DMatrix::zeros(nx, nx + nu);
    for c in 0..nx + nu {
        let orig = z[c];
        let h = fd_step(orig);
        z[c] = orig + h;
        let plus = dynamics.eval(&z[..nx], &z[nx..]);
        let col = match &base {
            Some(f0) => (plus - f0) / h,
            None => {
                z[c] = orig - h;
                let minus = dynamics.eval(&z[..nx], &z[nx..]);
                (plus - minus) / (2.0 * h)
            }
        };
        z[c] = orig;
        jac.set_column(c, &col);
    }
    let a = jac.columns(0, nx).into_owned();
    let b = jac.columns(nx, nu).into_owned();
    (a, b)
}

struct IntervalData {
    x_mid: DVector<f64>,
    u_mid: DVector<f64>,
    xdot_mid: DVector<f64>,
}

fn interval_midpoint(
    x_j: &DVector<f64>,
    x_j1: &DVector<f64>,
    u_j: &[f64],
    u_j1: &[f64],
    f_j: &DVector<f64>,
    f_j1: &DVector<f64>,
    h: f64,
) -> IntervalData {
    let seg = hermite_segment(x_j, x_j1, f_j, f_j1, h);
    IntervalData {
        x_mid: segment_eval(&seg, 0.5),
        u_mid: DVector::from_iterator(u_j.len(), u_j.iter().zip(u_j1).map(|(a, b)| 0.5 * (a + b))),
        xdot_mid: segment_deriv(&seg, 0.5),
    }
}

fn node_derivatives(y: &DVector<f64>, layout: &DecisionLayout, dynamics: &dyn Dynamics) -> Vec<DVector<f64>> {
    (0..layout.nodes)
        .map(|k| dynamics.eval(layout.state(y, k), layout.input(y, k)))
        .collect()
}

/// Midpoint defects, one `state_dim` block per interval.
pub fn defect_constraints(
    y: &DVector<f64>,
    layout: &DecisionLayout,
    grid: &CollocationGrid,
    dynamics: &dyn Dynamics,
) -> DVector<f64> {
    assert_eq!(layout.nodes, grid.len());
    let nx = layout.state_dim;
    let f = node_derivatives(y, layout, dynamics);
    let mut out = DVector::zeros(grid.intervals() * nx);
    for j in 0..grid.intervals() {
        let x_j = DVector::from_column_slice(layout.state(y, j));
        let x_j1 = DVector::from_column_slice(layout.state(y, j + 1));
        let mid = interval_midpoint(
            &x_j,
            &x_j1,
            layout.input(y, j),
            layout.input(y, j + 1),
            &f[j],
            &f[j + 1],
            grid.step(j),
        );
        let d = dynamics.eval(mid.x_mid.as_slice(), mid.u_mid.as_slice()) - mid.xdot_mid;
        out.rows_mut(j * nx, nx).copy_from(&d);
    }
    out
}

/// Jacobian of [`defect_constraints`] as `(row, col, value)` triplets.
///
/// Node and midpoint dynamics Jacobians come from finite differences; the
/// Hermite midpoint map is differentiated exactly, so each interval's rows
/// touch only the states and inputs of its two nodes. Every entry of those
/// blocks is emitted, which keeps the sparsity pattern independent of `Y`.
pub fn defect_jacobian_triplets(
    y: &DVector<f64>,
    layout: &DecisionLayout,
    grid: &CollocationGrid,
    dynamics: &dyn Dynamics,
    scheme: FdScheme,
    row_offset: usize,
    out: &mut Vec<(usize, usize, f64)>,
) {
    let nx = layout.state_dim;
    let nu = layout.input_dim;
    let f = node_derivatives(y, layout, dynamics);
    let node_jac: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..layout.nodes)
        .map(|k| dynamics_jacobian(dynamics, layout.state(y, k), layout.input(y, k), scheme))
        .collect();
    let eye = DMatrix::<f64>::identity(nx, nx);
    for j in 0..grid.intervals() {
        let h = grid.step(j);
        let x_j = DVector::from_column_slice(layout.state(y, j));
        let x_j1 = DVector::from_column_slice(layout.state(y, j + 1));
        let mid = interval_midpoint(
            &x_j,
            &x_j1,
            layout.input(y, j),
            layout.input(y, j + 1),
            &f[j],
            &f[j + 1],
            h,
        );
        let (a_m, b_m) = dynamics_jacobian(dynamics, mid.x_mid.as_slice(), mid.u_mid.as_slice(), scheme);
        let (a_j, b_j) = &node_jac[j];
        let (a_j1, b_j1) = &node_jac[j + 1];

        let dx_j = &a_m * (0.5 * &eye + (h / 8.0) * a_j) + (1.5 / h) * &eye + 0.25 * a_j;
        let du_j = (h / 8.0) * (&a_m * b_j) + 0.5 * &b_m + 0.25 * b_j;
        let dx_j1 = &a_m * (0.5 * &eye - (h / 8.0) * a_j1) - (1.5 / h) * &eye + 0.25 * a_j1;
        let du_j1 = -(h / 8.0) * (&a_m * b_j1) + 0.5 * &b_m + 0.25 * b_j1;

        let r0 = row_offset + j * nx;
        for (block, col0) in [
            (&dx_j, layout.state_offset(j)),
            (&dx_j1, layout.state_offset(j + 1)),
        ] {
            for r in 0..nx {
                for c in 0..nx {
                    out.push((r0 + r, col0 + c, block[(r, c)]));
                }
            }
        }
        for (block, col0) in [
            (&du_j, layout.input_offset(j)),
            (&du_j1, layout.input_offset(j + 1)),
        ] {
            for r in 0..nx {
                for c in 0..nu {
                    out.push((r0 + r, col0 + c, block[(r, c)]));
                }
            }
        }
    }
}

/// `∇²(v · f)` over `[x; u]`, restricted to
/// [`Dynamics::curvature_variables`]. With an exact Jacobian this is a
/// central difference of `Jᵀv` with step `1e-6 (1 + |z|)`; otherwise central
/// second differences of `v · f` with step `1e-4 (1 + |z|)`.
pub fn weighted_dynamics_hessian(dynamics: &dyn Dynamics, x: &[f64], u: &[f64], v: &[f64]) -> DMatrix<f64> {
    let nx = x.len();
    let n = nx + u.len();
    let mut z: Vec<f64> = x.iter().chain(u).copied().collect();
    let vars = dynamics.curvature_variables();
    let mut hess = DMatrix::zeros(n, n);
    let vt = DVector::from_column_slice(v).transpose();

    if dynamics.jacobian(x, u).is_some() {
        let grad = |z: &[f64]| -> DVector<f64> {
            let (a, b) = dynamics.jacobian(&z[..nx], &z[nx..]).expect("checked above");
            DVector::from_iterator(n, (&vt * a).iter().chain((&vt * b).iter()).copied())
        };
        for &i in &vars {
            let zi = z[i];
            let h = 1e-6 * (1.0 + zi.abs());
            z[i] = zi + h;
            let plus = grad(&z);
            z[i] = zi - h;
            let minus = grad(&z);
            z[i] = zi;
            let col = (plus - minus) / (2.0 * h);
            for &j in &vars {
                hess[(j, i)] += 0.5 * col[j];
                hess[(i, j)] += 0.5 * col[j];
            }
        }
        return hess;
    }

    let phi = |z: &[f64]| -> f64 { dynamics.eval(&z[..nx], &z[nx..]).iter().zip(v).map(|(a, b)| a * b).sum() };
    let steps: Vec<f64> = vars.iter().map(|&i| 1e-4 * (1.0 + z[i].abs())).collect();
    let center = phi(&z);
    for (a, &i) in vars.iter().enumerate() {
        let hi = steps[a];
        let zi = z[i];
        z[i] = zi + hi;
        let plus = phi(&z);
        z[i] = zi - hi;
        let minus = phi(&z);
        z[i] = zi;
        hess[(i, i)] = (plus - 2.0 * center + minus) / (hi * hi);
        for (b, &j) in vars.iter().enumerate().take(a) {
            let hj = steps[b];
            let zj = z[j];
            let mut corner = |si: f64, sj: f64| {
                z[i] = zi + si * hi;
                z[j] = zj + sj * hj;
                let value = phi(&z);
                z[i] = zi;
                z[j] = zj;
                value
            };
            let value = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * hi * hj);
            hess[(i, j)] = value;
            hess[(j, i)] = value;
        }
    }
    hess
}

/// `Σ_j w_jᵀ ∇²d_j` as triplets (both triangles), where `w_j` is the
/// block of `w` belonging to interval `j`'s defects.
///
/// The Hermite midpoint map is differentiated exactly and the dynamics
/// Hessians come from [`weighted_dynamics_hessian`]; the dependence of the
/// defects on `t_f` carries no curvature here.
pub fn defect_hessian_triplets(
    y: &DVector<f64>,
    layout: &DecisionLayout,
    grid: &CollocationGrid,
    dynamics: &dyn Dynamics,
    scheme: FdScheme,
    w: &[f64],
    out: &mut Vec<(usize, usize, f64)>,
) {
    let nx = layout.state_dim;
    let nu = layout.input_dim;
    let nz = nx + nu;
    assert_eq!(w.len(), grid.intervals() * nx);
    let f = node_derivatives(y, layout, dynamics);
    let mut node_weights = vec![DVector::<f64>::zeros(nx); layout.nodes];
    let eye = DMatrix::<f64>::identity(nx, nx);
    for j in 0..grid.intervals() {
        let wj = DVector::from_column_slice(&w[j * nx..(j + 1) * nx]);
        if wj.iter().all(|v| *v == 0.0) {
            continue;
        }
        let h = grid.step(j);
        let x_j = DVector::from_column_slice(layout.state(y, j));
        let x_j1 = DVector::from_column_slice(layout.state(y, j + 1));
        let mid = interval_midpoint(
            &x_j,
            &x_j1,
            layout.input(y, j),
            layout.input(y, j + 1),
            &f[j],
            &f[j + 1],
            h,
        );
        let (a_m, _) = dynamics_jacobian(dynamics, mid.x_mid.as_slice(), mid.u_mid.as_slice(), scheme);
        let (a_j, b_j) = dynamics_jacobian(dynamics, layout.state(y, j), layout.input(y, j), scheme);
        let (a_j1, b_j1) = dynamics_jacobian(dynamics, layout.state(y, j + 1), layout.input(y, j + 1), scheme);

        // ∂(x_m, u_m)/∂(x_j, u_j, x_j1, u_j1)
        let mut m = DMatrix::zeros(nz, 2 * nz);
        m.view_mut((0, 0), (nx, nx)).copy_from(&(0.5 * &eye + (h / 8.0) * &a_j));
        m.view_mut((0, nx), (nx, nu)).copy_from(&((h / 8.0) * &b_j));
        m.view_mut((0, nz), (nx, nx)).copy_from(&(0.5 * &eye - (h / 8.0) * &a_j1));
        m.view_mut((0, nz + nx), (nx, nu)).copy_from(&(-(h / 8.0) * &b_j1));
        for i in 0..nu {
            m[(nx + i, nx + i)] = 0.5;
            m[(nx + i, nz + nx + i)] = 0.5;
        }
        let h_mid = weighted_dynamics_hessian(dynamics, mid.x_mid.as_slice(), mid.u_mid.as_slice(), wj.as_slice());
        let block = m.transpose() * h_mid * &m;
        let cols: Vec<usize> = (layout.state_offset(j)..layout.state_offset(j) + nx)
            .chain(layout.input_offset(j)..layout.input_offset(j) + nu)
            .chain(layout.state_offset(j + 1)..layout.state_offset(j + 1) + nx)
            .chain(layout.input_offset(j + 1)..layout.input_offset(j + 1) + nu)
            .collect();
        for (a, &ca) in cols.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate() {
                let v = block[(a, b)];
                if v != 0.0 {
                    out.push((ca, cb, v));
                }
            }
        }
        // curvature of f at the nodes, through f_m's dependence on x_m
        // and through the (f_j + f_j1)/4 term
        let g = (h / 8.0) * a_m.transpose() * &wj;
        node_weights[j] += 0.25 * &wj + &g;
        node_weights[j + 1] += 0.25 * &wj - &g;
    }
    for (k, v) in node_weights.iter().enumerate() {
        if v.iter().all(|e| *e == 0.0) {
            continue;
        }
        let hk = weighted_dynamics_hessian(dynamics, layout.state(y, k), layout.input(y, k), v.as_slice());
        let cols: Vec<usize> = (layout.state_offset(k)..layout.state_offset(k) + nx)
            .chain(layout.input_offset(k)..layout.input_offset(k) + nu)
            .collect();
        for (a, &ca) in cols.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate() {
                let v = hk[(a, b)];
                if v != 0.0 {
                    out.push((ca, cb, v));
                }
            }
        }
    }
}

/// `Σ_k e_kᵀ Q e_k + u_kᵀ R u_k` with `e_k = x_{r,k} − x_k`, and its
/// gradient with respect to `Y`.
pub fn tracking_cost(
    y: &DVector<f64>,
    layout: &DecisionLayout,
    reference: &[DVector<f64>],
    q: &DVector<f64>,
    r: &DVector<f64>,
) -> (f64, DVector<f64>) {
    assert_eq!(reference.len(), layout.nodes, "reference length must match node count");
    let mut cost = 0.0;
    let mut grad = DVector::zeros(layout.len());
    for k in 0..layout.nodes {
        let xo = layout.state_offset(k);
        for i in 0..layout.state_dim {
            let e = reference[k][i] - y[xo + i];
            cost += q[i] * e * e;
            grad[xo + i] = -2.0 * q[i] * e;
        }
        let uo = layout.input_offset(k);
        for i in 0..layout.input_dim {
            let u = y[uo + i];
            cost += r[i] * u * u;
            grad[uo + i] = 2.0 * r[i] * u;
        }
    }
    (cost, grad)
}

/// Constant Hessian diagonal of [`tracking_cost`].
pub fn tracking_cost_hessian_diagonal(layout: &DecisionLayout, q: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
    let mut d = DVector::zeros(layout.len());
    for k in 0..layout.nodes {
        d.rows_mut(layout.state_offset(k), layout.state_dim).copy_from(&(2.0 * q));
        d.rows_mut(layout.input_offset(k), layout.input_dim).copy_from(&(2.0 * r));
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn hermite_coefficients_for_unit_step() {
        let seg = hermite_segment(&v(&[0.0]), &v(&[1.0]), &v(&[0.0]), &v(&[0.0]), 1.0);
        let c: Vec<f64> = seg.c.iter().map(|c| c[0]).collect();
        assert_eq!(c, vec![0.0, 0.0, 3.0, -2.0]);
        assert_relative_eq!(segment_eval(&seg, 0.5)[0], 0.5, epsilon = 1e-15);
        let h = 0.4;
        let seg_h = HermiteSegment { h, ..seg };
        assert_relative_eq!(segment_deriv(&seg_h, 0.5)[0], 1.5 / h, epsilon = 1e-14);
    }

    #[test]
    fn hermite_degenerates_to_linear_flow() {
        let (h, a) = (0.3, v(&[1.5, -2.0]));
        let x0 = v(&[0.2, 0.1]);
        let x1 = &x0 + h * &a;
        let seg = hermite_segment(&x0, &x1, &a, &a, h);
        assert!(seg.c[2].amax() < 1e-15 && seg.c[3].amax() < 1e-15);
    }

    #[test]
    fn input_interpolation_examples() {
        let grid = CollocationGrid::uniform(2.0, 3).unwrap();
        let u = vec![v(&[2.0]), v(&[6.0]), v(&[-1.0])];
        assert_eq!(input_interpolant(&u, &grid, 1.0).unwrap()[0], 6.0);
        assert_eq!(input_interpolant(&u, &grid, 2.0).unwrap()[0], -1.0);
        assert_relative_eq!(input_interpolant(&u, &grid, 0.25).unwrap()[0], 3.0, epsilon = 1e-15);
        assert_relative_eq!(input_interpolant(&u, &grid, 1.5).unwrap()[0], 2.5, epsilon = 1e-15);
        assert!(matches!(
            input_interpolant(&u, &grid, 2.5),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn grid_rejects_bad_times() {
        assert!(CollocationGrid::from_times(vec![0.0, 1.0, 1.0]).is_err());
        assert!(CollocationGrid::uniform(0.0, 5).is_err());
        assert!(CollocationGrid::uniform(1.0, 1).is_err());
        let g = CollocationGrid::from_times(vec![0.0, 0.5, 2.0]).unwrap();
        assert_eq!(g.midpoints(), vec![0.25, 1.25]);
        assert_eq!(g.locate(0.5).unwrap(), (1, 0.0));
        assert_eq!(g.locate(2.0).unwrap(), (1, 1.0));
    }

    struct Scalar;
    impl Dynamics for Scalar {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn eval(&self, _x: &[f64], u: &[f64]) -> DVector<f64> {
            v(&[u[0]])
        }
    }

    #[test]
    fn constant_derivative_flow_has_zero_defects() {
        let grid = CollocationGrid::uniform(1.0, 5).unwrap();
        let layout = DecisionLayout::new(5, 1, 1);
        let dv = DecisionVector {
            states: grid.times().iter().map(|t| v(&[0.3 + 2.0 * t])).collect(),
            inputs: vec![v(&[2.0]); 5],
            t_f: 1.0,
        };
        let y = dv.pack().unwrap();
        assert!(defect_constraints(&y, &layout, &grid, &Scalar).amax() < 1e-14);
    }

    #[test]
    fn scalar_tracking_cost() {
        let layout = DecisionLayout::new(1, 1, 1);
        let y = v(&[1.0, 0.0, 1.0]);
        let (c, g) = tracking_cost(&y, &layout, &[v(&[3.0])], &v(&[1.0]), &v(&[1.0]));
        assert_eq!(c, 4.0);
        assert_eq!(g[0], -4.0);
    }

    #[test]
    fn cost_weight_groups() {
        let w = CostWeights::default();
        let q = w.q_diagonal();
        assert_eq!(q[layout::Q_L], 10.0);
        assert_eq!(q[layout::DQ_L], 1.0);
        assert_eq!(q[layout::R_B + 8], 10.0);
        assert_eq!(q[layout::OMEGA_B], 1.0);
        let r = w.r_diagonal();
        assert_eq!(r[layout::U_G + 11], 1e-4);
        assert_eq!(r[layout::U_T], 1e-3);
    }
}
