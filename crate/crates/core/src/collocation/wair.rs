//! The incline-walking NLP: tracking cost, midpoint defects, node
//! inequalities, boundary pins, optional foot placement and variable
//! bounds.

use nalgebra::{DVector, Matrix3, Vector3};

use super::{
    defect_constraints, defect_hessian_triplets, defect_jacobian_triplets, tracking_cost, tracking_cost_hessian_diagonal,
    CollocationGrid, DecisionLayout, Dynamics, FdScheme, HromDynamics,
};
use crate::contact::{slope_frame, SlopePlane};
use crate::dynamics::{layout, RobotParams, NUM_LEGS, STATE_DIM};
use crate::error::{Error, Result};
use crate::nlp::{NlpProblem, SparseMatrix};
use crate::so3::{leg_vector, leg_vector_jacobian};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    /// Pinned first-node state.
    pub initial_state: DVector<f64>,
    /// Required up-slope displacement of the body between the first and
    /// last node.
    pub progress_target: Option<f64>,
    /// Require `ω_b = 0` at the last node.
    pub zero_terminal_omega: bool,
    pub t_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeRow {
    Cone { node: usize, leg: usize },
    Normal { node: usize, leg: usize },
    ThrustNorm { node: usize },
    ThrustBodyZ { node: usize },
}

/// World-frame foot position required at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FootPin {
    node: usize,
    leg: usize,
    target: Vector3<f64>,
}

/// Fully assembled transcription of one scenario.
#[derive(Debug, Clone)]
pub struct WairTranscription {
    pub grid: CollocationGrid,
    pub layout: DecisionLayout,
    pub dynamics: HromDynamics,
    pub reference: Vec<DVector<f64>>,
    pub q: DVector<f64>,
    pub r: DVector<f64>,
    /// Stance flags per node.
    pub stance: Vec<[bool; NUM_LEGS]>,
    pub plane: SlopePlane,
    pub cone_mu: f64,
    /// `ε` in the smoothed tangential norm `√(u_x² + u_y² + ε²)` [N].
    pub cone_smoothing: f64,
    /// Margin demanded of the cone and normal-force rows [N].
    pub cone_backoff: f64,
    /// Smallest normal force a stance foot may carry [N].
    pub min_normal_force: f64,
    pub thrust_enabled: bool,
    pub boundary: BoundaryConditions,
    pub fd_scheme: FdScheme,
    pub initial_guess: DVector<f64>,
    rows: Vec<NodeRow>,
    foot_pins: Vec<FootPin>,
    /// Slope tangent, lateral and normal axes in world coordinates.
    axes: [Vector3<f64>; 3],
}

impl WairTranscription {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: CollocationGrid,
        params: RobotParams,
        reference: Vec<DVector<f64>>,
        q: DVector<f64>,
        r: DVector<f64>,
        stance: Vec<[bool; NUM_LEGS]>,
        plane: SlopePlane,
        cone_mu: f64,
        thrust_enabled: bool,
        boundary: BoundaryConditions,
        initial_guess: DVector<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        let layout = DecisionLayout::hrom(n);
        if reference.len() != n || stance.len() != n {
            return Err(Error::Dimension(format!(
                "{n} nodes but {} reference states and {} stance rows",
                reference.len(),
                stance.len()
            )));
        }
        if initial_guess.len() != layout.len() || boundary.initial_state.len() != STATE_DIM {
            return Err(Error::Dimension("initial guess or initial state has the wrong size".into()));
        }
        if !(cone_mu > 0.0) {
            return Err(Error::InvalidParameter(format!("cone_mu must be positive, got {cone_mu}")));
        }
        let mut rows = Vec::new();
        for (node, flags) in stance.iter().enumerate() {
            for (leg, &on) in flags.iter().enumerate() {
                if on {
                    rows.push(NodeRow::Cone { node, leg });
                    rows.push(NodeRow::Normal { node, leg });
                }
            }
            if thrust_enabled {
                rows.push(NodeRow::ThrustNorm { node });
                rows.push(NodeRow::ThrustBodyZ { node });
            }
        }
        let frame = slope_frame(&plane);
        let m = frame.matrix();
        let axes = [
            m.column(0).into_owned(),
            m.column(1).into_owned(),
            m.column(2).into_owned(),
        ];
        Ok(Self {
            grid,
            layout,
            dynamics: HromDynamics { params },
            reference,
            q,
            r,
            stance,
            plane,
            cone_mu,
            cone_smoothing: 1e-3,
            cone_backoff: 1e-5,
            min_normal_force: 0.0,
            thrust_enabled,
            boundary,
            fd_scheme: FdScheme::Forward,
            initial_guess,
            rows,
            foot_pins: Vec::new(),
            axes,
        })
    }

    /// Requires every foot to sit at `targets[k][leg]` (world frame) at
    /// every node after the first, whose feet the initial-state pin already
    /// fixes. Replaces any earlier targets.
    pub fn set_foot_targets(&mut self, targets: &[[Vector3<f64>; NUM_LEGS]]) -> Result<()> {
        if targets.len() != self.layout.nodes {
            return Err(Error::Dimension(format!(
                "{} nodes but {} foot target rows",
                self.layout.nodes,
                targets.len()
            )));
        }
        self.foot_pins = targets
            .iter()
            .enumerate()
            .skip(1)
            .flat_map(|(node, feet)| (0..NUM_LEGS).map(move |leg| FootPin { node, leg, target: feet[leg] }))
            .collect();
        Ok(())
    }

    pub fn num_foot_constraints(&self) -> usize {
        3 * self.foot_pins.len()
    }

    fn rotation(&self, y: &DVector<f64>, node: usize) -> Matrix3<f64> {
        let o = self.layout.state_offset(node) + layout::R_B;
        Matrix3::from_column_slice(&y.as_slice()[o..o + 9])
    }

    /// World-frame foot position `p_b + R_b (mount + l(q))` read from `y`.
    pub fn foot_position(&self, y: &DVector<f64>, node: usize, leg: usize) -> Vector3<f64> {
        let o = self.layout.state_offset(node);
        let q = o + layout::Q_L + 3 * leg;
        let p_b = Vector3::new(y[o + layout::P_B], y[o + layout::P_B + 1], y[o + layout::P_B + 2]);
        let arm = Vector3::from(self.params().mounts[leg]) + leg_vector(y[q], y[q + 1], y[q + 2]);
        p_b + self.rotation(y, node) * arm
    }

    fn foot_constraints(&self, y: &DVector<f64>) -> Vec<f64> {
        self.foot_pins
            .iter()
            .flat_map(|pin| {
                let d = self.foot_position(y, pin.node, pin.leg) - pin.target;
                [d.x, d.y, d.z]
            })
            .collect()
    }

    fn foot_triplets(&self, y: &DVector<f64>, row0: usize, t: &mut Vec<(usize, usize, f64)>) {
        for (p, pin) in self.foot_pins.iter().enumerate() {
            let r = row0 + 3 * p;
            let o = self.layout.state_offset(pin.node);
            let q = o + layout::Q_L + 3 * pin.leg;
            let rot = self.rotation(y, pin.node);
            let arm = Vector3::from(self.params().mounts[pin.leg]) + leg_vector(y[q], y[q + 1], y[q + 2]);
            let jq = rot * leg_vector_jacobian(y[q], y[q + 1], y[q + 2]);
            for i in 0..3 {
                t.push((r + i, o + layout::P_B + i, 1.0));
                // ∂p_i/∂R_ij = arm_j, R stored column-major
                for j in 0..3 {
                    t.push((r + i, o + layout::R_B + 3 * j + i, arm[j]));
                    t.push((r + i, q + j, jq[(i, j)]));
                }
            }
        }
    }

    pub fn params(&self) -> &RobotParams {
        &self.dynamics.params
    }

    pub fn num_defects(&self) -> usize {
        self.grid.intervals() * STATE_DIM
    }

    pub fn num_boundary(&self) -> usize {
        STATE_DIM
            + usize::from(self.boundary.progress_target.is_some())
            + if self.boundary.zero_terminal_omega { 3 } else { 0 }
            + 1
    }

    fn grf(&self, y: &DVector<f64>, node: usize, leg: usize) -> Vector3<f64> {
        let o = self.layout.input_offset(node) + layout::U_G + 3 * leg;
        Vector3::new(y[o], y[o + 1], y[o + 2])
    }

    fn thrust(&self, y: &DVector<f64>, node: usize) -> Vector3<f64> {
        let o = self.layout.input_offset(node) + layout::U_T;
        Vector3::new(y[o], y[o + 1], y[o + 2])
    }

    /// World-frame body z axis `R_b e_z` (third column of `r_b`).
    fn body_z(&self, y: &DVector<f64>, node: usize) -> Vector3<f64> {
        let o = self.layout.state_offset(node) + layout::R_B + 6;
        Vector3::new(y[o], y[o + 1], y[o + 2])
    }

    /// Uphill displacement of the body between the first and last node.
    pub fn progress(&self, y: &DVector<f64>) -> f64 {
        let p = |k: usize| {
            let o = self.layout.state_offset(k) + layout::P_B;
            Vector3::new(y[o], y[o + 1], y[o + 2])
        };
        self.axes[0].dot(&(p(self.layout.nodes - 1) - p(0)))
    }

    /// Exact friction-cone margin `μ u_z − ‖u_t‖` in the slope frame.
    pub fn cone_margin(&self, u: &Vector3<f64>) -> f64 {
        let [t, l, n] = &self.axes;
        self.cone_mu * n.dot(u) - t.dot(u).hypot(l.dot(u))
    }

    fn smoothed_cone(&self, u: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let [t, l, n] = &self.axes;
        let (ut, ul) = (t.dot(u), l.dot(u));
        let norm = (ut * ut + ul * ul + self.cone_smoothing * self.cone_smoothing).sqrt();
        let value = self.cone_mu * n.dot(u) - norm - self.cone_backoff;
        let grad = self.cone_mu * n - (ut * t + ul * l) / norm;
        (value, grad)
    }

    /// Variable bounds: joint limits, `u_L` box, swing GRFs pinned to zero,
    /// thrust box (or zero when thrust is disabled).
    pub fn variable_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let l = &self.layout;
        let p = self.params();
        let mut lb = DVector::from_element(l.len(), f64::NEG_INFINITY);
        let mut ub = DVector::from_element(l.len(), f64::INFINITY);
        for k in 0..l.nodes {
            let xo = l.state_offset(k);
            for leg in 0..NUM_LEGS {
                let o = xo + layout::Q_L + 3 * leg;
                let lim = [p.joint_angle_limits.phi, p.joint_angle_limits.gamma, p.r_limits];
                for (i, [lo, hi]) in lim.into_iter().enumerate() {
                    lb[o + i] = lo;
                    ub[o + i] = hi;
                }
            }
            let uo = l.input_offset(k);
            for i in 0..12 {
                lb[uo + layout::U_L + i] = -p.u_l_max;
                ub[uo + layout::U_L + i] = p.u_l_max;
            }
            for leg in 0..NUM_LEGS {
                if !self.stance[k][leg] {
                    for i in 0..3 {
                        lb[uo + layout::U_G + 3 * leg + i] = 0.0;
                        ub[uo + layout::U_G + 3 * leg + i] = 0.0;
                    }
                }
            }
            let cap = if self.thrust_enabled { p.u_t_max_total } else { 0.0 };
            for i in 0..3 {
                lb[uo + layout::U_T + i] = -cap;
                ub[uo + layout::U_T + i] = cap;
            }
        }
        (lb, ub)
    }

    /// Nonlinear node inequalities as posed to the solver (smoothed cone
    /// with back-off), each required `≥ 0`.
    pub fn node_inequalities(&self, y: &DVector<f64>) -> DVector<f64> {
        let umax = self.params().u_t_max_total;
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| match *row {
                NodeRow::Cone { node, leg } => self.smoothed_cone(&self.grf(y, node, leg)).0,
                NodeRow::Normal { node, leg } => {
                    self.axes[2].dot(&self.grf(y, node, leg)) - self.min_normal_force - self.cone_backoff
                }
                NodeRow::ThrustNorm { node } => (umax * umax - self.thrust(y, node).norm_squared()) / (2.0 * umax),
                NodeRow::ThrustBodyZ { node } => self.body_z(y, node).dot(&self.thrust(y, node)),
            }),
        )
    }

    fn node_inequality_jacobian(&self, y: &DVector<f64>) -> SparseMatrix {
        let mut t = Vec::with_capacity(self.rows.len() * 6);
        let umax = self.params().u_t_max_total;
        for (r, row) in self.rows.iter().enumerate() {
            match *row {
                NodeRow::Cone { node, leg } => {
                    let (_, g) = self.smoothed_cone(&self.grf(y, node, leg));
                    let o = self.layout.input_offset(node) + layout::U_G + 3 * leg;
                    t.extend((0..3).map(|i| (r, o + i, g[i])));
                }
                NodeRow::Normal { node, leg } => {
                    let o = self.layout.input_offset(node) + layout::U_G + 3 * leg;
                    t.extend((0..3).map(|i| (r, o + i, self.axes[2][i])));
                }
                NodeRow::ThrustNorm { node } => {
                    let u = self.thrust(y, node);
                    let o = self.layout.input_offset(node) + layout::U_T;
                    t.extend((0..3).map(|i| (r, o + i, -u[i] / umax)));
                }
                NodeRow::ThrustBodyZ { node } => {
                    let u = self.thrust(y, node);
                    let z = self.body_z(y, node);
                    let ou = self.layout.input_offset(node) + layout::U_T;
                    let oz = self.layout.state_offset(node) + layout::R_B + 6;
                    t.extend((0..3).map(|i| (r, ou + i, z[i])));
                    t.extend((0..3).map(|i| (r, oz + i, u[i])));
                }
            }
        }
        SparseMatrix::from_triplets(self.rows.len(), self.layout.len(), &t)
    }

    /// `Σ w ∇²` of the foot-placement rows (weights indexed like the
    /// equalities).
    fn foot_hessian(&self, y: &DVector<f64>, w: &DVector<f64>) -> SparseMatrix {
        let mut t = Vec::new();
        let row0 = self.num_defects() + self.num_boundary();
        for (p, pin) in self.foot_pins.iter().enumerate() {
            let wp = Vector3::new(w[row0 + 3 * p], w[row0 + 3 * p + 1], w[row0 + 3 * p + 2]);
            if wp == Vector3::zeros() {
                continue;
            }
            let o = self.layout.state_offset(pin.node);
            let q = o + layout::Q_L + 3 * pin.leg;
            let (phi, gamma, r) = (y[q], y[q + 1], y[q + 2]);
            let jl = leg_vector_jacobian(phi, gamma, r);
            // ∂²p_i/∂R_ij∂q_k = ∂l_j/∂q_k
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let v = wp[i] * jl[(j, k)];
                        t.push((o + layout::R_B + 3 * j + i, q + k, v));
                        t.push((q + k, o + layout::R_B + 3 * j + i, v));
                    }
                }
            }
            // ∂²(v·l)/∂q² with body-frame weights v = Rᵀw
            let v = self.rotation(y, pin.node).transpose() * wp;
            let (sp, cp) = phi.sin_cos();
            let (sg, cg) = gamma.sin_cos();
            let h_pp = r * cg * (v[0] * sp + v[2] * cp);
            let h_pg = r * sg * (v[0] * cp - v[2] * sp);
            let h_pr = cg * (v[2] * sp - v[0] * cp);
            let h_gg = r * (v[0] * sp * cg - v[1] * sg + v[2] * cp * cg);
            let h_gr = v[0] * sp * sg + v[1] * cg + v[2] * cp * sg;
            let hq = Matrix3::new(h_pp, h_pg, h_pr, h_pg, h_gg, h_gr, h_pr, h_gr, 0.0);
            for a in 0..3 {
                for b in 0..3 {
                    t.push((q + a, q + b, hq[(a, b)]));
                }
            }
        }
        let n = self.layout.len();
        SparseMatrix::from_triplets(n, n, &t)
    }

    /// `Σ wᵣ ∇²gᵣ` of the node inequalities. The cone and thrust-norm rows
    /// are concave, so their weighted curvature enters the solver model as
    /// a positive semidefinite term.
    fn node_inequality_hessian(&self, y: &DVector<f64>, w: &DVector<f64>) -> SparseMatrix {
        let mut t = Vec::new();
        let umax = self.params().u_t_max_total;
        for (r, row) in self.rows.iter().enumerate() {
            let wr = w[r];
            if wr == 0.0 {
                continue;
            }
            match *row {
                NodeRow::Cone { node, leg } => {
                    let u = self.grf(y, node, leg);
                    let [ta, la, _] = &self.axes;
                    let (ut, ul) = (ta.dot(&u), la.dot(&u));
                    let norm = (ut * ut + ul * ul + self.cone_smoothing * self.cone_smoothing).sqrt();
                    let v = (ut * ta + ul * la) / norm;
                    let h = -(ta * ta.transpose() + la * la.transpose() - v * v.transpose()) / norm;
                    let o = self.layout.input_offset(node) + layout::U_G + 3 * leg;
                    for i in 0..3 {
                        for j in 0..3 {
                            t.push((o + i, o + j, wr * h[(i, j)]));
                        }
                    }
                }
                NodeRow::Normal { .. } => {}
                NodeRow::ThrustNorm { node } => {
                    let o = self.layout.input_offset(node) + layout::U_T;
                    t.extend((0..3).map(|i| (o + i, o + i, -wr / umax)));
                }
                NodeRow::ThrustBodyZ { node } => {
                    let ou = self.layout.input_offset(node) + layout::U_T;
                    let oz = self.layout.state_offset(node) + layout::R_B + 6;
                    for i in 0..3 {
                        t.push((ou + i, oz + i, wr));
                        t.push((oz + i, ou + i, wr));
                    }
                }
            }
        }
        let n = self.layout.len();
        SparseMatrix::from_triplets(n, n, &t)
    }

    /// Diagnostic view of every path inequality, each `≥ 0` when satisfied:
    /// exact node margins (cone `μ u_z − ‖u_t‖`, normal force, thrust norm
    /// and body-z component) followed by the margins of every finite
    /// variable bound.
    pub fn path_inequalities(&self, y: &DVector<f64>) -> DVector<f64> {
        let umax = self.params().u_t_max_total;
        let mut out: Vec<f64> = self
            .rows
            .iter()
            .map(|row| match *row {
                NodeRow::Cone { node, leg } => self.cone_margin(&self.grf(y, node, leg)),
                NodeRow::Normal { node, leg } => self.axes[2].dot(&self.grf(y, node, leg)),
                NodeRow::ThrustNorm { node } => umax - self.thrust(y, node).norm(),
                NodeRow::ThrustBodyZ { node } => self.body_z(y, node).dot(&self.thrust(y, node)),
            })
            .collect();
        let (lb, ub) = self.variable_bounds();
        for i in 0..y.len() {
            if lb[i].is_finite() {
                out.push(y[i] - lb[i]);
            }
            if ub[i].is_finite() {
                out.push(ub[i] - y[i]);
            }
        }
        DVector::from_vec(out)
    }

    /// Minimum exact cone margin over stance nodes (`+∞` without stance).
    pub fn min_node_cone_margin(&self, y: &DVector<f64>) -> f64 {
        self.rows
            .iter()
            .filter_map(|row| match *row {
                NodeRow::Cone { node, leg } => Some(self.cone_margin(&self.grf(y, node, leg))),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Initial-state pin, terminal progress, terminal `ω_b` and `t_f`.
    pub fn boundary_constraints(&self, y: &DVector<f64>) -> DVector<f64> {
        let l = &self.layout;
        let mut out = Vec::with_capacity(self.num_boundary());
        let x1 = l.state(y, 0);
        out.extend(x1.iter().zip(self.boundary.initial_state.iter()).map(|(a, b)| a - b));
        if let Some(target) = self.boundary.progress_target {
            out.push(self.progress(y) - target);
        }
        if self.boundary.zero_terminal_omega {
            let o = l.state_offset(l.nodes - 1) + layout::OMEGA_B;
            out.extend((0..3).map(|i| y[o + i]));
        }
        out.push(y[l.tf_index()] - self.boundary.t_f);
        DVector::from_vec(out)
    }

    fn boundary_triplets(&self, row0: usize, t: &mut Vec<(usize, usize, f64)>) {
        let l = &self.layout;
        let mut r = row0;
        for i in 0..STATE_DIM {
            t.push((r, l.state_offset(0) + i, 1.0));
            r += 1;
        }
        if self.boundary.progress_target.is_some() {
            let last = l.state_offset(l.nodes - 1) + layout::P_B;
            let first = l.state_offset(0) + layout::P_B;
            for i in 0..3 {
                t.push((r, last + i, self.axes[0][i]));
                t.push((r, first + i, -self.axes[0][i]));
            }
            r += 1;
        }
        if self.boundary.zero_terminal_omega {
            let o = l.state_offset(l.nodes - 1) + layout::OMEGA_B;
            for i in 0..3 {
                t.push((r, o + i, 1.0));
                r += 1;
            }
        }
        t.push((r, l.tf_index(), 1.0));
    }

    pub fn equality_rows(&self) -> usize {
        self.num_defects() + self.num_boundary() + self.num_foot_constraints()
    }

    /// All constraint Jacobians `(equalities, inequalities)`.
    pub fn nlp_jacobians(&self, y: &DVector<f64>) -> (SparseMatrix, SparseMatrix) {
        (self.equality_jacobian(y), self.node_inequality_jacobian(y))
    }
}

impl NlpProblem for WairTranscription {
    fn num_variables(&self) -> usize {
        self.layout.len()
    }

    fn num_equalities(&self) -> usize {
        self.equality_rows()
    }

    fn num_inequalities(&self) -> usize {
        self.rows.len()
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        self.variable_bounds()
    }

    fn initial_guess(&self) -> DVector<f64> {
        self.initial_guess.clone()
    }

    fn objective(&self, y: &DVector<f64>) -> f64 {
        tracking_cost(y, &self.layout, &self.reference, &self.q, &self.r).0
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        tracking_cost(y, &self.layout, &self.reference, &self.q, &self.r).1
    }

    fn objective_hessian(&self, _y: &DVector<f64>) -> Option<SparseMatrix> {
        Some(SparseMatrix::diagonal(&tracking_cost_hessian_diagonal(
            &self.layout,
            &self.q,
            &self.r,
        )))
    }

    fn equalities(&self, y: &DVector<f64>) -> DVector<f64> {
        let d = defect_constraints(y, &self.layout, &self.grid, &self.dynamics as &dyn Dynamics);
        let b = self.boundary_constraints(y);
        DVector::from_iterator(
            self.equality_rows(),
            d.iter().chain(b.iter()).copied().chain(self.foot_constraints(y)),
        )
    }

    fn equality_jacobian(&self, y: &DVector<f64>) -> SparseMatrix {
        let mut t = Vec::new();
        defect_jacobian_triplets(y, &self.layout, &self.grid, &self.dynamics, self.fd_scheme, 0, &mut t);
        self.boundary_triplets(self.num_defects(), &mut t);
        self.foot_triplets(y, self.num_defects() + self.num_boundary(), &mut t);
        SparseMatrix::from_triplets(self.equality_rows(), self.layout.len(), &t)
    }

    fn inequalities(&self, y: &DVector<f64>) -> DVector<f64> {
        self.node_inequalities(y)
    }

    fn inequality_jacobian(&self, y: &DVector<f64>) -> SparseMatrix {
        self.node_inequality_jacobian(y)
    }

    fn equality_hessian(&self, y: &DVector<f64>, w: &DVector<f64>) -> Option<SparseMatrix> {
        let nd = self.num_defects();
        let mut t = Vec::new();
        defect_hessian_triplets(y, &self.layout, &self.grid, &self.dynamics, self.fd_scheme, &w.as_slice()[..nd], &mut t);
        if !self.foot_pins.is_empty() {
            t.extend(self.foot_hessian(y, w).iter());
        }
        let n = self.layout.len();
        Some(SparseMatrix::from_triplets(n, n, &t))
    }

    fn inequality_hessian(&self, y: &DVector<f64>, w: &DVector<f64>) -> Option<SparseMatrix> {
        Some(self.node_inequality_hessian(y, w))
    }
}
