//! Augmented-Lagrangian solver for smooth bound-constrained NLPs
//!
//! ```text
//! min f(x)  s.t.  c(x) = 0,  g(x) ≥ 0,  lb ≤ x ≤ ub
//! ```
//!
//! The outer loop updates multipliers and the penalty; the inner loop
//! minimizes the augmented Lagrangian over the bound box with a projected
//! Newton-type method whose model is `H_f + ρ JᵀJ` (active rows only for
//! inequalities) plus, when supplied, the curvature of the active
//! inequalities weighted by their shifted multipliers, factorized in
//! envelope form after an RCM reordering. Equality curvature enters only
//! for rows whose Hessian the problem supplies; the rest are treated as
//! locally linear.
//! When the problem does not supply `∇²f`, a dense damped-BFGS
//! approximation of the Lagrangian Hessian takes its place.

pub mod envelope;
mod scaled;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use envelope::{reverse_cuthill_mckee, EnvelopeMatrix};
pub use scaled::ScaledProblem;
pub use sparse::SparseMatrix;

/// Problem callbacks. All callbacks must be pure; output dimensions are
/// fixed across calls. Inequalities follow the `g(x) ≥ 0` convention.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_equalities(&self) -> usize;
    fn num_inequalities(&self) -> usize;

    /// `(lb, ub)`; infinite entries mean unbounded.
    fn bounds(&self) -> (DVector<f64>, DVector<f64>);
    fn initial_guess(&self) -> DVector<f64>;

    fn objective(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Symmetric `∇²f` with both triangles stored. `None` switches the
    /// solver to a quasi-Newton model.
    fn objective_hessian(&self, _x: &DVector<f64>) -> Option<SparseMatrix> {
        None
    }

    fn equalities(&self, x: &DVector<f64>) -> DVector<f64>;
    fn equality_jacobian(&self, x: &DVector<f64>) -> SparseMatrix;
    fn inequalities(&self, x: &DVector<f64>) -> DVector<f64>;
    fn inequality_jacobian(&self, x: &DVector<f64>) -> SparseMatrix;

    /// `Σ wᵢ ∇²cᵢ(x)` with both triangles stored. Rows the problem cannot
    /// differentiate twice may be left out.
    fn equality_hessian(&self, _x: &DVector<f64>, _w: &DVector<f64>) -> Option<SparseMatrix> {
        None
    }

    /// `Σ wᵢ ∇²gᵢ(x)` with both triangles stored, for weights `w ≥ 0`.
    /// Rows with `wᵢ = 0` may be skipped.
    fn inequality_hessian(&self, _x: &DVector<f64>, _w: &DVector<f64>) -> Option<SparseMatrix> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub opt_tol: f64,
    pub feas_tol: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            opt_tol: 1e-5,
            feas_tol: 1e-5,
            max_outer_iterations: 50,
            max_inner_iterations: 500,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max-iter",
            SolveStatus::NumericalFailure => "numerical-failure",
        })
    }
}

/// One outer iteration, recorded after the multiplier update.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub iteration: usize,
    pub objective: f64,
    pub equality_violation: f64,
    pub inequality_violation: f64,
    pub kkt_residual: f64,
    pub penalty: f64,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: DVector<f64>,
    pub objective: f64,
    pub max_equality_violation: f64,
    pub max_inequality_violation: f64,
    pub kkt_residual: f64,
    /// Outer iterations performed.
    pub iterations: usize,
    pub inner_iterations: usize,
    pub status: SolveStatus,
    pub equality_multipliers: DVector<f64>,
    pub inequality_multipliers: DVector<f64>,
    pub penalty: f64,
    pub history: Vec<OuterRecord>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_negative(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(-x))
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn project(x: &mut DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lb[i], ub[i]);
    }
}

/// `x − P(x − r)`: zero in components where `r` is balanced by an active bound.
fn projected_residual(
    x: &DVector<f64>,
    r: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> f64 {
    (0..x.len())
        .map(|i| (x[i] - (x[i] - r[i]).clamp(lb[i], ub[i])).abs())
        .fold(0.0, f64::max)
}

/// KKT residual for `L = f + λᵀc − μᵀg`: the projected infinity norm of
/// `∇f + J_cᵀλ − J_gᵀμ` plus `max |min(μᵢ, gᵢ)|`.
pub fn kkt_residual(
    problem: &dyn NlpProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
) -> f64 {
    let (lb, ub) = problem.bounds();
    let mut r = problem.gradient(x);
    if !lambda.is_empty() {
        r += problem.equality_jacobian(x).tr_mul_vec(lambda);
    }
    let mut comp = 0.0f64;
    if !mu.is_empty() {
        r -= problem.inequality_jacobian(x).tr_mul_vec(mu);
        let g = problem.inequalities(x);
        for i in 0..g.len() {
            comp = comp.max(mu[i].min(g[i]).abs());
        }
    }
    projected_residual(x, &r, &lb, &ub) + comp
}

/// Function values at a point (no derivatives).
struct Values {
    f: f64,
    c: DVector<f64>,
    g: DVector<f64>,
}

impl Values {
    fn at(problem: &dyn NlpProblem, x: &DVector<f64>) -> Self {
        Self {
            f: problem.objective(x),
            c: problem.equalities(x),
            g: problem.inequalities(x),
        }
    }

    fn finite(&self) -> bool {
        self.f.is_finite() && all_finite(&self.c) && all_finite(&self.g)
    }

    fn merit(&self, lambda: &DVector<f64>, mu: &DVector<f64>, rho: f64) -> f64 {
        let mut psi = self.f + lambda.dot(&self.c) + 0.5 * rho * self.c.norm_squared();
        for i in 0..self.g.len() {
            let s = (mu[i] - rho * self.g[i]).max(0.0);
            psi += (s * s - mu[i] * mu[i]) / (2.0 * rho);
        }
        psi
    }
}

struct Point {
    x: DVector<f64>,
    vals: Values,
    grad_f: DVector<f64>,
    jc: SparseMatrix,
    jg: SparseMatrix,
}

impl Point {
    fn at(problem: &dyn NlpProblem, x: DVector<f64>) -> Self {
        let vals = Values::at(problem, &x);
        let grad_f = problem.gradient(&x);
        let jc = problem.equality_jacobian(&x);
        let jg = problem.inequality_jacobian(&x);
        Self {
            x,
            vals,
            grad_f,
            jc,
            jg,
        }
    }

    fn finite(&self) -> bool {
        self.vals.finite()
            && all_finite(&self.grad_f)
            && self.jc.values().iter().all(|v| v.is_finite())
            && self.jg.values().iter().all(|v| v.is_finite())
    }

    /// Inequality weights `max(0, μ − ρg)` of the shifted penalty.
    fn shifted(&self, mu: &DVector<f64>, rho: f64) -> DVector<f64> {
        DVector::from_fn(mu.len(), |i, _| (mu[i] - rho * self.vals.g[i]).max(0.0))
    }

    fn merit_gradient(&self, lambda: &DVector<f64>, mu: &DVector<f64>, rho: f64) -> DVector<f64> {
        let mut grad = self.grad_f.clone();
        if !lambda.is_empty() {
            grad += self.jc.tr_mul_vec(&(lambda + rho * &self.vals.c));
        }
        if !mu.is_empty() {
            grad -= self.jg.tr_mul_vec(&self.shifted(mu, rho));
        }
        grad
    }

    /// Gradient of the Lagrangian at fixed multiplier estimates.
    fn lagrangian_gradient(&self, lam: &DVector<f64>, nu: &DVector<f64>) -> DVector<f64> {
        let mut grad = self.grad_f.clone();
        if !lam.is_empty() {
            grad += self.jc.tr_mul_vec(lam);
        }
        if !nu.is_empty() {
            grad -= self.jg.tr_mul_vec(nu);
        }
        grad
    }
}

enum CurvatureModel {
    Exact,
    Bfgs(DMatrix<f64>),
}

struct Solver<'a> {
    problem: &'a dyn NlpProblem,
    opts: &'a SolveOptions,
    lb: DVector<f64>,
    ub: DVector<f64>,
    /// `perm[new] = old` and its inverse.
    perm: Vec<usize>,
    inv: Vec<usize>,
    curvature: CurvatureModel,
    damping: f64,
    bfgs_initialized: bool,
}

enum InnerExit {
    Converged,
    Stalled,
    IterationLimit,
    NonFinite,
}

const MIN_DAMPING: f64 = 1e-10;
const MAX_DAMPING: f64 = 1e10;

impl<'a> Solver<'a> {
    fn new(problem: &'a dyn NlpProblem, opts: &'a SolveOptions, start: &Point) -> Self {
        let (lb, ub) = problem.bounds();
        let n = problem.num_variables();
        let hess = problem.objective_hessian(&start.x);
        let curvature = match hess {
            Some(_) => CurvatureModel::Exact,
            None => CurvatureModel::Bfgs(DMatrix::identity(n, n)),
        };
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for jac in [&start.jc, &start.jg] {
            for r in 0..jac.nrows() {
                let cols = jac.row(r).0;
                if cols.len() > 1 {
                    cliques.push(cols.to_vec());
                }
            }
        }
        match &hess {
            Some(h) => cliques.extend(
                h.iter()
                    .filter(|&(r, c, _)| r > c)
                    .map(|(r, c, _)| vec![r, c]),
            ),
            None => cliques.push((0..n).collect()),
        }
        let perm = reverse_cuthill_mckee(n, &cliques);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        Self {
            problem,
            opts,
            lb,
            ub,
            perm,
            inv,
            curvature,
            damping: 1e-8,
            bfgs_initialized: false,
        }
    }

    /// Variables held at their bounds for the next step.
    fn fixed_set(&self, x: &DVector<f64>, grad: &DVector<f64>) -> Vec<bool> {
        (0..x.len())
            .map(|i| {
                self.lb[i] == self.ub[i]
                    || (x[i] <= self.lb[i] && grad[i] > 0.0)
                    || (x[i] >= self.ub[i] && grad[i] < 0.0)
            })
            .collect()
    }

    /// Assembles `H_f + ρ J_cᵀJ_c + ρ Σ_active ∇gᵢ∇gᵢᵀ` in permuted envelope
    /// storage with fixed variables replaced by identity rows.
    fn assemble_model(
        &self,
        pt: &Point,
        lambda: &DVector<f64>,
        mu: &DVector<f64>,
        rho: f64,
        fixed: &[bool],
    ) -> EnvelopeMatrix {
        let n = pt.x.len();
        let inv = &self.inv;
        let active: Vec<usize> = (0..mu.len())
            .filter(|&i| mu[i] - rho * pt.vals.g[i] > 0.0)
            .collect();
        let hess = match self.curvature {
            CurvatureModel::Exact => self.problem.objective_hessian(&pt.x),
            CurvatureModel::Bfgs(_) => None,
        };
        // −Σ wᵢ∇²gᵢ of the active rows
        let ineq_hess = match self.curvature {
            CurvatureModel::Exact if !active.is_empty() => {
                let w = pt.shifted(mu, rho);
                self.problem.inequality_hessian(&pt.x, &w)
            }
            _ => None,
        };
        // Σ (λ + ρc)ᵢ∇²cᵢ where the problem knows it
        let eq_hess = match self.curvature {
            CurvatureModel::Exact => self.problem.equality_hessian(&pt.x, &(lambda + rho * &pt.vals.c)),
            CurvatureModel::Bfgs(_) => None,
        };

        let mut first: Vec<usize> = (0..n).collect();
        let mut touch = |cols: &[usize]| {
            let lo = cols.iter().filter(|&&c| !fixed[c]).map(|&c| inv[c]).min();
            if let Some(lo) = lo {
                for &c in cols {
                    if !fixed[c] {
                        let p = inv[c];
                        first[p] = first[p].min(lo);
                    }
                }
            }
        };
        for r in 0..pt.jc.nrows() {
            touch(pt.jc.row(r).0);
        }
        for &r in &active {
            touch(pt.jg.row(r).0);
        }
        match (&hess, &self.curvature) {
            (Some(h), _) => {
                for (r, c, _) in h.iter() {
                    if r > c {
                        touch(&[r, c]);
                    }
                }
            }
            (None, CurvatureModel::Bfgs(_)) => {
                let all: Vec<usize> = (0..n).collect();
                touch(&all);
            }
            (None, CurvatureModel::Exact) => {}
        }
        for h in [&eq_hess, &ineq_hess].into_iter().flatten() {
            for (r, c, _) in h.iter() {
                if r > c {
                    touch(&[r, c]);
                }
            }
        }

        let mut m = EnvelopeMatrix::with_envelope(first);
        let mut add_outer = |jac: &SparseMatrix, r: usize, w: f64| {
            let (cols, vals) = jac.row(r);
            for a in 0..cols.len() {
                if fixed[cols[a]] {
                    continue;
                }
                let pa = inv[cols[a]];
                for b in 0..=a {
                    if fixed[cols[b]] {
                        continue;
                    }
                    let v = w * vals[a] * vals[b];
                    m.add(pa, inv[cols[b]], v);
                }
            }
        };
        for r in 0..pt.jc.nrows() {
            add_outer(&pt.jc, r, rho);
        }
        for &r in &active {
            add_outer(&pt.jg, r, rho);
        }
        match (&hess, &self.curvature) {
            (Some(h), _) => {
                for (r, c, v) in h.iter() {
                    if r >= c && !fixed[r] && !fixed[c] {
                        m.add(inv[r], inv[c], v);
                    }
                }
            }
            (None, CurvatureModel::Bfgs(b)) => {
                for r in 0..n {
                    if fixed[r] {
                        continue;
                    }
                    for c in 0..=r {
                        if !fixed[c] {
                            m.add(inv[r], inv[c], b[(r, c)]);
                        }
                    }
                }
            }
            (None, CurvatureModel::Exact) => {}
        }
        for (h, sign) in [(&eq_hess, 1.0), (&ineq_hess, -1.0)] {
            if let Some(h) = h {
                for (r, c, v) in h.iter() {
                    if r >= c && !fixed[r] && !fixed[c] {
                        m.add(inv[r], inv[c], sign * v);
                    }
                }
            }
        }
        // Marquardt damping relative to each diagonal entry, with a small
        // floor tied to the largest so that empty rows stay regular
        let floor = 1e-8 * (0..n).map(|p| m.get(p, p).abs()).fold(1.0, f64::max);
        for (p, &old) in self.perm.iter().enumerate() {
            if fixed[old] {
                m.add(p, p, 1.0);
            } else {
                let d = m.get(p, p).abs();
                m.add(p, p, self.damping * (d + floor));
            }
        }
        m
    }

    /// Newton-type direction on the free variables; `None` when the model
    /// cannot be factorized even with maximal damping.
    fn direction(
        &mut self,
        pt: &Point,
        grad: &DVector<f64>,
        lambda: &DVector<f64>,
        mu: &DVector<f64>,
        rho: f64,
        fixed: &[bool],
    ) -> Option<DVector<f64>> {
        loop {
            let model = self.assemble_model(pt, lambda, mu, rho, fixed);
            match model.factorize() {
                Ok(chol) => {
                    let rhs: Vec<f64> = self
                        .perm
                        .iter()
                        .map(|&old| if fixed[old] { 0.0 } else { -grad[old] })
                        .collect();
                    let sol = chol.solve(&rhs);
                    let mut d = DVector::zeros(pt.x.len());
                    for (p, &old) in self.perm.iter().enumerate() {
                        d[old] = sol[p];
                    }
                    return Some(d);
                }
                Err(_) => {
                    if self.damping >= MAX_DAMPING {
                        return None;
                    }
                    self.damping = (self.damping * 100.0).max(1e-6);
                }
            }
        }
    }

    fn bfgs_update(&mut self, s: &DVector<f64>, y: &DVector<f64>) {
        let CurvatureModel::Bfgs(b) = &mut self.curvature else {
            return;
        };
        let sy = s.dot(y);
        if !self.bfgs_initialized && sy > 0.0 {
            let scale = y.norm_squared() / sy;
            if scale.is_finite() && scale > 0.0 {
                b.fill_with_identity();
                *b *= scale;
            }
            self.bfgs_initialized = true;
        }
        let bs = &*b * s;
        let sbs = s.dot(&bs);
        if !(sbs > 0.0) {
            return;
        }
        // Powell damping keeps B positive definite.
        let r = if sy >= 0.2 * sbs {
            y.clone()
        } else {
            let theta = 0.8 * sbs / (sbs - sy);
            theta * y + (1.0 - theta) * &bs
        };
        let sr = s.dot(&r);
        if !(sr > 0.0) {
            return;
        }
        *b += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
    }

    /// Minimizes the augmented Lagrangian over the bound box.
    fn inner(
        &mut self,
        pt: &mut Point,
        lambda: &DVector<f64>,
        mu: &DVector<f64>,
        rho: f64,
        tol: f64,
        iterations: &mut usize,
    ) -> InnerExit {
        let problem = self.problem;
        let mut psi = pt.vals.merit(lambda, mu, rho);
        let mut stagnant = 0;
        let mut best_residual = f64::INFINITY;
        let mut tiny_drop = false;
        for _ in 0..self.opts.max_inner_iterations {
            let grad = pt.merit_gradient(lambda, mu, rho);
            let residual = projected_residual(&pt.x, &grad, &self.lb, &self.ub);
            if residual <= tol {
                return InnerExit::Converged;
            }
            // Steps that neither lower the merit beyond rounding nor the
            // gradient mean the model cannot do better.
            if tiny_drop && residual > 0.9 * best_residual {
                stagnant += 1;
                if stagnant >= 5 {
                    return InnerExit::Stalled;
                }
            } else {
                stagnant = 0;
            }
            best_residual = best_residual.min(residual);
            *iterations += 1;
            let fixed = self.fixed_set(&pt.x, &grad);

            let mut accepted: Option<(DVector<f64>, Values, f64)> = None;
            while accepted.is_none() {
                let Some(d) = self.direction(pt, &grad, lambda, mu, rho, &fixed) else {
                    return InnerExit::Stalled;
                };
                let mut alpha = 1.0;
                for _ in 0..40 {
                    let mut trial = &pt.x + alpha * &d;
                    project(&mut trial, &self.lb, &self.ub);
                    let step = &trial - &pt.x;
                    let slope = grad.dot(&step);
                    if slope >= 0.0 {
                        break;
                    }
                    let vals = Values::at(problem, &trial);
                    if vals.finite() {
                        let psi_trial = vals.merit(lambda, mu, rho);
                        if psi_trial <= psi + 1e-4 * slope {
                            accepted = Some((trial, vals, alpha));
                            break;
                        }
                        // At large penalties the remaining gradient can lie
                        // along directions whose merit decrease is below
                        // rounding; judge the full step by the gradient then.
                        if alpha == 1.0 && psi_trial - psi <= 1e-13 * psi.abs().max(1.0) {
                            let trial_pt = Point::at(problem, trial.clone());
                            let g_trial = trial_pt.merit_gradient(lambda, mu, rho);
                            if trial_pt.finite()
                                && projected_residual(&trial, &g_trial, &self.lb, &self.ub) < 0.5 * residual
                            {
                                accepted = Some((trial, vals, alpha));
                                break;
                            }
                        }
                    }
                    alpha *= 0.5;
                }
                if accepted.is_none() {
                    if self.damping >= MAX_DAMPING {
                        return InnerExit::Stalled;
                    }
                    self.damping = (self.damping * 100.0).max(1e-6);
                }
            }
            let (x_new, vals, alpha) = accepted.unwrap();
            tiny_drop = psi - vals.merit(lambda, mu, rho) <= 1e-14 * psi.abs().max(1.0);
            if alpha == 1.0 {
                self.damping = (self.damping * 0.1).max(MIN_DAMPING);
            }

            let new_pt = Point::at(problem, x_new);
            if !new_pt.finite() {
                return InnerExit::NonFinite;
            }
            if matches!(self.curvature, CurvatureModel::Bfgs(_)) {
                let lam_est = lambda + rho * &new_pt.vals.c;
                let nu_est = new_pt.shifted(mu, rho);
                let s = &new_pt.x - &pt.x;
                let y = new_pt.lagrangian_gradient(&lam_est, &nu_est)
                    - pt.lagrangian_gradient(&lam_est, &nu_est);
                self.bfgs_update(&s, &y);
            }
            *pt = new_pt;
            psi = pt.vals.merit(lambda, mu, rho);
        }
        let grad = pt.merit_gradient(lambda, mu, rho);
        if projected_residual(&pt.x, &grad, &self.lb, &self.ub) <= tol {
            InnerExit::Converged
        } else {
            InnerExit::IterationLimit
        }
    }
}

/// Solves `problem` from its initial guess (projected onto the bounds).
pub fn solve(problem: &dyn NlpProblem, opts: &SolveOptions) -> SolveReport {
    let (lb, ub) = problem.bounds();
    let mut x0 = problem.initial_guess();
    project(&mut x0, &lb, &ub);
    let n_eq = problem.num_equalities();
    let n_in = problem.num_inequalities();
    let mut lambda = DVector::zeros(n_eq);
    let mut mu = DVector::zeros(n_in);
    let mut rho = opts.initial_penalty;

    let mut pt = Point::at(problem, x0);
    let failure = |pt: &Point, lambda, mu, rho, history, iterations, inner| SolveReport {
        objective: pt.vals.f,
        max_equality_violation: max_abs(&pt.vals.c),
        max_inequality_violation: max_negative(&pt.vals.g),
        kkt_residual: f64::NAN,
        x: pt.x.clone(),
        iterations,
        inner_iterations: inner,
        status: SolveStatus::NumericalFailure,
        equality_multipliers: lambda,
        inequality_multipliers: mu,
        penalty: rho,
        history,
    };
    if !pt.finite() {
        return failure(&pt, lambda, mu, rho, Vec::new(), 0, 0);
    }

    let mut solver = Solver::new(problem, opts, &pt);
    let mut history = Vec::new();
    let mut inner_total = 0usize;
    let mut tol = opts.opt_tol.max(1e-1);
    let mut prev_violation = f64::INFINITY;
    let mut status = SolveStatus::MaxIterations;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;

    for k in 1..=opts.max_outer_iterations {
        iterations = k;
        let mut inner = 0usize;
        let exit = solver.inner(&mut pt, &lambda, &mu, rho, tol, &mut inner);
        inner_total += inner;
        if matches!(exit, InnerExit::NonFinite) {
            return failure(&pt, lambda, mu, rho, history, k, inner_total);
        }
        let eq_viol = max_abs(&pt.vals.c);
        let in_viol = max_negative(&pt.vals.g);
        let stationarity = projected_residual(
            &pt.x,
            &pt.merit_gradient(&lambda, &mu, rho),
            &solver.lb,
            &solver.ub,
        );
        lambda += rho * &pt.vals.c;
        mu = pt.shifted(&mu, rho);
        let comp = (0..n_in)
            .map(|i| mu[i].min(pt.vals.g[i]).abs())
            .fold(0.0, f64::max);
        kkt = stationarity + comp;
        history.push(OuterRecord {
            iteration: k,
            objective: pt.vals.f,
            equality_violation: eq_viol,
            inequality_violation: in_viol,
            kkt_residual: kkt,
            penalty: rho,
            inner_iterations: inner,
        });
        log::info!(
            "outer {k}: f={:.6e} |c|={eq_viol:.3e} |g-|={in_viol:.3e} kkt={kkt:.3e} rho={rho:.1e} inner={inner}",
            pt.vals.f
        );

        let violation = eq_viol.max(in_viol);
        if violation <= opts.feas_tol && kkt <= opts.opt_tol {
            status = SolveStatus::Converged;
            break;
        }
        if violation > opts.feas_tol && violation > 0.25 * prev_violation {
            rho = (rho * opts.penalty_growth).min(opts.max_penalty);
        }
        prev_violation = violation;
        tol = (tol * 0.1).max(0.5 * opts.opt_tol);
        if !matches!(exit, InnerExit::Converged) {
            log::debug!("outer {k}: inner loop stopped early");
        }
    }

    SolveReport {
        objective: pt.vals.f,
        max_equality_violation: max_abs(&pt.vals.c),
        max_inequality_violation: max_negative(&pt.vals.g),
        kkt_residual: kkt,
        x: pt.x,
        iterations,
        inner_iterations: inner_total,
        status,
        equality_multipliers: lambda,
        inequality_multipliers: mu,
        penalty: rho,
        history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small dense test problem assembled from closures.
    struct Dense {
        n: usize,
        x0: Vec<f64>,
        lb: Vec<f64>,
        ub: Vec<f64>,
        f: fn(&[f64]) -> f64,
        c: fn(&[f64]) -> Vec<f64>,
        g: fn(&[f64]) -> Vec<f64>,
        n_eq: usize,
        n_in: usize,
    }

    fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
    }

    fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for j in 0..x.len() {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[j] += h;
            b[j] -= h;
            let (fa, fb) = (f(&a), f(&b));
            for i in 0..m {
                t.push((i, j, (fa[i] - fb[i]) / (2.0 * h)));
            }
        }
        SparseMatrix::from_triplets(m, x.len(), &t)
    }

    impl NlpProblem for Dense {
        fn num_variables(&self) -> usize {
            self.n
        }
        fn num_equalities(&self) -> usize {
            self.n_eq
        }
        fn num_inequalities(&self) -> usize {
            self.n_in
        }
        fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
            (DVector::from_vec(self.lb.clone()), DVector::from_vec(self.ub.clone()))
        }
        fn initial_guess(&self) -> DVector<f64> {
            DVector::from_vec(self.x0.clone())
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (self.f)(x.as_slice())
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            fd_gradient(&|y| (self.f)(y), x.as_slice())
        }
        fn equalities(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec((self.c)(x.as_slice()))
        }
        fn equality_jacobian(&self, x: &DVector<f64>) -> SparseMatrix {
            fd_jacobian(&|y| (self.c)(y), x.as_slice(), self.n_eq)
        }
        fn inequalities(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_vec((self.g)(x.as_slice()))
        }
        fn inequality_jacobian(&self, x: &DVector<f64>) -> SparseMatrix {
            fd_jacobian(&|y| (self.g)(y), x.as_slice(), self.n_in)
        }
    }

    fn none(_: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn line_projection() -> Dense {
        Dense {
            n: 2,
            x0: vec![3.0, -1.0],
            lb: vec![f64::NEG_INFINITY; 2],
            ub: vec![f64::INFINITY; 2],
            f: |x| x[0] * x[0] + x[1] * x[1],
            c: |x| vec![x[0] + x[1] - 2.0],
            g: none,
            n_eq: 1,
            n_in: 0,
        }
    }

    #[test]
    fn projection_onto_line() {
        let p = line_projection();
        let r = solve(&p, &SolveOptions::default());
        assert!(r.converged(), "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
        assert!((r.objective - 2.0).abs() < 1e-4);
        assert!((r.equality_multipliers[0] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn kkt_residual_vanishes_at_the_projection() {
        let p = line_projection();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let r = kkt_residual(&p, &x, &DVector::from_vec(vec![-2.0]), &DVector::zeros(0));
        assert!(r < 1e-8);
        let y = DVector::from_vec(vec![0.3, 2.2]);
        assert!(kkt_residual(&p, &y, &DVector::from_vec(vec![-2.0]), &DVector::zeros(0)) > 0.1);
    }

    #[test]
    fn inequality_becomes_active() {
        let p = Dense {
            n: 1,
            x0: vec![0.0],
            lb: vec![f64::NEG_INFINITY],
            ub: vec![f64::INFINITY],
            f: |x| (x[0] - 3.0).powi(2),
            c: none,
            g: |x| vec![1.0 - x[0]],
            n_eq: 0,
            n_in: 1,
        };
        let r = solve(&p, &SolveOptions::default());
        assert!(r.converged(), "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-5, "{}", r.x[0]);
        assert!((r.inequality_multipliers[0] - 4.0).abs() < 1e-3);
    }

    #[test]
    fn simple_bound_becomes_active() {
        let p = Dense {
            n: 1,
            x0: vec![5.0],
            lb: vec![f64::NEG_INFINITY],
            ub: vec![1.0],
            f: |x| (x[0] - 3.0).powi(2),
            c: none,
            g: none,
            n_eq: 0,
            n_in: 0,
        };
        let r = solve(&p, &SolveOptions::default());
        assert!(r.converged());
        assert_eq!(r.x[0], 1.0);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let p = Dense {
            n: 2,
            x0: vec![-1.2, 1.0],
            lb: vec![f64::NEG_INFINITY; 2],
            ub: vec![f64::INFINITY; 2],
            f: |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            c: none,
            g: none,
            n_eq: 0,
            n_in: 0,
        };
        let r = solve(&p, &SolveOptions::default());
        assert!(r.converged(), "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{}", r.x);
    }

    #[test]
    fn nan_callbacks_report_numerical_failure() {
        let p = Dense {
            n: 1,
            x0: vec![0.0],
            lb: vec![f64::NEG_INFINITY],
            ub: vec![f64::INFINITY],
            f: |_| f64::NAN,
            c: none,
            g: none,
            n_eq: 0,
            n_in: 0,
        };
        assert_eq!(solve(&p, &SolveOptions::default()).status, SolveStatus::NumericalFailure);
    }

    #[test]
    fn iteration_cap_reports_max_iter() {
        let p = line_projection();
        let opts = SolveOptions {
            max_outer_iterations: 1,
            opt_tol: 1e-14,
            feas_tol: 1e-14,
            ..SolveOptions::default()
        };
        let r = solve(&p, &opts);
        assert_eq!(r.status, SolveStatus::MaxIterations);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn penalty_is_monotone_and_capped() {
        // infeasible: x = 1 and x = 2
        let p = Dense {
            n: 1,
            x0: vec![0.0],
            lb: vec![f64::NEG_INFINITY],
            ub: vec![f64::INFINITY],
            f: |x| x[0] * x[0],
            c: |x| vec![x[0] - 1.0, x[0] - 2.0],
            g: none,
            n_eq: 2,
            n_in: 0,
        };
        let r = solve(&p, &SolveOptions::default());
        assert_ne!(r.status, SolveStatus::Converged);
        for w in r.history.windows(2) {
            assert!(w[1].penalty >= w[0].penalty);
        }
        assert!(r.history.iter().all(|h| h.penalty <= 1e8));
    }
}
