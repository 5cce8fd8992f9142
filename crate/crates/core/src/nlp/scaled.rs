//! Diagonal variable scaling `y = D z` around another problem.

use nalgebra::DVector;

use super::{NlpProblem, SparseMatrix};

/// Presents `inner` in scaled variables `z = D⁻¹ y`, with the objective
/// multiplied by `objective_scale`. Constraint values are unchanged.
pub struct ScaledProblem<'a> {
    pub inner: &'a dyn NlpProblem,
    pub scale: DVector<f64>,
    pub objective_scale: f64,
}

impl<'a> ScaledProblem<'a> {
    pub fn new(inner: &'a dyn NlpProblem, scale: DVector<f64>, objective_scale: f64) -> Self {
        assert_eq!(scale.len(), inner.num_variables());
        assert!(scale.iter().all(|s| *s > 0.0 && s.is_finite()));
        Self {
            inner,
            scale,
            objective_scale,
        }
    }

    pub fn to_inner(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_mul(&self.scale)
    }

    pub fn from_inner(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_div(&self.scale)
    }
}

impl NlpProblem for ScaledProblem<'_> {
    fn num_variables(&self) -> usize {
        self.inner.num_variables()
    }

    fn num_equalities(&self) -> usize {
        self.inner.num_equalities()
    }

    fn num_inequalities(&self) -> usize {
        self.inner.num_inequalities()
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let (lb, ub) = self.inner.bounds();
        (self.from_inner(&lb), self.from_inner(&ub))
    }

    fn initial_guess(&self) -> DVector<f64> {
        self.from_inner(&self.inner.initial_guess())
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        self.objective_scale * self.inner.objective(&self.to_inner(z))
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        self.objective_scale * self.inner.gradient(&self.to_inner(z)).component_mul(&self.scale)
    }

    fn objective_hessian(&self, z: &DVector<f64>) -> Option<SparseMatrix> {
        let mut h = self.inner.objective_hessian(&self.to_inner(z))?;
        h.scale_rows(&(self.objective_scale * &self.scale));
        h.scale_columns(&self.scale);
        Some(h)
    }

    fn equalities(&self, z: &DVector<f64>) -> DVector<f64> {
        self.inner.equalities(&self.to_inner(z))
    }

    fn equality_jacobian(&self, z: &DVector<f64>) -> SparseMatrix {
        let mut j = self.inner.equality_jacobian(&self.to_inner(z));
        j.scale_columns(&self.scale);
        j
    }

    fn inequalities(&self, z: &DVector<f64>) -> DVector<f64> {
        self.inner.inequalities(&self.to_inner(z))
    }

    fn inequality_jacobian(&self, z: &DVector<f64>) -> SparseMatrix {
        let mut j = self.inner.inequality_jacobian(&self.to_inner(z));
        j.scale_columns(&self.scale);
        j
    }

    fn equality_hessian(&self, z: &DVector<f64>, w: &DVector<f64>) -> Option<SparseMatrix> {
        let mut h = self.inner.equality_hessian(&self.to_inner(z), w)?;
        h.scale_rows(&self.scale);
        h.scale_columns(&self.scale);
        Some(h)
    }

    fn inequality_hessian(&self, z: &DVector<f64>, w: &DVector<f64>) -> Option<SparseMatrix> {
        let mut h = self.inner.inequality_hessian(&self.to_inner(z), w)?;
        h.scale_rows(&self.scale);
        h.scale_columns(&self.scale);
        Some(h)
    }
}
