//! DC programs of the form `F(x) = G(x) - H(x) + r1(x) - r2(x)` with
//! `H = (1/N) Σ h_i` (finite sum) or `H = E_ζ h(·; ζ)` (online).
//!
//! All oracles are pure and the program is immutable once built, so one
//! instance can back any number of concurrent runs.

use std::fmt;
use std::sync::Arc;

use crate::data::{Dataset, SparseExample};
use crate::error::{invalid, DcError, Result};
use crate::linalg::{axpy, norm_sq};
use crate::metrics::SubdifferentialModel;
use crate::subproblem::{GradFn, SubproblemSolution, SubproblemSpec, ValueFn};

/// One convex, differentiable component `h(·; ζ)` of `H`, evaluated on a sample.
pub trait Component: Send + Sync {
    fn value(&self, sample: &SparseExample, x: &[f64]) -> f64;
    /// `out += scale * ∇h(x; ζ)`
    fn add_grad(&self, sample: &SparseExample, x: &[f64], scale: f64, out: &mut [f64]);
}

/// Constants that drive the parameter rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Strong convexity of `G + r1`.
    pub rho_g_r1: f64,
    /// Strong convexity of `H + r2`.
    pub rho_h_r2: f64,
    /// Average smoothness of `H`: `E_i‖∇h_i(x) - ∇h_i(y)‖² ≤ L²‖x - y‖²`.
    pub l_avg: f64,
    pub l_r2: f64,
    pub sigma_sq: Option<f64>,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            rho_g_r1: 0.0,
            rho_h_r2: 0.0,
            l_avg: 1.0,
            l_r2: 0.0,
            sigma_sq: None,
        }
    }
}

impl Constants {
    pub fn rho(&self) -> f64 {
        self.rho_g_r1 + self.rho_h_r2
    }
}

fn zero_value() -> ValueFn {
    Arc::new(|_| 0.0)
}

fn zero_grad() -> GradFn {
    Arc::new(|_, out| out.iter_mut().for_each(|o| *o = 0.0))
}

struct ZeroComponent;

impl Component for ZeroComponent {
    fn value(&self, _: &SparseExample, _: &[f64]) -> f64 {
        0.0
    }
    fn add_grad(&self, _: &SparseExample, _: &[f64], _: f64, _: &mut [f64]) {}
}

#[derive(Clone)]
pub struct DcProgram {
    name: String,
    dim: usize,
    g_value: ValueFn,
    g_grad: GradFn,
    component: Arc<dyn Component>,
    components: Option<Arc<Dataset>>,
    r1_value: ValueFn,
    r2_value: ValueFn,
    r2_grad: GradFn,
    subproblem: SubproblemSpec,
    subdifferential: Option<SubdifferentialModel>,
    constants: Constants,
    rho_shift: f64,
}

impl fmt::Debug for DcProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DcProgram")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("n_components", &self.n_components())
            .field("subproblem", &self.subproblem)
            .field("constants", &self.constants)
            .field("rho_shift", &self.rho_shift)
            .finish_non_exhaustive()
    }
}

/// Builder for [`DcProgram`]. Every oracle defaults to the zero function.
pub struct DcProgramBuilder {
    program: DcProgram,
}

impl DcProgramBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.program.name = name.into();
        self
    }

    pub fn g(mut self, value: ValueFn, grad: GradFn) -> Self {
        self.program.g_value = value;
        self.program.g_grad = grad;
        self
    }

    pub fn component(mut self, component: Arc<dyn Component>) -> Self {
        self.program.component = component;
        self
    }

    /// The finite component set `h_i = h(·; ζ_i)`, or an evaluation snapshot
    /// in the online setting.
    pub fn components(mut self, data: Arc<Dataset>) -> Self {
        self.program.components = Some(data);
        self
    }

    pub fn r1(mut self, value: ValueFn) -> Self {
        self.program.r1_value = value;
        self
    }

    pub fn r2(mut self, value: ValueFn, grad: GradFn) -> Self {
        self.program.r2_value = value;
        self.program.r2_grad = grad;
        self
    }

    pub fn subproblem(mut self, spec: SubproblemSpec) -> Self {
        self.program.subproblem = spec;
        self
    }

    pub fn subdifferential(mut self, model: SubdifferentialModel) -> Self {
        self.program.subdifferential = Some(model);
        self
    }

    pub fn constants(mut self, constants: Constants) -> Self {
        self.program.constants = constants;
        self
    }

    pub fn build(self) -> DcProgram {
        self.program
    }
}

impl DcProgram {
    pub fn builder(dim: usize) -> DcProgramBuilder {
        DcProgramBuilder {
            program: DcProgram {
                name: String::from("custom"),
                dim,
                g_value: zero_value(),
                g_grad: zero_grad(),
                component: Arc::new(ZeroComponent),
                components: None,
                r1_value: zero_value(),
                r2_value: zero_value(),
                r2_grad: zero_grad(),
                subproblem: SubproblemSpec::L1Only { weight: 0.0 },
                subdifferential: None,
                constants: Constants::default(),
                rho_shift: 0.0,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N` when the program carries a component set.
    pub fn n_components(&self) -> Option<usize> {
        self.components.as_ref().map(|d| d.len())
    }

    pub fn dataset(&self) -> Option<&Arc<Dataset>> {
        self.components.as_ref()
    }

    /// Replace the component set (e.g. attach an online evaluation snapshot).
    pub fn with_components(&self, data: Option<Arc<Dataset>>) -> DcProgram {
        DcProgram {
            components: data,
            ..self.clone()
        }
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn rho_shift(&self) -> f64 {
        self.rho_shift
    }

    pub fn subproblem_spec(&self) -> &SubproblemSpec {
        &self.subproblem
    }

    /// Sets the tolerance of an iterative subproblem solver; closed forms are unaffected.
    pub fn with_subproblem_tolerance(&self, tolerance: f64) -> DcProgram {
        let mut out = self.clone();
        if let SubproblemSpec::Generic(g) = &mut out.subproblem {
            g.tolerance = tolerance;
        }
        out
    }

    pub fn subdifferential(&self) -> Option<&SubdifferentialModel> {
        self.subdifferential.as_ref()
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(DcError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn shift_value(&self, x: &[f64]) -> f64 {
        if self.rho_shift == 0.0 {
            0.0
        } else {
            0.5 * self.rho_shift * norm_sq(x)
        }
    }

    pub fn value_g(&self, x: &[f64]) -> f64 {
        (self.g_value)(x) + self.shift_value(x)
    }

    pub fn grad_g(&self, x: &[f64], out: &mut [f64]) {
        (self.g_grad)(x, out);
        if self.rho_shift != 0.0 {
            axpy(self.rho_shift, x, out);
        }
    }

    pub fn value_r1(&self, x: &[f64]) -> f64 {
        (self.r1_value)(x)
    }

    pub fn value_r2(&self, x: &[f64]) -> f64 {
        (self.r2_value)(x)
    }

    /// Writes a subgradient `w ∈ ∂r2(x)` (the gradient for smooth `r2`).
    pub fn subgrad_r2(&self, x: &[f64], out: &mut [f64]) {
        (self.r2_grad)(x, out);
    }

    pub fn value_g_plus_r1(&self, x: &[f64]) -> f64 {
        self.value_g(x) + self.value_r1(x)
    }

    /// `h(x; ζ)` including the shift.
    pub fn value_sample(&self, sample: &SparseExample, x: &[f64]) -> f64 {
        self.component.value(sample, x) + self.shift_value(x)
    }

    /// `out += ∇h(x; ζ)` without the shift term; callers add `η x` once per
    /// averaged batch via [`DcProgram::finish_mean`].
    #[inline]
    pub(crate) fn add_raw_grad(&self, sample: &SparseExample, x: &[f64], out: &mut [f64]) {
        self.component.add_grad(sample, x, 1.0, out);
    }

    #[inline]
    pub(crate) fn add_raw_grad_scaled(&self, sample: &SparseExample, x: &[f64], scale: f64, out: &mut [f64]) {
        self.component.add_grad(sample, x, scale, out);
    }

    /// Turns an accumulated raw sum of `count` component gradients into the
    /// mean gradient of the shifted components.
    pub(crate) fn finish_mean(&self, sum: &mut [f64], count: usize, x: &[f64]) {
        let inv = 1.0 / count as f64;
        for v in sum.iter_mut() {
            *v *= inv;
        }
        if self.rho_shift != 0.0 {
            axpy(self.rho_shift, x, sum);
        }
    }

    fn component_set(&self) -> Result<&Dataset> {
        self.components
            .as_deref()
            .ok_or(DcError::ExactObjectiveUnavailable)
    }

    /// `h_i(x)` for the `i`-th stored component.
    pub fn value_h(&self, i: usize, x: &[f64]) -> Result<f64> {
        let data = self.component_set()?;
        Ok(self.value_sample(&data.examples[i], x))
    }

    /// `∇h_i(x)` for the `i`-th stored component.
    pub fn grad_h(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let data = self.component_set()?;
        let mut out = vec![0.0; self.dim];
        self.add_raw_grad(&data.examples[i], x, &mut out);
        if self.rho_shift != 0.0 {
            axpy(self.rho_shift, x, &mut out);
        }
        Ok(out)
    }

    /// Exact `H(x)` over the stored components.
    pub fn value_h_full(&self, x: &[f64]) -> Result<f64> {
        let data = self.component_set()?;
        if data.is_empty() {
            return Ok(self.shift_value(x));
        }
        let sum: f64 = data.examples.iter().map(|e| self.component.value(e, x)).sum();
        Ok(sum / data.len() as f64 + self.shift_value(x))
    }

    /// Exact `∇H(x)`, accumulated in index order.
    pub fn grad_h_full(&self, x: &[f64]) -> Result<Vec<f64>> {
        let data = self.component_set()?;
        let mut out = vec![0.0; self.dim];
        if data.is_empty() {
            axpy(self.rho_shift, x, &mut out);
            return Ok(out);
        }
        for e in &data.examples {
            self.add_raw_grad(e, x, &mut out);
        }
        self.finish_mean(&mut out, data.len(), x);
        Ok(out)
    }

    /// `F(x) = G(x) - H(x) + r1(x) - r2(x)` with `H` averaged over all stored components.
    pub fn evaluate_f(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let h = self.value_h_full(x)?;
        let f = self.value_g(x) - h + self.value_r1(x) - self.value_r2(x);
        if !f.is_finite() {
            return Err(DcError::NonFinite("objective"));
        }
        Ok(f)
    }

    /// `argmin_x G(x) + r1(x) - ⟨c, x⟩`.
    pub fn solve_subproblem(&self, c: &[f64]) -> Result<SubproblemSolution> {
        self.check_dim(c)?;
        self.subproblem.solve(c)
    }

    /// Adds `η‖·‖²/2` to both DC components. `F` is unchanged; both strong
    /// convexity constants grow by `η`. The stored `L_avg` is kept as is.
    pub fn apply_rho_shift(&self, eta: f64) -> Result<DcProgram> {
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(invalid("eta", format!("{eta} must be a finite value >= 0")));
        }
        let mut shifted = self.clone();
        if eta == 0.0 {
            return Ok(shifted);
        }
        shifted.rho_shift += eta;
        shifted.constants.rho_g_r1 += eta;
        shifted.constants.rho_h_r2 += eta;
        shifted.subproblem = self.subproblem.shifted(eta);
        shifted.subdifferential = self.subdifferential.as_ref().map(|m| m.shifted(eta));
        Ok(shifted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{abs_value_program, diagonal_quadratic_program};

    #[test]
    fn abs_value_objective() {
        let prog = abs_value_program();
        assert_eq!(prog.evaluate_f(&[0.5]).unwrap(), 0.5);
        assert_eq!(prog.evaluate_f(&[-2.0]).unwrap(), 2.0);
    }

    #[test]
    fn zero_program() {
        let data = Arc::new(Dataset::new(vec![SparseExample::new(vec![], vec![], 1.0)], 0));
        let prog = DcProgram::builder(3).components(data).build();
        assert_eq!(prog.evaluate_f(&[1.0, -2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_and_availability_errors() {
        let prog = abs_value_program();
        assert!(matches!(
            prog.evaluate_f(&[1.0, 2.0]),
            Err(DcError::DimensionMismatch { .. })
        ));
        let online = prog.with_components(None);
        assert!(matches!(
            online.evaluate_f(&[1.0]),
            Err(DcError::ExactObjectiveUnavailable)
        ));
    }

    #[test]
    fn zero_shift_is_identity() {
        let prog = diagonal_quadratic_program(&[vec![1.0, 2.0], vec![0.5, 0.5]], &[vec![1.0, 0.0], vec![0.0, -1.0]], 3.0, 0.1);
        let same = prog.apply_rho_shift(0.0).unwrap();
        let x = [0.3, -0.7];
        assert_eq!(prog.evaluate_f(&x).unwrap(), same.evaluate_f(&x).unwrap());
        assert_eq!(prog.grad_h_full(&x).unwrap(), same.grad_h_full(&x).unwrap());
        assert_eq!(prog.value_g(&x), same.value_g(&x));
    }

    #[test]
    fn shift_moves_gradients_by_eta_x() {
        let prog = diagonal_quadratic_program(&[vec![1.0, 2.0]], &[vec![1.0, 0.0]], 3.0, 0.1);
        let shifted = prog.apply_rho_shift(2.0).unwrap();
        let x = [1.0, 0.0];
        let mut a = vec![0.0; 2];
        let mut b = vec![0.0; 2];
        prog.grad_g(&x, &mut a);
        shifted.grad_g(&x, &mut b);
        assert_eq!([b[0] - a[0], b[1] - a[1]], [2.0, 0.0]);
        let ha = prog.grad_h(0, &x).unwrap();
        let hb = shifted.grad_h(0, &x).unwrap();
        assert_eq!([hb[0] - ha[0], hb[1] - ha[1]], [2.0, 0.0]);
        assert_eq!(shifted.constants().rho_g_r1, prog.constants().rho_g_r1 + 2.0);
        assert_eq!(shifted.constants().rho_h_r2, prog.constants().rho_h_r2 + 2.0);
    }

    #[test]
    fn negative_shift_rejected() {
        assert!(abs_value_program().apply_rho_shift(-1.0).is_err());
    }
}
