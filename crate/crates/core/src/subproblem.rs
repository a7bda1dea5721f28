//! The convex subproblem `argmin_x G(x) + r1(x) - ⟨c, x⟩` solved at every
//! DCA iteration.
//!
//! Closed forms cover the quadratic-plus-ℓ1 and quadratic-plus-row-group-ℓ2
//! cases used by the logistic problems; anything else goes through a
//! proximal-gradient loop with a fixed-point residual certificate.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, DcError, Result};
use crate::linalg::{norm, soft_threshold};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `prox(v, step, out)` writes `argmin_u step * r1(u) + ‖u - v‖²/2`.
pub type ProxFn = Arc<dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync>;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Smooth strongly convex `G` plus a prox-friendly `r1`.
#[derive(Clone)]
pub struct GenericStronglyConvex {
    pub smooth_value: ValueFn,
    pub smooth_grad: GradFn,
    pub prox: ProxFn,
    /// Strong convexity modulus of `G + r1`.
    pub mu: f64,
    /// Lipschitz constant of `∇G`; the step is `1 / lipschitz`.
    pub lipschitz: f64,
    /// Relative fixed-point tolerance.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl fmt::Debug for GenericStronglyConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericStronglyConvex")
            .field("mu", &self.mu)
            .field("lipschitz", &self.lipschitz)
            .field("tolerance", &self.tolerance)
            .field("max_iter", &self.max_iter)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum SubproblemSpec {
    /// `q‖x‖²/2 + λ‖x‖₁`
    QuadraticL1 { quad_coeff: f64, l1_weight: f64 },
    /// `q‖W‖²/2 + λ Σ_j ‖W_j‖` over the rows of a class-major `rows × cols` matrix.
    QuadraticGroupL2 {
        quad_coeff: f64,
        group_weight: f64,
        rows: usize,
        cols: usize,
    },
    /// `w‖x‖₁` with no quadratic term; bounded only when `‖c‖∞ ≤ w`.
    L1Only { weight: f64 },
    Generic(GenericStronglyConvex),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    /// Fixed-point residual of the iterative path; zero for closed forms.
    pub residual: f64,
}

impl SubproblemSpec {
    pub fn solve(&self, c: &[f64]) -> Result<SubproblemSolution> {
        let x = match self {
            SubproblemSpec::QuadraticL1 {
                quad_coeff,
                l1_weight,
            } => solve_quadratic_l1(*quad_coeff, *l1_weight, c)?,
            SubproblemSpec::QuadraticGroupL2 {
                quad_coeff,
                group_weight,
                rows,
                cols,
            } => solve_quadratic_group_l2(*quad_coeff, *group_weight, *rows, *cols, c)?,
            SubproblemSpec::L1Only { weight } => solve_l1_only(*weight, c)?,
            SubproblemSpec::Generic(g) => return solve_generic(g, c),
        };
        Ok(SubproblemSolution { x, residual: 0.0 })
    }

    /// Strong convexity modulus of `G + r1`.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            SubproblemSpec::QuadraticL1 { quad_coeff, .. }
            | SubproblemSpec::QuadraticGroupL2 { quad_coeff, .. } => *quad_coeff,
            SubproblemSpec::L1Only { .. } => 0.0,
            SubproblemSpec::Generic(g) => g.mu,
        }
    }

    /// The same subproblem after adding `η‖x‖²/2` to `G`.
    pub fn shifted(&self, eta: f64) -> SubproblemSpec {
        if eta == 0.0 {
            return self.clone();
        }
        match self {
            SubproblemSpec::QuadraticL1 {
                quad_coeff,
                l1_weight,
            } => SubproblemSpec::QuadraticL1 {
                quad_coeff: quad_coeff + eta,
                l1_weight: *l1_weight,
            },
            SubproblemSpec::QuadraticGroupL2 {
                quad_coeff,
                group_weight,
                rows,
                cols,
            } => SubproblemSpec::QuadraticGroupL2 {
                quad_coeff: quad_coeff + eta,
                group_weight: *group_weight,
                rows: *rows,
                cols: *cols,
            },
            SubproblemSpec::L1Only { weight } => SubproblemSpec::QuadraticL1 {
                quad_coeff: eta,
                l1_weight: *weight,
            },
            SubproblemSpec::Generic(g) => {
                let value = g.smooth_value.clone();
                let grad = g.smooth_grad.clone();
                SubproblemSpec::Generic(GenericStronglyConvex {
                    smooth_value: Arc::new(move |x| value(x) + 0.5 * eta * crate::linalg::norm_sq(x)),
                    smooth_grad: Arc::new(move |x, out| {
                        grad(x, out);
                        crate::linalg::axpy(eta, x, out);
                    }),
                    prox: g.prox.clone(),
                    mu: g.mu + eta,
                    lipschitz: g.lipschitz + eta,
                    tolerance: g.tolerance,
                    max_iter: g.max_iter,
                })
            }
        }
    }
}

/// Exact minimizer of `q‖x‖²/2 + λ‖x‖₁ - ⟨c, x⟩`: `x_j = soft(c_j, λ) / q`.
pub fn solve_quadratic_l1(quad_coeff: f64, l1_weight: f64, c: &[f64]) -> Result<Vec<f64>> {
    if !(quad_coeff > 0.0) {
        return Err(invalid("quad_coeff", format!("{quad_coeff} must be > 0")));
    }
    if !(l1_weight >= 0.0) {
        return Err(invalid("l1_weight", format!("{l1_weight} must be >= 0")));
    }
    Ok(c.iter()
        .map(|&cj| soft_threshold(cj, l1_weight) / quad_coeff)
        .collect())
}

/// Row-wise block soft-thresholding for a class-major `rows × cols` matrix:
/// `W_j = max(0, 1 - λ / ‖C_j‖) C_j / q`.
pub fn solve_quadratic_group_l2(
    quad_coeff: f64,
    group_weight: f64,
    rows: usize,
    cols: usize,
    c: &[f64],
) -> Result<Vec<f64>> {
    if !(quad_coeff > 0.0) {
        return Err(invalid("quad_coeff", format!("{quad_coeff} must be > 0")));
    }
    if !(group_weight >= 0.0) {
        return Err(invalid("group_weight", format!("{group_weight} must be >= 0")));
    }
    if c.len() != rows * cols {
        return Err(DcError::DimensionMismatch {
            expected: rows * cols,
            got: c.len(),
        });
    }
    let mut x = vec![0.0; c.len()];
    for j in 0..rows {
        let row_norm = (0..cols).map(|k| c[k * rows + j].powi(2)).sum::<f64>().sqrt();
        if row_norm <= group_weight {
            continue;
        }
        let factor = (1.0 - group_weight / row_norm) / quad_coeff;
        for k in 0..cols {
            x[k * rows + j] = factor * c[k * rows + j];
        }
    }
    Ok(x)
}

/// Minimizer of `w‖x‖₁ - ⟨c, x⟩`. Ties on the facet `|c_j| = w` resolve to 0.
pub fn solve_l1_only(weight: f64, c: &[f64]) -> Result<Vec<f64>> {
    for &cj in c {
        if cj.abs() > weight {
            return Err(DcError::UnboundedSubproblem {
                magnitude: cj.abs(),
                weight,
            });
        }
    }
    Ok(vec![0.0; c.len()])
}

/// Proximal-gradient iteration until `‖x - prox(x - s(∇G(x) - c))‖ ≤ tol · max(1, ‖x‖)`.
pub fn solve_generic(spec: &GenericStronglyConvex, c: &[f64]) -> Result<SubproblemSolution> {
    if !(spec.mu > 0.0) {
        return Err(invalid("mu", "generic subproblem needs strong convexity > 0"));
    }
    if !(spec.lipschitz > 0.0) {
        return Err(invalid("lipschitz", "must be > 0"));
    }
    let n = c.len();
    let step = 1.0 / spec.lipschitz;
    let mut x = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..spec.max_iter {
        (spec.smooth_grad)(&x, &mut grad);
        for i in 0..n {
            trial[i] = x[i] - step * (grad[i] - c[i]);
        }
        (spec.prox)(&trial, step, &mut next);
        residual = crate::linalg::dist(&x, &next);
        std::mem::swap(&mut x, &mut next);
        if !residual.is_finite() {
            return Err(DcError::NonFinite("generic subproblem"));
        }
        if residual <= spec.tolerance * norm(&x).max(1.0) {
            return Ok(SubproblemSolution { x, residual });
        }
    }
    Err(DcError::SubproblemNotConverged {
        iterations: spec.max_iter,
        residual,
    })
}

/// Prox of `weight · ‖·‖₁`.
pub fn l1_prox(weight: f64) -> ProxFn {
    Arc::new(move |v, step, out| {
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = soft_threshold(vi, step * weight);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_generic(q: f64, l1: f64) -> GenericStronglyConvex {
        GenericStronglyConvex {
            smooth_value: Arc::new(move |x| 0.5 * q * crate::linalg::norm_sq(x)),
            smooth_grad: Arc::new(move |x, out| {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = q * xi;
                }
            }),
            prox: l1_prox(l1),
            mu: q,
            lipschitz: q,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    #[test]
    fn unregularized_is_scaled_c() {
        let x = solve_quadratic_l1(4.0, 0.0, &[2.0, -8.0]).unwrap();
        assert_eq!(x, vec![0.5, -2.0]);
    }

    #[test]
    fn full_shrinkage() {
        let x = solve_quadratic_l1(3.0, 1.0, &[0.5, -1.0, 0.99]).unwrap();
        assert_eq!(x, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn worked_example() {
        let x = solve_quadratic_l1(2.0, 1.0, &[3.0, -0.5]).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_quadratic() {
        assert!(solve_quadratic_l1(0.0, 1.0, &[1.0]).is_err());
        assert!(solve_quadratic_group_l2(-1.0, 1.0, 1, 1, &[1.0]).is_err());
    }

    #[test]
    fn group_threshold_row_layout() {
        // 2 rows x 2 cols, class-major: row 0 = (c[0], c[2]), row 1 = (c[1], c[3])
        let c = [3.0, 0.1, 4.0, 0.1];
        let x = solve_quadratic_group_l2(1.0, 1.0, 2, 2, &c).unwrap();
        assert!((x[0] - 3.0 * 0.8).abs() < 1e-15);
        assert!((x[2] - 4.0 * 0.8).abs() < 1e-15);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn l1_only_facets() {
        assert_eq!(solve_l1_only(1.0, &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(solve_l1_only(1.0, &[-0.3]).unwrap(), vec![0.0]);
        assert!(matches!(
            solve_l1_only(1.0, &[1.5]),
            Err(DcError::UnboundedSubproblem { .. })
        ));
    }

    #[test]
    fn generic_matches_closed_form() {
        let spec = quadratic_generic(2.5, 0.7);
        let c = [3.0, -0.2, -1.9, 0.7, 0.0];
        let closed = solve_quadratic_l1(2.5, 0.7, &c).unwrap();
        let sol = solve_generic(&spec, &c).unwrap();
        for (a, b) in sol.x.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn generic_stationary_input() {
        let spec = quadratic_generic(1.5, 0.0);
        let xbar = [0.3, -1.0, 2.0];
        let c: Vec<f64> = xbar.iter().map(|v| 1.5 * v).collect();
        let sol = solve_generic(&spec, &c).unwrap();
        for (a, b) in sol.x.iter().zip(&xbar) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn generic_iteration_cap() {
        let mut spec = quadratic_generic(1e-3, 0.0);
        spec.lipschitz = 1.0;
        spec.max_iter = 5;
        let err = solve_generic(&spec, &[1.0]).unwrap_err();
        assert!(matches!(err, DcError::SubproblemNotConverged { iterations: 5, .. }));
    }

    #[test]
    fn shifting_l1_only_gives_quadratic() {
        let s = SubproblemSpec::L1Only { weight: 1.0 }.shifted(2.0);
        let x = s.solve(&[3.0]).unwrap().x;
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn shifted_generic_matches_shifted_closed_form() {
        let s = SubproblemSpec::Generic(quadratic_generic(1.0, 0.3)).shifted(0.5);
        let c = [1.0, -2.0, 0.1];
        let a = s.solve(&c).unwrap().x;
        let b = solve_quadratic_l1(1.5, 0.3, &c).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}
