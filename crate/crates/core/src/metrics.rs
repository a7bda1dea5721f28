//! Optimality measures: the critical distance
//! `d(x) = dist(∇H(x) + ∇r2(x), ∂(G + r1)(x))` and the gap function
//! `gap(x) = max_y (G+r1)(x) - (G+r1)(y) - ⟨c, x - y⟩` for a linearization `c`.

use std::fmt;
use std::sync::Arc;

use crate::error::{DcError, Result};
use crate::linalg::{axpy, dot};
use crate::problem::DcProgram;

pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// How to project onto `∂(G + r1)(x)`.
#[derive(Clone)]
pub enum SubdifferentialModel {
    /// `G + r1 = q‖x‖²/2 + λ‖x‖₁` (`q = 0` allowed).
    QuadraticPlusL1 { quad_coeff: f64, l1_weight: f64 },
    /// `G + r1 = q‖W‖²/2 + λ Σ_j ‖W_j‖` over rows of a class-major matrix.
    QuadraticPlusGroupL2 {
        quad_coeff: f64,
        group_weight: f64,
        rows: usize,
        cols: usize,
    },
    /// `r1 ≡ 0` and `G` differentiable: the subdifferential is `{∇G(x)}`.
    SmoothOnly,
    /// `(x, v) -> dist(v, ∂(G + r1)(x))`.
    Custom(DistanceFn),
}

impl fmt::Debug for SubdifferentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubdifferentialModel::QuadraticPlusL1 {
                quad_coeff,
                l1_weight,
            } => f
                .debug_struct("QuadraticPlusL1")
                .field("quad_coeff", quad_coeff)
                .field("l1_weight", l1_weight)
                .finish(),
            SubdifferentialModel::QuadraticPlusGroupL2 {
                quad_coeff,
                group_weight,
                rows,
                cols,
            } => f
                .debug_struct("QuadraticPlusGroupL2")
                .field("quad_coeff", quad_coeff)
                .field("group_weight", group_weight)
                .field("rows", rows)
                .field("cols", cols)
                .finish(),
            SubdifferentialModel::SmoothOnly => f.write_str("SmoothOnly"),
            SubdifferentialModel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl SubdifferentialModel {
    pub(crate) fn shifted(&self, eta: f64) -> SubdifferentialModel {
        match self {
            SubdifferentialModel::QuadraticPlusL1 {
                quad_coeff,
                l1_weight,
            } => SubdifferentialModel::QuadraticPlusL1 {
                quad_coeff: quad_coeff + eta,
                l1_weight: *l1_weight,
            },
            SubdifferentialModel::QuadraticPlusGroupL2 {
                quad_coeff,
                group_weight,
                rows,
                cols,
            } => SubdifferentialModel::QuadraticPlusGroupL2 {
                quad_coeff: quad_coeff + eta,
                group_weight: *group_weight,
                rows: *rows,
                cols: *cols,
            },
            // the program's ∇G already carries the shift
            SubdifferentialModel::SmoothOnly => SubdifferentialModel::SmoothOnly,
            SubdifferentialModel::Custom(inner) => {
                let inner = inner.clone();
                SubdifferentialModel::Custom(Arc::new(move |x, v| {
                    let mut w = v.to_vec();
                    axpy(-eta, x, &mut w);
                    inner(x, &w)
                }))
            }
        }
    }

    /// Euclidean distance from `v` to `∂(G + r1)(x)`.
    pub fn distance(&self, prog: &DcProgram, x: &[f64], v: &[f64]) -> f64 {
        match self {
            SubdifferentialModel::QuadraticPlusL1 {
                quad_coeff,
                l1_weight,
            } => x
                .iter()
                .zip(v)
                .map(|(&xj, &vj)| {
                    if xj != 0.0 {
                        let r = vj - quad_coeff * xj - l1_weight * xj.signum();
                        r * r
                    } else {
                        let r = (vj.abs() - l1_weight).max(0.0);
                        r * r
                    }
                })
                .sum::<f64>()
                .sqrt(),
            SubdifferentialModel::QuadraticPlusGroupL2 {
                quad_coeff,
                group_weight,
                rows,
                cols,
            } => {
                let mut total = 0.0;
                for j in 0..*rows {
                    let row_norm = (0..*cols).map(|k| x[k * rows + j].powi(2)).sum::<f64>().sqrt();
                    if row_norm > 0.0 {
                        for k in 0..*cols {
                            let idx = k * rows + j;
                            let r = v[idx] - quad_coeff * x[idx] - group_weight * x[idx] / row_norm;
                            total += r * r;
                        }
                    } else {
                        let v_norm = (0..*cols).map(|k| v[k * rows + j].powi(2)).sum::<f64>().sqrt();
                        let r = (v_norm - group_weight).max(0.0);
                        total += r * r;
                    }
                }
                total.sqrt()
            }
            SubdifferentialModel::SmoothOnly => {
                let mut g = vec![0.0; x.len()];
                prog.grad_g(x, &mut g);
                crate::linalg::dist(&g, v)
            }
            SubdifferentialModel::Custom(f) => f(x, v),
        }
    }
}

/// `∇H(x) + ∇r2(x)` using the exact gradient over the stored components.
pub fn concave_linearization(prog: &DcProgram, x: &[f64]) -> Result<Vec<f64>> {
    prog.check_dim(x)?;
    let mut v = prog.grad_h_full(x)?;
    let mut w = vec![0.0; x.len()];
    prog.subgrad_r2(x, &mut w);
    axpy(1.0, &w, &mut v);
    Ok(v)
}

/// Critical distance with the program's own subdifferential model.
pub fn critical_distance(prog: &DcProgram, x: &[f64]) -> Result<f64> {
    let model = prog
        .subdifferential()
        .ok_or(DcError::MissingSubdifferentialModel)?;
    critical_distance_with(prog, model, x)
}

pub fn critical_distance_with(prog: &DcProgram, model: &SubdifferentialModel, x: &[f64]) -> Result<f64> {
    let v = concave_linearization(prog, x)?;
    Ok(model.distance(prog, x, &v))
}

/// Critical distance for a caller-supplied `∇H(x)` (e.g. an online snapshot estimate).
pub fn critical_distance_given(prog: &DcProgram, x: &[f64], grad_h: &[f64]) -> Result<f64> {
    let model = prog
        .subdifferential()
        .ok_or(DcError::MissingSubdifferentialModel)?;
    let mut v = grad_h.to_vec();
    let mut w = vec![0.0; x.len()];
    prog.subgrad_r2(x, &mut w);
    axpy(1.0, &w, &mut v);
    Ok(model.distance(prog, x, &v))
}

/// `gap(x_t) = (G+r1)(x_t) - (G+r1)(x*) - ⟨c, x_t - x*⟩` with
/// `x* = argmin (G+r1) - ⟨c, ·⟩`.
pub fn gap_function(prog: &DcProgram, x_t: &[f64], linearization: &[f64]) -> Result<f64> {
    prog.check_dim(x_t)?;
    let sol = prog
        .solve_subproblem(linearization)
        .map_err(|e| match e {
            e @ DcError::UnboundedSubproblem { .. } => DcError::GapUndefined(Box::new(e)),
            other => other,
        })?;
    let x_star = sol.x;
    let diff: Vec<f64> = x_t.iter().zip(&x_star).map(|(a, b)| a - b).collect();
    Ok(prog.value_g_plus_r1(x_t) - prog.value_g_plus_r1(&x_star) - dot(linearization, &diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::abs_value_program;

    #[test]
    fn abs_value_distance_contrast() {
        let prog = abs_value_program();
        assert_eq!(critical_distance(&prog, &[0.0]).unwrap(), 0.0);
        for x in [1e-6, -1e-6, 0.1, -0.1, 3.0, -3.0] {
            assert_eq!(critical_distance(&prog, &[x]).unwrap(), 1.0);
            assert_eq!(gap_function(&prog, &[x], &[0.0]).unwrap(), x.abs());
        }
    }

    #[test]
    fn gap_undefined_when_unbounded() {
        let prog = abs_value_program();
        assert!(matches!(
            gap_function(&prog, &[0.5], &[1.5]),
            Err(DcError::GapUndefined(_))
        ));
    }

    #[test]
    fn missing_model_errors() {
        let data = std::sync::Arc::new(crate::data::Dataset::default());
        let prog = DcProgram::builder(1).components(data).build();
        assert!(matches!(
            critical_distance(&prog, &[0.0]),
            Err(DcError::MissingSubdifferentialModel)
        ));
    }

    #[test]
    fn group_distance_zero_row_uses_ball() {
        let model = SubdifferentialModel::QuadraticPlusGroupL2 {
            quad_coeff: 1.0,
            group_weight: 1.0,
            rows: 1,
            cols: 2,
        };
        let prog = abs_value_program();
        let d = model.distance(&prog, &[0.0, 0.0], &[3.0, 4.0]);
        assert!((d - 4.0).abs() < 1e-15);
        assert_eq!(model.distance(&prog, &[0.0, 0.0], &[0.6, 0.8]), 0.0);
    }
}
