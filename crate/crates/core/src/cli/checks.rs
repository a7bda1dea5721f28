//! Quick verification suites behind `dcpage check`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{finite_sum_parameters, run_dca_page, SolverConfig};
use crate::data::{generate_synthetic_binary, generate_synthetic_multiclass};
use crate::estimators::{GradientEstimator, PageEstimator, SampleSource};
use crate::linalg::dist_sq;
use crate::metrics::{critical_distance, gap_function};
use crate::problem::DcProgram;
use crate::problems::{
    abs_value_program, build_binary_dc, build_multiclass_dc, diagonal_quadratic_program, BinaryLogisticSpec,
    BinaryLogisticComponent, MultiClassLogisticComponent, MultiClassLogisticSpec,
};
use crate::subproblem::{solve_quadratic_group_l2, solve_quadratic_l1};

pub const SUITES: [&str; 5] = ["gradient-fd", "prox-oracle", "page-variance", "gap-example", "budget-identity"];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

pub fn run_suite(name: &str) -> Option<CheckReport> {
    Some(match name {
        "gradient-fd" => gradient_fd(),
        "prox-oracle" => prox_oracle(),
        "page-variance" => page_variance(),
        "gap-example" => gap_example(),
        "budget-identity" => budget_identity(),
        _ => return None,
    })
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|j| {
            y[j] = x[j] + h;
            let up = f(&y);
            y[j] = x[j] - h;
            let down = f(&y);
            y[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = crate::linalg::norm(a).max(crate::linalg::norm(b)).max(1e-12);
    dist_sq(a, b).sqrt() / scale
}

fn gradient_fd() -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (ds, _) = generate_synthetic_binary(30, 6, 0.7, 0.1, 1).expect("valid sizes");
    let bin = build_binary_dc(&BinaryLogisticSpec::finite(Arc::new(ds.clone()), 0.1, 5.0)).expect("valid");
    let (mc, _) = generate_synthetic_multiclass(30, 4, 3, 0.7, 0.1, 2).expect("valid sizes");
    let mspec = MultiClassLogisticSpec::finite(Arc::new(mc.clone()), 0.1, 5.0).expect("labels");
    let comp = MultiClassLogisticComponent {
        smoothness: 1.0,
        features: 4,
        classes: mspec.classes,
    };
    let multi = build_multiclass_dc(&mspec).expect("valid");
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let mut w: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        w[k % 6] = 0.0;
        let e = &ds.examples[k % ds.len()];
        let mut g = vec![0.0; 6];
        BinaryLogisticComponent::add_loss_grad(e, &w, 1.0, &mut g);
        worst = worst.max(relative_error(&g, &central_difference(|v| BinaryLogisticComponent::loss(e, v), &w, 1e-6)));
        bin.subgrad_r2(&w, &mut g);
        worst = worst.max(relative_error(&g, &central_difference(|v| bin.value_r2(v), &w, 1e-6)));

        let wm: Vec<f64> = (0..4 * mspec.classes).map(|_| rng.random_range(-2.0..2.0)).collect();
        let e = &mc.examples[k % mc.len()];
        let mut g = vec![0.0; wm.len()];
        comp.add_loss_grad(e, &wm, 1.0, &mut g);
        worst = worst.max(relative_error(&g, &central_difference(|v| comp.loss(e, v), &wm, 1e-6)));
        multi.subgrad_r2(&wm, &mut g);
        worst = worst.max(relative_error(&g, &central_difference(|v| multi.value_r2(v), &wm, 1e-6)));
    }
    CheckReport {
        name: "gradient-fd",
        passed: worst < 1e-5,
        detail: format!("max relative error {worst:.3e} (limit 1e-5)"),
    }
}

/// Coarse-to-fine grid minimisation of a 1-D function on `[lo, hi]`.
fn grid_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut best = lo;
    for _ in 0..8 {
        let step = (hi - lo) / 200.0;
        let mut best_v = f64::INFINITY;
        for i in 0..=200 {
            let x = lo + step * i as f64;
            let v = f(x);
            if v < best_v {
                best_v = v;
                best = x;
            }
        }
        lo = best - step;
        hi = best + step;
    }
    best
}

fn prox_oracle() -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = rng.random_range(0.2..3.0);
        let lam = rng.random_range(0.0..1.5);
        let c: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x = solve_quadratic_l1(q, lam, &c).expect("q > 0");
        for (j, cj) in c.iter().enumerate() {
            let r = (cj.abs() + lam) / q + 1.0;
            let xb = grid_min(|t| 0.5 * q * t * t + lam * t.abs() - cj * t, -r, r);
            worst = worst.max((x[j] - xb).abs());
        }
        // one row of two classes: minimise along the direction of c
        let c2: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
        let x2 = solve_quadratic_group_l2(q, lam, 1, 2, &c2).expect("q > 0");
        let cn = crate::linalg::norm(&c2);
        let r = (cn + lam) / q + 1.0;
        let t = grid_min(|t| 0.5 * q * t * t + lam * t.abs() - cn * t, -r, r);
        for k in 0..2 {
            let xb = if cn > 0.0 { t * c2[k] / cn } else { 0.0 };
            worst = worst.max((x2[k] - xb).abs());
        }
    }
    CheckReport {
        name: "prox-oracle",
        passed: worst < 1e-6,
        detail: format!("max deviation from grid minimiser {worst:.3e} (limit 1e-6)"),
    }
}

/// Random 20-component, 5-dimensional diagonal quadratic.
pub fn quadratic_toy(seed: u64) -> DcProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diags: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..5).map(|_| rng.random_range(0.2..3.0)).collect())
        .collect();
    let centers: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    diagonal_quadratic_program(&diags, &centers, 4.0, 0.1)
}

fn page_variance() -> CheckReport {
    let prog = quadratic_toy(3);
    let data = prog.dataset().expect("finite").clone();
    let l = prog.constants().l_avg;
    let x_prev = [0.3, -0.2, 0.5, 0.1, -0.4];
    let x_new = [0.1, 0.2, 0.4, -0.3, 0.0];
    let exact_prev = prog.grad_h_full(&x_prev).expect("finite");
    let exact_new = prog.grad_h_full(&x_new).expect("finite");
    let g_prev: Vec<f64> = exact_prev.iter().map(|v| v + 0.05).collect();
    let (p, b_small, reps) = (0.5, 2, 20_000);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..reps {
        let mut est = PageEstimator::new(p, 20, b_small, r as u64).expect("valid");
        est.set_state(g_prev.clone(), x_prev.to_vec());
        est.step(&prog, &x_new, &mut SampleSource::FiniteSum(&data)).expect("valid");
        let e = dist_sq(est.estimate(), &exact_new);
        sum += e;
        sum_sq += e * e;
    }
    let mean = sum / reps as f64;
    let se = ((sum_sq / reps as f64 - mean * mean) / reps as f64).sqrt();
    let bound = (1.0 - p) * dist_sq(&g_prev, &exact_prev) + (1.0 - p) * l * l / b_small as f64 * dist_sq(&x_new, &x_prev);
    CheckReport {
        name: "page-variance",
        passed: mean <= bound + 3.0 * se,
        detail: format!("E err² {mean:.4e} ± {se:.1e} vs bound {bound:.4e}"),
    }
}

fn gap_example() -> CheckReport {
    let prog = abs_value_program();
    let mut worst: f64 = 0.0;
    let mut ok = critical_distance(&prog, &[0.0]).map(|d| d == 0.0).unwrap_or(false);
    for x in [1e-6, -1e-6, 0.1, -0.1, 3.0, -3.0] {
        ok &= critical_distance(&prog, &[x]).map(|d| d == 1.0).unwrap_or(false);
        match gap_function(&prog, &[x], &[0.0]) {
            Ok(g) => worst = worst.max((g - f64::abs(x)).abs()),
            Err(_) => ok = false,
        }
    }
    CheckReport {
        name: "gap-example",
        passed: ok && worst <= 1e-12,
        detail: format!("d contrast {}, max |gap - |x|| {worst:.1e}", if ok { "exact" } else { "wrong" }),
    }
}

fn budget_identity() -> CheckReport {
    let prog = quadratic_toy(4);
    let data = prog.dataset().expect("finite").clone();
    let choice = finite_sum_parameters(20, prog.constants(), 1e-3, None).expect("rho > 0");
    let t = 100usize;
    let seeds = 40;
    let totals: Vec<f64> = (0..seeds)
        .map(|seed| {
            let cfg = SolverConfig {
                max_iters: t,
                seed,
                metric_every: Some(usize::MAX),
                ..Default::default()
            };
            run_dca_page(&prog, SampleSource::FiniteSum(&data), &cfg, &[0.0; 5])
                .expect("toy run")
                .final_grad_count() as f64
        })
        .collect();
    let mean = totals.iter().sum::<f64>() / seeds as f64;
    let var = totals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
    let se = (var / seeds as f64).sqrt();
    let (b, bs, p) = (choice.b as f64, choice.b_small as f64, choice.p);
    let expected = b + t as f64 * (p * b + (1.0 - p) * bs);
    let z = (mean - expected).abs() / se.max(1e-12);
    CheckReport {
        name: "budget-identity",
        passed: z <= 3.0,
        detail: format!("mean {mean:.1} vs expected {expected:.1} ({z:.2} standard errors)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for s in SUITES {
            let r = run_suite(s).unwrap();
            assert!(r.passed, "{r}");
        }
        assert!(run_suite("nope").is_none());
    }
}
