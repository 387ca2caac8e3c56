//! Projected gradient for `min z'Az/2 + b'z` subject to `lower <= z <= upper`.
//!
//! Steps follow the Barzilai-Borwein rule and are backtracked until the Armijo
//! condition holds along the projection arc, so the objective decreases
//! monotonically from the (projected) starting point.

use super::Dirichlet;
use crate::error::{Error, Result};
use crate::form::QuadraticForm;
use crate::sparse::dot;

#[derive(Debug, Clone)]
pub struct BoxQpSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the projected gradient at `x`.
    pub projected_gradient: f64,
}

const ARMIJO: f64 = 1e-4;
const STEP_MIN: f64 = 1e-20;
const STEP_MAX: f64 = 1e20;

/// Sup-norm of the projected gradient: the gradient component is kept where a
/// descent step would stay inside the box, and dropped at active bounds and fixed nodes.
pub fn projected_gradient_norm(grad: &[f64], x: &[f64], lower: &[f64], upper: &[f64], dirichlet: &Dirichlet) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        if dirichlet.is_fixed(k) {
            continue;
        }
        let g = grad[k];
        let pg = if x[k] <= lower[k] && x[k] >= upper[k] {
            0.0
        } else if x[k] <= lower[k] {
            g.min(0.0)
        } else if x[k] >= upper[k] {
            g.max(0.0)
        } else {
            g
        };
        worst = worst.max(pg.abs());
    }
    worst
}

pub fn solve_box_qp(
    form: &QuadraticForm,
    lower: &[f64],
    upper: &[f64],
    dirichlet: &Dirichlet,
    x0: Option<&[f64]>,
    tol_qp: f64,
    max_iterations: usize,
) -> Result<BoxQpSolution> {
    let n = form.n();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    assert_eq!(dirichlet.len(), n);
    if let Some(k) = (0..n).find(|&k| !(lower[k] <= upper[k])) {
        return Err(Error::InfeasibleBox {
            node: k,
            lower: lower[k],
            upper: upper[k],
        });
    }

    let project = |k: usize, z: f64| -> f64 { z.clamp(lower[k], upper[k]) };

    let mut x: Vec<f64> = match x0 {
        Some(x0) => x0.iter().enumerate().map(|(k, &z)| project(k, z)).collect(),
        None => (0..n).map(|k| project(k, 0.0)).collect(),
    };
    dirichlet.apply(&mut x);

    let mut grad = form.gradient(&x);
    let mut pg = projected_gradient_norm(&grad, &x, lower, upper, dirichlet);

    // first step: inverse of a Gershgorin bound on the spectrum
    let gersh = (0..n)
        .map(|i| form.a.row(i).map(|(_, a)| a.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut step = if gersh > 0.0 { 1.0 / gersh } else { 1.0 };

    let mut x_new = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut ad = vec![0.0; n];
    let mut iterations = 0;
    while pg > tol_qp {
        if iterations >= max_iterations {
            return Err(Error::NotConverged {
                solver: "projected gradient",
                iterations,
                residual: pg,
            });
        }
        let mut trial = step;
        loop {
            for k in 0..n {
                x_new[k] = if dirichlet.is_fixed(k) {
                    x[k]
                } else {
                    project(k, x[k] - trial * grad[k])
                };
                d[k] = x_new[k] - x[k];
            }
            form.a.mul_vec_into(&d, &mut ad);
            let gd = dot(&grad, &d);
            let change = gd + 0.5 * dot(&d, &ad);
            if change <= ARMIJO * gd && change <= 0.0 {
                break;
            }
            trial *= 0.5;
            if trial < STEP_MIN {
                // no representable descent left along the projection arc
                return Ok(BoxQpSolution {
                    x,
                    iterations,
                    projected_gradient: pg,
                });
            }
        }
        for k in 0..n {
            x[k] = x_new[k];
            grad[k] += ad[k];
        }
        let sy = dot(&d, &ad);
        let ss = dot(&d, &d);
        step = if sy > 0.0 {
            (ss / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX.min(step * 10.0)
        };
        iterations += 1;
        pg = projected_gradient_norm(&grad, &x, lower, upper, dirichlet);
    }

    Ok(BoxQpSolution {
        x,
        iterations,
        projected_gradient: pg,
    })
}
