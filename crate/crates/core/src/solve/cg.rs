use super::Dirichlet;
use crate::error::{Error, Result};
use crate::form::QuadraticForm;
use crate::sparse::dot;

#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||A_FF x_F - rhs_F|| / ||rhs_F||`, absolute when the right-hand side vanishes.
    pub relative_residual: f64,
}

/// Minimizes the form with the Dirichlet entries eliminated, by Jacobi-preconditioned
/// conjugate gradients started from `x0` (zero when absent). Every iterate has lower
/// energy than the start, so a warm start is never made worse.
pub fn solve_spd(form: &QuadraticForm, dirichlet: &Dirichlet, x0: Option<&[f64]>, tol_lin: f64) -> Result<SpdSolution> {
    let n = form.n();
    assert_eq!(dirichlet.len(), n, "Dirichlet data must cover every unknown");
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    dirichlet.apply(&mut x);

    let free: Vec<bool> = (0..n).map(|k| !dirichlet.is_fixed(k)).collect();
    let n_free = free.iter().filter(|&&f| f).count();
    if n_free == 0 {
        return Ok(SpdSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mask = |v: &mut [f64]| {
        for (vi, &f) in v.iter_mut().zip(&free) {
            if !f {
                *vi = 0.0;
            }
        }
    };

    // rhs_F = -b_F - A_FD g_D
    let mut boundary_only = x.clone();
    for (xi, &f) in boundary_only.iter_mut().zip(&free) {
        if f {
            *xi = 0.0;
        }
    }
    let mut rhs = form.gradient(&boundary_only);
    rhs.iter_mut().for_each(|r| *r = -*r);
    mask(&mut rhs);
    let rhs_norm = dot(&rhs, &rhs).sqrt();
    let scale = if rhs_norm > 0.0 { rhs_norm } else { 1.0 };

    let diag = form.a.diagonal();
    if let Some(k) = (0..n).find(|&k| free[k] && !(diag[k] > 0.0)) {
        return Err(Error::InvalidParams(format!(
            "operator has non-positive diagonal {} at free node {k}",
            diag[k]
        )));
    }

    let mut r = form.gradient(&x);
    r.iter_mut().for_each(|ri| *ri = -*ri);
    mask(&mut r);
    let precondition = |r: &[f64], z: &mut [f64]| {
        for k in 0..n {
            z[k] = if free[k] { r[k] / diag[k] } else { 0.0 };
        }
    };
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];

    let cap = 10 * n_free;
    let mut iterations = 0;
    let mut res = dot(&r, &r).sqrt() / scale;
    while res > tol_lin {
        if iterations >= cap {
            return Err(Error::NotConverged {
                solver: "conjugate gradients",
                iterations,
                residual: res,
            });
        }
        form.a.mul_vec_into(&p, &mut ap);
        mask(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                solver: "conjugate gradients (operator not positive definite)",
                iterations,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        iterations += 1;
        res = dot(&r, &r).sqrt() / scale;
    }

    // report the true residual rather than the recursively updated one
    let mut r_true = form.gradient(&x);
    mask(&mut r_true);
    let relative_residual = dot(&r_true, &r_true).sqrt() / scale;
    Ok(SpdSolution {
        x,
        iterations,
        relative_residual,
    })
}
