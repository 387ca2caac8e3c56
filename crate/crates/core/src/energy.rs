//! The regularized fracture energy
//!
//! `F(u, v) = int (eta + v^2)|grad u|^2 + (eps/2) int |grad v|^2 + (1/2eps) int (1 - v)^2`
//!
//! split into its elliptic part and its phase-transition (surface) part, plus the
//! work integrand that drives the energy balance. Every integral uses the grid's
//! Gauss rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Knobs of the time-discrete scheme and its inner solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ATParams {
    /// Regularization length.
    pub eps: f64,
    /// Residual stiffness of fully broken material.
    pub eta: f64,
    /// Time step.
    pub delta: f64,
    /// Alternating minimization stops once a sweep lowers the energy by less than this.
    pub tol_am: f64,
    /// Relative residual for the displacement solve.
    pub tol_lin: f64,
    /// Sup-norm of the projected gradient for the phase-field box QP.
    pub tol_qp: f64,
    /// Sweep cap of the alternating minimization.
    pub max_sweeps: usize,
}

impl ATParams {
    /// Defaults tied to `eps`: `eta = eps^2/10`, `delta = eps/2`,
    /// `tol_am = 1e-8 |Omega|`.
    pub fn with_defaults(eps: f64, domain_measure: f64) -> Self {
        Self {
            eps,
            eta: eps * eps / 10.0,
            delta: eps / 2.0,
            tol_am: 1e-8 * domain_measure,
            tol_lin: 1e-10,
            tol_qp: 1e-9,
            max_sweeps: 200,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let min_extent = grid.extents().iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.eps > 0.0 && self.eps < min_extent) {
            return Err(Error::InvalidParams(format!(
                "need 0 < eps < {min_extent}, got eps = {}",
                self.eps
            )));
        }
        if !(self.eta > 0.0 && self.eta < self.eps) {
            return Err(Error::InvalidParams(format!(
                "need 0 < eta < eps, got eta = {} with eps = {}",
                self.eta, self.eps
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "time step must be positive, got {}",
                self.delta
            )));
        }
        for (name, tol) in [
            ("tol_am", self.tol_am),
            ("tol_lin", self.tol_lin),
            ("tol_qp", self.tol_qp),
        ] {
            if !(tol > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {tol}")));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParams("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Elliptic and surface parts of the energy at one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub elliptic: f64,
    pub surface: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.elliptic + self.surface
    }
}

/// Per-step energy bookkeeping of an evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub t: f64,
    pub elliptic: f64,
    pub surface: f64,
    pub total: f64,
    /// `2 int (eta + v_i^2) grad u_i . grad (g_{i+1} - g_i)` for the step that produced this record.
    pub work_increment: f64,
    pub work_cumulative: f64,
    /// `E(0) + sum work + e(delta) sum ||grad dg||`.
    pub upper_bound: f64,
    /// `E(0) + sum work - e(delta) sum ||grad dg||`; the modulus is a computable surrogate.
    pub lower_bound: f64,
    pub am_sweeps: usize,
    pub competitor_accepted: bool,
    pub upper_violated: bool,
    pub lower_violated: bool,
}

fn quad_sum(grid: &Grid, fields: &[&Field], mut f: impl FnMut(&[(f64, [f64; 2])]) -> f64) -> f64 {
    let rule = grid.rule();
    let nl = rule.nodes_per_element;
    let mut buf = vec![(0.0, [0.0; 2]); fields.len()];
    let mut total = 0.0;
    for el in grid.elements() {
        for q in &rule.points {
            for (slot, field) in buf.iter_mut().zip(fields) {
                *slot = field.eval_at(el, q, nl);
            }
            total += q.weight * f(&buf);
        }
    }
    total
}

/// `int (eta + v^2) |grad u|^2`
pub fn elliptic_energy(u: &Field, v: &Field, eta: f64) -> Result<f64> {
    u.ensure_same_grid(v)?;
    Ok(quad_sum(u.grid(), &[u, v], |p| {
        let (_, gu) = p[0];
        let (vv, _) = p[1];
        (eta + vv * vv) * (gu[0] * gu[0] + gu[1] * gu[1])
    }))
}

/// `(eps/2) int |grad v|^2 + (1/2eps) int (1 - v)^2`
pub fn mm_energy(v: &Field, eps: f64) -> f64 {
    quad_sum(v.grid(), &[v], |p| {
        let (vv, g) = p[0];
        0.5 * eps * (g[0] * g[0] + g[1] * g[1]) + (1.0 - vv) * (1.0 - vv) / (2.0 * eps)
    })
}

/// `int (1 - v) |grad v|`, the coarea lower bound of [`mm_energy`].
pub fn coarea_integral(v: &Field) -> f64 {
    quad_sum(v.grid(), &[v], |p| {
        let (vv, g) = p[0];
        (1.0 - vv) * (g[0] * g[0] + g[1] * g[1]).sqrt()
    })
}

pub fn energy_parts(u: &Field, v: &Field, params: &ATParams) -> Result<EnergyParts> {
    Ok(EnergyParts {
        elliptic: elliptic_energy(u, v, params.eta)?,
        surface: mm_energy(v, params.eps),
    })
}

pub fn total_energy(u: &Field, v: &Field, params: &ATParams) -> Result<f64> {
    energy_parts(u, v, params).map(|p| p.total())
}

/// `2 int (eta + v^2) grad u . grad (g_next - g_prev)`
pub fn work_increment(u: &Field, v: &Field, g_prev: &Field, g_next: &Field, eta: f64) -> Result<f64> {
    u.ensure_same_grid(v)?;
    u.ensure_same_grid(g_prev)?;
    u.ensure_same_grid(g_next)?;
    let dg = g_next.sub(g_prev)?;
    Ok(quad_sum(u.grid(), &[u, v, &dg], |p| {
        let (_, gu) = p[0];
        let (vv, _) = p[1];
        let (_, gd) = p[2];
        2.0 * (eta + vv * vv) * (gu[0] * gd[0] + gu[1] * gd[1])
    }))
}

/// `int (eta + v^2) |grad dg|^2`, the quadratic remainder of the warm-start expansion.
pub fn increment_remainder(v: &Field, dg: &Field, eta: f64) -> Result<f64> {
    v.ensure_same_grid(dg)?;
    Ok(quad_sum(v.grid(), &[v, dg], |p| {
        let (vv, _) = p[0];
        let (_, gd) = p[1];
        (eta + vv * vv) * (gd[0] * gd[0] + gd[1] * gd[1])
    }))
}

/// `||grad f||_{L^2}`
pub fn gradient_l2(f: &Field) -> f64 {
    quad_sum(f.grid(), &[f], |p| {
        let g = p[0].1;
        g[0] * g[0] + g[1] * g[1]
    })
    .sqrt()
}

/// Nodal clipping of `u` to `[-m, m]`.
pub fn truncate(u: &Field, m: f64) -> Field {
    let values = u.values().iter().map(|x| x.clamp(-m, m)).collect();
    u.with_values(values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Face;
    use std::sync::Arc;

    fn bar(n: usize) -> Arc<Grid> {
        Grid::new(&[1.0], &[n], &[Face::Left, Face::Right]).unwrap()
    }

    #[test]
    fn elliptic_examples() {
        let g = bar(20);
        let x = Field::from_fn(&g, |[x, _]| x);
        let zero = Field::constant(&g, 0.0);
        assert_eq!(elliptic_energy(&zero, &x, 0.01).unwrap(), 0.0);
        let one = Field::constant(&g, 1.0);
        assert!((elliptic_energy(&x, &one, 0.01).unwrap() - 1.01).abs() < 1e-12);
        let half = Field::constant(&g, 0.5);
        assert!((elliptic_energy(&x, &half, 0.01).unwrap() - 0.26).abs() < 1e-12);
    }

    #[test]
    fn mm_examples() {
        let g = bar(20);
        assert_eq!(mm_energy(&Field::constant(&g, 1.0), 0.1), 0.0);
        assert!((mm_energy(&Field::constant(&g, 0.0), 0.1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn total_is_sum_of_parts() {
        let g = bar(20);
        let p = ATParams::with_defaults(0.1, 1.0);
        let x = Field::from_fn(&g, |[x, _]| x);
        let v = Field::from_fn(&g, |[x, _]| 0.5 + 0.4 * (6.0 * x).sin());
        let t = total_energy(&x, &v, &p).unwrap();
        let e = elliptic_energy(&x, &v, p.eta).unwrap() + mm_energy(&v, p.eps);
        assert!((t - e).abs() <= 1e-12 * e);
        let zero = Field::constant(&g, 0.0);
        let one = Field::constant(&g, 1.0);
        assert_eq!(total_energy(&zero, &one, &p).unwrap(), 0.0);
        let mut p = p;
        p.eta = 0.01;
        assert!((total_energy(&x, &one, &p).unwrap() - 1.01).abs() < 1e-12);
    }

    #[test]
    fn work_examples() {
        let g = bar(10);
        let one = Field::constant(&g, 1.0);
        let t = 0.7;
        let delta = 0.05;
        let u = Field::from_fn(&g, |[x, _]| t * x);
        let gp = Field::from_fn(&g, |[x, _]| t * x);
        let gn = Field::from_fn(&g, |[x, _]| (t + delta) * x);
        let w = work_increment(&u, &one, &gp, &gn, 0.01).unwrap();
        assert!((w - 2.0 * 1.01 * t * delta).abs() < 1e-12);
        assert_eq!(work_increment(&u, &one, &gp, &gp, 0.01).unwrap(), 0.0);
        let c = Field::constant(&g, 2.0);
        assert_eq!(work_increment(&c, &one, &gp, &gn, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn params_regime() {
        let g = bar(10);
        let mut p = ATParams::with_defaults(0.05, 1.0);
        assert!(p.validate(&g).is_ok());
        assert!((p.eta - 2.5e-4).abs() < 1e-18);
        p.eta = 0.1;
        assert!(p.validate(&g).is_err());
        let mut p = ATParams::with_defaults(2.0, 1.0);
        assert!(p.validate(&g).is_err());
        p.eps = 0.1;
        p.delta = 0.0;
        assert!(p.validate(&g).is_err());
    }
}
