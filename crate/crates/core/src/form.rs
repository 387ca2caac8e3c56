//! Quadratic forms `z -> z'Az/2 + b'z + c` assembled from the energy integrands.
//!
//! Both forms are integrated with the same Gauss rule as the energy evaluators in
//! [`crate::energy`], so `form.eval(z)` reproduces the energy to rounding.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::sparse::{dot, CsrMatrix};

#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QuadraticForm {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let az = self.a.mul_vec(z);
        0.5 * dot(z, &az) + dot(&self.b, z) + self.c
    }

    /// `A z + b`
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(z);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi += bi;
        }
        g
    }
}

/// Adds `sum_q weight * coef(q) * (grad N_a . grad N_b)` (stiffness) and
/// `sum_q weight * mass(q) * N_a N_b` (mass) to the global matrix.
fn assemble(
    grid: &Grid,
    mut stiff_coef: impl FnMut(usize, usize) -> f64,
    mut mass_coef: impl FnMut(usize, usize) -> f64,
) -> CsrMatrix {
    let mut a = CsrMatrix::zeros(grid.pattern().clone());
    let rule = grid.rule();
    let nl = rule.nodes_per_element;
    let mut local = [0.0; 16];
    for e in 0..grid.n_elements() {
        local[..nl * nl].iter_mut().for_each(|x| *x = 0.0);
        for (qi, q) in rule.points.iter().enumerate() {
            let k = q.weight * stiff_coef(e, qi);
            let m = q.weight * mass_coef(e, qi);
            for p in 0..nl {
                for r in 0..nl {
                    let gg = q.grad[p][0] * q.grad[r][0] + q.grad[p][1] * q.grad[r][1];
                    local[p * nl + r] += k * gg + m * q.shape[p] * q.shape[r];
                }
            }
        }
        let slots = grid.element_slots(e);
        let vals = a.values_mut();
        for (slot, val) in slots.iter().zip(&local[..nl * nl]) {
            vals[*slot] += val;
        }
    }
    a
}

/// Values of `f` at every quadrature point, element-major.
fn at_points(f: &Field, mut map: impl FnMut(f64, [f64; 2]) -> f64) -> Vec<f64> {
    let grid = f.grid();
    let rule = grid.rule();
    let nl = rule.nodes_per_element;
    let mut out = Vec::with_capacity(grid.n_elements() * rule.points.len());
    for el in grid.elements() {
        for q in &rule.points {
            let (val, grad) = f.eval_at(el, q, nl);
            out.push(map(val, grad));
        }
    }
    out
}

/// The form `u -> int (eta + w^2) |grad u|^2` (so `A = 2K_w`, `b = 0`, `c = 0`).
pub fn assemble_weighted_stiffness(grid: &Grid, w: &Field, eta: f64) -> Result<QuadraticForm> {
    w.ensure_on(grid)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidParams(format!("eta must be positive, got {eta}")));
    }
    let coef = at_points(w, |val, _| 2.0 * (eta + val * val));
    let npts = grid.rule().points.len();
    let a = assemble(grid, |e, q| coef[e * npts + q], |_, _| 0.0);
    Ok(QuadraticForm {
        a,
        b: vec![0.0; grid.n_nodes()],
        c: 0.0,
    })
}

/// The form in `v` of the full functional at fixed `u`:
/// `int v^2 |grad u|^2 + (eps/2) int |grad v|^2 + (1/2eps) int (1-v)^2`,
/// with the `v`-independent `eta int |grad u|^2` carried in the constant.
pub fn assemble_phase_form(grid: &Grid, u: &Field, eps: f64, eta: f64) -> Result<QuadraticForm> {
    u.ensure_on(grid)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
    }
    let grad_sq = at_points(u, |_, g| g[0] * g[0] + g[1] * g[1]);
    let npts = grid.rule().points.len();
    let a = assemble(grid, |_, _| eps, |e, q| 2.0 * grad_sq[e * npts + q] + 1.0 / eps);

    // b_a = -(1/eps) int N_a ; c = |Omega|/(2 eps) + eta int |grad u|^2
    let rule = grid.rule();
    let nl = rule.nodes_per_element;
    let mut b = vec![0.0; grid.n_nodes()];
    let mut grad_energy = 0.0;
    for (e, el) in grid.elements().iter().enumerate() {
        for (qi, q) in rule.points.iter().enumerate() {
            for p in 0..nl {
                b[el[p]] -= q.weight * q.shape[p] / eps;
            }
            grad_energy += q.weight * grad_sq[e * npts + qi];
        }
    }
    let c = grid.measure() / (2.0 * eps) + eta * grad_energy;
    Ok(QuadraticForm { a, b, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Face;

    fn bar(n: usize) -> std::sync::Arc<Grid> {
        Grid::new(&[1.0], &[n], &[Face::Left, Face::Right]).unwrap()
    }

    #[test]
    fn weighted_stiffness_on_linear_displacement() {
        let g = bar(10);
        let u = Field::from_fn(&g, |[x, _]| x);
        let f = assemble_weighted_stiffness(&g, &Field::constant(&g, 1.0), 0.01).unwrap();
        assert!((f.eval(u.values()) - 1.01).abs() < 1e-12);
        let f0 = assemble_weighted_stiffness(&g, &Field::constant(&g, 0.0), 0.01).unwrap();
        assert!((f0.eval(u.values()) - 0.01).abs() < 1e-12);
        assert!(f.eval(&vec![3.5; g.n_nodes()]).abs() < 1e-12);
    }

    #[test]
    fn phase_form_examples() {
        let g = bar(16);
        let eps = 0.1;
        let zero = Field::constant(&g, 0.0);
        let f = assemble_phase_form(&g, &zero, eps, 0.001).unwrap();
        assert!(f.eval(&vec![1.0; g.n_nodes()]).abs() < 1e-12);
        assert!((f.eval(&vec![0.0; g.n_nodes()]) - 1.0 / (2.0 * eps)).abs() < 1e-12);

        let u = Field::from_fn(&g, |[x, _]| x);
        let f = assemble_phase_form(&g, &u, eps, 0.0 + 1e-12).unwrap();
        assert!((f.eval(&vec![1.0; g.n_nodes()]) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let g = bar(4);
        let other = bar(5);
        let w = Field::constant(&other, 1.0);
        assert!(assemble_weighted_stiffness(&g, &w, 0.1).is_err());
        assert!(assemble_phase_form(&g, &w, 0.1, 0.01).is_err());
    }

    #[test]
    fn assembled_operators_are_symmetric() {
        let g = Grid::new(&[1.0, 2.0], &[3, 5], &[Face::Bottom]).unwrap();
        let w = Field::from_fn(&g, |[x, y]| (x * y).cos().abs());
        let a = assemble_weighted_stiffness(&g, &w, 0.01).unwrap();
        assert!(a.a.asymmetry() < 1e-14);
        let p = assemble_phase_form(&g, &w, 0.2, 0.01).unwrap();
        assert!(p.a.asymmetry() < 1e-12);
    }
}
