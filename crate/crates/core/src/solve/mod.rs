//! Convex subproblem solvers and the alternating minimization that combines them.

mod alternate;
mod box_qp;
mod cg;

pub use alternate::{alternate_minimize, AmOutcome};
pub use box_qp::{projected_gradient_norm, solve_box_qp, BoxQpSolution};
pub use cg::{solve_spd, SpdSolution};

use crate::grid::Field;

/// Prescribed values on a subset of the unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dirichlet {
    fixed: Vec<bool>,
    values: Vec<f64>,
}

impl Dirichlet {
    pub fn new(fixed: Vec<bool>, values: Vec<f64>) -> Self {
        assert_eq!(fixed.len(), values.len(), "mask and values must have equal length");
        Self { fixed, values }
    }

    pub fn none(n: usize) -> Self {
        Self::new(vec![false; n], vec![0.0; n])
    }

    /// The grid's Dirichlet nodes carrying the values of `datum`.
    pub fn from_field(datum: &Field) -> Self {
        Self::new(datum.grid().dirichlet_mask().to_vec(), datum.values().to_vec())
    }

    /// The grid's Dirichlet nodes carrying a constant.
    pub fn constant(mask: &[bool], value: f64) -> Self {
        Self::new(mask.to_vec(), vec![value; mask.len()])
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn is_fixed(&self, k: usize) -> bool {
        self.fixed[k]
    }

    pub fn mask(&self) -> &[bool] {
        &self.fixed
    }

    /// Overwrites the fixed entries of `x` with their prescribed values.
    pub fn apply(&self, x: &mut [f64]) {
        for ((xi, &f), &g) in x.iter_mut().zip(&self.fixed).zip(&self.values) {
            if f {
                *xi = g;
            }
        }
    }
}
