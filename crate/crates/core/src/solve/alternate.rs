use super::{solve_box_qp, solve_spd, Dirichlet};
use crate::energy::{energy_parts, truncate, ATParams, EnergyParts};
use crate::error::{Error, Result};
use crate::form::{assemble_phase_form, assemble_weighted_stiffness};
use crate::grid::{Field, Grid};

/// Result of one alternating minimization.
#[derive(Debug, Clone)]
pub struct AmOutcome {
    pub u: Field,
    pub v: Field,
    pub energy: EnergyParts,
    pub sweeps: usize,
    /// Relative residual of the last displacement solve.
    pub u_residual: f64,
    /// Projected-gradient norm of the last phase-field solve.
    pub v_projected_gradient: f64,
    /// Total energy after every half-sweep, starting with the initial state.
    pub half_step_energies: Vec<f64>,
}

const QP_ITERATION_CAP: usize = 200_000;

/// Alternates an exact displacement solve at fixed `v` with a box-constrained
/// phase-field solve `0 <= v <= v_upper` at fixed `u`, until one sweep lowers the
/// energy by less than `params.tol_am`.
///
/// `datum` is the boundary displacement extended to all nodes; its values on the
/// Dirichlet nodes are imposed on `u`, and `||datum||_inf` is the truncation level.
pub fn alternate_minimize(
    grid: &Grid,
    u0: &Field,
    v0: &Field,
    v_upper: &Field,
    datum: &Field,
    params: &ATParams,
) -> Result<AmOutcome> {
    for f in [u0, v0, v_upper, datum] {
        f.ensure_on(grid)?;
    }
    v_upper.validate_phase()?;
    v0.validate_phase()?;
    if let Some(k) = (0..grid.n_nodes()).find(|&k| v0.values()[k] > v_upper.values()[k]) {
        return Err(Error::InvalidField(format!(
            "initial phase field exceeds its ceiling at node {k}"
        )));
    }
    if let Some(k) = (0..grid.n_nodes()).find(|&k| grid.is_dirichlet(k) && v_upper.values()[k] != 1.0) {
        return Err(Error::InvalidField(format!(
            "ceiling must equal 1 on Dirichlet node {k}"
        )));
    }

    let u_bc = Dirichlet::from_field(datum);
    let v_bc = Dirichlet::constant(grid.dirichlet_mask(), 1.0);
    let level = datum.sup_norm();
    let lower = vec![0.0; grid.n_nodes()];

    let mut u = u0.clone();
    u_bc.apply(u.values_mut());
    let mut v = v0.clone();
    v_bc.apply(v.values_mut());

    let mut energy = energy_parts(&u, &v, params)?.total();
    let mut half_step_energies = vec![energy];
    let mut last_decrease = f64::INFINITY;

    for sweep in 1..=params.max_sweeps {
        let form_u = assemble_weighted_stiffness(grid, &v, params.eta)?;
        let sol = solve_spd(&form_u, &u_bc, Some(u.values()), params.tol_lin)?;
        let u_residual = sol.relative_residual;
        if form_u.eval(&sol.x) <= form_u.eval(u.values()) {
            u = u.with_values(sol.x)?;
        }
        let clipped = truncate(&u, level);
        if form_u.eval(clipped.values()) <= form_u.eval(u.values()) {
            u = clipped;
        }
        half_step_energies.push(energy_parts(&u, &v, params)?.total());

        let form_v = assemble_phase_form(grid, &u, params.eps, params.eta)?;
        let qp = solve_box_qp(
            &form_v,
            &lower,
            v_upper.values(),
            &v_bc,
            Some(v.values()),
            params.tol_qp,
            QP_ITERATION_CAP,
        )?;
        let v_projected_gradient = qp.projected_gradient;
        if form_v.eval(&qp.x) <= form_v.eval(v.values()) {
            v = v.with_values(qp.x)?;
        }

        let parts = energy_parts(&u, &v, params)?;
        half_step_energies.push(parts.total());
        last_decrease = energy - parts.total();
        energy = parts.total();
        if last_decrease < params.tol_am {
            return Ok(AmOutcome {
                u,
                v,
                energy: parts,
                sweeps: sweep,
                u_residual,
                v_projected_gradient,
                half_step_energies,
            });
        }
    }
    Err(Error::SweepCapExceeded {
        sweeps: params.max_sweeps,
        last_decrease,
        energy,
    })
}
