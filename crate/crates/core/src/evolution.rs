//! Time-discrete quasi-static evolution.
//!
//! Time runs on the uniform grid `t_i = i * delta`. Step `i + 1` minimizes the
//! energy with boundary datum `g(t_{i+1})` under the ceiling `0 <= v <= v_i`,
//! warm-started from `(u_i + g(t_{i+1}) - g(t_i), v_i)`. Because the warm start is
//! admissible and every solver stage only lowers the energy, the accepted state
//! always satisfies
//!
//! `F(u_{i+1}, v_{i+1}) <= F(u_i + dg, v_i) = F(u_i, v_i) + work_i + int (eta + v_i^2)|grad dg|^2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::{gradient_l2, increment_remainder, total_energy, work_increment, ATParams, EnergyRecord};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::solve::alternate_minimize;

/// Slack on the per-step energy estimate.
pub const ESTIMATE_SLACK: f64 = 1e-12;

/// Scalar loading path `a(t)`, piecewise linear with `a(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Amplitude {
    /// `a(t) = rate * t`
    Ramp { rate: f64 },
    /// Linear interpolation of `(times, values)`, held constant after the last time.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Amplitude {
    pub fn validate(&self) -> Result<()> {
        match self {
            Amplitude::Ramp { rate } if rate.is_finite() => Ok(()),
            Amplitude::Ramp { rate } => Err(Error::InvalidSchedule(format!("ramp rate {rate} is not finite"))),
            Amplitude::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidSchedule(
                        "table needs equally many times and values (at least one)".into(),
                    ));
                }
                if times[0] != 0.0 || values[0] != 0.0 {
                    return Err(Error::InvalidSchedule("table must start at (0, 0)".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidSchedule("table times must increase strictly".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSchedule("table values must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Amplitude::Ramp { rate } => rate * t,
            Amplitude::Table { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                match times.iter().position(|&s| s >= t) {
                    None => *values.last().expect("non-empty table"),
                    Some(k) => {
                        let (t0, t1) = (times[k - 1], times[k]);
                        let (a0, a1) = (values[k - 1], values[k]);
                        a0 + (a1 - a0) * (t - t0) / (t1 - t0)
                    }
                }
            }
        }
    }

    /// Breakpoints strictly inside `(s, t)`.
    fn kinks_between(&self, s: f64, t: f64) -> Vec<f64> {
        match self {
            Amplitude::Ramp { .. } => Vec::new(),
            Amplitude::Table { times, .. } => times.iter().copied().filter(|&k| k > s && k < t).collect(),
        }
    }

    /// `int_s^t |a'(tau)| dtau`, exact for piecewise-linear paths.
    pub fn variation(&self, s: f64, t: f64) -> f64 {
        let mut knots = vec![s];
        knots.extend(self.kinks_between(s, t));
        knots.push(t);
        knots
            .windows(2)
            .map(|w| (self.value(w[1]) - self.value(w[0])).abs())
            .sum()
    }

    /// Whether `|a|` never decreases (and `a` never changes sign).
    pub fn is_monotone(&self) -> bool {
        match self {
            Amplitude::Ramp { .. } => true,
            Amplitude::Table { values, .. } => {
                let up = values.windows(2).all(|w| w[1] >= w[0]);
                let down = values.windows(2).all(|w| w[1] <= w[0]);
                up || down
            }
        }
    }
}

/// Shape `P` of the boundary datum, extended to every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `P = x / Lx`: tension of a bar pinned at `x = 0`.
    LinearX,
    /// `P = 2 y / Ly - 1`: antiplane shear, `-a` on the bottom and `+a` on the top.
    ShearY,
}

impl Profile {
    pub fn field(self, grid: &Arc<Grid>) -> Result<Field> {
        match self {
            Profile::LinearX => {
                let lx = grid.extents()[0];
                Ok(Field::from_fn(grid, |[x, _]| x / lx))
            }
            Profile::ShearY => {
                if grid.dim() != 2 {
                    return Err(Error::InvalidSchedule("shear_y profile needs a 2D grid".into()));
                }
                let ly = grid.extents()[1];
                Ok(Field::from_fn(grid, |[_, y]| 2.0 * y / ly - 1.0))
            }
        }
    }
}

/// Boundary datum `g(t) = a(t) P`.
#[derive(Debug, Clone)]
pub struct BoundarySchedule {
    profile: Field,
    amplitude: Amplitude,
    t_end: f64,
}

impl BoundarySchedule {
    pub fn new(profile: Field, amplitude: Amplitude, t_end: f64) -> Result<Self> {
        amplitude.validate()?;
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "end time must be positive, got {t_end}"
            )));
        }
        Ok(Self {
            profile,
            amplitude,
            t_end,
        })
    }

    pub fn profile(&self) -> &Field {
        &self.profile
    }

    pub fn amplitude(&self) -> &Amplitude {
        &self.amplitude
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn datum(&self, t: f64) -> Field {
        self.profile.scaled(self.amplitude.value(t))
    }

    /// Number of steps: the largest `N` with `N delta <= t_end`.
    pub fn n_steps(&self, delta: f64) -> usize {
        ((self.t_end / delta) * (1.0 + 1e-12)).floor() as usize
    }
}

/// Time of step `i`.
pub fn step_time(i: usize, delta: f64) -> f64 {
    i as f64 * delta
}

/// Where the constructed cracked competitor is placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "at", rename_all = "snake_case")]
pub enum CrackSite {
    /// The cell containing `x` (1D).
    Point(f64),
    /// The row of cells containing `y = at` (2D).
    HorizontalLine(f64),
    /// The column of cells containing `x = at` (2D).
    VerticalLine(f64),
}

impl CrackSite {
    /// Distance of every node to the site, after moving the site to the nearest
    /// cell centre. A jump of a piecewise-linear `u` can only sit inside a cell, so
    /// a site through nodes would force a crack two cells wide.
    pub fn distances(&self, grid: &Grid) -> Result<Vec<f64>> {
        let (axis, c) = match *self {
            CrackSite::Point(x) if grid.dim() == 1 => (0, x),
            CrackSite::Point(_) => return Err(Error::InvalidCrackSite("point sites are for 1D grids".into())),
            CrackSite::HorizontalLine(y) if grid.dim() == 2 => (1, y),
            CrackSite::VerticalLine(x) if grid.dim() == 2 => (0, x),
            _ => return Err(Error::InvalidCrackSite("line sites are for 2D grids".into())),
        };
        let h = grid.spacing()[axis];
        let n = grid.counts()[axis];
        let length = grid.extents()[axis];
        if !(c >= 0.0 && c <= length) {
            return Err(Error::InvalidCrackSite(format!("{c} lies outside the domain")));
        }
        // a site on a grid line made entirely of Dirichlet nodes is rejected
        let line = (c / h).round();
        if (c / h - line).abs() < 1e-9 {
            let on_line: Vec<usize> = (0..grid.n_nodes())
                .filter(|&k| (grid.coords(k)[axis] - line * h).abs() < 1e-9 * h)
                .collect();
            if on_line.iter().all(|&k| grid.is_dirichlet(k)) {
                return Err(Error::InvalidCrackSite(format!(
                    "site at {c} lies on the Dirichlet boundary"
                )));
            }
        }
        let cell = ((c / h).floor() as usize).min(n - 1);
        let pos = (cell as f64 + 0.5) * h;
        Ok((0..grid.n_nodes())
            .map(|k| (grid.coords(k)[axis] - pos).abs())
            .collect())
    }
}

/// A pre-existing flaw: the initial ceiling is lowered to `value` within `radius` of `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Notch {
    pub center: [f64; 2],
    pub radius: f64,
    pub value: f64,
}

impl Notch {
    pub fn ceiling(&self, grid: &Arc<Grid>) -> Result<Field> {
        if !(0.0..=1.0).contains(&self.value) {
            return Err(Error::InvalidParams(format!(
                "notch value {} outside [0, 1]",
                self.value
            )));
        }
        let mut ceiling = Field::constant(grid, 1.0);
        let mut hit = false;
        for k in 0..grid.n_nodes() {
            let [x, y] = grid.coords(k);
            let d = ((x - self.center[0]).powi(2) + (y - self.center[1]).powi(2)).sqrt();
            if d <= self.radius && !grid.is_dirichlet(k) {
                ceiling.values_mut()[k] = self.value;
                hit = true;
            }
        }
        if !hit {
            return Err(Error::InvalidParams("notch covers no interior node".into()));
        }
        Ok(ceiling)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub competitor: Option<CrackSite>,
    pub notch: Option<Notch>,
}

/// One accepted step of the evolution.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub step: usize,
    pub t: f64,
    pub u: Field,
    pub v: Field,
    /// Ceiling this step was solved under (the previous accepted `v`).
    pub v_upper: Field,
    pub record: EnergyRecord,
    /// Relative residual of the last displacement solve.
    pub u_residual: f64,
    /// Projected-gradient norm of the last phase-field solve.
    pub v_projected_gradient: f64,
    balance: Balance,
}

/// Running sums behind the two-sided energy bounds.
#[derive(Debug, Clone, Copy)]
struct Balance {
    e0: f64,
    /// `(1 + eta) max_r int_{t_r}^{t_{r+1}} ||grad g'||`
    e_delta: f64,
    /// `sum_r int_{t_r}^{t_{r+1}} ||grad g'||`
    variation_cumulative: f64,
}

impl Balance {
    fn bounds(&self, work_cumulative: f64) -> (f64, f64) {
        let slack = self.e_delta * self.variation_cumulative;
        (self.e0 + work_cumulative + slack, self.e0 + work_cumulative - slack)
    }
}

fn bound_tolerance(total: f64) -> f64 {
    1e-10 * (1.0 + total.abs())
}

/// `e(delta)` of the scheme, evaluated for the whole schedule before the run.
pub fn modulus_e_delta(schedule: &BoundarySchedule, params: &ATParams) -> f64 {
    let grad_p = gradient_l2(schedule.profile());
    let n = schedule.n_steps(params.delta);
    let max_var = (0..n)
        .map(|r| {
            schedule
                .amplitude()
                .variation(step_time(r, params.delta), step_time(r + 1, params.delta))
        })
        .fold(0.0, f64::max);
    (1.0 + params.eta) * grad_p * max_var
}

/// Solves the first step: unconstrained (apart from the optional notch ceiling)
/// minimization with datum `g(0)`.
pub fn init_step(
    grid: &Arc<Grid>,
    schedule: &BoundarySchedule,
    params: &ATParams,
    strategy: &Strategy,
) -> Result<EvolutionState> {
    params.validate(grid)?;
    schedule.profile().ensure_on(grid)?;
    let ceiling = match &strategy.notch {
        Some(n) => n.ceiling(grid)?,
        None => Field::constant(grid, 1.0),
    };
    let g0 = schedule.datum(0.0);
    let am = alternate_minimize(grid, &g0, &ceiling, &ceiling, &g0, params)?;
    let total = am.energy.total();
    let balance = Balance {
        e0: total,
        e_delta: modulus_e_delta(schedule, params),
        variation_cumulative: 0.0,
    };
    let record = EnergyRecord {
        step: 0,
        t: 0.0,
        elliptic: am.energy.elliptic,
        surface: am.energy.surface,
        total,
        work_increment: 0.0,
        work_cumulative: 0.0,
        upper_bound: total,
        lower_bound: total,
        am_sweeps: am.sweeps,
        competitor_accepted: false,
        upper_violated: false,
        lower_violated: false,
    };
    Ok(EvolutionState {
        step: 0,
        t: 0.0,
        u: am.u,
        v: am.v,
        v_upper: ceiling,
        record,
        u_residual: am.u_residual,
        v_projected_gradient: am.v_projected_gradient,
        balance,
    })
}

/// One time step.
pub fn advance(
    state: &EvolutionState,
    schedule: &BoundarySchedule,
    params: &ATParams,
    strategy: &Strategy,
) -> Result<EvolutionState> {
    let grid = state.u.grid().clone();
    let step = state.step + 1;
    let t_prev = step_time(state.step, params.delta);
    let t = step_time(step, params.delta);
    let g_prev = schedule.datum(t_prev);
    let g_next = schedule.datum(t);
    let dg = g_next.sub(&g_prev)?;

    let warm_u = state.u.add(&dg)?;
    let warm_energy = total_energy(&warm_u, &state.v, params)?;
    let am = alternate_minimize(&grid, &warm_u, &state.v, &state.v, &g_next, params)?;

    let work = work_increment(&state.u, &state.v, &g_prev, &g_next, params.eta)?;
    let variation = schedule.amplitude().variation(t_prev, t) * gradient_l2(schedule.profile());
    let balance = Balance {
        variation_cumulative: state.balance.variation_cumulative + variation,
        ..state.balance
    };
    let work_cumulative = state.record.work_cumulative + work;
    let (upper_bound, lower_bound) = balance.bounds(work_cumulative);
    let total = am.energy.total();
    let record = EnergyRecord {
        step,
        t,
        elliptic: am.energy.elliptic,
        surface: am.energy.surface,
        total,
        work_increment: work,
        work_cumulative,
        upper_bound,
        lower_bound,
        am_sweeps: am.sweeps,
        competitor_accepted: false,
        upper_violated: total > upper_bound + bound_tolerance(total),
        lower_violated: total < lower_bound - bound_tolerance(total),
    };
    let mut next = EvolutionState {
        step,
        t,
        u: am.u,
        v: am.v,
        v_upper: state.v.clone(),
        record,
        u_residual: am.u_residual,
        v_projected_gradient: am.v_projected_gradient,
        balance,
    };
    if let Some(site) = strategy.competitor {
        next = competitor_step(&next, schedule, params, site)?;
    }

    if next.record.total > warm_energy + ESTIMATE_SLACK {
        return Err(Error::EstimateViolated {
            step,
            accepted: next.record.total,
            warm_start: warm_energy,
        });
    }
    debug_assert!(
        increment_remainder(&state.v, &dg, params.eta)? <= balance.e_delta * variation * (1.0 + 1e-9) + 1e-15
    );
    Ok(next)
}

/// Builds the cracked candidate `v_c = min(v_upper, 1 - exp(-dist/eps))` at the
/// site, relaxes it by alternating minimization under the ceiling `v_c` and
/// returns whichever of `state` and the candidate has the lower energy. The
/// candidate must win by more than `tol_am` to be accepted.
pub fn competitor_step(
    state: &EvolutionState,
    schedule: &BoundarySchedule,
    params: &ATParams,
    site: CrackSite,
) -> Result<EvolutionState> {
    let grid = state.u.grid().clone();
    let dist = site.distances(&grid)?;
    let profile: Vec<f64> = (0..grid.n_nodes())
        .map(|k| {
            if grid.is_dirichlet(k) {
                1.0
            } else {
                state.v_upper.values()[k].min(1.0 - (-dist[k] / params.eps).exp())
            }
        })
        .collect();
    let v_c = Field::new(&grid, profile)?;
    let datum = schedule.datum(state.t);
    // relaxed under its own ceiling so that it cannot heal back to the uncracked branch
    let candidate = alternate_minimize(&grid, &state.u, &v_c, &v_c, &datum, params)?;

    if candidate.energy.total() >= state.record.total - params.tol_am {
        return Ok(state.clone());
    }
    let total = candidate.energy.total();
    let (upper_bound, lower_bound) = state.balance.bounds(state.record.work_cumulative);
    let record = EnergyRecord {
        elliptic: candidate.energy.elliptic,
        surface: candidate.energy.surface,
        total,
        am_sweeps: state.record.am_sweeps + candidate.sweeps,
        competitor_accepted: true,
        upper_violated: total > upper_bound + bound_tolerance(total),
        lower_violated: total < lower_bound - bound_tolerance(total),
        ..state.record.clone()
    };
    Ok(EvolutionState {
        u: candidate.u,
        v: candidate.v,
        record,
        u_residual: candidate.u_residual,
        v_projected_gradient: candidate.v_projected_gradient,
        ..state.clone()
    })
}

/// All accepted states of a run, step 0 first.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<EvolutionState>,
}

impl Trajectory {
    pub fn records(&self) -> impl Iterator<Item = &EnergyRecord> {
        self.states.iter().map(|s| &s.record)
    }

    pub fn last(&self) -> &EvolutionState {
        self.states
            .last()
            .expect("a trajectory holds at least the initial state")
    }

    /// First time at which `min v` drops below `threshold`.
    pub fn crack_time(&self, threshold: f64) -> Option<f64> {
        self.states.iter().find(|s| s.v.min() < threshold).map(|s| s.t)
    }

    /// Largest logged upper bound, a bound on every energy of the run.
    pub fn energy_bound(&self) -> f64 {
        self.records().map(|r| r.upper_bound.max(r.total)).fold(0.0, f64::max)
    }
}

/// Runs the evolution from `t = 0` to the last step `N delta <= t_end`.
pub fn run(
    grid: &Arc<Grid>,
    schedule: &BoundarySchedule,
    params: &ATParams,
    strategy: &Strategy,
) -> Result<Trajectory> {
    run_with(grid, schedule, params, strategy, |_| {})
}

/// Like [`run`], calling `observe` after each accepted step.
pub fn run_with(
    grid: &Arc<Grid>,
    schedule: &BoundarySchedule,
    params: &ATParams,
    strategy: &Strategy,
    mut observe: impl FnMut(&EvolutionState),
) -> Result<Trajectory> {
    let n = schedule.n_steps(params.delta);
    if n == 0 {
        return Err(Error::InvalidParams(format!(
            "time step {} exceeds the end time {}",
            params.delta,
            schedule.t_end()
        )));
    }
    let mut states = Vec::with_capacity(n + 1);
    let first = init_step(grid, schedule, params, strategy)?;
    observe(&first);
    states.push(first);
    for _ in 0..n {
        let next = advance(states.last().expect("non-empty"), schedule, params, strategy)?;
        log::debug!(
            "step {} t={:.4} E={:.6} sweeps={} competitor={}",
            next.step,
            next.t,
            next.record.total,
            next.record.am_sweeps,
            next.record.competitor_accepted
        );
        observe(&next);
        states.push(next);
    }
    Ok(Trajectory { states })
}
