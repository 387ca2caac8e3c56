mod common;

use std::sync::Arc;

use atfrac::energy::{mm_energy, total_energy};
use atfrac::evolution::{
    advance, competitor_step, init_step, run, Amplitude, BoundarySchedule, CrackSite, EvolutionState, Notch, Profile,
    Strategy,
};
use atfrac::form::assemble_phase_form;
use atfrac::solve::alternate_minimize;
use atfrac::{ATParams, Field, Grid};
use common::{active_set_box_qp, bar, dense};

fn bar_for(eps: f64) -> Arc<Grid> {
    bar((5.0 / eps).round() as usize)
}

fn ramp(grid: &Arc<Grid>, rate: f64, t_end: f64) -> BoundarySchedule {
    BoundarySchedule::new(Profile::LinearX.field(grid).unwrap(), Amplitude::Ramp { rate }, t_end).unwrap()
}

/// Homogeneous damage `c` under uniform strain `a`, by a dense scan of
/// `(eta + c^2) a^2 + (1 - c)^2 / (2 eps)` over `[0, 1]`.
fn homogeneous_scan(a: f64, eps: f64, eta: f64) -> (f64, f64) {
    let f = |c: f64| (eta + c * c) * a * a + (1.0 - c).powi(2) / (2.0 * eps);
    (0..=1_000_000)
        .map(|k| k as f64 * 1e-6)
        .map(|c| (c, f(c)))
        .fold((1.0, f(1.0)), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn midpoint_notch(grid: &Grid) -> Notch {
    Notch {
        center: [0.5, 0.0],
        radius: grid.min_spacing(),
        value: 0.9,
    }
}

#[test]
fn alternating_minimization_finds_the_homogeneous_state() {
    let eps = 0.05;
    let grid = bar_for(eps);
    let params = ATParams {
        tol_am: 1e-10,
        ..ATParams::with_defaults(eps, 1.0)
    };
    let a = 0.3;
    let datum = Profile::LinearX.field(&grid).unwrap().scaled(a);
    let ones = Field::constant(&grid, 1.0);
    let am = alternate_minimize(&grid, &datum, &ones, &ones, &datum, &params).unwrap();

    let (c, f) = homogeneous_scan(a, eps, params.eta);
    assert!((c - 1.0 / (1.0 + 2.0 * eps * a * a)).abs() < 1e-4, "scan {c}");
    assert!(am.sweeps <= 20, "{} sweeps", am.sweeps);
    assert!(am.v.min() >= 0.8);
    // interior damage matches the homogeneous minimizer; the v = 1 ends only add a boundary layer
    let mid = am.v.values()[grid.n_nodes() / 2];
    assert!((mid - c).abs() <= 2e-3, "mid {mid} vs {c}");
    let e = am.energy.total();
    assert!(e <= a * a * (1.0 + params.eta) + 1e-12, "energy {e}");
    assert!((e - f).abs() <= 0.05 * f, "energy {e} vs homogeneous {f}");
}

#[test]
fn small_loads_follow_the_homogeneous_branch() {
    let eps = 0.05;
    let grid = bar_for(eps);
    let params = ATParams {
        delta: 0.05,
        ..ATParams::with_defaults(eps, 1.0)
    };
    let traj = run(&grid, &ramp(&grid, 1.0, 0.6), &params, &Strategy::default()).unwrap();
    for s in &traj.states[1..] {
        let t = s.t;
        assert!(
            (s.record.elliptic - t * t).abs() <= 0.1 * t * t,
            "t={t}: {}",
            s.record.elliptic
        );
        assert!(s.v.min() >= 1.0 - 5.0 * eps * t * t, "t={t}: v_min {}", s.v.min());
        let (c, _) = homogeneous_scan(t, eps, params.eta);
        assert!((s.v.min() - c).abs() <= 5e-3, "t={t}: v_min {} vs {c}", s.v.min());
    }
}

#[test]
fn notched_start_relaxes_the_notch_only() {
    let eps = 0.05;
    let grid = bar_for(eps);
    let params = ATParams::with_defaults(eps, 1.0);
    let notch = midpoint_notch(&grid);
    let strategy = Strategy {
        competitor: None,
        notch: Some(notch),
    };
    let state = init_step(&grid, &ramp(&grid, 1.0, 1.0), &params, &strategy).unwrap();

    assert!(state.u.sup_norm() == 0.0);
    assert!((state.record.total - mm_energy(&state.v, eps)).abs() <= 1e-14);

    // with u = 0 the phase problem is a box QP under the notch ceiling; solve it densely
    let form = assemble_phase_form(&grid, &state.u, eps, params.eta).unwrap();
    let (a, b) = dense(&form);
    let ceiling = notch.ceiling(&grid).unwrap();
    let lower: Vec<f64> = (0..grid.n_nodes())
        .map(|k| if grid.is_dirichlet(k) { 1.0 } else { 0.0 })
        .collect();
    let oracle = active_set_box_qp(&a, &b, &lower, ceiling.values());
    let e_oracle = form.eval(&oracle);
    assert!(
        (state.record.total - e_oracle).abs() <= 1e-8,
        "{} vs {e_oracle}",
        state.record.total
    );
    // the ceiling is active exactly on the notch
    for k in 0..grid.n_nodes() {
        if ceiling.values()[k] < 1.0 {
            assert_eq!(state.v.values()[k], ceiling.values()[k]);
        }
    }
    assert!(state.record.total > 0.0 && state.record.total < 0.02);

    // without the notch the initial energy cannot exceed that of (g(0), 1)
    let plain = init_step(&grid, &ramp(&grid, 1.0, 1.0), &params, &Strategy::default()).unwrap();
    let g0 = ramp(&grid, 1.0, 1.0).datum(0.0);
    assert!(plain.record.total <= total_energy(&g0, &Field::constant(&grid, 1.0), &params).unwrap());
}

#[test]
fn unchanged_load_leaves_the_state_alone() {
    let eps = 0.05;
    let grid = bar_for(eps);
    let params = ATParams::with_defaults(eps, 1.0);
    let loaded = BoundarySchedule::new(
        Profile::LinearX.field(&grid).unwrap(),
        Amplitude::Table {
            times: vec![0.0, 0.2, 1.0],
            values: vec![0.0, 0.4, 0.4],
        },
        1.0,
    )
    .unwrap();
    let strategy = Strategy {
        competitor: None,
        notch: Some(midpoint_notch(&grid)),
    };
    let params = ATParams { delta: 0.1, ..params };
    let traj = run(&grid, &loaded, &params, &strategy).unwrap();
    let held: Vec<&EvolutionState> = traj.states.iter().filter(|s| s.t >= 0.3 - 1e-12).collect();
    for pair in held.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        assert!((a.record.total - b.record.total).abs() <= 10.0 * params.tol_am);
        assert_eq!(b.record.work_increment, 0.0);
        let dv =
            a.v.values()
                .iter()
                .zip(b.v.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
        assert!(dv <= 1e-4, "step {}: v moved by {dv}", b.step);
    }
}

#[test]
fn every_step_respects_the_upper_estimate() {
    let eps = 0.05;
    let grid = bar_for(eps);
    let params = ATParams {
        delta: 0.05,
        ..ATParams::with_defaults(eps, 1.0)
    };
    let strategy = Strategy {
        competitor: Some(CrackSite::Point(0.5)),
        notch: Some(midpoint_notch(&grid)),
    };
    let traj = run(&grid, &ramp(&grid, 1.0, 1.5), &params, &strategy).unwrap();
    let mut state = traj.states[0].clone();
    for next in &traj.states[1..] {
        assert!(!next.record.upper_violated, "step {}", next.step);
        assert!(next.record.total <= next.record.upper_bound + 1e-10 * (1.0 + next.record.total));
        // the recorded step is reproducible from the previous state
        let again = advance(&state, &ramp(&grid, 1.0, 1.5), &params, &strategy).unwrap();
        assert_eq!(again.record.total, next.record.total);
        state = next.clone();
    }
}

fn bar_with_competitor(eps: f64) -> (Arc<Grid>, BoundarySchedule, ATParams, Strategy) {
    let grid = bar_for(eps);
    let schedule = ramp(&grid, 1.0, 1.5);
    let params = ATParams::with_defaults(eps, 1.0);
    let strategy = Strategy {
        competitor: Some(CrackSite::Point(0.5)),
        notch: Some(midpoint_notch(&grid)),
    };
    (grid, schedule, params, strategy)
}

/// Uncracked state at time `t`: one step from an AM solution at `t - delta`.
fn uncracked_state(
    grid: &Arc<Grid>,
    schedule: &BoundarySchedule,
    params: &ATParams,
    notch: Notch,
    t: f64,
) -> EvolutionState {
    let plain = Strategy {
        competitor: None,
        notch: Some(notch),
    };
    let mut state = init_step(grid, schedule, params, &plain).unwrap();
    while state.t < t - 1e-12 {
        state = advance(&state, schedule, params, &plain).unwrap();
    }
    state
}

#[test]
fn competitor_is_rejected_under_small_loads() {
    let (grid, schedule, params, strategy) = bar_with_competitor(0.05);
    let coarse = ATParams { delta: 0.1, ..params };
    let state = uncracked_state(&grid, &schedule, &coarse, strategy.notch.unwrap(), 0.3);
    let next = competitor_step(&state, &schedule, &coarse, CrackSite::Point(0.5)).unwrap();
    assert!(!next.record.competitor_accepted);
    assert_eq!(next.record.total, state.record.total);
}

#[test]
fn competitor_wins_just_above_the_griffith_load() {
    let (grid, schedule, params, strategy) = bar_with_competitor(0.02);
    // reach t = 1.12 on the uncracked branch with coarse steps, then offer the crack
    let coarse = ATParams { delta: 0.14, ..params };
    let state = uncracked_state(&grid, &schedule, &coarse, strategy.notch.unwrap(), 1.12);
    assert!(state.v.min() > 0.5, "already cracked: {}", state.v.min());
    assert!(state.record.elliptic > 1.0);
    let next = competitor_step(&state, &schedule, &coarse, CrackSite::Point(0.5)).unwrap();
    assert!(next.record.competitor_accepted);
    assert!(next.record.elliptic <= 0.05, "elliptic {}", next.record.elliptic);
    assert!(next.v.min() < 0.1);
    assert!(next.record.total < state.record.total);
}

#[test]
fn competitor_at_an_existing_crack_changes_little() {
    let eps = 0.05;
    let (grid, schedule, _, strategy) = bar_with_competitor(eps);
    let params = ATParams {
        delta: 0.05,
        ..ATParams::with_defaults(eps, 1.0)
    };
    let traj = run(&grid, &schedule, &params, &strategy).unwrap();
    let cracked = traj
        .states
        .iter()
        .position(|s| s.record.competitor_accepted)
        .expect("the bar cracks before t = 1.5");
    let after = &traj.states[cracked + 1];
    // the site is a cell centre, so the nearest nodes sit h/2 away from it
    let floor = 1.0 - (-grid.min_spacing() / (2.0 * eps)).exp();
    assert!(after.v_upper.min() <= floor + 1e-9, "{} > {floor}", after.v_upper.min());

    let redo = competitor_step(after, &schedule, &params, CrackSite::Point(0.5)).unwrap();
    assert!((redo.record.total - after.record.total).abs() <= 0.05 * after.record.total);

    // the relaxed candidate itself, built by hand
    let dist = CrackSite::Point(0.5).distances(&grid).unwrap();
    let v_c: Vec<f64> = (0..grid.n_nodes())
        .map(|k| {
            if grid.is_dirichlet(k) {
                1.0
            } else {
                after.v_upper.values()[k].min(1.0 - (-dist[k] / eps).exp())
            }
        })
        .collect();
    let v_c = Field::new(&grid, v_c).unwrap();
    let cand = alternate_minimize(&grid, &after.u, &v_c, &v_c, &schedule.datum(after.t), &params).unwrap();
    let e = cand.energy.total();
    assert!(
        (e - after.record.total).abs() <= 0.05 * after.record.total,
        "{e} vs {}",
        after.record.total
    );
}
