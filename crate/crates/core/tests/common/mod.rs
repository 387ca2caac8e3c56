#![allow(dead_code)]

use std::sync::Arc;

use atfrac::form::{assemble_phase_form, QuadraticForm};
use atfrac::{Face, Field, Grid};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bar(n: usize) -> Arc<Grid> {
    Grid::new(&[1.0], &[n], &[Face::Left, Face::Right]).unwrap()
}

/// Dense copy of a form: (A, b).
pub fn dense(form: &QuadraticForm) -> (Vec<Vec<f64>>, Vec<f64>) {
    (form.a.to_dense(), form.b.clone())
}

pub fn objective(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut q = 0.0;
    for i in 0..n {
        let ax: f64 = (0..n).map(|j| a[i][j] * x[j]).sum();
        q += 0.5 * x[i] * ax + b[i] * x[i];
    }
    q
}

/// Solves the SPD system `m y = r` by Cholesky factorization.
pub fn cholesky_solve(m: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                assert!(d > 0.0, "matrix is not positive definite");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (r[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Minimizer of the free block with the other entries held at `x`.
fn solve_free(a: &[Vec<f64>], b: &[f64], x: &[f64], free: &[usize]) -> Vec<f64> {
    let n = x.len();
    let is_free: Vec<bool> = (0..n).map(|i| free.contains(&i)).collect();
    let m: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| a[i][j]).collect()).collect();
    let r: Vec<f64> = free
        .iter()
        .map(|&i| -b[i] - (0..n).filter(|&j| !is_free[j]).map(|j| a[i][j] * x[j]).sum::<f64>())
        .collect();
    if free.is_empty() {
        Vec::new()
    } else {
        cholesky_solve(&m, &r)
    }
}

/// Exhaustive search: every assignment of each coordinate to its lower bound,
/// its upper bound or the free set. The feasible candidate of least objective
/// is the minimizer. Exponential; for n <= 8 only.
pub fn brute_force_box_qp(a: &[Vec<f64>], b: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert!(n <= 8);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut x = vec![0.0; n];
        let mut free = Vec::new();
        let mut c = code;
        for i in 0..n {
            match c % 3 {
                0 => x[i] = lower[i],
                1 => x[i] = upper[i],
                _ => free.push(i),
            }
            c /= 3;
        }
        let xf = solve_free(a, b, &x, &free);
        for (k, &i) in free.iter().enumerate() {
            x[i] = xf[k];
        }
        if (0..n).any(|i| x[i] < lower[i] - 1e-12 || x[i] > upper[i] + 1e-12) {
            continue;
        }
        let q = objective(a, b, &x);
        if best.as_ref().is_none_or(|(bq, _)| q < *bq) {
            best = Some((q, x));
        }
    }
    best.expect("x = lower is always feasible").1
}

/// Primal active-set method for `min x'Ax/2 + b'x` on a box, with dense
/// Cholesky solves on the free block. Finite for strictly convex problems.
pub fn active_set_box_qp(a: &[Vec<f64>], b: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Free,
        Lower,
        Upper,
    }
    let n = b.len();
    let mut x: Vec<f64> = (0..n).map(|i| 0.0f64.clamp(lower[i], upper[i])).collect();
    let mut state: Vec<State> = (0..n)
        .map(|i| {
            if x[i] == lower[i] {
                State::Lower
            } else if x[i] == upper[i] {
                State::Upper
            } else {
                State::Free
            }
        })
        .collect();
    for _ in 0..100 * (n + 1) {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == State::Free).collect();
        let target = solve_free(a, b, &x, &free);
        let step: Vec<f64> = free.iter().zip(&target).map(|(&i, &t)| t - x[i]).collect();
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if step.iter().all(|p| p.abs() <= 1e-14 * scale) {
            // stationary on the working set: release the worst wrong-signed multiplier
            let g: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| a[i][j] * x[j]).sum::<f64>() + b[i])
                .collect();
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                if lower[i] == upper[i] {
                    continue;
                }
                let wrong = match state[i] {
                    State::Lower => -g[i],
                    State::Upper => g[i],
                    State::Free => 0.0,
                };
                if wrong > 1e-13 && worst.is_none_or(|(_, w)| wrong > w) {
                    worst = Some((i, wrong));
                }
            }
            match worst {
                None => return x,
                Some((i, _)) => state[i] = State::Free,
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for (k, &i) in free.iter().enumerate() {
            let p = step[k];
            let limit = if p < 0.0 {
                (lower[i] - x[i]) / p
            } else if p > 0.0 {
                (upper[i] - x[i]) / p
            } else {
                f64::INFINITY
            };
            if limit < alpha {
                alpha = limit;
                blocking = Some((i, if p < 0.0 { State::Lower } else { State::Upper }));
            }
        }
        for (k, &i) in free.iter().enumerate() {
            x[i] = (x[i] + alpha * step[k]).clamp(lower[i], upper[i]);
        }
        if let Some((i, s)) = blocking {
            x[i] = if s == State::Lower { lower[i] } else { upper[i] };
            state[i] = s;
        }
    }
    panic!("active-set oracle did not terminate");
}

/// A random phase-field box QP on a 1D bar: random displacement, `eps`, `eta`
/// and ceiling (with exact zeros), Dirichlet ends pinned at 1.
pub struct PhaseInstance {
    pub grid: Arc<Grid>,
    pub form: QuadraticForm,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn random_phase_instance(rng: &mut impl Rng, max_nodes: usize) -> PhaseInstance {
    let cells = rng.gen_range(4..max_nodes);
    let grid = bar(cells);
    let eps = rng.gen_range(0.05..0.3);
    let eta = eps * eps / 10.0;
    let amp = rng.gen_range(0.0..3.0);
    let u = Field::new(&grid, (0..=cells).map(|_| amp * rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let form = assemble_phase_form(&grid, &u, eps, eta).unwrap();
    let upper: Vec<f64> = (0..=cells)
        .map(|k| {
            if grid.is_dirichlet(k) {
                1.0
            } else if rng.gen_bool(0.15) {
                0.0
            } else {
                rng.gen_range(0.2..1.0)
            }
        })
        .collect();
    let lower: Vec<f64> = (0..=cells)
        .map(|k| if grid.is_dirichlet(k) { 1.0 } else { 0.0 })
        .collect();
    PhaseInstance {
        grid,
        form,
        lower,
        upper,
    }
}

/// Worst nodal and energy gaps of `solve_box_qp` against the active-set oracle
/// over `cases` random phase instances with at most 51 nodes.
pub fn box_qp_worst_gaps(rng: &mut impl Rng, cases: usize, tol_qp: f64) -> (f64, f64) {
    use atfrac::solve::{solve_box_qp, Dirichlet};
    let (mut sup, mut gap) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let inst = random_phase_instance(rng, 51);
        let n = inst.form.n();
        let (a, b) = dense(&inst.form);
        let oracle = active_set_box_qp(&a, &b, &inst.lower, &inst.upper);
        let bc = Dirichlet::constant(inst.grid.dirichlet_mask(), 1.0);
        let sol = solve_box_qp(&inst.form, &inst.lower, &inst.upper, &bc, None, tol_qp, 1_000_000).unwrap();
        assert!((0..n).all(|i| sol.x[i] >= inst.lower[i] && sol.x[i] <= inst.upper[i]));
        sup = sup.max((0..n).map(|i| (sol.x[i] - oracle[i]).abs()).fold(0.0, f64::max));
        gap = gap.max((inst.form.eval(&sol.x) - inst.form.eval(&oracle)).abs());
    }
    (sup, gap)
}

pub fn random_grid(rng: &mut impl Rng) -> Arc<Grid> {
    if rng.gen_bool(0.5) {
        Grid::new(
            &[rng.gen_range(0.5..2.0)],
            &[rng.gen_range(3..30)],
            &[Face::Left, Face::Right],
        )
        .unwrap()
    } else {
        Grid::new(
            &[rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)],
            &[rng.gen_range(2..10), rng.gen_range(2..10)],
            &[Face::Bottom, Face::Top],
        )
        .unwrap()
    }
}

pub fn random_state(rng: &mut impl Rng, grid: &Arc<Grid>) -> (Field, Field) {
    let n = grid.n_nodes();
    let amp = rng.gen_range(0.1..2.0);
    let u = Field::new(grid, (0..n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let v = Field::new(grid, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    (u, v)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative mismatch between a central difference of `total_energy` and the
/// gradient of an assembled form, along a random direction.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub dim: usize,
    pub u_error: f64,
    pub v_error: f64,
}

pub fn gradient_checks(rng: &mut impl Rng, cases: usize) -> Vec<GradientCheck> {
    use atfrac::energy::total_energy;
    use atfrac::form::assemble_weighted_stiffness;
    use atfrac::ATParams;
    (0..cases)
        .map(|_| {
            let grid = random_grid(rng);
            let eps = rng.gen_range(0.05..0.4);
            let p = ATParams::with_defaults(eps, grid.measure());
            let (u, v) = random_state(rng, &grid);
            let n = grid.n_nodes();
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = 1e-4;
            let shifted = |f: &Field, sign: f64| {
                f.with_values((0..n).map(|k| f.values()[k] + sign * s * d[k]).collect())
                    .unwrap()
            };
            let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(1e-3);

            let fd_u = (total_energy(&shifted(&u, 1.0), &v, &p).unwrap()
                - total_energy(&shifted(&u, -1.0), &v, &p).unwrap())
                / (2.0 * s);
            let form_u = assemble_weighted_stiffness(&grid, &v, p.eta).unwrap();
            let an_u = dot(&form_u.gradient(u.values()), &d);

            let fd_v = (total_energy(&u, &shifted(&v, 1.0), &p).unwrap()
                - total_energy(&u, &shifted(&v, -1.0), &p).unwrap())
                / (2.0 * s);
            let form_v = assemble_phase_form(&grid, &u, p.eps, p.eta).unwrap();
            let an_v = dot(&form_v.gradient(v.values()), &d);

            GradientCheck {
                dim: grid.dim(),
                u_error: rel(fd_u, an_u),
                v_error: rel(fd_v, an_v),
            }
        })
        .collect()
}
