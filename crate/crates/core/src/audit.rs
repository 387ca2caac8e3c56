//! Invariant audit of a finished run directory.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::output::{read_energy_log, read_kkt_log, snapshot_path, snapshot_steps, CONFIG_FILE};

/// Logged solver residuals may exceed their tolerance by this factor; the
/// reported residuals are recomputed ones while the solvers stop on recursive ones.
pub const KKT_FACTOR: f64 = 10.0;
/// Slack on the non-decrease of the logged surface energy.
pub const SURFACE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Irreversibility {
        step: usize,
        previous: usize,
        node: usize,
        before: f64,
        after: f64,
    },
    UpperBound {
        step: usize,
        total: f64,
        bound: f64,
    },
    LowerBound {
        step: usize,
        total: f64,
        bound: f64,
    },
    EnergySplit {
        step: usize,
        total: f64,
        parts: f64,
    },
    SurfaceDecrease {
        step: usize,
        before: f64,
        after: f64,
    },
    DisplacementResidual {
        step: usize,
        residual: f64,
        limit: f64,
    },
    PhaseResidual {
        step: usize,
        residual: f64,
        limit: f64,
    },
    StepSequence {
        row: usize,
        step: usize,
    },
}

impl Violation {
    pub fn step(&self) -> usize {
        match *self {
            Violation::Irreversibility { step, .. }
            | Violation::UpperBound { step, .. }
            | Violation::LowerBound { step, .. }
            | Violation::EnergySplit { step, .. }
            | Violation::SurfaceDecrease { step, .. }
            | Violation::DisplacementResidual { step, .. }
            | Violation::PhaseResidual { step, .. }
            | Violation::StepSequence { step, .. } => step,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Irreversibility {
                step,
                previous,
                node,
                before,
                after,
            } => write!(
                f,
                "step {step}: v increased at node {node} ({before:e} at step {previous} -> {after:e})"
            ),
            Violation::UpperBound { step, total, bound } => {
                write!(f, "step {step}: energy {total:e} above its upper bound {bound:e}")
            }
            Violation::LowerBound { step, total, bound } => {
                write!(f, "step {step}: energy {total:e} below its lower bound {bound:e}")
            }
            Violation::EnergySplit { step, total, parts } => {
                write!(
                    f,
                    "step {step}: total {total:e} differs from elliptic + surface = {parts:e}"
                )
            }
            Violation::SurfaceDecrease { step, before, after } => {
                write!(f, "step {step}: surface energy decreased from {before:e} to {after:e}")
            }
            Violation::DisplacementResidual { step, residual, limit } => {
                write!(f, "step {step}: displacement residual {residual:e} exceeds {limit:e}")
            }
            Violation::PhaseResidual { step, residual, limit } => {
                write!(
                    f,
                    "step {step}: phase-field projected gradient {residual:e} exceeds {limit:e}"
                )
            }
            Violation::StepSequence { row, step } => write!(f, "step {step}: found in row {row}, out of sequence"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub steps: usize,
    pub snapshots: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn bound_tolerance(total: f64) -> f64 {
    1e-10 * (1.0 + total.abs())
}

/// Reads a run directory and checks irreversibility (on consecutive `v`
/// snapshots, bitwise), the logged energy bounds, the energy split, the
/// non-decrease of the surface energy and the solver residuals. Unreadable or
/// malformed files are errors; broken invariants are reported as violations.
pub fn check(dir: &Path) -> Result<AuditReport> {
    let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
    if config.is_sweep() {
        return Err(Error::Config(format!(
            "{} describes a sweep; check one member directory at a time",
            dir.display()
        )));
    }
    let spec = config.members()?.remove(0);
    let energy = read_energy_log(dir)?;
    let kkt = read_kkt_log(dir)?;
    let mut violations = Vec::new();

    for (row, r) in energy.iter().enumerate() {
        if r.step != row {
            violations.push(Violation::StepSequence { row, step: r.step });
        }
        let parts = r.elliptic + r.surface;
        if (r.total - parts).abs() > 1e-12 * (1.0 + r.total.abs()) {
            violations.push(Violation::EnergySplit {
                step: r.step,
                total: r.total,
                parts,
            });
        }
        if r.total > r.upper_bound + bound_tolerance(r.total) {
            violations.push(Violation::UpperBound {
                step: r.step,
                total: r.total,
                bound: r.upper_bound,
            });
        }
        if r.total < r.lower_bound - bound_tolerance(r.total) {
            violations.push(Violation::LowerBound {
                step: r.step,
                total: r.total,
                bound: r.lower_bound,
            });
        }
    }
    for w in energy.windows(2) {
        if w[1].surface < w[0].surface - SURFACE_SLACK {
            violations.push(Violation::SurfaceDecrease {
                step: w[1].step,
                before: w[0].surface,
                after: w[1].surface,
            });
        }
    }

    let u_limit = KKT_FACTOR * spec.params.tol_lin;
    let v_limit = KKT_FACTOR * spec.params.tol_qp;
    for (row, k) in kkt.iter().enumerate() {
        if k.step != row {
            violations.push(Violation::StepSequence { row, step: k.step });
        }
        if !(k.u_residual <= u_limit) {
            violations.push(Violation::DisplacementResidual {
                step: k.step,
                residual: k.u_residual,
                limit: u_limit,
            });
        }
        if !(k.v_projected_gradient <= v_limit) {
            violations.push(Violation::PhaseResidual {
                step: k.step,
                residual: k.v_projected_gradient,
                limit: v_limit,
            });
        }
    }

    let steps = snapshot_steps(dir)?;
    let read_v = |step: usize| -> Result<Field> {
        let path = snapshot_path(dir, "v", step);
        let reader = BufReader::new(File::open(&path)?);
        Field::read_snapshot(&spec.grid, reader).map_err(|e| match e {
            Error::Malformed { reason, .. } => Error::Malformed { path, reason },
            other => other,
        })
    };
    let mut previous: Option<(usize, Field)> = None;
    for &step in &steps {
        let v = read_v(step)?;
        if let Some((prev_step, prev)) = &previous {
            if let Some(node) = (0..v.values().len()).find(|&k| v.values()[k] > prev.values()[k]) {
                violations.push(Violation::Irreversibility {
                    step,
                    previous: *prev_step,
                    node,
                    before: prev.values()[node],
                    after: v.values()[node],
                });
            }
        }
        previous = Some((step, v));
    }

    violations.sort_by_key(Violation::step);
    Ok(AuditReport {
        steps: energy.len(),
        snapshots: steps.len(),
        violations,
    })
}
