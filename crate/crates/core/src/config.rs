//! Run configuration.
//!
//! A config is a TOML file with the sections `[grid]`, `[schedule]`, `[params]`,
//! `[strategy]` and `[output]`. Every key is a scalar or a flat array. Values tied
//! to `eps` (spacing, `eta`, time step) may be omitted and are then derived per
//! run. A list of `eps` values turns the file into a sweep.
//!
//! ```toml
//! [grid]
//! dim = 1
//! extent = [1.0]
//! dirichlet = ["left", "right"]
//!
//! [schedule]
//! profile = "linear_x"
//! amplitude = "ramp"
//! rate = 1.0
//! t_end = 1.5
//!
//! [params]
//! eps = [0.08, 0.04, 0.02]
//!
//! [strategy]
//! competitor = "point"
//! site = 0.5
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy::ATParams;
use crate::error::{Error, Result};
use crate::evolution::{Amplitude, BoundarySchedule, CrackSite, Notch, Profile, Strategy};
use crate::grid::{Face, Grid};

pub const DEFAULT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub schedule: ScheduleSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub extent: Vec<f64>,
    /// Cells per axis; derived from `h` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
    /// Target spacing, `eps/5` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Faces carrying the boundary datum; both ends of the first axis in 1D, bottom and top in 2D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<Vec<Face>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeKind {
    Ramp,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub profile: Profile,
    pub amplitude: AmplitudeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub t_end: f64,
}

fn one() -> f64 {
    1.0
}

/// One value or a sweep over several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSpec {
    One(f64),
    Many(Vec<f64>),
}

impl EpsSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpsSpec::One(e) => vec![*e],
            EpsSpec::Many(es) => es.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub eps: EpsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_am: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_lin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_qp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompetitorKind {
    Point,
    HorizontalLine,
    VerticalLine,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competitor: Option<CompetitorKind>,
    /// Coordinate of the competitor site along its axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_center: Option<Vec<f64>>,
    /// Defaults to the grid spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notch_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write field snapshots every this many steps; 0 disables them.
    #[serde(default)]
    pub snapshot_every: usize,
}

/// A fully resolved run: one `eps`, a built grid and every default applied.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub grid: Arc<Grid>,
    pub schedule: BoundarySchedule,
    pub params: ATParams,
    pub strategy: Strategy,
    pub threshold: f64,
    pub snapshot_every: usize,
    /// The single-`eps` config this run was resolved from, with derived values filled in.
    pub config: RunConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(reason) => Error::Malformed {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config fields are always representable in TOML")
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self.params.eps, EpsSpec::Many(_))
    }

    /// Checks everything that does not need a resolved `eps`.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.dim == 1 || g.dim == 2) {
            return Err(Error::Config(format!("grid.dim must be 1 or 2, got {}", g.dim)));
        }
        if g.extent.len() != g.dim {
            return Err(Error::Config(format!(
                "grid.extent needs {} entries, got {}",
                g.dim,
                g.extent.len()
            )));
        }
        if let Some(cells) = &g.cells {
            if cells.len() != g.dim {
                return Err(Error::Config(format!(
                    "grid.cells needs {} entries, got {}",
                    g.dim,
                    cells.len()
                )));
            }
        }
        if let Some(h) = g.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("grid.h must be positive, got {h}")));
            }
        }

        let eps = self.params.eps.values();
        if eps.is_empty() {
            return Err(Error::Config("params.eps must not be empty".into()));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("eps must be positive, got {e}")));
        }
        if let Some(eta) = self.params.eta {
            if let Some(e) = eps.iter().find(|&&e| eta >= e) {
                return Err(Error::Config(format!(
                    "eta = {eta} must be much smaller than eps = {e}"
                )));
            }
        }

        self.amplitude()?.validate()?;
        if self.schedule.profile == Profile::ShearY && g.dim != 2 {
            return Err(Error::Config("profile shear_y needs dim = 2".into()));
        }

        let s = &self.strategy;
        if s.competitor.is_some() != s.site.is_some() {
            return Err(Error::Config(
                "strategy.competitor and strategy.site go together".into(),
            ));
        }
        let notch_keys = [s.notch_radius.is_some(), s.notch_value.is_some()];
        if s.notch_center.is_none() && notch_keys.iter().any(|&k| k) {
            return Err(Error::Config("notch_radius and notch_value need notch_center".into()));
        }
        if let Some(c) = &s.notch_center {
            if c.len() != g.dim {
                return Err(Error::Config(format!("notch_center needs {} entries", g.dim)));
            }
        }
        if let Some(th) = s.threshold {
            if !(th > 0.0 && th < 1.0) {
                return Err(Error::Config(format!("threshold must lie in (0, 1), got {th}")));
            }
        }
        Ok(())
    }

    fn amplitude(&self) -> Result<Amplitude> {
        let s = &self.schedule;
        match s.amplitude {
            AmplitudeKind::Ramp => {
                let rate = s
                    .rate
                    .ok_or_else(|| Error::Config("ramp amplitude needs schedule.rate".into()))?;
                Ok(Amplitude::Ramp { rate })
            }
            AmplitudeKind::Table => match (&s.times, &s.values) {
                (Some(times), Some(values)) => Ok(Amplitude::Table {
                    times: times.clone(),
                    values: values.clone(),
                }),
                _ => Err(Error::Config(
                    "table amplitude needs schedule.times and schedule.values".into(),
                )),
            },
        }
    }

    /// One resolved run per `eps`, in the order given.
    pub fn members(&self) -> Result<Vec<RunSpec>> {
        self.validate()?;
        self.params.eps.values().into_iter().map(|e| self.resolve(e)).collect()
    }

    fn resolve(&self, eps: f64) -> Result<RunSpec> {
        let g = &self.grid;
        let h = g.h.unwrap_or(eps / 5.0);
        let cells = match &g.cells {
            Some(c) => c.clone(),
            None => g
                .extent
                .iter()
                .map(|l| ((l / h) - 1e-9).ceil().max(1.0) as usize)
                .collect(),
        };
        let dirichlet = g.dirichlet.clone().unwrap_or_else(|| match g.dim {
            1 => vec![Face::Left, Face::Right],
            _ => vec![Face::Bottom, Face::Top],
        });
        let grid = Grid::new(&g.extent, &cells, &dirichlet)?;
        if grid.min_spacing() >= eps {
            log::warn!(
                "spacing {} does not resolve eps = {eps}; results are under-resolved",
                grid.min_spacing()
            );
        }

        let defaults = ATParams::with_defaults(eps, grid.measure());
        let p = &self.params;
        let params = ATParams {
            eps,
            eta: p.eta.unwrap_or(defaults.eta),
            delta: p.delta.unwrap_or(defaults.delta),
            tol_am: p.tol_am.unwrap_or(defaults.tol_am),
            tol_lin: p.tol_lin.unwrap_or(defaults.tol_lin),
            tol_qp: p.tol_qp.unwrap_or(defaults.tol_qp),
            max_sweeps: p.max_sweeps.unwrap_or(defaults.max_sweeps),
        };
        params.validate(&grid)?;

        let schedule = BoundarySchedule::new(
            self.schedule.profile.field(&grid)?,
            self.amplitude()?,
            self.schedule.t_end,
        )?;

        let s = &self.strategy;
        let competitor = match (s.competitor, s.site) {
            (Some(CompetitorKind::Point), Some(x)) => Some(CrackSite::Point(x)),
            (Some(CompetitorKind::HorizontalLine), Some(y)) => Some(CrackSite::HorizontalLine(y)),
            (Some(CompetitorKind::VerticalLine), Some(x)) => Some(CrackSite::VerticalLine(x)),
            _ => None,
        };
        if let Some(site) = competitor {
            site.distances(&grid)?;
        }
        let notch = s.notch_center.as_ref().map(|c| Notch {
            center: [c[0], c.get(1).copied().unwrap_or(0.0)],
            radius: s.notch_radius.unwrap_or(grid.min_spacing()),
            value: s.notch_value.unwrap_or(0.0),
        });
        if let Some(n) = &notch {
            n.ceiling(&grid)?;
        }

        let mut config = self.clone();
        config.params = ParamsSection {
            eps: EpsSpec::One(eps),
            eta: Some(params.eta),
            delta: Some(params.delta),
            tol_am: Some(params.tol_am),
            tol_lin: Some(params.tol_lin),
            tol_qp: Some(params.tol_qp),
            max_sweeps: Some(params.max_sweeps),
        };
        config.grid.cells = Some(cells);
        config.grid.h = None;
        config.grid.dirichlet = Some(dirichlet);
        config.strategy.notch_radius = notch.map(|n| n.radius);
        config.strategy.notch_value = notch.map(|n| n.value);

        Ok(RunSpec {
            grid,
            schedule,
            params,
            strategy: Strategy { competitor, notch },
            threshold: s.threshold.unwrap_or(DEFAULT_THRESHOLD),
            snapshot_every: self.output.snapshot_every,
            config,
        })
    }
}
