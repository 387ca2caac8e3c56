//! Run directories.
//!
//! A run directory holds `config.toml` (the resolved single-`eps` config),
//! `energy.csv` (one row per step), `kkt.csv` (solver residuals per step) and,
//! when enabled, `snapshots/u_NNNNN.txt` and `snapshots/v_NNNNN.txt`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunSpec};
use crate::energy::EnergyRecord;
use crate::error::{Error, Result};
use crate::evolution::{EvolutionState, Trajectory};

pub const CONFIG_FILE: &str = "config.toml";
pub const ENERGY_FILE: &str = "energy.csv";
pub const KKT_FILE: &str = "kkt.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub elliptic: f64,
    pub surface: f64,
    pub total: f64,
    pub work_inc: f64,
    pub work_cum: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub am_sweeps: usize,
    pub competitor_accepted: bool,
}

impl From<&EnergyRecord> for EnergyRow {
    fn from(r: &EnergyRecord) -> Self {
        Self {
            step: r.step,
            t: r.t,
            elliptic: r.elliptic,
            surface: r.surface,
            total: r.total,
            work_inc: r.work_increment,
            work_cum: r.work_cumulative,
            upper_bound: r.upper_bound,
            lower_bound: r.lower_bound,
            am_sweeps: r.am_sweeps,
            competitor_accepted: r.competitor_accepted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktRow {
    pub step: usize,
    pub u_residual: f64,
    pub v_projected_gradient: f64,
}

pub fn snapshot_path(dir: &Path, field: &str, step: usize) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("{field}_{step:05}.txt"))
}

/// Streams the states of one run into its directory.
pub struct RunWriter {
    dir: PathBuf,
    energy: csv::Writer<BufWriter<File>>,
    kkt: csv::Writer<BufWriter<File>>,
    snapshot_every: usize,
}

impl RunWriter {
    /// Creates `dir` (and parents) and writes the config copy.
    pub fn create(dir: &Path, config: &RunConfig, snapshot_every: usize) -> Result<Self> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIG_FILE), config.to_toml_string())?;
        if snapshot_every > 0 {
            fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
        }
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            Ok(csv::Writer::from_writer(BufWriter::new(File::create(dir.join(name))?)))
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            energy: open(ENERGY_FILE)?,
            kkt: open(KKT_FILE)?,
            snapshot_every,
        })
    }

    pub fn write(&mut self, state: &EvolutionState) -> Result<()> {
        self.energy.serialize(EnergyRow::from(&state.record))?;
        self.kkt.serialize(KktRow {
            step: state.step,
            u_residual: state.u_residual,
            v_projected_gradient: state.v_projected_gradient,
        })?;
        if self.snapshot_every > 0 && state.step.is_multiple_of(self.snapshot_every) {
            for (name, field) in [("u", &state.u), ("v", &state.v)] {
                let file = File::create(snapshot_path(&self.dir, name, state.step))?;
                field.write_snapshot(BufWriter::new(file))?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.energy.flush()?;
        self.kkt.flush()?;
        Ok(())
    }
}

/// Writes a finished trajectory.
pub fn write_run(dir: &Path, spec: &RunSpec, trajectory: &Trajectory) -> Result<()> {
    let mut writer = RunWriter::create(dir, &spec.config, spec.snapshot_every)?;
    for state in &trajectory.states {
        writer.write(state)?;
    }
    writer.finish()
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path)?;
    csv::Reader::from_reader(BufReader::new(file))
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                reason: format!("row {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn read_energy_log(dir: &Path) -> Result<Vec<EnergyRow>> {
    read_rows(&dir.join(ENERGY_FILE))
}

pub fn read_kkt_log(dir: &Path) -> Result<Vec<KktRow>> {
    read_rows(&dir.join(KKT_FILE))
}

/// Steps with a `v` snapshot, ascending.
pub fn snapshot_steps(dir: &Path) -> Result<Vec<usize>> {
    let snaps = dir.join(SNAPSHOT_DIR);
    if !snaps.is_dir() {
        return Ok(Vec::new());
    }
    let mut steps = Vec::new();
    for entry in fs::read_dir(&snaps)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(step) = name
            .strip_prefix("v_")
            .and_then(|s| s.strip_suffix(".txt"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            steps.push(step);
        }
    }
    steps.sort_unstable();
    Ok(steps)
}
