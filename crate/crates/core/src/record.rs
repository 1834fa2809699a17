//! Time-stamped run traces and their CSV export.

use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Provenance stamped into every artifact file.
#[derive(Debug, Clone)]
pub struct ArtifactMeta {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactMeta {
    pub fn header_line(&self) -> String {
        format!(
            "# produced_by={} config_hash={} seed={}",
            self.subcommand, self.config_hash, self.seed
        )
    }
}

/// One sample of a controlled (or uncontrolled) run, taken at the end of a
/// command interval.
#[derive(Debug, Clone, Copy)]
pub struct RunRow {
    pub t_s: f64,
    pub y_over_d: f64,
    pub ydot_norm: f64,
    pub duty: f64,
    pub alpha: f64,
    pub reward: f64,
}

/// Uniformly sampled trace of normalized displacement, velocity, duty,
/// normalized rotation rate, and reward.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub sample_interval_s: f64,
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn new(sample_interval_s: f64) -> Self {
        Self {
            sample_interval_s,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: RunRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn y_over_d(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_over_d).collect()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.alpha).collect()
    }

    pub fn duty(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.duty).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reward).collect()
    }

    /// Time-average of the normalized rotational speed.
    pub fn mean_alpha(&self) -> f64 {
        crate::analysis::mean(&self.alpha())
    }

    /// Rows with `t_s` in `[t0, t1)`.
    pub fn slice_time(&self, t0: f64, t1: f64) -> Vec<RunRow> {
        self.rows
            .iter()
            .filter(|r| r.t_s >= t0 && r.t_s < t1)
            .cloned()
            .collect()
    }

    pub fn write_csv(&self, path: &Path, meta: &ArtifactMeta) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{}", meta.header_line())?;
        writeln!(f, "t_s,y_over_d,ydot_norm,duty,alpha,reward")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:.4},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.t_s, r.y_over_d, r.ydot_norm, r.duty, r.alpha, r.reward
            )?;
        }
        f.flush()?;
        Ok(())
    }
}
