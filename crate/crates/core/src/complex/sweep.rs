//! Threshold sweeps with plateau-based selection.
//!
//! The complex is rebuilt at every grid point and the pair (beta0, beta1) is
//! tracked; the selected configuration sits at the midpoint of the longest
//! contiguous run over which the pair is constant.

use serde::{Deserialize, Serialize};

use super::{betti_numbers, build_complex, EventStream, ThresholdConfig, TopologySummary};
use crate::error::{GvfError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub config: ThresholdConfig,
    pub summary: TopologySummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Index into `points` of the selected configuration.
    pub selected: usize,
    pub plateau_len: usize,
    /// Set when every grid point has a distinct Betti pair; the first
    /// configuration is returned in that case.
    pub no_plateau: bool,
}

impl SweepReport {
    pub fn selected_config(&self) -> &ThresholdConfig {
        &self.points[self.selected].config
    }
}

/// Evaluates the grid in order (the caller sorts it by the swept parameter)
/// and selects the midpoint of the longest stable plateau; ties go to the
/// earliest run.
pub fn sweep_thresholds(
    events: &EventStream,
    t0: f64,
    grid: &[ThresholdConfig],
) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(GvfError::InvalidConfig("sweep grid is empty".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for cfg in grid {
        let complex = build_complex(events, t0, cfg)?;
        points.push(SweepPoint {
            config: *cfg,
            summary: betti_numbers(&complex)?,
        });
    }

    let key = |p: &SweepPoint| (p.summary.beta0, p.summary.beta1);
    let mut best_start = 0usize;
    let mut best_len = 1usize;
    let mut run_start = 0usize;
    for i in 1..points.len() {
        if key(&points[i]) != key(&points[i - 1]) {
            run_start = i;
        }
        let len = i - run_start + 1;
        if len > best_len {
            best_len = len;
            best_start = run_start;
        }
    }

    let no_plateau = points.len() > 1 && best_len == 1;
    let selected = if no_plateau {
        0
    } else {
        best_start + (best_len - 1) / 2
    };
    Ok(SweepReport {
        points,
        selected,
        plateau_len: best_len,
        no_plateau,
    })
}
