//! Oscillation over parabolic cylinders and its decay across the shrinking
//! family Q_R ⊃ Q_{R/4} ⊃ Q_{R/16} ⊃ ...

use crate::error::{Error, Result};
use crate::solver::RunRecord;

use super::{ball_nodes, require_time_coverage, weighted_window, ParabolicCylinder};

/// Noise floor below which a measured oscillation is treated as zero when
/// judging decay factors.
pub const OSCILLATION_FLOOR: f64 = 1e-10;

/// min and max of u over the cylinder's snapshot nodes. Errors unless the
/// record spans the cylinder's full time window and the cylinder meets both
/// the grid and at least one snapshot.
pub fn cylinder_range(record: &RunRecord, cyl: &ParabolicCylinder) -> Result<(f64, f64)> {
    let lo = cyl.t0 - cyl.time_depth();
    require_time_coverage(record, lo, cyl.t0)?;
    let nodes = ball_nodes(&record.grid, cyl.x0, cyl.radius);
    if nodes.is_empty() {
        return Err(Error::Coverage(format!(
            "no grid nodes inside the ball of radius {} centered at ({}, {})",
            cyl.radius, cyl.x0[0], cyl.x0[1]
        )));
    }
    let window = weighted_window(record, lo, cyl.t0, false);
    if window.is_empty() {
        return Err(Error::Coverage(format!(
            "no snapshots in the cylinder window ({lo}, {}]",
            cyl.t0
        )));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for ws in &window {
        let u = ws.snap.u.values();
        for &i in &nodes {
            min = min.min(u[i]);
            max = max.max(u[i]);
        }
    }
    Ok((min, max))
}

/// max − min of u over the cylinder's snapshot nodes.
pub fn oscillation(record: &RunRecord, cyl: &ParabolicCylinder) -> Result<f64> {
    let (min, max) = cylinder_range(record, cyl)?;
    Ok(max - min)
}

/// One level of the shrinking-cylinder decay table.
#[derive(Debug, Clone, Copy)]
pub struct OscLevel {
    pub index: usize,
    pub radius: f64,
    pub oscillation: f64,
    /// μ_j = osc_{j+1}/osc_j; `None` on the last level and wherever osc_j = 0
    /// leaves the ratio undefined.
    pub decay: Option<f64>,
    /// A decay factor ≥ 1 above the noise floor.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct OscillationDecayReport {
    pub x0: [f64; 2],
    pub t0: f64,
    pub base_radius: f64,
    pub alpha: f64,
    pub levels: Vec<OscLevel>,
}

impl OscillationDecayReport {
    pub fn oscillations(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.oscillation).collect()
    }

    /// μ_0 = osc(Q_{R/4})/osc(Q_R), the factor the decay argument bounds away
    /// from 1.
    pub fn mu0(&self) -> Option<f64> {
        self.levels.first().and_then(|l| l.decay)
    }

    pub fn any_flagged(&self) -> bool {
        self.levels.iter().any(|l| l.flagged)
    }

    /// True when every oscillation is zero (constant data), so no decay
    /// factor is defined.
    pub fn degenerate(&self) -> bool {
        self.levels.iter().all(|l| l.oscillation == 0.0)
    }
}

/// Oscillations over the nested cylinders Q_{R/4^j}(x0, t0), j = 0..=depth,
/// with the measured decay factors between consecutive levels. The cylinder
/// order is the record's operator order.
pub fn oscillation_decay_report(
    record: &RunRecord,
    x0: [f64; 2],
    t0: f64,
    radius: f64,
    depth: usize,
) -> Result<OscillationDecayReport> {
    let mut oscs = Vec::with_capacity(depth + 1);
    for j in 0..=depth {
        let r = radius / 4f64.powi(j as i32);
        let cyl = ParabolicCylinder::new(x0, t0, r, record.alpha)?;
        let osc = oscillation(record, &cyl)
            .map_err(|e| Error::Coverage(format!("decay level {j} (radius {r}): {e}")))?;
        oscs.push((r, osc));
    }
    let levels = oscs
        .iter()
        .enumerate()
        .map(|(j, &(r, osc))| {
            let decay = if j < depth && osc > 0.0 { Some(oscs[j + 1].1 / osc) } else { None };
            let flagged = decay.is_some_and(|mu| mu >= 1.0) && osc > OSCILLATION_FLOOR;
            OscLevel { index: j, radius: r, oscillation: osc, decay, flagged }
        })
        .collect();
    Ok(OscillationDecayReport { x0, t0, base_radius: radius, alpha: record.alpha, levels })
}
