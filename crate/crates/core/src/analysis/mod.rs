//! Quantitative diagnostics over finished runs: dyadic level/cylinder
//! ladders with explicit cutoffs, truncation energies and the two-step
//! geometric recursion with its convergence threshold, oscillation decay
//! across shrinking cylinders, isoperimetric measure diagnostics, empirical
//! energy-inequality constants, and modulus-of-continuity fits.
//!
//! Everything here is read-only over a [`RunRecord`]. Time integrals and
//! space-time measures are discretized over the record's snapshot times: a
//! snapshot at t_k carries the weight t_k − t_{k−1} (its gap to the previous
//! snapshot; the very first snapshot carries 0), and spatial sets are counted
//! node by node times the cell measure. With exact comparisons for membership
//! this makes measures additive over disjoint cylinders to rounding error.
//! Sup-in-time quantities use snapshot times only, so energy reports need a
//! snapshot cadence of at least 64 per unit time to be meaningful.

mod energy;
mod isoperimetric;
mod ladder;
mod modulus;
mod oscillation;
mod recursion;
mod report;

pub use energy::{energy_inequality_report, truncation_energy, EnergyReport};
pub use isoperimetric::{
    alternative_constants, isoperimetric_diagnostic, AlternativeConstants, IsoperimetricReport,
};
pub use ladder::{degiorgi_levels, DeGiorgiLadder};
pub use modulus::{
    fit_modulus, geometric_decay_check, GeometricDecayCheck, ModulusFit, ModulusModel,
};
pub use oscillation::{
    cylinder_range, oscillation, oscillation_decay_report, OscLevel, OscillationDecayReport,
    OSCILLATION_FLOOR,
};
pub use recursion::{degiorgi_threshold, simulate_recursion, RecursionReport};
pub use report::{ladder_table_csv, oscillation_decay_csv, plot_columns, LadderTableRow, Summary};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solver::{RunRecord, Snapshot};

/// The backward space-time cylinder {(x,t): |x−x0| < R, t0 − R^α < t ≤ t0}.
#[derive(Debug, Clone, Copy)]
pub struct ParabolicCylinder {
    pub x0: [f64; 2],
    pub t0: f64,
    pub radius: f64,
    /// Time-scaling exponent: the cylinder reaches R^α back in time.
    pub alpha: f64,
}

impl ParabolicCylinder {
    pub fn new(x0: [f64; 2], t0: f64, radius: f64, alpha: f64) -> Result<Self> {
        if !x0.iter().all(|c| c.is_finite()) || !t0.is_finite() {
            return Err(Error::param("cylinder", "center must be finite"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("cylinder.radius", format!("must be > 0, got {radius}")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::param("cylinder.alpha", format!("must lie in (0, 2), got {alpha}")));
        }
        Ok(Self { x0, t0, radius, alpha })
    }

    /// How far back in time the cylinder reaches: R^α.
    pub fn time_depth(&self) -> f64 {
        self.radius.powf(self.alpha)
    }

    /// Same anchor, radius scaled by `factor` (time depth rescales as
    /// factor^α automatically).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.x0, self.t0, self.radius * factor, self.alpha)
    }

    /// Strict spatial membership |x − x0| < R.
    pub fn contains_space(&self, p: [f64; 2]) -> bool {
        distance(p, self.x0) < self.radius
    }

    /// Half-open temporal membership t0 − R^α < t ≤ t0. Comparisons are
    /// exact so that disjoint cylinders partition snapshots exactly.
    pub fn contains_time(&self, t: f64) -> bool {
        t > self.t0 - self.time_depth() && t <= self.t0
    }
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Indices of grid nodes strictly inside the ball |x − x0| < r.
pub(crate) fn ball_nodes(grid: &Grid, x0: [f64; 2], r: f64) -> Vec<usize> {
    (0..grid.len()).filter(|&i| distance(grid.node(i), x0) < r).collect()
}

/// A snapshot paired with its time-quadrature weight.
pub(crate) struct WeightedSnap<'a> {
    pub snap: &'a Snapshot,
    pub weight: f64,
}

/// Snapshots with time in the window, each carrying its right-Riemann weight
/// (gap to the previous record snapshot; 0 for the record's first snapshot).
/// `include_lo` selects [lo, hi] (closed) versus (lo, hi] (half-open).
pub(crate) fn weighted_window<'a>(
    record: &'a RunRecord,
    lo: f64,
    hi: f64,
    include_lo: bool,
) -> Vec<WeightedSnap<'a>> {
    let mut out = Vec::new();
    let mut prev_time: Option<f64> = None;
    for snap in &record.snapshots {
        let t = snap.time;
        let in_lo = if include_lo { t >= lo } else { t > lo };
        if in_lo && t <= hi {
            out.push(WeightedSnap { snap, weight: prev_time.map_or(0.0, |p| t - p) });
        }
        prev_time = Some(t);
    }
    out
}

/// Errors unless the record's snapshots span [lo, hi] and at least one lies
/// inside.
pub(crate) fn require_time_coverage(record: &RunRecord, lo: f64, hi: f64) -> Result<()> {
    let tol = 1e-12 * (1.0 + lo.abs() + hi.abs());
    let first = record
        .snapshots
        .first()
        .ok_or_else(|| Error::Coverage("run record holds no snapshots".into()))?;
    let last = record.snapshots.last().expect("non-empty");
    if first.time > lo + tol || last.time < hi - tol {
        return Err(Error::Coverage(format!(
            "run covers [{}, {}] but the diagnostic window is [{lo}, {hi}]",
            first.time, last.time
        )));
    }
    if !record.snapshots.iter().any(|s| s.time >= lo - tol && s.time <= hi + tol) {
        return Err(Error::Coverage(format!("no snapshot inside the window [{lo}, {hi}]")));
    }
    Ok(())
}

/// Discrete space-time measure of the cylinder itself.
pub fn cylinder_measure(record: &RunRecord, cyl: &ParabolicCylinder) -> f64 {
    level_set_measure(record, cyl, &|_| true)
}


/// Discrete measure of {(x,t) ∈ cylinder : pred(u(x,t))}.
pub fn level_set_measure(
    record: &RunRecord,
    cyl: &ParabolicCylinder,
    pred: &dyn Fn(f64) -> bool,
) -> f64 {
    let nodes = ball_nodes(&record.grid, cyl.x0, cyl.radius);
    let cell = record.grid.cell_measure();
    let window = weighted_window(record, cyl.t0 - cyl.time_depth(), cyl.t0, false);
    let mut total = 0.0;
    for ws in &window {
        let count = nodes.iter().filter(|&&i| pred(ws.snap.u.values()[i])).count();
        total += count as f64 * cell * ws.weight;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::kernels::KernelSpec;
    use crate::nonlinearity::NonlinearitySpec;
    use crate::solver::{run, ProblemSpec};

    fn short_run() -> RunRecord {
        let grid = Grid::line(-2.0, 2.0, 32).unwrap();
        let kernel = KernelSpec::pure_fractional(1, 1.0).unwrap();
        let u0 = Field::from_fn(grid, |x| (-x[0] * x[0]).exp()).unwrap();
        let p = ProblemSpec::new(grid, kernel, NonlinearitySpec::linear(), 1e-3, u0, 0.5).unwrap();
        run(&p).unwrap()
    }

    #[test]
    fn cylinder_membership_follows_the_scaling() {
        let c = ParabolicCylinder::new([0.0, 0.0], 1.0, 0.5, 1.0).unwrap();
        assert!(c.contains_space([0.49, 0.0]));
        assert!(!c.contains_space([0.5, 0.0]));
        assert!(c.contains_time(1.0));
        assert!(c.contains_time(0.6));
        assert!(!c.contains_time(0.5)); // bottom is open
        assert!(!c.contains_time(1.1));
        // alpha = 0.5: depth sqrt(0.25) = 0.5 for the half cylinder
        let c = ParabolicCylinder::new([0.0, 0.0], 1.0, 0.25, 0.5).unwrap();
        assert!((c.time_depth() - 0.5).abs() < 1e-15);
        assert!(ParabolicCylinder::new([0.0, 0.0], 0.0, 0.0, 1.0).is_err());
        assert!(ParabolicCylinder::new([0.0, 0.0], 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn measures_are_additive_over_disjoint_cylinders() {
        let rec = short_run();
        let t_end = rec.final_state().time;
        // two cylinders stacked in time: (t0 - 2 d, t0 - d] and (t0 - d, t0]
        let top = ParabolicCylinder::new([0.0, 0.0], t_end, 0.4, 1.0).unwrap();
        let bottom =
            ParabolicCylinder::new([0.0, 0.0], t_end - top.time_depth(), 0.4, 1.0).unwrap();
        let tall = {
            // one cylinder covering both windows: radius chosen so R^alpha = 2 d
            let depth = 2.0 * top.time_depth();
            ParabolicCylinder::new([0.0, 0.0], t_end, depth, 1.0).unwrap()
        };
        // restrict to the shared ball so the union is exactly the tall window
        let pred = |_: f64| true;
        let a = level_set_measure(&rec, &top, &pred);
        let b = level_set_measure(&rec, &bottom, &pred);
        let whole = {
            let nodes = ball_nodes(&rec.grid, [0.0, 0.0], 0.4);
            let cell = rec.grid.cell_measure();
            let window = weighted_window(&rec, tall.t0 - tall.time_depth(), tall.t0, false);
            window.iter().map(|ws| nodes.len() as f64 * cell * ws.weight).sum::<f64>()
        };
        assert!(
            (a + b - whole).abs() <= 1e-12 * whole.max(1.0),
            "additivity broke: {a} + {b} vs {whole}"
        );
        assert!(a > 0.0 && b > 0.0);
        // side-by-side disjoint balls cannot double-count a node
        let left = ParabolicCylinder::new([-1.0, 0.0], t_end, 0.5, 1.0).unwrap();
        let right = ParabolicCylinder::new([1.0, 0.0], t_end, 0.5, 1.0).unwrap();
        let both = level_set_measure(&rec, &left, &pred) + level_set_measure(&rec, &right, &pred);
        let nodes_union: Vec<usize> = (0..rec.grid.len())
            .filter(|&i| {
                left.contains_space(rec.grid.node(i)) || right.contains_space(rec.grid.node(i))
            })
            .collect();
        let window = weighted_window(&rec, t_end - left.time_depth(), t_end, false);
        let manual: f64 = window
            .iter()
            .map(|ws| nodes_union.len() as f64 * rec.grid.cell_measure() * ws.weight)
            .sum();
        assert!((both - manual).abs() <= 1e-12 * manual.max(1.0));
    }

    #[test]
    fn level_set_measure_splits_the_cylinder() {
        let rec = short_run();
        let t_end = rec.final_state().time;
        let cyl = ParabolicCylinder::new([0.0, 0.0], t_end, 0.8, 1.0).unwrap();
        let total = cylinder_measure(&rec, &cyl);
        let lo = level_set_measure(&rec, &cyl, &|u| u < 0.5);
        let hi = level_set_measure(&rec, &cyl, &|u| u >= 0.5);
        assert!((lo + hi - total).abs() <= 1e-12 * total.max(1.0));
        assert!(total > 0.0);
    }

    #[test]
    fn coverage_check_rejects_windows_outside_the_run() {
        let rec = short_run();
        let t_end = rec.final_state().time;
        assert!(require_time_coverage(&rec, 0.0, t_end).is_ok());
        assert!(require_time_coverage(&rec, -0.5, t_end).is_err());
        assert!(require_time_coverage(&rec, 0.0, t_end + 1.0).is_err());
    }
}
