//! Plain-text renderings of the diagnostics: CSV tables for the ladder and
//! decay measurements, two-column plot data, and a pass/fail summary.
//! Floats are written with their shortest round-trip representation.

use super::oscillation::OscillationDecayReport;

/// One row of the ladder table: the level's geometry plus whichever
/// measurements were taken at it.
#[derive(Debug, Clone, Copy)]
pub struct LadderTableRow {
    pub level: u32,
    pub k: f64,
    pub r: f64,
    pub energy: Option<f64>,
    pub oscillation: Option<f64>,
    pub decay: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// CSV with header `level,k,r,energy,oscillation,decay`; absent measurements
/// are empty cells.
pub fn ladder_table_csv(rows: &[LadderTableRow]) -> String {
    let mut out = String::from("level,k,r,energy,oscillation,decay\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{},{},{}\n",
            row.level,
            row.k,
            row.r,
            opt(row.energy),
            opt(row.oscillation),
            opt(row.decay),
        ));
    }
    out
}

/// CSV with header `level,radius,oscillation,decay,flagged`.
pub fn oscillation_decay_csv(report: &OscillationDecayReport) -> String {
    let mut out = String::from("level,radius,oscillation,decay,flagged\n");
    for l in &report.levels {
        out.push_str(&format!(
            "{},{:?},{:?},{},{}\n",
            l.index,
            l.radius,
            l.oscillation,
            opt(l.decay),
            l.flagged,
        ));
    }
    out
}

/// Space-separated two-column data, one point per line, ready for plotting.
pub fn plot_columns(points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for &(x, y) in points {
        out.push_str(&format!("{x:?} {y:?}\n"));
    }
    out
}

/// Accumulates `KEY = PASS|FAIL` and `KEY = value` lines and remembers
/// whether anything failed.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    lines: Vec<String>,
    failures: usize,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pass(&mut self, key: &str, ok: bool) {
        self.lines.push(format!("{key} = {}", if ok { "PASS" } else { "FAIL" }));
        if !ok {
            self.failures += 1;
        }
    }

    pub fn value(&mut self, key: &str, v: f64) {
        self.lines.push(format!("{key} = {v:?}"));
    }

    pub fn note(&mut self, key: &str, text: &str) {
        self.lines.push(format!("{key} = {text}"));
    }

    pub fn all_passed(&self) -> bool {
        self.failures == 0
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}
