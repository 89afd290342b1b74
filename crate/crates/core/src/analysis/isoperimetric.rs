//! Measure-theoretic diagnostics behind the intermediate-value alternative:
//! given a normalized field v on a cylinder, how much mass sits above 1, how
//! much in the intermediate band (λ, 1), and how small the deficit
//! ((1 − v/λ)^+)² stays on the half cylinder.

use crate::error::{Error, Result};
use crate::solver::RunRecord;

use super::{
    ball_nodes, cylinder_measure, distance, level_set_measure, require_time_coverage,
    weighted_window, ParabolicCylinder,
};

/// Everything the band-versus-deficit implication needs, measured on one run.
/// The record's u field is read as the normalized v (normalize the record
/// over the diagnostic cylinder first).
#[derive(Debug, Clone)]
pub struct IsoperimetricReport {
    pub lambda: f64,
    pub sigma: f64,
    pub c0: f64,
    pub delta: f64,
    /// A = |{v ≥ 1} ∩ Q|.
    pub above_one: f64,
    /// B = |{λ < v < 1} ∩ Q|.
    pub intermediate: f64,
    /// C = ⨍ over the half cylinder of ((1 − v/λ)^+)².
    pub deficit_mean: f64,
    pub cylinder_measure: f64,
    pub half_cylinder_measure: f64,
    /// (t, E(t)) with E(t) = Σ (ξ·(2λ − v)^+)² h^n and ξ the radial bump
    /// that is 1 on the half ball and 0 outside the ball.
    pub e_trace: Vec<(f64, f64)>,
    /// (t, M(t)) with M(t) = |{λ ≤ v(·,t) ≤ 1}| h^n over the cylinder ball.
    pub m_trace: Vec<(f64, f64)>,
    /// A ≥ c0·σ·|Q|.
    pub hypothesis_a: bool,
    /// B < δ·|Q|.
    pub hypothesis_b: bool,
    /// C < σ.
    pub conclusion: bool,
    /// At least one hypothesis fails, so the implication says nothing.
    pub vacuous: bool,
    /// vacuous or the conclusion holds.
    pub implication_holds: bool,
}

fn check_unit_interval(name: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::param(name, format!("must lie in (0, 1), got {x}")));
    }
    Ok(())
}

/// Measures A, B, C and the E/M traces on the cylinder and reports whether
/// (A ≥ c0·σ|Q| and B < δ|Q|) implies C < σ on this run.
pub fn isoperimetric_diagnostic(
    record: &RunRecord,
    lambda: f64,
    cyl: &ParabolicCylinder,
    sigma: f64,
    c0: f64,
    delta: f64,
) -> Result<IsoperimetricReport> {
    check_unit_interval("lambda", lambda)?;
    check_unit_interval("c0", c0)?;
    check_unit_interval("delta", delta)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    let lo = cyl.t0 - cyl.time_depth();
    require_time_coverage(record, lo, cyl.t0)?;
    let nodes = ball_nodes(&record.grid, cyl.x0, cyl.radius);
    if nodes.is_empty() {
        return Err(Error::Coverage("cylinder ball contains no grid nodes".into()));
    }
    let window = weighted_window(record, lo, cyl.t0, false);

    // hypothesis of the lemma: the normalized field is nonnegative
    for ws in &window {
        let v = ws.snap.u.values();
        for &i in &nodes {
            if v[i] < -1e-10 {
                return Err(Error::Analysis(format!(
                    "normalized field dips to {} at node {i}, time {}; the \
                     diagnostic needs v ≥ 0",
                    v[i], ws.snap.time
                )));
            }
        }
    }

    let q_measure = cylinder_measure(record, cyl);
    let above_one = level_set_measure(record, cyl, &|v| v >= 1.0);
    let intermediate = level_set_measure(record, cyl, &|v| lambda < v && v < 1.0);

    // deficit mean over the half cylinder
    let half = cyl.scaled(0.5)?;
    let half_measure = cylinder_measure(record, &half);
    if half_measure <= 0.0 {
        return Err(Error::Coverage(
            "half cylinder carries no space-time mass at this snapshot cadence".into(),
        ));
    }
    let half_nodes = ball_nodes(&record.grid, half.x0, half.radius);
    let cell = record.grid.cell_measure();
    let mut deficit_integral = 0.0f64;
    for ws in &weighted_window(record, half.t0 - half.time_depth(), half.t0, false) {
        let v = ws.snap.u.values();
        let slice: f64 = half_nodes
            .iter()
            .map(|&i| {
                let d = (1.0 - v[i] / lambda).max(0.0);
                d * d
            })
            .sum();
        deficit_integral += slice * cell * ws.weight;
    }
    let deficit_mean = deficit_integral / half_measure;

    // time traces used by the underlying capacity argument
    let lambda2 = 2.0 * lambda;
    let xi = |d: f64| -> f64 {
        let s = ((cyl.radius - d) / (cyl.radius - 0.5 * cyl.radius)).clamp(0.0, 1.0);
        s * s * (3.0 - 2.0 * s)
    };
    let mut e_trace = Vec::with_capacity(window.len());
    let mut m_trace = Vec::with_capacity(window.len());
    for ws in &window {
        let v = ws.snap.u.values();
        let mut e = 0.0f64;
        let mut count = 0usize;
        for &i in &nodes {
            let w = xi(distance(record.grid.node(i), cyl.x0)) * (lambda2 - v[i]).max(0.0);
            e += w * w;
            if lambda <= v[i] && v[i] <= 1.0 {
                count += 1;
            }
        }
        e_trace.push((ws.snap.time, e * cell));
        m_trace.push((ws.snap.time, count as f64 * cell));
    }

    let hypothesis_a = above_one >= c0 * sigma * q_measure;
    let hypothesis_b = intermediate < delta * q_measure;
    let conclusion = deficit_mean < sigma;
    let vacuous = !(hypothesis_a && hypothesis_b);
    Ok(IsoperimetricReport {
        lambda,
        sigma,
        c0,
        delta,
        above_one,
        intermediate,
        deficit_mean,
        cylinder_measure: q_measure,
        half_cylinder_measure: half_measure,
        e_trace,
        m_trace,
        hypothesis_a,
        hypothesis_b,
        conclusion,
        vacuous,
        implication_holds: vacuous || conclusion,
    })
}

/// Constants the intermediate-value alternative feeds the oscillation-decay
/// step: the iteration count k0 = 1/δ and σ̄ = λ^{k0+1}·σ/4.
#[derive(Debug, Clone, Copy)]
pub struct AlternativeConstants {
    pub k0: f64,
    pub sigma_bar: f64,
}

pub fn alternative_constants(sigma: f64, delta: f64, lambda: f64) -> Result<AlternativeConstants> {
    check_unit_interval("delta", delta)?;
    check_unit_interval("lambda", lambda)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    let k0 = 1.0 / delta;
    Ok(AlternativeConstants { k0, sigma_bar: lambda.powf(k0 + 1.0) * sigma / 4.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::testsupport::{synthetic_record, uniform_times};
    use crate::grid::Grid;

    fn record_with(f: &dyn Fn(&[f64], f64) -> f64) -> RunRecord {
        let grid = Grid::line(-2.0, 2.0, 96).unwrap();
        synthetic_record(grid, 1.0, &uniform_times(20, 1.0), f)
    }

    fn unit_cyl() -> ParabolicCylinder {
        ParabolicCylinder::new([0.0, 0.0], 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn constant_one_satisfies_the_implication() {
        let rec = record_with(&|_, _| 1.0);
        let rep = isoperimetric_diagnostic(&rec, 0.3, &unit_cyl(), 0.1, 0.5, 0.01).unwrap();
        assert_eq!(rep.above_one, rep.cylinder_measure);
        assert_eq!(rep.intermediate, 0.0);
        assert_eq!(rep.deficit_mean, 0.0);
        assert!(rep.hypothesis_a && rep.hypothesis_b);
        assert!(rep.conclusion && !rep.vacuous);
        assert!(rep.implication_holds);
        assert!(rep.e_trace.iter().all(|&(_, e)| e == 0.0));
        assert!(rep.m_trace.iter().all(|&(_, m)| m > 0.0));
    }

    #[test]
    fn field_below_lambda_is_vacuous() {
        let rec = record_with(&|_, _| 0.2);
        let rep = isoperimetric_diagnostic(&rec, 0.4, &unit_cyl(), 0.1, 0.5, 0.01).unwrap();
        assert_eq!(rep.above_one, 0.0);
        assert_eq!(rep.intermediate, 0.0);
        assert!(!rep.hypothesis_a);
        assert!(rep.vacuous);
        assert!(rep.implication_holds);
        // deficit (1 − 0.5)² = 0.25 exceeds σ, visible but vacuous
        assert!((rep.deficit_mean - 0.25).abs() < 1e-12);
        assert!(!rep.conclusion);
        assert!(rep.e_trace.iter().any(|&(_, e)| e > 0.0));
        assert!(rep.m_trace.iter().all(|&(_, m)| m == 0.0));
    }

    #[test]
    fn negative_field_is_rejected_softly() {
        let rec = record_with(&|_, _| -0.1);
        let err = isoperimetric_diagnostic(&rec, 0.3, &unit_cyl(), 0.1, 0.5, 0.01).unwrap_err();
        assert!(matches!(err, Error::Analysis(_)));
        // rounding-level negativity is tolerated
        let rec = record_with(&|_, _| -1e-12);
        assert!(isoperimetric_diagnostic(&rec, 0.3, &unit_cyl(), 0.1, 0.5, 0.01).is_ok());
    }

    #[test]
    fn level_sets_partition_the_cylinder() {
        let rec = record_with(&|x, t| 0.6 + 0.6 * (7.0 * x[0] + 3.0 * t).sin());
        let cyl = unit_cyl();
        let rep = isoperimetric_diagnostic(&rec, 0.35, &cyl, 0.2, 0.5, 0.3).unwrap();
        let below = crate::analysis::level_set_measure(&rec, &cyl, &|v| v <= 0.35);
        let total = rep.above_one + rep.intermediate + below;
        assert!(
            (total - rep.cylinder_measure).abs() <= 1e-12 * rep.cylinder_measure,
            "partition sums to {total}, cylinder is {}",
            rep.cylinder_measure
        );
    }

    #[test]
    fn parameters_are_validated() {
        let rec = record_with(&|_, _| 1.0);
        let cyl = unit_cyl();
        assert!(isoperimetric_diagnostic(&rec, 0.0, &cyl, 0.1, 0.5, 0.01).is_err());
        assert!(isoperimetric_diagnostic(&rec, 1.0, &cyl, 0.1, 0.5, 0.01).is_err());
        assert!(isoperimetric_diagnostic(&rec, 0.3, &cyl, 0.0, 0.5, 0.01).is_err());
        assert!(isoperimetric_diagnostic(&rec, 0.3, &cyl, 0.1, 1.0, 0.01).is_err());
        assert!(isoperimetric_diagnostic(&rec, 0.3, &cyl, 0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn alternative_constants_follow_the_formula() {
        let c = alternative_constants(1.0, 0.5, 0.5).unwrap();
        assert_eq!(c.k0, 2.0);
        assert_eq!(c.sigma_bar, 0.03125);
        let c = alternative_constants(0.4, 0.2, 0.9).unwrap();
        assert_eq!(c.k0, 5.0);
        let want = 0.9f64.powi(6) * 0.4 / 4.0;
        assert!((c.sigma_bar - want).abs() <= 1e-15 * want);
        assert!(alternative_constants(0.0, 0.5, 0.5).is_err());
        assert!(alternative_constants(1.0, 1.0, 0.5).is_err());
        assert!(alternative_constants(1.0, 0.5, 0.0).is_err());
    }
}
