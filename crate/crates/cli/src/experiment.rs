//! Experiment orchestration: solve, analyze, persist, and summarize.
//!
//! A run directory is self-describing: it holds a copy of the config, one
//! persisted run per ε rung, the CSV reports, optional two-column plot data,
//! and a `summary` of grep-friendly `KEY = PASS|FAIL|value` lines. `analyze`
//! rebuilds every report (resuming an interrupted run first), so a directory
//! can always be brought back to the state `run` would have left it in.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use filtration::analysis::{
    alternative_constants, cylinder_range, degiorgi_levels, degiorgi_threshold,
    energy_inequality_report, fit_modulus, isoperimetric_diagnostic, ladder_table_csv,
    oscillation, oscillation_decay_csv, oscillation_decay_report, plot_columns,
    simulate_recursion, truncation_energy, LadderTableRow, ModulusModel, Summary,
    OSCILLATION_FLOOR, ParabolicCylinder,
};
use filtration::runio::{load_run, save_run};
use filtration::solver::{resume, run, ProblemSpec, RunRecord, Scheme};
use filtration::Error as CoreError;

use crate::config::{override_key, AnalysisConfig, ExperimentConfig, SWEEPABLE_KEYS};

/// Spread of max_t ‖u^ε‖_∞ across the ladder below which the sup-norm column
/// counts as ε-uniform.
const SUP_SPREAD_TOL: f64 = 1e-10;

/// Process failure with its exit code: 2 config, 3 solver or I/O, 4 analysis.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Analysis(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Analysis(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config: {m}"),
            Failure::Solver(m) => write!(f, "solver: {m}"),
            Failure::Analysis(m) => write!(f, "analysis: {m}"),
        }
    }
}

fn solver_fail(e: CoreError) -> Failure {
    Failure::Solver(e.to_string())
}

/// Errors raised while measuring diagnostics: coverage and input problems are
/// analysis failures, anything else (I/O, numerics) is operational.
fn analysis_fail(e: CoreError) -> Failure {
    match e {
        CoreError::Coverage(_) | CoreError::Analysis(_) | CoreError::InvalidParameter { .. } => {
            Failure::Analysis(e.to_string())
        }
        other => Failure::Solver(other.to_string()),
    }
}

pub fn run_experiment(config_path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Failure::Config(format!("{}: {e}", config_path.display())))?;
    let cfg = ExperimentConfig::from_text(&text).map_err(Failure::Config)?;
    let summary = execute(&cfg, &text)?;
    print!("{}", summary.render());
    println!("artifacts = {}", cfg.out_dir.display());
    Ok(())
}

/// Full pipeline into `cfg.out_dir`; returns the summary it wrote.
fn execute(cfg: &ExperimentConfig, config_text: &str) -> Result<Summary, Failure> {
    prepare_dir(&cfg.out_dir, config_text)?;
    let records = solve_all(cfg)?;
    emit_artifacts(cfg, &cfg.out_dir, &records)
}

fn prepare_dir(out: &Path, config_text: &str) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .map_err(|e| Failure::Config(format!("output directory {}: {e}", out.display())))?;
    fs::write(out.join("config"), config_text)
        .map_err(|e| Failure::Config(format!("write {}: {e}", out.join("config").display())))
}

fn run_dir(out: &Path, multi: bool, index: usize) -> PathBuf {
    if multi {
        out.join(format!("eps_{index}"))
    } else {
        out.join("run")
    }
}

fn problem_at(cfg: &ExperimentConfig, epsilon: f64) -> ProblemSpec {
    let mut p = cfg.problem.clone();
    p.epsilon = epsilon;
    p
}

fn solve_all(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, Failure> {
    let multi = cfg.epsilons.len() > 1;
    let mut records = Vec::with_capacity(cfg.epsilons.len());
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let sub = problem_at(cfg, eps);
        let record = run(&sub).map_err(solver_fail)?;
        save_run(&sub, &record, &run_dir(&cfg.out_dir, multi, i)).map_err(solver_fail)?;
        records.push(record);
    }
    Ok(records)
}

/// Recomputes every report for a directory produced by `run`, resuming and
/// re-persisting any run whose snapshot set stops short of the horizon.
pub fn analyze(dir: &Path) -> Result<(), Failure> {
    let config_path = dir.join("config");
    let text = fs::read_to_string(&config_path).map_err(|e| {
        Failure::Config(format!(
            "{}: {e}; `analyze` expects a directory written by `run`",
            config_path.display()
        ))
    })?;
    let cfg = ExperimentConfig::from_text(&text).map_err(Failure::Config)?;
    let multi = cfg.epsilons.len() > 1;
    let mut records = Vec::with_capacity(cfg.epsilons.len());
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let sub = problem_at(&cfg, eps);
        let rdir = run_dir(dir, multi, i);
        let mut record = load_run(&sub, &rdir).map_err(solver_fail)?;
        if record.final_state().step < record.stats.steps {
            record = resume(&sub, &record).map_err(solver_fail)?;
            save_run(&sub, &record, &rdir).map_err(solver_fail)?;
        }
        records.push(record);
    }
    // reports are tied to the artifact directory at hand, not the configured
    // output path: an archived directory can be analyzed where it sits
    let summary = emit_artifacts(&cfg, dir, &records)?;
    print!("{}", summary.render());
    println!("artifacts = {}", dir.display());
    Ok(())
}

fn write_file(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::write(out.join(name), contents)
        .map_err(|e| Failure::Solver(format!("write {}: {e}", out.join(name).display())))
}

/// Initial hull containment, to the scheme's tolerance, over every step.
fn hull_respected(record: &RunRecord) -> bool {
    let first = &record.snapshots[0].u;
    let (lo, hi) = (first.min(), first.max());
    let base = match record.scheme {
        Scheme::Explicit => 1e-12,
        Scheme::Implicit => 1e-8,
    };
    let tol = base * (1.0 + lo.abs().max(hi.abs()));
    record.extrema.iter().all(|e| e.u_min >= lo - tol && e.u_max <= hi + tol)
}

/// μ_0 of one record: oscillation ratio between the base cylinder and its
/// 4-fold shrink, measured on the record normalized over the base cylinder.
/// `None` when the field is constant there.
fn record_mu0(record: &RunRecord, a: &AnalysisConfig) -> Result<Option<f64>, Failure> {
    let t0 = record.final_state().time;
    let cyl =
        ParabolicCylinder::new(a.center, t0, a.radius, record.alpha).map_err(analysis_fail)?;
    let (lo, hi) = cylinder_range(record, &cyl).map_err(analysis_fail)?;
    if hi - lo <= OSCILLATION_FLOOR {
        return Ok(None);
    }
    let rec_n = record.normalized((lo, hi)).map_err(analysis_fail)?;
    let report =
        oscillation_decay_report(&rec_n, a.center, t0, a.radius, 1).map_err(analysis_fail)?;
    Ok(report.mu0())
}

fn emit_artifacts(
    cfg: &ExperimentConfig,
    out: &Path,
    records: &[RunRecord],
) -> Result<Summary, Failure> {
    let primary = records.last().expect("at least one rung");
    let a = &cfg.analysis;
    let mut s = Summary::new();

    s.note("scheme", primary.scheme.name());
    s.note("kernel", &primary.kernel_descriptor);
    s.note("nonlinearity", &primary.nonlinearity_descriptor);
    s.note("grid", &primary.grid.descriptor());
    s.value("dt", primary.stats.dt);
    s.note("steps", &primary.stats.steps.to_string());

    s.pass("max_principle", records.iter().all(hull_respected));

    if records.len() == 1 {
        s.value("epsilon", primary.epsilon);
        s.value("sup_u", primary.sup_u());
    } else {
        ladder_lines(&mut s, records, a)?;
    }

    let t0 = primary.final_state().time;
    let cyl =
        ParabolicCylinder::new(a.center, t0, a.radius, primary.alpha).map_err(analysis_fail)?;
    let (lo, hi) = cylinder_range(primary, &cyl).map_err(analysis_fail)?;
    s.value("cylinder_min", lo);
    s.value("cylinder_max", hi);
    if hi - lo <= OSCILLATION_FLOOR {
        s.note("oscillation", "degenerate: the field is constant on the base cylinder");
        write_file(out, "summary", &s.render())?;
        return Ok(s);
    }
    let rec_n = primary.normalized((lo, hi)).map_err(analysis_fail)?;

    // oscillation decay over the shrinking cylinders
    let osc = oscillation_decay_report(&rec_n, a.center, t0, a.radius, a.depth)
        .map_err(analysis_fail)?;
    write_file(out, "oscillation.csv", &oscillation_decay_csv(&osc))?;
    if cfg.plots {
        let pts: Vec<(f64, f64)> =
            osc.levels.iter().map(|l| (l.radius, l.oscillation)).collect();
        write_file(out, "decay_curve.dat", &plot_columns(&pts))?;
    }
    if let Some(mu0) = osc.mu0() {
        s.value("mu_0", mu0);
    }
    let mu_max = osc.levels.iter().filter_map(|l| l.decay).fold(f64::NEG_INFINITY, f64::max);
    if mu_max.is_finite() {
        s.value("mu_max", mu_max);
    }
    s.pass("oscillation_decay", !osc.any_flagged());

    // modulus of continuity, when enough positive levels were configured
    let oscillations = osc.oscillations();
    let usable = oscillations.iter().take_while(|&&o| o > 0.0).count();
    if usable >= 4 {
        let fit = fit_modulus(&oscillations).map_err(analysis_fail)?;
        s.note("modulus_model", fit.model.name());
        s.value("modulus_amplitude", fit.amplitude);
        s.value("modulus_residual", fit.residual);
        s.value("holder_gamma", fit.holder_gamma);
        s.value("holder_residual", fit.holder_residual);
        s.value("log_power_residual", fit.log_power_residual);
        if let ModulusModel::LogPower { power, offset } = fit.model {
            s.value("log_power_power", power);
            s.value("log_power_offset", offset);
        }
    } else {
        s.note("modulus_model", "none");
        s.note(
            "modulus_note",
            &format!("{usable} positive decay levels, need 4; raise analysis.depth"),
        );
    }

    // truncation-energy ladder table
    let mut rows = Vec::with_capacity(a.ladder_levels as usize + 1);
    let mut prev_osc: Option<f64> = None;
    for m in 0..=a.ladder_levels {
        let ladder =
            degiorgi_levels(m, rec_n.alpha).map_err(analysis_fail)?.anchored(a.center, t0);
        let energy = truncation_energy(&rec_n, &ladder).map_err(analysis_fail)?;
        let cyl_m = ladder.cylinder().map_err(analysis_fail)?;
        let osc_m = oscillation(&rec_n, &cyl_m).map_err(analysis_fail)?;
        let decay = prev_osc.and_then(|p| (p > 0.0).then(|| osc_m / p));
        rows.push(LadderTableRow {
            level: m,
            k: ladder.level,
            r: ladder.radius,
            energy: Some(energy),
            oscillation: Some(osc_m),
            decay,
        });
        prev_osc = Some(osc_m);
    }
    write_file(out, "ladder.csv", &ladder_table_csv(&rows))?;

    // energy inequality on the configured rung
    let ladder_e =
        degiorgi_levels(a.energy_m, rec_n.alpha).map_err(analysis_fail)?.anchored(a.center, t0);
    let er = energy_inequality_report(&rec_n, a.level, &ladder_e).map_err(analysis_fail)?;
    s.value("energy_lhs", er.lhs);
    s.value("energy_rhs_scaled", er.scaled_rhs);
    s.value("energy_c_emp", er.c_emp);
    s.note("energy_vacuous", if er.vacuous { "true" } else { "false" });
    s.pass("energy_inequality", !er.violation);

    // isoperimetric band-versus-deficit implication
    let iso = isoperimetric_diagnostic(&rec_n, a.lambda, &cyl, a.sigma, a.c0, a.delta)
        .map_err(analysis_fail)?;
    s.value("iso_above_one", iso.above_one);
    s.value("iso_intermediate", iso.intermediate);
    s.value("iso_deficit_mean", iso.deficit_mean);
    s.note("iso_vacuous", if iso.vacuous { "true" } else { "false" });
    s.pass("isoperimetric_implication", iso.implication_holds);
    let alt = alternative_constants(a.sigma, a.delta, a.lambda).map_err(analysis_fail)?;
    s.value("iso_k0", alt.k0);
    s.value("iso_sigma_bar", alt.sigma_bar);
    if cfg.plots {
        write_file(out, "iso_e_trace.dat", &plot_columns(&iso.e_trace))?;
        write_file(out, "iso_m_trace.dat", &plot_columns(&iso.m_trace))?;
    }

    write_file(out, "summary", &s.render())?;
    Ok(s)
}

/// Per-rung sup norms and μ_0, the ε-uniformity verdict, and the spreads.
fn ladder_lines(s: &mut Summary, records: &[RunRecord], a: &AnalysisConfig) -> Result<(), Failure> {
    for (i, r) in records.iter().enumerate() {
        s.value(&format!("epsilon_{i}"), r.epsilon);
        s.value(&format!("sup_u_{i}"), r.sup_u());
    }
    for i in 0..records.len() - 1 {
        let d = records[i]
            .final_state()
            .u
            .inf_distance(&records[i + 1].final_state().u)
            .map_err(analysis_fail)?;
        s.value(&format!("pair_distance_{i}"), d);
    }
    let sups: Vec<f64> = records.iter().map(RunRecord::sup_u).collect();
    let spread = sups.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - sups.iter().cloned().fold(f64::INFINITY, f64::min);
    s.value("sup_spread", spread);
    s.pass("epsilon_uniform_sup", spread <= SUP_SPREAD_TOL);

    let mut mu0s = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match record_mu0(r, a)? {
            Some(mu) => {
                s.value(&format!("mu0_{i}"), mu);
                mu0s.push(mu);
            }
            None => s.note(&format!("mu0_{i}"), "degenerate"),
        }
    }
    if mu0s.len() == records.len() {
        let spread = mu0s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - mu0s.iter().cloned().fold(f64::INFINITY, f64::min);
        s.value("mu0_spread", spread);
        s.pass("mu0_spread_ok", spread <= 0.2);
    }
    Ok(())
}

/// Quotes a CSV field if it contains a comma, quote, or newline.
fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn sweep_csv(parameter: &str, rows: &[(String, Vec<(String, String)>)]) -> String {
    let mut keys: Vec<&str> = Vec::new();
    for (_, pairs) in rows {
        for (k, _) in pairs {
            if !keys.contains(&k.as_str()) {
                keys.push(k);
            }
        }
    }
    let mut out = String::from(parameter);
    for k in &keys {
        out.push(',');
        out.push_str(k);
    }
    out.push('\n');
    for (value, pairs) in rows {
        out.push_str(&csv_escape(value));
        for k in &keys {
            out.push(',');
            if let Some((_, v)) = pairs.iter().find(|(pk, _)| pk == k) {
                out.push_str(&csv_escape(v));
            }
        }
        out.push('\n');
    }
    out
}

fn summary_pairs(summary: &Summary) -> Vec<(String, String)> {
    summary
        .render()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Runs the experiment once per parameter value in isolated subdirectories of
/// the base output directory and combines the summaries into one table keyed
/// by the value. A failing child aborts with that child's exit code; rows
/// finished so far are still written.
pub fn sweep(config_path: &Path, parameter: &str, values: &[String]) -> Result<(), Failure> {
    if values.is_empty() {
        return Err(Failure::Config("sweep needs at least one value".to_string()));
    }
    if !SWEEPABLE_KEYS.contains(&parameter) {
        return Err(Failure::Config(format!(
            "`{parameter}` is not a sweepable scalar key; choose one of {SWEEPABLE_KEYS:?}"
        )));
    }
    for v in values {
        let parsed: Result<f64, _> = v.parse();
        match parsed {
            Ok(x) if x.is_finite() => {}
            _ => {
                return Err(Failure::Config(format!(
                    "sweep value `{v}` for `{parameter}` is not a finite number"
                )))
            }
        }
    }
    let text = fs::read_to_string(config_path)
        .map_err(|e| Failure::Config(format!("{}: {e}", config_path.display())))?;
    let base = ExperimentConfig::from_text(&text).map_err(Failure::Config)?;
    let root = base.out_dir.clone();
    fs::create_dir_all(&root)
        .map_err(|e| Failure::Config(format!("output directory {}: {e}", root.display())))?;

    let table = root.join("sweep.csv");
    let mut rows: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for v in values {
        let child_dir = root.join(format!("{parameter}={v}"));
        let child_text = override_key(
            &override_key(&text, parameter, v),
            "output.dir",
            &child_dir.display().to_string(),
        );
        let outcome = ExperimentConfig::from_text(&child_text)
            .map_err(Failure::Config)
            .and_then(|child| execute(&child, &child_text));
        match outcome {
            Ok(summary) => {
                rows.push((v.clone(), summary_pairs(&summary)));
                eprintln!("sweep {parameter} = {v}: ok");
            }
            Err(f) => {
                fs::write(&table, sweep_csv(parameter, &rows))
                    .map_err(|e| Failure::Solver(format!("write {}: {e}", table.display())))?;
                eprintln!(
                    "sweep {parameter} = {v}: {f}; partial results ({} of {} values) kept in {}",
                    rows.len(),
                    values.len(),
                    table.display()
                );
                return Err(f);
            }
        }
    }
    fs::write(&table, sweep_csv(parameter, &rows))
        .map_err(|e| Failure::Solver(format!("write {}: {e}", table.display())))?;
    println!("sweep_table = {}", table.display());
    Ok(())
}

/// Prints the iteration threshold for (C, n, α) and, when a seed is given,
/// the recursion trace it produces.
pub fn threshold_cmd(
    c: f64,
    n: u32,
    alpha: f64,
    i0: Option<f64>,
    steps: usize,
) -> Result<(), Failure> {
    let thr = degiorgi_threshold(c, n, alpha).map_err(|e| Failure::Config(e.to_string()))?;
    println!("threshold = {thr:?}");
    if let Some(seed) = i0 {
        let report = simulate_recursion(seed, c, n, alpha, steps)
            .map_err(|e| Failure::Config(e.to_string()))?;
        println!("m,I_m");
        for (m, v) in report.sequence.iter().enumerate() {
            println!("{m},{v:?}");
        }
        println!("converged = {}", report.converged);
        println!("diverged = {}", report.diverged);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_config(dir: &Path) -> String {
        format!(
            "\
grid.lo = -2.0
grid.hi = 2.0
grid.n = 48
kernel.alpha = 0.5
nonlinearity.kind = linear
problem.epsilon = 1e-2
problem.horizon = 1.25
initial.kind = gaussian
initial.center = 0.3
analysis.center = 0.1
analysis.depth = 1
analysis.ladder_levels = 2
output.dir = {}
output.cadence = 16
",
            dir.display()
        )
    }

    #[test]
    fn execute_writes_reports_and_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("exp");
        let text = fast_config(&out);
        let cfg = ExperimentConfig::from_text(&text).unwrap();

        let first = execute(&cfg, &text).unwrap().render();
        for name in ["config", "summary", "oscillation.csv", "ladder.csv", "decay_curve.dat"] {
            assert!(out.join(name).exists(), "missing {name}");
        }
        assert!(out.join("run").join("meta").exists());
        assert!(first.contains("max_principle = PASS"), "{first}");
        assert!(first.contains("mu_0 = "), "{first}");
        assert!(first.contains("energy_c_emp = "), "{first}");
        // too few decay levels for a fit, and that is reported rather than fatal
        assert!(first.contains("modulus_model = none"), "{first}");

        let second = execute(&cfg, &text).unwrap().render();
        assert_eq!(first, second);
        let on_disk = fs::read_to_string(out.join("summary")).unwrap();
        assert_eq!(first, on_disk);
    }

    #[test]
    fn sweep_table_merges_summary_keys() {
        let rows = vec![
            ("0.5".to_string(), vec![
                ("sup_u".to_string(), "1.0".to_string()),
                ("kernel".to_string(), "fractional(1, 0.5)".to_string()),
            ]),
            ("1.5".to_string(), vec![
                ("sup_u".to_string(), "0.9".to_string()),
                ("extra".to_string(), "x".to_string()),
            ]),
        ];
        let csv = sweep_csv("kernel.alpha", &rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "kernel.alpha,sup_u,kernel,extra");
        assert_eq!(lines.next().unwrap(), "0.5,1.0,\"fractional(1, 0.5)\",");
        assert_eq!(lines.next().unwrap(), "1.5,0.9,,x");
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn failure_codes_follow_the_contract() {
        assert_eq!(Failure::Config(String::new()).code(), 2);
        assert_eq!(Failure::Solver(String::new()).code(), 3);
        assert_eq!(Failure::Analysis(String::new()).code(), 4);
        let cov = analysis_fail(CoreError::Coverage("window".into()));
        assert_eq!(cov.code(), 4);
        let newton = analysis_fail(CoreError::SingularSystem(3));
        assert_eq!(newton.code(), 3);
    }
}
