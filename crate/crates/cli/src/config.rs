//! Flat dotted-key experiment configuration.
//!
//! One `section.key = value` assignment per line; `#` starts a comment; blank
//! lines are ignored. Every error message names the offending key so a bad
//! config can be fixed without reading source. Unknown keys are rejected — a
//! typo never silently falls back to a default.
//!
//! Sections:
//! * `grid.*` — domain and resolution (`grid.ny` and friends switch to 2-d),
//! * `kernel.*` — jump kernel family and order α,
//! * `nonlinearity.*` — β graph (`linear`, `stefan`, `porous`),
//! * `problem.*` — ε or an ε-ladder, scheme, horizon, step policy,
//! * `initial.*` — initial datum profile,
//! * `analysis.*` — diagnostic cylinder, decay depth, ladder levels, λ/σ/δ,
//! * `output.*` — artifact directory, snapshot cadence, plot emission.

use std::collections::BTreeMap;
use std::path::PathBuf;

use filtration::grid::{Field, Grid};
use filtration::kernels::KernelSpec;
use filtration::nonlinearity::NonlinearitySpec;
use filtration::solver::{ProblemSpec, Scheme, TimeStep};

/// Config errors carry a finished message naming the offending key.
pub type ConfigResult<T> = Result<T, String>;

/// Keys `sweep` may vary: numeric scalars whose change keeps the rest of the
/// config meaningful. Structural keys (directories, kinds) are excluded.
pub const SWEEPABLE_KEYS: &[&str] = &[
    "grid.n",
    "kernel.alpha",
    "kernel.lambda",
    "kernel.radius",
    "nonlinearity.a",
    "nonlinearity.b",
    "nonlinearity.m",
    "problem.epsilon",
    "problem.horizon",
    "problem.dt",
    "problem.cfl_safety",
    "initial.amplitude",
    "initial.center",
    "initial.width",
    "initial.offset",
    "analysis.center",
    "analysis.radius",
    "analysis.depth",
    "analysis.ladder_levels",
    "analysis.level",
    "analysis.energy_m",
    "analysis.lambda",
    "analysis.sigma",
    "analysis.c0",
    "analysis.delta",
    "output.cadence",
];

/// Diagnostic parameters: one anchor cylinder drives oscillation decay, the
/// truncation-energy ladder, the energy inequality, and the isoperimetric
/// check. The anchor time is always the end of the run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub center: [f64; 2],
    /// Base cylinder radius R; decay levels shrink it by 4 per level.
    pub radius: f64,
    /// Number of shrink steps below the base cylinder.
    pub depth: usize,
    /// Truncation-energy rows I_0 ... I_levels.
    pub ladder_levels: u32,
    /// Truncation level k for the energy-inequality report.
    pub level: f64,
    /// Ladder rung the energy-inequality report is evaluated on.
    pub energy_m: u32,
    pub lambda: f64,
    pub sigma: f64,
    pub c0: f64,
    pub delta: f64,
}

/// A parsed, cross-validated experiment.
#[derive(Clone)]
pub struct ExperimentConfig {
    /// Fully assembled problem at `epsilons[0]`; other rungs clone and swap ε.
    pub problem: ProblemSpec,
    /// One entry for a single run, several (strictly decreasing) for a ladder.
    pub epsilons: Vec<f64>,
    pub analysis: AnalysisConfig,
    pub out_dir: PathBuf,
    /// Emit two-column `.dat` plot files alongside the CSV reports.
    pub plots: bool,
}

struct Raw {
    entries: BTreeMap<String, (String, usize)>,
}

impl Raw {
    fn parse(text: &str) -> ConfigResult<Raw> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", idx + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(format!("line {}: empty key or value in `{line}`", idx + 1));
            }
            let line_no = idx + 1;
            if entries.insert(key.clone(), (value, line_no)).is_some() {
                return Err(format!("line {line_no}: duplicate key `{key}`"));
            }
        }
        Ok(Raw { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Call after all recognized keys are consumed.
    fn finish(self) -> ConfigResult<()> {
        if let Some((key, (_, line))) = self.entries.into_iter().next() {
            return Err(format!("line {line}: unrecognized key `{key}`"));
        }
        Ok(())
    }
}

fn require(raw: &mut Raw, key: &str) -> ConfigResult<String> {
    raw.take(key).ok_or_else(|| format!("missing required key `{key}`"))
}

fn parse_f64(key: &str, s: &str) -> ConfigResult<f64> {
    let v: f64 = s.parse().map_err(|_| format!("{key}: expected a number, got `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("{key}: must be finite, got `{s}`"));
    }
    Ok(v)
}

fn req_f64(raw: &mut Raw, key: &str) -> ConfigResult<f64> {
    parse_f64(key, &require(raw, key)?)
}

fn opt_f64(raw: &mut Raw, key: &str, default: f64) -> ConfigResult<f64> {
    match raw.take(key) {
        Some(s) => parse_f64(key, &s),
        None => Ok(default),
    }
}

fn parse_usize(key: &str, s: &str) -> ConfigResult<usize> {
    s.parse().map_err(|_| format!("{key}: expected a nonnegative integer, got `{s}`"))
}

fn req_usize(raw: &mut Raw, key: &str) -> ConfigResult<usize> {
    parse_usize(key, &require(raw, key)?)
}

fn opt_usize(raw: &mut Raw, key: &str, default: usize) -> ConfigResult<usize> {
    match raw.take(key) {
        Some(s) => parse_usize(key, &s),
        None => Ok(default),
    }
}

fn opt_bool(raw: &mut Raw, key: &str, default: bool) -> ConfigResult<bool> {
    match raw.take(key).as_deref() {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => Err(format!("{key}: expected `true` or `false`, got `{other}`")),
    }
}

fn reject(raw: &mut Raw, key: &str, reason: &str) -> ConfigResult<()> {
    if raw.take(key).is_some() {
        return Err(format!("{key}: {reason}"));
    }
    Ok(())
}

fn parse_grid(raw: &mut Raw) -> ConfigResult<Grid> {
    let lo = req_f64(raw, "grid.lo")?;
    let hi = req_f64(raw, "grid.hi")?;
    let n = req_usize(raw, "grid.n")?;
    if !(lo < hi) {
        return Err(format!("grid.lo/grid.hi: need lo < hi, got {lo} and {hi}"));
    }
    if n < 2 {
        return Err(format!("grid.n: need at least 2 cells, got {n}"));
    }
    let two_d = raw.has("grid.ny") || raw.has("grid.lo_y") || raw.has("grid.hi_y");
    if !two_d {
        return Grid::line(lo, hi, n).map_err(|e| format!("grid: {e}"));
    }
    let ny = req_usize(raw, "grid.ny")?;
    let lo_y = req_f64(raw, "grid.lo_y")?;
    let hi_y = req_f64(raw, "grid.hi_y")?;
    if !(lo_y < hi_y) {
        return Err(format!("grid.lo_y/grid.hi_y: need lo < hi, got {lo_y} and {hi_y}"));
    }
    if ny < 2 {
        return Err(format!("grid.ny: need at least 2 cells, got {ny}"));
    }
    Grid::rect((lo, lo_y), (hi, hi_y), n, ny).map_err(|e| format!("grid: {e}"))
}

fn parse_kernel(raw: &mut Raw, dimension: usize) -> ConfigResult<KernelSpec> {
    let kind = raw.take("kernel.kind").unwrap_or_else(|| "fractional".to_string());
    let alpha = req_f64(raw, "kernel.alpha")?;
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(format!("kernel.alpha: must lie in (0, 2), got {alpha}"));
    }
    match kind.as_str() {
        "fractional" => {
            reject(raw, "kernel.lambda", "only meaningful for kernel.kind = truncated")?;
            reject(raw, "kernel.radius", "only meaningful for kernel.kind = truncated")?;
            KernelSpec::pure_fractional(dimension, alpha).map_err(|e| format!("kernel: {e}"))
        }
        "truncated" => {
            let lambda = req_f64(raw, "kernel.lambda")?;
            let radius = req_f64(raw, "kernel.radius")?;
            if !(lambda >= 1.0) {
                return Err(format!("kernel.lambda: ellipticity constant must be >= 1, got {lambda}"));
            }
            if !(radius > 0.0) {
                return Err(format!("kernel.radius: truncation radius must be positive, got {radius}"));
            }
            KernelSpec::truncated_fractional(dimension, alpha, lambda, radius)
                .map_err(|e| format!("kernel: {e}"))
        }
        other => Err(format!("kernel.kind: expected `fractional` or `truncated`, got `{other}`")),
    }
}

fn parse_nonlinearity(raw: &mut Raw) -> ConfigResult<NonlinearitySpec> {
    let kind = require(raw, "nonlinearity.kind")?;
    match kind.as_str() {
        "linear" => {
            reject(raw, "nonlinearity.a", "only meaningful for nonlinearity.kind = stefan")?;
            reject(raw, "nonlinearity.b", "only meaningful for nonlinearity.kind = stefan")?;
            reject(raw, "nonlinearity.m", "only meaningful for nonlinearity.kind = porous")?;
            Ok(NonlinearitySpec::linear())
        }
        "stefan" => {
            reject(raw, "nonlinearity.m", "only meaningful for nonlinearity.kind = porous")?;
            let a = opt_f64(raw, "nonlinearity.a", 1.0)?;
            let b = opt_f64(raw, "nonlinearity.b", 1.0)?;
            if !(a > 0.0) {
                return Err(format!("nonlinearity.a: must be positive, got {a}"));
            }
            if !(b > 0.0) {
                return Err(format!("nonlinearity.b: must be positive, got {b}"));
            }
            NonlinearitySpec::stefan(a, b).map_err(|e| format!("nonlinearity: {e}"))
        }
        "porous" => {
            reject(raw, "nonlinearity.a", "only meaningful for nonlinearity.kind = stefan")?;
            reject(raw, "nonlinearity.b", "only meaningful for nonlinearity.kind = stefan")?;
            let m = opt_f64(raw, "nonlinearity.m", 2.0)?;
            if !(m > 1.0) {
                return Err(format!("nonlinearity.m: exponent must exceed 1, got {m}"));
            }
            NonlinearitySpec::porous(m).map_err(|e| format!("nonlinearity: {e}"))
        }
        other => {
            Err(format!("nonlinearity.kind: expected `linear`, `stefan`, or `porous`, got `{other}`"))
        }
    }
}

fn parse_epsilons(raw: &mut Raw) -> ConfigResult<Vec<f64>> {
    let single = raw.take("problem.epsilon");
    let ladder = raw.take("problem.epsilon_ladder");
    match (single, ladder) {
        (Some(_), Some(_)) => Err(
            "problem.epsilon and problem.epsilon_ladder are mutually exclusive; set exactly one"
                .to_string(),
        ),
        (None, None) => {
            Err("missing required key `problem.epsilon` (or `problem.epsilon_ladder`)".to_string())
        }
        (Some(s), None) => {
            let eps = parse_f64("problem.epsilon", &s)?;
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(format!("problem.epsilon: must lie in (0, 1], got {eps}"));
            }
            Ok(vec![eps])
        }
        (None, Some(s)) => {
            let mut eps = Vec::new();
            for part in s.split(',') {
                let v = parse_f64("problem.epsilon_ladder", part.trim())?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(format!("problem.epsilon_ladder: entries must lie in (0, 1], got {v}"));
                }
                eps.push(v);
            }
            if eps.len() < 2 {
                return Err(format!(
                    "problem.epsilon_ladder: need at least 2 rungs, got {}",
                    eps.len()
                ));
            }
            if eps.windows(2).any(|w| !(w[1] < w[0])) {
                return Err("problem.epsilon_ladder: rungs must be strictly decreasing".to_string());
            }
            Ok(eps)
        }
    }
}

fn parse_scheme(raw: &mut Raw) -> ConfigResult<Scheme> {
    match raw.take("problem.scheme").as_deref() {
        None | Some("explicit") => Ok(Scheme::Explicit),
        Some("implicit") => Ok(Scheme::Implicit),
        Some(other) => {
            Err(format!("problem.scheme: expected `explicit` or `implicit`, got `{other}`"))
        }
    }
}

fn parse_time_step(raw: &mut Raw) -> ConfigResult<TimeStep> {
    let dt = raw.take("problem.dt");
    let safety = raw.take("problem.cfl_safety");
    match (dt, safety) {
        (Some(_), Some(_)) => Err(
            "problem.dt and problem.cfl_safety are mutually exclusive; a fixed step ignores the CFL safety factor"
                .to_string(),
        ),
        (Some(s), None) => {
            let dt = parse_f64("problem.dt", &s)?;
            if !(dt > 0.0) {
                return Err(format!("problem.dt: must be positive, got {dt}"));
            }
            Ok(TimeStep::Fixed(dt))
        }
        (None, Some(s)) => {
            let safety = parse_f64("problem.cfl_safety", &s)?;
            if !(safety > 0.0 && safety <= 1.0) {
                return Err(format!("problem.cfl_safety: must lie in (0, 1], got {safety}"));
            }
            Ok(TimeStep::Cfl { safety })
        }
        (None, None) => Ok(TimeStep::default()),
    }
}

fn parse_initial(raw: &mut Raw, grid: &Grid) -> ConfigResult<Field> {
    let kind = require(raw, "initial.kind")?;
    let two_d = grid.dimension() == 2;
    if !two_d {
        reject(raw, "initial.center_y", "only meaningful for a 2-d grid")?;
    }
    let amplitude = opt_f64(raw, "initial.amplitude", 1.0)?;
    if kind == "constant" {
        reject(raw, "initial.center", "not meaningful for initial.kind = constant")?;
        reject(raw, "initial.center_y", "not meaningful for initial.kind = constant")?;
        reject(raw, "initial.width", "not meaningful for initial.kind = constant")?;
        reject(raw, "initial.offset", "not meaningful for initial.kind = constant")?;
        return Field::from_fn(grid.clone(), |_| amplitude).map_err(|e| format!("initial: {e}"));
    }
    let cx = opt_f64(raw, "initial.center", 0.0)?;
    let cy = if two_d { opt_f64(raw, "initial.center_y", 0.0)? } else { 0.0 };
    let width = opt_f64(raw, "initial.width", 0.5)?;
    let offset = opt_f64(raw, "initial.offset", 0.0)?;
    if !(width > 0.0) {
        return Err(format!("initial.width: must be positive, got {width}"));
    }
    let dist = move |x: &[f64]| -> f64 {
        let dx = x[0] - cx;
        let dy = if x.len() > 1 { x[1] - cy } else { 0.0 };
        (dx * dx + dy * dy).sqrt()
    };
    let profile: Box<dyn Fn(&[f64]) -> f64> = match kind.as_str() {
        "gaussian" => Box::new(move |x| {
            let d = dist(x) / width;
            offset + amplitude * (-d * d).exp()
        }),
        "hat" => Box::new(move |x| offset + amplitude * (1.0 - dist(x) / width).max(0.0)),
        other => {
            return Err(format!(
                "initial.kind: expected `gaussian`, `hat`, or `constant`, got `{other}`"
            ))
        }
    };
    Field::from_fn(grid.clone(), profile).map_err(|e| format!("initial: {e}"))
}

fn parse_analysis(raw: &mut Raw, grid: &Grid) -> ConfigResult<AnalysisConfig> {
    let two_d = grid.dimension() == 2;
    if !two_d {
        reject(raw, "analysis.center_y", "only meaningful for a 2-d grid")?;
    }
    let cx = opt_f64(raw, "analysis.center", 0.0)?;
    let cy = if two_d { opt_f64(raw, "analysis.center_y", 0.0)? } else { 0.0 };
    let radius = opt_f64(raw, "analysis.radius", 1.0)?;
    if !(radius > 0.0) {
        return Err(format!("analysis.radius: must be positive, got {radius}"));
    }
    let depth = opt_usize(raw, "analysis.depth", 3)?;
    if depth < 1 {
        return Err("analysis.depth: need at least 1 shrink level".to_string());
    }
    let ladder_levels = opt_usize(raw, "analysis.ladder_levels", 4)?;
    if ladder_levels > 16 {
        return Err(format!("analysis.ladder_levels: at most 16 supported, got {ladder_levels}"));
    }
    let energy_m = opt_usize(raw, "analysis.energy_m", 1)?;
    if energy_m > 16 {
        return Err(format!("analysis.energy_m: at most 16 supported, got {energy_m}"));
    }
    let level = opt_f64(raw, "analysis.level", 0.25)?;
    if !(level >= 0.0) {
        return Err(format!("analysis.level: truncation level must be >= 0, got {level}"));
    }
    let lambda = opt_f64(raw, "analysis.lambda", 0.3)?;
    let sigma = opt_f64(raw, "analysis.sigma", 0.1)?;
    let c0 = opt_f64(raw, "analysis.c0", 0.5)?;
    let delta = opt_f64(raw, "analysis.delta", 0.01)?;
    for (key, v) in [("analysis.lambda", lambda), ("analysis.c0", c0), ("analysis.delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(format!("{key}: must lie in (0, 1), got {v}"));
        }
    }
    if !(sigma > 0.0) {
        return Err(format!("analysis.sigma: must be positive, got {sigma}"));
    }
    Ok(AnalysisConfig {
        center: [cx, cy],
        radius,
        depth,
        ladder_levels: ladder_levels as u32,
        level,
        energy_m: energy_m as u32,
        lambda,
        sigma,
        c0,
        delta,
    })
}

/// The diagnostic cylinders must sit inside Ω×(0, T]: the analysis ball (the
/// wider of the base cylinder and the unit-radius energy ladder) inside Ω,
/// the time window above t = 0, and the innermost shrink level still
/// resolvable on the grid.
fn cross_checks(
    grid: &Grid,
    alpha: f64,
    horizon: f64,
    analysis: &AnalysisConfig,
) -> ConfigResult<()> {
    let ([glo_x, glo_y], [ghi_x, ghi_y]) = grid.bounds();
    let reach = analysis.radius.max(1.0);
    let [cx, cy] = analysis.center;
    let tol = 1e-12 * grid.diameter();
    let inside_x = cx - reach >= glo_x - tol && cx + reach <= ghi_x + tol;
    let inside_y =
        grid.dimension() == 1 || (cy - reach >= glo_y - tol && cy + reach <= ghi_y + tol);
    if !(inside_x && inside_y) {
        return Err(format!(
            "analysis.center/analysis.radius: the diagnostics need the ball of radius {reach} \
             around ({cx}, {cy}) inside the domain [{glo_x}, {ghi_x}] \
             (the energy ladder always uses radius 1)"
        ));
    }
    let depth_needed = analysis.radius.powf(alpha).max(1.0);
    if horizon + 1e-12 < depth_needed {
        return Err(format!(
            "problem.horizon: the diagnostic window reaches {depth_needed} back from the final \
             time, but the horizon is only {horizon}"
        ));
    }
    let innermost = analysis.radius / 4f64.powi(analysis.depth as i32);
    if innermost + 1e-12 < grid.spacing() {
        return Err(format!(
            "analysis.depth: the innermost cylinder radius {innermost} falls below the grid \
             spacing {}; reduce analysis.depth or refine grid.n",
            grid.spacing()
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> ConfigResult<ExperimentConfig> {
        let mut raw = Raw::parse(text)?;

        let grid = parse_grid(&mut raw)?;
        let kernel = parse_kernel(&mut raw, grid.dimension())?;
        let nonlinearity = parse_nonlinearity(&mut raw)?;
        let epsilons = parse_epsilons(&mut raw)?;
        let scheme = parse_scheme(&mut raw)?;
        let time_step = parse_time_step(&mut raw)?;
        let horizon = req_f64(&mut raw, "problem.horizon")?;
        if !(horizon > 0.0) {
            return Err(format!("problem.horizon: must be positive, got {horizon}"));
        }
        let u0 = parse_initial(&mut raw, &grid)?;
        let analysis = parse_analysis(&mut raw, &grid)?;

        let out_dir = PathBuf::from(require(&mut raw, "output.dir")?);
        let cadence = opt_usize(&mut raw, "output.cadence", 64)?;
        if cadence < 1 {
            return Err("output.cadence: need at least 1 snapshot".to_string());
        }
        let plots = opt_bool(&mut raw, "output.plots", true)?;

        raw.finish()?;
        cross_checks(&grid, kernel.alpha(), horizon, &analysis)?;

        let problem = ProblemSpec::new(grid, kernel, nonlinearity, epsilons[0], u0, horizon)
            .map_err(|e| format!("problem: {e}"))?
            .with_scheme(scheme)
            .with_time_step(time_step)
            .with_cadence(cadence);
        Ok(ExperimentConfig { problem, epsilons, analysis, out_dir, plots })
    }
}

/// Returns `text` with the assignment for `key` replaced by `value`
/// (appended if absent). Comments and unrelated lines pass through, so a
/// sweep child's config stays diffable against its parent.
pub fn override_key(text: &str, key: &str, value: &str) -> String {
    let mut out = String::new();
    let mut found = false;
    for line in text.lines() {
        let body = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        let matches = body.split_once('=').is_some_and(|(k, _)| k.trim() == key);
        if matches {
            out.push_str(&format!("{key} = {value}\n"));
            found = true;
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    if !found {
        out.push_str(&format!("{key} = {value}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_err(text: &str) -> String {
        match ExperimentConfig::from_text(text) {
            Ok(_) => panic!("expected a config error"),
            Err(e) => e,
        }
    }

    fn base_text() -> String {
        "\
# test problem
grid.lo = -2.0
grid.hi = 2.0
grid.n = 64

kernel.alpha = 0.5          # fractional by default
nonlinearity.kind = linear

problem.epsilon = 1e-3
problem.horizon = 1.25

initial.kind = gaussian
initial.center = 0.3

analysis.center = 0.1
analysis.depth = 1

output.dir = /tmp/unused
"
        .to_string()
    }

    fn with_line(extra: &str) -> String {
        format!("{}\n{extra}\n", base_text())
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_text(&base_text()).unwrap();
        assert_eq!(cfg.epsilons, vec![1e-3]);
        assert_eq!(cfg.problem.scheme, Scheme::Explicit);
        assert_eq!(cfg.problem.snapshot_cadence, 64);
        assert_eq!(cfg.analysis.radius, 1.0);
        assert_eq!(cfg.analysis.ladder_levels, 4);
        assert!(cfg.plots);
        assert_eq!(cfg.problem.grid.len(), 64);
        // gaussian centered at 0.3 peaks right of the origin
        let u = cfg.problem.u0.values();
        let peak = (0..u.len()).max_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap();
        assert!(cfg.problem.grid.node(peak)[0] > 0.0);
    }

    #[test]
    fn out_of_range_alpha_names_the_key() {
        let text = base_text().replace("kernel.alpha = 0.5", "kernel.alpha = 2.5");
        let err = parse_err(&text);
        assert!(err.contains("kernel.alpha"), "{err}");
        assert!(err.contains("2.5"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = parse_err(&with_line("kernel.alhpa = 1.0"));
        assert!(err.contains("unrecognized key `kernel.alhpa`"), "{err}");

        let err = parse_err(&with_line("grid.n = 32"));
        assert!(err.contains("duplicate key `grid.n`"), "{err}");
    }

    #[test]
    fn epsilon_and_ladder_are_mutually_exclusive() {
        let err = parse_err(&with_line("problem.epsilon_ladder = 1e-1, 1e-2"));
        assert!(err.contains("mutually exclusive"), "{err}");

        let text = base_text()
            .replace("problem.epsilon = 1e-3", "problem.epsilon_ladder = 1e-2, 1e-1");
        let err = parse_err(&text);
        assert!(err.contains("strictly decreasing"), "{err}");

        let text =
            base_text().replace("problem.epsilon = 1e-3", "problem.epsilon_ladder = 1e-1, 1e-3");
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        assert_eq!(cfg.epsilons, vec![1e-1, 1e-3]);
        assert_eq!(cfg.problem.epsilon, 1e-1);
    }

    #[test]
    fn cylinder_must_fit_the_domain_and_horizon() {
        // center too close to the boundary for the unit energy ball
        let text = base_text().replace("analysis.center = 0.1", "analysis.center = 1.5");
        let err = parse_err(&text);
        assert!(err.contains("analysis.center"), "{err}");

        // horizon shorter than the unit time depth
        let text = base_text().replace("problem.horizon = 1.25", "problem.horizon = 0.5");
        let err = parse_err(&text);
        assert!(err.contains("problem.horizon"), "{err}");

        // innermost shrink level below the mesh width
        let text = base_text().replace("analysis.depth = 1", "analysis.depth = 4");
        let err = parse_err(&text);
        assert!(err.contains("analysis.depth"), "{err}");
    }

    #[test]
    fn scheme_step_and_kind_validation_name_fields() {
        let err =
            parse_err(&with_line("problem.dt = 0.01\nproblem.cfl_safety = 0.5"));
        assert!(err.contains("problem.dt"), "{err}");

        let err = parse_err(&with_line("problem.scheme = midpoint"));
        assert!(err.contains("problem.scheme"), "{err}");

        let porous = with_line("nonlinearity.m = 3")
            .replace("nonlinearity.kind = linear", "nonlinearity.kind = porous");
        let cfg = ExperimentConfig::from_text(&porous).unwrap();
        assert!(cfg.problem.nonlinearity.is_porous());

        // the same key is rejected when the kind does not use it
        let err = parse_err(&with_line("nonlinearity.m = 3"));
        assert!(err.contains("nonlinearity.m"), "{err}");
    }

    #[test]
    fn truncated_kernel_requires_both_parameters() {
        let text = base_text().replace(
            "kernel.alpha = 0.5          # fractional by default",
            "kernel.kind = truncated\nkernel.alpha = 0.5\nkernel.lambda = 1.5",
        );
        let err = parse_err(&text);
        assert!(err.contains("kernel.radius"), "{err}");

        let ok = text.replace("kernel.lambda = 1.5", "kernel.lambda = 1.5\nkernel.radius = 2.0");
        let cfg = ExperimentConfig::from_text(&ok).unwrap();
        assert!(cfg.problem.kernel.descriptor().contains("truncated"));
    }

    #[test]
    fn override_replaces_or_appends() {
        let text = "a.b = 1\n# note\nc.d = 2\n";
        let replaced = override_key(text, "a.b", "9");
        assert!(replaced.contains("a.b = 9"));
        assert!(!replaced.contains("a.b = 1"));
        assert!(replaced.contains("# note"));

        let appended = override_key(text, "e.f", "3");
        assert!(appended.ends_with("e.f = 3\n"));
        assert!(appended.contains("a.b = 1"));
    }

    #[test]
    fn two_d_grid_keys_are_all_or_none() {
        let err = parse_err(&with_line("grid.ny = 16"));
        assert!(err.contains("grid.lo_y"), "{err}");

        let cfg = ExperimentConfig::from_text(&with_line(
            "grid.ny = 64\ngrid.lo_y = -2.0\ngrid.hi_y = 2.0",
        ))
        .unwrap();
        assert_eq!(cfg.problem.grid.dimension(), 2);
        assert_eq!(cfg.problem.grid.shape(), (64, 64));

        let err = parse_err(&with_line("grid.ny = 24\ngrid.lo_y = -2.0\ngrid.hi_y = 2.0"));
        assert!(err.contains("spacing"), "{err}");
    }
}
