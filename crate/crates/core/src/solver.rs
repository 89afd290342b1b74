//! Time integration of the regularized filtration problems.
//!
//! The evolution is kept in enthalpy form: the enthalpy v carries the time
//! derivative, u = φ_ε(v) is the diffusing field, and one explicit step is
//!
//! ```text
//! v_i ← v_i + Δt (Lu)_i,   u_i ← φ_ε(v_i).
//! ```
//!
//! Under the CFL bound Δt ≤ safety · inf β_ε' / max_i(Σ_j w_ij + s_i) this
//! update is a convex combination in u (with 0 joining through the absorption
//! term), so the solution hull(range(u0) ∪ {0}) is invariant: maximum and
//! comparison principles hold pointwise. The implicit scheme solves
//! v − Δt·Lφ_ε(v) = v_old by damped Newton and trades the step bound for a
//! dense linear solve per iteration.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::KernelSpec;
use crate::linalg::lu_factor;
use crate::nonlinearity::{FloorLocation, NonlinearitySpec, RegularizedNonlinearity};
use crate::operator::{apply_operator, build_weights, WeightMatrix};

/// Newton convergence tolerance on the residual ∞-norm.
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Default snapshot cadence: 64 uniformly spaced times plus the endpoints.
pub const DEFAULT_CADENCE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    Implicit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Explicit => "explicit",
            Scheme::Implicit => "implicit",
        }
    }
}

/// Time-step policy: derived from the CFL bound or fixed outright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    /// Δt = safety · inf β_ε' / max outflow (default safety 0.9).
    Cfl { safety: f64 },
    Fixed(f64),
}

impl Default for TimeStep {
    fn default() -> Self {
        TimeStep::Cfl { safety: 0.9 }
    }
}

/// Full description of one integration task.
#[derive(Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub kernel: KernelSpec,
    pub nonlinearity: NonlinearitySpec,
    pub epsilon: f64,
    pub u0: Field,
    pub horizon: f64,
    pub scheme: Scheme,
    pub time_step: TimeStep,
    pub snapshot_cadence: usize,
    /// Diagnostic normalization window [min, max] carried through to analysis.
    pub normalization: Option<(f64, f64)>,
}

impl ProblemSpec {
    pub fn new(
        grid: Grid,
        kernel: KernelSpec,
        nonlinearity: NonlinearitySpec,
        epsilon: f64,
        u0: Field,
        horizon: f64,
    ) -> Result<Self> {
        if u0.grid() != &grid {
            return Err(Error::DimensionMismatch("initial data grid differs from grid".into()));
        }
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::param("horizon", format!("must be finite and >= 0, got {horizon}")));
        }
        Ok(Self {
            grid,
            kernel,
            nonlinearity,
            epsilon,
            u0,
            horizon,
            scheme: Scheme::Explicit,
            time_step: TimeStep::default(),
            snapshot_cadence: DEFAULT_CADENCE,
            normalization: None,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_time_step(mut self, policy: TimeStep) -> Self {
        self.time_step = policy;
        self
    }

    pub fn with_cadence(mut self, cadence: usize) -> Self {
        self.snapshot_cadence = cadence.max(1);
        self
    }

    pub fn with_normalization(mut self, window: (f64, f64)) -> Self {
        self.normalization = Some(window);
        self
    }
}

/// CFL derivation with the branch that produced the derivative floor, so a
/// report can distinguish "the chord slope governs" from "the branch slope
/// governs" for graph-type nonlinearities.
#[derive(Debug, Clone, Copy)]
pub struct CflReport {
    pub dt: f64,
    pub safety: f64,
    pub derivative_floor: f64,
    pub floor_location: FloorLocation,
    pub max_outflow: f64,
}

/// Prepared immutable state shared by all steps of one run: weights frozen at
/// t = 0, the regularized nonlinearity, and the CFL report for the initial
/// data range.
pub struct ProblemContext {
    pub weights: WeightMatrix,
    pub reg: RegularizedNonlinearity,
    pub cfl: CflReport,
}

impl ProblemContext {
    pub fn prepare(problem: &ProblemSpec) -> Result<Self> {
        let weights = build_weights(&problem.grid, &problem.kernel, 0.0)?;
        let reg = problem.nonlinearity.regularize(problem.epsilon)?;
        let cfl = derive_cfl(problem, &weights, &reg)?;
        Ok(Self { weights, reg, cfl })
    }
}

fn derive_cfl(
    problem: &ProblemSpec,
    weights: &WeightMatrix,
    reg: &RegularizedNonlinearity,
) -> Result<CflReport> {
    let safety = match problem.time_step {
        TimeStep::Cfl { safety } => safety,
        TimeStep::Fixed(_) => 0.9,
    };
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::param("safety", format!("CFL safety must be in (0, 1], got {safety}")));
    }
    // absorption pulls values toward 0, so the invariant hull includes it
    let lo = problem.u0.min().min(0.0);
    let hi = problem.u0.max().max(0.0);
    let (floor, location) = reg.derivative_floor(lo, hi);
    let mut max_outflow = 0.0f64;
    for i in 0..weights.len() {
        let out = weights.outflow(i);
        if out <= 0.0 {
            return Err(Error::DegenerateRow(i));
        }
        max_outflow = max_outflow.max(out);
    }
    Ok(CflReport { dt: safety * floor / max_outflow, safety, derivative_floor: floor, floor_location: location, max_outflow })
}

/// The explicit stability bound for `problem` (weights are built internally).
pub fn cfl_timestep(problem: &ProblemSpec) -> Result<CflReport> {
    Ok(ProblemContext::prepare(problem)?.cfl)
}

/// Mutable integration state: u and the enthalpy v = β_ε(u).
#[derive(Debug, Clone)]
pub struct State {
    pub time: f64,
    pub u: Field,
    pub v: Field,
}

impl State {
    /// Initial state with v0 = β_ε(u0) (the regularized selection; at the
    /// symmetric graphs' u0 = 0 this is the midpoint 0).
    pub fn initial(ctx: &ProblemContext, u0: &Field) -> State {
        let v = Field::new(*u0.grid(), u0.values().iter().map(|&x| ctx.reg.beta(x)).collect())
            .expect("beta of finite data is finite");
        State { time: 0.0, u: u0.clone(), v }
    }
}

/// One explicit enthalpy step. Rejects Δt beyond the CFL bound.
pub fn step_explicit(ctx: &ProblemContext, state: &mut State, dt: f64) -> Result<()> {
    // tiny headroom for the dt = horizon/steps rounding
    if dt > ctx.cfl.dt * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit: ctx.cfl.dt });
    }
    let lu = apply_operator(&ctx.weights, &state.u)?;
    for ((v, u), l) in
        state.v.values_mut().iter_mut().zip(state.u.values_mut()).zip(lu.values())
    {
        *v += dt * l;
        *u = ctx.reg.phi(*v);
    }
    state.time += dt;
    Ok(())
}

/// One implicit step: solves v − Δt·Lφ_ε(v) = v_old by damped Newton with
/// Jacobian I − Δt·W_L·diag(φ_ε'(v)). Returns the Newton iteration count.
pub fn step_implicit(ctx: &ProblemContext, state: &mut State, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("implicit step needs dt > 0, got {dt}")));
    }
    let grid = *state.u.grid();
    let n = grid.len();
    let v_old = state.v.values().to_vec();
    let mut v = v_old.clone();
    let mut history = Vec::new();

    let residual = |v: &[f64]| -> Result<(Vec<f64>, f64)> {
        let u = Field::new(grid, v.iter().map(|&x| ctx.reg.phi(x)).collect())?;
        let lu = apply_operator(&ctx.weights, &u)?;
        let r: Vec<f64> = (0..n).map(|i| v[i] - dt * lu.values()[i] - v_old[i]).collect();
        let norm = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok((r, norm))
    };

    let (mut res, mut res_norm) = residual(&v)?;
    for iter in 0..NEWTON_MAX_ITER {
        history.push(res_norm);
        if res_norm <= NEWTON_TOL {
            finish_implicit(ctx, state, v, dt);
            return Ok(iter);
        }

        // J = I - dt * W_L * diag(phi'), with W_L = weights - diag(outflow)
        let phi_prime: Vec<f64> = v.iter().map(|&x| ctx.reg.phi_prime(x)).collect();
        let mut jac = vec![0.0f64; n * n];
        ctx.weights.for_each_upper(|i, j, w| {
            jac[i * n + j] = -dt * w * phi_prime[j];
            jac[j * n + i] = -dt * w * phi_prime[i];
        });
        for i in 0..n {
            jac[i * n + i] = 1.0 + dt * ctx.weights.outflow(i) * phi_prime[i];
        }
        let factors = lu_factor(jac, n)?;
        let mut delta = res.clone();
        factors.solve(&mut delta)?;

        // damped line search on the residual norm
        let mut theta = 1.0f64;
        loop {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(x, d)| x - theta * d).collect();
            let (r_t, n_t) = residual(&trial)?;
            if n_t < res_norm || theta <= NEWTON_MIN_DAMPING {
                v = trial;
                res = r_t;
                res_norm = n_t;
                break;
            }
            theta *= 0.5;
        }
    }
    if res_norm <= NEWTON_TOL {
        finish_implicit(ctx, state, v, dt);
        return Ok(NEWTON_MAX_ITER);
    }
    Err(Error::NewtonDiverged { iterations: NEWTON_MAX_ITER, last: res_norm, history })
}

fn finish_implicit(ctx: &ProblemContext, state: &mut State, v: Vec<f64>, dt: f64) {
    for ((sv, su), nv) in
        state.v.values_mut().iter_mut().zip(state.u.values_mut()).zip(v)
    {
        *sv = nv;
        *su = ctx.reg.phi(nv);
    }
    state.time += dt;
}

/// One stored field pair.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub u: Field,
    pub v: Field,
}

/// Per-step extrema, recorded at every step including step 0.
#[derive(Debug, Clone, Copy)]
pub struct StepExtrema {
    pub step: usize,
    pub time: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone)]
pub struct RunStats {
    pub dt: f64,
    pub steps: usize,
    pub cadence: usize,
    pub newton_total: usize,
    pub newton_max: usize,
    pub cfl: CflReport,
}

/// Everything one run produced: snapshots of u and v, the per-step extrema
/// trace, and solver statistics.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub grid: Grid,
    pub scheme: Scheme,
    /// Order of the run's operator (the kernel's α).
    pub alpha: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub kernel_descriptor: String,
    pub nonlinearity_descriptor: String,
    pub snapshots: Vec<Snapshot>,
    pub extrema: Vec<StepExtrema>,
    pub stats: RunStats,
}

impl RunRecord {
    pub fn final_state(&self) -> &Snapshot {
        self.snapshots.last().expect("a run record holds at least the initial snapshot")
    }

    /// max over the whole run (all steps, not just snapshots) of ‖u‖_∞.
    pub fn sup_u(&self) -> f64 {
        self.extrema.iter().map(|e| e.u_min.abs().max(e.u_max.abs())).fold(0.0, f64::max)
    }

    /// Latest snapshot with time ≤ t (tolerating rounding at snapshot times).
    pub fn snapshot_at_or_before(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().rev().find(|s| s.time <= t + 1e-12 * (1.0 + t.abs()))
    }

    /// Affine renormalization of u onto [0, 1] over the window [m, M]; the
    /// enthalpy rescales as v/(M−m), matching the transformed nonlinearity
    /// β̃(ũ) = β((M−m)ũ + m)/(M−m).
    pub fn normalized(&self, window: (f64, f64)) -> Result<RunRecord> {
        let (m, big_m) = window;
        if !(big_m > m) {
            return Err(Error::param("window", format!("need max > min, got [{m}, {big_m}]")));
        }
        let span = big_m - m;
        let mut out = self.clone();
        for snap in &mut out.snapshots {
            snap.u.map_in_place(|x| (x - m) / span);
            snap.v.map_in_place(|x| x / span);
        }
        for e in &mut out.extrema {
            e.u_min = (e.u_min - m) / span;
            e.u_max = (e.u_max - m) / span;
            e.v_min /= span;
            e.v_max /= span;
        }
        Ok(out)
    }
}

fn extrema_of(state: &State, step: usize) -> StepExtrema {
    StepExtrema {
        step,
        time: state.time,
        u_min: state.u.min(),
        u_max: state.u.max(),
        v_min: state.v.min(),
        v_max: state.v.max(),
    }
}

/// Snapshot schedule: {round(k·steps/cadence)} ∪ {0, steps}, deduplicated.
fn snapshot_steps(steps: usize, cadence: usize) -> Vec<usize> {
    let mut set = std::collections::BTreeSet::new();
    set.insert(0);
    set.insert(steps);
    for k in 1..cadence {
        let s = ((k as f64) * (steps as f64) / (cadence as f64)).round() as usize;
        set.insert(s.min(steps));
    }
    set.into_iter().collect()
}

/// Base step and count: the policy step is shrunk so an integer number of
/// steps lands exactly on the horizon.
fn step_plan(problem: &ProblemSpec, cfl: &CflReport) -> Result<(f64, usize)> {
    if problem.horizon == 0.0 {
        return Ok((0.0, 0));
    }
    let base = match problem.time_step {
        TimeStep::Cfl { .. } => cfl.dt,
        TimeStep::Fixed(dt) => {
            if !(dt > 0.0) {
                return Err(Error::param("dt", format!("fixed step must be positive, got {dt}")));
            }
            if problem.scheme == Scheme::Explicit && dt > cfl.dt * (1.0 + 1e-12) {
                return Err(Error::CflViolation { dt, limit: cfl.dt });
            }
            dt
        }
    };
    let steps = (problem.horizon / base).ceil().max(1.0) as usize;
    Ok((problem.horizon / steps as f64, steps))
}

/// Integrates `problem` to its horizon, recording snapshots at the configured
/// cadence and per-step extrema throughout.
pub fn run(problem: &ProblemSpec) -> Result<RunRecord> {
    let ctx = ProblemContext::prepare(problem)?;
    let (dt, steps) = step_plan(problem, &ctx.cfl)?;
    drive(problem, &ctx, dt, steps, State::initial(&ctx, &problem.u0), 0, Vec::new(), Vec::new())
}

/// Continues a persisted run from its last snapshot to the original horizon,
/// reusing the recorded step size so the trajectory is the one the
/// uninterrupted run would have taken.
pub fn resume(problem: &ProblemSpec, record: &RunRecord) -> Result<RunRecord> {
    if record.grid != problem.grid {
        return Err(Error::DimensionMismatch("resume grid differs from problem grid".into()));
    }
    let ctx = ProblemContext::prepare(problem)?;
    let last = record.final_state().clone();
    let start_step = last.step;
    if start_step > record.stats.steps {
        return Err(Error::Persist("stored snapshot is past the stored step count".into()));
    }
    let state =
        State { time: start_step as f64 * record.stats.dt, u: last.u.clone(), v: last.v.clone() };
    let snapshots: Vec<Snapshot> = record.snapshots.clone();
    let extrema: Vec<StepExtrema> =
        record.extrema.iter().copied().filter(|e| e.step <= start_step).collect();
    drive(problem, &ctx, record.stats.dt, record.stats.steps, state, start_step, snapshots, extrema)
}

#[allow(clippy::too_many_arguments)]
fn drive(
    problem: &ProblemSpec,
    ctx: &ProblemContext,
    dt: f64,
    steps: usize,
    mut state: State,
    start_step: usize,
    mut snapshots: Vec<Snapshot>,
    mut extrema: Vec<StepExtrema>,
) -> Result<RunRecord> {
    let schedule = snapshot_steps(steps, problem.snapshot_cadence.max(1));
    let mut newton_total = 0usize;
    let mut newton_max = 0usize;

    let record_step = |state: &State, step: usize, snapshots: &mut Vec<Snapshot>, extrema: &mut Vec<StepExtrema>| {
        extrema.push(extrema_of(state, step));
        if schedule.binary_search(&step).is_ok() {
            snapshots.push(Snapshot { step, time: state.time, u: state.u.clone(), v: state.v.clone() });
        }
    };

    // a fresh run records its initial state; a resumed one already holds it
    if snapshots.is_empty() {
        record_step(&state, 0, &mut snapshots, &mut extrema);
    }

    for step in start_step + 1..=steps {
        match problem.scheme {
            Scheme::Explicit => step_explicit(ctx, &mut state, dt)?,
            Scheme::Implicit => {
                let iters = step_implicit(ctx, &mut state, dt)?;
                newton_total += iters;
                newton_max = newton_max.max(iters);
            }
        }
        // keep time exactly reproducible across resume: t = step * dt
        state.time = step as f64 * dt;
        record_step(&state, step, &mut snapshots, &mut extrema);
    }

    Ok(RunRecord {
        grid: problem.grid,
        scheme: problem.scheme,
        alpha: problem.kernel.alpha(),
        epsilon: problem.epsilon,
        horizon: problem.horizon,
        kernel_descriptor: problem.kernel.descriptor(),
        nonlinearity_descriptor: problem.nonlinearity.descriptor(),
        snapshots,
        extrema,
        stats: RunStats { dt, steps, cadence: problem.snapshot_cadence, newton_total, newton_max, cfl: ctx.cfl },
    })
}

/// One rung of the ε-ladder.
pub struct LadderEntry {
    pub epsilon: f64,
    pub sup_u: f64,
    pub record: RunRecord,
    pub diagnostic: Option<f64>,
}

pub struct LadderReport {
    pub entries: Vec<LadderEntry>,
    /// ∞-distances between consecutive final u-fields.
    pub pair_distances: Vec<f64>,
    /// distances nonincreasing within factor 1.5
    pub cauchy_ok: bool,
    /// max − min of the per-ε sup-norm column
    pub sup_spread: f64,
}

/// Runs the same problem at each ε and reports the Cauchy trend of the final
/// fields, the ε-uniform L∞ column, and an optional per-run diagnostic
/// (e.g. an oscillation-decay measurement supplied by the caller).
pub fn epsilon_ladder(
    problem: &ProblemSpec,
    epsilons: &[f64],
    diagnostic: Option<&dyn Fn(&RunRecord) -> Result<f64>>,
) -> Result<LadderReport> {
    if epsilons.len() < 2 {
        return Err(Error::param("epsilons", "ladder needs at least two rungs"));
    }
    if epsilons.windows(2).any(|p| !(p[1] < p[0])) {
        return Err(Error::param("epsilons", "ladder must be strictly decreasing"));
    }
    let mut entries = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut sub = problem.clone();
        sub.epsilon = eps;
        let record = run(&sub)?;
        let diag = match diagnostic {
            Some(f) => Some(f(&record)?),
            None => None,
        };
        entries.push(LadderEntry { epsilon: eps, sup_u: record.sup_u(), record, diagnostic: diag });
    }
    let mut pair_distances = Vec::with_capacity(entries.len() - 1);
    for pair in entries.windows(2) {
        let a = &pair[0].record.final_state().u;
        let b = &pair[1].record.final_state().u;
        pair_distances.push(a.inf_distance(b)?);
    }
    let cauchy_ok = pair_distances
        .windows(2)
        .all(|d| d[1] <= 1.5 * d[0] + 1e-12);
    let sup_column: Vec<f64> = entries.iter().map(|e| e.sup_u).collect();
    let sup_spread = sup_column.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - sup_column.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(LadderReport { entries, pair_distances, cauchy_ok, sup_spread })
}
