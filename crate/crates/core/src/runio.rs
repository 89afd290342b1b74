//! Plain-text persistence of run records.
//!
//! A run saves into one directory:
//! * `meta`: sorted `key=value` lines with every parameter, the step plan,
//!   solver statistics, and SHA-256 hashes of the grid, kernel, and initial
//!   data (so a resume onto a different problem is refused).
//! * `t_<step>.csv`: one snapshot per scheduled step, columns `x[,y],u,v`.
//! * `extrema.csv`: per-step field extrema.
//!
//! Floats are written with the shortest round-trip representation, so loading
//! restores them bit-exactly and a saved run continues as if never
//! interrupted. Nothing time- or machine-dependent is written: saving the
//! same record twice produces byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernels::KernelSpec;
use crate::nonlinearity::FloorLocation;
use crate::solver::{CflReport, ProblemSpec, RunRecord, RunStats, Snapshot, StepExtrema};

const FORMAT_VERSION: &str = "1";

fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Persist(format!("unreadable float in {what}: {s:?}")))
}

fn parse_n(s: &str, what: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Persist(format!("unreadable count in {what}: {s:?}")))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

/// Hash of the exact grid geometry (dimension, bounds, shape).
pub fn grid_hash(grid: &Grid) -> String {
    let mut h = Sha256::new();
    h.update((grid.dimension() as u64).to_le_bytes());
    let (lo, hi) = grid.bounds();
    for b in lo.iter().chain(hi.iter()) {
        h.update(b.to_le_bytes());
    }
    let (nx, ny) = grid.shape();
    h.update((nx as u64).to_le_bytes());
    h.update((ny as u64).to_le_bytes());
    hex(&h.finalize())
}

/// Hash of the kernel descriptor (the descriptor pins every parameter of the
/// built-in forms with round-trip float formatting).
pub fn kernel_hash(kernel: &KernelSpec) -> String {
    let mut h = Sha256::new();
    h.update(kernel.descriptor().as_bytes());
    hex(&h.finalize())
}

/// Hash of a field's raw values.
pub fn field_hash(field: &Field) -> String {
    let mut h = Sha256::new();
    for v in field.values() {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

fn location_name(location: FloorLocation) -> &'static str {
    match location {
        FloorLocation::RegularizationBand => "regularization_band",
        FloorLocation::Branch => "branch",
        FloorLocation::Sampled => "sampled",
    }
}

fn parse_location(s: &str) -> Result<FloorLocation> {
    match s {
        "regularization_band" => Ok(FloorLocation::RegularizationBand),
        "branch" => Ok(FloorLocation::Branch),
        "sampled" => Ok(FloorLocation::Sampled),
        other => Err(Error::Persist(format!("unknown derivative floor location {other:?}"))),
    }
}

fn snapshot_file(step: usize) -> String {
    format!("t_{step:08}.csv")
}

/// Writes `record` into `dir` (created if absent). Custom kernels hold
/// closures and are refused; everything else round-trips.
pub fn save_run(problem: &ProblemSpec, record: &RunRecord, dir: &Path) -> Result<()> {
    if !problem.kernel.is_persistable() {
        return Err(Error::Persist(
            "custom kernels hold code, not data; runs using them cannot be persisted".into(),
        ));
    }
    if record.grid != problem.grid {
        return Err(Error::DimensionMismatch("record grid differs from problem grid".into()));
    }
    fs::create_dir_all(dir)?;

    let mut meta: BTreeMap<&'static str, String> = BTreeMap::new();
    meta.insert("version", FORMAT_VERSION.into());
    meta.insert("grid", problem.grid.descriptor());
    meta.insert("grid_hash", grid_hash(&problem.grid));
    meta.insert("kernel", record.kernel_descriptor.clone());
    meta.insert("kernel_hash", kernel_hash(&problem.kernel));
    meta.insert("nonlinearity", record.nonlinearity_descriptor.clone());
    meta.insert("u0_hash", field_hash(&problem.u0));
    meta.insert("scheme", record.scheme.name().into());
    meta.insert("alpha", fmt_f(record.alpha));
    meta.insert("epsilon", fmt_f(record.epsilon));
    meta.insert("horizon", fmt_f(record.horizon));
    meta.insert("dt", fmt_f(record.stats.dt));
    meta.insert("steps", record.stats.steps.to_string());
    meta.insert("cadence", record.stats.cadence.to_string());
    meta.insert("newton_total", record.stats.newton_total.to_string());
    meta.insert("newton_max", record.stats.newton_max.to_string());
    meta.insert("cfl_dt", fmt_f(record.stats.cfl.dt));
    meta.insert("cfl_safety", fmt_f(record.stats.cfl.safety));
    meta.insert("cfl_floor", fmt_f(record.stats.cfl.derivative_floor));
    meta.insert("cfl_floor_location", location_name(record.stats.cfl.floor_location).into());
    meta.insert("cfl_max_outflow", fmt_f(record.stats.cfl.max_outflow));
    let steps_list: Vec<String> = record.snapshots.iter().map(|s| s.step.to_string()).collect();
    meta.insert("snapshot_steps", steps_list.join(","));

    let mut text = String::new();
    for (k, v) in &meta {
        let _ = writeln!(text, "{k}={v}");
    }
    fs::write(dir.join("meta"), text)?;

    let mut ext = String::from("step,time,u_min,u_max,v_min,v_max\n");
    for e in &record.extrema {
        let _ = writeln!(
            ext,
            "{},{},{},{},{},{}",
            e.step,
            fmt_f(e.time),
            fmt_f(e.u_min),
            fmt_f(e.u_max),
            fmt_f(e.v_min),
            fmt_f(e.v_max)
        );
    }
    fs::write(dir.join("extrema.csv"), ext)?;

    for snap in &record.snapshots {
        let grid = &record.grid;
        let mut csv = String::with_capacity(24 * grid.len());
        csv.push_str(if grid.dimension() == 1 { "x,u,v\n" } else { "x,y,u,v\n" });
        for i in 0..grid.len() {
            let p = grid.node(i);
            if grid.dimension() == 1 {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    fmt_f(p[0]),
                    fmt_f(snap.u.values()[i]),
                    fmt_f(snap.v.values()[i])
                );
            } else {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt_f(p[0]),
                    fmt_f(p[1]),
                    fmt_f(snap.u.values()[i]),
                    fmt_f(snap.v.values()[i])
                );
            }
        }
        fs::write(dir.join(snapshot_file(snap.step)), csv)?;
    }
    Ok(())
}

fn require_match(key: &str, stored: &str, current: &str) -> Result<()> {
    if stored == current {
        Ok(())
    } else {
        Err(Error::Persist(format!(
            "stored run does not belong to this problem: {key} is {stored:?}, expected {current:?}"
        )))
    }
}

/// Reads a saved run back, verifying it belongs to `problem`. A partially
/// written directory (snapshot files missing from the tail of the schedule)
/// loads up to the last contiguous snapshot, ready for [`crate::solver::resume`].
pub fn load_run(problem: &ProblemSpec, dir: &Path) -> Result<RunRecord> {
    let meta_text = fs::read_to_string(dir.join("meta"))?;
    let mut meta = BTreeMap::new();
    for line in meta_text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Persist(format!("malformed meta line {line:?}")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let get = |key: &str| -> Result<&str> {
        meta.get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Persist(format!("meta is missing key {key:?}")))
    };

    require_match("version", get("version")?, FORMAT_VERSION)?;
    require_match("grid_hash", get("grid_hash")?, &grid_hash(&problem.grid))?;
    require_match("kernel_hash", get("kernel_hash")?, &kernel_hash(&problem.kernel))?;
    require_match("u0_hash", get("u0_hash")?, &field_hash(&problem.u0))?;
    require_match("scheme", get("scheme")?, problem.scheme.name())?;
    require_match("alpha", get("alpha")?, &fmt_f(problem.kernel.alpha()))?;
    require_match("epsilon", get("epsilon")?, &fmt_f(problem.epsilon))?;
    require_match("horizon", get("horizon")?, &fmt_f(problem.horizon))?;
    require_match(
        "nonlinearity",
        get("nonlinearity")?,
        &problem.nonlinearity.descriptor(),
    )?;

    let dt = parse_f(get("dt")?, "meta dt")?;
    let steps = parse_n(get("steps")?, "meta steps")?;
    let cadence = parse_n(get("cadence")?, "meta cadence")?;
    let stats = RunStats {
        dt,
        steps,
        cadence,
        newton_total: parse_n(get("newton_total")?, "meta newton_total")?,
        newton_max: parse_n(get("newton_max")?, "meta newton_max")?,
        cfl: CflReport {
            dt: parse_f(get("cfl_dt")?, "meta cfl_dt")?,
            safety: parse_f(get("cfl_safety")?, "meta cfl_safety")?,
            derivative_floor: parse_f(get("cfl_floor")?, "meta cfl_floor")?,
            floor_location: parse_location(get("cfl_floor_location")?)?,
            max_outflow: parse_f(get("cfl_max_outflow")?, "meta cfl_max_outflow")?,
        },
    };

    let mut schedule = Vec::new();
    for part in get("snapshot_steps")?.split(',').filter(|p| !p.is_empty()) {
        schedule.push(parse_n(part, "meta snapshot_steps")?);
    }
    if schedule.is_empty() {
        return Err(Error::Persist("meta lists no snapshots".into()));
    }

    let mut snapshots = Vec::new();
    for &step in &schedule {
        let path = dir.join(snapshot_file(step));
        if !path.exists() {
            break; // interrupted save: resume from the last contiguous snapshot
        }
        snapshots.push(read_snapshot(&path, &problem.grid, step, dt)?);
    }
    if snapshots.is_empty() {
        return Err(Error::Persist("no snapshot files present".into()));
    }
    let last_step = snapshots.last().map(|s| s.step).unwrap_or(0);

    let extrema = read_extrema(&dir.join("extrema.csv"), last_step)?;

    Ok(RunRecord {
        grid: problem.grid,
        scheme: problem.scheme,
        alpha: problem.kernel.alpha(),
        epsilon: problem.epsilon,
        horizon: problem.horizon,
        kernel_descriptor: get("kernel")?.to_string(),
        nonlinearity_descriptor: get("nonlinearity")?.to_string(),
        snapshots,
        extrema,
        stats,
    })
}

fn read_snapshot(path: &Path, grid: &Grid, step: usize, dt: f64) -> Result<Snapshot> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let expected_header = if grid.dimension() == 1 { "x,u,v" } else { "x,y,u,v" };
    if header != expected_header {
        return Err(Error::Persist(format!(
            "snapshot {} has header {header:?}, expected {expected_header:?}",
            path.display()
        )));
    }
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != grid.dimension() + 2 {
            return Err(Error::Persist(format!(
                "snapshot {} row {i} has {} columns",
                path.display(),
                cols.len()
            )));
        }
        if i >= grid.len() {
            return Err(Error::Persist(format!(
                "snapshot {} has more rows than grid nodes",
                path.display()
            )));
        }
        let node = grid.node(i);
        for (d, col) in cols[..grid.dimension()].iter().enumerate() {
            let coord = parse_f(col, "snapshot coordinate")?;
            if coord != node[d] {
                return Err(Error::Persist(format!(
                    "snapshot {} row {i} lies at {coord:?}, grid node is at {:?}",
                    path.display(),
                    node[d]
                )));
            }
        }
        u.push(parse_f(cols[grid.dimension()], "snapshot u")?);
        v.push(parse_f(cols[grid.dimension() + 1], "snapshot v")?);
    }
    if u.len() != grid.len() {
        return Err(Error::Persist(format!(
            "snapshot {} has {} rows, grid has {} nodes",
            path.display(),
            u.len(),
            grid.len()
        )));
    }
    Ok(Snapshot {
        step,
        time: step as f64 * dt,
        u: Field::new(*grid, u)?,
        v: Field::new(*grid, v)?,
    })
}

fn read_extrema(path: &Path, last_step: usize) -> Result<Vec<StepExtrema>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "step,time,u_min,u_max,v_min,v_max" {
                return Err(Error::Persist(format!("extrema header {line:?} unrecognized")));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Persist(format!("extrema row {i} has {} columns", cols.len())));
        }
        let step = parse_n(cols[0], "extrema step")?;
        if step > last_step {
            continue; // keep the trace consistent with the snapshots that exist
        }
        out.push(StepExtrema {
            step,
            time: parse_f(cols[1], "extrema time")?,
            u_min: parse_f(cols[2], "extrema u_min")?,
            u_max: parse_f(cols[3], "extrema u_max")?,
            v_min: parse_f(cols[4], "extrema v_min")?,
            v_max: parse_f(cols[5], "extrema v_max")?,
        });
    }
    Ok(out)
}
