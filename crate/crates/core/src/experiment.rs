//! Virtual CT fatigue experiment: crack length, ΔK, da/dN and Paris fits.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::driver::{Counters, InvariantMonitor, Simulation};
use crate::error::{Error, Result};
use crate::mesh::{self, Mesh};
use crate::model::units;
use crate::output::{self, RunPaths};

/// Coefficients of the CT stress-intensity polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSet {
    /// Standard polynomial with linear coefficient 4.64.
    #[default]
    Astm,
    /// Linear coefficient 4.46.
    PaperAsWritten,
}

impl CoefficientSet {
    pub fn linear_coefficient(self) -> f64 {
        match self {
            CoefficientSet::Astm => 4.64,
            CoefficientSet::PaperAsWritten => 4.46,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoefficientSet::Astm => "astm",
            CoefficientSet::PaperAsWritten => "paper_as_written",
        }
    }
}

/// Dimensionless CT geometry factor f(a/W).
pub fn geometry_factor(alpha: f64, set: CoefficientSet) -> f64 {
    let c = set.linear_coefficient();
    let poly = 0.886 + c * alpha - 13.32 * alpha.powi(2) + 14.72 * alpha.powi(3) - 5.6 * alpha.powi(4);
    (2.0 + alpha) * poly / (1.0 - alpha).powf(1.5)
}

/// Stress intensity range and whether a/W lies in the polynomial's range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaK {
    /// ΔK [MPa·√m].
    pub value: f64,
    pub in_range: bool,
}

/// ΔK = ΔP·f(a/W)/(B√W), converted to MPa·√m. Lengths in mm, ΔP in N.
pub fn compute_delta_k(dp: f64, a: f64, w: f64, b: f64, set: CoefficientSet) -> Result<DeltaK> {
    if !(w > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("W = {w} and B = {b} must be positive")));
    }
    if !(a > 0.0 && a < w) {
        return Err(Error::domain(format!("crack length {a} must lie in (0, W = {w})")));
    }
    let alpha = a / w;
    let k_mm = dp * geometry_factor(alpha, set) / (b * w.sqrt());
    Ok(DeltaK {
        value: units::mpa_sqrt_mm_to_mpa_sqrt_m(k_mm),
        in_range: (0.2 - 1e-12..=0.8 + 1e-12).contains(&alpha),
    })
}

/// Load range giving a target ΔK [MPa·√m] at crack length `a`.
pub fn load_range_for(delta_k: f64, a: f64, w: f64, b: f64, set: CoefficientSet) -> Result<f64> {
    let unit = compute_delta_k(1.0, a, w, b, set)?;
    Ok(delta_k / unit.value)
}

/// Measured crack length and whether the damaged zone is contiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackLength {
    pub a: f64,
    pub contiguous: bool,
}

/// Crack length a0 + extension, where the extension runs along the SYMMETRY
/// line to the farthest point with φ ≥ 0.5 (linear interpolation between
/// nodes).
pub fn measure_crack_length(mesh: &Mesh, phi: &[f64], a0: f64) -> Result<CrackLength> {
    let mut line: Vec<(f64, f64)> = mesh
        .require_set(mesh::SYMMETRY)?
        .iter()
        .map(|&n| (mesh.nodes[n][0], phi[n]))
        .filter(|&(x, _)| x >= a0 - 1e-9)
        .collect();
    line.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(crack_front(&line, a0))
}

/// Crack front along sorted (x, φ) samples starting at the notch tip a0.
pub fn crack_front(line: &[(f64, f64)], a0: f64) -> CrackLength {
    let Some(last) = line.iter().rposition(|&(_, p)| p >= 0.5) else {
        return CrackLength {
            a: a0,
            contiguous: true,
        };
    };
    let contiguous = line[..last].iter().all(|&(_, p)| p >= 0.5);
    let (x0, p0) = line[last];
    let a = match line.get(last + 1) {
        Some(&(x1, p1)) if p0 > p1 => x0 + (p0 - 0.5) / (p0 - p1) * (x1 - x0),
        _ => x0,
    };
    CrackLength {
        a: a.max(a0),
        contiguous,
    }
}

/// Linear interpolation of a nodal field along the SYMMETRY line at x.
pub fn value_on_symmetry(mesh: &Mesh, field: &[f64], x: f64) -> f64 {
    let mut line: Vec<(f64, f64)> = mesh
        .node_set(mesh::SYMMETRY)
        .iter()
        .map(|&n| (mesh.nodes[n][0], field[n]))
        .collect();
    if line.is_empty() {
        return 0.0;
    }
    line.sort_by(|p, q| p.0.total_cmp(&q.0));
    interpolate(&line, x)
}

fn interpolate(line: &[(f64, f64)], x: f64) -> f64 {
    match line.iter().position(|&(xi, _)| xi >= x) {
        None => line[line.len() - 1].1,
        Some(0) => line[0].1,
        Some(i) => {
            let (x0, v0) = line[i - 1];
            let (x1, v1) = line[i];
            v0 + (v1 - v0) * (x - x0) / (x1 - x0)
        }
    }
}

/// Identity and conditions of one experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunInfo {
    pub run_id: String,
    pub p_h2: f64,
    pub r: f64,
    pub f: f64,
    pub w: f64,
    pub b: f64,
    pub coefficient_set: CoefficientSet,
}

/// One row of a crack-growth record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow {
    pub n: f64,
    pub t: f64,
    pub a: f64,
    /// ΔK [MPa·√m].
    pub delta_k: f64,
    /// da/dN [mm/cycle].
    pub dadn: Option<f64>,
    /// Concentration at the crack tip [wppm].
    pub c_tip: f64,
    /// Load range ΔP [N] in effect.
    pub load_range: f64,
}

/// Time series of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackGrowthRecord {
    pub info: RunInfo,
    pub rows: Vec<RecordRow>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
    pub warnings: Vec<String>,
}

impl CrackGrowthRecord {
    pub fn new(info: RunInfo) -> Self {
        CrackGrowthRecord {
            info,
            rows: Vec::new(),
            aborted: None,
            warnings: Vec::new(),
        }
    }

    /// (ΔK, da/dN) pairs of rows that carry a rate.
    pub fn rate_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.dadn.map(|d| (r.delta_k, d)))
            .collect()
    }

    pub fn final_length(&self) -> Option<f64> {
        self.rows.last().map(|r| r.a)
    }
}

/// Secant da/dN between consecutive logged crack lengths. The first row is
/// kept without a rate; every later growing interval yields one row at its
/// midpoint, with ΔK evaluated at the mid-interval crack length.
pub fn extract_dadn(record: &CrackGrowthRecord) -> CrackGrowthRecord {
    let mut out = CrackGrowthRecord {
        rows: Vec::new(),
        ..record.clone()
    };
    let Some(first) = record.rows.first() else {
        return out;
    };
    out.rows.push(RecordRow { dadn: None, ..*first });
    let info = &record.info;
    for pair in record.rows.windows(2) {
        let (p, q) = (pair[0], pair[1]);
        let (da, dn) = (q.a - p.a, q.n - p.n);
        if !(da > 0.0 && dn > 0.0) {
            continue;
        }
        let a_mid = 0.5 * (p.a + q.a);
        let dp = 0.5 * (p.load_range + q.load_range);
        let delta_k = if dp > 0.0 {
            compute_delta_k(dp, a_mid, info.w, info.b, info.coefficient_set)
                .map(|k| k.value)
                .unwrap_or(0.5 * (p.delta_k + q.delta_k))
        } else {
            0.5 * (p.delta_k + q.delta_k)
        };
        out.rows.push(RecordRow {
            n: 0.5 * (p.n + q.n),
            t: 0.5 * (p.t + q.t),
            a: a_mid,
            delta_k,
            dadn: Some(da / dn),
            c_tip: 0.5 * (p.c_tip + q.c_tip),
            load_range: dp,
        });
    }
    out
}

/// Paris law da/dN = C·ΔK^m fitted on log10 axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParisFit {
    pub c: f64,
    pub m: f64,
    pub points: usize,
    pub r_squared: f64,
}

/// Least-squares Paris fit over points with ΔK inside `window` (inclusive).
pub fn fit_paris(points: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<ParisFit> {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(k, d)| k > 0.0 && d > 0.0 && k >= lo && k <= hi)
        .map(|&(k, d)| (k.log10(), d.log10()))
        .collect();
    let n = xy.len();
    if n < 2 {
        return Err(Error::domain(format!(
            "Paris fit needs at least 2 points in the window, found {n}"
        )));
    }
    let nf = n as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::domain("Paris fit needs at least two distinct ΔK values"));
    }
    let m = sxy / sxx;
    let c = 10f64.powf(my - m * mx);
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(ParisFit {
        c,
        m,
        points: n,
        r_squared,
    })
}

/// Mean da/dN over the rate rows whose ΔK lies within `rel` of `delta_k`.
pub fn rate_near(record: &CrackGrowthRecord, delta_k: f64, rel: f64) -> Option<f64> {
    let rates: Vec<f64> = record
        .rate_points()
        .into_iter()
        .filter(|&(k, _)| (k - delta_k).abs() <= rel * delta_k)
        .map(|(_, d)| d)
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Plateau summary of a record: the median da/dN over the rate rows at
/// crack lengths of at least `a_min`, and their spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub median_dadn: f64,
    pub min_dadn: f64,
    pub max_dadn: f64,
    pub mean_delta_k: f64,
    pub points: usize,
}

pub fn plateau(record: &CrackGrowthRecord, a_min: f64) -> Option<Plateau> {
    let pts: Vec<(f64, f64)> = record
        .rows
        .iter()
        .filter(|r| r.a >= a_min)
        .filter_map(|r| r.dadn.map(|d| (r.delta_k, d)))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let mut rates: Vec<f64> = pts.iter().map(|p| p.1).collect();
    rates.sort_by(f64::total_cmp);
    let k = rates.len();
    let median = if k % 2 == 1 {
        rates[k / 2]
    } else {
        0.5 * (rates[k / 2 - 1] + rates[k / 2])
    };
    Some(Plateau {
        median_dadn: median,
        min_dadn: rates[0],
        max_dadn: rates[k - 1],
        mean_delta_k: pts.iter().map(|p| p.0).sum::<f64>() / k as f64,
        points: k,
    })
}

/// Outcome of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Logged trajectory with secant da/dN rows.
    pub record: CrackGrowthRecord,
    /// Logged crack lengths before secant processing.
    pub raw: CrackGrowthRecord,
    pub monitor: InvariantMonitor,
    pub counters: Counters,
    pub cycles: u64,
    pub elements: usize,
}

fn row_for(sim: &Simulation, p_max: f64) -> RecordRow {
    let crack = sim.crack();
    RecordRow {
        n: sim.state.n as f64,
        t: sim.state.t,
        a: crack.a,
        delta_k: sim.delta_k(p_max).unwrap_or(0.0),
        dadn: None,
        c_tip: sim.c_tip(),
        load_range: p_max * (1.0 - sim.program.r),
    }
}

/// Runs one experiment. With `output_dir`, VTK snapshots and checkpoints are
/// written at the configured cadence and a state dump on abort.
///
/// Configuration errors are returned as `Err`; a run that fails mid-way is
/// returned with `record.aborted` set and its partial record.
pub fn run_experiment(config: &ExperimentConfig, output_dir: Option<&Path>) -> Result<ExperimentResult> {
    let parts = config.parts()?;
    let info = RunInfo {
        run_id: config.output.run_id.clone(),
        p_h2: parts.program.p_h2,
        r: parts.program.r,
        f: parts.program.f,
        w: parts.geometry.w,
        b: parts.geometry.b,
        coefficient_set: parts.options.coefficient_set,
    };
    let mut sim = Simulation::ct(
        parts.geometry,
        parts.material,
        parts.fatigue,
        parts.hydrogen,
        parts.program.clone(),
        parts.options,
    )?;
    let paths = output_dir.map(|d| RunPaths::new(d, &config.output.run_id));
    let mut raw = CrackGrowthRecord::new(info);
    let outcome = drive(&mut sim, config, &mut raw, paths.as_ref());
    if let Err(e) = outcome {
        if !e.is_solver_failure() {
            return Err(e);
        }
        log::error!("run {} aborted: {e}", raw.info.run_id);
        raw.aborted = Some(e.to_string());
        if let Some(p) = &paths {
            if let Err(dump) = checkpoint::save(&p.checkpoint, &sim.state) {
                raw.warnings.push(format!("state dump failed: {dump}"));
            }
        }
    }
    if sim.monitor.violations > 0 {
        raw.warnings.push(format!(
            "{} invariant violations; first: {}",
            sim.monitor.violations,
            sim.monitor.first_violation.clone().unwrap_or_default()
        ));
    }
    Ok(ExperimentResult {
        record: extract_dadn(&raw),
        raw,
        monitor: sim.monitor.clone(),
        counters: sim.counters,
        cycles: sim.state.n,
        elements: sim.mesh.n_elements(),
    })
}

fn drive(
    sim: &mut Simulation,
    config: &ExperimentConfig,
    raw: &mut CrackGrowthRecord,
    paths: Option<&RunPaths>,
) -> Result<()> {
    sim.initialize()?;
    let out = &config.output;
    let mut p_max = sim.cycle_peak_load()?;
    raw.rows.push(row_for(sim, p_max));
    let mut last_logged = sim.crack().a;
    let mut warned_gap = false;
    let max_cycles = sim.program.max_cycles;
    while sim.state.n < max_cycles {
        p_max = sim.cycle_peak_load()?;
        let n_before = sim.state.n;
        match sim.run_cycle() {
            Ok(()) => {}
            Err(Error::Separation(m)) => {
                raw.warnings
                    .push(format!("specimen separated after cycle {n_before}: {m}"));
                break;
            }
            Err(e) => return Err(e),
        }
        let crack = sim.crack();
        if !crack.contiguous && !warned_gap {
            warned_gap = true;
            raw.warnings
                .push(format!("non-contiguous crack region at cycle {}", sim.state.n));
        }
        if crack.a - last_logged >= sim.options.log_delta_a {
            last_logged = crack.a;
            raw.rows.push(row_for(sim, p_max));
        }
        if let Some(p) = paths {
            let crossed = |every: u64| every > 0 && sim.state.n / every > n_before / every;
            if crossed(out.snapshot_every) {
                output::save_vtk(&p.snapshot(sim.state.n), &sim.mesh, &sim.state)?;
            }
            if crossed(out.checkpoint_every) {
                checkpoint::save(&p.checkpoint, &sim.state)?;
            }
        }
        if let Some(reason) = sim.stop_reason() {
            log::info!("run {} stopped: {reason}", raw.info.run_id);
            break;
        }
    }
    let last = raw.rows.last().map(|r| r.n).unwrap_or(0.0);
    if (sim.state.n as f64) > last && sim.crack().a > last_logged {
        raw.rows.push(row_for(sim, p_max));
    }
    let range = raw.rows.iter().filter(|r| r.delta_k > 0.0);
    if let Some(g) = sim.geometry {
        if range.clone().any(|r| !(0.2..=0.8).contains(&(r.a / g.w))) {
            raw.warnings
                .push("a/W outside the validity range [0.2, 0.8] of the delta K polynomial".into());
        }
    }
    Ok(())
}

/// Runs independent experiments in parallel. Results keep the input order.
pub fn run_sweep(configs: &[ExperimentConfig], output_dir: Option<&Path>) -> Vec<Result<ExperimentResult>> {
    configs.par_iter().map(|c| run_experiment(c, output_dir)).collect()
}

/// Swept parameter of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Pressure,
    LoadRatio,
    Frequency,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Pressure => "p_H2",
            SweepAxis::LoadRatio => "R",
            SweepAxis::Frequency => "f",
        }
    }

    fn apply(self, c: &mut ExperimentConfig, v: f64) {
        match self {
            SweepAxis::Pressure => c.load.p_h2 = v,
            SweepAxis::LoadRatio => c.load.r = v,
            SweepAxis::Frequency => c.load.f = v,
        }
    }
}

/// Parses an axis such as `f=0.001,0.1,1,100`.
pub fn parse_axis(spec: &str) -> Result<(SweepAxis, Vec<f64>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(format!("sweep axis {spec:?} must look like key=v1,v2,...")))?;
    let axis = match key.trim() {
        "p_H2" => SweepAxis::Pressure,
        "R" => SweepAxis::LoadRatio,
        "f" => SweepAxis::Frequency,
        other => {
            return Err(Error::config(format!(
                "unknown sweep axis {other:?}; expected p_H2, R or f"
            )))
        }
    };
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("sweep value {v:?} for {key} is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::config(format!("sweep axis {key} has no values")));
    }
    Ok((axis, values))
}

/// Cartesian product of the axes applied to `base`; run ids get one
/// `_key<value>` suffix per axis.
pub fn expand_sweep(base: &ExperimentConfig, axes: &[(SweepAxis, Vec<f64>)]) -> Result<Vec<ExperimentConfig>> {
    let mut out = vec![base.clone()];
    for (axis, values) in axes {
        out = out
            .iter()
            .flat_map(|c| {
                values.iter().map(move |&v| {
                    let mut c = c.clone();
                    axis.apply(&mut c, v);
                    c.output.run_id = format!("{}_{}{}", c.output.run_id, axis.key(), v);
                    c
                })
            })
            .collect();
    }
    for c in &out {
        c.parts()?;
    }
    Ok(out)
}
