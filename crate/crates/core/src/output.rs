//! On-disk formats: crack-growth tables as CSV and field snapshots as
//! legacy ASCII VTK.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::driver::SimState;
use crate::error::{Error, Result};
use crate::experiment::{CoefficientSet, CrackGrowthRecord, RecordRow, RunInfo};
use crate::mesh::Mesh;

pub const RECORD_COLUMNS: [&str; 10] = [
    "run_id",
    "p_H2_MPa",
    "R",
    "f_Hz",
    "N",
    "t_s",
    "a_mm",
    "deltaK_MPa_sqrtm",
    "dadN_mm_per_cycle",
    "C_tip_wppm",
];

/// VTK cell type of the 8-node quadrilateral.
pub const VTK_QUADRATIC_QUAD: u8 = 23;

fn num(v: f64) -> String {
    // Shortest representation that parses back to the same bits.
    format!("{v}")
}

/// Writes records as one table. Comment lines before the header carry the
/// ΔK coefficient set and the status of each run.
pub fn write_records<W: Write>(mut out: W, records: &[CrackGrowthRecord]) -> Result<()> {
    let set = records.first().map(|r| r.info.coefficient_set).unwrap_or_default();
    writeln!(out, "# coefficient_set={}", set.name())?;
    for r in records {
        let status = match &r.aborted {
            Some(reason) => format!("aborted: {}", reason.replace(['\n', '\r'], " ")),
            None => "ok".to_string(),
        };
        writeln!(out, "# run {} {status}", r.info.run_id)?;
        for w in &r.warnings {
            writeln!(out, "# warning {}: {}", r.info.run_id, w.replace(['\n', '\r'], " "))?;
        }
    }
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(RECORD_COLUMNS)?;
    for r in records {
        let i = &r.info;
        for row in &r.rows {
            csv.write_record([
                i.run_id.clone(),
                num(i.p_h2),
                num(i.r),
                num(i.f),
                num(row.n),
                num(row.t),
                num(row.a),
                num(row.delta_k),
                row.dadn.map(num).unwrap_or_default(),
                num(row.c_tip),
            ])?;
        }
    }
    csv.flush()?;
    Ok(())
}

pub fn save_records(path: &Path, records: &[CrackGrowthRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records(std::io::BufWriter::new(file), records)
}

fn parse_field(value: &str, column: &str, line: usize) -> Result<f64> {
    value.trim().parse().map_err(|_| {
        Error::config(format!(
            "line {line}: column {column} holds {value:?}, expected a number"
        ))
    })
}

/// Reads a table written by [`write_records`] (or any CSV with the same
/// columns). Geometry is not stored, so `load_range` is zero and ΔK is taken
/// as written.
pub fn read_records<R: Read>(input: R) -> Result<Vec<CrackGrowthRecord>> {
    let mut set = CoefficientSet::default();
    let mut status: BTreeMap<String, Option<String>> = BTreeMap::new();
    let mut body = String::new();
    let mut comments = 0;
    for line in BufReader::new(input).lines() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            comments += 1;
            let c = c.trim();
            if let Some(name) = c.strip_prefix("coefficient_set=") {
                set = match name.trim() {
                    "astm" => CoefficientSet::Astm,
                    "paper_as_written" => CoefficientSet::PaperAsWritten,
                    other => return Err(Error::config(format!("unknown coefficient set {other:?}"))),
                };
            } else if let Some(rest) = c.strip_prefix("run ") {
                let (id, st) = rest.split_once(' ').unwrap_or((rest, "ok"));
                let reason = st.strip_prefix("aborted: ").map(str::to_string);
                status.insert(id.to_string(), reason);
            }
            continue;
        }
        body.push_str(&line);
        body.push('\n');
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::config(format!("record table lacks column {name}")))
    };
    let idx: Vec<usize> = RECORD_COLUMNS.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut records: Vec<CrackGrowthRecord> = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row?;
        let line = comments + k + 2;
        let get = |i: usize| row.get(idx[i]).unwrap_or("");
        let f = |i: usize| parse_field(get(i), RECORD_COLUMNS[i], line);
        let run_id = get(0).trim().to_string();
        let dadn = match get(8).trim() {
            "" => None,
            v => Some(parse_field(v, RECORD_COLUMNS[8], line)?),
        };
        let rec_row = RecordRow {
            n: f(4)?,
            t: f(5)?,
            a: f(6)?,
            delta_k: f(7)?,
            dadn,
            c_tip: f(9)?,
            load_range: 0.0,
        };
        match records.iter_mut().find(|r| r.info.run_id == run_id) {
            Some(r) => r.rows.push(rec_row),
            None => {
                let info = RunInfo {
                    run_id: run_id.clone(),
                    p_h2: f(1)?,
                    r: f(2)?,
                    f: f(3)?,
                    w: 0.0,
                    b: 0.0,
                    coefficient_set: set,
                };
                let mut rec = CrackGrowthRecord::new(info);
                rec.aborted = status.get(&run_id).cloned().flatten();
                rec.rows.push(rec_row);
                records.push(rec);
            }
        }
    }
    Ok(records)
}

pub fn load_records(path: &Path) -> Result<Vec<CrackGrowthRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    read_records(file)
}

fn write_grid<W: Write>(out: &mut W, mesh: &Mesh, title: &str) -> Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.replace(['\n', '\r'], " "))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_nodes())?;
    for [x, y] in &mesh.nodes {
        writeln!(out, "{x} {y} 0")?;
    }
    let ne = mesh.n_elements();
    writeln!(out, "CELLS {ne} {}", ne * 9)?;
    for e in &mesh.elements {
        let ids: Vec<String> = e.iter().map(|n| n.to_string()).collect();
        writeln!(out, "8 {}", ids.join(" "))?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "{VTK_QUADRATIC_QUAD}")?;
    }
    Ok(())
}

fn write_scalars<W: Write>(out: &mut W, name: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Element means of a per-quadrature-point field.
fn cell_means(field: &[f64], ne: usize) -> impl Iterator<Item = f64> + '_ {
    let q = field.len().checked_div(ne).unwrap_or(1).max(1);
    field.chunks(q).map(|c| c.iter().sum::<f64>() / c.len() as f64)
}

/// Snapshot of displacement, phase field and concentration at the nodes, and
/// element means of the history variables.
pub fn write_vtk<W: Write>(mut out: W, mesh: &Mesh, state: &SimState) -> Result<()> {
    write_grid(
        &mut out,
        mesh,
        &format!("h2fatigue snapshot N={} t={}", state.n, state.t),
    )?;
    let nn = mesh.n_nodes();
    writeln!(out, "POINT_DATA {nn}")?;
    writeln!(out, "VECTORS u double")?;
    for i in 0..nn {
        writeln!(out, "{} {} 0", state.mech.u[2 * i], state.mech.u[2 * i + 1])?;
    }
    write_scalars(&mut out, "phi", state.phi.iter().copied())?;
    write_scalars(&mut out, "C", state.hydrogen.c.iter().copied())?;
    let ne = mesh.n_elements();
    writeln!(out, "CELL_DATA {ne}")?;
    write_scalars(&mut out, "alpha_bar", cell_means(&state.fatigue.alpha_bar, ne))?;
    write_scalars(&mut out, "psi0", cell_means(&state.mech.psi0, ne))?;
    write_scalars(&mut out, "sigma_h", cell_means(&state.mech.sigma_h, ne))?;
    write_scalars(&mut out, "H_irr", cell_means(&state.irreversibility.h, ne))?;
    out.flush()?;
    Ok(())
}

/// Mesh alone, with element size and band membership.
pub fn write_mesh_vtk<W: Write>(mut out: W, mesh: &Mesh) -> Result<()> {
    write_grid(&mut out, mesh, "h2fatigue mesh")?;
    let ne = mesh.n_elements();
    writeln!(out, "CELL_DATA {ne}")?;
    write_scalars(&mut out, "h", mesh.elem_size.iter().copied())?;
    write_scalars(&mut out, "band", mesh.band.iter().map(|&b| if b { 1.0 } else { 0.0 }))?;
    out.flush()?;
    Ok(())
}

pub fn save_vtk(path: &Path, mesh: &Mesh, state: &SimState) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_vtk(std::io::BufWriter::new(file), mesh, state)
}

/// File names used for a run inside an output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPaths {
    pub record: PathBuf,
    pub config_echo: PathBuf,
    pub checkpoint: PathBuf,
    dir: PathBuf,
    run_id: String,
}

impl RunPaths {
    pub fn new(dir: &Path, run_id: &str) -> Self {
        RunPaths {
            record: dir.join(format!("{run_id}.csv")),
            config_echo: dir.join(format!("{run_id}.resolved.toml")),
            checkpoint: dir.join(format!("{run_id}.ckpt")),
            dir: dir.to_path_buf(),
            run_id: run_id.to_string(),
        }
    }

    pub fn snapshot(&self, n: u64) -> PathBuf {
        self.dir.join(format!("{}_N{n:09}.vtk", self.run_id))
    }
}
