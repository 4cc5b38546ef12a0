//! Series, snapshot and phase-diagram files.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::grid::Grid;
use crate::stepper::{RunResult, SimState};

use super::sweep::PhaseDiagram;

pub const SERIES_FILE: &str = "series.csv";
pub const PHASE_FILE: &str = "phase.csv";

/// `snapshot_t<t>.csv` with `t` in shortest round-trip form.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

/// Cell centres and values, 17 significant digits so a reload is bit-exact.
pub fn write_snapshot<W: Write>(mut w: W, g: &Grid, state: &SimState) -> io::Result<()> {
    if g.dim() == 2 {
        writeln!(w, "x,y,u,v")?;
    } else {
        writeln!(w, "x,u,v")?;
    }
    for i in 0..g.len() {
        let c = g.center(i);
        if g.dim() == 2 {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", c[0], c[1], state.u[i], state.v[i])?;
        } else {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", c[0], state.u[i], state.v[i])?;
        }
    }
    Ok(())
}

/// Reads `(u, v)` back from a snapshot file's contents.
pub fn read_snapshot(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty snapshot")?;
    let cols = header.split(',').count();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.parse::<f64>().map_err(|_| format!("row {}: bad number `{f}`", i + 2)))
            .collect::<Result<_, _>>()?;
        if fields.len() != cols {
            return Err(format!("row {}: expected {cols} fields", i + 2));
        }
        u.push(fields[cols - 2]);
        v.push(fields[cols - 1]);
    }
    Ok((u, v))
}

/// Writes `series.csv` and one file per snapshot; returns the paths written.
pub fn write_run(dir: &Path, g: &Grid, result: &RunResult) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join(SERIES_FILE);
    let mut w = BufWriter::new(File::create(&path)?);
    result.series.write_csv(&mut w)?;
    w.flush()?;
    written.push(path);
    for snap in &result.snapshots {
        let path = dir.join(snapshot_file_name(snap.t));
        let mut w = BufWriter::new(File::create(&path)?);
        write_snapshot(&mut w, g, snap)?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_phase(dir: &Path, diagram: &PhaseDiagram) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(PHASE_FILE);
    let mut w = BufWriter::new(File::create(&path)?);
    diagram.write_csv(&mut w)?;
    w.flush()?;
    Ok(path)
}
