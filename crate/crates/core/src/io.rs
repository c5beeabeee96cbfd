//! CSV serialization of fields and trajectories.
//!
//! A field file has header `x,y,value` and one row per interior node in
//! storage order (x fastest). Numbers are written with 17 significant digits,
//! which reproduces every `f64` exactly on reload.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::{Grid2D, ScalarField};
use crate::state::{ControlTrajectory, StateTrajectory};

pub fn write_field<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "value"])?;
    for (k, (i, j)) in grid.interior_nodes().enumerate() {
        let (x, y) = grid.coords(i, j);
        w.write_record([
            format!("{x:.16e}"),
            format!("{y:.16e}"),
            format!("{:.16e}", field.values()[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field for `grid`, checking row count and node coordinates.
pub fn read_field<R: Read>(grid: &Grid2D, input: R, origin: &Path) -> Result<ScalarField> {
    let malformed = |reason: String| Error::MalformedField {
        path: origin.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "value"] {
        return Err(malformed(format!(
            "expected header x,y,value, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let tol = 1e-9 * grid.lx.max(grid.ly);
    let mut nodes = grid.interior_nodes();
    let mut values = Vec::with_capacity(grid.interior_len());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| malformed(format!("line {line}: missing column {k}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| malformed(format!("line {line}: {e}")))
        };
        let (x, y, v) = (num(0)?, num(1)?, num(2)?);
        let Some((i, j)) = nodes.next() else {
            return Err(malformed(format!("more than {} rows", grid.interior_len())));
        };
        let (ex, ey) = grid.coords(i, j);
        if (x - ex).abs() > tol || (y - ey).abs() > tol {
            return Err(malformed(format!(
                "line {line}: node ({x}, {y}) does not match expected ({ex}, {ey})"
            )));
        }
        values.push(v);
    }
    if values.len() != grid.interior_len() {
        return Err(malformed(format!(
            "{} rows, expected {}",
            values.len(),
            grid.interior_len()
        )));
    }
    ScalarField::from_values(grid, values).map_err(|e| malformed(e.to_string()))
}

pub fn save_field(field: &ScalarField, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(grid: &Grid2D, path: &Path) -> Result<ScalarField> {
    let file = File::open(path).map_err(|e| Error::MalformedField {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    read_field(grid, std::io::BufReader::new(file), path)
}

/// `{prefix}_{level:04}.csv` inside `dir`.
pub fn level_path(dir: &Path, prefix: &str, level: usize) -> PathBuf {
    dir.join(format!("{prefix}_{level:04}.csv"))
}

/// Levels `0, stride, 2 stride, ...` up to `last`.
pub fn saved_levels(last: usize, stride: usize) -> Vec<usize> {
    (0..=last).step_by(stride.max(1)).collect()
}

/// Writes `u_%04d.csv` and `p_%04d.csv` for every `stride`-th level and
/// returns the written paths.
pub fn write_trajectory(traj: &StateTrajectory, dir: &Path, stride: usize) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for n in saved_levels(traj.levels() - 1, stride) {
        for (prefix, field) in [("u", &traj.u[n]), ("p", &traj.p[n])] {
            let path = level_path(dir, prefix, n);
            save_field(field, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes every entry of `fields` as `{prefix}_%04d.csv`.
pub fn write_levels(fields: &[ScalarField], dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(fields.len());
    for (n, f) in fields.iter().enumerate() {
        let path = level_path(dir, prefix, n);
        save_field(f, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Reads `f_0000.csv .. f_{steps-1}.csv` from `dir`.
pub fn read_control_dir(grid: &Grid2D, dir: &Path, steps: usize) -> Result<ControlTrajectory> {
    let f = (0..steps)
        .map(|n| load_field(grid, &level_path(dir, "f", n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlTrajectory { f })
}
