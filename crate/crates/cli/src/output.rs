//! File writers. Output bytes depend only on the data passed in.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fockforge::phasespace::WignerGrid;
use serde::Serialize;

use crate::CliError;

/// Nine significant digits in scientific notation.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(to_json_string(value)?.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// `q,p,w` rows, `q` outer and `p` inner.
pub fn write_wigner_csv(path: &Path, grid: &WignerGrid) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    w.write_record(["q", "p", "w"])?;
    for i in 0..grid.q_grid.len() {
        let q = sig9(grid.q_grid.point(i));
        for j in 0..grid.p_grid.len() {
            w.write_record([
                q.as_str(),
                &sig9(grid.p_grid.point(j)),
                &sig9(grid.value(i, j)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `out.csv` → `out.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}
