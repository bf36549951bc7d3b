//! CSV import/export of encoder mappings and decoder tables, plus a small
//! record-file writer for summaries and sweeps.
//!
//! Formats (UTF-8, comma-separated, one header line):
//! * mapping file — header `v,f`, one row per node, ascending v;
//! * decoder file — header `u,g0,g1`.
//!
//! Values are written with 17 significant digits so a write/read round trip
//! reproduces every f64 bit-exactly. Readers rebuild the canonical uniform
//! grid from the node column and reject files whose nodes stray from it by
//! more than 1e-9 of a spacing.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{make_grid, DecoderTable, EncoderMapping, SourceGrid};

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Writes the mapping in the `v,f` format.
///
/// # Errors
/// I/O failures only.
pub fn write_mapping(f: &EncoderMapping, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "v,f")?;
    for (&v, &fv) in f.grid.nodes.iter().zip(&f.values) {
        writeln!(w, "{v:.16e},{fv:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the decoder in the `u,g0,g1` format.
///
/// # Errors
/// I/O failures only.
pub fn write_decoder(g: &DecoderTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "u,g0,g1")?;
    for ((&u, &g0), &g1) in g.u_grid.nodes.iter().zip(&g.g0).zip(&g.g1) {
        writeln!(w, "{u:.16e},{g0:.16e},{g1:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header line followed by prebuilt record lines (summaries,
/// sweeps).
///
/// # Errors
/// I/O failures only.
pub fn write_records(path: &Path, header: &str, records: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for record in records {
        writeln!(w, "{record}")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a CSV with the given header into rows of exactly `K` floats,
/// reporting the offending line on failure.
fn parse_rows<const K: usize>(path: &Path, header: &str) -> Result<Vec<[f64; K]>> {
    let file = File::open(path)
        .map_err(|e| parse_error(path, 0, format!("cannot open file: {e}")))?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_error(path, line_no, format!("read failed: {e}")))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if !saw_header {
            if text != header {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected header \"{header}\", got \"{text}\""),
                ));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != K {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {K} fields, got {}", fields.len()),
            ));
        }
        let mut row = [0.0; K];
        for (slot, field) in row.iter_mut().zip(&fields) {
            *slot = field.trim().parse::<f64>().map_err(|e| {
                parse_error(path, line_no, format!("bad float \"{field}\": {e}"))
            })?;
        }
        rows.push(row);
    }
    if !saw_header {
        return Err(parse_error(path, 0, format!("missing header \"{header}\"")));
    }
    Ok(rows)
}

/// Rebuilds the canonical uniform grid for the node column of a parsed file.
/// `sigma` is external metadata (the file stores only positions); the last
/// node fixes the truncation halfwidth.
fn reconstruct_grid(path: &Path, nodes: &[f64], sigma: f64) -> Result<Arc<SourceGrid>> {
    let n = nodes.len();
    if n < 3 || n % 2 == 0 {
        return Err(parse_error(
            path,
            0,
            format!("need an odd number of rows >= 3, got {n}"),
        ));
    }
    for i in 1..n {
        if nodes[i] <= nodes[i - 1] {
            // Line numbers: header is line 1, row i is line i + 2.
            return Err(parse_error(
                path,
                i + 2,
                format!(
                    "nodes must be strictly ascending ({} after {})",
                    nodes[i],
                    nodes[i - 1]
                ),
            ));
        }
    }
    let halfwidth = nodes[n - 1] / sigma;
    let grid = make_grid(sigma, halfwidth, n)?;
    let tol = 1e-9 * grid.spacing();
    for (i, (&have, &want)) in nodes.iter().zip(&grid.nodes).enumerate() {
        if (have - want).abs() > tol {
            return Err(parse_error(
                path,
                i + 2,
                format!("node {have} is off the uniform grid (expected {want})"),
            ));
        }
    }
    Ok(Arc::new(grid))
}

/// Reads a mapping file written by [`write_mapping`] (or produced by any
/// tool honoring the format). `sigma_v` supplies the source std the grid was
/// built for.
///
/// # Errors
/// [`Error::Parse`] names the file and line for any format violation.
pub fn read_mapping(path: &Path, sigma_v: f64) -> Result<EncoderMapping> {
    let rows = parse_rows::<2>(path, "v,f")?;
    let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let grid = reconstruct_grid(path, &nodes, sigma_v)?;
    EncoderMapping::new(grid, values)
}

/// Reads a decoder file written by [`write_decoder`]. `sigma_u` supplies the
/// side-information std the grid was built for.
///
/// # Errors
/// [`Error::Parse`] names the file and line for any format violation.
pub fn read_decoder(path: &Path, sigma_u: f64) -> Result<DecoderTable> {
    let rows = parse_rows::<3>(path, "u,g0,g1")?;
    let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let g0: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let g1: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let grid = reconstruct_grid(path, &nodes, sigma_u)?;
    DecoderTable::new(grid, g0, g1)
}
