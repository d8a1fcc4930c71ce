//! CSV serialization of simulation traces.
//!
//! Values are written as decimal text with 17 significant digits so that
//! `f64` round-trips bit-exactly; the column set is a pure function of the
//! trace dimensions (n, m, p).

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use gdrem_control::trace::Trace;

use crate::{CliError, Result};

/// Write a trace to `path` with the exact header contract.
pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = Trace::csv_header(trace.n, trace.m, trace.p);
    writeln!(w, "{}", header.join(",")).map_err(|e| CliError::io(path, e))?;
    for sample in &trace.samples {
        let row: Vec<String> = trace
            .csv_row(sample)
            .iter()
            // 17 significant digits: f64 round-trips bit-exactly
            .map(|v| format!("{v:.16e}"))
            .collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Columns recovered from a trace CSV, sufficient for excitation analysis.
#[derive(Debug)]
pub struct CsvTrace {
    pub times: Vec<f64>,
    pub phi_bars: Vec<DVector<f64>>,
    pub omega: Vec<f64>,
    pub rank: Vec<usize>,
    /// Regressor dimension implied by the phibar columns.
    pub p: usize,
}

/// Read back the columns needed by `analyze` from a written trace CSV.
pub fn read_trace_csv(path: &Path) -> Result<CsvTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::TraceFormat(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|&c| c == name)
            .ok_or_else(|| CliError::TraceFormat(format!("missing column {name:?}")))
    };
    let phibar_cols: Vec<usize> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("phibar"))
        .map(|(i, _)| i)
        .collect();
    if phibar_cols.is_empty() {
        return Err(CliError::TraceFormat("missing phibar columns".into()));
    }
    let (t_col, omega_col, rank_col) = (col("t")?, col("omega")?, col("rank")?);

    let mut out = CsvTrace {
        times: Vec::new(),
        phi_bars: Vec::new(),
        omega: Vec::new(),
        rank: Vec::new(),
        p: phibar_cols.len(),
    };
    for (row_idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::TraceFormat(format!(
                "row {}: expected {} fields, got {}",
                row_idx + 2,
                columns.len(),
                fields.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|e| {
                CliError::TraceFormat(format!("row {}, column {}: {e}", row_idx + 2, columns[i]))
            })
        };
        out.times.push(parse(t_col)?);
        out.omega.push(parse(omega_col)?);
        out.rank.push(parse(rank_col)? as usize);
        out.phi_bars.push(DVector::from_iterator(
            phibar_cols.len(),
            phibar_cols
                .iter()
                .map(|&i| parse(i))
                .collect::<Result<Vec<f64>>>()?,
        ));
    }
    Ok(out)
}
