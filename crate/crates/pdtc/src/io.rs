//! File output with atomic replace semantics, plus readers for the formats we write.

use std::fs;
use std::io::Write;
use std::path::Path;

use pdtc_core::observables::{ObservableSeries, Parity, Record};
use pdtc_core::spinsim::{decode_checkpoint, encode_checkpoint, SpinState};
use serde::Serialize;

use crate::error::AppError;

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> Result<Vec<u8>, AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| AppError::Usage(format!("csv encoding failed: {e}"));
    w.write_record(header.iter().map(|h| h.as_ref())).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| AppError::Usage(format!("csv encoding failed: {e}")))
}

pub fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<(), AppError> {
    atomic_write(path, &csv_bytes(header, rows)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value).expect("summaries always serialize");
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn write_series(path: &Path, series: &ObservableSeries) -> Result<(), AppError> {
    write_csv(path, &series.csv_header(), &series.csv_rows())
}

/// Reads a series CSV in the layout of [`ObservableSeries::csv_rows`].
pub fn read_series(path: &Path) -> Result<ObservableSeries, AppError> {
    let bad = |reason: String| AppError::Input {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let expected = ["period", "parity", "t", "t_j0", "M", "M_sem", "eps", "eps_sem"];
    if header.len() < expected.len() || expected.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(bad(format!("expected columns starting with {}", expected.join(","))));
    }
    let n_sites = header.len() - expected.len();
    let mut records = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64, AppError> {
            row[k]
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: column {} is not a number", line + 1, header[k].to_string())))
        };
        let period = row[0]
            .parse::<usize>()
            .map_err(|_| bad(format!("row {}: bad period", line + 1)))?;
        let parity = match &row[1] {
            "even" => Parity::Even,
            "odd" => Parity::Odd,
            other => return Err(bad(format!("row {}: parity `{other}`", line + 1))),
        };
        let energy_density = if row[6].is_empty() { None } else { Some(num(6)?) };
        let site_x = (0..n_sites).map(|i| num(8 + i)).collect::<Result<Vec<_>, _>>()?;
        records.push(Record {
            period,
            parity,
            time: num(2)?,
            time_j0: num(3)?,
            site_x_sem: vec![0.0; n_sites],
            site_x,
            magnetization: num(4)?,
            magnetization_sem: num(5)?,
            energy_density,
            energy_density_sem: num(7)?,
        });
    }
    let series = ObservableSeries {
        records,
        trajectories: 1,
    };
    series.validate()?;
    Ok(series)
}

pub fn save_checkpoint(path: &Path, state: &SpinState) -> Result<(), AppError> {
    atomic_write(path, &encode_checkpoint(state))
}

pub fn load_checkpoint(path: &Path) -> Result<SpinState, AppError> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(decode_checkpoint(&bytes)?)
}
