//! CSV files: ground truth, measurements, estimates and per-step series.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly. One header line, LF line endings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flowtrack_core::sim::{MeasurementFrame, TruthRow};
use flowtrack_core::tracker::{Estimate, Label};
use flowtrack_core::STATE_DIM;
use nalgebra::DVector;

use crate::error::{Error, Result};

pub const TRUTH_HEADER: &[&str] = &["k", "object_id", "x", "y", "z", "vx", "vy", "vz"];
pub const ESTIMATE_HEADER: &[&str] = &[
    "k",
    "label_k",
    "label_m",
    "x",
    "y",
    "z",
    "vx",
    "vy",
    "vz",
    "existence",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

/// Rows of a CSV file with the expected header, each with its line number.
struct Table {
    path: PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, header: Option<&[&str]>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(file);
        let found = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        // A zero-byte file reads as a table without rows.
        if found.is_empty() && reader.is_done() {
            return Ok(Self {
                path: path.to_owned(),
                rows: Vec::new(),
            });
        }
        if let Some(h) = header {
            if found.iter().ne(h.iter().copied()) {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: 1,
                    message: format!("expected header {}", h.join(",")),
                });
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| csv_err(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Self {
            path: path.to_owned(),
            rows,
        })
    }

    fn parse<T: std::str::FromStr>(
        &self,
        line: u64,
        record: &csv::StringRecord,
        i: usize,
    ) -> Result<T> {
        let field = record.get(i).unwrap_or("");
        field.trim().parse().map_err(|_| Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("cannot parse field {} ({field:?})", i + 1),
        })
    }
}

pub fn write_truth(path: &Path, rows: &[TruthRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRUTH_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let mut rec = vec![r.k.to_string(), r.object_id.to_string()];
        rec.extend(r.state.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let t = Table::read(path, Some(TRUTH_HEADER))?;
    t.rows
        .iter()
        .map(|(line, rec)| {
            let mut state = [0.0; STATE_DIM];
            for (i, s) in state.iter_mut().enumerate() {
                *s = t.parse(*line, rec, 2 + i)?;
            }
            Ok(TruthRow {
                k: t.parse(*line, rec, 0)?,
                object_id: t.parse(*line, rec, 1)?,
                state,
            })
        })
        .collect()
}

pub fn measurement_header(dim: usize) -> Vec<String> {
    let mut h = vec!["k".to_owned(), "meas_index".to_owned()];
    h.extend((1..=dim).map(|l| format!("z_{l}")));
    h
}

/// Writes one row per measurement; `meas_index` is the 0-based position in
/// the frame.
pub fn write_measurements(path: &Path, frames: &[MeasurementFrame], dim: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(measurement_header(dim))
        .map_err(|e| csv_err(path, e))?;
    for f in frames {
        for (m, z) in f.measurements.iter().enumerate() {
            if z.len() != dim {
                return Err(Error::Input(format!(
                    "measurement at k={} has {} components, expected {dim}",
                    f.k,
                    z.len()
                )));
            }
            let mut rec = vec![f.k.to_string(), m.to_string()];
            rec.extend(z.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

/// Reads measurement rows into frames `1..=n_steps` (at least up to the
/// largest `k` in the file). Rows of a frame must appear in `meas_index`
/// order.
pub fn read_measurements(path: &Path, dim: usize, n_steps: u32) -> Result<Vec<MeasurementFrame>> {
    let header = measurement_header(dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let t = Table::read(path, Some(&header))?;
    let mut frames: Vec<MeasurementFrame> = (1..=n_steps)
        .map(|k| MeasurementFrame::new(k, Vec::new()))
        .collect();
    for (line, rec) in &t.rows {
        let k: u32 = t.parse(*line, rec, 0)?;
        let m: usize = t.parse(*line, rec, 1)?;
        if k == 0 {
            return Err(Error::Parse {
                path: t.path.clone(),
                line: *line,
                message: "k must be at least 1".into(),
            });
        }
        while frames.len() < k as usize {
            let next = frames.len() as u32 + 1;
            frames.push(MeasurementFrame::new(next, Vec::new()));
        }
        let frame = &mut frames[k as usize - 1];
        if m != frame.measurements.len() {
            return Err(Error::Parse {
                path: t.path.clone(),
                line: *line,
                message: format!(
                    "meas_index {m} out of order (expected {})",
                    frame.measurements.len()
                ),
            });
        }
        let z = (0..dim)
            .map(|l| t.parse(*line, rec, 2 + l))
            .collect::<Result<Vec<f64>>>()?;
        frame.measurements.push(DVector::from_vec(z));
    }
    Ok(frames)
}

pub fn write_estimates(path: &Path, rows: &[(u32, Estimate)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ESTIMATE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for (k, e) in rows {
        let mut rec = vec![
            k.to_string(),
            e.label.birth_step.to_string(),
            e.label.measurement.to_string(),
        ];
        rec.extend(e.state.iter().map(|v| fmt_f64(*v)));
        rec.push(fmt_f64(e.existence));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_estimates(path: &Path) -> Result<Vec<(u32, Estimate)>> {
    let t = Table::read(path, Some(ESTIMATE_HEADER))?;
    t.rows
        .iter()
        .map(|(line, rec)| {
            let k = t.parse(*line, rec, 0)?;
            let label = Label::new(t.parse(*line, rec, 1)?, t.parse(*line, rec, 2)?);
            let state = (0..STATE_DIM)
                .map(|i| t.parse(*line, rec, 3 + i))
                .collect::<Result<Vec<f64>>>()?;
            let existence = t.parse(*line, rec, 3 + STATE_DIM)?;
            Ok((
                k,
                Estimate {
                    label,
                    state: DVector::from_vec(state),
                    existence,
                },
            ))
        })
        .collect()
}

/// Writes `k,<name>` with `k = 1..`.
pub fn write_series(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", name]).map_err(|e| csv_err(path, e))?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(*v)])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_series(path: &Path, name: &str) -> Result<Vec<f64>> {
    let t = Table::read(path, Some(&["k", name]))?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, (line, rec))| {
            let k: usize = t.parse(*line, rec, 0)?;
            if k != i + 1 {
                return Err(Error::Parse {
                    path: t.path.clone(),
                    line: *line,
                    message: format!("expected k = {}", i + 1),
                });
            }
            t.parse(*line, rec, 1)
        })
        .collect()
}

/// Writes arbitrary text, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
