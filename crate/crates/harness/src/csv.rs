//! Minimal CSV output: fixed header, comma separated, floats rounded to nine
//! significant digits.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use h2ad_core::{Error, Result};

/// Version stamped into every per-trial row.
pub const SCHEMA_VERSION: u32 = 1;

/// Nine significant digits, shortest round-trip text of the rounded value.
/// Very small or large magnitudes use exponent notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if (1e-6..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub enum Cell<'a> {
    F(f64),
    U(u64),
    I(i64),
    S(&'a str),
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell<'_> {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}
impl From<u64> for Cell<'_> {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}
impl From<u32> for Cell<'_> {
    fn from(v: u32) -> Self {
        Cell::U(v as u64)
    }
}
impl From<i64> for Cell<'_> {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::S(v)
    }
}

pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
    path: PathBuf,
    line: String,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
            path: path.to_path_buf(),
            line: String::new(),
        })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        if cells.len() != self.columns {
            return Err(Error::Input(format!(
                "{}: row has {} cells, header has {}",
                self.path.display(),
                cells.len(),
                self.columns
            )));
        }
        self.line.clear();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.line.push(',');
            }
            match c {
                Cell::F(v) => self.line.push_str(&fmt_f64(*v)),
                Cell::U(v) => write!(self.line, "{v}").unwrap(),
                Cell::I(v) => write!(self.line, "{v}").unwrap(),
                Cell::S(s) => {
                    debug_assert!(!s.contains([',', '\n', '"']));
                    self.line.push_str(s)
                }
            }
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

pub const TRIAL_HEADER: [&str; 7] = ["schema_version", "experiment", "snr_db", "trial", "estimator", "metric", "value"];

/// One per-trial result row under [`TRIAL_HEADER`].
pub fn trial_row(
    w: &mut CsvWriter,
    experiment: &str,
    snr_db: f64,
    trial: usize,
    estimator: &str,
    metric: &str,
    value: Cell,
) -> Result<()> {
    w.row(&[
        Cell::U(SCHEMA_VERSION as u64),
        Cell::S(experiment),
        Cell::F(snr_db),
        Cell::from(trial),
        Cell::S(estimator),
        Cell::S(metric),
        value,
    ])
}

/// Reads a CSV written by [`CsvWriter`] into a header and string rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok((header, rows))
}
