//! Series and model ingestion, CSV emission.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use circmtd::{AngleSeries, MtdArModel};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Unit {
    Rad,
    Deg,
}

/// Formats with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn open(path: &Path) -> CliResult<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(s)
}

pub fn read_model(path: &Path) -> CliResult<MtdArModel> {
    MtdArModel::from_json(&open(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// One angle per record, first field only. A first record that does not
/// parse as a number is taken as a header.
pub fn read_series(path: &Path, unit: Unit) -> CliResult<AngleSeries> {
    let text = open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::Usage(format!(
                    "{}: record {} is not a number: `{field}`",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    let series = match unit {
        Unit::Rad => AngleSeries::from_radians(values),
        Unit::Deg => AngleSeries::from_degrees(values),
    };
    Ok(series?)
}

/// Output destination: a file, or standard output when absent.
pub fn sink(out: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn write_csv(out: Option<&PathBuf>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(out: Option<&PathBuf>, value: &T) -> CliResult<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
