//! Dataset CSV format: a header row `x_1,...,x_d[,y]`, one row per point,
//! labels as integers in `1..=K`. Readers reject NaN and infinite features.

use std::io::{Read, Write};
use std::path::Path;

use crate::types::{LabelSpace, LabeledDataset, Matrix, UnlabeledDataset};
use crate::{Error, Result};

pub fn write_labeled<W: Write>(writer: W, data: &LabeledDataset) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let d = data.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("x_{j}")).collect();
    header.push("y".to_owned());
    csv.write_record(&header)?;
    for (i, row) in data.features.iter_rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        record.push(data.labels[i].to_string());
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_unlabeled<W: Write>(writer: W, data: &UnlabeledDataset) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let d = data.dim();
    let header: Vec<String> = (1..=d).map(|j| format!("x_{j}")).collect();
    csv.write_record(&header)?;
    for row in data.features.iter_rows() {
        let record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_labeled_path(path: &Path, data: &LabeledDataset) -> Result<()> {
    write_labeled(std::fs::File::create(path)?, data)
}

pub fn write_unlabeled_path(path: &Path, data: &UnlabeledDataset) -> Result<()> {
    write_unlabeled(std::fs::File::create(path)?, data)
}

fn parse_feature(field: &str, row: usize, col: usize) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| {
        Error::param("csv", format!("row {row}: `{field}` is not a number"))
    })?;
    if !value.is_finite() {
        return Err(Error::NonFiniteFeature { row, col });
    }
    Ok(value)
}

/// Read a labeled dataset; the final column must be named `y` and hold labels
/// in `1..=K` for the given label space.
pub fn read_labeled<R: Read>(reader: R, space: LabelSpace) -> Result<LabeledDataset> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.clone();
    if header.len() < 2 || header.iter().last() != Some("y") {
        return Err(Error::param(
            "csv",
            "expected feature columns followed by a final `y` column",
        ));
    }
    let d = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        if record.len() != d + 1 {
            return Err(Error::param(
                "csv",
                format!("row {i}: expected {} fields, got {}", d + 1, record.len()),
            ));
        }
        for (j, field) in record.iter().take(d).enumerate() {
            data.push(parse_feature(field, i, j)?);
        }
        let label: u32 = record[d].trim().parse().map_err(|_| {
            Error::param("csv", format!("row {i}: label `{}` is not an integer", &record[d]))
        })?;
        labels.push(label);
    }
    let n = labels.len();
    LabeledDataset::new(Matrix::from_rows(data, n, d)?, labels, space)
}

/// Read an unlabeled dataset: feature columns only (a trailing `y` column is
/// rejected to avoid silently dropping labels).
pub fn read_unlabeled<R: Read>(reader: R) -> Result<UnlabeledDataset> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.clone();
    if header.is_empty() || header.iter().last() == Some("y") {
        return Err(Error::param(
            "csv",
            "expected feature columns only; found a `y` column",
        ));
    }
    let d = header.len();
    let mut data = Vec::new();
    let mut n = 0usize;
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(Error::param(
                "csv",
                format!("row {i}: expected {d} fields, got {}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            data.push(parse_feature(field, i, j)?);
        }
        n += 1;
    }
    Ok(UnlabeledDataset::new(Matrix::from_rows(data, n, d)?))
}

pub fn read_labeled_path(path: &Path, space: LabelSpace) -> Result<LabeledDataset> {
    read_labeled(std::fs::File::open(path)?, space)
}

pub fn read_unlabeled_path(path: &Path) -> Result<UnlabeledDataset> {
    read_unlabeled(std::fs::File::open(path)?)
}
