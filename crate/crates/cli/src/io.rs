//! CSV ingestion and export of datasets.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use tobitm::{Dataset64, Intercept};

use crate::error::{CliError, CliResult};

/// Which CSV column plays which part in the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Roles {
    pub response: String,
    /// Exogenous regressors, without the intercept (always prepended).
    pub exogenous: Vec<String>,
    pub endogenous: String,
    pub instrument: String,
}

impl Roles {
    pub fn validate(&self) -> CliResult<()> {
        let mut seen = HashSet::new();
        let all = std::iter::once(&self.response)
            .chain(&self.exogenous)
            .chain([&self.endogenous, &self.instrument]);
        for name in all {
            if name.is_empty() {
                return Err(CliError::Usage("column names must not be empty".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(CliError::Usage(format!("column `{name}` is assigned more than one role")));
            }
        }
        Ok(())
    }

    /// Coefficient names in estimate order.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        names.extend(self.exogenous.iter().cloned());
        names.push(self.endogenous.clone());
        names.push("residual".to_string());
        names
    }

    /// First-stage coefficient names in estimate order.
    pub fn first_stage_names(&self) -> Vec<String> {
        let mut names = vec![self.instrument.clone(), "intercept".to_string()];
        names.extend(self.exogenous.iter().cloned());
        names
    }
}

fn is_missing(s: &str) -> bool {
    matches!(s.trim(), "" | "NA" | "NaN" | "nan" | "." | "null")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Role columns as parsed `f64` vectors, in the order response, exogenous...,
/// endogenous, instrument. Data rows are numbered from 1 in errors.
pub fn read_columns<R: std::io::Read>(reader: R, roles: &Roles, source: &Path) -> CliResult<Vec<Vec<f64>>> {
    roles.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| io_err(source, e))?.clone();
    if header.is_empty() {
        return Err(io_err(source, "empty file"));
    }
    let wanted: Vec<&String> = std::iter::once(&roles.response)
        .chain(&roles.exogenous)
        .chain([&roles.endogenous, &roles.instrument])
        .collect();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|name| header.iter().position(|h| h == name.as_str()).ok_or_else(|| CliError::MissingColumn((*name).clone())))
        .collect::<CliResult<_>>()?;

    let mut cols = vec![Vec::new(); wanted.len()];
    let mut missing: Vec<Vec<usize>> = vec![Vec::new(); wanted.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_err(source, e))?;
        let row = r + 1;
        for (c, &i) in idx.iter().enumerate() {
            let cell = rec.get(i).unwrap_or("");
            if is_missing(cell) {
                missing[c].push(row);
                cols[c].push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| CliError::Parse {
                column: wanted[c].clone(),
                row,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(CliError::Parse { column: wanted[c].clone(), row, value: cell.to_string() });
            }
            cols[c].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(io_err(source, "no data rows"));
    }
    if let Some(c) = missing.iter().position(|m| !m.is_empty()) {
        return Err(CliError::MissingValues { column: wanted[c].clone(), rows: missing[c].clone() });
    }
    Ok(cols)
}

/// Assembles a dataset from role columns, prepending the intercept.
pub fn dataset_from_columns(cols: &[Vec<f64>], threshold: f64) -> CliResult<Dataset64> {
    let n = cols[0].len();
    let k = cols.len() - 3;
    let x = DMatrix::from_fn(n, k, |i, j| cols[1 + j][i]);
    Ok(Dataset64::from_columns(
        DVector::from_column_slice(&cols[0]),
        x,
        DVector::from_column_slice(&cols[k + 1]),
        DVector::from_column_slice(&cols[k + 2]),
        threshold,
        Intercept::Prepend,
    )?)
}

/// Reads the role columns of a CSV file into a dataset censored at `threshold`.
pub fn read_csv(path: &Path, roles: &Roles, threshold: f64) -> CliResult<Dataset64> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let cols = read_columns(file, roles, path)?;
    dataset_from_columns(&cols, threshold)
}

/// Writes a dataset with the given roles as header; the intercept column is dropped.
pub fn write_csv(path: &Path, ds: &Dataset64, roles: &Roles) -> CliResult<()> {
    if roles.exogenous.len() + 1 != ds.p() {
        return Err(CliError::Usage(format!(
            "{} exogenous names for {} non-intercept columns",
            roles.exogenous.len(),
            ds.p() - 1
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec![roles.response.clone()];
    header.extend(roles.exogenous.iter().cloned());
    header.push(roles.endogenous.clone());
    header.push(roles.instrument.clone());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for i in 0..ds.n() {
        let mut rec = vec![ds.y()[i].to_string()];
        rec.extend((1..ds.p()).map(|j| ds.x_exo()[(i, j)].to_string()));
        rec.push(ds.w()[i].to_string());
        rec.push(ds.z1()[i].to_string());
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Centers and scales each regressor column to unit sample variance and
/// divides the response by its standard deviation (the threshold is scaled
/// alike). Returns the scales used, response first.
pub fn standardize(cols: &mut [Vec<f64>], threshold: &mut f64) -> CliResult<Vec<f64>> {
    let mut scales = Vec::with_capacity(cols.len());
    for (c, col) in cols.iter_mut().enumerate() {
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(CliError::Usage(format!("cannot standardize constant column {c}")));
        }
        if c == 0 {
            col.iter_mut().for_each(|v| *v /= sd);
            *threshold /= sd;
        } else {
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
        scales.push(sd);
    }
    Ok(scales)
}
