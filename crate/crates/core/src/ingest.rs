//! CSV ingest and design-matrix construction.
//!
//! [`read_csv`] loads an RFC-4180 file with a header row into a
//! [`DataTable`], inferring each column as numeric (every non-missing cell
//! parses as a double) or categorical (anything else). Empty cells and the
//! markers `NA`/`NaN` (any case) are missing in either kind; missingness is
//! tolerated at read time and rejected at design time with the row and
//! column named.
//!
//! [`build_design`] turns a bound formula plus a table into the matrices the
//! samplers consume:
//!
//! * numeric predictors are standardized to mean 0, unit sample standard
//!   deviation (n−1 denominator);
//! * categorical predictors become L−1 treatment-coded dummy columns
//!   (levels sorted, first level dropped, labels like `Gender=male`),
//!   centered but not rescaled;
//! * under the identity link the responses are centered and the centering
//!   stored; other links keep the raw values and validate them
//!   (probit: 0/1; log and logit: nonnegative integer counts; logit
//!   additionally: no all-zero rows, at least two response columns).
//!
//! Coefficients are therefore reported on the standardized predictor scale;
//! the stored means/scales allow exact reconstruction of the originals.

use crate::error::{Error, Result};
use crate::formula::BoundFormula;
use crate::links::Link;
use nalgebra::DMatrix;
use std::path::Path;

/// One parsed column. Numeric columns mark missing cells with NaN;
/// categorical columns mark them with an empty string.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A column-oriented table with unique, non-empty column names.
#[derive(Debug, Clone)]
pub struct DataTable {
    pub names: Vec<String>,
    pub columns: Vec<ColumnData>,
}

impl DataTable {
    pub fn from_columns(names: Vec<String>, columns: Vec<ColumnData>) -> Self {
        assert_eq!(names.len(), columns.len());
        DataTable { names, columns }
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map(|c| c.len()).unwrap_or(0)
    }
}

fn missing_marker(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Read a CSV file with a header row into a [`DataTable`].
pub fn read_csv(path: &Path) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| map_csv_err(path, e))?;

    let headers = reader.headers().map_err(|e| map_csv_err(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile { path: path.into() });
    }
    let names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::BadHeader {
                path: path.into(),
                detail: format!("column {} has an empty name", i + 1),
            });
        }
        if names[..i].contains(name) {
            return Err(Error::BadHeader {
                path: path.into(),
                detail: format!("duplicate column name '{name}'"),
            });
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| map_csv_err(path, e))?;
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.to_string());
        }
    }

    let columns = cells
        .into_iter()
        .map(|col| {
            let numeric: Option<Vec<f64>> = col
                .iter()
                .map(|c| {
                    if missing_marker(c) {
                        Some(f64::NAN)
                    } else {
                        c.parse::<f64>().ok()
                    }
                })
                .collect();
            match numeric {
                Some(v) => ColumnData::Numeric(v),
                None => ColumnData::Categorical(
                    col.into_iter()
                        .map(|c| if missing_marker(&c) { String::new() } else { c })
                        .collect(),
                ),
            }
        })
        .collect();

    Ok(DataTable { names, columns })
}

/// Write a table back out as CSV with a header row. Numeric cells use the
/// shortest round-tripping representation, so a read of the written file
/// recovers the same values bit for bit.
pub fn write_csv(table: &DataTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| map_csv_err(path, e))?;
    writer
        .write_record(&table.names)
        .map_err(|e| map_csv_err(path, e))?;
    for row in 0..table.n_rows() {
        let record: Vec<String> = table
            .columns
            .iter()
            .map(|col| match col {
                ColumnData::Numeric(v) => {
                    if v[row].is_nan() {
                        String::new()
                    } else {
                        format!("{}", v[row])
                    }
                }
                ColumnData::Categorical(v) => v[row].clone(),
            })
            .collect();
        writer
            .write_record(&record)
            .map_err(|e| map_csv_err(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn map_csv_err(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::RaggedRow {
            path: path.into(),
            row: pos.as_ref().map(|p| p.line()).unwrap_or(0),
            found: *len as usize,
            expected: *expected_len as usize,
        },
        _ => Error::Other(format!("failed to parse {}: {e}", path.display())),
    }
}

/// Matrices ready for sampling.
///
/// `y` is n×k_raw (centered under identity, raw and validated otherwise);
/// `x` is n×p standardized as described at module level. Under the logit
/// link the Gaussian core has dimension `k_eff = k_raw − 1` with the last
/// response as the reference category; otherwise `k_eff = k_raw`.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    pub link: Link,
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub y_centering: Vec<f64>,
    pub response_labels: Vec<String>,
    pub predictor_labels: Vec<String>,
}

impl DesignMatrices {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn k_raw(&self) -> usize {
        self.y.ncols()
    }

    pub fn k_eff(&self) -> usize {
        match self.link {
            Link::Logit => self.y.ncols() - 1,
            _ => self.y.ncols(),
        }
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Labels of the responses carried by the Gaussian core (drops the
    /// logit reference category).
    pub fn core_response_labels(&self) -> &[String] {
        &self.response_labels[..self.k_eff()]
    }

    /// Wrap pre-built matrices without any centering or rescaling, validating
    /// the response values against the link. Intended for callers driving the
    /// one-step samplers directly.
    pub fn from_parts(y: DMatrix<f64>, x: DMatrix<f64>, link: Link) -> Result<Self> {
        if y.nrows() != x.nrows() {
            return Err(Error::dims(format!(
                "y has {} rows, x has {}",
                y.nrows(),
                x.nrows()
            )));
        }
        if y.ncols() == 0 {
            return Err(Error::dims("y has no columns"));
        }
        if link == Link::Logit && y.ncols() < 2 {
            return Err(Error::LogitNeedsTwoResponses);
        }
        let k = y.ncols();
        let p = x.ncols();
        let design = DesignMatrices {
            link,
            response_labels: (1..=k).map(|j| format!("y{j}")).collect(),
            predictor_labels: (1..=p).map(|j| format!("x{j}")).collect(),
            x_means: vec![0.0; p],
            x_scales: vec![1.0; p],
            y_centering: vec![0.0; k],
            y,
            x,
        };
        validate_response_values(&design.y, link, &design.response_labels)?;
        for (j, col) in design.x.column_iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::MissingValue {
                        column: design.predictor_labels[j].clone(),
                        row: i + 1,
                    });
                }
            }
        }
        Ok(design)
    }
}

fn validate_response_values(y: &DMatrix<f64>, link: Link, labels: &[String]) -> Result<()> {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            let v = y[(i, j)];
            if !v.is_finite() {
                return Err(Error::MissingValue {
                    column: labels[j].clone(),
                    row: i + 1,
                });
            }
            match link {
                Link::Identity => {}
                Link::Probit => {
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::NonBinaryResponse {
                            column: labels[j].clone(),
                            row: i + 1,
                            value: v,
                        });
                    }
                }
                Link::Log | Link::Logit => {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::NonIntegerCount {
                            link: link.as_str(),
                            column: labels[j].clone(),
                            row: i + 1,
                            value: v,
                        });
                    }
                }
            }
        }
    }
    if link == Link::Logit {
        for i in 0..y.nrows() {
            if y.row(i).sum() <= 0.0 {
                return Err(Error::ZeroRowTotal { row: i + 1 });
            }
        }
    }
    Ok(())
}

/// Build design matrices from a bound formula. See the module docs for the
/// exact transformations applied.
pub fn build_design(table: &DataTable, bound: &BoundFormula, link: Link) -> Result<DesignMatrices> {
    let n = table.n_rows();
    let k = bound.response_cols.len();
    if link == Link::Logit && k < 2 {
        return Err(Error::LogitNeedsTwoResponses);
    }

    // Responses: numeric, fully observed.
    let mut y = DMatrix::zeros(n, k);
    for (jj, &col) in bound.response_cols.iter().enumerate() {
        let name = &table.names[col];
        match &table.columns[col] {
            ColumnData::Numeric(v) => {
                for (i, &val) in v.iter().enumerate() {
                    if !val.is_finite() {
                        return Err(Error::MissingValue {
                            column: name.clone(),
                            row: i + 1,
                        });
                    }
                    y[(i, jj)] = val;
                }
            }
            ColumnData::Categorical(_) => {
                return Err(Error::CategoricalResponse {
                    column: name.clone(),
                })
            }
        }
    }
    validate_response_values(&y, link, &bound.spec.responses)?;

    let mut y_centering = vec![0.0; k];
    if link == Link::Identity && n > 0 {
        for j in 0..k {
            let m = y.column(j).sum() / n as f64;
            y_centering[j] = m;
            for i in 0..n {
                y[(i, j)] -= m;
            }
        }
    }

    // Predictors: expand and standardize.
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut means: Vec<f64> = Vec::new();
    let mut scales: Vec<f64> = Vec::new();

    for &col in &bound.predictor_cols {
        let name = &table.names[col];
        match &table.columns[col] {
            ColumnData::Numeric(v) => {
                for (i, &val) in v.iter().enumerate() {
                    if !val.is_finite() {
                        return Err(Error::MissingValue {
                            column: name.clone(),
                            row: i + 1,
                        });
                    }
                }
                let m = v.iter().sum::<f64>() / n as f64;
                let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
                let sd = if n > 1 {
                    (ss / (n as f64 - 1.0)).sqrt()
                } else {
                    0.0
                };
                if sd == 0.0 {
                    return Err(Error::ZeroVariancePredictor {
                        column: name.clone(),
                    });
                }
                cols.push(v.iter().map(|x| (x - m) / sd).collect());
                labels.push(name.clone());
                means.push(m);
                scales.push(sd);
            }
            ColumnData::Categorical(v) => {
                for (i, s) in v.iter().enumerate() {
                    if s.is_empty() {
                        return Err(Error::MissingValue {
                            column: name.clone(),
                            row: i + 1,
                        });
                    }
                }
                let mut levels: Vec<&String> = v.iter().collect();
                levels.sort();
                levels.dedup();
                if levels.len() < 2 {
                    return Err(Error::ZeroVariancePredictor {
                        column: name.clone(),
                    });
                }
                for level in &levels[1..] {
                    let raw: Vec<f64> = v
                        .iter()
                        .map(|s| if s == *level { 1.0 } else { 0.0 })
                        .collect();
                    let m = raw.iter().sum::<f64>() / n as f64;
                    cols.push(raw.iter().map(|x| x - m).collect());
                    labels.push(format!("{name}={level}"));
                    means.push(m);
                    scales.push(1.0);
                }
            }
        }
    }

    let p = cols.len();
    let mut x = DMatrix::zeros(n, p);
    for (j, col) in cols.iter().enumerate() {
        for (i, &val) in col.iter().enumerate() {
            x[(i, j)] = val;
        }
    }

    Ok(DesignMatrices {
        link,
        y,
        x,
        x_means: means,
        x_scales: scales,
        y_centering,
        response_labels: bound.spec.responses.clone(),
        predictor_labels: labels,
    })
}
