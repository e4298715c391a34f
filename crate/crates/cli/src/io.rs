//! Delimited-text tables: ingestion into a [`Dataset`] and emission with
//! round-trip precision.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use qmgp::data::Dataset;

use crate::config::RunConfig;
use crate::error::CliError;

/// Seventeen significant digits: enough to reproduce every `f64` exactly.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

/// Which table columns feed which part of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    pub coords: Vec<String>,
    pub outcomes: Vec<String>,
    pub x: Vec<String>,
    pub intercept: bool,
    pub z: Vec<String>,
}

impl Bindings {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, CliError> {
        let b = Bindings {
            coords: cfg.list("data.coords"),
            outcomes: cfg.list("data.outcomes"),
            x: cfg.list("data.x"),
            intercept: cfg.flag("data.intercept")?,
            z: cfg.list("data.z"),
        };
        if b.coords.is_empty() {
            return Err(CliError::Usage("data.coords names no coordinate columns".into()));
        }
        if b.outcomes.is_empty() {
            return Err(CliError::Usage("data.outcomes names no outcome columns".into()));
        }
        if !b.z.is_empty() && b.outcomes.len() > 1 {
            return Err(CliError::Usage("data.z is only supported with a single outcome".into()));
        }
        Ok(b)
    }

    pub fn l(&self) -> usize {
        self.outcomes.len()
    }

    pub fn q(&self) -> usize {
        if self.z.is_empty() {
            self.l()
        } else {
            self.z.len()
        }
    }

    /// Covariates per outcome.
    pub fn k(&self) -> usize {
        self.x.len() + self.intercept as usize
    }

    pub fn p(&self) -> usize {
        self.l() * self.k()
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset,
    pub warnings: Vec<String>,
    /// Fraction of missing entries per outcome.
    pub missing: Vec<f64>,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Data(format!("{}: no column named '{name}'", path.display())))
}

/// Reads a table. When `outcomes_required` is false, absent outcome columns
/// produce an all-missing dataset (prediction locations).
pub fn ingest(path: &Path, b: &Bindings, outcomes_required: bool) -> Result<Ingested, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    let coord_cols: Vec<usize> = b
        .coords
        .iter()
        .map(|c| column(&headers, c, path))
        .collect::<Result<_, _>>()?;
    let y_cols: Option<Vec<usize>> = if outcomes_required || b.outcomes.iter().all(|c| headers.iter().any(|h| h == c)) {
        Some(
            b.outcomes
                .iter()
                .map(|c| column(&headers, c, path))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    let x_cols: Vec<usize> =
        b.x.iter()
            .map(|c| column(&headers, c, path))
            .collect::<Result<_, _>>()?;
    let z_cols: Vec<usize> =
        b.z.iter()
            .map(|c| column(&headers, c, path))
            .collect::<Result<_, _>>()?;

    let (l, q, k, p) = (b.l(), b.q(), b.k(), b.p());
    let dim = coord_cols.len();
    let (mut coords, mut y, mut observed, mut x, mut z) = (vec![], vec![], vec![], vec![], vec![]);
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize, what: &str| -> Result<f64, CliError> {
            let s = rec.get(c).unwrap_or("");
            let v: f64 = s
                .parse()
                .map_err(|_| CliError::Data(format!("{} line {line}: {what} '{s}' is not a number", path.display())))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Data(format!(
                    "{} line {line}: {what} is not finite",
                    path.display()
                )))
            }
        };
        let start = coords.len();
        for (&c, name) in coord_cols.iter().zip(&b.coords) {
            coords.push(field(c, name)?);
        }
        let key: Vec<u64> = coords[start..].iter().map(|v| (v + 0.0).to_bits()).collect();
        if !seen.insert(key) {
            warnings.push(format!("line {line}: duplicate location"));
        }
        for r in 0..l {
            match &y_cols {
                Some(cols) if !is_missing(rec.get(cols[r]).unwrap_or("")) => {
                    y.push(field(cols[r], &b.outcomes[r])?);
                    observed.push(true);
                }
                _ => {
                    y.push(f64::NAN);
                    observed.push(false);
                }
            }
        }
        let mut xs = Vec::with_capacity(k);
        if b.intercept {
            xs.push(1.0);
        }
        for (&c, name) in x_cols.iter().zip(&b.x) {
            xs.push(field(c, name)?);
        }
        for r in 0..l {
            let mut row = vec![0.0; p];
            row[r * k..(r + 1) * k].copy_from_slice(&xs);
            x.extend(row);
            if z_cols.is_empty() {
                let mut zr = vec![0.0; q];
                zr[r] = 1.0;
                z.extend(zr);
            } else {
                for (&c, name) in z_cols.iter().zip(&b.z) {
                    z.push(field(c, name)?);
                }
            }
        }
    }
    let n = coords.len() / dim.max(1);
    if n == 0 {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let missing = (0..l)
        .map(|r| (0..n).filter(|&i| !observed[i * l + r]).count() as f64 / n as f64)
        .collect();
    let data = Dataset::new(dim, coords, l, q, p, y, observed, x, z)?;
    Ok(Ingested {
        data,
        warnings,
        missing,
    })
}

/// Writes a dataset in the layout [`ingest`] reads back with the same
/// bindings.
pub fn emit(path: &Path, data: &Dataset, b: &Bindings) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = b.coords.iter().map(String::as_str).collect();
    header.extend(b.outcomes.iter().map(String::as_str));
    header.extend(b.x.iter().map(String::as_str));
    header.extend(b.z.iter().map(String::as_str));
    w.write_record(&header)?;
    let skip = b.intercept as usize;
    for i in 0..data.n() {
        let mut row: Vec<String> = data.loc(i).iter().map(|&v| num(v)).collect();
        for r in 0..data.l {
            row.push(if data.is_observed(i, r) {
                num(data.y[i * data.l + r])
            } else {
                String::new()
            });
        }
        if !b.x.is_empty() {
            row.extend(data.x_row(i, 0)[skip..b.k()].iter().map(|&v| num(v)));
        }
        if !b.z.is_empty() {
            row.extend(data.z_row(i, 0).iter().map(|&v| num(v)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header and rows of already formatted cells.
pub fn write_table(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a whole table as header plus string rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

pub fn parse_cell(s: &str, what: &str) -> Result<f64, CliError> {
    if is_missing(s) {
        return Ok(f64::NAN);
    }
    s.parse()
        .map_err(|_| CliError::Data(format!("{what}: '{s}' is not a number")))
}
