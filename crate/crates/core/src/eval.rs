//! Error percentages, table aggregates and the power budget.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::delineation::{MsRange, Parameter};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("accepted value is zero")]
    DivisionByZero,
    #[error("table {table_id}: {message}")]
    Schema { table_id: u32, message: String },
    #[error("no rows or components given")]
    EmptyInput,
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `|measured - accepted| / accepted * 100`.
pub fn percent_error(measured: f64, accepted: f64) -> Result<f64, EvalError> {
    if accepted == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    Ok(((measured - accepted) / accepted).abs() * 100.0)
}

/// Zero inside the inclusive range, otherwise the distance to the nearest
/// bound as a percentage of that bound.
pub fn range_error(value: f64, range: MsRange) -> f64 {
    if value < range.lo {
        (range.lo - value) / range.lo * 100.0
    } else if value > range.hi {
        (value - range.hi) / range.hi * 100.0
    } else {
        0.0
    }
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    // 1e-9 absorbs representation error such as 5.185 stored as 5.18499...
    let scaled = x.abs() * 100.0;
    (scaled + 0.5 + 1e-9).floor().copysign(x) / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub table_id: u32,
    pub parameter: Parameter,
    pub period: u32,
    pub range: MsRange,
    pub reference_ms: f64,
    pub device_ms: f64,
    /// Cell as printed in the source table, when transcribed.
    pub published_normal_pct: Option<f64>,
    pub published_device_pct: Option<f64>,
}

impl ErrorRow {
    pub fn label(&self) -> String {
        format!("{}-{}", self.parameter, self.period)
    }

    /// Device-column error; the device value is the denominator.
    pub fn device_error_pct(&self) -> Result<f64, EvalError> {
        percent_error(self.reference_ms, self.device_ms)
    }

    pub fn normal_error_pct(&self) -> f64 {
        range_error(self.device_ms, self.range)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub label: String,
    pub device_error_pct: f64,
    pub normal_error_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_device_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_normal_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub table_id: u32,
    /// Mean device-column error over all rows.
    pub device_avg_pct: f64,
    /// Mean recomputed normal-column error over out-of-range rows (0 if none).
    pub normal_avg_pct: f64,
    /// Same mean over the published nonzero cells, when every row has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published_normal_avg_pct: Option<f64>,
    pub rows: Vec<RowResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalSource {
    Published,
    Recomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub per_table: Vec<TableSummary>,
    pub overall_device_error_pct: f64,
    pub mean_normal_error_pct: f64,
    /// 100 minus the mean normal-column average, taken from `normal_source`.
    pub accuracy_pct: f64,
    pub normal_source: NormalSource,
    /// Accuracy using only recomputed normal-column cells.
    pub accuracy_recomputed_pct: f64,
}

const ROWS_PER_TABLE: usize = 16;

fn mean_nonzero(values: impl Iterator<Item = f64>) -> f64 {
    let nz: Vec<f64> = values.filter(|v| *v != 0.0).collect();
    if nz.is_empty() {
        0.0
    } else {
        nz.iter().sum::<f64>() / nz.len() as f64
    }
}

fn check_table(table_id: u32, rows: &[&ErrorRow]) -> Result<(), EvalError> {
    let schema = |message: String| EvalError::Schema { table_id, message };
    if rows.len() != ROWS_PER_TABLE {
        return Err(schema(format!("expected {ROWS_PER_TABLE} rows, found {}", rows.len())));
    }
    let mut seen = BTreeSet::new();
    for r in rows {
        if !(1..=4).contains(&r.period) {
            return Err(schema(format!("period {} outside 1..=4", r.period)));
        }
        if !seen.insert((r.parameter.to_string(), r.period)) {
            return Err(schema(format!("duplicate row {}", r.label())));
        }
        if !(r.reference_ms > 0.0 && r.device_ms > 0.0) {
            return Err(schema(format!("row {} has a non-positive duration", r.label())));
        }
        if !(r.range.lo > 0.0 && r.range.lo < r.range.hi) {
            return Err(schema(format!("row {} has an invalid range", r.label())));
        }
    }
    Ok(())
}

/// Aggregates tables of 16 rows each (four parameters by four periods).
pub fn table_summary(rows: &[ErrorRow]) -> Result<EvalSummary, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut by_table: BTreeMap<u32, Vec<&ErrorRow>> = BTreeMap::new();
    for r in rows {
        by_table.entry(r.table_id).or_default().push(r);
    }
    let mut per_table = Vec::with_capacity(by_table.len());
    for (&table_id, table) in &by_table {
        check_table(table_id, table)?;
        let mut results = Vec::with_capacity(table.len());
        for r in table {
            results.push(RowResult {
                label: r.label(),
                device_error_pct: r.device_error_pct()?,
                normal_error_pct: r.normal_error_pct(),
                published_device_pct: r.published_device_pct,
                published_normal_pct: r.published_normal_pct,
            });
        }
        let device_avg_pct = results.iter().map(|x| x.device_error_pct).sum::<f64>() / results.len() as f64;
        let normal_avg_pct = mean_nonzero(results.iter().map(|x| x.normal_error_pct));
        let published_normal_avg_pct = table
            .iter()
            .map(|r| r.published_normal_pct)
            .collect::<Option<Vec<f64>>>()
            .map(|cells| mean_nonzero(cells.into_iter()));
        per_table.push(TableSummary { table_id, device_avg_pct, normal_avg_pct, published_normal_avg_pct, rows: results });
    }
    let n = per_table.len() as f64;
    let overall_device_error_pct = per_table.iter().map(|t| t.device_avg_pct).sum::<f64>() / n;
    let recomputed_mean = per_table.iter().map(|t| t.normal_avg_pct).sum::<f64>() / n;
    let published: Option<Vec<f64>> = per_table.iter().map(|t| t.published_normal_avg_pct).collect();
    let (mean_normal_error_pct, normal_source) = match published {
        Some(p) => (p.iter().sum::<f64>() / n, NormalSource::Published),
        None => (recomputed_mean, NormalSource::Recomputed),
    };
    Ok(EvalSummary {
        per_table,
        overall_device_error_pct,
        mean_normal_error_pct,
        accuracy_pct: 100.0 - mean_normal_error_pct,
        normal_source,
        accuracy_recomputed_pct: 100.0 - recomputed_mean,
    })
}

#[derive(Debug, Deserialize)]
struct RawRow {
    table_id: u32,
    parameter: String,
    period: u32,
    lo_ms: f64,
    hi_ms: f64,
    reference_ms: f64,
    device_ms: f64,
    #[serde(default)]
    published_normal_pct: Option<f64>,
    #[serde(default)]
    published_device_pct: Option<f64>,
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn csv_error(e: csv::Error) -> EvalError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    EvalError::Format { line, message: e.to_string() }
}

/// Reads `table_id,parameter,period,lo_ms,hi_ms,reference_ms,device_ms`
/// with optional `published_normal_pct,published_device_pct` columns.
/// Lines starting with `#` are comments.
pub fn read_tables_from<R: Read>(r: R) -> Result<Vec<ErrorRow>, EvalError> {
    let mut rdr = csv_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        let raw = rec.map_err(csv_error)?;
        let parameter = raw
            .parameter
            .parse::<Parameter>()
            .map_err(|e| EvalError::InvalidValue(format!("table {} parameter: {e}", raw.table_id)))?;
        rows.push(ErrorRow {
            table_id: raw.table_id,
            parameter,
            period: raw.period,
            range: MsRange { lo: raw.lo_ms, hi: raw.hi_ms },
            reference_ms: raw.reference_ms,
            device_ms: raw.device_ms,
            published_normal_pct: raw.published_normal_pct,
            published_device_pct: raw.published_device_pct,
        });
    }
    Ok(rows)
}

pub fn load_tables(path: impl AsRef<Path>) -> Result<Vec<ErrorRow>, EvalError> {
    read_tables_from(File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerComponent {
    pub name: String,
    pub volts: f64,
    pub amps: f64,
}

impl PowerComponent {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.volts > 0.0 && self.amps > 0.0) || !self.volts.is_finite() || !self.amps.is_finite() {
            return Err(EvalError::InvalidValue(format!("{}: volts and amps must be > 0", self.name)));
        }
        Ok(())
    }

    pub fn watts(&self) -> f64 {
        self.volts * self.amps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub components: Vec<PowerComponent>,
    pub watts: f64,
    pub hours: f64,
    pub watt_hours: f64,
}

pub fn power_budget(components: &[PowerComponent], hours: f64) -> Result<PowerBudget, EvalError> {
    if components.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if !(hours >= 0.0) || !hours.is_finite() {
        return Err(EvalError::InvalidValue("hours must be >= 0".into()));
    }
    for c in components {
        c.validate()?;
    }
    let watts = components.iter().map(PowerComponent::watts).sum::<f64>();
    Ok(PowerBudget { components: components.to_vec(), watts, hours, watt_hours: watts * hours })
}

/// Reads `name,volts,amps` rows; `#` starts a comment line.
pub fn read_components_from<R: Read>(r: R) -> Result<Vec<PowerComponent>, EvalError> {
    let mut rdr = csv_reader(r);
    rdr.deserialize::<PowerComponent>().map(|rec| rec.map_err(csv_error)).collect()
}

pub fn load_components(path: impl AsRef<Path>) -> Result<Vec<PowerComponent>, EvalError> {
    read_components_from(File::open(path)?)
}
