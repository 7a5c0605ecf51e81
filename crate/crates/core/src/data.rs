//! Observations with explicit missingness, affine normalization into the unit
//! hypercube, and CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Default padding fraction left on each side of the unit interval.
pub const DEFAULT_PAD: f64 = 0.025;

/// `M` observations of `N` real variables, row-major, with an observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_vars: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major values; non-finite cells are treated as missing.
    pub fn new(n_vars: usize, values: Vec<f64>) -> Result<Self> {
        let mask = values.iter().map(|v| v.is_finite()).collect();
        Self::with_mask(n_vars, values, mask)
    }

    pub fn with_mask(n_vars: usize, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::Argument("dataset needs at least one variable".into()));
        }
        if !values.len().is_multiple_of(n_vars) || mask.len() != values.len() {
            return Err(Error::Dimension {
                context: "dataset cells",
                expected: values.len() - values.len() % n_vars,
                found: mask.len(),
            });
        }
        let mask = mask
            .into_iter()
            .zip(&values)
            .map(|(m, v)| m && v.is_finite())
            .collect();
        Ok(Self {
            n_vars,
            values,
            mask,
            names: (0..n_vars).map(|n| format!("x{n}")).collect(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("ragged rows".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_vars {
            return Err(Error::Dimension {
                context: "column names",
                expected: self.n_vars,
                found: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_vars
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// The cell value, or `None` when the cell is missing.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let idx = row * self.n_vars + col;
        self.mask[idx].then(|| self.values[idx])
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.n_vars + col]
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_vars..(row + 1) * self.n_vars]
    }

    pub fn row_mask(&self, row: usize) -> &[bool] {
        &self.mask[row * self.n_vars..(row + 1) * self.n_vars]
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Observed values of one column.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).filter_map(|r| self.get(r, col)).collect()
    }

    /// New dataset with the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_vars);
        let mut mask = Vec::with_capacity(rows.len() * self.n_vars);
        for &r in rows {
            values.extend_from_slice(self.row_values(r));
            mask.extend_from_slice(self.row_mask(r));
        }
        Self {
            n_vars: self.n_vars,
            values,
            mask,
            names: self.names.clone(),
        }
    }

    /// Copy with additional cells hidden; `hide(row, col)` returning true masks the cell.
    pub fn masked(&self, mut hide: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows() {
            for c in 0..self.n_vars {
                if hide(r, c) {
                    out.mask[r * self.n_vars + c] = false;
                }
            }
        }
        out
    }

    fn map_observed(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for (idx, v) in out.values.iter_mut().enumerate() {
            if self.mask[idx] {
                *v = f(idx % self.n_vars, *v);
            }
        }
        out
    }
}

/// Per-dimension affine map `x ↦ scale·x + shift` into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl ScalingRecord {
    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if shift.len() != scale.len() {
            return Err(Error::Dimension {
                context: "scaling record",
                expected: shift.len(),
                found: scale.len(),
            });
        }
        if let Some(n) = scale.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Argument(format!("scale of dimension {n} must be positive")));
        }
        if shift.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("non-finite shift".into()));
        }
        Ok(Self { shift, scale })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            shift: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    /// Maps each `[lo, hi]` interval onto `[0, 1]`.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let scale = bounds.iter().map(|&(lo, hi)| 1.0 / (hi - lo)).collect();
        let shift = bounds.iter().map(|&(lo, hi)| -lo / (hi - lo)).collect();
        Self::new(shift, scale)
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    #[inline]
    pub fn forward(&self, dim: usize, x: f64) -> f64 {
        self.scale[dim] * x + self.shift[dim]
    }

    #[inline]
    pub fn inverse(&self, dim: usize, y: f64) -> f64 {
        (y - self.shift[dim]) / self.scale[dim]
    }

    /// Density factor converting unit-cube densities to raw units over `dims`.
    pub fn jacobian(&self, dims: impl IntoIterator<Item = usize>) -> f64 {
        dims.into_iter().map(|d| self.scale[d]).product()
    }

    /// Restriction to a subset (and order) of dimensions.
    pub fn select(&self, dims: &[usize]) -> Self {
        Self {
            shift: dims.iter().map(|&d| self.shift[d]).collect(),
            scale: dims.iter().map(|&d| self.scale[d]).collect(),
        }
    }

    /// Normalizes a raw dataset, clamping into `[0, 1]`; returns the number of clamped cells.
    pub fn apply(&self, data: &Dataset) -> Result<(Dataset, usize)> {
        if data.n_vars() != self.len() {
            return Err(Error::Dimension {
                context: "dataset vs scaling",
                expected: self.len(),
                found: data.n_vars(),
            });
        }
        let mut clamped = 0;
        let out = data.map_observed(|c, v| {
            let y = self.forward(c, v);
            if !(0.0..=1.0).contains(&y) {
                clamped += 1;
            }
            y.clamp(0.0, 1.0)
        });
        Ok((out, clamped))
    }

    pub fn denormalize(&self, data: &Dataset) -> Dataset {
        data.map_observed(|c, v| self.inverse(c, v))
    }
}

/// Maps each column's observed range onto `[pad, 1 - pad]`.
pub fn normalize(data: &Dataset, pad: f64) -> Result<(Dataset, ScalingRecord)> {
    if !(0.0..0.5).contains(&pad) {
        return Err(Error::Argument(format!("pad {pad} must lie in [0, 0.5)")));
    }
    let mut shift = Vec::with_capacity(data.n_vars());
    let mut scale = Vec::with_capacity(data.n_vars());
    for col in 0..data.n_vars() {
        let (lo, hi) = data
            .column(col)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !(lo < hi) {
            return Err(Error::DegenerateColumn { column: col });
        }
        let s = (1.0 - 2.0 * pad) / (hi - lo);
        scale.push(s);
        shift.push(pad - s * lo);
    }
    let record = ScalingRecord::new(shift, scale)?;
    let normalized = data.map_observed(|c, v| record.forward(c, v).clamp(0.0, 1.0));
    Ok((normalized, record))
}

fn is_missing_token(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("nan")
}

/// Reads a numeric CSV. The first line is a header iff it contains a
/// non-numeric token; empty fields and `NaN` mark missing cells.
pub fn read_csv(reader: impl Read, delimiter: u8) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut names: Option<Vec<String>> = None;
    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut width = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if line == 0
            && rec
                .iter()
                .any(|f| !is_missing_token(f) && f.parse::<f64>().is_err())
        {
            names = Some(rec.iter().map(str::to_owned).collect());
            width = Some(rec.len());
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::InsufficientData(format!(
                "csv line {} has {} fields, expected {w}",
                line + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            if is_missing_token(field) {
                values.push(f64::NAN);
                mask.push(false);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InsufficientData(format!("csv line {}: bad number {field:?}", line + 1))
                })?;
                values.push(v);
                mask.push(v.is_finite());
            }
        }
    }
    let n = width.ok_or_else(|| Error::InsufficientData("empty csv".into()))?;
    let data = Dataset::with_mask(n, values, mask)?;
    match names {
        Some(names) => data.with_names(names),
        None => Ok(data),
    }
}

pub fn read_csv_path(path: impl AsRef<Path>, delimiter: u8) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?, delimiter)
}

/// Writes a header line of column names, then rows; missing cells are written as `NaN`.
pub fn write_csv(data: &Dataset, mut out: impl Write) -> Result<()> {
    writeln!(out, "{}", data.names().join(","))?;
    let mut line = String::new();
    for r in 0..data.n_rows() {
        line.clear();
        for c in 0..data.n_vars() {
            if c > 0 {
                line.push(',');
            }
            match data.get(r, c) {
                Some(v) => line.push_str(&format!("{v:.17e}")),
                None => line.push_str("NaN"),
            }
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
