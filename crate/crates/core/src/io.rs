//! Plain-text model files.
//!
//! ```text
//! LRCF v1
//! N F K
//! shift scale            (N lines)
//! λ_1 … λ_F
//! re,im … re,im          ((2K+1) lines of F entries per variable, k ascending from −K)
//! ```
//!
//! Numbers are written with 17 significant digits, which round-trips every `f64`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::data::ScalingRecord;
use crate::error::{Error, Result};
use crate::model::CpdModel;

pub const MAGIC: &str = "LRCF v1";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_model(model: &CpdModel, mut out: impl Write) -> Result<()> {
    let scaling = model.scaling();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "{} {} {}", model.n_vars(), model.rank(), model.k_max())?;
    for (c, s) in scaling.shift().iter().zip(scaling.scale()) {
        writeln!(out, "{} {}", num(*c), num(*s))?;
    }
    let lambda: Vec<String> = model.lambda().iter().map(|&w| num(w)).collect();
    writeln!(out, "{}", lambda.join(" "))?;
    for a in model.factors() {
        for row in a.row_iter() {
            let entries: Vec<String> = row.iter().map(|z| format!("{},{}", num(z.re), num(z.im))).collect();
            writeln!(out, "{}", entries.join(" "))?;
        }
    }
    Ok(())
}

pub fn model_to_string(model: &CpdModel) -> String {
    let mut buf = Vec::new();
    write_model(model, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("model text is ASCII")
}

pub fn save_model(model: &CpdModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self, what: &str) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err(format!("unexpected end of file, expected {what}"))),
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::ModelFormat { line: self.line, msg }
    }

    fn floats(&self, text: &str, expected: usize) -> Result<Vec<f64>> {
        let vals = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("invalid number {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} numbers, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn complexes(&self, text: &str, expected: usize) -> Result<Vec<Complex64>> {
        let vals = text
            .split_whitespace()
            .map(|t| {
                let (re, im) = t
                    .split_once(',')
                    .ok_or_else(|| self.err(format!("expected re,im pair, found {t:?}")))?;
                match (re.parse(), im.parse()) {
                    (Ok(re), Ok(im)) => Ok(Complex64::new(re, im)),
                    _ => Err(self.err(format!("invalid complex number {t:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != expected {
            return Err(self.err(format!("expected {expected} entries, found {}", vals.len())));
        }
        Ok(vals)
    }
}

/// Parses a model file and re-validates the model invariants.
pub fn read_model(input: impl Read) -> Result<CpdModel> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        line: 0,
    };
    let magic = lines.next("header")?;
    if magic.trim_end() != MAGIC {
        return Err(lines.err(format!("expected header {MAGIC:?}")));
    }
    let dims = lines.next("dimensions")?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| lines.err(format!("invalid dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let &[n, f, k] = dims.as_slice() else {
        return Err(lines.err("expected `N F K`".into()));
    };
    let mut shift = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(n);
    for _ in 0..n {
        let l = lines.next("scaling")?;
        let v = lines.floats(&l, 2)?;
        shift.push(v[0]);
        scale.push(v[1]);
    }
    let scaling = ScalingRecord::new(shift, scale).map_err(|e| lines.err(e.to_string()))?;
    let l = lines.next("component weights")?;
    let lambda = lines.floats(&l, f)?;
    let rows = 2 * k + 1;
    let mut factors = Vec::with_capacity(n);
    for _ in 0..n {
        let mut entries = Vec::with_capacity(rows * f);
        for _ in 0..rows {
            let l = lines.next("factor row")?;
            entries.extend(lines.complexes(&l, f)?);
        }
        factors.push(DMatrix::from_row_slice(rows, f, &entries));
    }
    if let Some(extra) = lines.inner.next() {
        if !extra?.trim().is_empty() {
            lines.line += 1;
            return Err(lines.err("trailing content".into()));
        }
    }
    CpdModel::new(k, lambda, factors, scaling).map_err(|e| Error::ModelFormat {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CpdModel> {
    read_model(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::initial_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn some_model() -> CpdModel {
        let rec = ScalingRecord::new(vec![0.1, -3.0, 1e-9], vec![0.7, 1.0 / 3.0, 12.5]).unwrap();
        initial_model(3, 2, 3, rec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = some_model();
        let text = model_to_string(&m);
        let back = read_model(text.as_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_string(&back), text);
    }

    #[test]
    fn layout() {
        let text = model_to_string(&some_model());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "LRCF v1");
        assert_eq!(lines[1], "3 2 3");
        assert_eq!(lines.len(), 2 + 3 + 1 + 3 * 7);
        assert!(lines[6..].iter().all(|l| l.split(' ').count() == 2));
        // Zero frequency of the first variable.
        assert!(lines[6 + 3].starts_with("1.0000000000000000e0,0.0000000000000000e0"));
    }

    #[test]
    fn rejects_invalid_files() {
        let text = model_to_string(&some_model());
        let bad_magic = text.replacen("LRCF v1", "LRCF v2", 1);
        assert!(matches!(read_model(bad_magic.as_bytes()), Err(Error::ModelFormat { line: 1, .. })));
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_model(truncated.as_bytes()), Err(Error::ModelFormat { .. })));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[5] = "0.5 0.6".into();
        let bad_lambda = lines.join("\n");
        assert!(matches!(read_model(bad_lambda.as_bytes()), Err(Error::ModelFormat { line: 0, .. })));
        let extra = format!("{text}1 2\n");
        assert!(read_model(extra.as_bytes()).is_err());
    }
}
