use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Examples with binary labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    d: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, d: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(invalid("dataset needs at least one example"));
        }
        if d == 0 {
            return Err(invalid("feature dimension must be positive"));
        }
        if features.len() != labels.len() * d {
            return Err(invalid(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                labels.len(),
                d
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(invalid(format!("labels must be 0 or 1, found {bad}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(invalid("features must be finite"));
        }
        Ok(Self { features, labels, d })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Writes `y,x_1,...,x_d` rows after an optional comment line.
    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        let header: Vec<String> = std::iter::once("y".to_string())
            .chain((1..=self.d).map(|j| format!("x_{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n() {
            write!(w, "{}", self.labels[i])?;
            for v in self.x(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut d = None;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if d.is_none() {
                let cols = trimmed.split(',').count();
                if cols < 2 {
                    return Err(Error::Parse { line: lineno, msg: "expected `y,x_1,...`".into() });
                }
                d = Some(cols - 1);
                continue;
            }
            let d = d.unwrap();
            let mut fields = trimmed.split(',');
            let y: u8 = fields
                .next()
                .and_then(|s| s.trim().parse().ok())
                .filter(|&y: &u8| y <= 1)
                .ok_or_else(|| Error::Parse { line: lineno, msg: "label must be 0 or 1".into() })?;
            let before = features.len();
            for f in fields {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("non-numeric feature `{f}`"),
                })?;
                features.push(v);
            }
            if features.len() - before != d {
                return Err(Error::Parse { line: lineno, msg: format!("expected {d} features") });
            }
            labels.push(y);
        }
        let d = d.ok_or_else(|| Error::Parse { line: 0, msg: "empty dataset file".into() })?;
        Self::new(features, labels, d)
    }
}
