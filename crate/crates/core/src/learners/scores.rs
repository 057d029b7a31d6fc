//! Score matrices: raw scores of a classifier pool on an evaluation set.
//!
//! Text format:
//!
//! ```text
//! # scores v1, P=<int>, m=<int>, mode=<iid|disjoint>, learner=<string>, seed=<int>
//! example_id,y,s_1,...,s_P
//! <id>,<0|1>,<score>,...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::bites::BiteMode;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMeta {
    pub m: usize,
    pub mode: BiteMode,
    pub learner: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    ids: Vec<String>,
    labels: Vec<u8>,
    /// Row-major, `rows x pool`.
    scores: Vec<f64>,
    pool: usize,
    pub meta: ScoreMeta,
}

impl ScoreMatrix {
    pub fn new(ids: Vec<String>, labels: Vec<u8>, scores: Vec<f64>, pool: usize, meta: ScoreMeta) -> Result<Self> {
        if pool == 0 {
            return Err(invalid("score matrix needs at least one classifier"));
        }
        if labels.is_empty() {
            return Err(invalid("score matrix needs at least one row"));
        }
        if ids.len() != labels.len() || scores.len() != labels.len() * pool {
            return Err(invalid(format!(
                "score matrix shape mismatch: {} ids, {} labels, {} scores for P={pool}",
                ids.len(),
                labels.len(),
                scores.len()
            )));
        }
        if let Some(pos) = scores.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite score in row {}", pos / pool)));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(invalid("labels must be 0 or 1"));
        }
        Ok(Self { ids, labels, scores, pool, meta })
    }

    /// Assembles a matrix from per-classifier columns.
    pub fn from_columns(ids: Vec<String>, labels: Vec<u8>, columns: &[Vec<f64>], meta: ScoreMeta) -> Result<Self> {
        let rows = labels.len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(invalid("every column must have one score per row"));
        }
        let pool = columns.len();
        let mut scores = vec![0.0; rows * pool];
        for (k, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                scores[i * pool + k] = v;
            }
        }
        Self::new(ids, labels, scores, pool, meta)
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn pool_size(&self) -> usize {
        self.pool
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.pool..(i + 1) * self.pool]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows()).map(|i| self.scores[i * self.pool + k]).collect()
    }

    /// The first `k` classifiers only.
    pub fn leading_columns(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.pool {
            return Err(invalid(format!("cannot take {k} of {} columns", self.pool)));
        }
        let scores = (0..self.rows()).flat_map(|i| self.row(i)[..k].iter().copied()).collect();
        Self::new(self.ids.clone(), self.labels.clone(), scores, k, self.meta.clone())
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() || cols.iter().any(|&c| c >= self.pool) {
            return Err(invalid("column selection out of range"));
        }
        let scores = (0..self.rows())
            .flat_map(|i| {
                let row = self.row(i);
                cols.iter().map(move |&c| row[c])
            })
            .collect();
        Self::new(self.ids.clone(), self.labels.clone(), scores, cols.len(), self.meta.clone())
    }

    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.rows() {
            return Err(invalid("row permutation has the wrong length"));
        }
        let ids = order.iter().map(|&i| self.ids[i].clone()).collect();
        let labels = order.iter().map(|&i| self.labels[i]).collect();
        let scores = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self::new(ids, labels, scores, self.pool, self.meta.clone())
    }
}

pub fn export_scores(matrix: &ScoreMatrix, path: &Path) -> Result<()> {
    export_scores_with_note(matrix, path, None)
}

/// Like [`export_scores`], with an extra `# note` line after the format header.
pub fn export_scores_with_note(matrix: &ScoreMatrix, path: &Path, note: Option<&str>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scores_with_note(matrix, note, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_scores<W: Write>(matrix: &ScoreMatrix, w: &mut W) -> Result<()> {
    write_scores_with_note(matrix, None, w)
}

pub fn write_scores_with_note<W: Write>(matrix: &ScoreMatrix, note: Option<&str>, w: &mut W) -> Result<()> {
    let meta = &matrix.meta;
    if note.is_some_and(|n| n.contains('\n')) {
        return Err(invalid("score file note must be a single line"));
    }
    if meta.learner.contains(',') || meta.learner.contains('\n') {
        return Err(invalid("learner description must not contain commas or newlines"));
    }
    writeln!(
        w,
        "# scores v1, P={}, m={}, mode={}, learner={}, seed={}",
        matrix.pool, meta.m, meta.mode, meta.learner, meta.seed
    )?;
    if let Some(note) = note {
        writeln!(w, "# {note}")?;
    }
    write!(w, "example_id,y")?;
    for k in 1..=matrix.pool {
        write!(w, ",s_{k}")?;
    }
    writeln!(w)?;
    for i in 0..matrix.rows() {
        write!(w, "{},{}", matrix.ids[i], matrix.labels[i])?;
        // shortest round-trip representation
        for v in matrix.row(i) {
            write!(w, ",{v:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn import_scores(path: &Path) -> Result<ScoreMatrix> {
    read_scores(BufReader::new(File::open(path)?))
}

pub fn read_scores<R: BufRead>(reader: R) -> Result<ScoreMatrix> {
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty score file".into()))?;
    let header = header?;
    let (pool, meta) = parse_header(&header).map_err(|msg| parse_err(1, msg))?;

    // further `#` lines before the column header are comments
    let (col_idx, columns) = loop {
        let (idx, line) = lines.next().ok_or_else(|| parse_err(2, "missing column header".into()))?;
        let line = line?;
        if !line.trim_start().starts_with('#') {
            break (idx, line);
        }
    };
    let expected: Vec<String> = ["example_id".to_string(), "y".to_string()]
        .into_iter()
        .chain((1..=pool).map(|k| format!("s_{k}")))
        .collect();
    let got: Vec<&str> = columns.trim().split(',').map(str::trim).collect();
    if got != expected {
        return Err(parse_err(col_idx + 1, format!("expected column header `example_id,y,s_1,...,s_{pool}`")));
    }

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let id = fields.next().unwrap().trim();
        let row = ids.len();
        let y: u8 = fields
            .next()
            .map(str::trim)
            .and_then(|s| s.parse().ok())
            .filter(|&y: &u8| y <= 1)
            .ok_or_else(|| parse_err(lineno, format!("row {row} (`{id}`): label must be 0 or 1")))?;
        let mut count = 0;
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("row {row} (`{id}`): non-numeric score `{}`", f.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("row {row} (`{id}`): non-finite score")));
            }
            scores.push(v);
            count += 1;
        }
        if count != pool {
            return Err(parse_err(lineno, format!("row {row} (`{id}`): expected {pool} scores, found {count}")));
        }
        ids.push(id.to_string());
        labels.push(y);
    }
    if ids.is_empty() {
        return Err(parse_err(col_idx + 1, "score file has no rows".into()));
    }
    ScoreMatrix::new(ids, labels, scores, pool, meta)
}

fn parse_header(line: &str) -> std::result::Result<(usize, ScoreMeta), String> {
    let rest = line
        .trim()
        .strip_prefix("# scores v1,")
        .ok_or_else(|| "expected header `# scores v1, P=..., m=..., mode=..., learner=..., seed=...`".to_string())?;
    let mut pool = None;
    let mut m = None;
    let mut mode = None;
    let mut learner = None;
    let mut seed = None;
    for part in rest.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| format!("malformed header field `{}`", part.trim()))?;
        let value = value.trim();
        let bad = |what: &str| format!("invalid {what} `{value}` in header");
        match key.trim() {
            "P" => pool = Some(value.parse::<usize>().map_err(|_| bad("P"))?),
            "m" => m = Some(value.parse::<usize>().map_err(|_| bad("m"))?),
            "mode" => mode = Some(value.parse::<BiteMode>().map_err(|_| bad("mode"))?),
            "learner" => learner = Some(value.to_string()),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
            other => return Err(format!("unknown header field `{other}`")),
        }
    }
    let missing = |k: &str| format!("header is missing `{k}`");
    let pool = pool.ok_or_else(|| missing("P"))?;
    if pool == 0 {
        return Err("P must be at least 1".into());
    }
    Ok((
        pool,
        ScoreMeta {
            m: m.ok_or_else(|| missing("m"))?,
            mode: mode.ok_or_else(|| missing("mode"))?,
            learner: learner.ok_or_else(|| missing("learner"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        },
    ))
}
