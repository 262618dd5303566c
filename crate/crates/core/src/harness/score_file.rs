//! Plain-text score samples: a header `# d=<int> K=<int> t=<float>` with an
//! optional `x0=<v1,v2,...>` token, then `K` lines of `d` comma-separated
//! decimals, one score vector per line.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSampleFile {
    pub t: f64,
    pub x0: Option<Vec<f64>>,
    /// `d×K`, one score vector per column.
    pub scores: DMatrix<f64>,
}

impl ScoreSampleFile {
    pub fn dim(&self) -> usize {
        self.scores.nrows()
    }

    pub fn probes(&self) -> usize {
        self.scores.ncols()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = write!(out, "# d={} K={} t={:?}", self.dim(), self.probes(), self.t);
        if let Some(x0) = &self.x0 {
            let vals: Vec<String> = x0.iter().map(|v| format!("{v:?}")).collect();
            let _ = write!(out, " x0={}", vals.join(","));
        }
        out.push('\n');
        for col in self.scores.column_iter() {
            let row: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedHeader {
            path: path.into(),
            reason,
        };
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((_, l)) => break l.trim(),
                None => return Err(malformed("file is empty".into())),
            }
        };
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| malformed(format!("expected `# d=.. K=.. t=..`, found `{header}`")))?;
        let (mut d, mut k, mut t, mut x0) = (None, None, None, None);
        for tok in body.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| malformed(format!("token `{tok}` is not key=value")))?;
            let bad = |what: &str| malformed(format!("cannot parse {what} from `{val}`"));
            match key {
                "d" => d = Some(val.parse::<usize>().map_err(|_| bad("d"))?),
                "K" => k = Some(val.parse::<usize>().map_err(|_| bad("K"))?),
                "t" => t = Some(val.parse::<f64>().map_err(|_| bad("t"))?),
                "x0" => {
                    let v: std::result::Result<Vec<f64>, _> = val.split(',').map(str::parse).collect();
                    x0 = Some(v.map_err(|_| bad("x0"))?);
                }
                other => return Err(malformed(format!("unknown header key `{other}`"))),
            }
        }
        let d = d.ok_or_else(|| malformed("missing d".into()))?;
        let k = k.ok_or_else(|| malformed("missing K".into()))?;
        let t = t.ok_or_else(|| malformed("missing t".into()))?;
        if d == 0 || k == 0 {
            return Err(malformed("d and K must be positive".into()));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(malformed(format!("t must be positive, got {t}")));
        }
        if let Some(x) = &x0 {
            if x.len() != d {
                return Err(malformed(format!("x0 has {} entries, expected {d}", x.len())));
            }
        }

        let mut values = Vec::with_capacity(d * k);
        let mut rows = 0usize;
        let mut last_line = 1;
        for (idx, line) in lines {
            let lineno = idx + 1;
            last_line = lineno;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if rows == k {
                return Err(Error::ShapeMismatch {
                    path: path.into(),
                    line: lineno,
                    reason: format!("more than K={k} score rows"),
                });
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d {
                return Err(Error::ShapeMismatch {
                    path: path.into(),
                    line: lineno,
                    reason: format!("expected {d} values, found {}", fields.len()),
                });
            }
            for (col, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    reason: format!("cannot parse `{}` as a number", f.trim()),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry {
                        path: path.into(),
                        line: lineno,
                        column: col + 1,
                    });
                }
                values.push(v);
            }
            rows += 1;
        }
        if rows < k {
            return Err(Error::Parse {
                path: path.into(),
                line: last_line + 1,
                reason: format!("file ends after {rows} of K={k} score rows"),
            });
        }
        Ok(ScoreSampleFile {
            t,
            x0,
            scores: DMatrix::from_vec(d, k, values),
        })
    }
}
