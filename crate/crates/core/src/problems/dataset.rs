//! Whitespace-separated dataset files.
//!
//! One sample per line with the label first. Lines starting with `#` are
//! comments; a header comment of `key=value` pairs records the generator
//! kind and shape, and an optional `# planted ...` line stores the planted
//! parameter vector.
//!
//! ```text
//! # sparse-vr kind=planted-sparse-ls n=3 d=2 seed=7
//! # planted 0 1.5
//! 1.5 -1 1
//! -1.5 1 -1
//! 1.5 1 1
//! ```
//!
//! Ratings files carry `users=`, `items=` in the header and lines of
//! `rating user item`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use super::{LeastSquares, Logistic, Matrix, MatrixFactorization, Mlp};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    GaussianLs,
    PlantedSparseLs,
    LogisticBlobs,
    LowRankRatings,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::GaussianLs,
        DatasetKind::PlantedSparseLs,
        DatasetKind::LogisticBlobs,
        DatasetKind::LowRankRatings,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::GaussianLs => "gaussian-ls",
            DatasetKind::PlantedSparseLs => "planted-sparse-ls",
            DatasetKind::LogisticBlobs => "logistic-blobs",
            DatasetKind::LowRankRatings => "low-rank-ratings",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown dataset kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    /// Labelled feature rows.
    Table { labels: Vec<f64>, features: Vec<Vec<f64>> },
    /// Observed `(user, item, rating)` triples.
    Ratings {
        users: usize,
        items: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub kind: Option<DatasetKind>,
    pub data: Data,
    /// Parameters that generated the data, when known.
    pub planted: Option<Vec<f64>>,
    /// Extra header fields (generator parameters, seed).
    pub meta: BTreeMap<String, String>,
}

impl Dataset {
    /// Number of samples (rows or observed ratings).
    pub fn n(&self) -> usize {
        match &self.data {
            Data::Table { labels, .. } => labels.len(),
            Data::Ratings { entries, .. } => entries.len(),
        }
    }

    /// Feature count for tables, `users + items` for ratings.
    pub fn width(&self) -> usize {
        match &self.data {
            Data::Table { features, .. } => features.first().map_or(0, Vec::len),
            Data::Ratings { users, items, .. } => users + items,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut header = self.meta.clone();
        if let Some(kind) = self.kind {
            header.insert("kind".into(), kind.to_string());
        }
        header.insert("n".into(), self.n().to_string());
        match &self.data {
            Data::Table { .. } => {
                header.insert("d".into(), self.width().to_string());
            }
            Data::Ratings { users, items, .. } => {
                header.insert("users".into(), users.to_string());
                header.insert("items".into(), items.to_string());
            }
        }
        out.push_str("# sparse-vr");
        for (k, v) in &header {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        if let Some(planted) = &self.planted {
            out.push_str("# planted");
            for v in planted {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        match &self.data {
            Data::Table { labels, features } => {
                for (y, row) in labels.iter().zip(features) {
                    let _ = write!(out, "{y}");
                    for v in row {
                        let _ = write!(out, " {v}");
                    }
                    out.push('\n');
                }
            }
            Data::Ratings { entries, .. } => {
                for (u, v, r) in entries {
                    let _ = writeln!(out, "{r} {u} {v}");
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut planted = None;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(rest) = comment.strip_prefix("planted") {
                    planted = Some(parse_numbers(rest, line_no)?);
                } else if let Some(rest) = comment.strip_prefix("sparse-vr") {
                    for pair in rest.split_whitespace() {
                        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Parse {
                            line: line_no,
                            message: format!("expected key=value, found `{pair}`"),
                        })?;
                        meta.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            rows.push((line_no, parse_numbers(trimmed, line_no)?));
        }

        let kind = meta.remove("kind").map(|k| k.parse()).transpose()?;
        let declared_n = meta.remove("n");
        let data = if kind == Some(DatasetKind::LowRankRatings) || meta.contains_key("users") {
            let users = take_usize(&mut meta, "users")?;
            let items = take_usize(&mut meta, "items")?;
            let mut entries = Vec::with_capacity(rows.len());
            for (line, row) in rows {
                if row.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        message: "ratings lines are `rating user item`".into(),
                    });
                }
                let (u, v) = (as_index(row[1], line)?, as_index(row[2], line)?);
                if u >= users || v >= items {
                    return Err(Error::Parse {
                        line,
                        message: format!("entry ({u}, {v}) outside {users} x {items}"),
                    });
                }
                entries.push((u, v, row[0]));
            }
            Data::Ratings { users, items, entries }
        } else {
            meta.remove("d");
            let width = rows.first().map_or(0, |r| r.1.len());
            if width < 2 {
                return Err(Error::Parse {
                    line: rows.first().map_or(0, |r| r.0),
                    message: "rows need a label and at least one feature".into(),
                });
            }
            let mut labels = Vec::with_capacity(rows.len());
            let mut features = Vec::with_capacity(rows.len());
            for (line, mut row) in rows {
                if row.len() != width {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {width} columns, found {}", row.len()),
                    });
                }
                labels.push(row[0]);
                row.remove(0);
                features.push(row);
            }
            Data::Table { labels, features }
        };
        let ds = Dataset {
            kind,
            data,
            planted,
            meta,
        };
        if let Some(n) = declared_n {
            if n.parse::<usize>().ok() != Some(ds.n()) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("header declares n={n} but {} samples follow", ds.n()),
                });
            }
        }
        if ds.n() == 0 {
            return Err(Error::Parse {
                line: 0,
                message: "dataset has no samples".into(),
            });
        }
        Ok(ds)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn table(&self) -> Result<(&[f64], &[Vec<f64>])> {
        match &self.data {
            Data::Table { labels, features } => Ok((labels, features)),
            Data::Ratings { .. } => Err(invalid("expected a feature table, found ratings")),
        }
    }

    fn design<T: Real>(&self) -> Result<Matrix<T>> {
        let (_, features) = self.table()?;
        let rows: Vec<Vec<T>> = features
            .iter()
            .map(|r| r.iter().map(|&v| T::cast_f64(v)).collect())
            .collect();
        Matrix::from_rows(&rows)
    }

    pub fn least_squares<T: Real>(&self, ridge: T) -> Result<LeastSquares<T>> {
        let (labels, _) = self.table()?;
        LeastSquares::new(self.design()?, labels.iter().map(|&v| T::cast_f64(v)).collect(), ridge)
    }

    pub fn logistic<T: Real>(&self, ridge: T) -> Result<Logistic<T>> {
        let (labels, _) = self.table()?;
        Logistic::new(self.design()?, labels.iter().map(|&v| T::cast_f64(v)).collect(), ridge)
    }

    /// Labels of -1/+1 map to classes 0/1; otherwise labels must be class indices.
    pub fn mlp<T: Real>(&self, hidden: &[usize], ridge: T) -> Result<Mlp<T>> {
        let (labels, features) = self.table()?;
        let binary = labels.iter().all(|&y| y == 1.0 || y == -1.0);
        let classes: Vec<usize> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if binary {
                    Ok(usize::from(y > 0.0))
                } else if y >= 0.0 && y.fract() == 0.0 {
                    Ok(y as usize)
                } else {
                    Err(invalid(format!("label {y} of sample {i} is not a class index")))
                }
            })
            .collect::<Result<_>>()?;
        let class_count = classes.iter().max().map_or(1, |m| m + 1).max(2);
        let mut layout = vec![features[0].len()];
        layout.extend_from_slice(hidden);
        layout.push(class_count);
        Mlp::new(layout, self.design()?, classes, ridge)
    }

    pub fn factorization<T: Real>(&self, rank: usize, ridge: T) -> Result<MatrixFactorization<T>> {
        match &self.data {
            Data::Ratings { users, items, entries } => MatrixFactorization::new(
                *users,
                *items,
                rank,
                entries.iter().map(|&(u, v, r)| (u, v, T::cast_f64(r))).collect(),
                ridge,
            ),
            Data::Table { .. } => Err(invalid("expected ratings, found a feature table")),
        }
    }
}

fn parse_numbers(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("`{tok}` is not a finite number"),
                })
        })
        .collect()
}

fn as_index(v: f64, line: usize) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Parse {
            line,
            message: format!("`{v}` is not an index"),
        })
    }
}

fn take_usize(meta: &mut BTreeMap<String, String>, key: &str) -> Result<usize> {
    meta.remove(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("ratings header needs `{key}=<count>`"),
        })
}
