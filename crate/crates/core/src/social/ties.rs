use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise tie strengths over `M` users: nonnegative, zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialTieMatrix {
    n: usize,
    z: Vec<f64>,
}

impl SocialTieMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, z: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut z = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                z.push(if i == j { 0.0 } else { f(i, j) });
            }
        }
        Self::validated(n, z)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut z = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            z.extend_from_slice(row);
        }
        Self::validated(n, z)
    }

    fn validated(n: usize, z: Vec<f64>) -> Result<Self> {
        for i in 0..n {
            for j in 0..n {
                let v = z[i * n + j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidInput(format!("tie z[{i}][{j}] = {v} must be finite and nonnegative")));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidInput(format!("tie matrix diagonal z[{i}][{i}] = {v} must be zero")));
                }
            }
        }
        Ok(Self { n, z })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn max(&self) -> f64 {
        self.z.iter().copied().fold(0.0, f64::max)
    }

    /// Restriction to `ids` (in the given order).
    pub fn submatrix(&self, ids: &[usize]) -> Self {
        let n = ids.len();
        let mut z = Vec::with_capacity(n * n);
        for &a in ids {
            for &b in ids {
                z.push(self.get(a, b));
            }
        }
        Self { n, z }
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::validated(self.n, self.z.iter().map(|v| v * k).collect())
    }

    /// CSV with a header row of user ids followed by `M` rows of `M`
    /// values. Values use the shortest representation that round-trips.
    pub fn to_csv(&self, ids: &[u64]) -> Result<String> {
        if ids.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: ids.len() });
        }
        let mut out = String::new();
        let header: Vec<String> = ids.iter().map(u64::to_string).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path, ids: &[u64]) -> Result<()> {
        std::fs::write(path, self.to_csv(ids)?).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<(Vec<u64>, Self)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<(Vec<u64>, Self)> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Ok((Vec::new(), Self::zeros(0)));
        };
        let ids = header
            .split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, 1, format!("bad user id in header: {e}")))?;
        let mut rows = Vec::with_capacity(ids.len());
        for (lineno, line) in lines {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
            if row.len() != ids.len() {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("expected {} columns, found {}", ids.len(), row.len()),
                ));
            }
            rows.push(row);
        }
        if rows.len() != ids.len() {
            return Err(Error::parse(path, rows.len() + 1, format!("expected {} rows, found {}", ids.len(), rows.len())));
        }
        let m = Self::from_rows(&rows).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok((ids, m))
    }
}
