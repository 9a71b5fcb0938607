//! Panel data model and file ingestion.
//!
//! A [`FunctionalPanel`] holds observations `X_i(j/N)` in `R^p` on the
//! regular lattice `u_j = j/N`, `i = 1..n`. Storage is time-major, then
//! grid, then dimension, so all lag-k products at a fixed grid point stream
//! contiguously. Panels are immutable after construction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelFormat {
    LongCsv,
    Ndjson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalPanel {
    n: usize,
    num_grid: usize,
    p: usize,
    values: Vec<f64>,
}

impl FunctionalPanel {
    /// Build a panel from time-major values (`len == n * num_grid * p`).
    ///
    /// Rejects empty shapes and non-finite entries. The stricter size
    /// requirements of the test itself (n >= 8, N >= 2) are checked when a
    /// test is run, not here, so that small panels remain serializable.
    pub fn from_values(n: usize, num_grid: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || num_grid == 0 || p == 0 {
            return Err(Error::InconsistentShape(format!(
                "empty panel shape n={n}, N={num_grid}, p={p}"
            )));
        }
        if values.len() != n * num_grid * p {
            return Err(Error::InconsistentShape(format!(
                "expected {} values, got {}",
                n * num_grid * p,
                values.len()
            )));
        }
        for (pos, v) in values.iter().enumerate() {
            if !v.is_finite() {
                let d = pos % p;
                let j = (pos / p) % num_grid;
                let i = pos / (p * num_grid);
                return Err(Error::NonFiniteValue {
                    i: i + 1,
                    j: j + 1,
                    d: d + 1,
                });
            }
        }
        Ok(Self {
            n,
            num_grid,
            p,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points N on [0, 1]; u_j = j/N.
    pub fn num_grid(&self) -> usize {
        self.num_grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, d: usize) -> usize {
        (i * self.num_grid + j) * self.p + d
    }

    /// Value at 0-based (time, grid, dim).
    #[inline]
    pub fn value(&self, i: usize, j: usize, d: usize) -> f64 {
        self.values[self.index(i, j, d)]
    }

    /// The p-vector at 0-based (time, grid).
    #[inline]
    pub fn curve(&self, i: usize, j: usize) -> &[f64] {
        let base = self.index(i, j, 0);
        &self.values[base..base + self.p]
    }

    /// Full row of time i: N*p values, grid-major.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.num_grid * self.p;
        &self.values[i * w..(i + 1) * w]
    }

    /// Checks the size requirements of the white-noise test.
    pub fn check_testable(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::ConfigInfeasible(format!(
                "need n >= 8 time points for the test, got {}",
                self.n
            )));
        }
        if self.num_grid < 2 {
            return Err(Error::ConfigInfeasible(format!(
                "need N >= 2 grid points for the test, got {}",
                self.num_grid
            )));
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, out: W, format: PanelFormat) -> Result<()> {
        match format {
            PanelFormat::LongCsv => self.save_csv(out),
            PanelFormat::Ndjson => self.save_ndjson(out),
        }
    }

    pub fn load<R: Read>(input: R, format: PanelFormat) -> Result<Self> {
        match format {
            PanelFormat::LongCsv => Self::load_csv(input),
            PanelFormat::Ndjson => Self::load_ndjson(input),
        }
    }

    fn save_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,grid,dim,value")?;
        for i in 0..self.n {
            for j in 0..self.num_grid {
                for d in 0..self.p {
                    // 17 significant digits: decimal round-trips to the same bits
                    writeln!(
                        out,
                        "{},{},{},{:.16e}",
                        i + 1,
                        j + 1,
                        d + 1,
                        self.value(i, j, d)
                    )?;
                }
            }
        }
        Ok(())
    }

    fn load_csv<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut cells: Vec<(usize, usize, usize, f64)> = Vec::new();
        let (mut max_i, mut max_j, mut max_d) = (0usize, 0usize, 0usize);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                let header: Vec<&str> = line.split(',').map(str::trim).collect();
                if header.len() < 4
                    || header[0] != "time"
                    || header[1] != "grid"
                    || header[2] != "dim"
                    || header[3] != "value"
                {
                    return Err(Error::MalformedRecord {
                        line: 1,
                        msg: format!("expected header `time,grid,dim,value`, got `{line}`"),
                    });
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 4 {
                return Err(Error::MalformedRecord {
                    line: lineno + 1,
                    msg: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse_idx = |s: &str, what: &str| -> Result<usize> {
                s.parse::<usize>().map_err(|_| Error::MalformedRecord {
                    line: lineno + 1,
                    msg: format!("bad {what} index `{s}`"),
                })
            };
            let i = parse_idx(fields[0], "time")?;
            let j = parse_idx(fields[1], "grid")?;
            let d = parse_idx(fields[2], "dim")?;
            if i == 0 || j == 0 || d == 0 {
                return Err(Error::MalformedRecord {
                    line: lineno + 1,
                    msg: "indices are 1-based".into(),
                });
            }
            let v: f64 = fields[3].parse().map_err(|_| Error::MalformedRecord {
                line: lineno + 1,
                msg: format!("bad value `{}`", fields[3]),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { i, j, d });
            }
            max_i = max_i.max(i);
            max_j = max_j.max(j);
            max_d = max_d.max(d);
            cells.push((i, j, d, v));
        }
        Self::assemble(max_i, max_j, max_d, cells)
    }

    fn save_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.n {
            let curves: Vec<&[f64]> = (0..self.num_grid).map(|j| self.curve(i, j)).collect();
            let obj = serde_json::json!({ "i": i + 1, "curves": curves });
            writeln!(out, "{obj}")?;
        }
        Ok(())
    }

    fn load_ndjson<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            i: usize,
            curves: Vec<Vec<f64>>,
        }
        let reader = BufReader::new(input);
        let mut cells: Vec<(usize, usize, usize, f64)> = Vec::new();
        let (mut max_i, mut max_j, mut max_d) = (0usize, 0usize, 0usize);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
            if rec.i == 0 {
                return Err(Error::MalformedRecord {
                    line: lineno + 1,
                    msg: "time index is 1-based".into(),
                });
            }
            for (j0, curve) in rec.curves.iter().enumerate() {
                for (d0, &v) in curve.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::NonFiniteValue {
                            i: rec.i,
                            j: j0 + 1,
                            d: d0 + 1,
                        });
                    }
                    max_i = max_i.max(rec.i);
                    max_j = max_j.max(j0 + 1);
                    max_d = max_d.max(d0 + 1);
                    cells.push((rec.i, j0 + 1, d0 + 1, v));
                }
            }
        }
        Self::assemble(max_i, max_j, max_d, cells)
    }

    /// Checks that the (i, j, d) index set is exactly the full lattice.
    fn assemble(
        n: usize,
        num_grid: usize,
        p: usize,
        cells: Vec<(usize, usize, usize, f64)>,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InconsistentShape("no data rows".into()));
        }
        let total = n * num_grid * p;
        if cells.len() != total {
            return Err(Error::InconsistentShape(format!(
                "got {} cells but lattice {}x{}x{} needs {}",
                cells.len(),
                n,
                num_grid,
                p,
                total
            )));
        }
        let mut values = vec![f64::NAN; total];
        let mut seen = vec![false; total];
        for (i, j, d, v) in cells {
            let pos = ((i - 1) * num_grid + (j - 1)) * p + (d - 1);
            if seen[pos] {
                return Err(Error::InconsistentShape(format!(
                    "duplicate cell (time {i}, grid {j}, dim {d})"
                )));
            }
            seen[pos] = true;
            values[pos] = v;
        }
        // every max-bounded index combination must be present exactly once
        if let Some(pos) = seen.iter().position(|&s| !s) {
            let d = pos % p;
            let j = (pos / p) % num_grid;
            let i = pos / (p * num_grid);
            return Err(Error::InconsistentShape(format!(
                "missing cell (time {}, grid {}, dim {})",
                i + 1,
                j + 1,
                d + 1
            )));
        }
        Self::from_values(n, num_grid, p, values)
    }
}

/// Residuals after mean removal; same shape as the source panel.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel(pub FunctionalPanel);

impl ResidualPanel {
    pub fn n(&self) -> usize {
        self.0.n()
    }
    pub fn num_grid(&self) -> usize {
        self.0.num_grid()
    }
    pub fn p(&self) -> usize {
        self.0.p()
    }
    #[inline]
    pub fn curve(&self, i: usize, j: usize) -> &[f64] {
        self.0.curve(i, j)
    }
    #[inline]
    pub fn value(&self, i: usize, j: usize, d: usize) -> f64 {
        self.0.value(i, j, d)
    }
}
