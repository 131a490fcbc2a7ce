//! Observed-data model: sampling design, validated micro-data, and 2×2 count
//! tables.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome-based sampling scheme that produced the observed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Design {
    /// Cases and controls drawn from the Y*=1 and Y*=0 subpopulations.
    CaseControl,
    /// Cases drawn from Y*=1; the "control" stratum is drawn from the whole
    /// population.
    CasePopulation,
}

impl std::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cc" | "case-control" | "casecontrol" | "1" => Ok(Design::CaseControl),
            "cp" | "case-population" | "casepopulation" | "2" => Ok(Design::CasePopulation),
            other => Err(Error::InvalidArgument(format!("unknown design `{other}`"))),
        }
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Design::CaseControl => f.write_str("case-control"),
            Design::CasePopulation => f.write_str("case-population"),
        }
    }
}

/// Probability that a sampled unit comes from the case stratum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum H0 {
    Known(f64),
    /// Replace with the sample share of cases.
    Estimate,
}

/// A validated sample of (Y, T, X) rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    y: Vec<u8>,
    t: Vec<u8>,
    x: DMatrix<f64>,
    covariate_names: Vec<String>,
    y_name: String,
    t_name: String,
    h0: f64,
    h0_estimated: bool,
    design: Design,
}

impl ObservedDataset {
    /// Builds a dataset from already-parsed columns. `x` is n×K.
    pub fn new(
        y: Vec<u8>,
        t: Vec<u8>,
        x: DMatrix<f64>,
        covariate_names: Vec<String>,
        design: Design,
        h0: H0,
    ) -> Result<Self> {
        let n = y.len();
        if t.len() != n || x.nrows() != n {
            return Err(Error::InvalidArgument(format!(
                "column lengths differ: y={}, t={}, x={}",
                n,
                t.len(),
                x.nrows()
            )));
        }
        if covariate_names.len() != x.ncols() {
            return Err(Error::InvalidArgument(
                "covariate name count does not match matrix width".into(),
            ));
        }
        if let Some(i) = y.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryOutcome {
                row: i + 1,
                value: y[i].to_string(),
            });
        }
        if let Some(i) = t.iter().position(|&v| v > 1) {
            return Err(Error::NonBinaryTreatment {
                row: i + 1,
                value: t[i].to_string(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("covariates must be finite".into()));
        }
        let cases = y.iter().filter(|&&v| v == 1).count();
        if cases == 0 {
            return Err(Error::EmptyStratum(1));
        }
        if cases == n {
            return Err(Error::EmptyStratum(0));
        }
        let (h0, h0_estimated) = match h0 {
            H0::Known(h) => {
                if !(h > 0.0 && h < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "h0 must lie in (0,1), got {h}"
                    )));
                }
                (h, false)
            }
            H0::Estimate => (cases as f64 / n as f64, true),
        };
        Ok(Self {
            y,
            t,
            x,
            covariate_names,
            y_name: "y".into(),
            t_name: "t".into(),
            h0,
            h0_estimated,
            design,
        })
    }

    pub fn with_column_names(mut self, y_name: &str, t_name: &str) -> Self {
        self.y_name = y_name.to_string();
        self.t_name = t_name.to_string();
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_cases(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn t(&self) -> &[u8] {
        &self.t
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn h0_estimated(&self) -> bool {
        self.h0_estimated
    }

    pub fn design(&self) -> Design {
        self.design
    }

    /// Row indices belonging to stratum `y`.
    pub fn stratum(&self, y: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.y[i] == y).collect()
    }

    /// Dataset made of the given rows (with repetition). A sample-estimated
    /// h0 is re-estimated on the new rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let y: Vec<u8> = rows.iter().map(|&i| self.y[i]).collect();
        let t: Vec<u8> = rows.iter().map(|&i| self.t[i]).collect();
        let x = self.x.select_rows(rows);
        let h0 = if self.h0_estimated {
            H0::Estimate
        } else {
            H0::Known(self.h0)
        };
        Ok(
            Self::new(y, t, x, self.covariate_names.clone(), self.design, h0)?
                .with_column_names(&self.y_name, &self.t_name),
        )
    }

    /// 2×2 table of (Y, T) counts, ignoring covariates.
    pub fn count_table(&self) -> CountTable2x2 {
        let mut n = [[0u64; 2]; 2];
        for (&y, &t) in self.y.iter().zip(&self.t) {
            n[y as usize][t as usize] += 1;
        }
        CountTable2x2 { n }
    }

    /// Writes the dataset with the same column layout it was read with.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.y_name.clone(), self.t_name.clone()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![self.y[i].to_string(), self.t[i].to_string()];
            rec.extend((0..self.n_covariates()).map(|j| format_real(self.x[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_real(v: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{v:?}")
}

/// Which CSV columns hold the outcome, the treatment and the covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub y: String,
    pub t: String,
    /// `None` takes every remaining column, in file order.
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            y: "y".into(),
            t: "t".into(),
            covariates: None,
        }
    }
}

/// Result of ingestion: the validated dataset plus the 1-based indices of data
/// rows dropped for missing fields.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: ObservedDataset,
    pub dropped_rows: Vec<usize>,
}

fn is_missing(field: &str) -> bool {
    matches!(
        field.trim(),
        "" | "NA" | "na" | "NaN" | "nan" | "." | "null" | "NULL"
    )
}

pub fn ingest_csv(
    path: impl AsRef<Path>,
    schema: &CsvSchema,
    design: Design,
    h0: H0,
) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schema, design, h0)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    schema: &CsvSchema,
    design: Design,
    h0: H0,
) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let yi = find(&schema.y)?;
    let ti = find(&schema.t)?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(c) => c.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != yi && i != ti)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_idx = cov_names
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let used = std::iter::once(yi)
            .chain(std::iter::once(ti))
            .chain(cov_idx.iter().copied());
        if used.clone().any(|i| rec.get(i).is_none_or(is_missing)) {
            dropped.push(row);
            continue;
        }
        let yv = rec[yi].trim();
        y.push(match yv {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(Error::NonBinaryOutcome {
                    row,
                    value: yv.to_string(),
                })
            }
        });
        let tv = rec[ti].trim();
        t.push(match tv {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(Error::NonBinaryTreatment {
                    row,
                    value: tv.to_string(),
                })
            }
        });
        for (&ci, name) in cov_idx.iter().zip(&cov_names) {
            let v: f64 = rec[ci].trim().parse().map_err(|_| Error::ParseValue {
                row,
                column: name.clone(),
                value: rec[ci].to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::ParseValue {
                    row,
                    column: name.clone(),
                    value: rec[ci].to_string(),
                });
            }
            xs.push(v);
        }
    }
    let k = cov_names.len();
    let x = DMatrix::from_row_slice(y.len(), k, &xs);
    let dataset = ObservedDataset::new(y, t, x, cov_names, design, h0)?
        .with_column_names(&schema.y, &schema.t);
    Ok(Ingested {
        dataset,
        dropped_rows: dropped,
    })
}

/// Counts `n[y][t]` of a binary outcome by binary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable2x2 {
    pub n: [[u64; 2]; 2],
}

impl CountTable2x2 {
    /// Cells given in reading order: (y0t0, y0t1, y1t0, y1t1).
    pub fn new(y0t0: u64, y0t1: u64, y1t0: u64, y1t1: u64) -> Self {
        Self {
            n: [[y0t0, y0t1], [y1t0, y1t1]],
        }
    }

    /// Swaps the roles of the row and column variables.
    pub fn transpose(&self) -> Self {
        let n = self.n;
        Self {
            n: [[n[0][0], n[1][0]], [n[0][1], n[1][1]]],
        }
    }

    pub fn total(&self) -> u64 {
        self.n.iter().flatten().sum()
    }

    /// Expands counts into one row per unit, with no covariates.
    pub fn to_dataset(&self, design: Design, h0: H0) -> Result<ObservedDataset> {
        let mut y = Vec::new();
        let mut t = Vec::new();
        for yy in 0..2u8 {
            for tt in 0..2u8 {
                for _ in 0..self.n[yy as usize][tt as usize] {
                    y.push(yy);
                    t.push(tt);
                }
            }
        }
        let n = y.len();
        ObservedDataset::new(y, t, DMatrix::zeros(n, 0), Vec::new(), design, h0)
    }
}

/// Cross-product ratio n11·n00 / (n01·n10). Equal to the prospective and the
/// retrospective odds ratio of the table.
pub fn odds_ratio_2x2(table: &CountTable2x2) -> Result<f64> {
    let n = table.n;
    if n.iter().flatten().any(|&c| c == 0) {
        return Err(Error::ZeroCell);
    }
    Ok((n[1][1] as f64 * n[0][0] as f64) / (n[0][1] as f64 * n[1][0] as f64))
}
