//! Market sequences: synthetic generators, an adaptive adversary and CSV
//! ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::barrier::validate_return;
use crate::error::{Error, Result};
use crate::geometry::Portfolio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Csv,
}

/// A pre-generated (oblivious) sequence of return vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSequence {
    d: usize,
    rounds: Vec<Vec<f64>>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl MarketSequence {
    pub fn new(
        d: usize,
        rounds: Vec<Vec<f64>>,
        provenance: Provenance,
        seed: Option<u64>,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::UnsupportedDimension {
                d,
                reason: "at least two assets are required",
            });
        }
        for x in &rounds {
            validate_return(x, d)?;
        }
        Ok(MarketSequence {
            d,
            rounds,
            provenance,
            seed,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn rounds(&self) -> &[Vec<f64>] {
        &self.rounds
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

/// An adversary that picks `x_t` after seeing `w_t`.
pub trait Adversary {
    fn d(&self) -> usize;
    fn next_return(&mut self, w: &Portfolio) -> Result<Vec<f64>>;
}

/// Basis vector of the smallest entry of `w` (lowest index on ties).
pub fn gen_worst_coordinate(w: &Portfolio) -> Vec<f64> {
    let ws = w.weights();
    let mut arg = 0;
    for (i, &wi) in ws.iter().enumerate() {
        if wi < ws[arg] {
            arg = i;
        }
    }
    let mut x = vec![0.0; ws.len()];
    x[arg] = 1.0;
    x
}

/// Plays [`gen_worst_coordinate`] every round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorstCoordinate {
    pub d: usize,
}

impl Adversary for WorstCoordinate {
    fn d(&self) -> usize {
        self.d
    }

    fn next_return(&mut self, w: &Portfolio) -> Result<Vec<f64>> {
        if w.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: w.dim(),
            });
        }
        Ok(gen_worst_coordinate(w))
    }
}

/// Entries i.i.d. `exp(N(0, vol^2))`.
pub fn gen_iid_lognormal(d: usize, horizon: usize, vol: f64, seed: u64) -> Result<MarketSequence> {
    if !(vol >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "volatility must be >= 0, got {vol}"
        )));
    }
    let normal = Normal::new(0.0, vol)
        .map_err(|e| Error::InvalidParameter(format!("volatility {vol}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rounds = (0..horizon)
        .map(|_| (0..d).map(|_| normal.sample(&mut rng).exp()).collect())
        .collect();
    MarketSequence::new(d, rounds, Provenance::Synthetic, Some(seed))
}

/// Alternates `(2, 1/2)` and `(1/2, 2)`.
pub fn gen_two_asset_switch(horizon: usize) -> Result<MarketSequence> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let rounds = (0..horizon)
        .map(|t| {
            if t % 2 == 0 {
                vec![2.0, 0.5]
            } else {
                vec![0.5, 2.0]
            }
        })
        .collect();
    MarketSequence::new(2, rounds, Provenance::Synthetic, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsvMode {
    /// Each row is a return vector.
    Returns,
    /// Each row is a price vector; consecutive ratios give the returns.
    Prices,
}

/// Loads a comma-separated market file. `has_header: None` treats the first
/// row as a header exactly when one of its fields is not a number.
pub fn load_csv(path: &Path, mode: CsvMode, has_header: Option<bool>) -> Result<MarketSequence> {
    let file = File::open(path)?;
    parse_csv(file, mode, has_header)
}

/// [`load_csv`] over any reader. Rows and columns in errors are 1-based
/// positions in the file.
pub fn parse_csv<R: Read>(
    reader: R,
    mode: CsvMode,
    has_header: Option<bool>,
) -> Result<MarketSequence> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::ParseError {
            row,
            col: 0,
            msg: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        if idx == 0 {
            let numeric = parsed.iter().all(|p| p.is_ok());
            if has_header.unwrap_or(!numeric) {
                continue;
            }
        }
        let mut values = Vec::with_capacity(parsed.len());
        for (c, p) in parsed.into_iter().enumerate() {
            match p {
                Ok(v) => values.push(v),
                Err(e) => {
                    return Err(Error::ParseError {
                        row,
                        col: c + 1,
                        msg: format!("`{}`: {e}", &record[c]),
                    })
                }
            }
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::InconsistentWidth {
                    row,
                    expected: w,
                    got: values.len(),
                })
            }
            _ => {}
        }
        rows.push((row, values));
    }
    let d = width.ok_or_else(|| Error::InvalidReturn("file has no data rows".into()))?;
    let located = |row: usize, e: Error| match e {
        Error::InvalidReturn(msg) => Error::InvalidReturn(format!("row {row}: {msg}")),
        other => other,
    };
    let returns = match mode {
        CsvMode::Returns => {
            for (row, x) in &rows {
                validate_return(x, d).map_err(|e| located(*row, e))?;
            }
            rows.into_iter().map(|(_, x)| x).collect()
        }
        CsvMode::Prices => {
            for (row, p) in &rows {
                if let Some(bad) = p.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidReturn(format!(
                        "row {row}: nonpositive price {bad}"
                    )));
                }
            }
            let mut out = Vec::with_capacity(rows.len().saturating_sub(1));
            for pair in rows.windows(2) {
                let x: Vec<f64> = pair[1]
                    .1
                    .iter()
                    .zip(&pair[0].1)
                    .map(|(a, b)| a / b)
                    .collect();
                validate_return(&x, d).map_err(|e| located(pair[1].0, e))?;
                out.push(x);
            }
            out
        }
    };
    if returns.is_empty() {
        return Err(Error::InvalidReturn("file yields no rounds".into()));
    }
    MarketSequence::new(d, returns, Provenance::Csv, None)
}
