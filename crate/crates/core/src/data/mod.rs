//! Case-control datasets: typed exposures, covariates and optional sampling
//! weights, plus CSV ingestion and a per-stratum summary.

mod io;
mod schema;
mod summary;

pub use io::{load_dataset, read_dataset, write_dataset};
pub use schema::{ColumnSpec, Schema};
pub use summary::{summarize, ExposureSummary, LevelCount, Moments, StratumSummary, Summary};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Measurement type of an exposure. Declared in the schema, never inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum ExposureKind {
    Binary,
    /// Levels `0..levels`, with 0 the reference level.
    Categorical { levels: usize },
    Count,
    Continuous,
}

impl ExposureKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, ExposureKind::Continuous)
    }

    /// Checks a single value against the kind's support.
    pub fn admits(self, value: f64) -> std::result::Result<(), String> {
        if !value.is_finite() {
            return Err(format!("non-finite value {value}"));
        }
        match self {
            ExposureKind::Binary if value != 0.0 && value != 1.0 => {
                Err(format!("binary exposure has value {value}"))
            }
            ExposureKind::Categorical { levels } => {
                if value.fract() != 0.0 || value < 0.0 || value >= levels as f64 {
                    Err(format!("categorical exposure value {value} outside 0..{levels}"))
                } else {
                    Ok(())
                }
            }
            ExposureKind::Count if value.fract() != 0.0 || value < 0.0 => {
                Err(format!("count exposure has value {value}"))
            }
            _ => Ok(()),
        }
    }

    fn validate(self) -> Result<()> {
        if let ExposureKind::Categorical { levels } = self {
            if levels < 2 {
                return Err(Error::Schema(format!(
                    "categorical exposure needs at least 2 levels, got {levels}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ExposureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExposureKind::Binary => write!(f, "binary"),
            ExposureKind::Categorical { levels } => write!(f, "categorical:{levels}"),
            ExposureKind::Count => write!(f, "count"),
            ExposureKind::Continuous => write!(f, "continuous"),
        }
    }
}

impl FromStr for ExposureKind {
    type Err = Error;

    /// Accepts `binary`, `count`, `continuous`, `categorical:K` and
    /// `categorical(K)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let kind = match s.as_str() {
            "binary" => ExposureKind::Binary,
            "count" => ExposureKind::Count,
            "continuous" => ExposureKind::Continuous,
            other => {
                let levels = other
                    .strip_prefix("categorical")
                    .map(|rest| rest.trim_start_matches([':', '(']).trim_end_matches(')'))
                    .and_then(|k| k.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::Schema(format!("unknown exposure kind '{s}'")))?;
                ExposureKind::Categorical { levels }
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// One exposure column with its declared kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub name: String,
    pub kind: ExposureKind,
    pub values: Vec<f64>,
}

impl Exposure {
    pub fn new(name: impl Into<String>, kind: ExposureKind, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind,
            values,
        }
    }
}

/// Immutable case-control dataset. Construct through [`Dataset::new`], which
/// enforces every invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    outcome_name: String,
    d: Vec<u8>,
    a1: Exposure,
    a2: Exposure,
    covariate_names: Vec<String>,
    // row-major n x p
    x: Vec<f64>,
    weight_name: Option<String>,
    w: Option<Vec<f64>>,
}

impl Dataset {
    /// `covariates` holds one `(name, column)` pair per covariate.
    pub fn new(
        outcome_name: impl Into<String>,
        d: Vec<u8>,
        a1: Exposure,
        a2: Exposure,
        covariates: Vec<(String, Vec<f64>)>,
        weights: Option<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no records".into()));
        }
        a1.kind.validate()?;
        a2.kind.validate()?;
        for (name, len) in [(&a1.name, a1.values.len()), (&a2.name, a2.values.len())]
            .into_iter()
            .chain(covariates.iter().map(|(nm, c)| (nm, c.len())))
            .chain(weights.iter().map(|(nm, w)| (nm, w.len())))
        {
            if len != n {
                return Err(Error::InvalidData(format!(
                    "column '{name}' has {len} entries, outcome has {n}"
                )));
            }
        }
        for (i, &di) in d.iter().enumerate() {
            if di > 1 {
                return Err(Error::Validation {
                    row: i + 1,
                    message: format!("outcome must be 0 or 1, got {di}"),
                });
            }
        }
        for exposure in [&a1, &a2] {
            for (i, &v) in exposure.values.iter().enumerate() {
                exposure.kind.admits(v).map_err(|message| Error::Validation {
                    row: i + 1,
                    message: format!("column '{}': {message}", exposure.name),
                })?;
            }
        }
        let p = covariates.len();
        let mut x = vec![0.0; n * p];
        for (j, (name, col)) in covariates.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Validation {
                        row: i + 1,
                        message: format!("covariate '{name}' is not finite"),
                    });
                }
                x[i * p + j] = v;
            }
        }
        if let Some((name, w)) = &weights {
            for (i, &wi) in w.iter().enumerate() {
                if !(wi.is_finite() && wi > 0.0) {
                    return Err(Error::Validation {
                        row: i + 1,
                        message: format!("weight '{name}' must be positive, got {wi}"),
                    });
                }
            }
        }
        let (weight_name, w) = match weights {
            Some((name, w)) => (Some(name), Some(w)),
            None => (None, None),
        };
        Ok(Self {
            outcome_name: outcome_name.into(),
            d,
            a1,
            a2,
            covariate_names: covariates.into_iter().map(|(name, _)| name).collect(),
            x,
            weight_name,
            w,
        })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    pub fn d(&self) -> &[u8] {
        &self.d
    }

    pub fn is_case(&self, i: usize) -> bool {
        self.d[i] == 1
    }

    pub fn a1(&self) -> &Exposure {
        &self.a1
    }

    pub fn a2(&self) -> &Exposure {
        &self.a2
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Covariate row `i` (length `n_covariates`).
    pub fn x_row(&self, i: usize) -> &[f64] {
        let p = self.n_covariates();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn covariate_column(&self, j: usize) -> Vec<f64> {
        let p = self.n_covariates();
        (0..self.n()).map(|i| self.x[i * p + j]).collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn weight_name(&self) -> Option<&str> {
        self.weight_name.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.w.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn n_cases(&self) -> usize {
        self.d.iter().filter(|&&d| d == 1).count()
    }

    pub fn n_controls(&self) -> usize {
        self.n() - self.n_cases()
    }

    /// Test operations need at least one case and one control.
    pub fn require_both_strata(&self) -> Result<()> {
        let cases = self.n_cases();
        if cases == 0 || cases == self.n() {
            return Err(Error::InvalidData(format!(
                "dataset needs both cases and controls (cases = {cases}, controls = {})",
                self.n() - cases
            )));
        }
        Ok(())
    }

    /// New dataset built from the given rows (repeats allowed), preserving
    /// column metadata.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let p = self.n_covariates();
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut x = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            x.extend_from_slice(self.x_row(i));
        }
        Dataset {
            outcome_name: self.outcome_name.clone(),
            d: rows.iter().map(|&i| self.d[i]).collect(),
            a1: Exposure::new(self.a1.name.clone(), self.a1.kind, pick(&self.a1.values)),
            a2: Exposure::new(self.a2.name.clone(), self.a2.kind, pick(&self.a2.values)),
            covariate_names: self.covariate_names.clone(),
            x,
            weight_name: self.weight_name.clone(),
            w: self.w.as_ref().map(|w| pick(w)),
        }
    }

    /// Keeps only the named covariates, in the given order.
    pub fn with_covariates(&self, names: &[String]) -> Result<Dataset> {
        let idx = names
            .iter()
            .map(|nm| {
                self.covariate_index(nm)
                    .ok_or_else(|| Error::Schema(format!("unknown covariate '{nm}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let p = idx.len();
        let mut x = Vec::with_capacity(self.n() * p);
        for i in 0..self.n() {
            let row = self.x_row(i);
            x.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(Dataset {
            covariate_names: names.to_vec(),
            x,
            ..self.clone()
        })
    }

    /// Appends a covariate column.
    pub fn add_covariate(&self, name: impl Into<String>, column: Vec<f64>) -> Result<Dataset> {
        let mut covs: Vec<(String, Vec<f64>)> = (0..self.n_covariates())
            .map(|j| (self.covariate_names[j].clone(), self.covariate_column(j)))
            .collect();
        covs.push((name.into(), column));
        Dataset::new(
            self.outcome_name.clone(),
            self.d.clone(),
            self.a1.clone(),
            self.a2.clone(),
            covs,
            self.weight_name.clone().zip(self.w.clone()),
        )
    }

    /// Replaces (or removes) the sampling-weight column.
    pub fn with_weights(&self, weights: Option<(String, Vec<f64>)>) -> Result<Dataset> {
        let covs = (0..self.n_covariates())
            .map(|j| (self.covariate_names[j].clone(), self.covariate_column(j)))
            .collect();
        Dataset::new(
            self.outcome_name.clone(),
            self.d.clone(),
            self.a1.clone(),
            self.a2.clone(),
            covs,
            weights,
        )
    }

    /// Replaces exposure 1, e.g. with a dichotomized version.
    pub fn with_a1(&self, a1: Exposure) -> Result<Dataset> {
        let covs = (0..self.n_covariates())
            .map(|j| (self.covariate_names[j].clone(), self.covariate_column(j)))
            .collect();
        Dataset::new(
            self.outcome_name.clone(),
            self.d.clone(),
            a1,
            self.a2.clone(),
            covs,
            self.weight_name.clone().zip(self.w.clone()),
        )
    }
}
