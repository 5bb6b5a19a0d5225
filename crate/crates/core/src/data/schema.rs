use std::path::Path;

use crate::data::ExposureKind;
use crate::error::{Error, Result};

/// An exposure column name and its declared kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub column: String,
    pub kind: ExposureKind,
}

/// Maps CSV columns to dataset roles.
///
/// The text form is one `role = value` pair per line; `#` starts a comment.
///
/// ```text
/// outcome    = d
/// a1         = g
/// a2         = e
/// kind.a1    = binary
/// kind.a2    = count
/// covariates = age, smoker
/// weight     = w
/// ```
///
/// `kind.*` defaults to `binary`; `covariates` and `weight` are optional.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub outcome: String,
    pub a1: ColumnSpec,
    pub a2: ColumnSpec,
    pub covariates: Vec<String>,
    pub weight: Option<String>,
}

impl Schema {
    pub fn binary(outcome: &str, a1: &str, a2: &str) -> Self {
        Self {
            outcome: outcome.into(),
            a1: ColumnSpec {
                column: a1.into(),
                kind: ExposureKind::Binary,
            },
            a2: ColumnSpec {
                column: a2.into(),
                kind: ExposureKind::Binary,
            },
            covariates: Vec::new(),
            weight: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut outcome = None;
        let mut a1 = None;
        let mut a2 = None;
        let mut kind1 = ExposureKind::Binary;
        let mut kind2 = ExposureKind::Binary;
        let mut covariates = Vec::new();
        let mut weight = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("line {}: expected 'role = column'", lineno + 1))
            })?;
            let value = value.trim();
            match key.trim() {
                "outcome" => outcome = Some(value.to_string()),
                "a1" => a1 = Some(value.to_string()),
                "a2" => a2 = Some(value.to_string()),
                "kind.a1" => kind1 = value.parse()?,
                "kind.a2" => kind2 = value.parse()?,
                "covariates" => {
                    covariates = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                "weight" => weight = Some(value.to_string()),
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown role '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        let need = |v: Option<String>, role: &str| {
            v.filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Schema(format!("schema does not name the '{role}' column")))
        };
        Ok(Self {
            outcome: need(outcome, "outcome")?,
            a1: ColumnSpec {
                column: need(a1, "a1")?,
                kind: kind1,
            },
            a2: ColumnSpec {
                column: need(a2, "a2")?,
                kind: kind2,
            },
            covariates,
            weight,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the schema back to its text form.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "outcome = {}\na1 = {}\na2 = {}\nkind.a1 = {}\nkind.a2 = {}\n",
            self.outcome, self.a1.column, self.a2.column, self.a1.kind, self.a2.kind
        );
        if !self.covariates.is_empty() {
            out.push_str(&format!("covariates = {}\n", self.covariates.join(",")));
        }
        if let Some(w) = &self.weight {
            out.push_str(&format!("weight = {w}\n"));
        }
        out
    }
}
