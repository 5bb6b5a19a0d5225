//! Monte Carlo experiments.
//!
//! Binary scenarios draw exact retrospective samples: the four exposure
//! cells are weighted by `Pr(D = d | a1, a2) f(a1, a2)` and the case and
//! control quotas are filled multinomially. The RERI-failure scenario draws
//! subjects from the population by rejection.
//!
//! Replicate `r` of grid cell `c` uses random stream `(seed, c, r)`, so a
//! table does not depend on the number of threads.

mod generate;
mod grid;

pub use generate::{
    alpha3_from_reri, binary_exposure_cells, failure_risk, generate_with, reri_from_alphas,
    retrospective_cells, NORMAL_TRUNCATION,
};
pub use grid::{builtin_grid, failure_scenario, load_grid, parse_grid};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::ModelPlan;
use crate::pipeline::{run_test, TestRecipe};
use crate::reri::{logistic_reri, reri_test};
use crate::rng::{self, Domain};

/// Nominal level of every simulated test.
pub const LEVEL: f64 = 0.05;

/// Fraction of failed replicates above which a cell is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Binary exposures with a logistic disease model.
    BinaryBinary,
    /// Standard-normal first exposure, binary second exposure and a binary
    /// covariate under an additive null risk.
    ContinuousNullFailure,
}

/// Covariate settings of the failure scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    /// `Pr(x = 1)`.
    pub p_x: f64,
    /// Effect of `x` on the disease logit components.
    pub alpha_x: f64,
    /// Effect of `x` on the logit of the second exposure.
    pub gamma_x: f64,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        Self {
            p_x: 0.5,
            alpha_x: 0.0,
            gamma_x: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub kind: ScenarioKind,
    /// `Pr(a1 = 1 | a2 = 0)`; the marginal when the exposures are independent.
    pub p_g: f64,
    /// `Pr(a2 = 1 | a1 = 0)` (at `x = 0` in the failure scenario).
    pub p_e: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Binary scenarios give exactly one of `alpha3` and `reri`.
    pub alpha3: Option<f64>,
    pub reri: Option<f64>,
    /// Population log odds ratio between the exposures.
    pub ge_log_or: f64,
    pub n_cases: usize,
    pub n_controls: usize,
    pub covariate: CovariateSpec,
    /// Replace the continuous first exposure by `1[a1 > 0]`.
    pub dichotomize: bool,
}

impl Scenario {
    /// Binary scenario with independent exposures at the given RERI.
    pub fn binary(p_g: f64, p_e: f64, alpha0: f64, alpha1: f64, alpha2: f64, reri: f64) -> Self {
        Self {
            label: String::new(),
            kind: ScenarioKind::BinaryBinary,
            p_g,
            p_e,
            alpha0,
            alpha1,
            alpha2,
            alpha3: None,
            reri: Some(reri),
            ge_log_or: 0.0,
            n_cases: 4000,
            n_controls: 4000,
            covariate: CovariateSpec::default(),
            dichotomize: false,
        }
    }

    /// Additive-null scenario with a continuous first exposure.
    pub fn failure(p_e: f64, alpha0: f64, alpha1: f64, alpha2: f64, covariate: CovariateSpec) -> Self {
        Self {
            kind: ScenarioKind::ContinuousNullFailure,
            alpha3: None,
            reri: None,
            covariate,
            ..Self::binary(0.5, p_e, alpha0, alpha1, alpha2, 0.0)
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_sizes(mut self, n_cases: usize, n_controls: usize) -> Self {
        self.n_cases = n_cases;
        self.n_controls = n_controls;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        if !open(self.p_g) || !open(self.p_e) || !open(self.covariate.p_x) {
            return Err(Error::Scenario(format!(
                "'{}': probabilities must lie in (0, 1)",
                self.label
            )));
        }
        if self.n_cases == 0 || self.n_controls == 0 {
            return Err(Error::Scenario(format!(
                "'{}': both case and control counts must be positive",
                self.label
            )));
        }
        let finite = [self.alpha0, self.alpha1, self.alpha2, self.ge_log_or]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Scenario(format!("'{}': non-finite coefficient", self.label)));
        }
        match self.kind {
            ScenarioKind::BinaryBinary => {
                if self.alpha3.is_some() == self.reri.is_some() {
                    return Err(Error::Scenario(format!(
                        "'{}': give exactly one of alpha3 and reri",
                        self.label
                    )));
                }
                self.alpha3().map(|_| ())
            }
            ScenarioKind::ContinuousNullFailure => {
                if self.alpha3.is_some() || self.reri.is_some() {
                    return Err(Error::Scenario(format!(
                        "'{}': the failure scenario has no interaction parameter",
                        self.label
                    )));
                }
                Ok(())
            }
        }
    }

    /// Interaction coefficient of the logistic disease model.
    pub fn alpha3(&self) -> Result<f64> {
        match (self.alpha3, self.reri) {
            (Some(a3), _) => Ok(a3),
            (None, Some(reri)) => alpha3_from_reri(self.alpha0, self.alpha1, self.alpha2, reri),
            (None, None) => Ok(0.0),
        }
    }

    /// Population RERI of the scenario (0 for the failure scenario).
    pub fn target_reri(&self) -> Result<f64> {
        Ok(match (self.kind, self.reri) {
            (ScenarioKind::ContinuousNullFailure, _) => 0.0,
            (_, Some(r)) => r,
            _ => reri_from_alphas(self.alpha0, self.alpha1, self.alpha2, self.alpha3()?),
        })
    }
}

/// Case-control sample of `sc` on stream `(seed, cell, replicate)`.
pub fn generate_case_control(sc: &Scenario, seed: u64, cell: u32, replicate: u32) -> Result<Dataset> {
    let mut rng = rng::stream(seed, Domain::Simulation, cell, replicate);
    generate_with(&mut rng, sc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    /// Proposed test without the independence assumption.
    U,
    /// Proposed test assuming independence.
    UInd,
    /// Prospective logistic RERI test.
    Prosp,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::U, TestKind::UInd, TestKind::Prosp];

    /// p-value of this test on `ds`.
    pub fn p_value(self, ds: &Dataset) -> Result<f64> {
        let covariates = ds.covariate_names().to_vec();
        let plan = ModelPlan {
            covariates: covariates.clone(),
            ..ModelPlan::default()
        };
        match self {
            TestKind::U => Ok(run_test(ds, &TestRecipe::new(plan))?.p_value),
            TestKind::UInd => Ok(run_test(
                ds,
                &TestRecipe::new(ModelPlan {
                    independence: true,
                    ..plan
                }),
            )?
            .p_value),
            TestKind::Prosp => {
                if ds.a1().kind.is_discrete() {
                    Ok(reri_test(ds, &covariates)?.p_value)
                } else {
                    Ok(logistic_reri(ds, &covariates)?.p_value)
                }
            }
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::U => "u",
            TestKind::UInd => "u-ind",
            TestKind::Prosp => "prosp",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "u" => Ok(TestKind::U),
            "u-ind" => Ok(TestKind::UInd),
            "prosp" => Ok(TestKind::Prosp),
            other => Err(Error::Config(format!(
                "unknown test '{other}' (expected u, u-ind or prosp)"
            ))),
        }
    }
}

impl Serialize for TestKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TestKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One grid cell and test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub label: String,
    pub p_g: f64,
    pub p_e: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub reri: f64,
    pub test: TestKind,
    pub reps: usize,
    /// Replicates that produced a p-value.
    pub successes: usize,
    pub rejections: usize,
    /// `rejections / successes`.
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / successes)`.
    pub se: f64,
    pub failures: usize,
    /// More than 1% of replicates failed.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub seed: u64,
    pub reps: usize,
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn row(&self, label: &str, test: TestKind) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.label == label && r.test == test)
    }

    /// One CSV line per cell and test.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": crate::interaction::SCHEMA_VERSION,
            "seed": self.seed,
            "reps": self.reps,
            "level": LEVEL,
            "rows": self.rows,
        })
    }
}

/// Rejection rates of `tests` over `reps` replicates of every scenario.
pub fn run_power_experiment(
    grid: &[Scenario],
    tests: &[TestKind],
    reps: usize,
    seed: u64,
) -> Result<PowerTable> {
    if reps < 100 {
        return Err(Error::Config(format!("at least 100 replicates are required (got {reps})")));
    }
    if tests.is_empty() {
        return Err(Error::Config("no tests requested".into()));
    }
    for sc in grid {
        sc.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..reps).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<Vec<Option<bool>>> = jobs
        .par_iter()
        .map(|&(c, r)| match generate_case_control(&grid[c], seed, c as u32, r as u32) {
            Ok(ds) => tests
                .iter()
                .map(|t| t.p_value(&ds).ok().filter(|p| p.is_finite()).map(|p| p < LEVEL))
                .collect(),
            Err(_) => vec![None; tests.len()],
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len() * tests.len());
    for (c, sc) in grid.iter().enumerate() {
        let cell = &outcomes[c * reps..(c + 1) * reps];
        for (t, &test) in tests.iter().enumerate() {
            let successes = cell.iter().filter(|o| o[t].is_some()).count();
            let rejections = cell.iter().filter(|o| o[t] == Some(true)).count();
            let failures = reps - successes;
            let rate = if successes > 0 {
                rejections as f64 / successes as f64
            } else {
                f64::NAN
            };
            rows.push(PowerRow {
                label: sc.label.clone(),
                p_g: sc.p_g,
                p_e: sc.p_e,
                alpha1: sc.alpha1,
                alpha2: sc.alpha2,
                reri: sc.target_reri()?,
                test,
                reps,
                successes,
                rejections,
                rate,
                se: (rate * (1.0 - rate) / successes as f64).sqrt(),
                failures,
                flagged: failures as f64 > FAILURE_FLAG_FRACTION * reps as f64,
            });
        }
    }
    Ok(PowerTable { seed, reps, rows })
}

/// Sizes of the prospective RERI test and the proposed test under an
/// additive null with a continuous first exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub scenario: Scenario,
    pub prosp: PowerRow,
    pub proposed: PowerRow,
}

pub fn run_reri_failure_experiment(sc: &Scenario, reps: usize, seed: u64) -> Result<FailureReport> {
    if sc.kind != ScenarioKind::ContinuousNullFailure {
        return Err(Error::Scenario(
            "the failure experiment needs a continuous-null-failure scenario".into(),
        ));
    }
    let table = run_power_experiment(
        std::slice::from_ref(sc),
        &[TestKind::Prosp, TestKind::UInd],
        reps,
        seed,
    )?;
    let mut rows = table.rows.into_iter();
    Ok(FailureReport {
        scenario: sc.clone(),
        prosp: rows.next().expect("prosp row"),
        proposed: rows.next().expect("proposed row"),
    })
}

#[cfg(test)]
mod tests;
