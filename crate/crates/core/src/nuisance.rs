//! Baseline exposure models and the exposure odds-ratio parameter.
//!
//! Each exposure gets a GLM given the covariates, fitted on controls (rare
//! disease) or on the full sample with sampling weights. Without the
//! independence assumption the other exposure enters the design as a main
//! effect and baselines are predicted with it set to 0; the coefficient of
//! exposure 2 in the exposure-1 logistic model is the log odds-ratio
//! parameter `omega` of `log OR(a1, a2; x) = omega * a1 * a2`.
//!
//! The stacked parameter vector is `theta = [exposure-1 coefficients,
//! exposure-2 coefficients]`; under non-independence `omega` is entry 1.
//! Influence contributions are `n * I^{-1} s_i` per model, stacked, with
//! zero rows for subjects outside the fitting sample.

use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};
use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, ExposureKind};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, DesignMatrix, Family, GlmFit, GlmSpec};

/// Mass left out when a Poisson baseline is truncated to a finite support.
pub const POISSON_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExposureFamily {
    /// Logistic model, baseline `p(x)`.
    Logit,
    /// Linear model fitted by least squares, baseline `m(x)`.
    Identity,
    /// Poisson log-linear model, baseline `n(x)`.
    Log,
    /// Polytomous logistic model, baseline probabilities `p_k(x)`.
    Multinomial { levels: usize },
}

impl ExposureFamily {
    pub fn default_for(kind: ExposureKind) -> Self {
        match kind {
            ExposureKind::Binary => ExposureFamily::Logit,
            ExposureKind::Categorical { levels } => ExposureFamily::Multinomial { levels },
            ExposureKind::Count => ExposureFamily::Log,
            ExposureKind::Continuous => ExposureFamily::Identity,
        }
    }

    fn glm_family(self) -> Family {
        match self {
            ExposureFamily::Logit => Family::BernoulliLogit,
            ExposureFamily::Identity => Family::GaussianIdentity,
            ExposureFamily::Log => Family::PoissonLog,
            ExposureFamily::Multinomial { levels } => Family::MultinomialLogit { categories: levels },
        }
    }

    fn check_kind(self, kind: ExposureKind, name: &str) -> Result<()> {
        let ok = match self {
            ExposureFamily::Logit => kind == ExposureKind::Binary,
            ExposureFamily::Identity => true,
            ExposureFamily::Log => matches!(kind, ExposureKind::Count | ExposureKind::Binary),
            ExposureFamily::Multinomial { levels } => {
                kind == ExposureKind::Categorical { levels }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "family {self} is incompatible with {kind} exposure '{name}'"
            )))
        }
    }
}

impl fmt::Display for ExposureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExposureFamily::Logit => write!(f, "logit"),
            ExposureFamily::Identity => write!(f, "identity"),
            ExposureFamily::Log => write!(f, "log"),
            ExposureFamily::Multinomial { levels } => write!(f, "multinomial:{levels}"),
        }
    }
}

impl FromStr for ExposureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logit" => Ok(ExposureFamily::Logit),
            "identity" => Ok(ExposureFamily::Identity),
            "log" => Ok(ExposureFamily::Log),
            other => other
                .strip_prefix("multinomial:")
                .and_then(|k| k.parse().ok())
                .filter(|&levels: &usize| levels >= 2)
                .map(|levels| ExposureFamily::Multinomial { levels })
                .ok_or_else(|| Error::Config(format!("unknown exposure family '{s}'"))),
        }
    }
}

/// Which subjects the nuisance models are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitSample {
    /// Weighted full sample if the dataset carries weights, controls otherwise.
    Auto,
    Controls,
    /// All subjects, weighted by the dataset's sampling weights.
    WeightedAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPlan {
    /// Covariate names; empty means no adjustment.
    pub covariates: Vec<String>,
    /// Overrides the kind-based default family.
    pub a1_family: Option<ExposureFamily>,
    pub a2_family: Option<ExposureFamily>,
    pub independence: bool,
    pub sample: FitSample,
}

impl Default for ModelPlan {
    fn default() -> Self {
        Self {
            covariates: Vec::new(),
            a1_family: None,
            a2_family: None,
            independence: false,
            sample: FitSample::Auto,
        }
    }
}

impl ModelPlan {
    pub fn independent() -> Self {
        Self {
            independence: true,
            ..Self::default()
        }
    }

    pub fn with_covariates(mut self, covariates: &[&str]) -> Self {
        self.covariates = covariates.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Which exposure a baseline refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    A1,
    A2,
}

/// How the other exposure enters an exposure model's design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OtherTerm {
    Absent,
    Linear,
}

impl OtherTerm {
    fn width(self) -> usize {
        match self {
            OtherTerm::Absent => 0,
            OtherTerm::Linear => 1,
        }
    }

    fn push(self, value: f64, row: &mut Vec<f64>) {
        match self {
            OtherTerm::Absent => {}
            OtherTerm::Linear => row.push(value),
        }
    }
}

/// One fitted exposure model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureModel {
    pub family: ExposureFamily,
    fit: GlmFit,
    other: OtherTerm,
    covariates: Vec<usize>,
}

impl ExposureModel {
    pub fn fit(&self) -> &GlmFit {
        &self.fit
    }

    /// Design row at the other exposure's reference value 0.
    fn baseline_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.other.width() + self.covariates.len());
        self.other.push(0.0, &mut row);
        for &j in &self.covariates {
            row.push(*x.get(j).ok_or(Error::Dimension {
                expected: j + 1,
                got: x.len(),
            })?);
        }
        Ok(row)
    }

    pub fn baseline_mean(&self, x: &[f64]) -> Result<f64> {
        self.fit.predict_mean(&self.baseline_row(x)?)
    }

    pub fn baseline_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.fit.predict_probabilities(&self.baseline_row(x)?)
    }

    /// Baseline law as `(value, probability)` pairs; Poisson laws are
    /// truncated at the `1 - POISSON_TAIL` quantile and renormalized.
    pub fn baseline_pmf(&self, x: &[f64]) -> Result<Vec<(f64, f64)>> {
        match self.family {
            ExposureFamily::Logit | ExposureFamily::Multinomial { .. } => Ok(self
                .baseline_probabilities(x)?
                .into_iter()
                .enumerate()
                .map(|(k, p)| (k as f64, p))
                .collect()),
            ExposureFamily::Log => {
                let rate = self.baseline_mean(x)?;
                let law = Poisson::new(rate)
                    .map_err(|e| Error::NonFinite(format!("Poisson rate {rate}: {e}")))?;
                let upper = law.inverse_cdf(1.0 - POISSON_TAIL);
                let mut pmf: Vec<(f64, f64)> = (0..=upper)
                    .map(|k| (k as f64, statrs::distribution::Discrete::pmf(&law, k)))
                    .collect();
                let total: f64 = pmf.iter().map(|(_, p)| p).sum();
                pmf.iter_mut().for_each(|(_, p)| *p /= total);
                Ok(pmf)
            }
            ExposureFamily::Identity => Err(Error::Unsupported(
                "continuous baselines admit only centered-product contrasts".into(),
            )),
        }
    }
}

/// Fitted nuisance components. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceModels {
    pub plan: ModelPlan,
    pub a1_model: ExposureModel,
    pub a2_model: ExposureModel,
    omega: f64,
    omega_index: Option<usize>,
    n: usize,
    sample: FitSample,
    // n x dim(theta), row-major
    influence: Vec<f64>,
}

fn resolve_sample(ds: &Dataset, requested: FitSample) -> Result<FitSample> {
    match (requested, ds.weights().is_some()) {
        (FitSample::Auto, true) => Ok(FitSample::WeightedAll),
        (FitSample::Auto, false) => Ok(FitSample::Controls),
        (FitSample::WeightedAll, false) => Err(Error::Config(
            "weighted full-sample fitting needs a weight column".into(),
        )),
        (s, _) => Ok(s),
    }
}

fn fit_exposure_model(
    ds: &Dataset,
    which: Which,
    family: ExposureFamily,
    other: OtherTerm,
    covariates: &[usize],
    rows: &[usize],
    weighted: bool,
) -> Result<ExposureModel> {
    let (target, partner) = match which {
        Which::A1 => (ds.a1(), ds.a2()),
        Which::A2 => (ds.a2(), ds.a1()),
    };
    let width = other.width() + covariates.len();
    let mut data = Vec::with_capacity(rows.len() * width);
    let mut row = Vec::with_capacity(width);
    for &i in rows {
        row.clear();
        other.push(partner.values[i], &mut row);
        let x = ds.x_row(i);
        row.extend(covariates.iter().map(|&j| x[j]));
        data.extend_from_slice(&row);
    }
    let design = DesignMatrix::new(rows.len(), width, data)?;
    let y: Vec<f64> = rows.iter().map(|&i| target.values[i]).collect();
    let w: Option<Vec<f64>> = weighted.then(|| rows.iter().map(|&i| ds.weight(i)).collect());
    let fit = fit_glm(&design, &y, w.as_deref(), &GlmSpec::new(family.glm_family()))?;
    Ok(ExposureModel {
        family,
        fit,
        other,
        covariates: covariates.to_vec(),
    })
}

/// Fits both exposure models and, without independence, the odds-ratio
/// parameter.
pub fn fit_nuisance(ds: &Dataset, plan: &ModelPlan) -> Result<NuisanceModels> {
    let sample = resolve_sample(ds, plan.sample)?;
    let rows: Vec<usize> = match sample {
        FitSample::WeightedAll => (0..ds.n()).collect(),
        _ => (0..ds.n()).filter(|&i| !ds.is_case(i)).collect(),
    };
    if rows.is_empty() {
        return Err(Error::InvalidData("no controls available for exposure models".into()));
    }
    let covariates = plan
        .covariates
        .iter()
        .map(|c| {
            ds.covariate_index(c)
                .ok_or_else(|| Error::Schema(format!("unknown covariate '{c}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    // an all-zero column has no identifiable coefficient; it is left out
    let covariates: Vec<usize> = covariates
        .into_iter()
        .filter(|&j| rows.iter().any(|&i| ds.x_row(i)[j] != 0.0))
        .collect();
    let f1 = plan.a1_family.unwrap_or_else(|| ExposureFamily::default_for(ds.a1().kind));
    let f2 = plan.a2_family.unwrap_or_else(|| ExposureFamily::default_for(ds.a2().kind));
    f1.check_kind(ds.a1().kind, &ds.a1().name)?;
    f2.check_kind(ds.a2().kind, &ds.a2().name)?;

    let (other1, other2) = if plan.independence {
        (OtherTerm::Absent, OtherTerm::Absent)
    } else {
        if f1 != ExposureFamily::Logit {
            return Err(Error::Unsupported(format!(
                "the scalar odds-ratio model needs a binary first exposure with a logit model \
                 (got {f1}); use the independence assumption"
            )));
        }
        (OtherTerm::Linear, OtherTerm::Linear)
    };
    let weighted = sample == FitSample::WeightedAll;
    let a1_model = fit_exposure_model(ds, Which::A1, f1, other1, &covariates, &rows, weighted)?;
    let a2_model = fit_exposure_model(ds, Which::A2, f2, other2, &covariates, &rows, weighted)?;
    let (omega, omega_index) = if plan.independence {
        (0.0, None)
    } else {
        (a1_model.fit.coefficients()[1], Some(1))
    };

    let n = ds.n();
    let p1 = a1_model.fit.n_params();
    let p2 = a2_model.fit.n_params();
    let dim = p1 + p2;
    let mut influence = vec![0.0; n * dim];
    for (offset, model) in [(0, &a1_model), (p1, &a2_model)] {
        let cov = model.fit.covariance()?;
        let np = model.fit.n_params();
        for (r, &i) in rows.iter().enumerate() {
            let s = model.fit.score_row(r);
            for a in 0..np {
                let v: f64 = (0..np).map(|b| cov[(a, b)] * s[b]).sum();
                influence[i * dim + offset + a] = n as f64 * v;
            }
        }
    }
    Ok(NuisanceModels {
        plan: plan.clone(),
        a1_model,
        a2_model,
        omega,
        omega_index,
        n,
        sample,
        influence,
    })
}

impl NuisanceModels {
    /// Log odds-ratio parameter; exactly 0 under independence.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn independence(&self) -> bool {
        self.plan.independence
    }

    /// Position of `omega` in `theta`, if estimated.
    pub fn omega_index(&self) -> Option<usize> {
        self.omega_index
    }

    pub fn fit_sample(&self) -> FitSample {
        self.sample
    }

    pub fn model(&self, which: Which) -> &ExposureModel {
        match which {
            Which::A1 => &self.a1_model,
            Which::A2 => &self.a2_model,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.a1_model.fit.coefficients().to_vec();
        t.extend_from_slice(self.a2_model.fit.coefficients());
        t
    }

    pub fn theta_dim(&self) -> usize {
        self.a1_model.fit.n_params() + self.a2_model.fit.n_params()
    }

    /// Influence contribution of subject `i` (length `theta_dim`).
    pub fn influence_row(&self, i: usize) -> &[f64] {
        let dim = self.theta_dim();
        &self.influence[i * dim..(i + 1) * dim]
    }

    /// Copy with replaced `theta`; `omega` follows its entry.
    pub fn with_theta(&self, theta: &[f64]) -> Result<NuisanceModels> {
        if theta.len() != self.theta_dim() {
            return Err(Error::Dimension {
                expected: self.theta_dim(),
                got: theta.len(),
            });
        }
        let p1 = self.a1_model.fit.n_params();
        let mut out = self.clone();
        out.a1_model.fit = self.a1_model.fit.with_coefficients(theta[..p1].to_vec())?;
        out.a2_model.fit = self.a2_model.fit.with_coefficients(theta[p1..].to_vec())?;
        if let Some(k) = self.omega_index {
            out.omega = theta[k];
        }
        Ok(out)
    }

    /// Baseline expected exposure at covariate row `x` (the full dataset
    /// covariate row): `p1(x)`, `p2(x)`, `m2(x)` or `n2(x)`. For a
    /// multinomial model this is the expected level.
    pub fn baseline_mean(&self, which: Which, x: &[f64]) -> Result<f64> {
        self.model(which).baseline_mean(x)
    }

    /// Inverse odds ratio `exp(-omega * a1 * a2)`.
    pub fn inverse_odds_ratio(&self, a1: f64, a2: f64) -> f64 {
        if self.omega == 0.0 {
            1.0
        } else {
            (-self.omega * a1 * a2).exp()
        }
    }
}

/// Log odds-ratio between the exposures among controls, with its influence
/// contributions (zero under independence).
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaEstimate {
    pub omega: f64,
    pub influence: Vec<f64>,
}

/// Coefficient of exposure 2 in the control-sample logistic regression of
/// exposure 1 on exposure 2 and the covariates.
pub fn estimate_omega(ds: &Dataset, plan: &ModelPlan) -> Result<OmegaEstimate> {
    if plan.independence {
        return Ok(OmegaEstimate {
            omega: 0.0,
            influence: vec![0.0; ds.n()],
        });
    }
    let nm = fit_nuisance(ds, plan)?;
    let k = nm.omega_index.expect("omega estimated without independence");
    Ok(OmegaEstimate {
        omega: nm.omega,
        influence: (0..ds.n()).map(|i| nm.influence_row(i)[k]).collect(),
    })
}
