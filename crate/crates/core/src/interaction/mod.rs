//! Per-subject interaction contributions and standardized tests.
//!
//! For a contrast `g(a1, a2, x)` the contribution of subject `i` is
//!
//! ```text
//! W_i = OR(a1, a2; x)^-1 { g(a1, a2, x)
//!                          - sum_v g(a1, v, x) f2(v | a1 = 0, x)
//!                          - sum_v g(v, a2, x) f1(v | a2 = 0, x)
//!                          + sum_{v,w} g(v, w, x) f1(v | .) f2(w | .) } D_i
//! ```
//!
//! With the centered-product contrast and baseline-mean centering all three
//! sums vanish, leaving `OR^-1 (a1 - b1(x)) (a2 - b2(x)) D`; every named
//! statistic (binary, independence, covariate-adjusted, continuous, count,
//! polytomous) is that closed form with the matching baseline models.

mod oracle;

pub use oracle::{brute_force_expectation, disease_prevalence, DiscretePopulation, PopulationStratum};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use crate::data::{Dataset, ExposureKind};
use crate::error::{Error, Result};
use crate::nuisance::{ExposureFamily, NuisanceModels, Which};
use crate::stats::two_sided_p;
use crate::variance::{BootstrapSummary, VarianceDecomposition};

/// Custom contrast `g(a1, a2, x)`.
pub type ContrastFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum GFunction {
    /// `(a1 - E[a1 | x]) (a2 - E[a2 | x])` with baseline means.
    CenteredProduct,
    /// `sum_k (1[a1 = k] - p_k(x)) (a2 - E[a2 | x])` over non-reference
    /// levels of a categorical first exposure.
    PolytomousCenteredProduct,
    /// Arbitrary contrast; both exposures must have discrete baselines.
    Custom(ContrastFn),
}

impl GFunction {
    /// Natural contrast for the first exposure's kind.
    pub fn default_for(kind: ExposureKind) -> Self {
        match kind {
            ExposureKind::Categorical { .. } => GFunction::PolytomousCenteredProduct,
            _ => GFunction::CenteredProduct,
        }
    }

    pub fn custom(f: impl Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        GFunction::Custom(Arc::new(f))
    }
}

impl fmt::Debug for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GFunction::CenteredProduct => write!(f, "CenteredProduct"),
            GFunction::PolytomousCenteredProduct => write!(f, "PolytomousCenteredProduct"),
            GFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Which statistic a contribution vector represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Binary,
    BinaryIndependent,
    CovariateAdjusted,
    Continuous,
    Count,
    Polytomous,
    Unified,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Binary => "binary",
            Method::BinaryIndependent => "binary-independent",
            Method::CovariateAdjusted => "covariate-adjusted",
            Method::Continuous => "continuous",
            Method::Count => "count",
            Method::Polytomous => "polytomous",
            Method::Unified => "unified",
        };
        f.write_str(s)
    }
}

fn classify(nm: &NuisanceModels, g: &GFunction) -> Method {
    let families = [nm.a1_model.family, nm.a2_model.family];
    match g {
        GFunction::Custom(_) => Method::Unified,
        _ if matches!(families[0], ExposureFamily::Multinomial { .. }) => Method::Polytomous,
        _ if families.contains(&ExposureFamily::Identity) => Method::Continuous,
        _ if families.contains(&ExposureFamily::Log) => Method::Count,
        _ if !nm.plan.covariates.is_empty() => Method::CovariateAdjusted,
        _ if nm.independence() => Method::BinaryIndependent,
        _ => Method::Binary,
    }
}

/// Per-subject contributions; zero for every control.
#[derive(Debug, Clone)]
pub struct UVector {
    pub u: Vec<f64>,
    pub n_cases: usize,
    pub method: Method,
    pub g: GFunction,
    pub nuisance: Arc<NuisanceModels>,
}

impl UVector {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.u)
    }
}

fn contribution(ds: &Dataset, nm: &NuisanceModels, g: &GFunction, i: usize) -> Result<f64> {
    if !ds.is_case(i) {
        return Ok(0.0);
    }
    let a1 = ds.a1().values[i];
    let a2 = ds.a2().values[i];
    let x = ds.x_row(i);
    let tilt = nm.inverse_odds_ratio(a1, a2);
    let value = match g {
        GFunction::CenteredProduct => {
            let c1 = a1 - nm.baseline_mean(Which::A1, x)?;
            let c2 = a2 - nm.baseline_mean(Which::A2, x)?;
            tilt * c1 * c2
        }
        GFunction::PolytomousCenteredProduct => {
            let probs = nm.model(Which::A1).baseline_probabilities(x)?;
            let level = a1 as usize;
            let c1: f64 = (1..probs.len())
                .map(|k| f64::from(u8::from(level == k)) - probs[k])
                .sum();
            let c2 = a2 - nm.baseline_mean(Which::A2, x)?;
            tilt * c1 * c2
        }
        GFunction::Custom(f) => {
            let pmf1 = nm.model(Which::A1).baseline_pmf(x)?;
            let pmf2 = nm.model(Which::A2).baseline_pmf(x)?;
            let own = f(a1, a2, x);
            let over_a2: f64 = pmf2.iter().map(|&(v, p)| f(a1, v, x) * p).sum();
            let over_a1: f64 = pmf1.iter().map(|&(v, p)| f(v, a2, x) * p).sum();
            let both: f64 = pmf1
                .iter()
                .map(|&(v1, p1)| p1 * pmf2.iter().map(|&(v2, p2)| f(v1, v2, x) * p2).sum::<f64>())
                .sum();
            tilt * (own - over_a2 - over_a1 + both)
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("contribution of row {}", i + 1)))
    }
}

/// Contributions `u_i` for every subject of `ds`.
pub fn compute_u(ds: &Dataset, nm: &NuisanceModels, g: &GFunction) -> Result<UVector> {
    if matches!(g, GFunction::PolytomousCenteredProduct)
        && !matches!(
            nm.a1_model.family,
            ExposureFamily::Multinomial { .. } | ExposureFamily::Logit
        )
    {
        return Err(Error::Config(
            "the polytomous contrast needs a logit or multinomial first-exposure model".into(),
        ));
    }
    let u = (0..ds.n())
        .map(|i| contribution(ds, nm, g, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(UVector {
        u,
        n_cases: ds.n_cases(),
        method: classify(nm, g),
        g: g.clone(),
        nuisance: Arc::new(nm.clone()),
    })
}

/// `sum_i u_i / n` at an arbitrary nuisance parameter; the map whose
/// derivative enters the sandwich variance.
pub fn mean_u(ds: &Dataset, nm: &NuisanceModels, g: &GFunction) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..ds.n() {
        total += contribution(ds, nm, g, i)?;
    }
    Ok(total / ds.n() as f64)
}

/// Standardized statistic with its variance and two-sided p-value.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub method: Method,
    /// `mean(u) / sqrt(variance.total)`.
    pub statistic: f64,
    pub mean_u: f64,
    pub variance: VarianceDecomposition,
    pub p_value: f64,
    pub n: usize,
    pub n_cases: usize,
    pub omega: f64,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Current version of the flat JSON layout produced by
/// [`TestResult::to_json`].
pub const SCHEMA_VERSION: u32 = 1;

impl TestResult {
    /// Flat JSON object: `schema_version, method, statistic, p_value,
    /// variance_total, v1, v2, v3, variance_method, mean_u, omega, n,
    /// n_cases` plus `bootstrap_*` fields when a bootstrap was run.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "method": self.method.to_string(),
            "statistic": self.statistic,
            "p_value": self.p_value,
            "variance_total": self.variance.total,
            "v1": self.variance.v1,
            "v2": self.variance.v2,
            "v3": self.variance.v3,
            "variance_method": self.variance.method.to_string(),
            "mean_u": self.mean_u,
            "omega": self.omega,
            "n": self.n,
            "n_cases": self.n_cases,
        });
        if let Some(b) = &self.bootstrap {
            let map = obj.as_object_mut().expect("object");
            map.insert("bootstrap_replicates".into(), b.replicates.into());
            map.insert("bootstrap_dropped".into(), b.dropped.into());
            map.insert("bootstrap_variance".into(), b.variance.into());
            map.insert("bootstrap_ci_lower".into(), b.ci.0.into());
            map.insert("bootstrap_ci_upper".into(), b.ci.1.into());
            map.insert("bootstrap_p_value".into(), b.p_value.into());
        }
        obj
    }
}

/// `T = (sum u / n) / sqrt(v.total)` with `p = 2 (1 - Phi(|T|))`.
pub fn standardized_test(u: &UVector, v: VarianceDecomposition) -> Result<TestResult> {
    if !(v.total.is_finite() && v.total > 0.0) {
        return Err(Error::DegenerateVariance(v.total));
    }
    let mean_u = u.mean();
    let statistic = mean_u / v.total.sqrt();
    Ok(TestResult {
        method: u.method,
        statistic,
        mean_u,
        variance: v,
        p_value: two_sided_p(statistic),
        n: u.n(),
        n_cases: u.n_cases,
        omega: u.nuisance.omega(),
        bootstrap: None,
    })
}

/// `sum u / {p1 (1 - p1) p2 (1 - p2) sum D}`: estimates the additive
/// interaction divided by the population disease prevalence. Binary
/// exposures without covariates only.
pub fn scaled_beta3(u: &UVector, nm: &NuisanceModels, ds: &Dataset) -> Result<f64> {
    if ds.a1().kind != ExposureKind::Binary
        || ds.a2().kind != ExposureKind::Binary
        || !nm.plan.covariates.is_empty()
    {
        return Err(Error::Unsupported(
            "scaled interaction estimate is defined for binary exposures without covariates".into(),
        ));
    }
    let p1 = nm.baseline_mean(Which::A1, ds.x_row(0))?;
    let p2 = nm.baseline_mean(Which::A2, ds.x_row(0))?;
    let denom = p1 * (1.0 - p1) * p2 * (1.0 - p2) * ds.n_cases() as f64;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "baseline frequencies p1 = {p1}, p2 = {p2}, cases = {}",
            ds.n_cases()
        )));
    }
    Ok(u.u.iter().sum::<f64>() / denom)
}

/// Non-centrality factor `p1 (1 - p1) p2 (1 - p2) lambda / sigma2` of the
/// binary test without covariates.
pub fn noncentrality_kappa(p1: f64, p2: f64, lambda: f64, sigma2: f64) -> Result<f64> {
    let open_unit = |p: f64| p > 0.0 && p < 1.0;
    if !open_unit(p1) || !open_unit(p2) || !(lambda > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::Degenerate(format!(
            "kappa needs p1, p2 in (0, 1) and positive lambda, sigma2 (got {p1}, {p2}, {lambda}, {sigma2})"
        )));
    }
    Ok(p1 * (1.0 - p1) * p2 * (1.0 - p2) * lambda / sigma2)
}

#[cfg(test)]
mod tests;
