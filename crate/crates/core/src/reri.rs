//! Prospective RERI comparator.
//!
//! Fits `logit Pr(D = 1) = a0 + a1 A1 + a2 A2 + a3 A1 A2 + a4' X` to the
//! case-control sample and tests `RERI = e^{a1+a2+a3} - e^{a1} - e^{a2} + 1`
//! with a delta-method standard error.

use serde::Serialize;

use crate::data::{Dataset, ExposureKind};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, DesignMatrix, Family, GlmSpec};
use crate::stats::two_sided_p;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReriResult {
    /// `(a0, a1, a2, a3)` followed by the covariate coefficients.
    pub coefficients: Vec<f64>,
    pub reri: f64,
    pub se: f64,
    /// `reri / se`.
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub n_cases: usize,
}

impl ReriResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": crate::interaction::SCHEMA_VERSION,
            "method": "reri",
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reri": self.reri,
            "se": self.se,
            "alpha0": self.coefficients[0],
            "alpha1": self.coefficients[1],
            "alpha2": self.coefficients[2],
            "alpha3": self.coefficients[3],
            "n": self.n,
            "n_cases": self.n_cases,
        })
    }
}

pub fn reri_value(a1: f64, a2: f64, a3: f64) -> f64 {
    (a1 + a2 + a3).exp() - a1.exp() - a2.exp() + 1.0
}

/// Gradient of [`reri_value`] in `(a1, a2, a3)`.
pub fn reri_gradient(a1: f64, a2: f64, a3: f64) -> [f64; 3] {
    let joint = (a1 + a2 + a3).exp();
    [joint - a1.exp(), joint - a2.exp(), joint]
}

/// RERI test for binary exposures.
pub fn reri_test(ds: &Dataset, covariates: &[String]) -> Result<ReriResult> {
    if ds.a1().kind != ExposureKind::Binary || ds.a2().kind != ExposureKind::Binary {
        return Err(Error::Unsupported(
            "the RERI comparator is defined for binary exposures".into(),
        ));
    }
    logistic_reri(ds, covariates)
}

/// The same fit and test without restricting exposure kinds; with a
/// continuous first exposure RERI is evaluated at a one-unit contrast.
pub fn logistic_reri(ds: &Dataset, covariates: &[String]) -> Result<ReriResult> {
    ds.require_both_strata()?;
    let columns = covariates
        .iter()
        .map(|c| {
            ds.covariate_index(c)
                .ok_or_else(|| Error::Schema(format!("unknown covariate '{c}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let width = 3 + columns.len();
    let mut data = Vec::with_capacity(ds.n() * width);
    for i in 0..ds.n() {
        let (a1, a2) = (ds.a1().values[i], ds.a2().values[i]);
        data.extend_from_slice(&[a1, a2, a1 * a2]);
        let x = ds.x_row(i);
        data.extend(columns.iter().map(|&j| x[j]));
    }
    let design = DesignMatrix::new(ds.n(), width, data)?;
    let y: Vec<f64> = ds.d().iter().map(|&d| f64::from(d)).collect();
    let fit = fit_glm(&design, &y, None, &GlmSpec::new(Family::BernoulliLogit))?;
    let b = fit.coefficients();
    let cov = fit.covariance()?;
    let grad = reri_gradient(b[1], b[2], b[3]);
    let var: f64 = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .map(|(r, c)| grad[r] * cov[(r + 1, c + 1)] * grad[c])
        .sum();
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::DegenerateVariance(var));
    }
    let reri = reri_value(b[1], b[2], b[3]);
    let se = var.sqrt();
    let statistic = reri / se;
    Ok(ReriResult {
        coefficients: b.to_vec(),
        reri,
        se,
        statistic,
        p_value: two_sided_p(statistic),
        n: ds.n(),
        n_cases: ds.n_cases(),
    })
}
