//! One-call test recipes: fit the nuisance models, compute the
//! contributions, estimate the variance and standardize.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::{Dataset, ExposureKind};
use crate::error::{Error, Result};
use crate::interaction::{compute_u, standardized_test, GFunction, TestResult, UVector};
use crate::nuisance::{fit_nuisance, ExposureFamily, FitSample, ModelPlan, NuisanceModels};
use crate::variance::{
    bootstrap, closed_form_binary_variance, mean_u_jacobian, sandwich_variance, BootstrapConfig,
    BootstrapResult, VarianceDecomposition, VarianceKind,
};

/// `|omega| / SE(omega)` above which the closed form is replaced by the
/// sandwich.
pub const CLOSED_FORM_OMEGA_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMethod {
    /// Closed form where it applies, sandwich otherwise.
    #[default]
    Auto,
    ClosedForm,
    Sandwich,
    /// Bootstrap variance; needs a bootstrap configuration.
    Bootstrap,
}

impl fmt::Display for VarianceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceMethod::Auto => "auto",
            VarianceMethod::ClosedForm => "closed-form",
            VarianceMethod::Sandwich => "sandwich",
            VarianceMethod::Bootstrap => "bootstrap",
        })
    }
}

impl FromStr for VarianceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(VarianceMethod::Auto),
            "closed-form" => Ok(VarianceMethod::ClosedForm),
            "sandwich" => Ok(VarianceMethod::Sandwich),
            "bootstrap" => Ok(VarianceMethod::Bootstrap),
            _ => Err(Error::Config(format!("unknown variance method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TestRecipe {
    pub plan: ModelPlan,
    /// Contrast; `None` picks the natural one for the first exposure.
    pub g: Option<GFunction>,
    pub variance: VarianceMethod,
    pub bootstrap: Option<BootstrapConfig>,
}

impl TestRecipe {
    pub fn new(plan: ModelPlan) -> Self {
        Self {
            plan,
            ..Self::default()
        }
    }

    fn contrast(&self, ds: &Dataset) -> GFunction {
        self.g
            .clone()
            .unwrap_or_else(|| GFunction::default_for(ds.a1().kind))
    }
}

/// Nuisance fit and contributions for `ds`.
pub fn compute_statistic(ds: &Dataset, recipe: &TestRecipe) -> Result<(NuisanceModels, UVector)> {
    ds.require_both_strata()?;
    let nm = fit_nuisance(ds, &recipe.plan)?;
    let u = compute_u(ds, &nm, &recipe.contrast(ds))?;
    Ok((nm, u))
}

/// Replicate statistic of the bootstrap: `sum u / n` after refitting.
pub fn mean_statistic(ds: &Dataset, recipe: &TestRecipe) -> Result<f64> {
    Ok(compute_statistic(ds, recipe)?.1.mean())
}

fn closed_form_applies(ds: &Dataset, nm: &NuisanceModels) -> bool {
    ds.a1().kind == ExposureKind::Binary
        && ds.a2().kind == ExposureKind::Binary
        && nm.a1_model.family == ExposureFamily::Logit
        && nm.a2_model.family == ExposureFamily::Logit
        && nm.plan.covariates.is_empty()
        && nm.fit_sample() == FitSample::Controls
}

/// Whether `omega` is close enough to 0 for the closed form.
fn omega_near_zero(nm: &NuisanceModels) -> Result<bool> {
    let Some(k) = nm.omega_index() else {
        return Ok(true);
    };
    let se = nm.a1_model.fit().covariance()?[(k, k)].sqrt();
    Ok((nm.omega() / se).abs() <= CLOSED_FORM_OMEGA_Z)
}

fn analytic_variance(
    ds: &Dataset,
    nm: &NuisanceModels,
    u: &UVector,
    method: VarianceMethod,
) -> Result<VarianceDecomposition> {
    let closed = match method {
        VarianceMethod::Sandwich => false,
        VarianceMethod::ClosedForm if !closed_form_applies(ds, nm) => {
            return Err(Error::Unsupported(
                "the closed-form variance needs binary exposures, no covariates and control fits"
                    .into(),
            ))
        }
        _ => closed_form_applies(ds, nm) && omega_near_zero(nm)?,
    };
    if closed {
        closed_form_binary_variance(ds, nm, nm.independence())
    } else {
        sandwich_variance(u, &mean_u_jacobian(ds, u)?)
    }
}

/// Full bootstrap of the recipe's mean contribution.
pub fn bootstrap_recipe(
    ds: &Dataset,
    recipe: &TestRecipe,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    bootstrap(ds, config, |sample| mean_statistic(sample, recipe))
}

/// Runs the recipe end to end.
pub fn run_test(ds: &Dataset, recipe: &TestRecipe) -> Result<TestResult> {
    let (nm, u) = compute_statistic(ds, recipe)?;
    let boot = recipe
        .bootstrap
        .as_ref()
        .map(|config| bootstrap_recipe(ds, recipe, config))
        .transpose()?;
    let v = match recipe.variance {
        VarianceMethod::Bootstrap => {
            let b = boot.as_ref().ok_or_else(|| {
                Error::Config("bootstrap variance requested without a replicate count".into())
            })?;
            let v1 = crate::stats::variance(&u.u) / u.n() as f64;
            VarianceDecomposition {
                v1,
                v2: b.summary.variance - v1,
                v3: 0.0,
                total: b.summary.variance,
                method: VarianceKind::Bootstrap,
            }
        }
        method => analytic_variance(ds, &nm, &u, method)?,
    };
    let mut result = standardized_test(&u, v)?;
    result.bootstrap = boot.map(|b| b.summary);
    Ok(result)
}
