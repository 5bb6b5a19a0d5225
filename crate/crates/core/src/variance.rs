//! Variance of the mean contribution `sum u / n`.
//!
//! Three estimators:
//! - the closed-form binary decomposition (binary exposures, no covariates,
//!   control-fitted logit models);
//! - the sandwich, combining `u` with the stacked influence contributions of
//!   the nuisance parameters through the Jacobian of `mean u` in `theta`;
//! - a nonparametric bootstrap that refits every nuisance model per replicate.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::data::{Dataset, ExposureKind};
use crate::error::{Error, Result};
use crate::interaction::{mean_u, UVector};
use crate::nuisance::{ExposureFamily, FitSample, NuisanceModels, Which};
use crate::rng::{self, Domain};
use crate::stats::{covariance, quantile_sorted, variance};

/// Largest fraction of bootstrap replicates that may fail.
pub const MAX_DROPPED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceKind {
    ClosedFormBinary,
    Sandwich,
    Bootstrap,
}

impl fmt::Display for VarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceKind::ClosedFormBinary => "closed-form-binary",
            VarianceKind::Sandwich => "sandwich",
            VarianceKind::Bootstrap => "bootstrap",
        })
    }
}

/// `total = v1 + v2 + v3`.
///
/// `v1` is the core term `Var(u) / n`, `v2` the cost of estimating the
/// baseline exposure models and `v3` the cost of estimating `omega` (zero
/// under independence). A bootstrap total is not decomposed: `v2` then holds
/// `total - v1` and `v3` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub total: f64,
    pub method: VarianceKind,
}

impl VarianceDecomposition {
    pub fn new(v1: f64, v2: f64, v3: f64, method: VarianceKind) -> Self {
        Self {
            v1,
            v2,
            v3,
            total: v1 + v2 + v3,
            method,
        }
    }
}

fn require_binary_setup(ds: &Dataset, nm: &NuisanceModels) -> Result<()> {
    let binary = ds.a1().kind == ExposureKind::Binary && ds.a2().kind == ExposureKind::Binary;
    let logit = nm.a1_model.family == ExposureFamily::Logit && nm.a2_model.family == ExposureFamily::Logit;
    if !binary || !logit || !nm.plan.covariates.is_empty() || nm.fit_sample() != FitSample::Controls {
        return Err(Error::Unsupported(
            "the closed-form variance covers binary exposures without covariates, fitted on controls"
                .into(),
        ));
    }
    Ok(())
}

/// Sample means entering the closed form and the analytic Jacobian.
struct BinaryMoments {
    p1: f64,
    p2: f64,
    c1: f64,
    c2: f64,
    c3: f64,
}

fn binary_moments(ds: &Dataset, nm: &NuisanceModels) -> Result<BinaryMoments> {
    let p1 = nm.baseline_mean(Which::A1, &[])?;
    let p2 = nm.baseline_mean(Which::A2, &[])?;
    let (mut c1, mut c2, mut c3) = (0.0, 0.0, 0.0);
    for i in (0..ds.n()).filter(|&i| ds.is_case(i)) {
        let (a1, a2) = (ds.a1().values[i], ds.a2().values[i]);
        let tilt = nm.inverse_odds_ratio(a1, a2);
        c1 += tilt * (a2 - p2);
        c2 += tilt * (a1 - p1);
        c3 += a1 * a2 * tilt * (a1 - p1) * (a2 - p2);
    }
    let n = ds.n() as f64;
    Ok(BinaryMoments {
        p1,
        p2,
        c1: c1 / n,
        c2: c2 / n,
        c3: c3 / n,
    })
}

/// Plug-in closed form for binary exposures without covariates.
///
/// With `P0` the control fraction and `m1`, `m2` the control means,
/// `Z1 = (1-D)(A1-m1)/P0`, `Z2 = (1-D)(A2-m2)/P0` and
/// `Z3 = (1-D)(A1-m1)(A2-m2)/P0` are the influence contributions of the
/// control means and covariance. Then
///
/// ```text
/// V1 = Var(u)/n
/// V2 = (c1^2 Var Z1 + c2^2 Var Z2)/n
/// V3 = B^2 Var(Z3)/n,  B = c1/(1-m2) + c2/(1-m1) - c3/(m1(1-m1)m2(1-m2))
/// ```
///
/// where `c1 = mean(OR^-1 (A2-p2) D)`, `c2 = mean(OR^-1 (A1-p1) D)` and
/// `c3 = mean(A1 A2 OR^-1 (A1-p1)(A2-p2) D)`. `independence` drops `V3`.
pub fn closed_form_binary_variance(
    ds: &Dataset,
    nm: &NuisanceModels,
    independence: bool,
) -> Result<VarianceDecomposition> {
    require_binary_setup(ds, nm)?;
    ds.require_both_strata()?;
    let n = ds.n() as f64;
    let controls: Vec<usize> = (0..ds.n()).filter(|&i| !ds.is_case(i)).collect();
    let p0 = controls.len() as f64 / n;
    let m1 = controls.iter().map(|&i| ds.a1().values[i]).sum::<f64>() / controls.len() as f64;
    let m2 = controls.iter().map(|&i| ds.a2().values[i]).sum::<f64>() / controls.len() as f64;
    let interior = |p: f64| p > 0.0 && p < 1.0;
    if !interior(m1) || !interior(m2) {
        return Err(Error::Degenerate(format!(
            "control exposure frequencies {m1}, {m2} must lie in (0, 1)"
        )));
    }
    let m = binary_moments(ds, nm)?;
    if !interior(m.p1) || !interior(m.p2) {
        return Err(Error::Degenerate(format!(
            "baseline frequencies {}, {} must lie in (0, 1)",
            m.p1, m.p2
        )));
    }

    let mut u = vec![0.0; ds.n()];
    let (mut z1, mut z2, mut z3) = (vec![0.0; ds.n()], vec![0.0; ds.n()], vec![0.0; ds.n()]);
    for i in 0..ds.n() {
        let (a1, a2) = (ds.a1().values[i], ds.a2().values[i]);
        if ds.is_case(i) {
            u[i] = nm.inverse_odds_ratio(a1, a2) * (a1 - m.p1) * (a2 - m.p2);
        } else {
            z1[i] = (a1 - m1) / p0;
            z2[i] = (a2 - m2) / p0;
            z3[i] = (a1 - m1) * (a2 - m2) / p0;
        }
    }
    let v1 = variance(&u) / n;
    let v2 = (m.c1.powi(2) * variance(&z1) + m.c2.powi(2) * variance(&z2)) / n;
    let v3 = if independence {
        0.0
    } else {
        let b = m.c1 / (1.0 - m2) + m.c2 / (1.0 - m1) - m.c3 / (m1 * (1.0 - m1) * m2 * (1.0 - m2));
        b * b * variance(&z3) / n
    };
    Ok(VarianceDecomposition::new(v1, v2, v3, VarianceKind::ClosedFormBinary))
}

/// Derivative of `mean u` in `theta = (gamma0, omega, delta0, delta1)`, or
/// `(gamma0, delta0)` under independence, for binary exposures without
/// covariates: `(-c1 p1 q1, -c3, -c2 p2 q2, 0)`.
pub fn analytic_binary_jacobian(ds: &Dataset, nm: &NuisanceModels) -> Result<Vec<f64>> {
    require_binary_setup(ds, nm)?;
    let m = binary_moments(ds, nm)?;
    let d1 = -m.c1 * m.p1 * (1.0 - m.p1);
    let d2 = -m.c2 * m.p2 * (1.0 - m.p2);
    Ok(if nm.independence() {
        vec![d1, d2]
    } else {
        vec![d1, -m.c3, d2, 0.0]
    })
}

/// Central-difference gradient with step `max(1e-6, 1e-6 |theta_k|)`.
pub fn numeric_jacobian(
    f: impl Fn(&[f64]) -> Result<f64>,
    theta: &[f64],
) -> Result<Vec<f64>> {
    let mut point = theta.to_vec();
    (0..theta.len())
        .map(|k| {
            let h = (1e-6 * theta[k].abs()).max(1e-6);
            point[k] = theta[k] + h;
            let up = f(&point)?;
            point[k] = theta[k] - h;
            let down = f(&point)?;
            point[k] = theta[k];
            let slope = (up - down) / (2.0 * h);
            if slope.is_finite() {
                Ok(slope)
            } else {
                Err(Error::NonFinite(format!("Jacobian entry {k}")))
            }
        })
        .collect()
}

/// Numeric Jacobian of `mean u` in the stacked nuisance parameter.
pub fn mean_u_jacobian(ds: &Dataset, u: &UVector) -> Result<Vec<f64>> {
    let nm = &u.nuisance;
    numeric_jacobian(|theta| mean_u(ds, &nm.with_theta(theta)?, &u.g), &nm.theta())
}

/// Sandwich variance `Var(u + J' IF) / n`.
///
/// The nuisance part `J' IF` is split into the omega contribution `b` and the
/// rest `a`. Writing `a = beta b + a_perp`, `v3 = (1 + beta)^2 Var(b) / n`
/// and `v2` is the remainder, so `v3` is zero under independence and never
/// negative.
pub fn sandwich_variance(u: &UVector, jac: &[f64]) -> Result<VarianceDecomposition> {
    let nm = &u.nuisance;
    if jac.len() != nm.theta_dim() {
        return Err(Error::Dimension {
            expected: nm.theta_dim(),
            got: jac.len(),
        });
    }
    let n = u.n();
    let omega = nm.omega_index();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut phi = vec![0.0; n];
    for i in 0..n {
        let row = nm.influence_row(i);
        for (k, (&j, &f)) in jac.iter().zip(row).enumerate() {
            if Some(k) == omega {
                b[i] += j * f;
            } else {
                a[i] += j * f;
            }
        }
        phi[i] = u.u[i] + a[i] + b[i];
    }
    let nf = n as f64;
    let v1 = variance(&u.u) / nf;
    let total = variance(&phi) / nf;
    let vb = variance(&b);
    let v3 = if vb > 0.0 {
        let beta = covariance(&a, &b) / vb;
        (1.0 + beta).powi(2) * vb / nf
    } else {
        0.0
    };
    if !total.is_finite() {
        return Err(Error::NonFinite("sandwich variance".into()));
    }
    Ok(VarianceDecomposition {
        v1,
        v2: total - v1 - v3,
        v3,
        total,
        method: VarianceKind::Sandwich,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Resample cases and controls separately, keeping both counts fixed.
    pub stratified: bool,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            stratified: true,
        }
    }
}

/// Bootstrap summary attached to a test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Replicates that produced a statistic.
    pub replicates: usize,
    pub dropped: usize,
    pub variance: f64,
    /// Percentile 95% interval of the replicate means.
    pub ci: (f64, f64),
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub observed: f64,
    /// Successful replicate statistics in replicate order.
    pub values: Vec<f64>,
    pub summary: BootstrapSummary,
}

/// Row indices of bootstrap replicate `r`.
pub fn resample_rows(ds: &Dataset, config: &BootstrapConfig, r: usize) -> Vec<usize> {
    let mut rng = rng::stream(config.seed, Domain::Bootstrap, 0, r as u32);
    if config.stratified {
        let cases: Vec<usize> = (0..ds.n()).filter(|&i| ds.is_case(i)).collect();
        let controls: Vec<usize> = (0..ds.n()).filter(|&i| !ds.is_case(i)).collect();
        let mut rows = Vec::with_capacity(ds.n());
        for group in [&cases, &controls] {
            rows.extend((0..group.len()).map(|_| group[rng.random_range(0..group.len())]));
        }
        rows
    } else {
        (0..ds.n()).map(|_| rng.random_range(0..ds.n())).collect()
    }
}

/// Nonparametric bootstrap of a scalar statistic.
///
/// Replicates run in parallel, each on its own random stream. Failed
/// replicates are dropped; more than 5% failures is an error. The p-value
/// recentres the replicates at the observed value and reports twice the
/// smaller tail fraction, floored at `1/B`.
pub fn bootstrap(
    ds: &Dataset,
    config: &BootstrapConfig,
    statistic: impl Fn(&Dataset) -> Result<f64> + Sync,
) -> Result<BootstrapResult> {
    if config.replicates < 100 {
        return Err(Error::Config(format!(
            "at least 100 bootstrap replicates are required (got {})",
            config.replicates
        )));
    }
    let observed = statistic(ds)?;
    let outcomes: Vec<Option<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let sample = ds.select_rows(&resample_rows(ds, config, r));
            statistic(&sample).ok().filter(|v| v.is_finite())
        })
        .collect();
    let values: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let dropped = config.replicates - values.len();
    if dropped as f64 > MAX_DROPPED_FRACTION * config.replicates as f64 {
        return Err(Error::Bootstrap {
            dropped,
            requested: config.replicates,
        });
    }
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let b = values.len() as f64;
    let upper = values.iter().filter(|&&v| v - observed >= observed).count() as f64 / b;
    let lower = values.iter().filter(|&&v| v - observed <= observed).count() as f64 / b;
    let p_value = (2.0 * upper.min(lower)).clamp(1.0 / config.replicates as f64, 1.0);
    let summary = BootstrapSummary {
        replicates: values.len(),
        dropped,
        variance: variance(&values),
        ci: (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975)),
        p_value,
    };
    Ok(BootstrapResult {
        observed,
        values,
        summary,
    })
}
