//! Case-control samplers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use super::{Scenario, ScenarioKind};
use crate::data::{Dataset, Exposure, ExposureKind};
use crate::error::{Error, Result};
use crate::stats::{expit, logit};

/// Truncation point of the standard-normal first exposure.
pub const NORMAL_TRUNCATION: f64 = 4.0;

/// `alpha3` giving the requested RERI when
/// `logit Pr(D = 1) = alpha0 + alpha1 a1 + alpha2 a2 + alpha3 a1 a2`.
pub fn alpha3_from_reri(alpha0: f64, alpha1: f64, alpha2: f64, reri: f64) -> Result<f64> {
    let inner = (reri - 1.0) * expit(alpha0) + expit(alpha0 + alpha1) + expit(alpha0 + alpha2);
    if !(inner > 0.0 && inner < 1.0) {
        return Err(Error::Scenario(format!(
            "RERI {reri} is infeasible for alpha0 = {alpha0}, alpha1 = {alpha1}, alpha2 = {alpha2} \
             (joint risk would be {inner})"
        )));
    }
    Ok(logit(inner) - alpha0 - alpha1 - alpha2)
}

/// RERI implied by the four cell risks of the logistic model.
pub fn reri_from_alphas(alpha0: f64, alpha1: f64, alpha2: f64, alpha3: f64) -> f64 {
    let r00 = expit(alpha0);
    (expit(alpha0 + alpha1 + alpha2 + alpha3) - expit(alpha0 + alpha1) - expit(alpha0 + alpha2))
        / r00
        + 1.0
}

/// Exposure law of the four cells `(0,0), (0,1), (1,0), (1,1)`:
/// `f ∝ f1(a1 | a2 = 0) f2(a2 | a1 = 0) exp(log_or a1 a2)`.
pub fn binary_exposure_cells(p_g: f64, p_e: f64, log_or: f64) -> [f64; 4] {
    let mut f = [
        (1.0 - p_g) * (1.0 - p_e),
        (1.0 - p_g) * p_e,
        p_g * (1.0 - p_e),
        p_g * p_e * log_or.exp(),
    ];
    let total: f64 = f.iter().sum();
    f.iter_mut().for_each(|v| *v /= total);
    f
}

/// `Pr(a1, a2 | D = 1)` and `Pr(a1, a2 | D = 0)` for a binary scenario.
pub fn retrospective_cells(sc: &Scenario) -> Result<([f64; 4], [f64; 4])> {
    let alpha3 = sc.alpha3()?;
    let f = binary_exposure_cells(sc.p_g, sc.p_e, sc.ge_log_or);
    let mut case = [0.0; 4];
    let mut control = [0.0; 4];
    for (k, fk) in f.iter().enumerate() {
        let (a1, a2) = ((k / 2) as f64, (k % 2) as f64);
        let risk = expit(sc.alpha0 + sc.alpha1 * a1 + sc.alpha2 * a2 + alpha3 * a1 * a2);
        case[k] = risk * fk;
        control[k] = (1.0 - risk) * fk;
    }
    for cells in [&mut case, &mut control] {
        let total: f64 = cells.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Scenario("a sampling stratum has probability zero".into()));
        }
        cells.iter_mut().for_each(|v| *v /= total);
    }
    Ok((case, control))
}

/// Multinomial counts by sequential binomial draws.
fn multinomial(rng: &mut ChaCha8Rng, n: usize, probs: &[f64]) -> Result<Vec<usize>> {
    let mut counts = Vec::with_capacity(probs.len());
    let mut remaining = n as u64;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        let c = if k + 1 == probs.len() {
            remaining
        } else if remaining == 0 || p <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .map_err(|e| Error::Scenario(format!("cell probability {q}: {e}")))?
                .sample(rng)
        };
        counts.push(c as usize);
        remaining -= c;
        mass -= p;
    }
    Ok(counts)
}

fn binary_dataset(
    rng: &mut ChaCha8Rng,
    sc: &Scenario,
) -> Result<Dataset> {
    let (case, control) = retrospective_cells(sc)?;
    let n = sc.n_cases + sc.n_controls;
    let (mut d, mut a1, mut a2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (status, quota, probs) in [(1u8, sc.n_cases, &case), (0u8, sc.n_controls, &control)] {
        for (k, count) in multinomial(rng, quota, probs)?.into_iter().enumerate() {
            for _ in 0..count {
                d.push(status);
                a1.push((k / 2) as f64);
                a2.push((k % 2) as f64);
            }
        }
    }
    Dataset::new(
        "d",
        d,
        Exposure::new("g", ExposureKind::Binary, a1),
        Exposure::new("e", ExposureKind::Binary, a2),
        vec![],
        None,
    )
}

/// Additive-null risk of the failure scenario:
/// `expit(c0 + c1 a1 + cx x) + expit(c0 + c2 a2 + cx x) - expit(c0 + cx x)`.
pub fn failure_risk(sc: &Scenario, a1: f64, a2: f64, x: f64) -> f64 {
    let base = sc.alpha0 + sc.covariate.alpha_x * x;
    expit(base + sc.alpha1 * a1) + expit(base + sc.alpha2 * a2) - expit(base)
}

/// Largest risk over the truncated support, used as the rejection bound.
fn failure_risk_bound(sc: &Scenario) -> Result<f64> {
    let mut bound: f64 = 0.0;
    for a1 in [-NORMAL_TRUNCATION, NORMAL_TRUNCATION] {
        for a2 in [0.0, 1.0] {
            for x in [0.0, 1.0] {
                let r = failure_risk(sc, a1, a2, x);
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::Scenario(format!(
                        "additive risk {r} at a1 = {a1}, a2 = {a2}, x = {x} leaves (0, 1)"
                    )));
                }
                bound = bound.max(r);
            }
        }
    }
    Ok(bound)
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= NORMAL_TRUNCATION {
            return z;
        }
    }
}

fn failure_dataset(rng: &mut ChaCha8Rng, sc: &Scenario) -> Result<Dataset> {
    let bound = failure_risk_bound(sc)?;
    let cov = sc.covariate;
    let n = sc.n_cases + sc.n_controls;
    let mut rows: Vec<(u8, f64, f64, f64)> = Vec::with_capacity(n);
    // cases accept with probability risk / bound, controls with 1 - risk
    for (status, quota) in [(1u8, sc.n_cases), (0u8, sc.n_controls)] {
        let max_draws = quota as u64 * 1_000_000;
        let mut filled = 0;
        let mut draws = 0u64;
        while filled < quota {
            draws += 1;
            if draws > max_draws {
                return Err(Error::Scenario("case or control quota could not be filled".into()));
            }
            let x = f64::from(u8::from(rng.random::<f64>() < cov.p_x));
            let a1 = truncated_normal(rng);
            let p2 = expit(logit(sc.p_e) + cov.gamma_x * x);
            let a2 = f64::from(u8::from(rng.random::<f64>() < p2));
            let risk = failure_risk(sc, a1, a2, x);
            let accept = if status == 1 { risk / bound } else { 1.0 - risk };
            if rng.random::<f64>() < accept {
                rows.push((status, a1, a2, x));
                filled += 1;
            }
        }
    }
    let a1_exposure = if sc.dichotomize {
        Exposure::new(
            "a1",
            ExposureKind::Binary,
            rows.iter().map(|r| f64::from(u8::from(r.1 > 0.0))).collect(),
        )
    } else {
        Exposure::new("a1", ExposureKind::Continuous, rows.iter().map(|r| r.1).collect())
    };
    Dataset::new(
        "d",
        rows.iter().map(|r| r.0).collect(),
        a1_exposure,
        Exposure::new("a2", ExposureKind::Binary, rows.iter().map(|r| r.2).collect()),
        vec![("x".to_string(), rows.iter().map(|r| r.3).collect())],
        None,
    )
}

/// One case-control sample drawn with the given random stream.
pub fn generate_with(rng: &mut ChaCha8Rng, sc: &Scenario) -> Result<Dataset> {
    sc.validate()?;
    match sc.kind {
        ScenarioKind::BinaryBinary => binary_dataset(rng, sc),
        ScenarioKind::ContinuousNullFailure => failure_dataset(rng, sc),
    }
}
