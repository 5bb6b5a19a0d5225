use serde::Serialize;
use std::collections::BTreeMap;

use crate::data::{Dataset, Exposure};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCount {
    pub level: i64,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

/// Distribution of one exposure within one outcome stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum StratumSummary {
    Levels(Vec<LevelCount>),
    Moments(Moments),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureSummary {
    pub name: String,
    pub kind: String,
    pub cases: StratumSummary,
    pub controls: StratumSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub cases: usize,
    pub controls: usize,
    /// False when either stratum is empty; no test can run on such data.
    pub usable_for_testing: bool,
    pub weighted: bool,
    pub a1: ExposureSummary,
    pub a2: ExposureSummary,
}

fn stratum(exposure: &Exposure, rows: &[usize]) -> StratumSummary {
    if rows.is_empty() {
        return StratumSummary::Empty;
    }
    let vals: Vec<f64> = rows.iter().map(|&i| exposure.values[i]).collect();
    if exposure.kind.is_discrete() && !matches!(exposure.kind, crate::data::ExposureKind::Count) {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for v in &vals {
            *counts.entry(*v as i64).or_default() += 1;
        }
        StratumSummary::Levels(
            counts
                .into_iter()
                .map(|(level, count)| LevelCount {
                    level,
                    count,
                    frequency: count as f64 / vals.len() as f64,
                })
                .collect(),
        )
    } else {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        StratumSummary::Moments(Moments {
            mean,
            sd: var.sqrt(),
        })
    }
}

fn exposure_summary(exposure: &Exposure, cases: &[usize], controls: &[usize]) -> ExposureSummary {
    ExposureSummary {
        name: exposure.name.clone(),
        kind: exposure.kind.to_string(),
        cases: stratum(exposure, cases),
        controls: stratum(exposure, controls),
    }
}

/// Case/control counts and per-exposure distributions stratified by outcome.
/// Binary and categorical exposures report level frequencies; counts and
/// continuous exposures report mean and standard deviation.
pub fn summarize(ds: &Dataset) -> Summary {
    let (cases, controls): (Vec<usize>, Vec<usize>) = (0..ds.n()).partition(|&i| ds.is_case(i));
    Summary {
        n: ds.n(),
        cases: cases.len(),
        controls: controls.len(),
        usable_for_testing: !cases.is_empty() && !controls.is_empty(),
        weighted: ds.weights().is_some(),
        a1: exposure_summary(ds.a1(), &cases, &controls),
        a2: exposure_summary(ds.a2(), &cases, &controls),
    }
}
