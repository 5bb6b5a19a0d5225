//! Exhaustive enumeration over fully specified discrete populations.
//!
//! The joint exposure law in stratum `x` is
//! `f(a1, a2 | x) ∝ f1(a1 | a2 = 0, x) f2(a2 | a1 = 0, x) OR(a1, a2; x)`,
//! so a population is given by its two baseline laws, its log odds-ratio
//! table and its risk table. Expectations are exact finite sums.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationStratum {
    /// Covariate row passed to the contrast.
    pub x: Vec<f64>,
    /// Population probability of this stratum.
    pub prob: f64,
    /// `f1(a1 | a2 = 0, x)` over the first support.
    pub base1: Vec<f64>,
    /// `f2(a2 | a1 = 0, x)` over the second support.
    pub base2: Vec<f64>,
    /// `log OR(a1, a2; x)` indexed `[i1][i2]`; zero on the reference row and column.
    pub log_or: Vec<Vec<f64>>,
    /// Disease risk `mu(a1, a2, x)` indexed `[i1][i2]`.
    pub risk: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePopulation {
    /// Values of the first exposure; must contain the reference value 0.
    pub a1_support: Vec<f64>,
    pub a2_support: Vec<f64>,
    pub strata: Vec<PopulationStratum>,
}

fn reference_index(support: &[f64], which: &str) -> Result<usize> {
    if support.is_empty() {
        return Err(Error::Config(format!("{which} support is empty")));
    }
    support
        .iter()
        .position(|&v| v == 0.0)
        .ok_or_else(|| Error::Config(format!("{which} support lacks the reference value 0")))
}

fn check_law(law: &[f64], len: usize, which: &str) -> Result<()> {
    if law.len() != len {
        return Err(Error::Dimension {
            expected: len,
            got: law.len(),
        });
    }
    let total: f64 = law.iter().sum();
    if law.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("{which} baseline law is not a probability vector")));
    }
    Ok(())
}

impl DiscretePopulation {
    /// Independent binary exposures with `Pr(A_j = 1) = pi_j` and risk
    /// `b0 + b1 a1 + b2 a2 + b3 a1 a2`, no covariates.
    pub fn binary_independent(pi1: f64, pi2: f64, beta: [f64; 4]) -> Self {
        let [b0, b1, b2, b3] = beta;
        let risk = (0..2)
            .map(|i| {
                (0..2)
                    .map(|j| {
                        let (a1, a2) = (i as f64, j as f64);
                        b0 + b1 * a1 + b2 * a2 + b3 * a1 * a2
                    })
                    .collect()
            })
            .collect();
        DiscretePopulation {
            a1_support: vec![0.0, 1.0],
            a2_support: vec![0.0, 1.0],
            strata: vec![PopulationStratum {
                x: Vec::new(),
                prob: 1.0,
                base1: vec![1.0 - pi1, pi1],
                base2: vec![1.0 - pi2, pi2],
                log_or: vec![vec![0.0; 2]; 2],
                risk,
            }],
        }
    }

    fn validate(&self) -> Result<(usize, usize)> {
        let r1 = reference_index(&self.a1_support, "first exposure")?;
        let r2 = reference_index(&self.a2_support, "second exposure")?;
        let (k1, k2) = (self.a1_support.len(), self.a2_support.len());
        if self.strata.is_empty() {
            return Err(Error::Config("population has no strata".into()));
        }
        let total: f64 = self.strata.iter().map(|s| s.prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config("stratum probabilities do not sum to 1".into()));
        }
        for s in &self.strata {
            check_law(&s.base1, k1, "first")?;
            check_law(&s.base2, k2, "second")?;
            let shape_ok = |t: &Vec<Vec<f64>>| t.len() == k1 && t.iter().all(|r| r.len() == k2);
            if !shape_ok(&s.log_or) || !shape_ok(&s.risk) {
                return Err(Error::Dimension {
                    expected: k1 * k2,
                    got: s.risk.iter().map(Vec::len).sum(),
                });
            }
            let ref_ok =
                (0..k1).all(|i| s.log_or[i][r2] == 0.0) && (0..k2).all(|j| s.log_or[r1][j] == 0.0);
            if !ref_ok {
                return Err(Error::Config(
                    "log odds ratio must vanish at the reference levels".into(),
                ));
            }
            if s.risk.iter().flatten().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::Config("risk outside [0, 1]".into()));
            }
        }
        Ok((r1, r2))
    }
}

impl PopulationStratum {
    /// Normalized joint exposure law `f(a1, a2 | x)`.
    pub fn joint(&self) -> Vec<Vec<f64>> {
        let mut f: Vec<Vec<f64>> = self
            .base1
            .iter()
            .zip(&self.log_or)
            .map(|(p1, row)| {
                self.base2
                    .iter()
                    .zip(row)
                    .map(|(p2, lor)| p1 * p2 * lor.exp())
                    .collect()
            })
            .collect();
        let c: f64 = f.iter().flatten().sum();
        f.iter_mut().flatten().for_each(|v| *v /= c);
        f
    }

    /// `Pr(D = 1 | x)`.
    pub fn prevalence(&self) -> f64 {
        self.joint()
            .iter()
            .zip(&self.risk)
            .flat_map(|(f, m)| f.iter().zip(m).map(|(a, b)| a * b))
            .sum()
    }
}

/// `Pr(D = 1)` of the population.
pub fn disease_prevalence(pop: &DiscretePopulation) -> Result<f64> {
    pop.validate()?;
    Ok(pop.strata.iter().map(|s| s.prob * s.prevalence()).sum())
}

/// Exact `E{W(g) | D = 1, x}` for every stratum, with `W` built from the
/// population's own baseline laws and odds ratio.
pub fn brute_force_expectation(
    pop: &DiscretePopulation,
    g: &dyn Fn(f64, f64, &[f64]) -> f64,
) -> Result<Vec<f64>> {
    pop.validate()?;
    let (s1, s2) = (&pop.a1_support, &pop.a2_support);
    pop.strata
        .iter()
        .map(|s| {
            let x = s.x.as_slice();
            let over_a2: Vec<f64> = s1
                .iter()
                .map(|&a1| s2.iter().zip(&s.base2).map(|(&v, p)| g(a1, v, x) * p).sum())
                .collect();
            let over_a1: Vec<f64> = s2
                .iter()
                .map(|&a2| s1.iter().zip(&s.base1).map(|(&v, p)| g(v, a2, x) * p).sum())
                .collect();
            let both: f64 = s.base2.iter().zip(&over_a1).map(|(p2, m)| p2 * m).sum();
            let joint = s.joint();
            let mut numerator = 0.0;
            let mut cases = 0.0;
            for (i, &a1) in s1.iter().enumerate() {
                for (j, &a2) in s2.iter().enumerate() {
                    let mass = joint[i][j] * s.risk[i][j];
                    let w = (-s.log_or[i][j]).exp() * (g(a1, a2, x) - over_a2[i] - over_a1[j] + both);
                    numerator += mass * w;
                    cases += mass;
                }
            }
            if !(cases > 0.0) {
                return Err(Error::Degenerate("stratum without cases".into()));
            }
            Ok(numerator / cases)
        })
        .collect()
}
