//! Maximum-likelihood fitting for the exposure and outcome regressions:
//! Bernoulli-logit, Poisson-log, Gaussian-identity and multinomial-logit,
//! all with optional observation weights.
//!
//! Every family uses its canonical link, so Newton-Raphson and Fisher
//! scoring coincide and the observed information is `X' W V X`. Fits use
//! step-halving whenever a full Newton step lowers the log-likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCORE_TOLERANCE: f64 = 1e-8;
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
pub const PIVOT_RATIO: f64 = 1e-12;
const MAX_HALVINGS: usize = 50;
// Fitted probabilities closer than this to 0 or 1 signal separation.
const SEPARATION_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    BernoulliLogit,
    PoissonLog,
    GaussianIdentity,
    /// Response coded `0..categories`, with 0 the reference category.
    MultinomialLogit { categories: usize },
}

impl Family {
    /// Number of linear predictors.
    pub fn n_predictors(self) -> usize {
        match self {
            Family::MultinomialLogit { categories } => categories - 1,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlmSpec {
    pub family: Family,
    /// Prepend a column of ones to the design.
    pub intercept: bool,
}

impl GlmSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            intercept: true,
        }
    }
}

/// Dense row-major design matrix (without the intercept column).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension {
                expected: nrows * ncols,
                got: data.len(),
            });
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Dimension {
                    expected: ncols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            nrows: rows.len(),
            ncols,
            data,
        })
    }

    /// A design with no columns; combined with an intercept this gives an
    /// intercept-only model.
    pub fn empty(nrows: usize) -> Self {
        Self {
            nrows,
            ncols: 0,
            data: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Mean(f64),
    /// Category probabilities, reference category first.
    Probabilities(Vec<f64>),
}

/// Result of a converged fit. Immutable; use [`GlmFit::with_coefficients`]
/// to evaluate predictions at a perturbed parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    spec: GlmSpec,
    n_features: usize,
    coefficients: Vec<f64>,
    information: DMatrix<f64>,
    // n x n_params, row-major, one row per fitted observation
    scores: Vec<f64>,
    iterations: usize,
    score_norm: f64,
    log_likelihood: f64,
}

fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn log1p_exp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Probabilities for `K` categories from `K - 1` linear predictors.
fn softmax_with_reference(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().copied().fold(0.0_f64, f64::max);
    let mut p = Vec::with_capacity(eta.len() + 1);
    p.push((-m).exp());
    p.extend(eta.iter().map(|e| (e - m).exp()));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

struct Problem<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    w: Option<&'a [f64]>,
    family: Family,
    intercept: bool,
}

impl Problem<'_> {
    fn n_cols(&self) -> usize {
        self.x.ncols() + usize::from(self.intercept)
    }

    fn n_params(&self) -> usize {
        self.n_cols() * self.family.n_predictors()
    }

    fn weight(&self, i: usize) -> f64 {
        self.w.map_or(1.0, |w| w[i])
    }

    fn full_row(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        if self.intercept {
            buf.push(1.0);
        }
        buf.extend_from_slice(self.x.row(i));
    }

    fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let q = self.n_cols();
        let mut row = Vec::with_capacity(q);
        let mut ll = 0.0;
        for i in 0..self.x.nrows() {
            self.full_row(i, &mut row);
            let w = self.weight(i);
            let y = self.y[i];
            ll += w * match self.family {
                Family::BernoulliLogit => {
                    let eta = dot(&row, beta);
                    y * eta - log1p_exp(eta)
                }
                Family::PoissonLog => {
                    let eta = dot(&row, beta);
                    y * eta - eta.exp()
                }
                Family::GaussianIdentity => {
                    let r = y - dot(&row, beta);
                    -0.5 * r * r
                }
                Family::MultinomialLogit { categories } => {
                    let etas: Vec<f64> = (0..categories - 1)
                        .map(|k| dot(&row, &beta[k * q..(k + 1) * q]))
                        .collect();
                    let m = etas.iter().copied().fold(0.0_f64, f64::max);
                    let lse = m + ((-m).exp() + etas.iter().map(|e| (e - m).exp()).sum::<f64>()).ln();
                    let level = y as usize;
                    let own = if level == 0 { 0.0 } else { etas[level - 1] };
                    own - lse
                }
            };
        }
        ll
    }

    /// Per-observation scores (n x n_params) and the summed information.
    fn derivatives(&self, beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let q = self.n_cols();
        let np = self.n_params();
        let n = self.x.nrows();
        let mut scores = vec![0.0; n * np];
        let mut info = DMatrix::<f64>::zeros(np, np);
        let mut row = Vec::with_capacity(q);
        for i in 0..n {
            self.full_row(i, &mut row);
            let w = self.weight(i);
            let y = self.y[i];
            let s = &mut scores[i * np..(i + 1) * np];
            match self.family {
                Family::MultinomialLogit { categories } => {
                    let etas: Vec<f64> = (0..categories - 1)
                        .map(|k| dot(&row, &beta[k * q..(k + 1) * q]))
                        .collect();
                    let p = softmax_with_reference(&etas);
                    let level = y as usize;
                    for k in 0..categories - 1 {
                        let resid = f64::from(u8::from(level == k + 1)) - p[k + 1];
                        for (a, xa) in row.iter().enumerate() {
                            s[k * q + a] = w * xa * resid;
                        }
                        for l in 0..categories - 1 {
                            let v = w * p[k + 1] * (f64::from(u8::from(k == l)) - p[l + 1]);
                            for (a, xa) in row.iter().enumerate() {
                                for (b, xb) in row.iter().enumerate() {
                                    info[(k * q + a, l * q + b)] += v * xa * xb;
                                }
                            }
                        }
                    }
                }
                family => {
                    let eta = dot(&row, beta);
                    let (mu, var) = match family {
                        Family::BernoulliLogit => {
                            let mu = expit(eta);
                            (mu, mu * (1.0 - mu))
                        }
                        Family::PoissonLog => {
                            let mu = eta.exp();
                            (mu, mu)
                        }
                        _ => (eta, 1.0),
                    };
                    for (a, xa) in row.iter().enumerate() {
                        s[a] = w * xa * (y - mu);
                        for (b, xb) in row.iter().enumerate().skip(a) {
                            info[(a, b)] += w * var * xa * xb;
                        }
                    }
                }
            }
        }
        if self.family.n_predictors() == 1 {
            for a in 0..np {
                for b in 0..a {
                    info[(a, b)] = info[(b, a)];
                }
            }
        }
        (scores, info)
    }

    fn start(&self) -> Result<Vec<f64>> {
        let mut beta = vec![0.0; self.n_params()];
        if !self.intercept {
            return Ok(beta);
        }
        let total_w: f64 = (0..self.x.nrows()).map(|i| self.weight(i)).sum();
        let mean = |pred: &dyn Fn(f64) -> f64| {
            (0..self.x.nrows())
                .map(|i| self.weight(i) * pred(self.y[i]))
                .sum::<f64>()
                / total_w
        };
        let diverge = |reason: &str| Error::Divergence {
            iterations: 0,
            score_norm: f64::NAN,
            reason: reason.into(),
            coefficients: Vec::new(),
        };
        let q = self.n_cols();
        match self.family {
            Family::BernoulliLogit => {
                let m = mean(&|y| y);
                if m <= 0.0 || m >= 1.0 {
                    return Err(diverge("response is constant (complete separation)"));
                }
                beta[0] = (m / (1.0 - m)).ln();
            }
            Family::PoissonLog => {
                let m = mean(&|y| y);
                if m <= 0.0 {
                    return Err(diverge("all counts are zero"));
                }
                beta[0] = m.ln();
            }
            Family::GaussianIdentity => beta[0] = mean(&|y| y),
            Family::MultinomialLogit { categories } => {
                let p0 = mean(&|y| f64::from(u8::from(y == 0.0)));
                for k in 1..categories {
                    let pk = mean(&|y| f64::from(u8::from(y == k as f64)));
                    if pk <= 0.0 || p0 <= 0.0 {
                        return Err(diverge("a response category is empty"));
                    }
                    beta[(k - 1) * q] = (pk / p0).ln();
                }
            }
        }
        Ok(beta)
    }

    fn check_response(&self) -> Result<()> {
        for (i, &y) in self.y.iter().enumerate() {
            let ok = match self.family {
                Family::BernoulliLogit => y == 0.0 || y == 1.0,
                Family::PoissonLog => y >= 0.0 && y.fract() == 0.0,
                Family::GaussianIdentity => y.is_finite(),
                Family::MultinomialLogit { categories } => {
                    y >= 0.0 && y.fract() == 0.0 && (y as usize) < categories
                }
            };
            if !ok {
                return Err(Error::Validation {
                    row: i + 1,
                    message: format!("response {y} incompatible with {:?}", self.family),
                });
            }
        }
        Ok(())
    }

    fn separated(&self, beta: &[f64]) -> bool {
        let q = self.n_cols();
        let mut row = Vec::with_capacity(q);
        (0..self.x.nrows()).any(|i| {
            self.full_row(i, &mut row);
            match self.family {
                Family::BernoulliLogit => {
                    let p = expit(dot(&row, beta));
                    p < SEPARATION_EPS || p > 1.0 - SEPARATION_EPS
                }
                Family::MultinomialLogit { categories } => {
                    let etas: Vec<f64> = (0..categories - 1)
                        .map(|k| dot(&row, &beta[k * q..(k + 1) * q]))
                        .collect();
                    softmax_with_reference(&etas)
                        .iter()
                        .any(|&p| p < SEPARATION_EPS)
                }
                _ => false,
            }
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn column_sums(scores: &[f64], np: usize) -> Vec<f64> {
    let mut total = vec![0.0; np];
    for chunk in scores.chunks_exact(np) {
        for (t, s) in total.iter_mut().zip(chunk) {
            *t += s;
        }
    }
    total
}

/// Cholesky factor of a symmetric positive-definite matrix, rejecting
/// numerically rank-deficient input (smallest pivot below
/// `PIVOT_RATIO` times the largest).
pub(crate) fn spd_cholesky(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    let pivots: Vec<f64> = chol.l_dirty().diagonal().iter().map(|d| d * d).collect();
    let max = pivots.iter().copied().fold(0.0_f64, f64::max);
    let min = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < PIVOT_RATIO * max {
        return Err(Error::Singular(format!(
            "pivot ratio {:e} below threshold",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(chol)
}

/// Weighted maximum-likelihood fit. Deterministic for fixed input.
pub fn fit_glm(
    x: &DesignMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    spec: &GlmSpec,
) -> Result<GlmFit> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != x.nrows() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                got: w.len(),
            });
        }
        if w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidData("observation weights must be positive".into()));
        }
    }
    if let Family::MultinomialLogit { categories } = spec.family {
        if categories < 2 {
            return Err(Error::Config("multinomial family needs at least 2 categories".into()));
        }
    }
    let problem = Problem {
        x,
        y,
        w: weights,
        family: spec.family,
        intercept: spec.intercept,
    };
    let np = problem.n_params();
    if x.nrows() <= np / spec.family.n_predictors() {
        return Err(Error::Singular(format!(
            "{} observations for {} parameters per predictor",
            x.nrows(),
            np / spec.family.n_predictors()
        )));
    }
    problem.check_response()?;

    let mut beta = problem.start()?;
    let mut ll = problem.log_likelihood(&beta);
    let (mut scores, mut info) = problem.derivatives(&beta);
    let mut grad = column_sums(&scores, np);
    let mut iterations = 0;
    loop {
        let score_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if score_norm <= SCORE_TOLERANCE && iterations > 0 {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Divergence {
                iterations,
                score_norm,
                reason: "iteration limit reached".into(),
                coefficients: beta,
            });
        }
        let chol = spd_cholesky(&info)?;
        let step = chol.solve(&DVector::from_column_slice(&grad));
        let mut scale = 1.0;
        let mut candidate: Vec<f64>;
        let mut cand_ll;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            cand_ll = problem.log_likelihood(&candidate);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::Divergence {
                    iterations,
                    score_norm,
                    reason: "step-halving failed to increase the likelihood".into(),
                    coefficients: beta,
                });
            }
            scale *= 0.5;
        }
        iterations += 1;
        let change = step.iter().fold(0.0_f64, |m, s| m.max((scale * s).abs()));
        let size = beta.iter().fold(1.0_f64, |m, b| m.max(b.abs()));
        beta = candidate;
        ll = cand_ll;
        (scores, info) = problem.derivatives(&beta);
        grad = column_sums(&scores, np);
        if change <= STEP_TOLERANCE * size {
            break;
        }
    }
    let score_norm = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    if problem.separated(&beta) {
        return Err(Error::Divergence {
            iterations,
            score_norm,
            reason: "fitted probabilities numerically 0 or 1 (separation)".into(),
            coefficients: beta,
        });
    }
    spd_cholesky(&info)?;
    Ok(GlmFit {
        spec: *spec,
        n_features: x.ncols(),
        coefficients: beta,
        information: info,
        scores,
        iterations,
        score_norm,
        log_likelihood: ll,
    })
}

/// Log-likelihood up to an additive constant (Poisson omits `log y!`,
/// Gaussian uses unit variance).
pub fn log_likelihood(
    x: &DesignMatrix,
    y: &[f64],
    weights: Option<&[f64]>,
    spec: &GlmSpec,
    coefficients: &[f64],
) -> f64 {
    Problem {
        x,
        y,
        w: weights,
        family: spec.family,
        intercept: spec.intercept,
    }
    .log_likelihood(coefficients)
}

impl GlmFit {
    pub fn spec(&self) -> &GlmSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// Coefficients of linear predictor `k` (intercept first when present).
    pub fn predictor_coefficients(&self, k: usize) -> &[f64] {
        let q = self.n_features + usize::from(self.spec.intercept);
        &self.coefficients[k * q..(k + 1) * q]
    }

    /// Summed observed information `X' W V X`.
    pub fn information(&self) -> &DMatrix<f64> {
        &self.information
    }

    /// Inverse information, the model-based covariance of the coefficients.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        Ok(spd_cholesky(&self.information)?.inverse())
    }

    /// Score contribution of fitted observation `i`.
    pub fn score_row(&self, i: usize) -> &[f64] {
        let np = self.n_params();
        &self.scores[i * np..(i + 1) * np]
    }

    pub fn n_observations(&self) -> usize {
        self.scores.len() / self.n_params().max(1)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn score_norm(&self) -> f64 {
        self.score_norm
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Same model with replaced coefficients. Scores and information are
    /// left as fitted; only predictions change.
    pub fn with_coefficients(&self, coefficients: Vec<f64>) -> Result<GlmFit> {
        if coefficients.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                got: coefficients.len(),
            });
        }
        Ok(GlmFit {
            coefficients,
            ..self.clone()
        })
    }

    fn linear_predictors(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok((0..self.spec.family.n_predictors())
            .map(|k| {
                let b = self.predictor_coefficients(k);
                let (offset, slopes) = if self.spec.intercept {
                    (b[0], &b[1..])
                } else {
                    (0.0, b)
                };
                offset + dot(slopes, x)
            })
            .collect())
    }

    /// Inverse link at covariate row `x` (without intercept entry).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let eta = self.linear_predictors(x)?;
        Ok(match self.spec.family {
            Family::BernoulliLogit => Prediction::Mean(expit(eta[0])),
            Family::PoissonLog => Prediction::Mean(eta[0].exp()),
            Family::GaussianIdentity => Prediction::Mean(eta[0]),
            Family::MultinomialLogit { .. } => {
                Prediction::Probabilities(softmax_with_reference(&eta))
            }
        })
    }

    /// Scalar mean; for multinomial fits, the expected category index.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(match self.predict(x)? {
            Prediction::Mean(m) => m,
            Prediction::Probabilities(p) => p.iter().enumerate().map(|(k, pk)| k as f64 * pk).sum(),
        })
    }

    /// Category probabilities (reference first); for Bernoulli fits `[1-p, p]`.
    pub fn predict_probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        match (self.predict(x)?, self.spec.family) {
            (Prediction::Probabilities(p), _) => Ok(p),
            (Prediction::Mean(p), Family::BernoulliLogit) => Ok(vec![1.0 - p, p]),
            _ => Err(Error::Unsupported(
                "category probabilities need a Bernoulli or multinomial fit".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn intercept_only_logit() {
        let y: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i < 20))).collect();
        let fit = fit_glm(&DesignMatrix::empty(100), &y, None, &GlmSpec::new(Family::BernoulliLogit)).unwrap();
        assert_abs_diff_eq!(fit.coefficients()[0], (0.2_f64 / 0.8).ln(), epsilon = 1e-8);
        assert_abs_diff_eq!(fit.coefficients()[0], -1.386294, epsilon = 1e-6);
    }

    #[test]
    fn intercept_only_poisson() {
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0, 3.0];
        let fit = fit_glm(&DesignMatrix::empty(6), &y, None, &GlmSpec::new(Family::PoissonLog)).unwrap();
        assert_abs_diff_eq!(fit.coefficients()[0], 3.0_f64.ln(), epsilon = 1e-8);
        assert_abs_diff_eq!(fit.predict_mean(&[]).unwrap(), 3.0, epsilon = 1e-8);
    }

    #[test]
    fn zero_coefficient_logit_predicts_half() {
        let y = vec![0.0, 1.0, 0.0, 1.0];
        let x = DesignMatrix::from_rows(&[vec![1.0], vec![1.0], vec![2.0], vec![2.0]]).unwrap();
        let fit = fit_glm(&x, &y, None, &GlmSpec::new(Family::BernoulliLogit)).unwrap();
        let zeroed = fit.with_coefficients(vec![0.0, 0.0]).unwrap();
        assert_eq!(zeroed.predict_mean(&[7.5]).unwrap(), 0.5);
    }

    #[test]
    fn gaussian_matches_least_squares() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.1, 4.9, 7.2, 8.8];
        let x = DesignMatrix::from_rows(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let fit = fit_glm(&x, &y, None, &GlmSpec::new(Family::GaussianIdentity)).unwrap();
        let xbar = 2.0;
        let ybar = y.iter().sum::<f64>() / 5.0;
        let sxy: f64 = xs.iter().zip(&y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - xbar).powi(2)).sum();
        assert_abs_diff_eq!(fit.coefficients()[1], sxy / sxx, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.coefficients()[0], ybar - sxy / sxx * xbar, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_singular() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| f64::from(u8::from(i % 3 == 0))).collect();
        let err = fit_glm(&DesignMatrix::from_rows(&rows).unwrap(), &y, None, &GlmSpec::new(Family::BernoulliLogit))
            .unwrap_err();
        assert!(matches!(err, Error::Singular(_)), "{err}");
    }

    #[test]
    fn separation_is_divergence() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| f64::from(u8::from(i >= 10))).collect();
        let err = fit_glm(&DesignMatrix::from_rows(&rows).unwrap(), &y, None, &GlmSpec::new(Family::BernoulliLogit))
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn bad_response_rejected() {
        let err = fit_glm(&DesignMatrix::empty(3), &[0.0, 1.0, 2.0], None, &GlmSpec::new(Family::BernoulliLogit))
            .unwrap_err();
        assert!(matches!(err, Error::Validation { row: 3, .. }));
    }

    #[test]
    fn prediction_dimension_checked() {
        let fit = fit_glm(&DesignMatrix::empty(4), &[0.0, 1.0, 1.0, 0.0], None, &GlmSpec::new(Family::BernoulliLogit))
            .unwrap();
        assert!(matches!(fit.predict(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn multinomial_balanced_is_uniform() {
        let y: Vec<f64> = (0..300).map(|i| (i % 3) as f64).collect();
        let fit = fit_glm(
            &DesignMatrix::empty(300),
            &y,
            None,
            &GlmSpec::new(Family::MultinomialLogit { categories: 3 }),
        )
        .unwrap();
        let p = fit.predict_probabilities(&[]).unwrap();
        for pk in p {
            assert_abs_diff_eq!(pk, 1.0 / 3.0, epsilon = 1e-10);
        }
    }
}
