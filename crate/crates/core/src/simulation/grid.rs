//! Scenario grid files.
//!
//! One scenario per line as whitespace-separated `key=value` pairs; `#`
//! starts a comment. Numbers may be written as `log(x)` or `logit(x)`.
//!
//! ```text
//! # label      kind    p_g  p_e  alpha0        alpha1    alpha2  reri
//! label=null   kind=binary p_g=0.5 p_e=0.2 alpha0=logit(0.01) alpha1=log(2) alpha2=log(2) reri=0
//! label=fail   kind=failure p_e=0.5 alpha0=logit(0.0002) alpha1=1.5 alpha2=log(8)
//! ```
//!
//! Keys: `label, kind (binary | failure), p_g, p_e, alpha0, alpha1, alpha2,
//! alpha3, reri, ge_log_or, n_cases, n_controls, p_x, alpha_x, gamma_x,
//! dichotomize (true | false)`. Binary lines default to `reri=0` when neither
//! `alpha3` nor `reri` is given.

use std::path::Path;

use super::{CovariateSpec, Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::stats::logit;

fn number(value: &str, line: usize) -> Result<f64> {
    let bad = || Error::Validation {
        row: line,
        message: format!("cannot read '{value}' as a number"),
    };
    let inner = |prefix: &str| {
        value
            .strip_prefix(prefix)
            .and_then(|v| v.strip_suffix(')'))
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
    };
    let v = if let Some(x) = inner("logit(") {
        logit(x?)
    } else if let Some(x) = inner("log(") {
        x?.ln()
    } else {
        value.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn count(value: &str, line: usize) -> Result<usize> {
    value.parse().map_err(|_| Error::Validation {
        row: line,
        message: format!("'{value}' is not a non-negative integer"),
    })
}

fn parse_line(text: &str, line: usize) -> Result<Scenario> {
    let mut sc = Scenario::binary(0.5, 0.2, logit(0.01), 0.0, 0.0, 0.0);
    sc.reri = None;
    sc.label = format!("cell{line}");
    let mut cov = CovariateSpec::default();
    for pair in text.split_whitespace() {
        let (key, value) = pair.split_once('=').ok_or_else(|| Error::Validation {
            row: line,
            message: format!("expected key=value, found '{pair}'"),
        })?;
        match key {
            "label" => sc.label = value.to_string(),
            "kind" => {
                sc.kind = match value {
                    "binary" => ScenarioKind::BinaryBinary,
                    "failure" => ScenarioKind::ContinuousNullFailure,
                    _ => {
                        return Err(Error::Validation {
                            row: line,
                            message: format!("unknown scenario kind '{value}'"),
                        })
                    }
                }
            }
            "p_g" => sc.p_g = number(value, line)?,
            "p_e" => sc.p_e = number(value, line)?,
            "alpha0" => sc.alpha0 = number(value, line)?,
            "alpha1" => sc.alpha1 = number(value, line)?,
            "alpha2" => sc.alpha2 = number(value, line)?,
            "alpha3" => sc.alpha3 = Some(number(value, line)?),
            "reri" => sc.reri = Some(number(value, line)?),
            "ge_log_or" => sc.ge_log_or = number(value, line)?,
            "n_cases" => sc.n_cases = count(value, line)?,
            "n_controls" => sc.n_controls = count(value, line)?,
            "p_x" => cov.p_x = number(value, line)?,
            "alpha_x" => cov.alpha_x = number(value, line)?,
            "gamma_x" => cov.gamma_x = number(value, line)?,
            "dichotomize" => {
                sc.dichotomize = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => {
                        return Err(Error::Validation {
                            row: line,
                            message: format!("dichotomize must be true or false, found '{value}'"),
                        })
                    }
                }
            }
            _ => {
                return Err(Error::Validation {
                    row: line,
                    message: format!("unknown key '{key}'"),
                })
            }
        }
    }
    sc.covariate = cov;
    if sc.kind == ScenarioKind::BinaryBinary && sc.alpha3.is_none() && sc.reri.is_none() {
        sc.reri = Some(0.0);
    }
    sc.validate().map_err(|e| Error::Validation {
        row: line,
        message: e.to_string(),
    })?;
    Ok(sc)
}

pub fn parse_grid(text: &str) -> Result<Vec<Scenario>> {
    let mut grid = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if !content.is_empty() {
            grid.push(parse_line(content, k + 1)?);
        }
    }
    if grid.is_empty() {
        return Err(Error::Config("grid contains no scenarios".into()));
    }
    Ok(grid)
}

/// Reads a grid file, or a built-in grid named `builtin:<name>`.
pub fn load_grid(source: &str) -> Result<Vec<Scenario>> {
    match source.strip_prefix("builtin:") {
        Some(name) => builtin_grid(name),
        None => parse_grid(&std::fs::read_to_string(Path::new(source))?),
    }
}

fn effect_label(a: f64) -> &'static str {
    match a {
        a if a < 0.9 => "0.7",
        a if a < 1.5 => "1.2",
        _ => "2",
    }
}

const ODDS_RATIOS: [f64; 3] = [0.7, 1.2, 2.0];

fn binary_sweep(p_g_values: &[f64], reris: &[f64]) -> Vec<Scenario> {
    let mut grid = Vec::new();
    for &p_g in p_g_values {
        for &or1 in &ODDS_RATIOS {
            for &or2 in &ODDS_RATIOS {
                for &reri in reris {
                    let label = format!(
                        "pg{p_g}_a1_{}_a2_{}_reri{reri}",
                        effect_label(or1),
                        effect_label(or2)
                    );
                    grid.push(
                        Scenario::binary(p_g, 0.2, logit(0.01), or1.ln(), or2.ln(), reri)
                            .with_label(label),
                    );
                }
            }
        }
    }
    grid
}

/// Additive-null scenario in which the prospective RERI test is invalid.
pub fn failure_scenario(dichotomize: bool) -> Scenario {
    let cov = CovariateSpec {
        p_x: 0.5,
        alpha_x: 0.5,
        gamma_x: 0.5,
    };
    let mut sc = Scenario::failure(0.5, logit(0.0002), 1.5, 8.0_f64.ln(), cov);
    sc.dichotomize = dichotomize;
    sc.with_label(if dichotomize { "failure-dichotomized" } else { "failure" })
}

/// Built-in grids:
/// - `size`: null cells for `p_g` in {0.5, 0.2, 0.05};
/// - `power`: `p_g = 0.5` with RERI in {0, 0.1, 0.3, 0.5};
/// - `power-pg0.2`, `power-pg0.05`: the same at rarer variants;
/// - `failure`: the continuous and dichotomized RERI-failure scenarios.
pub fn builtin_grid(name: &str) -> Result<Vec<Scenario>> {
    const RERIS: [f64; 4] = [0.0, 0.1, 0.3, 0.5];
    match name {
        "size" => Ok(binary_sweep(&[0.5, 0.2, 0.05], &[0.0])),
        "power" => Ok(binary_sweep(&[0.5], &RERIS)),
        "power-pg0.2" => Ok(binary_sweep(&[0.2], &RERIS)),
        "power-pg0.05" => Ok(binary_sweep(&[0.05], &RERIS)),
        "failure" => Ok(vec![failure_scenario(false), failure_scenario(true)]),
        _ => Err(Error::Config(format!("unknown built-in grid '{name}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_transformed_values() {
        let grid = parse_grid(
            "# comment\n\nlabel=a p_g=0.5 alpha0=logit(0.01) alpha1=log(2) reri=0.5 # trailing\n",
        )
        .unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid[0].label, "a");
        assert_abs_diff_eq!(grid[0].alpha0, logit(0.01));
        assert_abs_diff_eq!(grid[0].alpha1, 2.0_f64.ln());
        assert_eq!(grid[0].reri, Some(0.5));
    }

    #[test]
    fn reports_line_of_bad_value() {
        let err = parse_grid("label=a\nlabel=b p_g=banana\n").unwrap_err();
        assert!(matches!(err, Error::Validation { row: 2, .. }));
        assert!(parse_grid("label=a colour=red").is_err());
        assert!(parse_grid("alpha3=0.1 reri=0").is_err());
        assert!(parse_grid("# nothing\n").is_err());
    }

    #[test]
    fn builtin_grids_have_expected_sizes() {
        assert_eq!(builtin_grid("size").unwrap().len(), 27);
        assert_eq!(builtin_grid("power").unwrap().len(), 36);
        assert_eq!(load_grid("builtin:failure").unwrap().len(), 2);
        assert!(builtin_grid("table9").is_err());
    }
}
