use gxe_core::data::{read_dataset, write_dataset, Exposure};
use gxe_core::glm::{fit_glm, log_likelihood, DesignMatrix, Family, GlmSpec};
use gxe_core::interaction::{compute_u, GFunction};
use gxe_core::nuisance::{fit_nuisance, FitSample, ModelPlan};
use gxe_core::pipeline::{run_test, TestRecipe, VarianceMethod};
use gxe_core::stats::expit;
use gxe_core::{Dataset, Error, ExposureKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DesignMatrix {
    let data = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    DesignMatrix::new(n, p, data).unwrap()
}

fn response(rng: &mut ChaCha8Rng, x: &DesignMatrix, family: Family, beta: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let eta = beta[0] + x.row(i).iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            match family {
                Family::BernoulliLogit => f64::from(u8::from(rng.random::<f64>() < expit(eta))),
                Family::PoissonLog => Poisson::new(eta.exp()).unwrap().sample(rng),
                Family::GaussianIdentity => eta + rng.random_range(-1.0..1.0),
                Family::MultinomialLogit { .. } => unreachable!(),
            }
        })
        .collect()
}

fn family_of(code: u8) -> Family {
    match code {
        0 => Family::BernoulliLogit,
        1 => Family::PoissonLog,
        _ => Family::GaussianIdentity,
    }
}

/// Score recomputed from predictions, independent of the fitting code.
fn independent_score(x: &DesignMatrix, y: &[f64], w: Option<&[f64]>, fit: &gxe_core::glm::GlmFit) -> Vec<f64> {
    let mut s = vec![0.0; x.ncols() + 1];
    for i in 0..x.nrows() {
        let r = w.map_or(1.0, |w| w[i]) * (y[i] - fit.predict_mean(x.row(i)).unwrap());
        s[0] += r;
        for (k, v) in x.row(i).iter().enumerate() {
            s[k + 1] += r * v;
        }
    }
    s
}

fn binary_dataset(seed: u64, n: usize, with_x: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut d, mut a1, mut a2, mut x) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        let xi: f64 = rng.random_range(-1.0..1.0);
        let g = f64::from(u8::from(rng.random::<f64>() < expit(-0.5 + 0.4 * xi)));
        let e = f64::from(u8::from(rng.random::<f64>() < expit(-0.3 + 0.3 * g - 0.5 * xi)));
        d.push(u8::from(i % 3 == 0));
        a1.push(g);
        a2.push(e);
        x.push(xi);
    }
    let covariates = if with_x { vec![("x".to_string(), x)] } else { vec![] };
    Dataset::new(
        "d",
        d,
        Exposure::new("g", ExposureKind::Binary, a1),
        Exposure::new("e", ExposureKind::Binary, a2),
        covariates,
        None,
    )
    .unwrap()
}

fn ok_or_skip<T>(r: Result<T, Error>) -> Result<T, TestCaseError> {
    match r {
        Ok(v) => Ok(v),
        Err(Error::Divergence { .. } | Error::Singular(_)) => Err(TestCaseError::reject("degenerate sample")),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn score_vanishes_at_optimum(seed in any::<u64>(), code in 0u8..3, n in 40usize..120, p in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = family_of(code);
        let x = design(&mut rng, n, p);
        let beta: Vec<f64> = (0..=p).map(|_| rng.random_range(-0.8..0.8)).collect();
        let y = response(&mut rng, &x, family, &beta);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let fit = ok_or_skip(fit_glm(&x, &y, Some(&w), &GlmSpec::new(family)))?;
        let s = independent_score(&x, &y, Some(&w), &fit);
        let max = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(max <= 1e-8, "score {max:e}");
    }

    #[test]
    fn information_matches_finite_difference_hessian(seed in any::<u64>(), code in 0u8..3, n in 40usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = family_of(code);
        let x = design(&mut rng, n, 2);
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-0.8..0.8)).collect();
        let y = response(&mut rng, &x, family, &beta);
        let spec = GlmSpec::new(family);
        let fit = ok_or_skip(fit_glm(&x, &y, None, &spec))?;
        let theta = fit.coefficients().to_vec();
        let ll = |t: &[f64]| log_likelihood(&x, &y, None, &spec, t);
        let h = 1e-4;
        let info = fit.information();
        let scale = info.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for a in 0..3 {
            for b in 0..3 {
                let at = |da: f64, db: f64| {
                    let mut t = theta.clone();
                    t[a] += da;
                    t[b] += db;
                    ll(&t)
                };
                let hess = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
                prop_assert!(((-hess) - info[(a, b)]).abs() <= 1e-4 * scale,
                    "entry ({a},{b}): {} vs {}", -hess, info[(a, b)]);
            }
        }
    }

    #[test]
    fn constant_weights_match_unweighted(seed in any::<u64>(), code in 0u8..3, c in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = family_of(code);
        let x = design(&mut rng, 60, 2);
        let y = response(&mut rng, &x, family, &[0.2, 0.5, -0.4]);
        let spec = GlmSpec::new(family);
        let plain = ok_or_skip(fit_glm(&x, &y, None, &spec))?;
        let weighted = fit_glm(&x, &y, Some(&vec![c; 60]), &spec).unwrap();
        for (a, b) in plain.coefficients().iter().zip(weighted.coefficients()) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn two_category_multinomial_is_logistic(seed in any::<u64>(), n in 40usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = design(&mut rng, n, 2);
        let y = response(&mut rng, &x, Family::BernoulliLogit, &[0.1, 0.6, -0.6]);
        let logit = ok_or_skip(fit_glm(&x, &y, None, &GlmSpec::new(Family::BernoulliLogit)))?;
        let multi = fit_glm(&x, &y, None, &GlmSpec::new(Family::MultinomialLogit { categories: 2 })).unwrap();
        for (a, b) in logit.coefficients().iter().zip(multi.coefficients()) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn controls_never_contribute(seed in any::<u64>(), independence in any::<bool>(), with_x in any::<bool>()) {
        let ds = binary_dataset(seed, 300, with_x);
        let mut plan = if independence { ModelPlan::independent() } else { ModelPlan::default() };
        if with_x {
            plan = plan.with_covariates(&["x"]);
        }
        let nm = ok_or_skip(fit_nuisance(&ds, &plan))?;
        for g in [GFunction::CenteredProduct, GFunction::PolytomousCenteredProduct] {
            let u = compute_u(&ds, &nm, &g).unwrap();
            for i in (0..ds.n()).filter(|&i| !ds.is_case(i)) {
                prop_assert_eq!(u.u[i], 0.0);
            }
        }
    }

    #[test]
    fn zero_covariate_changes_nothing(seed in any::<u64>(), independence in any::<bool>()) {
        let ds = binary_dataset(seed, 300, true);
        let padded = ds.add_covariate("zero", vec![0.0; ds.n()]).unwrap();
        let base = if independence { ModelPlan::independent() } else { ModelPlan::default() };
        let a = ok_or_skip(run_test(&ds, &TestRecipe {
            variance: VarianceMethod::Sandwich,
            ..TestRecipe::new(base.clone().with_covariates(&["x"]))
        }))?;
        let b = run_test(&padded, &TestRecipe {
            variance: VarianceMethod::Sandwich,
            ..TestRecipe::new(base.with_covariates(&["x", "zero"]))
        }).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-10);
        prop_assert!((a.mean_u - b.mean_u).abs() <= 1e-10);
        prop_assert!((a.variance.total - b.variance.total).abs() <= 1e-10 * a.variance.total.abs());
    }

    #[test]
    fn sandwich_ignores_row_order(seed in any::<u64>(), independence in any::<bool>()) {
        let ds = binary_dataset(seed, 240, true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut order: Vec<usize> = (0..ds.n()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled = ds.select_rows(&order);
        let base = if independence { ModelPlan::independent() } else { ModelPlan::default() };
        let recipe = TestRecipe {
            variance: VarianceMethod::Sandwich,
            ..TestRecipe::new(base.with_covariates(&["x"]))
        };
        let a = ok_or_skip(run_test(&ds, &recipe))?;
        let b = run_test(&shuffled, &recipe).unwrap();
        let rel = (a.variance.total - b.variance.total).abs() / a.variance.total;
        prop_assert!(rel <= 1e-7, "relative change {rel:e}");
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-8);
    }

    #[test]
    fn constant_weights_leave_statistic_unchanged(seed in any::<u64>(), c in 0.05f64..50.0) {
        let ds = binary_dataset(seed, 300, false);
        let ones = ds.with_weights(Some(("w".into(), vec![1.0; ds.n()]))).unwrap();
        let scaled = ds.with_weights(Some(("w".into(), vec![c; ds.n()]))).unwrap();
        let plan = ModelPlan { sample: FitSample::WeightedAll, ..ModelPlan::independent() };
        let a = ok_or_skip(run_test(&ones, &TestRecipe { variance: VarianceMethod::Sandwich, ..TestRecipe::new(plan.clone()) }))?;
        let b = run_test(&scaled, &TestRecipe { variance: VarianceMethod::Sandwich, ..TestRecipe::new(plan) }).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-8);
        prop_assert!((a.variance.total - b.variance.total).abs() <= 1e-8 * a.variance.total);
    }

    #[test]
    fn dataset_round_trips(seed in any::<u64>(), n in 2usize..60, weighted in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        d[0] = 0;
        d[1] = 1;
        let a1 = (0..n).map(|_| f64::from(rng.random_range(0u8..3))).collect();
        let a2 = (0..n).map(|_| f64::from(rng.random_range(0u32..40))).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8)) - 0.5).collect();
        let weights = weighted.then(|| ("w".to_string(), (0..n).map(|_| rng.random_range(0.01..100.0)).collect()));
        let ds = Dataset::new(
            "d",
            d,
            Exposure::new("g", ExposureKind::Categorical { levels: 3 }, a1),
            Exposure::new("e", ExposureKind::Count, a2),
            vec![("x".to_string(), x)],
            weights,
        ).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), &ds.schema()).unwrap();
        prop_assert_eq!(back, ds);
    }
}
