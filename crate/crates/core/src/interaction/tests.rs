use super::*;
use crate::data::Exposure;
use crate::nuisance::{fit_nuisance, ModelPlan};
use crate::variance::VarianceKind;
use approx::assert_abs_diff_eq;

fn binary(cells: [(u8, f64, f64, usize); 8]) -> Dataset {
    let (mut d, mut a1, mut a2) = (Vec::new(), Vec::new(), Vec::new());
    for (dd, g, e, count) in cells {
        for _ in 0..count {
            d.push(dd);
            a1.push(g);
            a2.push(e);
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
    .unwrap()
}

fn example() -> Dataset {
    binary([
        (0, 0.0, 0.0, 40),
        (0, 0.0, 1.0, 15),
        (0, 1.0, 0.0, 20),
        (0, 1.0, 1.0, 25),
        (1, 0.0, 0.0, 20),
        (1, 0.0, 1.0, 25),
        (1, 1.0, 0.0, 15),
        (1, 1.0, 1.0, 40),
    ])
}

#[test]
fn controls_contribute_zero() {
    let ds = example();
    for plan in [ModelPlan::default(), ModelPlan::independent()] {
        let nm = fit_nuisance(&ds, &plan).unwrap();
        let u = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
        for i in (0..ds.n()).filter(|&i| !ds.is_case(i)) {
            assert_eq!(u.u[i], 0.0);
        }
    }
}

#[test]
fn matches_hand_formula_row_by_row() {
    let ds = example();
    let nm = fit_nuisance(&ds, &ModelPlan::default()).unwrap();
    // p1(0) = 20/60, p2(0) = 15/55, omega = log(25*40 / (15*20))
    let p1 = 20.0 / 60.0;
    let p2 = 15.0 / 55.0;
    let omega = (25.0_f64 * 40.0 / (15.0 * 20.0)).ln();
    assert_abs_diff_eq!(nm.omega(), omega, epsilon = 1e-9);
    let u = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
    assert_eq!(u.method, Method::Binary);
    for i in 0..ds.n() {
        let (a1, a2) = (ds.a1().values[i], ds.a2().values[i]);
        let d = f64::from(ds.d()[i]);
        let hand = (-a1 * a2 * omega).exp() * (a1 - p1) * (a2 - p2) * d;
        assert_abs_diff_eq!(u.u[i], hand, epsilon = 1e-9);
    }
}

#[test]
fn tilted_case_with_half_baselines() {
    // controls: p1(0) = p2(0) = 0.5 and omega = log 2
    let ds = binary([
        (0, 0.0, 0.0, 20),
        (0, 0.0, 1.0, 20),
        (0, 1.0, 0.0, 20),
        (0, 1.0, 1.0, 40),
        (1, 1.0, 1.0, 5),
        (1, 0.0, 0.0, 5),
        (1, 0.0, 1.0, 5),
        (1, 1.0, 0.0, 5),
    ]);
    let nm = fit_nuisance(&ds, &ModelPlan::default()).unwrap();
    assert_abs_diff_eq!(nm.omega(), 2.0_f64.ln(), epsilon = 1e-9);
    let u = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
    assert_abs_diff_eq!(u.u[100], 0.125, epsilon = 1e-9);
}

#[test]
fn custom_centered_product_matches_closed_form() {
    let ds = example();
    for plan in [ModelPlan::default(), ModelPlan::independent()] {
        let nm = fit_nuisance(&ds, &plan).unwrap();
        let p1 = nm.baseline_mean(Which::A1, &[]).unwrap();
        let p2 = nm.baseline_mean(Which::A2, &[]).unwrap();
        let g = GFunction::custom(move |a1, a2, _| (a1 - p1) * (a2 - p2));
        let unified = compute_u(&ds, &nm, &g).unwrap();
        assert_eq!(unified.method, Method::Unified);
        let closed = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
        for (a, b) in unified.u.iter().zip(&closed.u) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

#[test]
fn polytomous_on_binary_equals_binary() {
    let ds = example();
    let nm = fit_nuisance(&ds, &ModelPlan::independent()).unwrap();
    let poly = compute_u(&ds, &nm, &GFunction::PolytomousCenteredProduct).unwrap();
    let bin = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
    assert_eq!(poly.u, bin.u);
}

#[test]
fn zero_contributions_have_degenerate_variance() {
    let ds = example();
    let nm = fit_nuisance(&ds, &ModelPlan::independent()).unwrap();
    let mut u = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
    u.u.iter_mut().for_each(|v| *v = 0.0);
    let v = VarianceDecomposition::new(crate::stats::variance(&u.u) / u.n() as f64, 0.0, 0.0, VarianceKind::Sandwich);
    assert!(matches!(standardized_test(&u, v), Err(Error::DegenerateVariance(_))));
}

#[test]
fn unit_statistic_from_matching_variance() {
    let ds = example();
    let nm = fit_nuisance(&ds, &ModelPlan::independent()).unwrap();
    let u = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
    let m = u.mean();
    let r = standardized_test(&u, VarianceDecomposition::new(m * m, 0.0, 0.0, VarianceKind::Sandwich)).unwrap();
    assert_abs_diff_eq!(r.statistic.abs(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(r.p_value, 0.317_310_507_862_914, epsilon = 1e-9);
    let json = r.to_json();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["method"], "binary-independent");
    assert_eq!(json["n_cases"], 100);
}

#[test]
fn kappa_examples() {
    assert_abs_diff_eq!(noncentrality_kappa(0.5, 0.5, 1.0, 1.0).unwrap(), 0.0625);
    assert_abs_diff_eq!(noncentrality_kappa(0.5, 0.5, 2.0, 1.0).unwrap(), 0.125);
    assert!(noncentrality_kappa(0.0, 0.5, 1.0, 1.0).is_err());
    assert!(noncentrality_kappa(0.5, 0.5, 1.0, 0.0).is_err());
}

#[test]
fn scaled_beta3_rejects_degenerate_baseline() {
    // no exposed first factor among controls: p1 = 0
    let ds = binary([
        (0, 0.0, 0.0, 30),
        (0, 0.0, 1.0, 30),
        (0, 0.0, 0.0, 0),
        (0, 0.0, 1.0, 0),
        (1, 0.0, 0.0, 5),
        (1, 0.0, 1.0, 5),
        (1, 1.0, 0.0, 5),
        (1, 1.0, 1.0, 5),
    ]);
    let nm = fit_nuisance(&ds, &ModelPlan::independent());
    match nm {
        Ok(nm) => {
            let u = compute_u(&ds, &nm, &GFunction::CenteredProduct).unwrap();
            assert!(scaled_beta3(&u, &nm, &ds).is_err());
        }
        Err(e) => assert!(matches!(e, Error::Divergence { .. } | Error::Singular(_))),
    }
}

#[test]
fn oracle_worked_cell() {
    let null = DiscretePopulation::binary_independent(0.5, 0.5, [0.01, 0.0, 0.0, 0.0]);
    let g = |a1: f64, a2: f64, _: &[f64]| (a1 - 0.5) * (a2 - 0.5);
    assert_abs_diff_eq!(brute_force_expectation(&null, &g).unwrap()[0], 0.0, epsilon = 1e-15);
    let alt = DiscretePopulation::binary_independent(0.5, 0.5, [0.01, 0.0, 0.0, 0.1]);
    assert_abs_diff_eq!(disease_prevalence(&alt).unwrap(), 0.035, epsilon = 1e-15);
    let e = brute_force_expectation(&alt, &g).unwrap()[0];
    assert_abs_diff_eq!(e, 0.1 * 0.0625 / 0.035, epsilon = 1e-12);
    assert_abs_diff_eq!(e, 0.178571, epsilon = 1e-6);
}

#[test]
fn oracle_rejects_bad_population() {
    let mut pop = DiscretePopulation::binary_independent(0.5, 0.5, [0.01, 0.0, 0.0, 0.0]);
    pop.a1_support = vec![1.0, 2.0];
    assert!(brute_force_expectation(&pop, &|_, _, _| 0.0).is_err());
}
