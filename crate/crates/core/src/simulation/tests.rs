use super::*;
use crate::stats::{expit, logit};
use approx::assert_abs_diff_eq;

#[test]
fn alpha3_examples() {
    assert!(alpha3_from_reri(logit(0.01), 0.0, 0.0, 0.0).unwrap().abs() < 1e-14);
    let l2 = 2.0_f64.ln();
    let a3 = alpha3_from_reri(logit(0.01), l2, l2, 0.0).unwrap();
    // 30-digit evaluation of the formula
    assert_abs_diff_eq!(a3, -0.280_970_637_863_794, epsilon = 1e-12);
    for reri in [0.0, 0.1, 0.5, 2.0] {
        let a3 = alpha3_from_reri(logit(0.01), 0.7_f64.ln(), l2, reri).unwrap();
        assert_abs_diff_eq!(reri_from_alphas(logit(0.01), 0.7_f64.ln(), l2, a3), reri, epsilon = 1e-10);
    }
    assert!(matches!(
        alpha3_from_reri(logit(0.5), 3.0, 3.0, 5.0),
        Err(Error::Scenario(_))
    ));
}

#[test]
fn exact_quotas_and_reproducibility() {
    let sc = Scenario::binary(0.5, 0.2, logit(0.01), 0.3, -0.2, 0.2).with_sizes(300, 500);
    let a = generate_case_control(&sc, 11, 0, 3).unwrap();
    let b = generate_case_control(&sc, 11, 0, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_cases(), 300);
    assert_eq!(a.n_controls(), 500);
    assert_ne!(a, generate_case_control(&sc, 11, 0, 4).unwrap());
}

#[test]
fn retrospective_cells_follow_bayes() {
    let sc = Scenario::binary(0.3, 0.2, logit(0.05), 0.5, 0.2, 0.0);
    let (case, control) = retrospective_cells(&sc).unwrap();
    let a3 = sc.alpha3().unwrap();
    let f = binary_exposure_cells(0.3, 0.2, 0.0);
    let risk = |k: usize| {
        let (a1, a2) = ((k / 2) as f64, (k % 2) as f64);
        expit(logit(0.05) + 0.5 * a1 + 0.2 * a2 + a3 * a1 * a2)
    };
    let pd: f64 = (0..4).map(|k| risk(k) * f[k]).sum();
    for k in 0..4 {
        assert_abs_diff_eq!(case[k], risk(k) * f[k] / pd, epsilon = 1e-14);
        assert_abs_diff_eq!(control[k], (1.0 - risk(k)) * f[k] / (1.0 - pd), epsilon = 1e-14);
    }
}

#[test]
fn failure_scenario_rejects_risk_outside_unit_interval() {
    let sc = Scenario::failure(0.3, logit(0.3), 3.0, 3.0, CovariateSpec::default());
    assert!(matches!(generate_case_control(&sc, 1, 0, 0), Err(Error::Scenario(_))));
}

#[test]
fn failure_scenario_shapes() {
    let sc = grid::failure_scenario(false).with_sizes(200, 300);
    let ds = generate_case_control(&sc, 5, 0, 0).unwrap();
    assert_eq!(ds.n_cases(), 200);
    assert_eq!(ds.a1().kind, crate::data::ExposureKind::Continuous);
    assert_eq!(ds.covariate_names(), ["x".to_string()]);
    let sc = grid::failure_scenario(true).with_sizes(200, 300);
    let ds = generate_case_control(&sc, 5, 0, 0).unwrap();
    assert_eq!(ds.a1().kind, crate::data::ExposureKind::Binary);
}

#[test]
fn power_table_needs_enough_replicates() {
    let grid = vec![Scenario::binary(0.5, 0.2, logit(0.01), 0.0, 0.0, 0.0)];
    assert!(run_power_experiment(&grid, &TestKind::ALL, 50, 1).is_err());
}

#[test]
fn small_table_is_deterministic_and_serializes() {
    let grid = vec![Scenario::binary(0.5, 0.2, logit(0.01), 0.0, 0.0, 0.0)
        .with_label("null")
        .with_sizes(200, 200)];
    let a = run_power_experiment(&grid, &TestKind::ALL, 100, 3).unwrap();
    let b = run_power_experiment(&grid, &TestKind::ALL, 100, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 3);
    let row = a.row("null", TestKind::UInd).unwrap();
    assert_eq!(row.successes + row.failures, 100);
    assert!((0.0..=1.0).contains(&row.rate));
    let csv = a.to_csv().unwrap();
    assert!(csv.starts_with("label,p_g,p_e,alpha1,alpha2,reri,test,reps"));
    assert!(csv.contains(",u-ind,"));
    assert_eq!(a.to_json()["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn test_kind_names_round_trip() {
    for t in TestKind::ALL {
        assert_eq!(t.to_string().parse::<TestKind>().unwrap(), t);
    }
    assert!("han".parse::<TestKind>().is_err());
}
