use awq::verify::{check_list, reports_to_csv, run_suite, Suite, SuiteConfig, SuiteParams};

#[test]
fn every_registered_check_passes_at_default_parameters() {
    let cfg = SuiteConfig::default();
    let reports = run_suite(Suite::All, &cfg);
    assert_eq!(reports.len(), check_list().len());
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    let ids: Vec<_> = check_list().iter().map(|c| c.id).collect();
    assert_eq!(reports.iter().map(|r| r.check.as_str()).collect::<Vec<_>>(), ids);
}

#[test]
fn runs_are_reproducible_for_a_seed() {
    let cfg = SuiteConfig::new(SuiteParams::default(), 7, None).unwrap();
    let a = run_suite(Suite::Hopf, &cfg);
    let b = run_suite(Suite::Hopf, &cfg);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.seed, x.residual), (y.seed, y.residual));
    }
}

#[test]
fn suites_run_at_other_parameters() {
    let params = SuiteParams { q: 0.4, k: 0.9, s_angle: 1.1, t_values: vec![3.1, -2.6], ..SuiteParams::default() };
    let cfg = SuiteConfig::new(params, 11, None).unwrap();
    for suite in [Suite::Qseries, Suite::Univariate] {
        let reports = run_suite(suite, &cfg);
        let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}

#[test]
fn csv_has_one_row_per_report() {
    let reports = run_suite(Suite::Qseries, &SuiteConfig::default());
    let csv = reports_to_csv(&reports).unwrap();
    assert_eq!(csv.lines().count(), reports.len() + 1);
    assert!(csv.starts_with("check,residual,tol,pass,nodes,seconds,seed"));
}
