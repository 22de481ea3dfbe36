use rfcollapse::flow::NilClosedForm;
use rfcollapse::scenarios::{self, FamilyKind, ScenarioConfig, ScenarioError, ScenarioKind, WarpSpec};
use rfcollapse::Report;

fn small_torus(f: WarpSpec) -> ScenarioConfig {
    ScenarioConfig {
        i_list: vec![1, 16, 64],
        t_grid: vec![0.0, 0.25, 0.5],
        // the nonstationarity witness is measured against 10x the flow's
        // grid slack, which needs the full flow resolution
        nr: 256,
        ns: 256,
        gh_nr: 32,
        gh_ns: 32,
        budget: 2000,
        f,
        ..ScenarioConfig::defaults(ScenarioKind::CollapsingTorus)
    }
}

fn assertion<'a>(report: &'a Report, name: &str) -> impl Iterator<Item = &'a rfcollapse::Assertion> {
    let name = name.to_string();
    report.assertions.iter().filter(move |a| a.name == name)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn small_bumpy_torus_passes() {
    let cfg = small_torus(WarpSpec::BUMPY);
    let report = scenarios::run(&cfg).unwrap();
    let failures: Vec<_> = report.failures().collect();
    assert!(report.pass, "{failures:#?}");
    assert_eq!(report.records.len(), 9);
    assert_eq!(assertion(&report, "gh_t0_nonincreasing").count(), 2);
    assert!(report.records.iter().all(|r| r.gh_upper.is_some() && r.k_max.is_some()));
}

#[test]
fn flat_torus_is_stationary() {
    let report = scenarios::run(&small_torus(WarpSpec::constant(1.0))).unwrap();
    assert!(report.pass);
    let stationary: Vec<_> = assertion(&report, "c_hat_stationary").collect();
    assert_eq!(stationary.len(), 1);
    assert_eq!(stationary[0].lhs, 0.0);
    for r in &report.records {
        assert!((r.values["c_hat"] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(r.k_max, Some(0.0));
    }
}

#[test]
fn nil_scaling_defaults_pass_with_similarity_oracle() {
    let cfg = ScenarioConfig::defaults(ScenarioKind::NilScaling);
    assert_eq!(cfg.i_list, vec![10, 100, 1000]);
    let report = scenarios::run(&cfg).unwrap();
    assert!(report.pass, "{:#?}", report.failures().collect::<Vec<_>>());
    assert_eq!(report.notes["residual_report"]["residual_zero_form"], "similarity");
    for a in assertion(&report, "pullback.deviation_t0") {
        assert!(a.margin >= 0.0);
    }
    assert!(report.notes.contains_key("paper_display_comparison"));
}

#[test]
fn nil_dz_coefficient_is_exact_at_t0() {
    let paper = NilClosedForm::Paper {
        c1: 1.0,
        c2: 1.0,
        c3: 1.0,
    };
    let oracle = NilClosedForm::Similarity {
        m0: paper.value(0.0).unwrap(),
    };
    let at_i = oracle.value(1e6).unwrap();
    let p = scenarios::pullback_coefficients(&at_i, &at_i);
    assert_eq!(p.zz, 1.0);
    // the remaining deviation sits in the dy² and cross terms
    assert!(p.yy_x2 > 0.0 && p.yz_x < 0.0);
}

#[test]
fn family_convergence_collapsing_and_flat() {
    let cfg = ScenarioConfig::defaults(ScenarioKind::FamilyConvergence);
    let report = scenarios::run(&cfg).unwrap();
    assert!(report.pass, "{:#?}", report.failures().collect::<Vec<_>>());
    assert_eq!(assertion(&report, "cauchy_eps_nonincreasing").count(), 2);

    let flat = ScenarioConfig {
        family: FamilyKind::Flat,
        i_list: vec![1, 2, 4],
        nr: 64,
        ns: 64,
        ..cfg
    };
    let report = scenarios::run(&flat).unwrap();
    assert!(report.pass);
    let floor = rfcollapse::EpsGrid::default().min();
    assert!(report.records.iter().all(|r| r.gh_upper == Some(floor)));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    for cfg in [
        small_torus(WarpSpec::BUMPY),
        ScenarioConfig::defaults(ScenarioKind::FamilyConvergence),
        ScenarioConfig::defaults(ScenarioKind::NilScaling),
    ] {
        let serial = in_pool(1, || scenarios::run(&cfg).unwrap());
        let parallel = in_pool(8, || scenarios::run(&cfg).unwrap());
        assert_eq!(
            serde_json::to_string(&serial).unwrap(),
            serde_json::to_string(&parallel).unwrap(),
            "{:?}",
            cfg.scenario
        );
    }
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let mut cfg = small_torus(WarpSpec::BUMPY);
    cfg.i_list = vec![4, 1];
    match scenarios::run(&cfg) {
        Err(ScenarioError::Config(e)) => assert_eq!(e.field, "i_list"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
