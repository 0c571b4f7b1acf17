use onsketch::harness::{
    emit_qq, ks_statistic, mean_functional, parse_config, qq_report, run_experiment,
    ExperimentConfig,
};
use onsketch::models::ModelKind;
use onsketch::oracle::{limiting_covariance, OracleOptions};
use onsketch::rng::RngStream;
use onsketch::Error;

fn cfg(pairs: &[(&str, &str)]) -> ExperimentConfig {
    let kv: Vec<(String, String)> = pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    parse_config(None, &kv).unwrap()
}

#[test]
fn repeated_invocations_write_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, jobs) in dirs.iter().zip([1, 2]) {
        let out = dir.path().join("run");
        let c = cfg(&[
            ("dim", "4"),
            ("reps", "2"),
            ("steps", "3000"),
            ("warmup", "100"),
            ("checkpoints", "1000,3000"),
            ("tau", "4"),
            ("design", "toeplitz"),
            ("out", out.to_str().unwrap()),
        ]);
        run_experiment(&c, jobs).unwrap();
    }
    for f in ["trials.csv", "summary.json"] {
        let a = std::fs::read(dirs[0].path().join("run").join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join("run").join(f)).unwrap();
        // summary.json echoes `out`, which differs between the two runs.
        if f == "trials.csv" {
            assert_eq!(a, b);
            let text = String::from_utf8(a).unwrap();
            assert!(text.starts_with("rep,t,phi_t,mae,center,lo,hi,covered,ci_len\n"));
        } else {
            let strip = |v: Vec<u8>| {
                let mut m: serde_json::Map<String, serde_json::Value> =
                    serde_json::from_slice(&v).unwrap();
                m.remove("config.out");
                m
            };
            assert_eq!(strip(a), strip(b));
        }
    }
}

#[test]
fn unwritable_output_reports_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let c = cfg(&[
        ("dim", "2"),
        ("reps", "1"),
        ("steps", "50"),
        ("warmup", "0"),
        ("out", blocker.join("sub").to_str().unwrap()),
    ]);
    match run_experiment(&c, 1) {
        Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn logistic_and_gaussian_runs_complete() {
    let c = cfg(&[
        ("model", "logistic"),
        ("dim", "3"),
        ("design", "equicorr"),
        ("sketch", "gaussian"),
        ("columns", "2"),
        ("reps", "2"),
        ("steps", "2000"),
        ("checkpoints", "1000,2000"),
        ("tau", "3"),
    ]);
    let exp = run_experiment(&c, 1).unwrap();
    assert!(exp
        .summary
        .checkpoints
        .iter()
        .all(|cp| cp.mae_mean.is_finite()));
}

/// KS of i.i.d. N(0,1) samples falls below 1.36/√R about 95% of the time.
#[test]
fn ks_null_calibration() {
    let r = 200;
    let crit = 1.36 / (r as f64).sqrt();
    let mut rng = RngStream::new(99);
    let trials = 400;
    let below = (0..trials)
        .filter(|_| ks_statistic(&rng.normal_vec::<f64>(r)) < crit)
        .count() as f64
        / trials as f64;
    assert!((0.91..=0.985).contains(&below), "{below}");
}

#[test]
fn mae_shrinks_along_the_run() {
    let c = cfg(&[
        ("dim", "3"),
        ("reps", "8"),
        ("steps", "20000"),
        ("tau", "3"),
        ("checkpoints", "1000,20000"),
    ]);
    let exp = run_experiment(&c, 2).unwrap();
    let cps = &exp.summary.checkpoints;
    assert!(cps[1].mae_mean < 0.75 * cps[0].mae_mean, "{cps:?}");
}

/// For identity design with Kaczmarz, the population `γ*` is exactly 1, so
/// estimated-γ and unit-γ runs should give matching QQ point sets.
#[test]
fn estimated_and_unit_gamma_qq_overlap() {
    let base = [
        ("dim", "3"),
        ("reps", "200"),
        ("steps", "20000"),
        ("tau", "3"),
        ("checkpoints", "20000"),
    ];
    let mut reports = Vec::new();
    for mode in ["estimated", "unit"] {
        let mut pairs = base.to_vec();
        pairs.push(("gamma_mode", mode));
        let c = cfg(&pairs);
        let exp = run_experiment(&c, 2).unwrap();
        let oracle = limiting_covariance(
            ModelKind::Linear,
            &exp.ground_truth,
            &c.sketch_config().unwrap(),
            &c.schedule().unwrap(),
            &OracleOptions::default(),
        )
        .unwrap();
        assert!((oracle.params.gamma - 1.0).abs() < 1e-12);
        let rep = emit_qq(
            Some(&oracle.sigma_star),
            &mean_functional(3),
            exp.ground_truth.x_star(),
            c.schedule().unwrap().at(c.steps),
            &exp.terminals(),
            None,
        )
        .unwrap();
        reports.push(rep);
    }
    let gap = reports[0].max_gap(&reports[1]).unwrap();
    assert!(gap <= 0.15, "max vertical gap {gap}");
}

/// Exact solves with `φ = C_φ = 1` standardize against `Σ* = Ω*`.
#[test]
fn exact_newton_unit_schedule_uses_omega() {
    let c = cfg(&[
        ("dim", "2"),
        ("tau", "exact"),
        ("phi", "1"),
        ("c_phi", "1"),
        ("reps", "200"),
        ("steps", "50000"),
        ("checkpoints", "50000"),
    ]);
    let exp = run_experiment(&c, 2).unwrap();
    let oracle = limiting_covariance(
        ModelKind::Linear,
        &exp.ground_truth,
        &c.sketch_config().unwrap(),
        &c.schedule().unwrap(),
        &OracleOptions::default(),
    )
    .unwrap();
    assert!(oracle.sigma_star.sub(&oracle.omega_star).max_abs() < 1e-10);
    let u = onsketch::harness::standardize(
        &mean_functional(2),
        exp.ground_truth.x_star(),
        &oracle.sigma_star,
        c.schedule().unwrap().at(c.steps),
        &exp.terminals(),
    )
    .unwrap();
    assert!(qq_report(&u).unwrap().ks < 0.12);
}
