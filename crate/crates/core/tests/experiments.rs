use mrmc::experiments::{
    baseline_design, content_hash, qos_thresholds, rows_to_csv, run_sweep, summarize, trial_seed, write_results,
    BaselineKind, ExperimentSpec, SweepRow, SweepVar,
};
use mrmc::linalg::{c64, CMat};
use mrmc::optimizer::design_feasible;
use mrmc::par::{code_matrix_feasible, par};
use mrmc::{Scenario, SystemConfig};

fn small() -> SystemConfig {
    let mut cfg = SystemConfig::reduced();
    cfg.ell_max = 3;
    cfg
}

fn spec(sweep: SweepVar, grid: Vec<f64>, trials: usize) -> ExperimentSpec {
    ExperimentSpec {
        sweep,
        grid,
        trials,
        baselines: BaselineKind::ALL.to_vec(),
        codesign: true,
        master_seed: 2024,
    }
}

#[test]
fn one_point_one_trial_gives_one_row_per_design() {
    let rows = run_sweep(&small(), &spec(SweepVar::None, vec![0.0], 1)).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.design.as_str()).collect();
    assert_eq!(names, ["co-design", "uniform-precoding", "random-precoding", "random-radar-code", "uncoded-radar"]);
    for r in &rows {
        assert_eq!((r.trial, r.value, r.sweep_var.as_str()), (0, 0.0, "none"));
        assert!(r.i_cwsm.is_finite() && r.i_cwsm > 0.0, "{r:?}");
        assert!(r.i_fd > 0.0 && r.i_fd < r.i_cwsm);
        assert!((1..=3).contains(&r.iterations));
    }
}

#[test]
fn csv_has_the_documented_header() {
    let rows = run_sweep(&small(), &ExperimentSpec { baselines: vec![], ..spec(SweepVar::SnrR, vec![0.0, 10.0], 2) })
        .unwrap();
    let text = rows_to_csv(&rows, false).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "sweep_var,value,design,trial,I_CWSM,I_FD,min_rate_slack,iterations,seconds");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 4);
    assert!(body.iter().all(|l| l.starts_with("snr_r,") && l.ends_with(",0.0")));
    assert!(body[0].starts_with("snr_r,0.0,co-design,0,"));
    assert!(body[3].starts_with("snr_r,10.0,co-design,1,"));
}

#[test]
fn sweeps_are_reproducible() {
    let s = ExperimentSpec { baselines: vec![BaselineKind::RandomPrecoding], ..spec(SweepVar::Eta2Csi, vec![0.0, 0.1], 2) };
    let a = rows_to_csv(&run_sweep(&small(), &s).unwrap(), false).unwrap();
    let b = rows_to_csv(&run_sweep(&small(), &s).unwrap(), false).unwrap();
    assert_eq!(a, b);
    let c = rows_to_csv(&run_sweep(&small(), &ExperimentSpec { master_seed: 1, ..s }).unwrap(), false).unwrap();
    assert_ne!(a, c);
}

#[test]
fn trials_share_channels_across_grid_points() {
    // a sweep over a variable that leaves the scenario unchanged repeats rows
    let rows = run_sweep(&small(), &spec(SweepVar::Eta2Csi, vec![0.0, 0.0], 2)).unwrap();
    let (a, b) = rows.split_at(rows.len() / 2);
    for (x, y) in a.iter().zip(b) {
        assert_eq!((x.design.as_str(), x.trial), (y.design.as_str(), y.trial));
        assert_eq!(x.i_cwsm.to_bits(), y.i_cwsm.to_bits());
    }
}

#[test]
fn baseline_constructions() {
    let mut cfg = SystemConfig::reduced();
    cfg.p_r = vec![4.0; cfg.m_r];
    cfg.validate().unwrap();
    let sc = Scenario::generate(&cfg, 3).unwrap();

    let d = baseline_design(BaselineKind::UncodedRadar, &sc, 1).unwrap();
    assert_eq!(d.a, CMat::from_element(4, cfg.m_r, c64(1.0, 0.0)));
    assert!((par(&d.a.column(0).into_owned(), 4.0) - 1.0).abs() < 1e-15);

    let d = baseline_design(BaselineKind::UniformPrecoding, &sc, 1).unwrap();
    for k in 0..cfg.k {
        for i in 0..cfg.num_ul() {
            assert!((d.ul_power(i, k) - cfg.p_u).abs() <= 1e-12 * cfg.p_u);
        }
        assert!((d.dl_power(k) - cfg.p_b).abs() <= 1e-12 * cfg.p_b);
    }

    let d = baseline_design(BaselineKind::RandomRadarCode, &sc, 1).unwrap();
    assert!(code_matrix_feasible(&d.a, &cfg));

    let d = baseline_design(BaselineKind::RandomPrecoding, &sc, 1).unwrap();
    let p = &d.p_u[0][0];
    let g = p.adjoint() * p;
    let want = CMat::identity(p.ncols(), p.ncols()) * c64(cfg.p_u / p.ncols() as f64, 0.0);
    assert!((g - want).norm() < 1e-12);
    assert_ne!(d.p_u[0][0], d.p_u[0][1]);

    for kind in BaselineKind::ALL {
        assert!(design_feasible(&cfg, &baseline_design(kind, &sc, 5).unwrap()), "{kind}");
        assert_eq!(kind.name().parse::<BaselineKind>().unwrap(), kind);
    }
    assert!("bd".parse::<BaselineKind>().is_err());
}

#[test]
fn qos_threshold_examples() {
    let cfg = SystemConfig::defaults();
    assert!((cfg.snr_ul() - 10.0).abs() < 1e-12 && (cfg.snr_r() - 10.0).abs() < 1e-12);
    let (ul, dl) = qos_thresholds(&cfg);
    assert!((ul - (1.0f64 + 10.0 / 60.0).log2()).abs() < 1e-12);
    assert!((ul - 0.2224).abs() < 1e-4);
    assert!((dl - (1.0f64 + 5.0 / 65.0).log2()).abs() < 1e-12);
    assert!((dl - 0.1069).abs() < 1e-4);

    // one UL user with radar and DL fading out: the target has no noise term
    // in its denominator, so it grows without bound
    let mut cfg = SystemConfig::reduced();
    let mut last = 0.0;
    for e in [1e-2, 1e-4, 1e-6] {
        cfg.set_snr_r(e);
        cfg.p_b = e * cfg.sigma2_d;
        let (ul, _) = qos_thresholds(&cfg);
        let want = (1.0 + cfg.snr_ul() / (cfg.m_r as f64 * e + e)).log2();
        assert!((ul - want).abs() < 1e-12);
        assert!(ul > last && ul > (1.0 + cfg.snr_ul()).log2());
        last = ul;
    }
}

#[test]
fn sweep_variables_apply_in_db() {
    let base = SystemConfig::defaults();
    assert!((SweepVar::SnrR.apply(&base, 0.0).snr_r() - 1.0).abs() < 1e-12);
    assert!((SweepVar::Cnr.apply(&base, 40.0).cnr() - 1e4).abs() < 1e-8);
    assert!((SweepVar::Sigma2Si.apply(&base, -30.0).sigma2_si - 1e-3).abs() < 1e-15);
    assert_eq!(SweepVar::Eta2Csi.apply(&base, 0.1).eta2_csi, 0.1);
    assert_eq!("CNR".parse::<SweepVar>().unwrap(), SweepVar::Cnr);
    assert!("snr".parse::<SweepVar>().is_err());
    // the QoS targets follow the radar SNR
    let lo = qos_thresholds(&SweepVar::SnrR.apply(&base, -5.0)).0;
    let hi = qos_thresholds(&SweepVar::SnrR.apply(&base, 10.0)).0;
    assert!(lo > hi);
}

#[test]
fn invalid_experiments_are_rejected() {
    assert!(run_sweep(&small(), &spec(SweepVar::None, vec![], 1)).is_err());
    assert!(run_sweep(&small(), &spec(SweepVar::None, vec![0.0], 0)).is_err());
}

#[test]
fn trial_seeds_differ() {
    let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(7, t)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
    assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
}

#[test]
fn content_hash_matches_git_blob_sha256() {
    // sha256 of "blob <len>\0<data>", computed with an external tool
    assert_eq!(content_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    assert_eq!(content_hash(b"abc"), "c1cf6e465077930e88dc5136641d402f72a229ddd996f627d60e9639eaba35a6");
    assert_eq!(content_hash(b"hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
}

fn row(value: f64, design: &str, trial: usize, i_cwsm: f64) -> SweepRow {
    SweepRow {
        sweep_var: "cnr".into(),
        value,
        design: design.into(),
        trial,
        i_cwsm,
        i_fd: i_cwsm / 2.0,
        min_rate_slack: 0.0,
        iterations: 1,
        seconds: 0.5,
    }
}

#[test]
fn summaries_average_finite_rows() {
    let rows = vec![
        row(10.0, "a", 0, 1.0),
        row(10.0, "a", 1, 3.0),
        row(10.0, "a", 2, f64::NAN),
        row(10.0, "b", 0, 2.0),
        row(40.0, "a", 0, 5.0),
    ];
    let s = summarize(&rows);
    assert_eq!(s.len(), 3);
    assert_eq!((s[0].value, s[0].design.as_str(), s[0].trials, s[0].failed), (10.0, "a", 3, 1));
    assert_eq!(s[0].mean_cwsm, 2.0);
    assert!((s[0].se_cwsm - 1.0).abs() < 1e-15);
    assert_eq!(s[0].mean_fd, 1.0);
    assert_eq!((s[1].mean_cwsm, s[1].se_cwsm), (2.0, 0.0));
    assert_eq!(s[2].value, 40.0);

    let timed = rows_to_csv(&rows, true).unwrap();
    assert!(timed.lines().nth(1).unwrap().ends_with(",0.5"));
    assert!(rows_to_csv(&rows, false).unwrap().lines().nth(1).unwrap().ends_with(",0.0"));
}

#[test]
fn results_and_metadata_are_written() {
    let dir = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("experiments_write");
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("rows.csv");
    let cfg = small();
    let s = spec(SweepVar::Cnr, vec![10.0, 40.0], 1);
    let rows = vec![row(10.0, "co-design", 0, 1.5), row(40.0, "co-design", 0, 1.25)];
    write_results(&out, &cfg, Some(&s), &rows, false, 123, serde_json::json!({"note": 1})).unwrap();

    assert_eq!(std::fs::read_to_string(&out).unwrap(), rows_to_csv(&rows, false).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("rows.csv.json")).unwrap()).unwrap();
    let hash = meta["input_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    let mut input = cfg.to_toml_string().into_bytes();
    input.extend(serde_json::to_vec(&s).unwrap());
    assert_eq!(hash, content_hash(&input));
    assert_eq!(meta["started_unix"], 123);
    assert!(meta["finished_unix"].as_u64().unwrap() >= 123);
    assert_eq!(meta["config"]["k"], cfg.k);
    assert_eq!(meta["experiment"]["grid"][1], 40.0);
    assert_eq!(meta["summary"].as_array().unwrap().len(), 2);
    assert_eq!(meta["extra"]["note"], 1);

    // another configuration, another hash
    let mut other = cfg.clone();
    other.k = 2;
    write_results(&out, &other, Some(&s), &rows, false, 123, serde_json::Value::Null).unwrap();
    let meta2: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("rows.csv.json")).unwrap()).unwrap();
    assert_ne!(meta2["input_hash"], meta["input_hash"]);
}
