use std::path::PathBuf;
use std::process::{Command, Output};

use mrmc::SystemConfig;

const SMALL: &str = "m_r = 2\nn_r = 2\nm_c = 2\nn_c = 2\nnum_ul = 1\nnum_dl = 1\nul_antennas = [2]\nul_streams = [2]\n\
                     dl_antennas = [2]\ndl_streams = [2]\nk = 4\nn_symbols = 8\nell_max = 3\n";

fn mrmc(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mrmc")).args(args).output().expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    dir
}

#[test]
fn verify_passes() {
    let out = mrmc(&["verify", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() > 5);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn defaults_round_trip() {
    let out = mrmc(&["defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = SystemConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg.to_toml_string(), SystemConfig::defaults().to_toml_string());
    assert_eq!(cfg.k, 8);
}

#[test]
fn sweep_writes_csv_and_metadata() {
    let dir = workdir("cli_sweep");
    let cfg = dir.join("small.toml");
    let csv = dir.join("out.csv");
    let out = mrmc(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "sigma2_si",
        "--grid",
        "-30,0dB",
        "--trials",
        "2",
        "--baselines",
        "random-precoding,uncoded-radar",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sweep_var,value,design,trial,I_CWSM,I_FD,min_rate_slack,iterations,seconds");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    assert!(lines[1].starts_with("sigma2_si,-30.0,co-design,0,"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out.csv.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["m_r"], 2);
    assert_eq!(meta["experiment"]["trials"], 2);
    assert_eq!(meta["summary"].as_array().unwrap().len(), 6);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 6);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = workdir("cli_rerun");
    let cfg = dir.join("small.toml");
    let mut files = Vec::new();
    for (name, extra) in [("a.csv", vec![]), ("b.csv", vec!["--timing", "off"])] {
        let csv = dir.join(name);
        let mut args = vec!["sweep", "--config", cfg.to_str().unwrap(), "--sweep", "eta2_csi", "--grid", "0,0.1"];
        args.extend(["--trials", "2", "--seed", "5", "--out", csv.to_str().unwrap()]);
        args.extend(extra);
        assert!(mrmc(&args).status.success());
        files.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(files[0], files[1]);

    let mut runs = Vec::new();
    for name in ["r1.csv", "r2.csv"] {
        let csv = dir.join(name);
        let args = ["run", "--config", cfg.to_str().unwrap(), "--seed", "4", "--set", "ell_max=4", "--out", csv.to_str().unwrap()];
        assert!(mrmc(&args).status.success());
        runs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    assert!(!runs[0].is_empty());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = workdir("cli_bad");
    let out = mrmc(&["run", "--set", "gamma=0.5", "--out", dir.join("x.csv").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let out = mrmc(&["sweep", "--sweep", "nope"]);
    assert!(!out.status.success());
    let out = mrmc(&["run", "--config", dir.join("missing.toml").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}
