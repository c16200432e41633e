use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mrmc_ffi::*;

fn small_config() -> *mut MrmcConfig {
    let text = CString::new(
        "m_r = 2\nn_r = 2\nm_c = 2\nn_c = 2\nnum_ul = 1\nnum_dl = 1\nul_antennas = [2]\nul_streams = [2]\n\
         dl_antennas = [2]\ndl_streams = [2]\nk = 4\nn_symbols = 8\n\
         ell_max = 5\nt_u_max = 20\nt_d_max = 20\n",
    )
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { mrmc_config_from_toml(text.as_ptr(), &mut cfg) }, MrmcStatus::Ok, "{}", last_error());
    cfg
}

fn last_error() -> String {
    let p = mrmc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(mrmc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_and_read_back() {
    let cfg = small_config();
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { mrmc_run(cfg, 3, &mut res) }, MrmcStatus::Ok);
    assert!(!res.is_null());
    let i = unsafe { mrmc_result_i_cwsm(res) };
    assert!(i.is_finite() && i > 0.0);
    assert!(unsafe { mrmc_result_i_fd(res) } > 0.0);
    let iters = unsafe { mrmc_result_iterations(res) };
    assert!((1..=5).contains(&iters));

    let mut len = 0usize;
    assert_eq!(unsafe { mrmc_result_trace(res, ptr::null_mut(), &mut len) }, MrmcStatus::BufferTooSmall);
    assert_eq!(len, iters + 1);
    let mut trace = vec![0.0; len];
    assert_eq!(unsafe { mrmc_result_trace(res, trace.as_mut_ptr(), &mut len) }, MrmcStatus::Ok);
    assert!(trace.iter().all(|v| v.is_finite()));

    // 4 PRIs x 2 Txs, each column at full power
    let (mut re, mut im) = (vec![0.0; 8], vec![0.0; 8]);
    assert_eq!(unsafe { mrmc_result_code(res, re.as_mut_ptr(), im.as_mut_ptr(), 8) }, MrmcStatus::Ok);
    for m in 0..2 {
        let e: f64 = (0..4).map(|k| re[m * 4 + k].powi(2) + im[m * 4 + k].powi(2)).sum();
        assert!((e - 0.01).abs() < 1e-9 * 0.01 + 1e-15, "column {m} energy {e}");
    }
    assert_eq!(unsafe { mrmc_result_code(res, re.as_mut_ptr(), im.as_mut_ptr(), 3) }, MrmcStatus::BufferTooSmall);

    unsafe {
        mrmc_result_free(res);
        mrmc_config_free(cfg);
    }
}

#[test]
fn same_seed_same_result() {
    let cfg = small_config();
    let run = || {
        let mut res = ptr::null_mut();
        assert_eq!(unsafe { mrmc_run(cfg, 11, &mut res) }, MrmcStatus::Ok);
        let v = unsafe { mrmc_result_i_cwsm(res) };
        unsafe { mrmc_result_free(res) };
        v
    };
    assert_eq!(run().to_bits(), run().to_bits());
    unsafe { mrmc_config_free(cfg) };
}

#[test]
fn bad_inputs_give_codes_and_messages() {
    let cfg = mrmc_config_default();
    let (k, v) = (CString::new("gamma").unwrap(), CString::new("0.5").unwrap());
    assert_eq!(unsafe { mrmc_config_set(cfg, k.as_ptr(), v.as_ptr()) }, MrmcStatus::Config);
    assert!(!last_error().is_empty());
    let (k, v) = (CString::new("no_such_key").unwrap(), CString::new("1").unwrap());
    assert_ne!(unsafe { mrmc_config_set(cfg, k.as_ptr(), v.as_ptr()) }, MrmcStatus::Ok);

    assert_eq!(unsafe { mrmc_config_set(ptr::null_mut(), k.as_ptr(), v.as_ptr()) }, MrmcStatus::NullPointer);
    assert_eq!(unsafe { mrmc_run(ptr::null(), 1, ptr::null_mut()) }, MrmcStatus::NullPointer);
    assert!(unsafe { mrmc_result_i_cwsm(ptr::null()) }.is_nan());

    let bad = CString::new("k = [").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mrmc_config_from_toml(bad.as_ptr(), &mut out) }, MrmcStatus::Config);
    assert!(out.is_null());

    // a successful call clears the message
    let (mut u, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { mrmc_qos_thresholds(cfg, &mut u, &mut d) }, MrmcStatus::Ok);
    assert!(mrmc_last_error().is_null());
    unsafe {
        mrmc_config_free(cfg);
        mrmc_config_free(ptr::null_mut());
        mrmc_result_free(ptr::null_mut());
    }
}

#[test]
fn toml_round_trip_and_qos() {
    let text = CString::new("snr_ul = \"10 dB\"\nsnr_dl = \"10 dB\"\nsnr_r = \"10 dB\"\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { mrmc_config_from_toml(text.as_ptr(), &mut cfg) }, MrmcStatus::Ok);
    let (mut u, mut d) = (0.0, 0.0);
    assert_eq!(unsafe { mrmc_qos_thresholds(cfg, &mut u, &mut d) }, MrmcStatus::Ok);
    assert!((u - (1.0f64 + 10.0 / 60.0).log2()).abs() < 1e-12);
    assert!((d - (1.0f64 + 5.0 / 65.0).log2()).abs() < 1e-12);
    unsafe { mrmc_config_free(cfg) };
}

#[test]
fn par_projection_through_c_abi() {
    let re = [3.0, 0.1, -0.2, 0.05];
    let im = [0.0, 0.2, 0.1, -0.05];
    let (mut or, mut oi) = ([0.0; 4], [0.0; 4]);
    let st = unsafe { mrmc_par_project(re.as_ptr(), im.as_ptr(), 4, 4.0, 2.0, or.as_mut_ptr(), oi.as_mut_ptr()) };
    assert_eq!(st, MrmcStatus::Ok);
    let p: Vec<f64> = (0..4).map(|k| or[k] * or[k] + oi[k] * oi[k]).collect();
    let e: f64 = p.iter().sum();
    assert!((e - 4.0).abs() < 1e-9 * 4.0);
    let peak = p.iter().cloned().fold(0.0, f64::max);
    assert!(4.0 * peak / e <= 2.0 + 1e-9);
    // phases of nonzero entries are kept
    for k in 0..4 {
        let a = im[k].atan2(re[k]);
        let b = oi[k].atan2(or[k]);
        assert!((a - b).abs() < 1e-9, "entry {k}");
    }
    let st = unsafe { mrmc_par_project(re.as_ptr(), im.as_ptr(), 4, 4.0, 0.5, or.as_mut_ptr(), oi.as_mut_ptr()) };
    assert_eq!(st, MrmcStatus::InvalidArgument);
}

#[test]
fn verify_suite_passes() {
    let (mut p, mut f) = (0usize, 99usize);
    assert_eq!(unsafe { mrmc_verify(7, &mut p, &mut f) }, MrmcStatus::Ok);
    assert!(p > 0);
    assert_eq!(f, 0);
}

/// The generated header must be valid C and C++ and agree with these names.
#[test]
fn header_compiles() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/mrmc.h");
    assert!(header.exists(), "header not generated");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["mrmc_run", "mrmc_config_set", "mrmc_par_project", "MRMC_STATUS_BUFFER_TOO_SMALL", "MrmcResult"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("smoke.c");
    std::fs::write(
        &src,
        "#include \"mrmc.h\"\n\
         int main(void) {\n\
           MrmcConfig *cfg = mrmc_config_default();\n\
           double u, d;\n\
           MrmcStatus s = mrmc_qos_thresholds(cfg, &u, &d);\n\
           mrmc_config_free(cfg);\n\
           return s == MRMC_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let status = Command::new(compiler)
            .args(&extra)
            .arg("-Wall")
            .arg("-Werror")
            .arg("-fsyntax-only")
            .arg("-I")
            .arg(dir.join("include"))
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available, skipping"),
        }
    }
}
