//! Baselines, QoS thresholds, Monte Carlo sweeps and result files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{db_to_lin, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{c64, cn_matrix, orthonormalize, CMat, ZERO};
use crate::metrics::cwsm_optimal;
use crate::model::{perturb_csi, DesignState};
use crate::optimizer::{
    bcd_ap_mrmc, bcd_ap_mrmc_from, design_feasible, init_deterministic, slacks, FixedBlocks, RunOptions,
};
use crate::par::project_code_matrix;
use crate::scenario::Scenario;

/// `(R_UL, R_DL)` from the SNRs of the configuration.
pub fn qos_thresholds(cfg: &SystemConfig) -> (f64, f64) {
    let (ul, dl, r) = (cfg.snr_ul(), cfg.snr_dl(), cfg.snr_r());
    let (ni, nj) = (cfg.num_ul() as f64, cfg.num_dl() as f64);
    let mr = cfg.m_r as f64;
    let r_ul = (1.0 + ul / (mr * r + dl + (ni - 1.0) * ul)).log2();
    let r_dl = (1.0 + (dl / nj) / (mr * r + dl * (nj - 1.0) / nj + ni * ul)).log2();
    (r_ul, r_dl)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BaselineKind {
    UniformPrecoding,
    RandomPrecoding,
    RandomRadarCode,
    UncodedRadar,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::UniformPrecoding,
        BaselineKind::RandomPrecoding,
        BaselineKind::RandomRadarCode,
        BaselineKind::UncodedRadar,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::UniformPrecoding => "uniform-precoding",
            BaselineKind::RandomPrecoding => "random-precoding",
            BaselineKind::RandomRadarCode => "random-radar-code",
            BaselineKind::UncodedRadar => "uncoded-radar",
        }
    }

    /// The side held fixed; the other one is optimised.
    pub fn fixed(&self) -> FixedBlocks {
        match self {
            BaselineKind::UniformPrecoding | BaselineKind::RandomPrecoding => FixedBlocks { precoders: true, code: false },
            BaselineKind::RandomRadarCode | BaselineKind::UncodedRadar => FixedBlocks { precoders: false, code: true },
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|b| b.name() == s.trim())
            .ok_or_else(|| Error::Argument(format!("unknown baseline '{s}'")))
    }
}

const STREAM_BASELINE: u64 = 50;

/// Starting design of a baseline; the fixed side is final, the other side is
/// the deterministic initialisation.
pub fn baseline_design(kind: BaselineKind, sc: &Scenario, seed: u64) -> Result<DesignState> {
    let cfg = &sc.cfg;
    let mut d = init_deterministic(sc, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_BASELINE);
    match kind {
        BaselineKind::UniformPrecoding => {
            for i in 0..cfg.num_ul() {
                let p = identity_block(cfg.ul_antennas[i], cfg.ul_streams[i], cfg.p_u);
                d.p_u[i] = vec![p; cfg.k];
            }
            for j in 0..cfg.num_dl() {
                let p = identity_block(cfg.m_c, cfg.dl_streams[j], cfg.p_b / cfg.num_dl() as f64);
                d.p_d[j] = vec![p; cfg.k];
            }
        }
        BaselineKind::RandomPrecoding => {
            for k in 0..cfg.k {
                for i in 0..cfg.num_ul() {
                    d.p_u[i][k] = random_orthonormal(&mut rng, cfg.ul_antennas[i], cfg.ul_streams[i], cfg.p_u);
                }
                for j in 0..cfg.num_dl() {
                    let pw = cfg.p_b / cfg.num_dl() as f64;
                    d.p_d[j][k] = random_orthonormal(&mut rng, cfg.m_c, cfg.dl_streams[j], pw);
                }
            }
        }
        BaselineKind::RandomRadarCode => {
            d.a = project_code_matrix(&cn_matrix(&mut rng, cfg.k, cfg.m_r, ZERO, 1.0), cfg)?;
        }
        BaselineKind::UncodedRadar => {
            d.a = CMat::from_fn(cfg.k, cfg.m_r, |_, m| c64((cfg.p_r[m] / cfg.k as f64).sqrt(), 0.0));
        }
    }
    crate::metrics::refresh_receivers(sc, &mut d)?;
    Ok(d)
}

/// `[I; 0]` scaled to `power` spread over the streams.
fn identity_block(n: usize, d: usize, power: f64) -> CMat {
    let s = (power / d as f64).sqrt();
    CMat::from_fn(n, d, |r, c| if r == c { c64(s, 0.0) } else { ZERO })
}

fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, d: usize, power: f64) -> CMat {
    let q = orthonormalize(&cn_matrix(rng, n, d, ZERO, 1.0));
    q.columns(0, d) * c64((power / d as f64).sqrt(), 0.0)
}

/// Variable swept by [`run_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVar {
    /// Radar SNR in dB.
    SnrR,
    /// Clutter-to-noise ratio in dB.
    Cnr,
    /// SI attenuation in dB.
    Sigma2Si,
    /// CSI error variance (linear).
    Eta2Csi,
    None,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::SnrR => "snr_r",
            SweepVar::Cnr => "cnr",
            SweepVar::Sigma2Si => "sigma2_si",
            SweepVar::Eta2Csi => "eta2_csi",
            SweepVar::None => "none",
        }
    }

    /// Configuration at grid value `v`.
    pub fn apply(&self, base: &SystemConfig, v: f64) -> SystemConfig {
        let mut cfg = base.clone();
        match self {
            SweepVar::SnrR => cfg.set_snr_r(db_to_lin(v)),
            SweepVar::Cnr => cfg.set_cnr(db_to_lin(v)),
            SweepVar::Sigma2Si => cfg.sigma2_si = db_to_lin(v),
            SweepVar::Eta2Csi => cfg.eta2_csi = v,
            SweepVar::None => {}
        }
        cfg
    }
}

impl FromStr for SweepVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snr_r" => Ok(SweepVar::SnrR),
            "cnr" => Ok(SweepVar::Cnr),
            "sigma2_si" => Ok(SweepVar::Sigma2Si),
            "eta2_csi" => Ok(SweepVar::Eta2Csi),
            "none" => Ok(SweepVar::None),
            _ => Err(Error::Argument(format!("unknown sweep variable '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub baselines: Vec<BaselineKind>,
    /// Also run the joint design.
    pub codesign: bool,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Argument("sweep grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Argument("need at least one trial".into()));
        }
        Ok(())
    }
}

/// Seed of trial `t`: the channels of a trial are shared by every grid point
/// and design (common random numbers).
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    // splitmix64 step on (master, trial)
    let mut z = master ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn csi_seed(master: u64, trial: usize) -> u64 {
    trial_seed(master ^ 0x5DEE_CE66_D1CE_5EED, trial)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_var: String,
    pub value: f64,
    pub design: String,
    pub trial: usize,
    #[serde(rename = "I_CWSM")]
    pub i_cwsm: f64,
    #[serde(rename = "I_FD")]
    pub i_fd: f64,
    pub min_rate_slack: f64,
    pub iterations: usize,
    pub seconds: f64,
}

/// Run one design for one trial. Designs are computed on the (possibly
/// perturbed) estimated channels and scored on the true ones.
pub fn run_design(
    truth: &Scenario,
    estimate: &Scenario,
    design: Option<BaselineKind>,
    seed: u64,
) -> Result<(f64, f64, f64, usize)> {
    let cfg = &truth.cfg;
    let mut opts = RunOptions::from_config(cfg);
    opts.seed = seed;
    let out = match design {
        None => bcd_ap_mrmc(estimate, &opts)?,
        Some(kind) => {
            opts.fixed = kind.fixed();
            let d = baseline_design(kind, estimate, seed)?;
            bcd_ap_mrmc_from(estimate, d, &opts)?
        }
    };
    if !design_feasible(cfg, &out.design) {
        return Err(Error::Numerical("optimised design violates its constraints".into()));
    }
    let (i_cwsm, r) = cwsm_optimal(truth, &out.design)?;
    let sl = slacks(cfg, &out.design, &r);
    Ok((i_cwsm, r.i_fd(cfg), sl.rate, out.report.outer_iterations))
}

/// Every grid point, trial and design of `spec`. Failed trials produce rows
/// with NaN metrics.
pub fn run_sweep(base: &SystemConfig, spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut designs: Vec<Option<BaselineKind>> = Vec::new();
    if spec.codesign {
        designs.push(None);
    }
    designs.extend(spec.baselines.iter().map(|&b| Some(b)));
    let mut jobs = Vec::new();
    for (vi, &v) in spec.grid.iter().enumerate() {
        let cfg = spec.sweep.apply(base, v);
        cfg.validate()?;
        for t in 0..spec.trials {
            jobs.push((vi, v, t));
        }
    }
    let rows: Vec<Vec<SweepRow>> = jobs
        .into_par_iter()
        .map(|(_, v, t)| run_trial(base, spec, &designs, v, t))
        .collect();
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    Ok(rows)
}

fn run_trial(base: &SystemConfig, spec: &ExperimentSpec, designs: &[Option<BaselineKind>], v: f64, t: usize) -> Vec<SweepRow> {
    let cfg = spec.sweep.apply(base, v);
    let seed = trial_seed(spec.master_seed, t);
    let row = |design: String, res: Result<(f64, f64, f64, usize)>, seconds: f64| {
        let (i_cwsm, i_fd, min_rate_slack, iterations) = match res {
            Ok(x) => x,
            Err(e) => {
                warn!("{} = {v}, trial {t}, {design}: {e}", spec.sweep.name());
                (f64::NAN, f64::NAN, f64::NAN, 0)
            }
        };
        info!("{} = {v} trial {t} {design}: I_CWSM {i_cwsm:.4}", spec.sweep.name());
        SweepRow { sweep_var: spec.sweep.name().into(), value: v, design, trial: t, i_cwsm, i_fd, min_rate_slack, iterations, seconds }
    };
    let truth = match Scenario::generate(&cfg, seed) {
        Ok(sc) => sc,
        Err(e) => {
            return designs
                .iter()
                .map(|des| row(design_name(*des), Err(Error::Numerical(e.to_string())), 0.0))
                .collect()
        }
    };
    let estimate = if cfg.eta2_csi > 0.0 {
        truth.with_channels(perturb_csi(&truth.ch, cfg.eta2_csi, csi_seed(spec.master_seed, t)))
    } else {
        truth.clone()
    };
    designs
        .iter()
        .map(|&des| {
            let start = Instant::now();
            let res = run_design(&truth, &estimate, des, seed);
            row(design_name(des), res, start.elapsed().as_secs_f64())
        })
        .collect()
}

fn design_name(des: Option<BaselineKind>) -> String {
    des.map_or("co-design".to_string(), |b| b.name().to_string())
}

/// Mean and standard error of one design at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub value: f64,
    pub design: String,
    pub trials: usize,
    pub failed: usize,
    pub mean_cwsm: f64,
    pub se_cwsm: f64,
    pub mean_fd: f64,
    pub se_fd: f64,
}

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn summarize(rows: &[SweepRow]) -> Vec<PointSummary> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(v, d)| *v == r.value && *d == r.design) {
            keys.push((r.value, r.design.clone()));
        }
    }
    keys.into_iter()
        .map(|(v, d)| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.value == v && r.design == d).collect();
            let ok: Vec<&&SweepRow> = sel.iter().filter(|r| r.i_cwsm.is_finite()).collect();
            let c: Vec<f64> = ok.iter().map(|r| r.i_cwsm).collect();
            let f: Vec<f64> = ok.iter().map(|r| r.i_fd).collect();
            let (mean_cwsm, se_cwsm) = mean_se(&c);
            let (mean_fd, se_fd) = mean_se(&f);
            PointSummary {
                value: v,
                design: d,
                trials: sel.len(),
                failed: sel.len() - ok.len(),
                mean_cwsm,
                se_cwsm,
                mean_fd,
                se_fd,
            }
        })
        .collect()
}

/// CSV text of the rows. With `timing` off the `seconds` column is zero so
/// that repeated runs are byte-identical.
pub fn rows_to_csv(rows: &[SweepRow], timing: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let mut r = r.clone();
        if !timing {
            r.seconds = 0.0;
        }
        w.serialize(&r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Git-style content hash (`sha256("blob <len>\0" + data)`).
pub fn content_hash(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", data.len()).as_bytes());
    h.update(data);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub config: &'a SystemConfig,
    pub experiment: Option<&'a ExperimentSpec>,
    pub input_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub summary: Vec<PointSummary>,
    pub extra: serde_json::Value,
}

/// Write `<out>` (CSV) and `<out>.json` (metadata).
#[allow(clippy::too_many_arguments)]
pub fn write_results(
    out: &Path,
    cfg: &SystemConfig,
    spec: Option<&ExperimentSpec>,
    rows: &[SweepRow],
    timing: bool,
    started: u64,
    extra: serde_json::Value,
) -> Result<()> {
    std::fs::write(out, rows_to_csv(rows, timing)?)?;
    let mut input = cfg.to_toml_string().into_bytes();
    if let Some(s) = spec {
        input.extend(serde_json::to_vec(s).map_err(|e| Error::Parse(e.to_string()))?);
    }
    let meta = Metadata {
        config: cfg,
        experiment: spec,
        input_hash: content_hash(&input),
        started_unix: started,
        finished_unix: unix_seconds(),
        summary: summarize(rows),
        extra,
    };
    let mut p = out.as_os_str().to_owned();
    p.push(".json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(p, text)?;
    Ok(())
}
