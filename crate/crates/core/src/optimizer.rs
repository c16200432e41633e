//! Initialisation, the WMMSE sweep over all precoders and code rows, and the
//! outer block-coordinate loop with PAR projection and filter refresh.

use std::time::Instant;

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{InitScheme, SystemConfig};
use crate::error::{Error, Result};
use crate::inner::{solve_radar_code, subgradient_dl, subgradient_ul, GradientCache, SubgradientOptions};
use crate::linalg::{c64, cn_matrix, frob2, orthonormalize, right_singular_vectors, CMat, ZERO};
use crate::metrics::{cwsm_cfg, rates, refresh_receivers, LinkValues};
use crate::model::DesignState;
use crate::par::{code_matrix_feasible, par, project_code_matrix};
use crate::scenario::Scenario;

const STREAM_INIT: u64 = 40;

fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_INIT);
    rng
}

/// Constant-modulus code with random phases at full power.
pub fn random_phase_code(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(cfg.k, cfg.m_r, |_, m| {
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        c64(0.0, th).exp() * (cfg.p_r[m] / cfg.k as f64).sqrt()
    })
}

fn scaled_columns(v: &CMat, cols: usize, power: f64) -> CMat {
    let s = (power / cols as f64).sqrt();
    v.columns(0, cols) * c64(s, 0.0)
}

/// Precoders along the dominant right singular vectors of each user's
/// channel, equal power per stream; DL power split evenly across users.
pub fn init_deterministic(sc: &Scenario, seed: u64) -> Result<DesignState> {
    let cfg = &sc.cfg;
    let mut d = DesignState::zeros(cfg);
    for i in 0..cfg.num_ul() {
        let (_, v) = right_singular_vectors(&sc.ch.h_ib[i]);
        let p = scaled_columns(&v, cfg.ul_streams[i], cfg.p_u);
        d.p_u[i] = vec![p; cfg.k];
    }
    for j in 0..cfg.num_dl() {
        let (_, v) = right_singular_vectors(&sc.ch.h_bj[j]);
        let p = scaled_columns(&v, cfg.dl_streams[j], cfg.p_b / cfg.num_dl() as f64);
        d.p_d[j] = vec![p; cfg.k];
    }
    d.a = random_phase_code(cfg, &mut init_rng(seed));
    refresh_receivers(sc, &mut d)?;
    Ok(d)
}

/// Same power allocation as [`init_deterministic`] with random orthonormal
/// directions.
pub fn init_random(sc: &Scenario, seed: u64) -> Result<DesignState> {
    let cfg = &sc.cfg;
    let mut rng = init_rng(seed);
    let mut d = DesignState::zeros(cfg);
    for i in 0..cfg.num_ul() {
        let n = cfg.ul_antennas[i];
        let v = orthonormalize(&cn_matrix(&mut rng, n, n, ZERO, 1.0));
        let p = scaled_columns(&v, cfg.ul_streams[i], cfg.p_u);
        d.p_u[i] = vec![p; cfg.k];
    }
    for j in 0..cfg.num_dl() {
        let v = orthonormalize(&cn_matrix(&mut rng, cfg.m_c, cfg.m_c, ZERO, 1.0));
        let p = scaled_columns(&v, cfg.dl_streams[j], cfg.p_b / cfg.num_dl() as f64);
        d.p_d[j] = vec![p; cfg.k];
    }
    d.a = random_phase_code(cfg, &mut rng);
    refresh_receivers(sc, &mut d)?;
    Ok(d)
}

pub fn initialize(sc: &Scenario, scheme: InitScheme, seed: u64) -> Result<DesignState> {
    match scheme {
        InitScheme::Deterministic => init_deterministic(sc, seed),
        InitScheme::Random => init_random(sc, seed),
    }
}

/// Which blocks the sweep is allowed to change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FixedBlocks {
    pub precoders: bool,
    pub code: bool,
}

/// Trace of one WMMSE sweep call.
#[derive(Debug, Clone, Default, Serialize)]
pub struct WmmseReport {
    /// Weighted-sum MSE before the call and after every block update.
    pub xi_trace: Vec<f64>,
    pub dual_iterations: usize,
    pub radar_fallbacks: usize,
    pub qos_capped: usize,
}

/// One WMMSE sweep over every precoder and code row at fixed filters and
/// weights. `d.a` is left unprojected.
pub fn wmmse_mrmc(sc: &Scenario, d: &mut DesignState, iota_max: usize, fixed: FixedBlocks) -> Result<WmmseReport> {
    let cfg = &sc.cfg;
    let cache = GradientCache::new(cfg, &sc.ch, &sc.stats, d)?;
    let xi_of = |d: &DesignState| cache.xi(cfg, &sc.ch, &sc.sym, d).total();
    let mut rep = WmmseReport::default();
    let mut xi = xi_of(d);
    rep.xi_trace.push(xi);
    let opts_u = SubgradientOptions::from_config(cfg, cfg.t_u_max);
    let opts_d = SubgradientOptions::from_config(cfg, cfg.t_d_max);
    for _ in 0..iota_max {
        for k in 0..cfg.k {
            if !fixed.precoders {
                for i in 0..cfg.num_ul() {
                    let out = subgradient_ul(cfg, &sc.ch, &sc.sym, &cache, d, xi, i, k, &opts_u)?;
                    d.p_u[i][k] = out.x;
                    d.duals.lambda_u[i][k] = out.lambda;
                    d.duals.mu_u[i][k] = out.mu;
                    d.duals.capped_u[i][k] = out.capped;
                    rep.dual_iterations += out.iterations;
                    rep.qos_capped += out.capped as usize;
                    xi = xi_of(d);
                    rep.xi_trace.push(xi);
                }
                for j in 0..cfg.num_dl() {
                    let out = subgradient_dl(cfg, &sc.ch, &sc.sym, &cache, d, xi, j, k, &opts_d)?;
                    d.p_d[j][k] = out.x;
                    d.duals.lambda_d[k] = out.lambda;
                    d.duals.mu_d[j][k] = out.mu;
                    d.duals.capped_d[j][k] = out.capped;
                    rep.dual_iterations += out.iterations;
                    rep.qos_capped += out.capped as usize;
                    xi = xi_of(d);
                    rep.xi_trace.push(xi);
                }
            }
            if !fixed.code {
                let up = solve_radar_code(cfg, &sc.ch, &cache, d, xi, k)?;
                rep.radar_fallbacks += up.fell_back as usize;
                for m in 0..cfg.m_r {
                    d.a[(k, m)] = up.a[(m, 0)];
                }
                xi = xi_of(d);
                rep.xi_trace.push(xi);
            }
        }
    }
    Ok(rep)
}

/// Constraint slacks of a design (positive power/PAR slack means violation,
/// negative rate slack means a missed QoS target).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slacks {
    /// `max (tr(P P^H) - budget) / budget` over UL users and DL frames.
    pub power: f64,
    /// `min (rate - threshold)` over all links and frames.
    pub rate: f64,
    /// `max (PAR - gamma)` over radar Txs.
    pub par: f64,
}

pub fn slacks(cfg: &SystemConfig, d: &DesignState, r: &LinkValues) -> Slacks {
    let mut power = f64::NEG_INFINITY;
    for k in 0..cfg.k {
        for i in 0..cfg.num_ul() {
            power = power.max((d.ul_power(i, k) - cfg.p_u) / cfg.p_u);
        }
        power = power.max((d.dl_power(k) - cfg.p_b) / cfg.p_b);
    }
    let mut rate = f64::INFINITY;
    for row in &r.ul {
        for &v in row {
            rate = rate.min(v - cfg.r_ul);
        }
    }
    for row in &r.dl {
        for &v in row {
            rate = rate.min(v - cfg.r_dl);
        }
    }
    let mut p = f64::NEG_INFINITY;
    for m in 0..cfg.m_r {
        p = p.max(par(&d.a.column(m).into_owned(), cfg.p_r[m]) - cfg.gamma[m]);
    }
    Slacks { power, rate, par: p }
}

/// Relative power excess treated as rounding rather than a violation.
const RESCALE_TOL: f64 = 1e-12;

/// Scale precoders down to their budgets; returns whether anything changed.
pub fn rescale_to_feasible(cfg: &SystemConfig, d: &mut DesignState) -> bool {
    let mut changed = false;
    for k in 0..cfg.k {
        for i in 0..cfg.num_ul() {
            let p = d.ul_power(i, k);
            if p > cfg.p_u * (1.0 + RESCALE_TOL) {
                d.p_u[i][k] *= c64((cfg.p_u / p).sqrt(), 0.0);
                changed = true;
            }
        }
        let p = d.dl_power(k);
        if p > cfg.p_b * (1.0 + RESCALE_TOL) {
            let s = c64((cfg.p_b / p).sqrt(), 0.0);
            for j in 0..cfg.num_dl() {
                d.p_d[j][k] *= s;
            }
            changed = true;
        }
    }
    changed
}

/// Whether all power and PAR constraints hold.
pub fn design_feasible(cfg: &SystemConfig, d: &DesignState) -> bool {
    let tol = 1e-9;
    let power_ok = (0..cfg.k).all(|k| {
        (0..cfg.num_ul()).all(|i| d.ul_power(i, k) <= cfg.p_u * (1.0 + tol)) && d.dl_power(k) <= cfg.p_b * (1.0 + tol)
    });
    power_ok && code_matrix_feasible(&d.a, cfg)
}

/// First index `l` such that the relative change of `trace` stayed below
/// `tol` for the `window` steps ending at `l`.
pub fn plateau_index(trace: &[f64], tol: f64, window: usize) -> Option<usize> {
    let mut run = 0;
    for l in 1..trace.len() {
        let rel = (trace[l] - trace[l - 1]).abs() / trace[l].abs().max(1e-12);
        if rel < tol {
            run += 1;
            if run >= window {
                return Some(l);
            }
        } else {
            run = 0;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIterations,
    Converged,
    NonFinite,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub ell: usize,
    pub i_cwsm: f64,
    /// Weighted-sum MSE at the end of the WMMSE sweep (before projection).
    pub xi_wmmse: f64,
    pub slacks: Slacks,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub records: Vec<IterationRecord>,
    /// One weighted-sum MSE trace per WMMSE call.
    pub inner_traces: Vec<Vec<f64>>,
    pub termination: Termination,
    pub outer_iterations: usize,
    pub dual_iterations: usize,
    /// Outer iteration whose design is returned.
    pub best_ell: usize,
    pub rescaled: bool,
    pub radar_fallbacks: usize,
    pub qos_capped: usize,
}

impl RunReport {
    pub fn cwsm_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.i_cwsm).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub ell_max: usize,
    pub iota_max: usize,
    pub init: InitScheme,
    pub seed: u64,
    pub fixed: FixedBlocks,
    pub early_stop: bool,
    /// Keep per-iteration inner traces in the report.
    pub keep_inner: bool,
}

impl RunOptions {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        RunOptions {
            ell_max: cfg.ell_max,
            iota_max: cfg.iota_max,
            init: cfg.init,
            seed: cfg.seed,
            fixed: FixedBlocks::default(),
            early_stop: cfg.early_stop,
            keep_inner: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub design: DesignState,
    pub i_cwsm: f64,
    pub rates: LinkValues,
    pub report: RunReport,
}

fn evaluate(sc: &Scenario, d: &mut DesignState) -> Result<(f64, LinkValues)> {
    let b = refresh_receivers(sc, d)?;
    let r = rates(&sc.cfg, &b)?;
    Ok((cwsm_cfg(&sc.cfg, &r), r))
}

/// Outer loop from a fresh initialisation.
pub fn bcd_ap_mrmc(sc: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let d = initialize(sc, opts.init, opts.seed)?;
    bcd_ap_mrmc_from(sc, d, opts)
}

/// Outer loop from a given design (its filters and weights are recomputed).
pub fn bcd_ap_mrmc_from(sc: &Scenario, mut d: DesignState, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = &sc.cfg;
    let t0 = Instant::now();
    let (i0, r0) = evaluate(sc, &mut d)?;
    let mut report = RunReport {
        records: vec![IterationRecord {
            ell: 0,
            i_cwsm: i0,
            xi_wmmse: f64::NAN,
            slacks: slacks(cfg, &d, &r0),
            seconds: t0.elapsed().as_secs_f64(),
        }],
        inner_traces: Vec::new(),
        termination: Termination::MaxIterations,
        outer_iterations: 0,
        dual_iterations: 0,
        best_ell: 0,
        rescaled: false,
        radar_fallbacks: 0,
        qos_capped: 0,
    };
    let mut best = (d.clone(), i0, r0);
    let mut trace = vec![i0];

    for ell in 1..=opts.ell_max {
        let t = Instant::now();
        let rep = wmmse_mrmc(sc, &mut d, opts.iota_max, opts.fixed)?;
        let xi_end = *rep.xi_trace.last().unwrap_or(&f64::NAN);
        report.dual_iterations += rep.dual_iterations;
        report.radar_fallbacks += rep.radar_fallbacks;
        report.qos_capped += rep.qos_capped;
        if opts.keep_inner {
            report.inner_traces.push(rep.xi_trace);
        }
        if !opts.fixed.code {
            d.a = project_code_matrix(&d.a, cfg)?;
        }
        let (i_c, r) = match evaluate(sc, &mut d) {
            Ok(v) if v.0.is_finite() => v,
            Ok(_) | Err(Error::Numerical(_)) => {
                warn!("non-finite objective at outer iteration {ell}; keeping the last good design");
                report.termination = Termination::NonFinite;
                break;
            }
            Err(e) => return Err(e),
        };
        report.records.push(IterationRecord {
            ell,
            i_cwsm: i_c,
            xi_wmmse: xi_end,
            slacks: slacks(cfg, &d, &r),
            seconds: t.elapsed().as_secs_f64(),
        });
        report.outer_iterations = ell;
        debug!("outer {ell}: I_CWSM = {i_c:.6}");
        if i_c > best.1 {
            best = (d.clone(), i_c, r);
            report.best_ell = ell;
        }
        trace.push(i_c);
        if opts.early_stop && plateau_index(&trace, cfg.stop_tol, cfg.stop_window).is_some() {
            report.termination = Termination::Converged;
            break;
        }
    }

    let (mut design, mut i_cwsm, mut r) = best;
    if rescale_to_feasible(cfg, &mut design) {
        info!("rescaled precoders of the returned design to their power budgets");
        report.rescaled = true;
        let v = evaluate(sc, &mut design)?;
        i_cwsm = v.0;
        r = v.1;
    }
    Ok(RunOutcome { design, i_cwsm, rates: r, report })
}

/// Sum of squared precoder norms, exposed for reports.
pub fn total_precoder_power(d: &DesignState) -> f64 {
    d.p_u.iter().chain(d.p_d.iter()).flatten().map(frob2).sum()
}
