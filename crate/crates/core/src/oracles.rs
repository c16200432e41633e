//! Reference checks that do not reuse the formulas they validate:
//! finite-difference gradients, exhaustive PAR search, scalar closed forms and
//! a Monte Carlo simulation of the radar receive vector.

use std::f64::consts::{LN_2, PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SystemConfig;
use crate::covariance;
use crate::linalg::{c64, cn_scalar, cn_vector, CMat, CVec, C64};
use crate::model::DesignState;
use crate::par::ParFeasibleSet;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub instance: String,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, err: f64, tol: f64, instance: impl Into<String>) -> Self {
        OracleReport {
            name: name.into(),
            max_rel_error: err,
            tolerance: tol,
            pass: err <= tol,
            instance: instance.into(),
        }
    }
}

/// Default step sweep of [`fd_gradient`].
pub const FD_STEPS: [f64; 3] = [1e-5, 1e-6, 1e-7];

/// Central-difference estimate of `df/dX*` (so that `df = 2 Re <g, dX>`).
///
/// Each coordinate is evaluated with every step in `steps`; the estimate that
/// agrees best with the others is kept.
pub fn fd_gradient(f: &dyn Fn(&CMat) -> f64, x: &CMat, steps: &[f64]) -> CMat {
    let mut g = CMat::zeros(x.nrows(), x.ncols());
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            let est: Vec<C64> = steps
                .iter()
                .map(|&h| {
                    let d = |dz: C64| {
                        let mut xp = x.clone();
                        xp[(r, c)] += dz;
                        let mut xm = x.clone();
                        xm[(r, c)] -= dz;
                        (f(&xp) - f(&xm)) / (2.0 * h)
                    };
                    let dre = d(c64(h, 0.0));
                    let dim = d(c64(0.0, h));
                    c64(dre, dim) * 0.5
                })
                .collect();
            g[(r, c)] = most_consistent(&est);
        }
    }
    g
}

fn most_consistent(est: &[C64]) -> C64 {
    if est.len() < 3 {
        return est[est.len() - 1];
    }
    let mut best = (f64::INFINITY, est[0]);
    for (i, e) in est.iter().enumerate() {
        let spread = est
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| (e - o).norm())
            .fold(f64::INFINITY, f64::min);
        if spread < best.0 {
            best = (spread, *e);
        }
    }
    best.1
}

/// Worst coordinate error of `analytic` against finite differences, relative
/// to the largest analytic entry (absolute when the gradient vanishes).
pub fn fd_gradient_check(
    name: &str,
    f: &dyn Fn(&CMat) -> f64,
    x: &CMat,
    analytic: &CMat,
    steps: &[f64],
    tol: f64,
) -> OracleReport {
    let fd = fd_gradient(f, x, steps);
    let scale = analytic.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst = (&fd - analytic).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let err = if scale > 0.0 { worst / scale } else { worst };
    OracleReport::new(name, err, tol, format!("{}x{}", x.nrows(), x.ncols()))
}

/// Exhaustive nearest feasible point for `K = 2` or `3` with the input phases
/// kept; magnitudes are searched on a grid of the given angular resolution
/// over the sphere of radius `sqrt(P)`.
pub fn brute_force_par(a: &CVec, set: &ParFeasibleSet, resolution: f64) -> Option<CVec> {
    let k = a.len();
    let r = set.p_r.sqrt();
    let peak2 = set.p_r * set.gamma / k as f64 * (1.0 + 1e-9);
    let phase = |n: usize| if a[n].norm() > 0.0 { a[n] / a[n].norm() } else { c64(1.0, 0.0) };
    let absa: Vec<f64> = a.iter().map(|z| z.norm()).collect();
    // phases are kept, so |x - a|^2 = sum (m_n - |a_n|)^2
    let mut best: Option<(f64, [f64; 3])> = None;
    let mut consider = |mags: &[f64]| {
        if mags.iter().any(|m| m * m > peak2) {
            return;
        }
        let dist: f64 = mags.iter().zip(&absa).map(|(m, r)| (m - r) * (m - r)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            let mut m = [0.0; 3];
            m[..k].copy_from_slice(mags);
            best = Some((dist, m));
        }
    };
    let steps = ((PI / 2.0) / resolution).ceil() as usize;
    match k {
        1 => consider(&[r]),
        2 => {
            for s in 0..=steps {
                let t = (PI / 2.0) * s as f64 / steps as f64;
                consider(&[r * t.cos(), r * t.sin()]);
            }
        }
        3 => {
            for s in 0..=steps {
                let t = (PI / 2.0) * s as f64 / steps as f64;
                for q in 0..=steps {
                    let p = (PI / 2.0) * q as f64 / steps as f64;
                    consider(&[r * t.cos(), r * t.sin() * p.cos(), r * t.sin() * p.sin()]);
                }
            }
        }
        _ => return None,
    }
    best.map(|(_, m)| CVec::from_fn(k, |n, _| phase(n) * m[n]))
}

/// Scalar identities of the link metrics, evaluated by hand and through the
/// library on `1 x 1` matrices.
pub fn scalar_link_suite() -> Vec<OracleReport> {
    use crate::linalg::herm_inv;
    use crate::metrics::{mi_generic, rate_sinr};
    let m = |v: f64| CMat::from_element(1, 1, c64(v, 0.0));
    let mut out = Vec::new();

    let r = rate_sinr(&m(10.0), &m(1.0)).unwrap_or(f64::NAN);
    out.push(OracleReport::new("rate at SNR 10", (r - 11f64.log2()).abs(), 1e-12, "1x1"));

    // u* = p h / (p^2 h^2 + s2), e* = s2 / (p^2 h^2 + s2)
    let (h, p, s2) = (1.0, 10f64.sqrt(), 1.0);
    let u = p * h / (p * p * h * h + s2);
    let e = 1.0 - 2.0 * u * h * p + u * u * (p * p * h * h + s2);
    out.push(OracleReport::new("scalar MMSE", (e - s2 / (p * p * h * h + s2)).abs(), 1e-12, "1x1"));
    let mi = mi_generic(&m(u), &m(p * p * h * h), &m(s2)).unwrap_or(f64::NAN);
    out.push(OracleReport::new("MI with MMSE filter", (mi - 11f64.log2()).abs(), 1e-12, "1x1"));

    // radar: sigma_t = 1, s = 1, r_in = 1 -> u* = 1/2, E* = 1/2
    let (sig, s, rin) = (1.0f64, 1.0f64, 1.0f64);
    let u_r = herm_inv(&m(s * sig * s + rin)).map(|x| s * sig * x[(0, 0)].re).unwrap_or(f64::NAN);
    let e_r = sig - u_r * s * sig;
    out.push(OracleReport::new("scalar radar MMSE", (e_r - 0.5).abs(), 1e-15, "1x1"));

    // Xi' = w e - (log2 w + 1) with w = 1/e must equal -log2(1 + SNR)
    let w = herm_inv(&m(e)).map(|x| x[(0, 0)].re).unwrap_or(f64::NAN);
    let xi_prime = w * e - (w.ln() / LN_2 + 1.0);
    out.push(OracleReport::new("scalar identity", (xi_prime + 11f64.log2()).abs(), 1e-12, "1x1"));
    out
}

/// Simulate `n` radar receive vectors of receiver `nr` for a frozen design and
/// return the relative Frobenius error of their sample covariance against the
/// analytic `R_t + R_in`.
///
/// Target gains follow a first-order autoregression whose correlation
/// `rho e^{j 2 pi f}` per PRI reproduces the model statistics.
pub fn monte_carlo_radar_covariance(sc: &Scenario, d: &DesignState, nr: usize, n: usize, seed: u64) -> f64 {
    let cfg = &sc.cfg;
    let st = &sc.stats;
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sbt: Vec<CVec> = (0..k).map(|t| covariance::s_bt(cfg, d, &sc.sym, t)).collect();
    let sbm: Vec<CVec> = (0..k).map(|t| covariance::s_bm(cfg, d, &sc.sym, t)).collect();
    let su: Vec<Vec<CVec>> = (0..cfg.num_ul())
        .map(|i| (0..k).map(|t| covariance::s_u(cfg, d, &sc.sym, i, t)).collect())
        .collect();
    let rho = st.rho;
    let innov = (1.0 - rho * rho).max(0.0);
    let mut acc = CMat::zeros(k, k);
    for _ in 0..n {
        let c = cn_vector(&mut rng, cfg.m_r, st.clutter_var);
        let bm = cn_vector(&mut rng, cfg.m_c, st.bm_var);
        let iu: Vec<CVec> = (0..cfg.num_ul())
            .map(|i| cn_vector(&mut rng, cfg.ul_antennas[i], st.iu_var))
            .collect();
        let mut hr: Vec<C64> = (0..cfg.m_r).map(|_| cn_scalar(&mut rng, st.rt_var)).collect();
        let mut hb: Vec<C64> = (0..cfg.m_c).map(|_| cn_scalar(&mut rng, st.bt_var)).collect();
        let mut y = CVec::zeros(k);
        for t in 0..k {
            if t > 0 {
                for (mr, h) in hr.iter_mut().enumerate() {
                    let rot = C64::from_polar(rho, TAU * st.rt_doppler[nr][mr]);
                    *h = rot * *h + cn_scalar(&mut rng, st.rt_var * innov);
                }
                let rot = C64::from_polar(rho, TAU * st.bt_doppler[nr]);
                for h in hb.iter_mut() {
                    *h = rot * *h + cn_scalar(&mut rng, st.bt_var * innov);
                }
            }
            let mut v = cn_scalar(&mut rng, cfg.sigma2_r);
            for mr in 0..cfg.m_r {
                v += d.a[(t, mr)] * (hr[mr] + c[mr]);
            }
            for mc in 0..cfg.m_c {
                v += sbt[t][mc] * hb[mc] + sbm[t][mc] * bm[mc];
            }
            for (i, s) in su.iter().enumerate() {
                v += s[t].dot(&iu[i]);
            }
            y[t] = v;
        }
        acc += &y * y.adjoint();
    }
    let sample = acc / c64(n as f64, 0.0);
    let b = covariance::CovarianceBundle::build(cfg, &sc.ch, st, d, &sc.sym);
    match b {
        Ok(b) => {
            let r = b.r_r(nr);
            (sample - &r).norm() / r.norm()
        }
        Err(_) => f64::NAN,
    }
}

/// Every oracle that needs no long optimisation run, on the reduced
/// configuration. Used by `mrmc verify`.
pub fn run_suite(seed: u64) -> Vec<OracleReport> {
    use crate::inner::{gradients_wsmse, GradientCache};
    use crate::metrics::{refresh_receivers, wmmse_identity_residual};
    use crate::par::par_project;
    use crate::testutil::random_design;

    let mut out = scalar_link_suite();
    let cfg = SystemConfig::reduced();
    let sc = match Scenario::generate(&cfg, seed) {
        Ok(s) => s,
        Err(e) => {
            out.push(OracleReport::new(format!("scenario generation: {e}"), f64::INFINITY, 0.0, "reduced"));
            return out;
        }
    };
    let inst = format!("reduced, seed {seed}");

    let mut d = random_design(&cfg, seed);
    let t1 = wmmse_identity_residual(&sc, &d).unwrap_or(f64::INFINITY);
    out.push(OracleReport::new("weighted MMSE identity", t1, 1e-8, inst.clone()));

    if refresh_receivers(&sc, &mut d).is_ok() {
        if let Ok(cache) = GradientCache::new(&cfg, &sc.ch, &sc.stats, &d) {
            let g = gradients_wsmse(&cfg, &sc.ch, &sc.sym, &cache, &d);
            let base = d.clone();
            let f = |x: &CMat| {
                let mut e = base.clone();
                e.p_u[0][1] = x.clone();
                objective(&sc, &e)
            };
            out.push(fd_gradient_check("UL precoder gradient", &f, &d.p_u[0][1], &g.p_u[0][1], &FD_STEPS, 1e-5));
            let f = |x: &CMat| {
                let mut e = base.clone();
                e.p_d[0][2] = x.clone();
                objective(&sc, &e)
            };
            out.push(fd_gradient_check("DL precoder gradient", &f, &d.p_d[0][2], &g.p_d[0][2], &FD_STEPS, 1e-5));
            let row = CMat::from_column_slice(cfg.m_r, 1, d.a_row(3).as_slice());
            let grow = CMat::from_fn(cfg.m_r, 1, |r, _| g.a[(3, r)]);
            let f = |x: &CMat| {
                let mut e = base.clone();
                for m in 0..cfg.m_r {
                    e.a[(3, m)] = x[(m, 0)];
                }
                objective(&sc, &e)
            };
            out.push(fd_gradient_check("radar code gradient", &f, &row, &grow, &FD_STEPS, 1e-5));
        }
    }

    let set = ParFeasibleSet { p_r: 2.0, gamma: 1.5, k: 2 };
    let a = CVec::from_vec(vec![c64(2.0, 0.0), c64(0.1, 0.0)]);
    let err = match (par_project(&a, &set), brute_force_par(&a, &set, 1e-5)) {
        (Ok(p), Some(b)) => ((&p - &a).norm() - (&b - &a).norm()).abs(),
        _ => f64::INFINITY,
    };
    out.push(OracleReport::new("PAR projection vs grid search", err, 1e-3, "K=2"));

    let mc = monte_carlo_radar_covariance(&sc, &random_design(&cfg, seed + 1), 0, 100_000, seed);
    out.push(OracleReport::new("radar covariance Monte Carlo", mc, 0.03, inst));

    out
}

/// Weighted-sum MSE from the explicit MSE matrices, with the filters and
/// weights of `d` held fixed.
pub fn objective(sc: &Scenario, d: &DesignState) -> f64 {
    match covariance::CovarianceBundle::build(&sc.cfg, &sc.ch, &sc.stats, d, &sc.sym)
        .and_then(|b| crate::metrics::weighted_sum_mse_direct(sc, d, &b))
    {
        Ok(p) => p.total(),
        Err(_) => f64::NAN,
    }
}
