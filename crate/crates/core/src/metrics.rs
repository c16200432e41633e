//! Mutual information, rates, MSE matrices, MMSE filters and weights, and the
//! weighted-sum MSE objective. All information quantities are in bits.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::covariance::CovarianceBundle;
use crate::error::{Error, Result};
use crate::inner::GradientCache;
use crate::linalg::{eye, herm, herm_inv, log2det_herm, row_space_basis, CMat};
use crate::model::{DesignState, ReceiverSet};
use crate::scenario::Scenario;

/// Relative singular-value threshold used to find the row space of a filter.
const FILTER_RANK_TOL: f64 = 1e-12;

/// `log2 |U (R_s + R_in) U^H| - log2 |U R_in U^H|`, restricted to the row space
/// of `U` so that rank-deficient filters are handled.
pub fn mi_generic(u: &CMat, r_sig: &CMat, r_in: &CMat) -> Result<f64> {
    let g = row_space_basis(u, FILTER_RANK_TOL);
    if g.nrows() == 0 {
        return Ok(0.0);
    }
    // U = C G for an invertible C, which cancels in the ratio.
    let gu = &g * (r_sig + r_in) * g.adjoint();
    let gi = &g * r_in * g.adjoint();
    Ok((log2det_herm(&gu)? - log2det_herm(&gi)?).max(0.0))
}

/// Radar MI of filter `u_r` (`KM x K`, estimate `h = U y`).
///
/// The filter acts on the `K`-dimensional receive vector, so the filtered
/// covariances are `U R U^H`.
pub fn mi_radar(u_r: &CMat, r_t: &CMat, r_in: &CMat) -> Result<f64> {
    mi_generic(u_r, r_t, r_in)
}

pub fn mi_ul(u: &CMat, r_sig: &CMat, r_in: &CMat) -> Result<f64> {
    mi_generic(u, r_sig, r_in)
}

pub fn mi_dl(u: &CMat, r_sig: &CMat, r_in: &CMat) -> Result<f64> {
    mi_generic(u, r_sig, r_in)
}

/// `log2 |I + R_s R_in^{-1}|`.
pub fn rate_sinr(r_sig: &CMat, r_in: &CMat) -> Result<f64> {
    Ok(log2det_herm(&(r_sig + r_in))? - log2det_herm(r_in)?)
}

/// Per-receiver MI (or rate) values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkValues {
    pub radar: Vec<f64>,
    /// `[i][k]`
    pub ul: Vec<Vec<f64>>,
    /// `[j][k]`
    pub dl: Vec<Vec<f64>>,
}

impl LinkValues {
    /// `I_FD`: the communications part of the CWSM,
    /// `sum_k (sum_i alpha_u I_u + sum_j alpha_d I_d)`.
    pub fn i_fd(&self, cfg: &SystemConfig) -> f64 {
        cwsm(self, &[], &cfg.alpha_u, &cfg.alpha_d)
    }
}

/// `sum alpha_r I_r + sum_k (sum_i alpha_u I_u + sum_j alpha_d I_d)`.
pub fn cwsm(v: &LinkValues, alpha_r: &[f64], alpha_u: &[f64], alpha_d: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, x) in alpha_r.iter().zip(&v.radar) {
        s += a * x;
    }
    for (a, row) in alpha_u.iter().zip(&v.ul) {
        s += a * row.iter().sum::<f64>();
    }
    for (a, row) in alpha_d.iter().zip(&v.dl) {
        s += a * row.iter().sum::<f64>();
    }
    s
}

pub fn cwsm_cfg(cfg: &SystemConfig, v: &LinkValues) -> f64 {
    cwsm(v, &cfg.alpha_r, &cfg.alpha_u, &cfg.alpha_d)
}

/// MIs achieved with the filters stored in `d`.
pub fn mutual_informations(cfg: &SystemConfig, b: &CovarianceBundle, filters: &ReceiverSet) -> Result<LinkValues> {
    if filters.ul.len() != cfg.num_ul() || filters.dl.len() != cfg.num_dl() || filters.radar.len() != cfg.n_r {
        return Err(Error::Argument("filters have not been computed".into()));
    }
    let radar = (0..cfg.n_r)
        .map(|nr| mi_radar(&filters.radar[nr], &b.r_t[nr], &b.r_in_r[nr]))
        .collect::<Result<_>>()?;
    let ul = (0..cfg.num_ul())
        .map(|i| {
            (0..cfg.k)
                .map(|k| mi_ul(&filters.ul[i][k], &b.r_sig_u[i][k], &b.r_in_u[i][k]))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let dl = (0..cfg.num_dl())
        .map(|j| {
            (0..cfg.k)
                .map(|k| mi_dl(&filters.dl[j][k], &b.r_sig_d[j][k], &b.r_in_d[j][k]))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Ok(LinkValues { radar, ul, dl })
}

/// Achievable rates in the SINR form `log2 |I + R_s R_in^{-1}|`.
pub fn rates(cfg: &SystemConfig, b: &CovarianceBundle) -> Result<LinkValues> {
    let radar = (0..cfg.n_r)
        .map(|nr| rate_sinr(&b.r_t[nr], &b.r_in_r[nr]))
        .collect::<Result<_>>()?;
    let ul = (0..cfg.num_ul())
        .map(|i| (0..cfg.k).map(|k| rate_sinr(&b.r_sig_u[i][k], &b.r_in_u[i][k])).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let dl = (0..cfg.num_dl())
        .map(|j| (0..cfg.k).map(|k| rate_sinr(&b.r_sig_d[j][k], &b.r_in_d[j][k])).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    Ok(LinkValues { radar, ul, dl })
}

/// Rates from the MMSE matrices: `-log2|E*|` for the links and
/// `log2|Sigma_t| - log2|E*_r|` for the radar.
pub fn rates_woodbury(cfg: &SystemConfig, b: &CovarianceBundle, e_star: &ReceiverSet) -> Result<LinkValues> {
    let radar = (0..cfg.n_r)
        .map(|nr| Ok(log2det_herm(&b.sigma_t[nr])? - log2det_herm(&e_star.radar[nr])?))
        .collect::<Result<_>>()?;
    let neg = |e: &CMat| log2det_herm(e).map(|v| -v);
    let ul = e_star
        .ul
        .iter()
        .map(|row| row.iter().map(neg).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let dl = e_star
        .dl
        .iter()
        .map(|row| row.iter().map(neg).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    Ok(LinkValues { radar, ul, dl })
}

/// MMSE receive filters for the design that produced `b`.
pub fn mmse_filters(sc: &Scenario, d: &DesignState, b: &CovarianceBundle) -> Result<ReceiverSet> {
    let cfg = &sc.cfg;
    let mut radar = Vec::with_capacity(cfg.n_r);
    for nr in 0..cfg.n_r {
        let r_inv = herm_inv(&b.r_r(nr))?;
        radar.push(&b.sigma_t[nr] * b.s_t.adjoint() * r_inv);
    }
    let mut ul = Vec::with_capacity(cfg.num_ul());
    for i in 0..cfg.num_ul() {
        let mut row = Vec::with_capacity(cfg.k);
        for k in 0..cfg.k {
            let r_inv = herm_inv(&b.r_u[k])?;
            row.push(d.p_u[i][k].adjoint() * sc.ch.h_ib[i].adjoint() * r_inv);
        }
        ul.push(row);
    }
    let mut dl = Vec::with_capacity(cfg.num_dl());
    for j in 0..cfg.num_dl() {
        let mut row = Vec::with_capacity(cfg.k);
        for k in 0..cfg.k {
            let r_inv = herm_inv(&b.r_d[j][k])?;
            row.push(d.p_d[j][k].adjoint() * sc.ch.h_bj[j].adjoint() * r_inv);
        }
        dl.push(row);
    }
    Ok(ReceiverSet { ul, dl, radar })
}

/// `E = U R U^H - U H P - P^H H^H U^H + I` for a link.
fn link_mse(u: &CMat, r: &CMat, hp: &CMat) -> CMat {
    let uhp = u * hp;
    let n = uhp.nrows();
    herm(&(u * r * u.adjoint() - &uhp - uhp.adjoint() + eye(n)))
}

/// MSE matrices of arbitrary filters.
pub fn mse_matrices(sc: &Scenario, d: &DesignState, b: &CovarianceBundle, f: &ReceiverSet) -> Result<ReceiverSet> {
    let cfg = &sc.cfg;
    if f.ul.len() != cfg.num_ul() || f.dl.len() != cfg.num_dl() || f.radar.len() != cfg.n_r {
        return Err(Error::Argument("filter set does not match the system".into()));
    }
    let radar = (0..cfg.n_r)
        .map(|nr| {
            let u = &f.radar[nr];
            let s = &b.sigma_t[nr];
            let usig = u * &b.s_t * s;
            herm(&(u * b.r_r(nr) * u.adjoint() - &usig - usig.adjoint() + s))
        })
        .collect();
    let ul = (0..cfg.num_ul())
        .map(|i| {
            (0..cfg.k)
                .map(|k| link_mse(&f.ul[i][k], &b.r_u[k], &(&sc.ch.h_ib[i] * &d.p_u[i][k])))
                .collect()
        })
        .collect();
    let dl = (0..cfg.num_dl())
        .map(|j| {
            (0..cfg.k)
                .map(|k| link_mse(&f.dl[j][k], &b.r_d[j][k], &(&sc.ch.h_bj[j] * &d.p_d[j][k])))
                .collect()
        })
        .collect();
    Ok(ReceiverSet { ul, dl, radar })
}

/// Closed-form MMSE matrices `E*`.
pub fn mmse_matrices(sc: &Scenario, d: &DesignState, b: &CovarianceBundle) -> Result<ReceiverSet> {
    let cfg = &sc.cfg;
    let mut radar = Vec::with_capacity(cfg.n_r);
    for nr in 0..cfg.n_r {
        let s = &b.sigma_t[nr];
        let ss = &b.s_t * s;
        let r_inv = herm_inv(&b.r_r(nr))?;
        radar.push(herm(&(s - ss.adjoint() * r_inv * &ss)));
    }
    let link = |hp: CMat, r: &CMat| -> Result<CMat> {
        let r_inv = herm_inv(r)?;
        Ok(herm(&(eye(hp.ncols()) - hp.adjoint() * r_inv * &hp)))
    };
    let ul = (0..cfg.num_ul())
        .map(|i| {
            (0..cfg.k)
                .map(|k| link(&sc.ch.h_ib[i] * &d.p_u[i][k], &b.r_u[k]))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let dl = (0..cfg.num_dl())
        .map(|j| {
            (0..cfg.k)
                .map(|k| link(&sc.ch.h_bj[j] * &d.p_d[j][k], &b.r_d[j][k]))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    Ok(ReceiverSet { ul, dl, radar })
}

/// `W* = (E*)^{-1}`.
pub fn optimal_weights(e_star: &ReceiverSet) -> Result<ReceiverSet> {
    let inv = |m: &CMat| herm_inv(m);
    Ok(ReceiverSet {
        ul: e_star.ul.iter().map(|r| r.iter().map(inv).collect::<Result<_>>()).collect::<Result<_>>()?,
        dl: e_star.dl.iter().map(|r| r.iter().map(inv).collect::<Result<_>>()).collect::<Result<_>>()?,
        radar: e_star.radar.iter().map(inv).collect::<Result<_>>()?,
    })
}

/// Replace the filters and weights of `d` by `U*` and `W*`.
pub fn refresh_receivers(sc: &Scenario, d: &mut DesignState) -> Result<CovarianceBundle> {
    let b = CovarianceBundle::build(&sc.cfg, &sc.ch, &sc.stats, d, &sc.sym)?;
    d.filters = mmse_filters(sc, d, &b)?;
    d.weights = optimal_weights(&mmse_matrices(sc, d, &b)?)?;
    Ok(b)
}

/// Weighted-sum MSE split by subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WsmseParts {
    pub ul: f64,
    pub dl: f64,
    pub radar: f64,
}

impl WsmseParts {
    pub fn total(&self) -> f64 {
        self.ul + self.dl + self.radar
    }
}

fn re_tr_wm(w: &CMat, e: &CMat) -> f64 {
    (w * e).trace().re
}

/// `sum alpha tr(W E)` evaluated from the explicit MSE matrices.
pub fn weighted_sum_mse_direct(sc: &Scenario, d: &DesignState, b: &CovarianceBundle) -> Result<WsmseParts> {
    let cfg = &sc.cfg;
    let e = mse_matrices(sc, d, b, &d.filters)?;
    let w = &d.weights;
    let mut out = WsmseParts { ul: 0.0, dl: 0.0, radar: 0.0 };
    for i in 0..cfg.num_ul() {
        for k in 0..cfg.k {
            out.ul += cfg.alpha_u[i] * re_tr_wm(&w.ul[i][k], &e.ul[i][k]);
        }
    }
    for j in 0..cfg.num_dl() {
        for k in 0..cfg.k {
            out.dl += cfg.alpha_d[j] * re_tr_wm(&w.dl[j][k], &e.dl[j][k]);
        }
    }
    for nr in 0..cfg.n_r {
        out.radar += cfg.alpha_r[nr] * re_tr_wm(&w.radar[nr], &e.radar[nr]);
    }
    Ok(out)
}

/// Weighted-sum MSE through the expanded per-subsystem forms, checked
/// against the direct definition.
pub fn weighted_sum_mse(sc: &Scenario, d: &DesignState) -> Result<WsmseParts> {
    let cache = GradientCache::new(&sc.cfg, &sc.ch, &sc.stats, d)?;
    let x = cache.xi(&sc.cfg, &sc.ch, &sc.sym, d);
    let parts = WsmseParts { ul: x.ul, dl: x.dl, radar: x.radar };
    if parts.total() < -1e-10 * (1.0 + parts.total().abs()) {
        return Err(Error::Numerical(format!("negative weighted-sum MSE {:.3e}", parts.total())));
    }
    Ok(parts)
}

/// `Xi' = Xi - sum alpha (log2|W| + D)`, with the radar offset
/// `alpha_r (log2|Sigma_t W_r| + KM)`.
pub fn xi_prime(sc: &Scenario, d: &DesignState, b: &CovarianceBundle, xi: f64) -> Result<f64> {
    let cfg = &sc.cfg;
    let w = &d.weights;
    let mut off = 0.0;
    for i in 0..cfg.num_ul() {
        for k in 0..cfg.k {
            off += cfg.alpha_u[i] * (log2det_herm(&w.ul[i][k])? + cfg.ul_streams[i] as f64);
        }
    }
    for j in 0..cfg.num_dl() {
        for k in 0..cfg.k {
            off += cfg.alpha_d[j] * (log2det_herm(&w.dl[j][k])? + cfg.dl_streams[j] as f64);
        }
    }
    let km = (cfg.k * cfg.m()) as f64;
    for nr in 0..cfg.n_r {
        let ld = log2det_herm(&b.sigma_t[nr])? + log2det_herm(&w.radar[nr])?;
        off += cfg.alpha_r[nr] * (ld + km);
    }
    Ok(xi - off)
}

/// `|Xi' + I_CWSM| / (1 + |I_CWSM|)` after refreshing `U*` and `W*`.
pub fn wmmse_identity_residual(sc: &Scenario, d: &DesignState) -> Result<f64> {
    let mut d = d.clone();
    let b = refresh_receivers(sc, &mut d)?;
    let xi = weighted_sum_mse(sc, &d)?.total();
    let xp = xi_prime(sc, &d, &b, xi)?;
    let i_cwsm = cwsm_cfg(&sc.cfg, &mutual_informations(&sc.cfg, &b, &d.filters)?);
    Ok((xp + i_cwsm).abs() / (1.0 + i_cwsm.abs()))
}

/// Every objective-level quantity of one design.
#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveSnapshot {
    pub mi: LinkValues,
    pub rates: LinkValues,
    pub i_cwsm: f64,
    pub i_fd: f64,
    /// Weighted-sum MSE with the filters and weights held by the design.
    pub xi_wmse: f64,
    /// Weighted-sum MSE at `U*`, `W*`.
    pub xi_wmmse: f64,
}

/// Snapshot using the filters of `d` (computing MMSE ones when absent).
pub fn snapshot(sc: &Scenario, d: &DesignState) -> Result<ObjectiveSnapshot> {
    let b = CovarianceBundle::build(&sc.cfg, &sc.ch, &sc.stats, d, &sc.sym)?;
    let mut opt = d.clone();
    opt.filters = mmse_filters(sc, d, &b)?;
    opt.weights = optimal_weights(&mmse_matrices(sc, d, &b)?)?;
    let cur = if d.filters.is_empty() || d.weights.is_empty() { &opt } else { d };
    let mi = mutual_informations(&sc.cfg, &b, &cur.filters)?;
    let rates = rates(&sc.cfg, &b)?;
    Ok(ObjectiveSnapshot {
        i_cwsm: cwsm_cfg(&sc.cfg, &mi),
        i_fd: mi.i_fd(&sc.cfg),
        xi_wmse: weighted_sum_mse_direct(sc, cur, &b)?.total(),
        xi_wmmse: weighted_sum_mse_direct(sc, &opt, &b)?.total(),
        mi,
        rates,
    })
}

/// CWSM with optimal filters, i.e. the weighted sum of achievable rates.
pub fn cwsm_optimal(sc: &Scenario, d: &DesignState) -> Result<(f64, LinkValues)> {
    let b = CovarianceBundle::build(&sc.cfg, &sc.ch, &sc.stats, d, &sc.sym)?;
    let r = rates(&sc.cfg, &b)?;
    Ok((cwsm_cfg(&sc.cfg, &r), r))
}
