//! Stacked radar target model and all receive covariance matrices.
//!
//! The per-PRI target slot is `h_t[k] = [h_rt[k]; h_Bt[k]]` of length
//! `M = M_r + M_c`. Target gains decorrelate across PRIs as
//! `E[h[m] h[l]^H] = var * (rho * e^{j 2 pi f})^(m-l)` (Hermitian extension for
//! `m < l`), clutter and direct paths are constant over the CPI.

use std::f64::consts::PI;

use crate::config::SystemConfig;
use crate::error::{shape_check, Result};
use crate::linalg::{c64, eye, CMat, CVec, C64, ZERO};
use crate::model::{ChannelSet, DesignState, SymbolSet};

/// Second-order statistics of the radar receive model.
///
/// All cross-PRI covariance blocks of this model are diagonal, so each block
/// is stored as its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarStatistics {
    pub k: usize,
    pub m_r: usize,
    pub m_c: usize,
    pub n_r: usize,
    pub rho: f64,
    pub rt_var: f64,
    /// `[n_r][m_r]`
    pub rt_doppler: Vec<Vec<f64>>,
    pub bt_var: f64,
    /// `[n_r]`
    pub bt_doppler: Vec<f64>,
    pub clutter_var: f64,
    pub bm_var: f64,
    pub iu_var: f64,
}

impl RadarStatistics {
    pub fn new(cfg: &SystemConfig, ch: &ChannelSet) -> Self {
        RadarStatistics {
            k: cfg.k,
            m_r: cfg.m_r,
            m_c: cfg.m_c,
            n_r: cfg.n_r,
            rho: cfg.target_corr,
            rt_var: cfg.sigma2_rt,
            rt_doppler: (0..cfg.n_r)
                .map(|nr| (0..cfg.m_r).map(|mr| ch.f_rt[mr][nr]).collect())
                .collect(),
            bt_var: cfg.sigma2_bt,
            bt_doppler: ch.f_bt.clone(),
            clutter_var: cfg.sigma2_c,
            bm_var: cfg.sigma2_bm,
            iu_var: cfg.sigma2_iu,
        }
    }

    fn rotation(&self, f: f64, m: usize, l: usize) -> C64 {
        let d = m as f64 - l as f64;
        let decay = self.rho.powi((m as i64 - l as i64).unsigned_abs() as i32);
        C64::from_polar(decay, 2.0 * PI * f * d)
    }

    /// Diagonal entry `mr` of `Sigma_rt^{(m,l)}` for receiver `nr`.
    pub fn rt_coef(&self, nr: usize, mr: usize, m: usize, l: usize) -> C64 {
        self.rotation(self.rt_doppler[nr][mr], m, l) * self.rt_var
    }

    /// Scalar multiplying the identity in `Sigma_Bt^{(m,l)}`.
    pub fn bt_coef(&self, nr: usize, m: usize, l: usize) -> C64 {
        self.rotation(self.bt_doppler[nr], m, l) * self.bt_var
    }

    pub fn sigma_rt(&self, nr: usize, m: usize, l: usize) -> CMat {
        CMat::from_diagonal(&CVec::from_fn(self.m_r, |mr, _| self.rt_coef(nr, mr, m, l)))
    }

    pub fn sigma_bt(&self, nr: usize, m: usize, l: usize) -> CMat {
        eye(self.m_c) * self.bt_coef(nr, m, l)
    }

    pub fn sigma_c(&self) -> CMat {
        eye(self.m_r) * c64(self.clutter_var, 0.0)
    }

    pub fn sigma_bm(&self) -> CMat {
        eye(self.m_c) * c64(self.bm_var, 0.0)
    }

    pub fn sigma_iu(&self, n_u: usize) -> CMat {
        eye(n_u) * c64(self.iu_var, 0.0)
    }

    /// Full stacked target covariance `Sigma_t` (`KM x KM`) of receiver `nr`.
    pub fn sigma_t(&self, nr: usize) -> CMat {
        let m = self.m_r + self.m_c;
        let mut s = CMat::zeros(self.k * m, self.k * m);
        for bm in 0..self.k {
            for bl in 0..self.k {
                for mr in 0..self.m_r {
                    s[(bm * m + mr, bl * m + mr)] = self.rt_coef(nr, mr, bm, bl);
                }
                let b = self.bt_coef(nr, bm, bl);
                for mc in 0..self.m_c {
                    s[(bm * m + self.m_r + mc, bl * m + self.m_r + mc)] = b;
                }
            }
        }
        s
    }
}

/// Selection matrix `J_h[m]` (`KM x M`) picking PRI block `m`.
pub fn j_h(cfg: &SystemConfig, m: usize) -> CMat {
    let mm = cfg.m();
    let mut j = CMat::zeros(cfg.k * mm, mm);
    for c in 0..mm {
        j[(m * mm + c, c)] = c64(1.0, 0.0);
    }
    j
}

/// `J_r` (`M x M_r`): radar-path part of a target slot.
pub fn j_r(cfg: &SystemConfig) -> CMat {
    CMat::from_fn(cfg.m(), cfg.m_r, |r, c| if r == c { c64(1.0, 0.0) } else { ZERO })
}

/// `J_B` (`M x M_c`): BS-path part of a target slot.
pub fn j_b(cfg: &SystemConfig) -> CMat {
    CMat::from_fn(cfg.m(), cfg.m_c, |r, c| if r == c + cfg.m_r { c64(1.0, 0.0) } else { ZERO })
}

/// DL signal reaching the target in PRI `k`: `sum_j P_d[j][k] d_d[j][k][0]`.
pub fn s_bt(cfg: &SystemConfig, d: &DesignState, sym: &SymbolSet, k: usize) -> CVec {
    let mut s = CVec::zeros(cfg.m_c);
    for j in 0..cfg.num_dl() {
        s += &d.p_d[j][k] * &sym.d_d[j][k][0];
    }
    s
}

/// DL signal on the BS-to-radar direct path in PRI `k`.
pub fn s_bm(cfg: &SystemConfig, d: &DesignState, sym: &SymbolSet, k: usize) -> CVec {
    let l = cfg.slot_dl_direct();
    let mut s = CVec::zeros(cfg.m_c);
    for j in 0..cfg.num_dl() {
        s += &d.p_d[j][k] * &sym.d_d[j][k][l];
    }
    s
}

/// UL user `i` signal on its direct path to the radar in PRI `k`.
pub fn s_u(cfg: &SystemConfig, d: &DesignState, sym: &SymbolSet, i: usize, k: usize) -> CVec {
    &d.p_u[i][k] * &sym.d_u[i][k][cfg.slot_ul_direct()]
}

/// `S_t` (`K x KM`): row `k` carries `[a^T[k], s_Bt^T[k]]` in PRI block `k`.
pub fn build_s_t(cfg: &SystemConfig, d: &DesignState, sym: &SymbolSet) -> Result<CMat> {
    check_design(cfg, d)?;
    let mm = cfg.m();
    let mut s = CMat::zeros(cfg.k, cfg.k * mm);
    for k in 0..cfg.k {
        for mr in 0..cfg.m_r {
            s[(k, k * mm + mr)] = d.a[(k, mr)];
        }
        let sb = s_bt(cfg, d, sym, k);
        for mc in 0..cfg.m_c {
            s[(k, k * mm + cfg.m_r + mc)] = sb[mc];
        }
    }
    Ok(s)
}

/// Stacked target model of every radar receiver.
#[derive(Debug, Clone)]
pub struct TargetModel {
    pub s_t: CMat,
    pub sigma_t: Vec<CMat>,
}

pub fn build_target_model(
    cfg: &SystemConfig,
    stats: &RadarStatistics,
    d: &DesignState,
    sym: &SymbolSet,
) -> Result<TargetModel> {
    let s_t = build_s_t(cfg, d, sym)?;
    let sigma_t = (0..cfg.n_r).map(|nr| stats.sigma_t(nr)).collect();
    Ok(TargetModel { s_t, sigma_t })
}

/// Target covariance assembled block-wise, `R_t(m,l) = s_m Sigma^{(m,l)} s_l^H`.
pub fn target_covariance_direct(
    cfg: &SystemConfig,
    stats: &RadarStatistics,
    d: &DesignState,
    sym: &SymbolSet,
    nr: usize,
) -> CMat {
    let sb: Vec<CVec> = (0..cfg.k).map(|k| s_bt(cfg, d, sym, k)).collect();
    CMat::from_fn(cfg.k, cfg.k, |m, l| {
        let mut v = ZERO;
        for mr in 0..cfg.m_r {
            v += d.a[(m, mr)] * stats.rt_coef(nr, mr, m, l) * d.a[(l, mr)].conj();
        }
        let b = stats.bt_coef(nr, m, l);
        for mc in 0..cfg.m_c {
            v += sb[m][mc] * b * sb[l][mc].conj();
        }
        v
    })
}

/// Components of the radar interference-plus-noise covariance.
#[derive(Debug, Clone)]
pub struct RadarInterference {
    pub clutter: CMat,
    pub bs_direct: CMat,
    pub ul_direct: CMat,
    pub noise: CMat,
}

impl RadarInterference {
    pub fn total(&self) -> CMat {
        &self.clutter + &self.bs_direct + &self.ul_direct + &self.noise
    }
}

/// Radar interference for receiver `nr` (the model makes it identical for
/// every receiver, the index is kept for clarity of the call sites).
pub fn build_radar_interference(
    cfg: &SystemConfig,
    stats: &RadarStatistics,
    d: &DesignState,
    sym: &SymbolSet,
    _nr: usize,
) -> Result<RadarInterference> {
    check_design(cfg, d)?;
    let k = cfg.k;
    let clutter = &d.a * d.a.adjoint() * c64(stats.clutter_var, 0.0);
    let sbm = CMat::from_fn(k, cfg.m_c, |r, c| s_bm(cfg, d, sym, r)[c]);
    let bs_direct = &sbm * sbm.adjoint() * c64(stats.bm_var, 0.0);
    let mut ul_direct = CMat::zeros(k, k);
    for i in 0..cfg.num_ul() {
        let su = CMat::from_fn(k, cfg.ul_antennas[i], |r, c| s_u(cfg, d, sym, i, r)[c]);
        ul_direct += &su * su.adjoint() * c64(stats.iu_var, 0.0);
    }
    Ok(RadarInterference {
        clutter,
        bs_direct,
        ul_direct,
        noise: eye(k) * c64(cfg.sigma2_r, 0.0),
    })
}

fn outer(h: &CMat, p: &CMat) -> CMat {
    let hp = h * p;
    &hp * hp.adjoint()
}

/// BS receive covariance in frame `k`: returns `(R_u, R_in_u[i])`.
///
/// The total covariance is the same for every UL user.
pub fn build_ul_covariance(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    d: &DesignState,
    k: usize,
) -> (CMat, Vec<CMat>) {
    let sig: Vec<CMat> = (0..cfg.num_ul()).map(|i| outer(&ch.h_ib[i], &d.p_u[i][k])).collect();
    let mut base = eye(cfg.n_c) * c64(cfg.sigma2_b, 0.0);
    for j in 0..cfg.num_dl() {
        base += outer(&ch.h_bb, &d.p_d[j][k]);
    }
    let hra = &ch.h_rb * d.a_row(k);
    base += &hra * hra.adjoint();
    let total = sig.iter().fold(base, |acc, s| acc + s);
    let r_in = sig.iter().map(|s| &total - s).collect();
    (total, r_in)
}

/// DL receive covariances in frame `k`: returns `(R_d[j], R_in_d[j])`.
pub fn build_dl_covariance(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    d: &DesignState,
    k: usize,
) -> (Vec<CMat>, Vec<CMat>) {
    let a = d.a_row(k);
    let mut tot = Vec::with_capacity(cfg.num_dl());
    let mut ins = Vec::with_capacity(cfg.num_dl());
    for j in 0..cfg.num_dl() {
        let h = &ch.h_bj[j];
        let mut r_in = eye(cfg.dl_antennas[j]) * c64(cfg.sigma2_d, 0.0);
        for g in 0..cfg.num_dl() {
            if g != j {
                r_in += outer(h, &d.p_d[g][k]);
            }
        }
        for i in 0..cfg.num_ul() {
            r_in += outer(&ch.h_ij[i][j], &d.p_u[i][k]);
        }
        let hra = &ch.h_rj[j] * &a;
        r_in += &hra * hra.adjoint();
        tot.push(&r_in + outer(h, &d.p_d[j][k]));
        ins.push(r_in);
    }
    (tot, ins)
}

/// Every covariance needed by the metrics for one design state.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub s_t: CMat,
    pub sigma_t: Vec<CMat>,
    /// `S_t Sigma_t S_t^H` per receiver.
    pub r_t: Vec<CMat>,
    pub r_in_r: Vec<CMat>,
    /// Total BS covariance per frame (shared by all UL users).
    pub r_u: Vec<CMat>,
    /// `[i][k]`
    pub r_in_u: Vec<Vec<CMat>>,
    /// `[j][k]`
    pub r_d: Vec<Vec<CMat>>,
    pub r_in_d: Vec<Vec<CMat>>,
    /// `[i][k]` signal part `H_iB P P^H H_iB^H`.
    pub r_sig_u: Vec<Vec<CMat>>,
    pub r_sig_d: Vec<Vec<CMat>>,
}

impl CovarianceBundle {
    pub fn build(
        cfg: &SystemConfig,
        ch: &ChannelSet,
        stats: &RadarStatistics,
        d: &DesignState,
        sym: &SymbolSet,
    ) -> Result<Self> {
        let tm = build_target_model(cfg, stats, d, sym)?;
        let r_t: Vec<CMat> = tm.sigma_t.iter().map(|s| &tm.s_t * s * tm.s_t.adjoint()).collect();
        let r_in = build_radar_interference(cfg, stats, d, sym, 0)?.total();
        let r_in_r = vec![r_in; cfg.n_r];

        let (ni, nj) = (cfg.num_ul(), cfg.num_dl());
        let mut r_u = Vec::with_capacity(cfg.k);
        let mut r_in_u = vec![Vec::with_capacity(cfg.k); ni];
        let mut r_d = vec![Vec::with_capacity(cfg.k); nj];
        let mut r_in_d = vec![Vec::with_capacity(cfg.k); nj];
        let mut r_sig_u = vec![Vec::with_capacity(cfg.k); ni];
        let mut r_sig_d = vec![Vec::with_capacity(cfg.k); nj];
        for k in 0..cfg.k {
            let (tot, ins) = build_ul_covariance(cfg, ch, d, k);
            for (i, r) in ins.into_iter().enumerate() {
                r_sig_u[i].push(&tot - &r);
                r_in_u[i].push(r);
            }
            r_u.push(tot);
            let (tot, ins) = build_dl_covariance(cfg, ch, d, k);
            for (j, (t, r)) in tot.into_iter().zip(ins).enumerate() {
                r_sig_d[j].push(&t - &r);
                r_d[j].push(t);
                r_in_d[j].push(r);
            }
        }
        Ok(CovarianceBundle {
            s_t: tm.s_t,
            sigma_t: tm.sigma_t,
            r_t,
            r_in_r,
            r_u,
            r_in_u,
            r_d,
            r_in_d,
            r_sig_u,
            r_sig_d,
        })
    }

    /// Total radar covariance `R_t + R_in` of receiver `nr`.
    pub fn r_r(&self, nr: usize) -> CMat {
        &self.r_t[nr] + &self.r_in_r[nr]
    }
}

pub(crate) fn check_design(cfg: &SystemConfig, d: &DesignState) -> Result<()> {
    shape_check(d.a.shape() == (cfg.k, cfg.m_r), || {
        format!("code matrix is {:?}, expected {:?}", d.a.shape(), (cfg.k, cfg.m_r))
    })?;
    shape_check(d.p_u.len() == cfg.num_ul() && d.p_d.len() == cfg.num_dl(), || {
        "precoder lists do not match the user counts".into()
    })?;
    for i in 0..cfg.num_ul() {
        shape_check(d.p_u[i].len() == cfg.k, || format!("UL user {i}: need K precoders"))?;
        for p in &d.p_u[i] {
            shape_check(p.shape() == (cfg.ul_antennas[i], cfg.ul_streams[i]), || {
                format!("UL precoder {i} has shape {:?}", p.shape())
            })?;
        }
    }
    for j in 0..cfg.num_dl() {
        shape_check(d.p_d[j].len() == cfg.k, || format!("DL user {j}: need K precoders"))?;
        for p in &d.p_d[j] {
            shape_check(p.shape() == (cfg.m_c, cfg.dl_streams[j]), || {
                format!("DL precoder {j} has shape {:?}", p.shape())
            })?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob, min_eig};
    use crate::model::{generate_channels, generate_symbols};
    use crate::testutil::random_design;

    #[test]
    fn s_t_layout_small() {
        let mut cfg = SystemConfig::reduced();
        cfg.m_r = 1;
        cfg.m_c = 1;
        cfg.k = 2;
        cfg.n_c = 2;
        cfg.dl_streams = vec![1];
        cfg.dl_antennas = vec![1];
        cfg.p_r = vec![0.01];
        cfg.gamma = vec![1.5];
        cfg.set_uniform_weights();
        let ch = generate_channels(&cfg, 1).unwrap();
        let sym = generate_symbols(&cfg, 1).unwrap();
        let d = random_design(&cfg, 4);
        let s = build_s_t(&cfg, &d, &sym).unwrap();
        assert_eq!(s.shape(), (2, 4));
        assert_eq!(s[(0, 0)], d.a[(0, 0)]);
        assert_eq!(s[(0, 1)], s_bt(&cfg, &d, &sym, 0)[0]);
        assert_eq!(s[(0, 2)], ZERO);
        let _ = ch;
    }

    #[test]
    fn zero_doppler_rank_limited() {
        let mut cfg = SystemConfig::defaults();
        cfg.doppler_min = 0.0;
        cfg.doppler_max = 0.0;
        cfg.target_corr = 1.0;
        let ch = generate_channels(&cfg, 2).unwrap();
        let stats = RadarStatistics::new(&cfg, &ch);
        let s = stats.sigma_t(0);
        assert_eq!(stats.sigma_rt(0, 0, 3), stats.sigma_rt(0, 5, 1));
        let ev = crate::linalg::herm_eigvals(&s);
        let rank = ev.iter().filter(|&&e| e > 1e-9 * ev[ev.len() - 1]).count();
        assert!(rank <= cfg.m());
    }

    #[test]
    fn default_sigma_t_psd() {
        let cfg = SystemConfig::defaults();
        let ch = generate_channels(&cfg, 2).unwrap();
        let stats = RadarStatistics::new(&cfg, &ch);
        let s = stats.sigma_t(1);
        assert_eq!(s.shape(), (64, 64));
        assert!(frob(&(&s - s.adjoint())) < 1e-12);
        assert!(min_eig(&s) > 0.0);
    }

    #[test]
    fn interference_free_noise_floor() {
        let mut cfg = SystemConfig::reduced();
        cfg.sigma2_c = 0.0;
        cfg.sigma2_bm = 0.0;
        cfg.sigma2_iu = 0.0;
        let ch = generate_channels(&cfg, 3).unwrap();
        let stats = RadarStatistics::new(&cfg, &ch);
        let sym = generate_symbols(&cfg, 3).unwrap();
        let d = random_design(&cfg, 3);
        let r = build_radar_interference(&cfg, &stats, &d, &sym, 0).unwrap().total();
        assert!(frob(&(r - eye(cfg.k) * c64(cfg.sigma2_r, 0.0))) < 1e-15);
    }

    #[test]
    fn fully_correlated_clutter() {
        let mut cfg = SystemConfig::reduced();
        cfg.m_r = 1;
        cfg.k = 2;
        cfg.p_r = vec![2.0];
        cfg.gamma = vec![1.0];
        cfg.sigma2_c = 0.7;
        let ch = generate_channels(&cfg, 3).unwrap();
        let stats = RadarStatistics::new(&cfg, &ch);
        let sym = generate_symbols(&cfg, 3).unwrap();
        let mut d = DesignState::zeros(&cfg);
        d.a = CMat::from_element(2, 1, c64(1.0, 0.0));
        let r = build_radar_interference(&cfg, &stats, &d, &sym, 0).unwrap();
        assert!(frob(&(r.clutter - CMat::from_element(2, 2, c64(0.7, 0.0)))) < 1e-15);
    }

    #[test]
    fn target_covariance_paths_agree() {
        let cfg = SystemConfig::defaults();
        let ch = generate_channels(&cfg, 9).unwrap();
        let stats = RadarStatistics::new(&cfg, &ch);
        let sym = generate_symbols(&cfg, 9).unwrap();
        let d = random_design(&cfg, 9);
        let b = CovarianceBundle::build(&cfg, &ch, &stats, &d, &sym).unwrap();
        for nr in 0..cfg.n_r {
            let direct = target_covariance_direct(&cfg, &stats, &d, &sym, nr);
            assert!(frob(&(&direct - &b.r_t[nr])) <= 1e-12 * frob(&direct));
        }
    }

    #[test]
    fn comms_noise_floor_and_scaling() {
        let mut cfg = SystemConfig::reduced();
        let ch = generate_channels(&cfg, 5).unwrap();
        let mut d = DesignState::zeros(&cfg);
        let (tot, ins) = build_ul_covariance(&cfg, &ch, &d, 0);
        assert!(frob(&(&ins[0] - eye(cfg.n_c) * c64(cfg.sigma2_b, 0.0))) < 1e-15);
        assert!(frob(&(tot - &ins[0])) < 1e-15);
        d.a = CMat::from_element(cfg.k, cfg.m_r, c64(0.1, 0.05));
        let (_, in1) = build_dl_covariance(&cfg, &ch, &d, 1);
        d.a *= c64(2.0, 0.0);
        let (_, in2) = build_dl_covariance(&cfg, &ch, &d, 1);
        let n = eye(2) * c64(cfg.sigma2_d, 0.0);
        assert!(frob(&((&in2[0] - &n) - (&in1[0] - &n) * c64(4.0, 0.0))) < 1e-14);
        cfg.sigma2_b = 0.5;
        let _ = cfg;
    }
}
