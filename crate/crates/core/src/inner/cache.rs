//! Quantities that depend only on the (fixed) receive filters and weights,
//! and the expanded evaluation of the weighted-sum MSE built on them.

use crate::config::SystemConfig;
use crate::covariance::{self, RadarStatistics};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, CVec, ZERO};
use crate::model::{ChannelSet, DesignState, SymbolSet};

/// Filter/weight-derived coefficients shared by every block update of one
/// WMMSE call.
///
/// Radar quantities are pre-summed over the radar receivers with their
/// weights, which is all the block problems need.
#[derive(Debug, Clone)]
pub struct GradientCache {
    /// `sum_i alpha_i U_i^H W_i U_i` per frame (`N_c x N_c`).
    pub xi_ul: Vec<CMat>,
    /// `alpha_j U_j^H W_j U_j`, `[j][k]`.
    pub xi_d: Vec<Vec<CMat>>,
    /// `alpha_i H_iB^H U_i^H W_i`, `[i][k]`.
    pub pull_u: Vec<Vec<CMat>>,
    /// `alpha_j H_Bj^H U_j^H W_j`, `[j][k]`.
    pub pull_d: Vec<Vec<CMat>>,
    /// `sum alpha tr(W)` over UL receivers and frames.
    pub const_comm_ul: f64,
    /// Same for the DL receivers.
    pub const_comm_dl: f64,
    /// `sum_nr alpha_nr U_r^H W_r U_r` (`K x K`).
    pub xsum: CMat,
    /// Radar-code quadratic coefficients per Tx: `q_a[mr](m,l)`.
    pub q_a: Vec<CMat>,
    /// BS-target quadratic coefficients `q_bt(m,l)`.
    pub q_bt: CMat,
    /// Target cross-correlation pulls `g_a[k]` (length `M_r`).
    pub g_a: Vec<CVec>,
    /// `g_b[k]` (length `M_c`).
    pub g_b: Vec<CVec>,
    /// `sum alpha_nr tr(W_r Sigma_t) + sigma2_r tr(xsum)`.
    pub const_r: f64,
    pub bm_var: f64,
    pub iu_var: f64,
}

/// Weighted-sum MSE split by subsystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiParts {
    pub ul: f64,
    pub dl: f64,
    pub radar: f64,
}

impl XiParts {
    pub fn total(&self) -> f64 {
        self.ul + self.dl + self.radar
    }
}

fn re_tr_prod(a: &CMat, b: &CMat) -> f64 {
    // Re tr(A B) without forming the product.
    let mut s = 0.0;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            s += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    s
}

/// `sum_c Re(v_c^H Q v_c)` over the columns of `v`.
pub(crate) fn quad(q: &CMat, v: &CMat) -> f64 {
    let mut s = 0.0;
    for c in 0..v.ncols() {
        let col = v.column(c);
        let qv = q * col;
        s += col.dotc(&qv).re;
    }
    s
}

impl GradientCache {
    pub fn new(
        cfg: &SystemConfig,
        ch: &ChannelSet,
        stats: &RadarStatistics,
        d: &DesignState,
    ) -> Result<Self> {
        let (f, w) = (&d.filters, &d.weights);
        let (ni, nj, k) = (cfg.num_ul(), cfg.num_dl(), cfg.k);
        if f.ul.len() != ni || f.dl.len() != nj || f.radar.len() != cfg.n_r || w.radar.len() != cfg.n_r {
            return Err(Error::Argument("filters and weights must be refreshed before use".into()));
        }
        let mut xi_ul = vec![CMat::zeros(cfg.n_c, cfg.n_c); k];
        let mut xi_d = vec![Vec::with_capacity(k); nj];
        let mut pull_u = vec![Vec::with_capacity(k); ni];
        let mut pull_d = vec![Vec::with_capacity(k); nj];
        let mut const_comm_ul = 0.0;
        let mut const_comm_dl = 0.0;
        for kk in 0..k {
            for i in 0..ni {
                let (u, wm) = (&f.ul[i][kk], &w.ul[i][kk]);
                let al = c64(cfg.alpha_u[i], 0.0);
                xi_ul[kk] += u.adjoint() * wm * u * al;
                pull_u[i].push(ch.h_ib[i].adjoint() * u.adjoint() * wm * al);
                const_comm_ul += cfg.alpha_u[i] * wm.trace().re;
            }
            for j in 0..nj {
                let (u, wm) = (&f.dl[j][kk], &w.dl[j][kk]);
                let al = c64(cfg.alpha_d[j], 0.0);
                xi_d[j].push(u.adjoint() * wm * u * al);
                pull_d[j].push(ch.h_bj[j].adjoint() * u.adjoint() * wm * al);
                const_comm_dl += cfg.alpha_d[j] * wm.trace().re;
            }
        }

        let mm = cfg.m();
        let mut xsum = CMat::zeros(k, k);
        let mut q_a = vec![CMat::zeros(k, k); cfg.m_r];
        let mut q_bt = CMat::zeros(k, k);
        let mut g_a = vec![CVec::zeros(cfg.m_r); k];
        let mut g_b = vec![CVec::zeros(cfg.m_c); k];
        let mut const_r = 0.0;
        for nr in 0..cfg.n_r {
            let al = cfg.alpha_r[nr];
            let u = &f.radar[nr];
            let wm = &w.radar[nr];
            let wu = wm * u;
            let x = u.adjoint() * &wu;
            xsum += &x * c64(al, 0.0);
            for m in 0..k {
                for l in 0..k {
                    let xv = x[(m, l)] * al;
                    for mr in 0..cfg.m_r {
                        q_a[mr][(m, l)] += xv * (stats.rt_coef(nr, mr, l, m) + stats.clutter_var);
                    }
                    q_bt[(m, l)] += xv * stats.bt_coef(nr, l, m);
                }
            }
            for kk in 0..k {
                for m in 0..k {
                    for mr in 0..cfg.m_r {
                        g_a[kk][mr] += stats.rt_coef(nr, mr, kk, m) * wu[(m * mm + mr, kk)] * al;
                    }
                    let b = stats.bt_coef(nr, kk, m) * al;
                    for mc in 0..cfg.m_c {
                        g_b[kk][mc] += b * wu[(m * mm + cfg.m_r + mc, kk)];
                    }
                }
            }
            // tr(W Sigma_t) over the non-zero (diagonal-per-block) entries.
            let mut tr = ZERO;
            for bm in 0..k {
                for bl in 0..k {
                    for mr in 0..cfg.m_r {
                        tr += wm[(bl * mm + mr, bm * mm + mr)] * stats.rt_coef(nr, mr, bm, bl);
                    }
                    let b = stats.bt_coef(nr, bm, bl);
                    for mc in 0..cfg.m_c {
                        let o = cfg.m_r + mc;
                        tr += wm[(bl * mm + o, bm * mm + o)] * b;
                    }
                }
            }
            const_r += al * tr.re;
        }
        const_r += cfg.sigma2_r * xsum.trace().re;

        Ok(GradientCache {
            xi_ul,
            xi_d,
            pull_u,
            pull_d,
            const_comm_ul,
            const_comm_dl,
            xsum,
            q_a,
            q_bt,
            g_a,
            g_b,
            const_r,
            bm_var: stats.bm_var,
            iu_var: stats.iu_var,
        })
    }

    /// Weighted-sum MSE of `d` under the cached filters and weights, using the
    /// expanded per-subsystem forms.
    pub fn xi(&self, cfg: &SystemConfig, ch: &ChannelSet, sym: &SymbolSet, d: &DesignState) -> XiParts {
        let mut ul = 0.0;
        let mut dl = 0.0;
        for k in 0..cfg.k {
            let (r_u, _) = covariance::build_ul_covariance(cfg, ch, d, k);
            ul += re_tr_prod(&self.xi_ul[k], &r_u);
            for i in 0..cfg.num_ul() {
                ul -= 2.0 * crate::linalg::re_inner(&d.p_u[i][k], &self.pull_u[i][k]);
            }
            let (r_d, _) = covariance::build_dl_covariance(cfg, ch, d, k);
            for j in 0..cfg.num_dl() {
                dl += re_tr_prod(&self.xi_d[j][k], &r_d[j]);
                dl -= 2.0 * crate::linalg::re_inner(&d.p_d[j][k], &self.pull_d[j][k]);
            }
        }
        XiParts {
            ul: ul + self.const_comm_ul,
            dl: dl + self.const_comm_dl,
            radar: self.xi_radar(cfg, sym, d),
        }
    }

    /// Radar part of the weighted-sum MSE.
    pub fn xi_radar(&self, cfg: &SystemConfig, sym: &SymbolSet, d: &DesignState) -> f64 {
        let k = cfg.k;
        let mut v = self.const_r;
        for mr in 0..cfg.m_r {
            v += quad(&self.q_a[mr], &d.a.columns(mr, 1).into_owned());
        }
        let sbt = CMat::from_fn(k, cfg.m_c, |r, c| covariance::s_bt(cfg, d, sym, r)[c]);
        let sbm = CMat::from_fn(k, cfg.m_c, |r, c| covariance::s_bm(cfg, d, sym, r)[c]);
        v += quad(&self.q_bt, &sbt);
        v += self.bm_var * quad(&self.xsum, &sbm);
        for i in 0..cfg.num_ul() {
            let su = CMat::from_fn(k, cfg.ul_antennas[i], |r, c| covariance::s_u(cfg, d, sym, i, r)[c]);
            v += self.iu_var * quad(&self.xsum, &su);
        }
        for kk in 0..k {
            let a = d.a_row(kk);
            v -= 2.0 * (a.transpose() * &self.g_a[kk])[(0, 0)].re;
            let sb = sbt.row(kk).transpose();
            v -= 2.0 * (sb.transpose() * &self.g_b[kk])[(0, 0)].re;
        }
        v
    }
}
