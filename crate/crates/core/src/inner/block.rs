//! Per-block restrictions of the weighted-sum MSE.
//!
//! With every other variable fixed, the objective restricted to one precoder
//! (or one row of the code matrix) `X` has the form
//!
//! `f(X) = Re tr(X^H A0 X) - 2 Re tr(X^H G) + sum_t [ (X d_t)^H diag(f_t) (X d_t) + 2 Re (X d_t)^H h_t ]`
//!
//! up to a constant, where the `t` terms come from the radar receive model
//! (the precoded symbols that reach the radar through the target or the
//! direct paths).

use crate::config::SystemConfig;
use crate::covariance;
use crate::error::Result;
use crate::inner::cache::GradientCache;
use crate::inner::sylvester::SylvesterSystem;
use crate::linalg::{c64, eye, re_inner, CMat, CVec, ONE};
use crate::model::{ChannelSet, DesignState, SymbolSet};

/// One radar coupling term of a block problem.
#[derive(Debug, Clone)]
pub struct Coupling {
    /// Real diagonal of `F_t`.
    pub f: Vec<f64>,
    /// Symbol vector `d_t`.
    pub d: CVec,
    /// Linear coefficient `h_t`.
    pub h: CVec,
}

#[derive(Debug, Clone)]
pub struct BlockProblem {
    pub a0: CMat,
    pub pull: CMat,
    pub terms: Vec<Coupling>,
    /// Constant making [`BlockProblem::value`] equal to the full objective.
    pub base: f64,
}

impl BlockProblem {
    pub fn dims(&self) -> (usize, usize) {
        self.pull.shape()
    }

    /// Block-dependent part of the objective.
    pub fn partial(&self, x: &CMat) -> f64 {
        let ax = &self.a0 * x;
        let mut v = re_inner(x, &ax) - 2.0 * re_inner(x, &self.pull);
        for t in &self.terms {
            let s = x * &t.d;
            for (c, z) in s.iter().enumerate() {
                v += t.f[c] * z.norm_sqr();
            }
            v += 2.0 * s.dotc(&t.h).re;
        }
        v
    }

    pub fn value(&self, x: &CMat) -> f64 {
        self.base + self.partial(x)
    }

    /// Gradient with respect to `X*`.
    pub fn grad(&self, x: &CMat) -> CMat {
        let mut g = &self.a0 * x - &self.pull;
        for t in &self.terms {
            let s = x * &t.d;
            let v = CVec::from_fn(s.len(), |c, _| s[c] * t.f[c] + t.h[c]);
            g += v * t.d.adjoint();
        }
        g
    }

    /// Stationarity system of `f(X) + lambda ||X||^2 - 2 Re tr(X^H extra)`.
    pub fn sylvester(&self, lambda: f64, extra: &CMat) -> Result<SylvesterSystem> {
        let n = self.a0.nrows();
        let a = &self.a0 + eye(n) * c64(lambda, 0.0);
        let mut c = &self.pull + extra;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let f = CMat::from_diagonal(&CVec::from_iterator(n, t.f.iter().map(|&x| c64(x, 0.0))));
            terms.push((f, &t.d * t.d.adjoint()));
            c -= &t.h * t.d.adjoint();
        }
        SylvesterSystem::new(a, terms, c)
    }

    pub fn with_base(mut self, full_value: f64, current: &CMat) -> Self {
        self.base = full_value - self.partial(current);
        self
    }
}

/// Block problem of `P_u[i][k]`.
pub fn ul_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    i: usize,
    k: usize,
) -> BlockProblem {
    let h = &ch.h_ib[i];
    let mut a0 = h.adjoint() * &cache.xi_ul[k] * h;
    for g in 0..cfg.num_dl() {
        let hg = &ch.h_ij[i][g];
        a0 += hg.adjoint() * &cache.xi_d[g][k] * hg;
    }
    let n = cfg.ul_antennas[i];
    let mut hvec = CVec::zeros(n);
    for l in 0..cfg.k {
        if l != k {
            hvec += covariance::s_u(cfg, d, sym, i, l) * cache.xsum[(k, l)];
        }
    }
    let term = Coupling {
        f: vec![cache.iu_var * cache.xsum[(k, k)].re; n],
        d: sym.d_u[i][k][cfg.slot_ul_direct()].clone(),
        h: hvec * c64(cache.iu_var, 0.0),
    };
    BlockProblem {
        a0,
        pull: cache.pull_u[i][k].clone(),
        terms: vec![term],
        base: 0.0,
    }
}

/// Block problem of `P_d[j][k]`.
pub fn dl_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    j: usize,
    k: usize,
) -> BlockProblem {
    let mut a0 = ch.h_bb.adjoint() * &cache.xi_ul[k] * &ch.h_bb;
    for g in 0..cfg.num_dl() {
        let hg = &ch.h_bj[g];
        a0 += hg.adjoint() * &cache.xi_d[g][k] * hg;
    }
    let mc = cfg.m_c;
    let slot_bm = cfg.slot_dl_direct();
    let mut o_bt = CVec::zeros(mc);
    let mut o_bm = CVec::zeros(mc);
    for g in 0..cfg.num_dl() {
        if g != j {
            o_bt += &d.p_d[g][k] * &sym.d_d[g][k][0];
            o_bm += &d.p_d[g][k] * &sym.d_d[g][k][slot_bm];
        }
    }
    let mut h_bt = o_bt * cache.q_bt[(k, k)] - cache.g_b[k].conjugate();
    let mut h_bm = o_bm * cache.xsum[(k, k)];
    for l in 0..cfg.k {
        if l != k {
            h_bt += covariance::s_bt(cfg, d, sym, l) * cache.q_bt[(k, l)];
            h_bm += covariance::s_bm(cfg, d, sym, l) * cache.xsum[(k, l)];
        }
    }
    let bt = Coupling {
        f: vec![cache.q_bt[(k, k)].re; mc],
        d: sym.d_d[j][k][0].clone(),
        h: h_bt,
    };
    let bm = Coupling {
        f: vec![cache.bm_var * cache.xsum[(k, k)].re; mc],
        d: sym.d_d[j][k][slot_bm].clone(),
        h: h_bm * c64(cache.bm_var, 0.0),
    };
    BlockProblem {
        a0,
        pull: cache.pull_d[j][k].clone(),
        terms: vec![bt, bm],
        base: 0.0,
    }
}

/// Block problem of the code row `a[k]` (as an `M_r x 1` matrix).
pub fn radar_block(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    cache: &GradientCache,
    d: &DesignState,
    k: usize,
) -> BlockProblem {
    let mut a0 = ch.h_rb.adjoint() * &cache.xi_ul[k] * &ch.h_rb;
    for j in 0..cfg.num_dl() {
        let h = &ch.h_rj[j];
        a0 += h.adjoint() * &cache.xi_d[j][k] * h;
    }
    let m_r = cfg.m_r;
    let h = CVec::from_fn(m_r, |mr, _| {
        let q = &cache.q_a[mr];
        (0..cfg.k).filter(|&l| l != k).map(|l| q[(k, l)] * d.a[(l, mr)]).sum()
    });
    let term = Coupling {
        f: (0..m_r).map(|mr| cache.q_a[mr][(k, k)].re).collect(),
        d: CVec::from_element(1, ONE),
        h,
    };
    BlockProblem {
        a0,
        pull: CMat::from_column_slice(m_r, 1, cache.g_a[k].conjugate().as_slice()),
        terms: vec![term],
        base: 0.0,
    }
}

/// Gradients of the weighted-sum MSE with respect to every precoder and every
/// code row, at fixed filters and weights.
#[derive(Debug, Clone)]
pub struct WsmseGradients {
    pub p_u: Vec<Vec<CMat>>,
    pub p_d: Vec<Vec<CMat>>,
    /// Row `k` holds the gradient with respect to `a[k]*`.
    pub a: CMat,
}

pub fn gradients_wsmse(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
) -> WsmseGradients {
    let p_u = (0..cfg.num_ul())
        .map(|i| {
            (0..cfg.k)
                .map(|k| ul_block(cfg, ch, sym, cache, d, i, k).grad(&d.p_u[i][k]))
                .collect()
        })
        .collect();
    let p_d = (0..cfg.num_dl())
        .map(|j| {
            (0..cfg.k)
                .map(|k| dl_block(cfg, ch, sym, cache, d, j, k).grad(&d.p_d[j][k]))
                .collect()
        })
        .collect();
    let mut a = CMat::zeros(cfg.k, cfg.m_r);
    for k in 0..cfg.k {
        let x = CMat::from_column_slice(cfg.m_r, 1, d.a_row(k).as_slice());
        let g = radar_block(cfg, ch, cache, d, k).grad(&x);
        for mr in 0..cfg.m_r {
            a[(k, mr)] = g[(mr, 0)];
        }
    }
    WsmseGradients { p_u, p_d, a }
}
