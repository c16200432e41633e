//! Gradients of the achievable rates used by the first-order rate
//! linearisation of the QoS constraints.
//!
//! All gradients are with respect to the conjugate of the variable and in
//! bits (the `1/ln 2` factor is included).

use std::f64::consts::LN_2;

use crate::config::SystemConfig;
use crate::covariance;
use crate::error::Result;
use crate::linalg::{c64, herm_inv, CMat, CVec};
use crate::model::{ChannelSet, DesignState};

/// Inverse covariances of every communication receiver in one frame,
/// evaluated at the linearisation anchor.
#[derive(Debug, Clone)]
pub struct FrameRates {
    pub k: usize,
    pub r_u_inv: CMat,
    /// `R_in_u[i]^{-1}`
    pub r_in_u_inv: Vec<CMat>,
    pub r_d_inv: Vec<CMat>,
    pub r_in_d_inv: Vec<CMat>,
}

const INV_LN2: f64 = 1.0 / LN_2;

impl FrameRates {
    pub fn new(cfg: &SystemConfig, ch: &ChannelSet, d: &DesignState, k: usize) -> Result<Self> {
        let (r_u, r_in_u) = covariance::build_ul_covariance(cfg, ch, d, k);
        let (r_d, r_in_d) = covariance::build_dl_covariance(cfg, ch, d, k);
        Ok(FrameRates {
            k,
            r_u_inv: herm_inv(&r_u)?,
            r_in_u_inv: r_in_u.iter().map(herm_inv).collect::<Result<_>>()?,
            r_d_inv: r_d.iter().map(herm_inv).collect::<Result<_>>()?,
            r_in_d_inv: r_in_d.iter().map(herm_inv).collect::<Result<_>>()?,
        })
    }

    fn ul_diff(&self, i: usize) -> CMat {
        &self.r_u_inv - &self.r_in_u_inv[i]
    }

    fn dl_diff(&self, j: usize) -> CMat {
        &self.r_d_inv[j] - &self.r_in_d_inv[j]
    }

    /// Gradient of `R_u[i]` with respect to `P_u[q]*` (own rate when `q == i`).
    pub fn ul_wrt_ul(&self, ch: &ChannelSet, d: &DesignState, i: usize, q: usize) -> CMat {
        let h = &ch.h_ib[q];
        let mid = if q == i { self.r_u_inv.clone() } else { self.ul_diff(i) };
        h.adjoint() * mid * h * &d.p_u[q][self.k] * c64(INV_LN2, 0.0)
    }

    /// Gradient of `R_u[i]` with respect to `P_d[j]*` (self-interference).
    pub fn ul_wrt_dl(&self, ch: &ChannelSet, d: &DesignState, i: usize, j: usize) -> CMat {
        let h = &ch.h_bb;
        h.adjoint() * self.ul_diff(i) * h * &d.p_d[j][self.k] * c64(INV_LN2, 0.0)
    }

    /// Gradient of `R_u[i]` with respect to `a[k]*`.
    pub fn ul_wrt_a(&self, ch: &ChannelSet, d: &DesignState, i: usize) -> CVec {
        let h = &ch.h_rb;
        h.adjoint() * self.ul_diff(i) * h * d.a_row(self.k) * c64(INV_LN2, 0.0)
    }

    /// Gradient of `R_d[j]` with respect to `P_d[g]*` (own rate when `g == j`).
    pub fn dl_wrt_dl(&self, ch: &ChannelSet, d: &DesignState, j: usize, g: usize) -> CMat {
        let h = &ch.h_bj[j];
        let mid = if g == j { self.r_d_inv[j].clone() } else { self.dl_diff(j) };
        h.adjoint() * mid * h * &d.p_d[g][self.k] * c64(INV_LN2, 0.0)
    }

    /// Gradient of `R_d[j]` with respect to `P_u[i]*` (UL-to-DL interference).
    pub fn dl_wrt_ul(&self, ch: &ChannelSet, d: &DesignState, j: usize, i: usize) -> CMat {
        let h = &ch.h_ij[i][j];
        h.adjoint() * self.dl_diff(j) * h * &d.p_u[i][self.k] * c64(INV_LN2, 0.0)
    }

    /// Gradient of `R_d[j]` with respect to `a[k]*`.
    pub fn dl_wrt_a(&self, ch: &ChannelSet, d: &DesignState, j: usize) -> CVec {
        let h = &ch.h_rj[j];
        h.adjoint() * self.dl_diff(j) * h * d.a_row(self.k) * c64(INV_LN2, 0.0)
    }
}

/// Every rate gradient of frame `k` gathered per variable block.
#[derive(Debug, Clone)]
pub struct LinearizedRateGradients {
    /// `[rate i][var q]`
    pub ul_wrt_ul: Vec<Vec<CMat>>,
    /// `[rate i][var j]`
    pub ul_wrt_dl: Vec<Vec<CMat>>,
    pub ul_wrt_a: Vec<CVec>,
    /// `[rate j][var g]`
    pub dl_wrt_dl: Vec<Vec<CMat>>,
    /// `[rate j][var i]`
    pub dl_wrt_ul: Vec<Vec<CMat>>,
    pub dl_wrt_a: Vec<CVec>,
}

/// All eight gradient families at the anchor `d` for frame `k`.
pub fn linearized_rate_gradients(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    d: &DesignState,
    k: usize,
) -> Result<LinearizedRateGradients> {
    let fr = FrameRates::new(cfg, ch, d, k)?;
    let (ni, nj) = (cfg.num_ul(), cfg.num_dl());
    Ok(LinearizedRateGradients {
        ul_wrt_ul: (0..ni).map(|i| (0..ni).map(|q| fr.ul_wrt_ul(ch, d, i, q)).collect()).collect(),
        ul_wrt_dl: (0..ni).map(|i| (0..nj).map(|j| fr.ul_wrt_dl(ch, d, i, j)).collect()).collect(),
        ul_wrt_a: (0..ni).map(|i| fr.ul_wrt_a(ch, d, i)).collect(),
        dl_wrt_dl: (0..nj).map(|j| (0..nj).map(|g| fr.dl_wrt_dl(ch, d, j, g)).collect()).collect(),
        dl_wrt_ul: (0..nj).map(|j| (0..ni).map(|i| fr.dl_wrt_ul(ch, d, j, i)).collect()).collect(),
        dl_wrt_a: (0..nj).map(|j| fr.dl_wrt_a(ch, d, j)).collect(),
    })
}
