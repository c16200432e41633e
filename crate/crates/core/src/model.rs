//! Domain types (channels, symbols, design state) and their seeded generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::Result;
use crate::linalg::{c64, cn_matrix, cn_scalar, cn_vector, CMat, CVec, C64, ZERO};

/// Every propagation channel of one scenario realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// UL user i to BS, `N_c x N_u[i]`.
    pub h_ib: Vec<CMat>,
    /// BS to DL user j, `N_d[j] x M_c`.
    pub h_bj: Vec<CMat>,
    /// UL user i to DL user j, `N_d[j] x N_u[i]`, indexed `[i][j]`.
    pub h_ij: Vec<Vec<CMat>>,
    /// BS self-interference, `N_c x M_c`.
    pub h_bb: CMat,
    /// Radar Tx to BS, `N_c x M_r`.
    pub h_rb: CMat,
    /// Radar Tx to DL user j, `N_d[j] x M_r`.
    pub h_rj: Vec<CMat>,
    /// Target gain Tx m_r -> Rx n_r, indexed `[m_r][n_r]`.
    pub alpha_rt: Vec<Vec<C64>>,
    /// Normalised Doppler of each radar path, `[m_r][n_r]`.
    pub f_rt: Vec<Vec<f64>>,
    /// BS -> target -> Rx n_r gains (length `M_c`).
    pub alpha_bt: Vec<CVec>,
    pub f_bt: Vec<f64>,
    /// Clutter gains seen by Rx n_r (length `M_r`).
    pub h_c: Vec<CVec>,
    /// BS -> Rx n_r direct path (length `M_c`).
    pub alpha_bm: Vec<CVec>,
    /// UL user i -> Rx n_r direct path (length `N_u[i]`), `[i][n_r]`.
    pub alpha_iu: Vec<Vec<CVec>>,
}

/// Unit-energy QPSK symbols for every frame and symbol slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSet {
    /// `d_u[i][k][l]`, length `D_u[i]`.
    pub d_u: Vec<Vec<Vec<CVec>>>,
    /// `d_d[j][k][l]`, length `D_d[j]`.
    pub d_d: Vec<Vec<Vec<CVec>>>,
}

/// A family of per-receiver matrices shaped like the receivers of the system
/// (filters, weights or error matrices).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReceiverSet {
    /// `[i][k]`
    pub ul: Vec<Vec<CMat>>,
    /// `[j][k]`
    pub dl: Vec<Vec<CMat>>,
    /// `[n_r]`
    pub radar: Vec<CMat>,
}

impl ReceiverSet {
    pub fn is_empty(&self) -> bool {
        self.ul.is_empty() && self.dl.is_empty() && self.radar.is_empty()
    }
}

/// Lagrange multipliers of the power and QoS constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda_u: Vec<Vec<f64>>,
    pub lambda_d: Vec<f64>,
    pub mu_u: Vec<Vec<f64>>,
    pub mu_d: Vec<Vec<f64>>,
    /// Set when a QoS multiplier hit the cap (threshold likely unattainable).
    pub capped_u: Vec<Vec<bool>>,
    pub capped_d: Vec<Vec<bool>>,
}

impl DualState {
    /// All multipliers start at one.
    pub fn new(cfg: &SystemConfig) -> Self {
        let k = cfg.k;
        DualState {
            lambda_u: vec![vec![1.0; k]; cfg.num_ul()],
            lambda_d: vec![1.0; k],
            mu_u: vec![vec![1.0; k]; cfg.num_ul()],
            mu_d: vec![vec![1.0; k]; cfg.num_dl()],
            capped_u: vec![vec![false; k]; cfg.num_ul()],
            capped_d: vec![vec![false; k]; cfg.num_dl()],
        }
    }
}

/// Optimisation variables plus the receive filters, weights and duals.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    /// `P_u[i][k]`, `N_u[i] x D_u[i]`.
    pub p_u: Vec<Vec<CMat>>,
    /// `P_d[j][k]`, `M_c x D_d[j]`.
    pub p_d: Vec<Vec<CMat>>,
    /// Radar code matrix, `K x M_r`.
    pub a: CMat,
    pub filters: ReceiverSet,
    pub weights: ReceiverSet,
    pub duals: DualState,
}

impl DesignState {
    /// All-zero precoders and code with empty filters.
    pub fn zeros(cfg: &SystemConfig) -> Self {
        DesignState {
            p_u: (0..cfg.num_ul())
                .map(|i| vec![CMat::zeros(cfg.ul_antennas[i], cfg.ul_streams[i]); cfg.k])
                .collect(),
            p_d: (0..cfg.num_dl())
                .map(|j| vec![CMat::zeros(cfg.m_c, cfg.dl_streams[j]); cfg.k])
                .collect(),
            a: CMat::zeros(cfg.k, cfg.m_r),
            filters: ReceiverSet::default(),
            weights: ReceiverSet::default(),
            duals: DualState::new(cfg),
        }
    }

    /// Row k of the code matrix as a column vector `a[k]`.
    pub fn a_row(&self, k: usize) -> CVec {
        self.a.row(k).transpose()
    }

    pub fn set_a_row(&mut self, k: usize, v: &CVec) {
        for m in 0..self.a.ncols() {
            self.a[(k, m)] = v[m];
        }
    }

    pub fn ul_power(&self, i: usize, k: usize) -> f64 {
        crate::linalg::frob2(&self.p_u[i][k])
    }

    pub fn dl_power(&self, k: usize) -> f64 {
        self.p_d.iter().map(|p| crate::linalg::frob2(&p[k])).sum()
    }
}

// Independent ChaCha streams per channel family keep each family's draws
// stable when unrelated dimensions change.
const STREAM_UL: u64 = 1;
const STREAM_DL: u64 = 2;
const STREAM_CROSS: u64 = 3;
const STREAM_SI: u64 = 4;
const STREAM_RB: u64 = 5;
const STREAM_RJ: u64 = 6;
const STREAM_TARGET: u64 = 7;
const STREAM_CLUTTER: u64 = 8;
const STREAM_DIRECT: u64 = 9;
const STREAM_DOPPLER: u64 = 10;
const STREAM_CSI: u64 = 20;
const STREAM_SYMBOLS: u64 = 30;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw one channel realisation.
pub fn generate_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let (ni, nj) = (cfg.num_ul(), cfg.num_dl());

    let mut rng = rng_for(seed, STREAM_UL);
    let h_ib = (0..ni)
        .map(|i| cn_matrix(&mut rng, cfg.n_c, cfg.ul_antennas[i], ZERO, 1.0))
        .collect();
    let mut rng = rng_for(seed, STREAM_DL);
    let h_bj = (0..nj)
        .map(|j| cn_matrix(&mut rng, cfg.dl_antennas[j], cfg.m_c, ZERO, 1.0))
        .collect();
    let mut rng = rng_for(seed, STREAM_CROSS);
    let h_ij = (0..ni)
        .map(|i| {
            (0..nj)
                .map(|j| cn_matrix(&mut rng, cfg.dl_antennas[j], cfg.ul_antennas[i], ZERO, 1.0))
                .collect()
        })
        .collect();

    let mut rng = rng_for(seed, STREAM_SI);
    let si_mean = (cfg.sigma2_si * cfg.k_b / (1.0 + cfg.k_b)).sqrt();
    let si_var = cfg.sigma2_si / (1.0 + cfg.k_b);
    let h_bb = cn_matrix(&mut rng, cfg.n_c, cfg.m_c, c64(si_mean, 0.0), si_var);

    let scale = (1.0 / (cfg.kappa + 1.0)).sqrt();
    let mut rng = rng_for(seed, STREAM_RB);
    let h_rb = cn_matrix(
        &mut rng,
        cfg.n_c,
        cfg.m_r,
        c64(scale * cfg.direct_mean_b, 0.0),
        cfg.direct_var_b / (cfg.kappa + 1.0),
    );
    let mut rng = rng_for(seed, STREAM_RJ);
    let h_rj = (0..nj)
        .map(|j| {
            cn_matrix(
                &mut rng,
                cfg.dl_antennas[j],
                cfg.m_r,
                c64(scale * cfg.direct_mean_d, 0.0),
                cfg.direct_var_d / (cfg.kappa + 1.0),
            )
        })
        .collect();

    let mut rng = rng_for(seed, STREAM_TARGET);
    let alpha_rt = (0..cfg.m_r)
        .map(|_| (0..cfg.n_r).map(|_| cn_scalar(&mut rng, cfg.sigma2_rt)).collect())
        .collect();
    let alpha_bt = (0..cfg.n_r).map(|_| cn_vector(&mut rng, cfg.m_c, cfg.sigma2_bt)).collect();

    let mut rng = rng_for(seed, STREAM_DOPPLER);
    let (lo, hi) = (cfg.doppler_min, cfg.doppler_max);
    let draw = |rng: &mut ChaCha8Rng| if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let f_rt = (0..cfg.m_r)
        .map(|_| (0..cfg.n_r).map(|_| draw(&mut rng)).collect())
        .collect();
    let f_bt = (0..cfg.n_r).map(|_| draw(&mut rng)).collect();

    let mut rng = rng_for(seed, STREAM_CLUTTER);
    let h_c = (0..cfg.n_r).map(|_| cn_vector(&mut rng, cfg.m_r, cfg.sigma2_c)).collect();

    let mut rng = rng_for(seed, STREAM_DIRECT);
    let alpha_bm = (0..cfg.n_r).map(|_| cn_vector(&mut rng, cfg.m_c, cfg.sigma2_bm)).collect();
    let alpha_iu = (0..ni)
        .map(|i| {
            (0..cfg.n_r)
                .map(|_| cn_vector(&mut rng, cfg.ul_antennas[i], cfg.sigma2_iu))
                .collect()
        })
        .collect();

    Ok(ChannelSet {
        h_ib,
        h_bj,
        h_ij,
        h_bb,
        h_rb,
        h_rj,
        alpha_rt,
        f_rt,
        alpha_bt,
        f_bt,
        h_c,
        alpha_bm,
        alpha_iu,
    })
}

/// Add i.i.d. `CN(0, eta2)` estimation error to every communications channel.
///
/// Radar second-order statistics are treated as known and left untouched.
pub fn perturb_csi(ch: &ChannelSet, eta2: f64, seed: u64) -> ChannelSet {
    let mut out = ch.clone();
    if eta2 <= 0.0 {
        return out;
    }
    let mut rng = rng_for(seed, STREAM_CSI);
    let mut add = |m: &mut CMat| {
        let e = cn_matrix(&mut rng, m.nrows(), m.ncols(), ZERO, eta2);
        *m += e;
    };
    out.h_ib.iter_mut().for_each(&mut add);
    out.h_bj.iter_mut().for_each(&mut add);
    out.h_ij.iter_mut().flatten().for_each(&mut add);
    add(&mut out.h_bb);
    add(&mut out.h_rb);
    out.h_rj.iter_mut().for_each(&mut add);
    out
}

fn qpsk<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re = if rng.random::<bool>() { s } else { -s };
        let im = if rng.random::<bool>() { s } else { -s };
        c64(re, im)
    })
}

/// Draw QPSK symbols for every user, frame and symbol slot.
pub fn generate_symbols(cfg: &SystemConfig, seed: u64) -> Result<SymbolSet> {
    cfg.validate()?;
    let mut rng = rng_for(seed, STREAM_SYMBOLS);
    let mut block = |d: usize| -> Vec<Vec<CVec>> {
        (0..cfg.k)
            .map(|_| (0..cfg.n_symbols).map(|_| qpsk(&mut rng, d)).collect())
            .collect()
    };
    let d_u = cfg.ul_streams.iter().map(|&d| block(d)).collect();
    let d_d = cfg.dl_streams.iter().map(|&d| block(d)).collect();
    Ok(SymbolSet { d_u, d_d })
}
