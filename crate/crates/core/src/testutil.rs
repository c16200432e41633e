//! Random design states for tests and oracle runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::linalg::{c64, cn_matrix, frob, CMat, ZERO};
use crate::model::DesignState;

/// Random precoders scaled to a random fraction of their budgets and a random
/// Gaussian code scaled to the radar power. Filters and weights are empty.
pub fn random_design(cfg: &SystemConfig, seed: u64) -> DesignState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = DesignState::zeros(cfg);
    let scaled = |rng: &mut ChaCha8Rng, r: usize, c: usize, budget: f64| -> CMat {
        let m = cn_matrix(rng, r, c, ZERO, 1.0);
        let frac: f64 = rng.random_range(0.2..1.0);
        let n = frob(&m);
        m * c64((frac * budget).sqrt() / n, 0.0)
    };
    for k in 0..cfg.k {
        for i in 0..cfg.num_ul() {
            d.p_u[i][k] = scaled(&mut rng, cfg.ul_antennas[i], cfg.ul_streams[i], cfg.p_u);
        }
        for j in 0..cfg.num_dl() {
            d.p_d[j][k] = scaled(&mut rng, cfg.m_c, cfg.dl_streams[j], cfg.p_b / cfg.num_dl() as f64);
        }
    }
    let a = cn_matrix(&mut rng, cfg.k, cfg.m_r, ZERO, 1.0);
    for m in 0..cfg.m_r {
        let n = a.column(m).norm();
        let col = a.column(m) * c64(cfg.p_r[m].sqrt() / n, 0.0);
        d.a.set_column(m, &col);
    }
    d
}
