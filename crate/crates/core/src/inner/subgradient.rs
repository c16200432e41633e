//! Closed-form block solves and the projected-subgradient dual loops for the
//! UL and DL precoders, plus the radar-code update.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::inner::block::{dl_block, radar_block, ul_block, BlockProblem};
use crate::inner::cache::GradientCache;
use crate::inner::rates::FrameRates;
use crate::covariance;
use crate::linalg::{c64, frob, frob2, log2det_herm, CMat};
use crate::model::{ChannelSet, DesignState, SymbolSet};

/// Polyak step `(xi_t - xi_min + 0.1^t) / slack^2`; zero when the slack is zero.
pub fn polyak_step(t: usize, xi_t: f64, xi_min: f64, slack: f64) -> f64 {
    let den = slack * slack;
    if den == 0.0 || !den.is_finite() {
        return 0.0;
    }
    (xi_t - xi_min + 0.1f64.powi(t as i32)) / den
}

#[derive(Debug, Clone, Copy)]
pub struct SubgradientOptions {
    pub t_max: usize,
    pub lambda0: f64,
    pub mu0: f64,
    pub dual_cap: f64,
    /// Relative tolerance of the power test used by best-iterate tracking.
    pub power_tol: f64,
}

impl SubgradientOptions {
    pub fn from_config(cfg: &SystemConfig, t_max: usize) -> Self {
        SubgradientOptions {
            t_max,
            lambda0: 1.0,
            mu0: 1.0,
            dual_cap: cfg.dual_cap,
            power_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubgradientOutcome {
    /// Best tracked iterate.
    pub x: CMat,
    /// Weighted-sum MSE at `x`.
    pub xi: f64,
    /// Weighted-sum MSE at the incoming point.
    pub xi_start: f64,
    /// Multipliers of the best dual iterate (`t >= 1`), which may differ
    /// from the returned point when the incoming one is kept.
    pub lambda: f64,
    pub mu: f64,
    pub capped: bool,
    pub iterations: usize,
    /// Index of the returned iterate, 0 meaning the incoming point.
    pub best_iter: usize,
    /// Best-so-far objective after every dual iteration.
    pub trace: Vec<f64>,
    /// Whether the returned point satisfies the power budget.
    pub feasible: bool,
}

/// One constrained block: objective, power budget and the QoS rate of its owner.
struct DualProblem {
    block: BlockProblem,
    /// Gradient of the other users' linearised rates weighted by their
    /// multipliers.
    fixed_extra: CMat,
    /// Gradient of the owner's linearised rate.
    own_grad: CMat,
    /// Power used by others sharing the budget.
    other_power: f64,
    budget: f64,
    qos: f64,
    rate: Box<dyn Fn(&CMat) -> Result<f64>>,
}

fn run_dual_loop(p: &DualProblem, x0: &CMat, opts: &SubgradientOptions) -> Result<SubgradientOutcome> {
    if opts.t_max == 0 {
        return Err(Error::Argument("t_max must be positive".into()));
    }
    let power_ok = |x: &CMat| frob2(x) + p.other_power <= p.budget * (1.0 + opts.power_tol);
    let xi0 = p.block.value(x0);
    let mut best = x0.clone();
    let mut best_xi = xi0;
    let mut best_feasible = power_ok(x0);
    let mut best_iter = 0;
    // duals of the best dual iterate (t >= 1), ranked like the primal
    let mut best_duals = (opts.lambda0, if p.qos > 0.0 { opts.mu0 } else { 0.0 });
    let mut duals_key: Option<(bool, f64)> = None;
    let mut xi_min = xi0;
    let mut lambda = opts.lambda0;
    let mut mu = if p.qos > 0.0 { opts.mu0 } else { 0.0 };
    let mut capped = false;
    let mut trace = Vec::with_capacity(opts.t_max);

    for t in 1..=opts.t_max {
        let extra = &p.fixed_extra + &p.own_grad * c64(mu, 0.0);
        let x = p.block.sylvester(lambda, &extra)?.solve()?;
        let xi_t = p.block.value(&x);
        if !xi_t.is_finite() {
            return Err(Error::Numerical(format!("non-finite objective at dual iteration {t}")));
        }
        xi_min = xi_min.min(xi_t);
        let feasible = power_ok(&x);
        if (feasible && !best_feasible) || (feasible == best_feasible && xi_t < best_xi) {
            best = x.clone();
            best_xi = xi_t;
            best_feasible = feasible;
            best_iter = t;
        }
        let better = match duals_key {
            None => true,
            Some((f, v)) => (feasible && !f) || (feasible == f && xi_t < v),
        };
        if better {
            duals_key = Some((feasible, xi_t));
            best_duals = (lambda, mu);
        }
        trace.push(best_xi);

        let slack_p = frob2(&x) + p.other_power - p.budget;
        lambda = (lambda + polyak_step(t, xi_t, xi_min, slack_p) * slack_p).max(0.0);
        if lambda > opts.dual_cap {
            lambda = opts.dual_cap;
        }
        if p.qos > 0.0 {
            let slack_q = p.qos - (p.rate)(&x)?;
            mu = (mu + polyak_step(t, xi_t, xi_min, slack_q) * slack_q).max(0.0);
            if mu > opts.dual_cap {
                mu = opts.dual_cap;
                capped = true;
            }
        } else {
            mu = 0.0;
        }
    }
    let (lambda, mu) = best_duals;
    Ok(SubgradientOutcome {
        x: best,
        xi: best_xi,
        xi_start: xi0,
        lambda,
        mu,
        capped,
        iterations: opts.t_max,
        best_iter,
        trace,
        feasible: best_feasible,
    })
}

fn rate_with(r_in: CMat, h: CMat) -> impl Fn(&CMat) -> Result<f64> {
    move |x: &CMat| {
        let hx = &h * x;
        let base = log2det_herm(&r_in)?;
        Ok(log2det_herm(&(&r_in + &hx * hx.adjoint()))? - base)
    }
}

#[allow(clippy::too_many_arguments)]
fn ul_problem(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    xi_now: f64,
    i: usize,
    k: usize,
) -> Result<DualProblem> {
    let block = ul_block(cfg, ch, sym, cache, d, i, k).with_base(xi_now, &d.p_u[i][k]);
    let fr = FrameRates::new(cfg, ch, d, k)?;
    let mut fixed_extra = CMat::zeros(cfg.ul_antennas[i], cfg.ul_streams[i]);
    for q in 0..cfg.num_ul() {
        if q != i && cfg.r_ul > 0.0 {
            fixed_extra += fr.ul_wrt_ul(ch, d, q, i) * c64(d.duals.mu_u[q][k], 0.0);
        }
    }
    if cfg.r_dl > 0.0 {
        for j in 0..cfg.num_dl() {
            fixed_extra += fr.dl_wrt_ul(ch, d, j, i) * c64(d.duals.mu_d[j][k], 0.0);
        }
    }
    let own_grad = fr.ul_wrt_ul(ch, d, i, i);
    let r_in = covariance::build_ul_covariance(cfg, ch, d, k).1.swap_remove(i);
    Ok(DualProblem {
        block,
        fixed_extra,
        own_grad,
        other_power: 0.0,
        budget: cfg.p_u,
        qos: cfg.r_ul,
        rate: Box::new(rate_with(r_in, ch.h_ib[i].clone())),
    })
}

#[allow(clippy::too_many_arguments)]
fn dl_problem(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    xi_now: f64,
    j: usize,
    k: usize,
) -> Result<DualProblem> {
    let block = dl_block(cfg, ch, sym, cache, d, j, k).with_base(xi_now, &d.p_d[j][k]);
    let fr = FrameRates::new(cfg, ch, d, k)?;
    let mut fixed_extra = CMat::zeros(cfg.m_c, cfg.dl_streams[j]);
    if cfg.r_ul > 0.0 {
        for i in 0..cfg.num_ul() {
            fixed_extra += fr.ul_wrt_dl(ch, d, i, j) * c64(d.duals.mu_u[i][k], 0.0);
        }
    }
    for g in 0..cfg.num_dl() {
        if g != j && cfg.r_dl > 0.0 {
            fixed_extra += fr.dl_wrt_dl(ch, d, g, j) * c64(d.duals.mu_d[g][k], 0.0);
        }
    }
    let own_grad = fr.dl_wrt_dl(ch, d, j, j);
    let other_power = d.dl_power(k) - frob2(&d.p_d[j][k]);
    let r_in = covariance::build_dl_covariance(cfg, ch, d, k).1.swap_remove(j);
    Ok(DualProblem {
        block,
        fixed_extra,
        own_grad,
        other_power,
        budget: cfg.p_b,
        qos: cfg.r_dl,
        rate: Box::new(rate_with(r_in, ch.h_bj[j].clone())),
    })
}

/// Closed-form `P_u[i][k]` for given multipliers (one Sylvester solve).
#[allow(clippy::too_many_arguments)]
pub fn assemble_and_solve_ul(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    i: usize,
    k: usize,
    lambda: f64,
    mu: f64,
) -> Result<(CMat, BlockProblem, CMat)> {
    let p = ul_problem(cfg, ch, sym, cache, d, 0.0, i, k)?;
    let extra = &p.fixed_extra + &p.own_grad * c64(mu, 0.0);
    let x = p.block.sylvester(lambda, &extra)?.solve()?;
    Ok((x, p.block, extra))
}

/// Closed-form `P_d[j][k]` for given multipliers.
#[allow(clippy::too_many_arguments)]
pub fn assemble_and_solve_dl(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    j: usize,
    k: usize,
    lambda: f64,
    mu: f64,
) -> Result<(CMat, BlockProblem, CMat)> {
    let p = dl_problem(cfg, ch, sym, cache, d, 0.0, j, k)?;
    let extra = &p.fixed_extra + &p.own_grad * c64(mu, 0.0);
    let x = p.block.sylvester(lambda, &extra)?.solve()?;
    Ok((x, p.block, extra))
}

/// Projected subgradient dual loop for `P_u[i][k]`. `xi_now` is the
/// weighted-sum MSE of `d`; the outcome's objective values are on the same
/// scale.
#[allow(clippy::too_many_arguments)]
pub fn subgradient_ul(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    xi_now: f64,
    i: usize,
    k: usize,
    opts: &SubgradientOptions,
) -> Result<SubgradientOutcome> {
    let p = ul_problem(cfg, ch, sym, cache, d, xi_now, i, k)?;
    run_dual_loop(&p, &d.p_u[i][k], opts)
}

/// DL twin of [`subgradient_ul`]; the power multiplier is the shared BS budget.
#[allow(clippy::too_many_arguments)]
pub fn subgradient_dl(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    sym: &SymbolSet,
    cache: &GradientCache,
    d: &DesignState,
    xi_now: f64,
    j: usize,
    k: usize,
    opts: &SubgradientOptions,
) -> Result<SubgradientOutcome> {
    let p = dl_problem(cfg, ch, sym, cache, d, xi_now, j, k)?;
    run_dual_loop(&p, &d.p_d[j][k], opts)
}

/// Result of the radar-code block update.
#[derive(Debug, Clone)]
pub struct RadarUpdate {
    /// New (unprojected) `a[k]` as an `M_r x 1` matrix.
    pub a: CMat,
    pub xi: f64,
    /// True when the QoS-coupled solution raised the objective and the
    /// unconstrained minimiser was used instead.
    pub fell_back: bool,
    pub problem: BlockProblem,
    pub extra: CMat,
}

/// `a'[k] = (A_r + F_r)^{-1} c_r[k]` with the QoS multipliers currently held in `d`.
pub fn solve_radar_code(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    cache: &GradientCache,
    d: &DesignState,
    xi_now: f64,
    k: usize,
) -> Result<RadarUpdate> {
    let cur = CMat::from_column_slice(cfg.m_r, 1, d.a_row(k).as_slice());
    let block = radar_block(cfg, ch, cache, d, k).with_base(xi_now, &cur);
    let fr = FrameRates::new(cfg, ch, d, k)?;
    let mut extra = CMat::zeros(cfg.m_r, 1);
    if cfg.r_ul > 0.0 {
        for i in 0..cfg.num_ul() {
            let g = fr.ul_wrt_a(ch, d, i) * c64(d.duals.mu_u[i][k], 0.0);
            extra += CMat::from_column_slice(cfg.m_r, 1, g.as_slice());
        }
    }
    if cfg.r_dl > 0.0 {
        for j in 0..cfg.num_dl() {
            let g = fr.dl_wrt_a(ch, d, j) * c64(d.duals.mu_d[j][k], 0.0);
            extra += CMat::from_column_slice(cfg.m_r, 1, g.as_slice());
        }
    }
    let a = block.sylvester(0.0, &extra)?.solve()?;
    let xi = block.value(&a);
    let xi_cur = block.value(&cur);
    if xi <= xi_cur || frob(&extra) == 0.0 {
        return Ok(RadarUpdate { a, xi, fell_back: false, problem: block, extra });
    }
    let zero = CMat::zeros(cfg.m_r, 1);
    let a = block.sylvester(0.0, &zero)?.solve()?;
    let xi = block.value(&a);
    Ok(RadarUpdate { a, xi, fell_back: true, problem: block, extra: zero })
}
