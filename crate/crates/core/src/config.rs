//! Scenario configuration: dimensions, powers, noise levels, weights and
//! iteration budgets, plus the flat TOML file format used by the CLI.
//!
//! Every power-like value in a config file may be written either as a plain
//! linear number or as a string with a `dB` suffix (`"10 dB"`, `"-30dB"`).

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};

/// How the initial precoders are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitScheme {
    Deterministic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    // dimensions
    pub m_r: usize,
    pub n_r: usize,
    pub m_c: usize,
    pub n_c: usize,
    pub ul_antennas: Vec<usize>,
    pub ul_streams: Vec<usize>,
    pub dl_antennas: Vec<usize>,
    pub dl_streams: Vec<usize>,
    /// PRIs (frames) per CPI.
    pub k: usize,
    /// Symbols per frame.
    pub n_symbols: usize,
    pub n_t: usize,
    pub n_rb: usize,
    pub n_rd: usize,
    pub n_u: usize,
    pub n_bm: usize,

    // powers (linear)
    pub p_b: f64,
    pub p_u: f64,
    pub p_r: Vec<f64>,
    pub gamma: Vec<f64>,

    // noise and channel statistics (linear)
    pub sigma2_r: f64,
    pub sigma2_b: f64,
    pub sigma2_d: f64,
    pub sigma2_c: f64,
    pub sigma2_si: f64,
    pub k_b: f64,
    pub kappa: f64,
    pub eta2_csi: f64,
    pub sigma2_rt: f64,
    pub sigma2_bt: f64,
    pub sigma2_bm: f64,
    pub sigma2_iu: f64,
    /// Inter-PRI correlation coefficient of the target gains.
    pub target_corr: f64,
    pub doppler_min: f64,
    pub doppler_max: f64,
    pub direct_mean_b: f64,
    pub direct_var_b: f64,
    pub direct_mean_d: f64,
    pub direct_var_d: f64,

    // objective weights and QoS
    pub alpha_r: Vec<f64>,
    pub alpha_u: Vec<f64>,
    pub alpha_d: Vec<f64>,
    pub r_ul: f64,
    pub r_dl: f64,
    /// Recompute `r_ul`/`r_dl` from the SNRs whenever powers change.
    pub qos_auto: bool,

    // iteration control
    pub ell_max: usize,
    pub iota_max: usize,
    pub t_u_max: usize,
    pub t_d_max: usize,
    pub early_stop: bool,
    pub stop_tol: f64,
    pub stop_window: usize,
    pub dual_cap: f64,
    pub init: InitScheme,
    pub seed: u64,
}

/// Power ratio from decibels.
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Parse `"10"`, `"10 dB"`, `"-3.5dB"` into a linear value.
pub fn parse_quantity(s: &str) -> Result<f64> {
    let t = s.trim();
    let lower = t.to_ascii_lowercase();
    if let Some(num) = lower.strip_suffix("db") {
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad dB value '{s}'")))?;
        Ok(db_to_lin(v))
    } else {
        t.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::defaults()
    }
}

impl SystemConfig {
    /// The reference scenario: 4x4 radar, 4x4 BS, two UL and two DL users.
    pub fn defaults() -> Self {
        let sigma2 = 0.001;
        let snr = db_to_lin(10.0);
        let mut cfg = SystemConfig {
            m_r: 4,
            n_r: 4,
            m_c: 4,
            n_c: 4,
            ul_antennas: vec![2, 2],
            ul_streams: vec![2, 2],
            dl_antennas: vec![2, 2],
            dl_streams: vec![2, 2],
            k: 8,
            n_symbols: 32,
            n_t: 4,
            n_rb: 2,
            n_rd: 3,
            n_u: 2,
            n_bm: 3,
            p_b: snr * sigma2,
            p_u: snr * sigma2,
            p_r: vec![snr * sigma2; 4],
            gamma: vec![db_to_lin(3.0); 4],
            sigma2_r: sigma2,
            sigma2_b: sigma2,
            sigma2_d: sigma2,
            sigma2_c: db_to_lin(20.0) * sigma2,
            sigma2_si: 1.0,
            k_b: 1.0,
            kappa: 1.0,
            eta2_csi: 0.0,
            sigma2_rt: 1.0,
            sigma2_bt: 1.0,
            sigma2_bm: 1.0,
            sigma2_iu: 1.0,
            target_corr: 0.9,
            doppler_min: 0.05,
            doppler_max: 0.325,
            direct_mean_b: 0.1,
            direct_var_b: 0.3,
            direct_mean_d: 0.05,
            direct_var_d: 0.5,
            alpha_r: vec![],
            alpha_u: vec![],
            alpha_d: vec![],
            r_ul: 0.0,
            r_dl: 0.0,
            qos_auto: true,
            ell_max: 2000,
            iota_max: 1,
            t_u_max: 200,
            t_d_max: 200,
            early_stop: true,
            stop_tol: 1e-6,
            stop_window: 10,
            dual_cap: 1e6,
            init: InitScheme::Deterministic,
            seed: 1,
        };
        cfg.set_uniform_weights();
        cfg.refresh_qos();
        cfg
    }

    /// Small scenario used by the oracle suites: 2x2 radar and BS, one UL and
    /// one DL user, four PRIs.
    pub fn reduced() -> Self {
        let mut cfg = Self::defaults();
        cfg.m_r = 2;
        cfg.n_r = 2;
        cfg.m_c = 2;
        cfg.n_c = 2;
        cfg.ul_antennas = vec![2];
        cfg.ul_streams = vec![2];
        cfg.dl_antennas = vec![2];
        cfg.dl_streams = vec![2];
        cfg.k = 4;
        cfg.n_symbols = 8;
        let p = cfg.p_r[0];
        cfg.p_r = vec![p; 2];
        cfg.gamma = vec![db_to_lin(3.0); 2];
        cfg.set_uniform_weights();
        cfg.refresh_qos();
        cfg
    }

    pub fn num_ul(&self) -> usize {
        self.ul_antennas.len()
    }

    pub fn num_dl(&self) -> usize {
        self.dl_antennas.len()
    }

    /// Per-PRI target slot length `M = M_r + M_c`.
    pub fn m(&self) -> usize {
        self.m_r + self.m_c
    }

    /// Symbol slot of the UL symbols leaking into the radar CUT.
    pub fn slot_ul_direct(&self) -> usize {
        self.n_t - self.n_u
    }

    /// Symbol slot of the DL symbols on the BS-to-radar direct path.
    pub fn slot_dl_direct(&self) -> usize {
        self.n_t - self.n_bm
    }

    pub fn snr_ul(&self) -> f64 {
        self.p_u / self.sigma2_b
    }

    pub fn snr_dl(&self) -> f64 {
        self.p_b / self.sigma2_d
    }

    /// Mean per-Tx radar SNR.
    pub fn snr_r(&self) -> f64 {
        self.p_r.iter().sum::<f64>() / self.p_r.len().max(1) as f64 / self.sigma2_r
    }

    pub fn cnr(&self) -> f64 {
        self.sigma2_c / self.sigma2_r
    }

    pub fn set_snr_r(&mut self, lin: f64) {
        self.p_r = vec![lin * self.sigma2_r; self.m_r];
        self.refresh_qos();
    }

    pub fn set_cnr(&mut self, lin: f64) {
        self.sigma2_c = lin * self.sigma2_r;
    }

    pub fn set_uniform_weights(&mut self) {
        let total = (self.n_r + self.num_ul() + self.num_dl()) as f64;
        let w = 1.0 / total;
        self.alpha_r = vec![w; self.n_r];
        self.alpha_u = vec![w; self.num_ul()];
        self.alpha_d = vec![w; self.num_dl()];
    }

    pub fn refresh_qos(&mut self) {
        if self.qos_auto {
            let (ul, dl) = crate::experiments::qos_thresholds(self);
            self.r_ul = ul;
            self.r_dl = dl;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("m_r", self.m_r),
            ("n_r", self.n_r),
            ("m_c", self.m_c),
            ("n_c", self.n_c),
            ("k", self.k),
            ("n_symbols", self.n_symbols),
            ("number of UL users", self.num_ul()),
            ("number of DL users", self.num_dl()),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.ul_streams.len() != self.num_ul() || self.dl_streams.len() != self.num_dl() {
            return bad("per-user stream lists must match the antenna lists".into());
        }
        for (i, (&n, &d)) in self.ul_antennas.iter().zip(&self.ul_streams).enumerate() {
            if n == 0 || d == 0 || d > n {
                return bad(format!("UL user {i}: need 1 <= streams <= antennas, got {d}/{n}"));
            }
        }
        for (j, (&n, &d)) in self.dl_antennas.iter().zip(&self.dl_streams).enumerate() {
            if n == 0 || d == 0 || d > n {
                return bad(format!("DL user {j}: need 1 <= streams <= antennas, got {d}/{n}"));
            }
        }
        if self.m_c < self.dl_streams.iter().sum::<usize>() {
            return bad("m_c must be at least the total number of DL streams".into());
        }
        if self.n_c < self.ul_antennas.iter().sum::<usize>() {
            return bad("n_c must be at least the total number of UL antennas".into());
        }
        for (name, v) in [("n_t", self.n_t), ("n_rb", self.n_rb), ("n_rd", self.n_rd)] {
            if v >= self.n_symbols {
                return bad(format!("{name} = {v} must be below n_symbols = {}", self.n_symbols));
            }
        }
        if self.n_u > self.n_t || self.n_bm > self.n_t {
            return bad("delay indices n_u and n_bm must not exceed n_t".into());
        }
        if self.p_r.len() != self.m_r || self.gamma.len() != self.m_r {
            return bad("p_r and gamma need one entry per radar Tx".into());
        }
        for &g in &self.gamma {
            if !(1.0..=self.k as f64).contains(&g) {
                return bad(format!("PAR bound {g} outside [1, K]"));
            }
        }
        let positive = [
            ("p_b", self.p_b),
            ("p_u", self.p_u),
            ("sigma2_r", self.sigma2_r),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_d", self.sigma2_d),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.p_r.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("radar powers must be positive".into());
        }
        let nonneg = [
            ("sigma2_c", self.sigma2_c),
            ("sigma2_si", self.sigma2_si),
            ("k_b", self.k_b),
            ("kappa", self.kappa),
            ("eta2_csi", self.eta2_csi),
            ("sigma2_rt", self.sigma2_rt),
            ("sigma2_bt", self.sigma2_bt),
            ("sigma2_bm", self.sigma2_bm),
            ("sigma2_iu", self.sigma2_iu),
            ("direct_var_b", self.direct_var_b),
            ("direct_var_d", self.direct_var_d),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.target_corr) && self.target_corr != 1.0 {
            return bad("target_corr must lie in [0, 1]".into());
        }
        if self.doppler_min > self.doppler_max {
            return bad("doppler_min exceeds doppler_max".into());
        }
        if self.alpha_r.len() != self.n_r
            || self.alpha_u.len() != self.num_ul()
            || self.alpha_d.len() != self.num_dl()
        {
            return bad("weight vectors must match n_r and the user counts".into());
        }
        if self
            .alpha_r
            .iter()
            .chain(&self.alpha_u)
            .chain(&self.alpha_d)
            .any(|&w| !(w >= 0.0 && w.is_finite()))
        {
            return bad("weights must be non-negative".into());
        }
        if self.iota_max == 0 || self.t_u_max == 0 || self.t_d_max == 0 {
            return bad("iota_max, t_u_max and t_d_max must be at least 1".into());
        }
        if self.stop_window == 0 {
            return bad("stop_window must be at least 1".into());
        }
        Ok(())
    }

    /// Parse a flat TOML config; keys not present keep their default value.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut cfg = Self::defaults();
        cfg.apply_table(&table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Apply `key = value` overrides (values use the config-file syntax).
    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let mut text = String::new();
        for (k, v) in pairs {
            let needs_quotes = v.parse::<f64>().is_err()
                && !v.starts_with('[')
                && v != "true"
                && v != "false"
                && !v.starts_with('"');
            if needs_quotes {
                text.push_str(&format!("{k} = \"{v}\"\n"));
            } else {
                text.push_str(&format!("{k} = {v}\n"));
            }
        }
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        self.apply_table(&table)?;
        self.validate()
    }

    fn apply_table(&mut self, t: &Table) -> Result<()> {
        for key in t.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse(format!("unknown config key '{key}'")));
            }
        }
        macro_rules! usize_key {
            ($name:literal, $field:ident) => {
                if let Some(v) = t.get($name) {
                    self.$field = as_usize(v, $name)?;
                }
            };
        }
        macro_rules! f64_key {
            ($name:literal, $field:ident) => {
                if let Some(v) = t.get($name) {
                    self.$field = as_f64(v, $name)?;
                }
            };
        }
        usize_key!("m_r", m_r);
        usize_key!("n_r", n_r);
        usize_key!("m_c", m_c);
        usize_key!("n_c", n_c);
        usize_key!("k", k);
        usize_key!("n_symbols", n_symbols);
        usize_key!("n_t", n_t);
        usize_key!("n_rb", n_rb);
        usize_key!("n_rd", n_rd);
        usize_key!("n_u", n_u);
        usize_key!("n_bm", n_bm);
        usize_key!("ell_max", ell_max);
        usize_key!("iota_max", iota_max);
        usize_key!("t_u_max", t_u_max);
        usize_key!("t_d_max", t_d_max);
        usize_key!("stop_window", stop_window);

        let num_ul = match t.get("num_ul") {
            Some(v) => as_usize(v, "num_ul")?,
            None => self.num_ul(),
        };
        let num_dl = match t.get("num_dl") {
            Some(v) => as_usize(v, "num_dl")?,
            None => self.num_dl(),
        };
        self.ul_antennas = usize_list(t.get("ul_antennas"), "ul_antennas", num_ul, self.ul_antennas[0])?;
        self.ul_streams = usize_list(t.get("ul_streams"), "ul_streams", num_ul, self.ul_streams[0])?;
        self.dl_antennas = usize_list(t.get("dl_antennas"), "dl_antennas", num_dl, self.dl_antennas[0])?;
        self.dl_streams = usize_list(t.get("dl_streams"), "dl_streams", num_dl, self.dl_streams[0])?;

        f64_key!("sigma2_r", sigma2_r);
        f64_key!("sigma2_b", sigma2_b);
        f64_key!("sigma2_d", sigma2_d);
        f64_key!("sigma2_c", sigma2_c);
        f64_key!("sigma2_si", sigma2_si);
        f64_key!("k_b", k_b);
        f64_key!("kappa", kappa);
        f64_key!("eta2_csi", eta2_csi);
        f64_key!("sigma2_rt", sigma2_rt);
        f64_key!("sigma2_bt", sigma2_bt);
        f64_key!("sigma2_bm", sigma2_bm);
        f64_key!("sigma2_iu", sigma2_iu);
        f64_key!("target_corr", target_corr);
        f64_key!("doppler_min", doppler_min);
        f64_key!("doppler_max", doppler_max);
        f64_key!("direct_mean_b", direct_mean_b);
        f64_key!("direct_var_b", direct_var_b);
        f64_key!("direct_mean_d", direct_mean_d);
        f64_key!("direct_var_d", direct_var_d);
        f64_key!("stop_tol", stop_tol);
        f64_key!("dual_cap", dual_cap);
        f64_key!("p_b", p_b);
        f64_key!("p_u", p_u);

        let p_r0 = self.p_r.first().copied().unwrap_or(0.01);
        self.p_r = f64_list(t.get("p_r"), "p_r", self.m_r, p_r0, &self.p_r)?;
        let g0 = self.gamma.first().copied().unwrap_or(db_to_lin(3.0));
        self.gamma = f64_list(t.get("gamma"), "gamma", self.m_r, g0, &self.gamma)?;

        // SNR / CNR shorthands are applied after the noise levels.
        if let Some(v) = t.get("snr_ul") {
            self.p_u = as_f64(v, "snr_ul")? * self.sigma2_b;
        }
        if let Some(v) = t.get("snr_dl") {
            self.p_b = as_f64(v, "snr_dl")? * self.sigma2_d;
        }
        if let Some(v) = t.get("snr_r") {
            self.p_r = vec![as_f64(v, "snr_r")? * self.sigma2_r; self.m_r];
        }
        if let Some(v) = t.get("cnr") {
            self.sigma2_c = as_f64(v, "cnr")? * self.sigma2_r;
        }

        if let Some(v) = t.get("early_stop") {
            self.early_stop = v
                .as_bool()
                .ok_or_else(|| Error::Parse("early_stop must be a boolean".into()))?;
        }
        if let Some(v) = t.get("init") {
            self.init = match v.as_str() {
                Some("deterministic") => InitScheme::Deterministic,
                Some("random") => InitScheme::Random,
                _ => return Err(Error::Parse("init must be \"deterministic\" or \"random\"".into())),
            };
        }
        if let Some(v) = t.get("seed") {
            let s = v
                .as_integer()
                .ok_or_else(|| Error::Parse("seed must be an integer".into()))?;
            if s < 0 {
                return Err(Error::Parse("seed must be non-negative".into()));
            }
            self.seed = s as u64;
        }

        let weights_given = ["alpha_r", "alpha_u", "alpha_d"].iter().any(|k| t.contains_key(*k));
        if weights_given {
            let current_r = self.alpha_r.clone();
            let current_u = self.alpha_u.clone();
            let current_d = self.alpha_d.clone();
            self.set_uniform_weights();
            let w = self.alpha_r.first().copied().unwrap_or(0.0);
            self.alpha_r = weight_list(t.get("alpha_r"), "alpha_r", self.n_r, w, &current_r)?;
            self.alpha_u = weight_list(t.get("alpha_u"), "alpha_u", self.num_ul(), w, &current_u)?;
            self.alpha_d = weight_list(t.get("alpha_d"), "alpha_d", self.num_dl(), w, &current_d)?;
        } else if self.alpha_r.len() != self.n_r
            || self.alpha_u.len() != self.num_ul()
            || self.alpha_d.len() != self.num_dl()
        {
            self.set_uniform_weights();
        }

        for (name, field) in [("r_ul", 0usize), ("r_dl", 1)] {
            if let Some(v) = t.get(name) {
                if v.as_str() == Some("auto") {
                    self.qos_auto = true;
                } else {
                    let x = as_f64(v, name)?;
                    self.qos_auto = false;
                    if field == 0 {
                        self.r_ul = x;
                    } else {
                        self.r_dl = x;
                    }
                }
            }
        }
        self.refresh_qos();
        Ok(())
    }

    /// Render as a flat TOML document (linear values).
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let list_u = |v: &[usize]| format!("[{}]", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", "));
        let list_f = |v: &[f64]| format!("[{}]", v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(", "));
        s.push_str("# dimensions\n");
        for (k, v) in [
            ("m_r", self.m_r),
            ("n_r", self.n_r),
            ("m_c", self.m_c),
            ("n_c", self.n_c),
            ("num_ul", self.num_ul()),
            ("num_dl", self.num_dl()),
        ] {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("ul_antennas = {}\n", list_u(&self.ul_antennas)));
        s.push_str(&format!("ul_streams = {}\n", list_u(&self.ul_streams)));
        s.push_str(&format!("dl_antennas = {}\n", list_u(&self.dl_antennas)));
        s.push_str(&format!("dl_streams = {}\n", list_u(&self.dl_streams)));
        for (k, v) in [
            ("k", self.k),
            ("n_symbols", self.n_symbols),
            ("n_t", self.n_t),
            ("n_rb", self.n_rb),
            ("n_rd", self.n_rd),
            ("n_u", self.n_u),
            ("n_bm", self.n_bm),
        ] {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str("\n# powers (linear; \"x dB\" strings are also accepted)\n");
        s.push_str(&format!("p_b = {}\n", fmt_f(self.p_b)));
        s.push_str(&format!("p_u = {}\n", fmt_f(self.p_u)));
        s.push_str(&format!("p_r = {}\n", list_f(&self.p_r)));
        s.push_str(&format!("gamma = {}\n", list_f(&self.gamma)));
        s.push_str("\n# noise and channel statistics\n");
        for (k, v) in [
            ("sigma2_r", self.sigma2_r),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_d", self.sigma2_d),
            ("sigma2_c", self.sigma2_c),
            ("sigma2_si", self.sigma2_si),
            ("k_b", self.k_b),
            ("kappa", self.kappa),
            ("eta2_csi", self.eta2_csi),
            ("sigma2_rt", self.sigma2_rt),
            ("sigma2_bt", self.sigma2_bt),
            ("sigma2_bm", self.sigma2_bm),
            ("sigma2_iu", self.sigma2_iu),
            ("target_corr", self.target_corr),
            ("doppler_min", self.doppler_min),
            ("doppler_max", self.doppler_max),
            ("direct_mean_b", self.direct_mean_b),
            ("direct_var_b", self.direct_var_b),
            ("direct_mean_d", self.direct_mean_d),
            ("direct_var_d", self.direct_var_d),
        ] {
            s.push_str(&format!("{k} = {}\n", fmt_f(v)));
        }
        s.push_str("\n# objective weights and QoS thresholds (\"auto\" derives them from the SNRs)\n");
        s.push_str(&format!("alpha_r = {}\n", list_f(&self.alpha_r)));
        s.push_str(&format!("alpha_u = {}\n", list_f(&self.alpha_u)));
        s.push_str(&format!("alpha_d = {}\n", list_f(&self.alpha_d)));
        if self.qos_auto {
            s.push_str("r_ul = \"auto\"\nr_dl = \"auto\"\n");
        } else {
            s.push_str(&format!("r_ul = {}\nr_dl = {}\n", fmt_f(self.r_ul), fmt_f(self.r_dl)));
        }
        s.push_str("\n# iteration control\n");
        for (k, v) in [
            ("ell_max", self.ell_max),
            ("iota_max", self.iota_max),
            ("t_u_max", self.t_u_max),
            ("t_d_max", self.t_d_max),
            ("stop_window", self.stop_window),
        ] {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("early_stop = {}\n", self.early_stop));
        s.push_str(&format!("stop_tol = {}\n", fmt_f(self.stop_tol)));
        s.push_str(&format!("dual_cap = {}\n", fmt_f(self.dual_cap)));
        let init = match self.init {
            InitScheme::Deterministic => "deterministic",
            InitScheme::Random => "random",
        };
        s.push_str(&format!("init = \"{init}\"\n"));
        s.push_str(&format!("seed = {}\n", self.seed));
        s
    }
}

fn fmt_f(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

const KNOWN_KEYS: &[&str] = &[
    "m_r", "n_r", "m_c", "n_c", "num_ul", "num_dl", "ul_antennas", "ul_streams", "dl_antennas",
    "dl_streams", "k", "n_symbols", "n_t", "n_rb", "n_rd", "n_u", "n_bm", "p_b", "p_u", "p_r",
    "gamma", "snr_ul", "snr_dl", "snr_r", "cnr", "sigma2_r", "sigma2_b", "sigma2_d", "sigma2_c",
    "sigma2_si", "k_b", "kappa", "eta2_csi", "sigma2_rt", "sigma2_bt", "sigma2_bm", "sigma2_iu",
    "target_corr", "doppler_min", "doppler_max", "direct_mean_b", "direct_var_b", "direct_mean_d",
    "direct_var_d", "alpha_r", "alpha_u", "alpha_d", "r_ul", "r_dl", "ell_max", "iota_max",
    "t_u_max", "t_d_max", "early_stop", "stop_tol", "stop_window", "dual_cap", "init", "seed",
];

fn as_f64(v: &Value, name: &str) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => parse_quantity(s),
        _ => Err(Error::Parse(format!("{name}: expected a number or a \"x dB\" string"))),
    }
}

fn as_usize(v: &Value, name: &str) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::Parse(format!("{name}: expected a non-negative integer"))),
    }
}

fn usize_list(v: Option<&Value>, name: &str, n: usize, fill: usize) -> Result<Vec<usize>> {
    match v {
        None => Ok(vec![fill; n]),
        Some(Value::Array(a)) => {
            let out = a.iter().map(|x| as_usize(x, name)).collect::<Result<Vec<_>>>()?;
            if out.len() != n {
                return Err(Error::Parse(format!("{name}: expected {n} entries, got {}", out.len())));
            }
            Ok(out)
        }
        Some(x) => Ok(vec![as_usize(x, name)?; n]),
    }
}

fn f64_list(v: Option<&Value>, name: &str, n: usize, fill: f64, current: &[f64]) -> Result<Vec<f64>> {
    match v {
        None if current.len() == n => Ok(current.to_vec()),
        None => Ok(vec![fill; n]),
        Some(Value::Array(a)) => {
            let out = a.iter().map(|x| as_f64(x, name)).collect::<Result<Vec<_>>>()?;
            if out.len() != n {
                return Err(Error::Parse(format!("{name}: expected {n} entries, got {}", out.len())));
            }
            Ok(out)
        }
        Some(x) => Ok(vec![as_f64(x, name)?; n]),
    }
}

fn weight_list(v: Option<&Value>, name: &str, n: usize, uniform: f64, current: &[f64]) -> Result<Vec<f64>> {
    match v {
        Some(Value::String(s)) if s == "uniform" => Ok(vec![uniform; n]),
        other => f64_list(other, name, n, uniform, current),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SystemConfig::defaults().validate().unwrap();
        SystemConfig::reduced().validate().unwrap();
    }

    #[test]
    fn db_strings() {
        assert!((parse_quantity("10 dB").unwrap() - 10.0).abs() < 1e-12);
        assert!((parse_quantity("-30dB").unwrap() - 1e-3).abs() < 1e-15);
        assert_eq!(parse_quantity("0.25").unwrap(), 0.25);
        assert!(parse_quantity("ten").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SystemConfig::defaults();
        let back = SystemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn shorthand_keys() {
        let cfg = SystemConfig::from_toml_str("snr_r = \"0 dB\"\ncnr = \"40 dB\"\nsigma2_si = \"-30 dB\"\n").unwrap();
        assert!((cfg.p_r[0] - 0.001).abs() < 1e-15);
        assert!((cfg.sigma2_c - 10.0).abs() < 1e-9);
        assert!((cfg.sigma2_si - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SystemConfig::from_toml_str("bogus = 1").is_err());
        assert!(SystemConfig::from_toml_str("ul_streams = [3, 3]").is_err());
        assert!(SystemConfig::from_toml_str("gamma = 9.0").is_err());
        assert!(SystemConfig::from_toml_str("n_c = 3").is_err());
    }

    #[test]
    fn uniform_weights_follow_dimensions() {
        let cfg = SystemConfig::from_toml_str("n_r = 2\nnum_ul = 1\nul_antennas = [2]\nul_streams = [1]").unwrap();
        assert_eq!(cfg.alpha_r.len(), 2);
        assert!((cfg.alpha_r[0] - 1.0 / 5.0).abs() < 1e-15);
    }
}
