//! A configuration together with one channel and symbol realisation.

use crate::config::SystemConfig;
use crate::covariance::RadarStatistics;
use crate::error::Result;
use crate::model::{generate_channels, generate_symbols, ChannelSet, SymbolSet};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub ch: ChannelSet,
    pub sym: SymbolSet,
    pub stats: RadarStatistics,
}

impl Scenario {
    pub fn new(cfg: SystemConfig, ch: ChannelSet, sym: SymbolSet) -> Self {
        let stats = RadarStatistics::new(&cfg, &ch);
        Scenario { cfg, ch, sym, stats }
    }

    /// Channels and symbols drawn from `seed`.
    pub fn generate(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        let ch = generate_channels(cfg, seed)?;
        let sym = generate_symbols(cfg, seed)?;
        Ok(Self::new(cfg.clone(), ch, sym))
    }

    /// Same configuration and symbols, different channels.
    pub fn with_channels(&self, ch: ChannelSet) -> Self {
        Self::new(self.cfg.clone(), ch, self.sym.clone())
    }
}
