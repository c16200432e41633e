//! Joint design of statistical MIMO radar codes and full-duplex multi-user
//! MIMO precoders.
//!
//! The design maximises a weighted sum of the radar, uplink and downlink
//! mutual informations by block coordinate descent over an equivalent
//! weighted-MMSE problem: closed-form Sylvester solutions for the precoders and
//! code rows, dual subgradient loops for the power and QoS constraints, and a
//! nearest-vector projection enforcing the radar PAR limits.

pub mod config;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod inner;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod oracles;
pub mod par;
pub mod scenario;
#[doc(hidden)]
pub mod testutil;

pub use config::{InitScheme, SystemConfig};
pub use error::{Error, Result};
pub use model::{ChannelSet, DesignState, SymbolSet};
pub use scenario::Scenario;
