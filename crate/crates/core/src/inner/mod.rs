//! Block solvers of the weighted-sum MSE minimisation: filter/weight caches,
//! per-block quadratic problems, rate linearisation, Sylvester solves and the
//! dual subgradient loops.

pub mod block;
pub mod cache;
pub mod rates;
pub mod subgradient;
pub mod sylvester;

pub use block::{gradients_wsmse, BlockProblem, WsmseGradients};
pub use cache::{GradientCache, XiParts};
pub use rates::{linearized_rate_gradients, FrameRates, LinearizedRateGradients};
pub use subgradient::{
    assemble_and_solve_dl, assemble_and_solve_ul, polyak_step, solve_radar_code, subgradient_dl,
    subgradient_ul, RadarUpdate, SubgradientOptions, SubgradientOutcome,
};
pub use sylvester::SylvesterSystem;
