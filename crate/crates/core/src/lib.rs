//! Coresets for Nadaraya-Watson kernel regression.
//!
//! A point set `P` of locations with scalar values is compressed into a small
//! weighted proxy `S` such that the kernel regression `reg_S(q)` stays within
//! `eps * M` of `reg_P(q)` wherever the kernel density of `P` exceeds a small
//! threshold `rho`. `M` is the range of the scalar values.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`]: the Gaussian kernel and its Lipschitz constant.
//! * [`data`]: weighted point sets, CSV ingestion and the AR(1) generator.
//! * [`spatial`]: grid cells, neighbourhoods and Morton keys.
//! * [`regress`]: exact and truncated KDE, weighted KDE and regression.
//! * [`coreset`]: random sampling, k-center, Z-order, grid and progressive
//!   constructions together with sizing helpers.
//! * [`eval`]: L-infinity error measurement, empirical checks of the
//!   approximation conditions, and the benchmark/sweep harness.

pub mod coreset;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod regress;
pub mod spatial;

#[cfg(test)]
pub(crate) mod test_support;

pub use coreset::{Coreset, Method, Params, ProgressiveSpec};
pub use data::{Dataset, DatasetStats, Extent, WeightedPoint};
pub use error::{Error, Result};
pub use eval::{ErrorReport, EvalConfig};
pub use kernel::{GaussianKernel, KernelForm};
pub use regress::{EvalContext, Regressor, Truncation};
pub use spatial::{CellIndex, GridSpec};
