//! White-box optimization toolkit for wireless precoding experiments.
//!
//! Every optimizer in this crate is a sequence of closed-form, inspectable
//! updates. The modules are:
//!
//! - [`numkernel`]: dense matrices, seeded Gaussian sampling, log-determinants
//!   and spectral norms.
//! - [`cellfree`]: cell-free massive MIMO scenarios, Rayleigh channels, CSI
//!   corruption, SINR/SE metrics and per-station power projection.
//! - [`precoding`]: MRT, WMMSE, the smoothed max-min multicast objective and
//!   its Wirtinger gradient, projected gradient ascent and its unfolded,
//!   step-trained variant.
//! - [`ratereduction`]: coding rates, ReduNet layers built from feature
//!   statistics, and forward MSSA / ISTA blocks.
//! - [`infobottleneck`]: the self-consistent information bottleneck iteration
//!   on discrete joints.
//! - [`horizonopt`]: worst-case contraction of gradient-descent step schedules
//!   on quadratics and the Chebyshev schedule.
//! - [`beliefprop`]: flooding sum-product with an enumeration oracle.

pub mod beliefprop;
pub mod cellfree;
mod error;
pub mod horizonopt;
pub mod infobottleneck;
pub mod numkernel;
pub mod precoding;
pub mod ratereduction;

pub use error::{Error, Result};
pub use numkernel::{ComplexMatrix, Matrix, RealMatrix, RngStream};
