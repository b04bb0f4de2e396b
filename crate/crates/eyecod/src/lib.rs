//! Lensless eye-tracking pipeline and its dataflow accelerator at desk
//! scale: coded-mask optics, workload graphs, ROI extraction, layer mapping,
//! a round-level simulator and brute-force oracles.

// `!(x > 0.0)` checks are deliberate: they reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod error;
pub mod io;
pub mod mapper;
pub mod networks;
pub mod optics;
pub mod oracle;
pub mod roi;
pub mod sim;
pub mod tensor;
pub mod workload;

pub use error::{Error, Result};
