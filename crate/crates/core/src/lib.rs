//! Minimum symbol error probability precoding for phase-quantized,
//! constant-envelope multiuser MIMO downlinks with PSK signalling.

pub mod bnb;
pub mod convex;
pub mod error;
pub mod model;
pub mod objectives;
pub mod par;
pub mod projection;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
