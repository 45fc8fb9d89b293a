//! Goal-conditioned reinforcement learning on a desk-scale manipulation
//! simulator, with exploration by look-ahead search over learned skill
//! models (HERLASE) and the HER and PAS baselines.

pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod lookahead;
pub mod nn;
pub mod rl;
pub mod skills;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
