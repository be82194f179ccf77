//! Primal-dual policy optimization for finite-horizon linear mixture
//! constrained MDPs with adversarial rewards (PD-POWERS), together with
//! exact dynamic-programming oracles and a multi-seed experiment harness.
//!
//! Module map:
//! - [`model`]: CMDP types, the integrated feature `phi_V`, instance validation
//! - [`environment`]: the survival-chain benchmark, a tiny testbed, seeded rollouts
//! - [`estimation`]: weighted ridge regression, variance estimates, confidence radii
//! - [`learner`]: the episode loop with mirror-descent and dual updates
//! - [`oracle`]: exact policy evaluation and the constrained comparator
//! - [`harness`], [`metrics`], [`plot`]: configuration, CSV output and SVG charts

pub mod environment;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod learner;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod plot;

pub use error::{CmdpError, Result};
