//! Variable-bias learning for binary linear programs.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the canonical binary LP and its bipartite encoding.
//! * [`generate`] builds GISP benchmark instances and small random BLPs.
//! * [`io`] reads and writes instances, labels, models and reports.
//! * [`simplex`] solves LP relaxations under variable fixings.
//! * [`bnb`] is the branch-and-bound search, solution pools and metrics.
//! * [`bias`] turns solution pools into bias vectors and class labels.
//! * [`gnn`] is the bipartite message-passing network with its own
//!   reverse-mode gradient engine and training loop.
//! * [`guidance`] maps predictions onto node scores, warm starts and
//!   branching priorities.
//! * [`mwu`] is the multiplicative-weights feasibility routine and the
//!   MAE bound check built on top of it.
//! * [`eval`] compares paired solve reports.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bias;
pub mod bnb;
pub mod error;
pub mod eval;
pub mod generate;
pub mod gnn;
pub mod guidance;
pub mod io;
pub mod model;
pub mod mwu;
pub mod simplex;

pub use error::{Error, Result};
