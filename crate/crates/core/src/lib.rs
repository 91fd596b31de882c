// Negated comparisons such as `!(x <= limit)` deliberately treat NaN as failing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod composite;
pub mod direct;
pub mod error;
pub mod generalized;
pub mod io;
pub mod linalg;
pub mod pencil;
pub mod problems;
pub mod report;
pub mod run;
pub mod select;
pub mod smw;
pub mod verify;

pub use error::{Error, Result};
