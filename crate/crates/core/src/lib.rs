#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Desk-scale diabetes-risk prediction pipeline.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod distributed;
pub mod error;
pub mod explain;
pub mod hyperopt;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod privacy;
pub mod rng;
pub mod serve;

pub use error::{Error, Result};
