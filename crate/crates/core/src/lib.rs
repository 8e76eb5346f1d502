//! Vector quantization for maximum inner product search, with norm-explicit
//! quantization (NEQ) on top of PQ, OPQ, RQ and AQ.

pub mod clustering;
pub mod config;
pub mod data;
pub mod error;
pub mod error_lab;
pub mod eval;
pub mod experiment;
pub mod imi;
pub mod linalg;
pub mod neq;
pub mod par;
pub mod rng;
pub mod storage;
pub mod vq;

pub use error::{Error, Result};
