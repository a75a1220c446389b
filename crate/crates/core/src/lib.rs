//! Level set topology optimization driven by a damped, generalized wave equation on a fixed
//! P1 triangle mesh.

// `!(x > 0.0)` is used on purpose so NaN fails validation; element loops index like the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod constraints;
pub mod elasticity;
pub mod error;
pub mod export;
pub mod fem;
pub mod levelset;
pub mod mesh;
pub mod optimizer;
pub mod preset;
pub mod sensitivity;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use optimizer::{History, HistoryRow, Optimizer, RunConfig};
pub use preset::{preset, PresetId};
