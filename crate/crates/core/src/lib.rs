//! Fog-layer ECG monitoring pipeline.
//!
//! Samples are synthesized (or loaded from CSV), grouped into fixed-size
//! batches by the fog node, analysed for HRV and wave intervals, stored
//! locally and forwarded over an intermittent link to an ordered cloud store.
//! The `eval` module reproduces the accuracy, bandwidth and power arithmetic
//! used to assess the system.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod delineation;
pub mod eval;
pub mod fog;
pub mod hrv;
pub mod netsim;
pub mod signal;
pub mod sim;
