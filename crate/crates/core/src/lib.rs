//! Deterministic discrete-event simulator for mobile ad-hoc networks, comparing
//! sub-6 GHz omnidirectional links with directional millimeter-wave links.

// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engine;
pub mod metrics;
pub mod mobility;
pub mod propagation;
pub mod radio;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod traffic;
