//! Causal-evidence evaluation engine.
//!
//! Computes epidemiological effect measures from 2x2 tables, checks them for
//! confounding and inconsistency, runs a ten-test causality checklist and
//! maps the result onto legal causation rules.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub use error::{Error, Result};

pub mod checklist;
pub mod confounding;
pub mod effect;
pub mod legal;
pub mod numeric;
pub mod sim;
pub mod study;
pub mod synthesis;
