//! Exact truncated multivariate Taylor algebra and interval evaluation.

pub mod interval;
pub mod jet;
pub mod matrix;
pub mod rational;

pub use interval::{IBox, Interval};
pub use jet::{jet_from, Jet, JetJson, Layout};
pub use matrix::{RMatrix, UPoly};
pub use rational::{format_rational, int, parse_rational, rat, Rational};
