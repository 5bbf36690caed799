// `!(a > b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod fields;
pub mod net;
pub mod problem;
pub mod sampling;
pub mod singular;
pub mod train;
