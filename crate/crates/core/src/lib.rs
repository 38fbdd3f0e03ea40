#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod env;
pub mod harness;
pub mod nn;
pub mod patterns;
pub mod physics;
pub mod ppo;
pub mod seed;
pub mod twin;
