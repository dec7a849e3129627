#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod chains;
pub mod cli;
pub mod drift;
pub mod error;
pub mod numeric;
pub mod planner;
pub mod ratebounds;
pub mod regen;
pub mod seeds;
pub mod verify;
