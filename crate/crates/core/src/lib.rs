//! Residual reinforcement learning guided by LLM task and affordance plans,
//! in a kinematic pick-and-place micro-world.
//!
//! Everything here is `no_std` + `alloc` and free of IO. File formats, the
//! HTTP planner backend and the command-line tool live in the `tale` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod control;
pub mod env;
pub mod explore;
pub mod geometry;
pub mod harness;
pub mod nn;
pub mod planner;
pub mod rng;
