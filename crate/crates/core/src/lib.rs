//! Task-driven robot co-design.
//!
//! The pipeline turns a driving task into perception requirements (via the
//! occupancy queries a motion planner issues), matches them against modelled
//! sensor coverage, selects and places sensors by exact multi-weighted set
//! cover, and embeds the whole chain in a monotone co-design diagram.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod codesign;
pub mod commands;
pub mod error;
pub mod geom;
pub mod percperf;
pub mod percreq;
pub mod planner;
pub mod plot;
pub mod select;
pub mod store;
pub mod util;
pub mod world;

pub use error::{Error, Result};
