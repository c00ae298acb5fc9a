#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command line and HTTP front ends for the `rankroute` library.

pub mod api;
pub mod cli;
pub mod config;
pub mod provider_spec;
pub mod service;
