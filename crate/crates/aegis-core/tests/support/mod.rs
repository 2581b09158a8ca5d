//! Shared generators and harnesses for the integration test suites. Each
//! test binary uses a different subset, so unused items are expected.
#![allow(dead_code)]

pub mod gov_model;
pub mod pattern_gen;
pub mod taint_props;
pub mod trace_gen;
