//! Runtime attack detection for EVM execution traces.
//!
//! The crate provides an attack-pattern language over EVM instruction
//! traces, a streaming match engine with control-flow and taint tracking, a
//! deterministic mini-EVM for reproducing known exploit scenarios, and a
//! commit-reveal governance state machine for maintaining the active
//! pattern set.

pub mod engine;
pub mod evm;
pub mod flow;
pub mod governance;
pub mod opcode;
pub mod pattern;
pub mod scenario;
pub mod trace;
pub mod word;
