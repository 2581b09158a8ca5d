//! Flow extractors over traces: the per-transaction call tree (control-flow
//! reachability) and the taint shadow machine (data-flow reachability).
//! Both the streaming match engine and the brute-force reference checker sit
//! on top of these, so a bug here shows up on both sides — the engine/oracle
//! comparison only guards the matching logic itself.

pub mod call_tree;
pub mod taint;

pub use call_tree::{CallTree, CallTreeError, ControlFlowError};
pub use taint::{TaintMachine, TaintTag};
