//! Per-transaction call tree, reconstructed from record depths.
//!
//! A record at depth d+1 directly after a record at depth d means that
//! record opened a new frame (it must be a call-family opcode). The tree
//! answers `control_reaches(src, dst)`: whether `dst` executed inside the
//! frame opened by the call record `src`.

use crate::trace::TraceRecord;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CallTreeError {
    #[error("record {seq}: depth increases by more than one")]
    MalformedDepth { seq: u64 },
    #[error("record {seq}: depth increase not preceded by a call instruction")]
    NotAfterCall { seq: u64 },
    #[error("record {seq}: depth {depth} is shallower than the transaction's entry depth")]
    BelowEntry { seq: u64, depth: u32 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ControlFlowError {
    #[error("record {seq} did not open a call frame")]
    NotACall { seq: u64 },
    #[error("record {seq} is not part of this transaction")]
    UnknownRecord { seq: u64 },
}

#[derive(Debug)]
struct Frame {
    parent: Option<usize>,
}

#[derive(Debug, Default)]
pub struct CallTree {
    frames: Vec<Frame>,
    /// Record seq -> frame the record executed in.
    record_frame: HashMap<u64, usize>,
    /// Call-record seq -> frame it opened.
    opened_frame: HashMap<u64, usize>,
}

impl CallTree {
    /// Builds the tree for one transaction's records (depths start at the
    /// first record's depth, normally 1).
    pub fn build(records: &[TraceRecord]) -> Result<CallTree, CallTreeError> {
        let mut tree = CallTree::default();
        let Some(first) = records.first() else {
            return Ok(tree);
        };
        let entry_depth = first.depth;
        tree.frames.push(Frame { parent: None });
        // Stack of open frames, innermost last; index i of the stack holds
        // the frame at depth entry_depth + i.
        let mut open: Vec<usize> = vec![0];
        let mut prev: Option<&TraceRecord> = None;
        for r in records {
            if r.depth < entry_depth {
                return Err(CallTreeError::BelowEntry {
                    seq: r.seq,
                    depth: r.depth,
                });
            }
            let level = (r.depth - entry_depth) as usize;
            if level + 1 > open.len() {
                if level + 1 > open.len() + 1 {
                    return Err(CallTreeError::MalformedDepth { seq: r.seq });
                }
                let opener = match prev {
                    Some(p) if p.opcode.is_call() && p.depth + 1 == r.depth => p,
                    _ => return Err(CallTreeError::NotAfterCall { seq: r.seq }),
                };
                let parent = *open.last().unwrap();
                let idx = tree.frames.len();
                tree.frames.push(Frame {
                    parent: Some(parent),
                });
                tree.opened_frame.insert(opener.seq, idx);
                open.push(idx);
            } else {
                open.truncate(level + 1);
            }
            tree.record_frame.insert(r.seq, *open.last().unwrap());
            prev = Some(r);
        }
        Ok(tree)
    }

    /// True when `dst` executed inside the frame that the call record `src`
    /// opened (including nested frames). A record never control-reaches
    /// itself: the call record belongs to the calling frame.
    pub fn control_reaches(&self, src_seq: u64, dst_seq: u64) -> Result<bool, ControlFlowError> {
        let target = *self
            .opened_frame
            .get(&src_seq)
            .ok_or(ControlFlowError::NotACall { seq: src_seq })?;
        let mut frame = Some(
            *self
                .record_frame
                .get(&dst_seq)
                .ok_or(ControlFlowError::UnknownRecord { seq: dst_seq })?,
        );
        while let Some(f) = frame {
            if f == target {
                return Ok(true);
            }
            frame = self.frames[f].parent;
        }
        Ok(false)
    }

    /// Whether the record opened a call frame (a call that actually ran a
    /// callee, rather than failing or hitting a code-less account).
    pub fn opens_frame(&self, seq: u64) -> bool {
        self.opened_frame.contains_key(&seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcode::Opcode;
    use crate::word::Address;

    fn rec(seq: u64, depth: u32, opcode: Opcode) -> TraceRecord {
        TraceRecord {
            opcode,
            pc: seq,
            depth,
            address: Address([1; 20]),
            stack: vec![Default::default(); opcode.operand_arity()],
            result: if opcode.result_arity() == 1 {
                Some(Default::default())
            } else {
                None
            },
            memory: Vec::new(),
            seq,
        }
    }

    #[test]
    fn nested_frames_reach_through_subtrees() {
        // depth:   1      1     2      2     3     1
        // opcode:  PC     CALL  PC     CALL  PC    PC
        let records = vec![
            rec(0, 1, Opcode::PC),
            rec(1, 1, Opcode::CALL),
            rec(2, 2, Opcode::PC),
            rec(3, 2, Opcode::CALL),
            rec(4, 3, Opcode::PC),
            rec(5, 1, Opcode::PC),
        ];
        let tree = CallTree::build(&records).unwrap();
        assert!(tree.control_reaches(1, 2).unwrap());
        assert!(tree.control_reaches(1, 4).unwrap(), "reaches nested frame");
        assert!(tree.control_reaches(3, 4).unwrap());
        assert!(!tree.control_reaches(3, 2).unwrap());
        assert!(!tree.control_reaches(1, 5).unwrap(), "after return");
        assert!(!tree.control_reaches(1, 1).unwrap(), "never reaches itself");
        assert!(tree.opens_frame(1));
        assert!(!tree.opens_frame(0));
    }

    #[test]
    fn call_without_frame_is_not_a_call_source() {
        // A CALL whose next record stays at the same depth opened nothing
        // (failed call or transfer to a code-less account).
        let records = vec![rec(0, 1, Opcode::CALL), rec(1, 1, Opcode::PC)];
        let tree = CallTree::build(&records).unwrap();
        assert_eq!(
            tree.control_reaches(0, 1),
            Err(ControlFlowError::NotACall { seq: 0 })
        );
    }

    #[test]
    fn malformed_depths_are_rejected() {
        let records = vec![rec(0, 1, Opcode::CALL), rec(1, 3, Opcode::PC)];
        assert_eq!(
            CallTree::build(&records).unwrap_err(),
            CallTreeError::MalformedDepth { seq: 1 }
        );
        let records = vec![rec(0, 1, Opcode::PC), rec(1, 2, Opcode::PC)];
        assert_eq!(
            CallTree::build(&records).unwrap_err(),
            CallTreeError::NotAfterCall { seq: 1 }
        );
        let records = vec![rec(0, 2, Opcode::PC), rec(1, 1, Opcode::PC)];
        assert_eq!(
            CallTree::build(&records).unwrap_err(),
            CallTreeError::BelowEntry { seq: 1, depth: 1 }
        );
    }
}
