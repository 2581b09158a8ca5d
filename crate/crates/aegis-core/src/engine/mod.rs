//! Streaming pattern-match engine.
//!
//! The engine consumes transactions one record at a time and maintains
//! partial matches: prefixes of a pattern's endpoint chain bound to concrete
//! records. For every record the phases run in a fixed order:
//!
//! 1. frame-sync the taint machine;
//! 2. sink phase — try to advance each partial match whose pending relation
//!    accepts this record as destination (non-destructively: the shorter
//!    prefix stays alive for later alternatives);
//! 3. propagate the record's effects through the taint machine;
//! 4. introduce phase — seed new partial matches where this record can be a
//!    pattern's first endpoint, and mark the record as taint source for any
//!    data-flow relation whose source it just became.
//!
//! Checking sinks before introducing sources means a record never relates to
//! itself. Endpoints of a match are strictly increasing in sequence number,
//! since every relation kind only accepts destinations after its source.
//!
//! At a transaction boundary partial matches that can no longer complete are
//! discarded: those waiting on control flow (which cannot span transactions)
//! and those waiting on data flow whose taint left no trace in storage (the
//! only state that survives the boundary). This is garbage collection, not
//! semantics — the dropped prefixes are exactly those no future record can
//! extend.

pub mod oracle;

use crate::flow::{CallTree, CallTreeError, TaintMachine, TaintTag};
use crate::pattern::{
    CmpOp, Comparison, NamedPattern, Operand, PatternId, RelationKind, Side, WhereClause,
};
use crate::trace::{read_accessor, TraceRecord, TransactionContext, TransactionTrace, Value};
use crate::word::Hash32;
use num_bigint::BigInt;
use std::collections::HashSet;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_HISTORY_CAP: usize = 4096;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("malformed trace: {0}")]
    CallTree(#[from] CallTreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Revert,
}

/// A completed pattern instance; `endpoints` are the bound records'
/// sequence numbers in chain order, `tx_hash` the transaction in which the
/// final endpoint landed (the transaction a monitor would revert).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub pattern: PatternId,
    pub pattern_name: String,
    pub endpoints: Vec<u64>,
    pub tx_hash: Hash32,
}

#[derive(Clone, Debug)]
pub struct TxReport {
    pub verdict: Verdict,
    pub matches: Vec<Match>,
}

#[derive(Clone)]
struct Endpoint {
    seq: u64,
    record: Arc<TraceRecord>,
    tx: Arc<TransactionContext>,
    block: crate::trace::BlockContext,
}

#[derive(Clone)]
struct Partial {
    pattern_idx: usize,
    /// Relation awaiting its destination; equals `endpoints.len() - 1`.
    next_step: usize,
    endpoints: Vec<Endpoint>,
}

impl Partial {
    fn key(&self) -> (usize, usize, Vec<u64>) {
        (
            self.pattern_idx,
            self.next_step,
            self.endpoints.iter().map(|e| e.seq).collect(),
        )
    }
}

pub struct Engine {
    patterns: Vec<NamedPattern>,
    taint: TaintMachine,
    partials: Vec<Partial>,
    /// Keys of everything in `partials`, kept in sync so deduplication does
    /// not rescan the whole set on every record.
    seen: HashSet<(usize, usize, Vec<u64>)>,
    matches: Vec<Match>,
    history_cap: usize,
}

impl Engine {
    pub fn new(patterns: Vec<NamedPattern>, history_cap: usize) -> Engine {
        Engine {
            patterns,
            taint: TaintMachine::new(),
            partials: Vec::new(),
            seen: HashSet::new(),
            matches: Vec::new(),
            history_cap,
        }
    }

    pub fn patterns(&self) -> &[NamedPattern] {
        &self.patterns
    }

    pub fn matches(&self) -> &[Match] {
        &self.matches
    }

    /// Number of partial matches currently alive (diagnostics).
    pub fn pending_partials(&self) -> usize {
        self.partials.len()
    }

    pub fn taint(&self) -> &TaintMachine {
        &self.taint
    }

    /// Processes one transaction; the report's verdict says whether any
    /// pattern completed inside it.
    pub fn process_transaction(&mut self, trace: &TransactionTrace) -> Result<TxReport, EngineError> {
        let tree = CallTree::build(&trace.records)?;
        self.taint.reset_volatile();
        let tx = Arc::new(trace.tx.clone());
        let mut tx_matches: Vec<Match> = Vec::new();

        for record in &trace.records {
            self.taint.begin_record(record);
            // One shared copy for every endpoint bound to this record.
            let record_arc = Arc::new(record.clone());

            // --- sink phase ---
            let mut advanced: Vec<Partial> = Vec::new();
            let mut introductions: Vec<TaintTag> = Vec::new();
            for pi in 0..self.partials.len() {
                let pm = &self.partials[pi];
                let pattern = &self.patterns[pm.pattern_idx];
                let rel = &pattern.ast.relations[pm.next_step];
                if record.opcode != rel.dst_opcode {
                    continue;
                }
                let src = &pm.endpoints[pm.next_step];
                let related = match rel.kind {
                    RelationKind::ControlFlow => {
                        tree.control_reaches(src.seq, record.seq).unwrap_or(false)
                    }
                    RelationKind::Follows => record.seq > src.seq,
                    RelationKind::DataFlow => {
                        let tag = (pattern.id, pm.next_step, src.seq);
                        self.taint.taint_check(record, &tag)
                    }
                };
                if !related {
                    continue;
                }
                if let Some(w) = &rel.where_clause {
                    let dst_ep = Endpoint {
                        seq: record.seq,
                        record: record_arc.clone(),
                        tx: tx.clone(),
                        block: trace.block,
                    };
                    if !eval_where(w, &pm.endpoints, &dst_ep) {
                        continue;
                    }
                }
                let mut next = pm.clone();
                next.endpoints.push(Endpoint {
                    seq: record.seq,
                    record: record_arc.clone(),
                    tx: tx.clone(),
                    block: trace.block,
                });
                if next.next_step + 1 == pattern.ast.relations.len() {
                    tx_matches.push(Match {
                        pattern: pattern.id,
                        pattern_name: pattern.name.clone(),
                        endpoints: next.endpoints.iter().map(|e| e.seq).collect(),
                        tx_hash: trace.tx.hash,
                    });
                } else {
                    next.next_step += 1;
                    let upcoming = &pattern.ast.relations[next.next_step];
                    match upcoming.kind {
                        // A control-flow source must have opened a frame.
                        RelationKind::ControlFlow if !tree.opens_frame(record.seq) => continue,
                        RelationKind::DataFlow => {
                            introductions.push((pattern.id, next.next_step, record.seq));
                        }
                        _ => {}
                    }
                    advanced.push(next);
                }
            }

            // --- taint propagation ---
            self.taint.propagate(record);

            // --- introduce phase ---
            for tag in introductions {
                self.taint.introduce(record, tag);
            }
            for (idx, pattern) in self.patterns.iter().enumerate() {
                let first = &pattern.ast.relations[0];
                if record.opcode != first.src_opcode {
                    continue;
                }
                match first.kind {
                    RelationKind::ControlFlow if !tree.opens_frame(record.seq) => continue,
                    RelationKind::DataFlow => {
                        self.taint.introduce(record, (pattern.id, 0, record.seq));
                    }
                    _ => {}
                }
                advanced.push(Partial {
                    pattern_idx: idx,
                    next_step: 0,
                    endpoints: vec![Endpoint {
                        seq: record.seq,
                        record: record_arc.clone(),
                        tx: tx.clone(),
                        block: trace.block,
                    }],
                });
            }

            // Deduplicate against current partials.
            for pm in advanced {
                if self.seen.insert(pm.key()) {
                    self.partials.push(pm);
                }
            }
        }

        // --- transaction-boundary garbage collection ---
        let patterns = &self.patterns;
        let taint = &self.taint;
        self.partials.retain(|pm| {
            let rel = &patterns[pm.pattern_idx].ast.relations[pm.next_step];
            match rel.kind {
                RelationKind::ControlFlow => false,
                RelationKind::Follows => true,
                RelationKind::DataFlow => {
                    let tag = (
                        patterns[pm.pattern_idx].id,
                        pm.next_step,
                        pm.endpoints[pm.next_step].seq,
                    );
                    taint.storage_has_tag(&tag)
                }
            }
        });
        if self.partials.len() > self.history_cap {
            // Keep the newest partial matches by anchor (latest endpoint).
            self.partials
                .sort_by_key(|pm| std::cmp::Reverse(pm.endpoints.last().unwrap().seq));
            self.partials.truncate(self.history_cap);
        }
        self.seen = self.partials.iter().map(Partial::key).collect();

        let verdict = if tx_matches.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Revert
        };
        tx_matches.sort();
        tx_matches.dedup();
        self.matches.extend(tx_matches.clone());
        Ok(TxReport {
            verdict,
            matches: tx_matches,
        })
    }
}

/// Runs a fresh engine over a full trace, returning one report per
/// transaction.
pub fn analyze_traces(
    patterns: Vec<NamedPattern>,
    traces: &[TransactionTrace],
    history_cap: usize,
) -> Result<Vec<TxReport>, EngineError> {
    let mut engine = Engine::new(patterns, history_cap);
    traces
        .iter()
        .map(|t| engine.process_transaction(t))
        .collect()
}

// ---------------------------------------------------------------------------
// Where-clause evaluation
// ---------------------------------------------------------------------------

fn eval_where(w: &WhereClause, bound: &[Endpoint], dst: &Endpoint) -> bool {
    let src = &bound[w.src_ep];
    // The clause's destination endpoint is the candidate being bound.
    w.comparisons
        .iter()
        .all(|c| eval_comparison(c, src, dst).unwrap_or(false))
}

fn eval_operand(op: &Operand, src: &Endpoint, dst: &Endpoint) -> Option<Value> {
    match op {
        Operand::Literal(v) => Some(Value::Int(v.clone())),
        Operand::Accessor(a) => {
            let ep = match a.side {
                Side::Src => src,
                Side::Dst => dst,
            };
            read_accessor(&ep.record, &ep.tx, &ep.block, &a.kind).ok()
        }
        Operand::Arith { op, lhs, rhs } => {
            let l = as_int(eval_operand(lhs, src, dst)?)?;
            let r = as_int(eval_operand(rhs, src, dst)?)?;
            let v = match op {
                crate::pattern::ArithOp::Add => l + r,
                crate::pattern::ArithOp::Sub => l - r,
                crate::pattern::ArithOp::Mul => l * r,
                crate::pattern::ArithOp::Div => {
                    if r == BigInt::from(0) {
                        return None;
                    }
                    l / r
                }
            };
            Some(Value::Int(v))
        }
    }
}

fn as_int(v: Value) -> Option<BigInt> {
    match v {
        Value::Int(i) => Some(i),
        Value::Bytes(_) => None,
    }
}

/// Comparisons over mismatched types or failing accessors are false rather
/// than fatal: a malformed clause simply never matches.
fn eval_comparison(c: &Comparison, src: &Endpoint, dst: &Endpoint) -> Option<bool> {
    let l = eval_operand(&c.lhs, src, dst)?;
    let r = eval_operand(&c.rhs, src, dst)?;
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Some(match c.op {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }),
        (Value::Bytes(a), Value::Bytes(b)) => match c.op {
            CmpOp::Eq => Some(a == b),
            CmpOp::Ne => Some(a != b),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opcode::Opcode;
    use crate::pattern::builtin_pattern;
    use crate::trace::BlockContext;
    use crate::word::{Address, Word};

    struct TraceBuilder {
        seq: u64,
        traces: Vec<TransactionTrace>,
    }

    impl TraceBuilder {
        fn new() -> TraceBuilder {
            TraceBuilder {
                seq: 0,
                traces: Vec::new(),
            }
        }

        fn tx(&mut self, hash: u8, from: u8, block: u64) -> &mut TransactionTrace {
            self.traces.push(TransactionTrace {
                tx: TransactionContext {
                    hash: Hash32([hash; 32]),
                    from: Address([from; 20]),
                    to: Address([0xcc; 20]),
                    value: Word::ZERO,
                    gas_limit: 1_000_000,
                    input: vec![],
                },
                block: BlockContext {
                    number: block,
                    timestamp: 1000,
                    gas_used: 0,
                    gas_limit: 10_000_000,
                },
                records: Vec::new(),
            });
            self.traces.last_mut().unwrap()
        }

        fn rec(&mut self, depth: u32, opcode: Opcode, stack: Vec<u64>) {
            let seq = self.seq;
            self.seq += 1;
            let stack: Vec<Word> = stack.into_iter().map(Word::from_u64).collect();
            assert_eq!(stack.len(), opcode.operand_arity());
            self.traces.last_mut().unwrap().records.push(TraceRecord {
                opcode,
                pc: seq,
                depth,
                address: Address([0xcc; 20]),
                stack,
                result: (opcode.result_arity() == 1).then_some(Word::ZERO),
                memory: vec![],
                seq,
            });
        }
    }

    fn run(patterns: Vec<crate::pattern::NamedPattern>, traces: &[TransactionTrace]) -> Vec<TxReport> {
        analyze_traces(patterns, traces, DEFAULT_HISTORY_CAP).unwrap()
    }

    #[test]
    fn transaction_order_dependency_matches_across_transactions() {
        let tod = builtin_pattern("transaction_order_dependency").unwrap();
        let mut b = TraceBuilder::new();
        b.tx(1, 0xaa, 7);
        b.rec(1, Opcode::SSTORE, vec![1, 99]);
        b.tx(2, 0xbb, 7); // different sender, same block
        b.rec(1, Opcode::SLOAD, vec![1]);
        let reports = run(vec![tod.clone()], &b.traces);
        assert_eq!(reports[0].verdict, Verdict::Pass);
        assert_eq!(reports[1].verdict, Verdict::Revert);
        assert_eq!(reports[1].matches[0].endpoints, vec![0, 1]);
        assert_eq!(reports[1].matches[0].tx_hash, Hash32([2; 32]));

        // Same block but same sender: no match.
        let mut b = TraceBuilder::new();
        b.tx(1, 0xaa, 7);
        b.rec(1, Opcode::SSTORE, vec![1, 99]);
        b.tx(2, 0xaa, 7);
        b.rec(1, Opcode::SLOAD, vec![1]);
        let reports = run(vec![tod.clone()], &b.traces);
        assert!(reports.iter().all(|r| r.verdict == Verdict::Pass));

        // Different block: no match.
        let mut b = TraceBuilder::new();
        b.tx(1, 0xaa, 7);
        b.rec(1, Opcode::SSTORE, vec![1, 99]);
        b.tx(2, 0xbb, 8);
        b.rec(1, Opcode::SLOAD, vec![1]);
        let reports = run(vec![tod], &b.traces);
        assert!(reports.iter().all(|r| r.verdict == Verdict::Pass));
    }

    #[test]
    fn tod_requires_the_written_slot_to_be_read() {
        let tod = builtin_pattern("transaction_order_dependency").unwrap();
        let mut b = TraceBuilder::new();
        b.tx(1, 0xaa, 7);
        b.rec(1, Opcode::SSTORE, vec![1, 99]);
        b.tx(2, 0xbb, 7);
        b.rec(1, Opcode::SLOAD, vec![2]); // a different slot
        let reports = run(vec![tod], &b.traces);
        assert!(reports.iter().all(|r| r.verdict == Verdict::Pass));
    }

    #[test]
    fn timestamp_dependence_needs_flow_and_value() {
        let ts = builtin_pattern("timestamp_dependence").unwrap();
        let push1 = Opcode::from_mnemonic("PUSH1").unwrap();
        let build = |value: u64, with_flow: bool| {
            let mut b = TraceBuilder::new();
            b.tx(1, 0xaa, 7);
            b.rec(1, Opcode::TIMESTAMP, vec![]);
            if !with_flow {
                // Discard the timestamp; the branch condition is untainted.
                b.rec(1, Opcode::POP, vec![1000]);
                b.rec(1, push1, vec![]);
            }
            b.rec(1, push1, vec![]); // jump destination
            b.rec(1, Opcode::JUMPI, vec![8, 1]);
            for _ in 0..7 {
                b.rec(1, push1, vec![]);
            }
            b.rec(1, Opcode::CALL, vec![100, 2, value, 0, 0, 0, 0]);
            b.traces
        };
        let reports = run(vec![ts.clone()], &build(5, true));
        assert_eq!(reports[0].verdict, Verdict::Revert);
        // Zero-value transfer: where clause fails.
        let reports = run(vec![ts.clone()], &build(0, true));
        assert_eq!(reports[0].verdict, Verdict::Pass);
        // No data flow from TIMESTAMP to the branch.
        let reports = run(vec![ts], &build(5, false));
        assert_eq!(reports[0].verdict, Verdict::Pass);
    }

    #[test]
    fn engine_agrees_with_reference_checker_on_handmade_traces() {
        let patterns = vec![
            builtin_pattern("transaction_order_dependency").unwrap(),
            builtin_pattern("timestamp_dependence").unwrap(),
        ];
        let push1 = Opcode::from_mnemonic("PUSH1").unwrap();
        let mut b = TraceBuilder::new();
        b.tx(1, 0xaa, 7);
        b.rec(1, Opcode::TIMESTAMP, vec![]);
        b.rec(1, push1, vec![]);
        b.rec(1, Opcode::JUMPI, vec![8, 1]);
        b.rec(1, Opcode::SSTORE, vec![1, 5]);
        for _ in 0..7 {
            b.rec(1, push1, vec![]);
        }
        b.rec(1, Opcode::CALL, vec![100, 2, 9, 0, 0, 0, 0]);
        b.tx(2, 0xbb, 7);
        b.rec(1, Opcode::SLOAD, vec![1]);
        let mut engine = Engine::new(patterns.clone(), DEFAULT_HISTORY_CAP);
        for t in &b.traces {
            engine.process_transaction(t).unwrap();
        }
        let streamed: std::collections::BTreeSet<Match> =
            engine.matches().iter().cloned().collect();
        let reference = oracle::brute_force_matches(&patterns, &b.traces).unwrap();
        assert_eq!(streamed, reference);
        assert!(!reference.is_empty());
    }
}
