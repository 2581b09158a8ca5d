//! Brute-force reference matcher.
//!
//! Enumerates every strictly increasing tuple of records that could bind a
//! pattern's endpoint chain and checks each relation directly — no partial
//! match bookkeeping, no history cap, no transaction-boundary pruning. It is
//! deliberately exponential and bounded to small traces; its purpose is to
//! check the streaming engine's answers, not to be fast.
//!
//! Control-flow and taint semantics are shared with the engine (the call
//! tree and taint machine), so the comparison exercises exactly the
//! streaming/bookkeeping logic that differs between the two.

use super::{eval_where, Endpoint, Match};
use crate::flow::{CallTree, CallTreeError, TaintMachine, TaintTag};
use crate::pattern::{NamedPattern, RelationKind};
use crate::trace::TransactionTrace;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

/// The enumeration is exponential in the worst case; refuse traces larger
/// than this many records.
pub const ORACLE_RECORD_BOUND: usize = 200;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("trace has {records} records, above the reference checker's bound of {ORACLE_RECORD_BOUND}")]
    BoundExceeded { records: usize },
    #[error("malformed trace: {0}")]
    CallTree(#[from] CallTreeError),
}

struct Flat {
    /// One endpoint wrapper per record, in global order.
    endpoints: Vec<Endpoint>,
    /// Transaction index per record.
    tx_of: Vec<usize>,
    trees: Vec<CallTree>,
}

/// Replays the whole stream introducing only `tag` at its source record,
/// returning every record sequence where the tag is consumed as a sink.
/// Mirrors the engine's per-record phase order exactly.
fn taint_reachable(traces: &[TransactionTrace], tag: TaintTag) -> BTreeSet<u64> {
    let mut machine = TaintMachine::new();
    let mut hits = BTreeSet::new();
    for trace in traces {
        machine.reset_volatile();
        for record in &trace.records {
            machine.begin_record(record);
            if machine.taint_check(record, &tag) {
                hits.insert(record.seq);
            }
            machine.propagate(record);
            if record.seq == tag.2 {
                machine.introduce(record, tag);
            }
        }
    }
    hits
}

pub fn brute_force_matches(
    patterns: &[NamedPattern],
    traces: &[TransactionTrace],
) -> Result<BTreeSet<Match>, OracleError> {
    let total: usize = traces.iter().map(|t| t.records.len()).sum();
    if total > ORACLE_RECORD_BOUND {
        return Err(OracleError::BoundExceeded { records: total });
    }
    let mut flat = Flat {
        endpoints: Vec::with_capacity(total),
        tx_of: Vec::with_capacity(total),
        trees: Vec::with_capacity(traces.len()),
    };
    for (ti, trace) in traces.iter().enumerate() {
        flat.trees.push(CallTree::build(&trace.records)?);
        let tx = Arc::new(trace.tx.clone());
        for record in &trace.records {
            flat.endpoints.push(Endpoint {
                seq: record.seq,
                record: Arc::new(record.clone()),
                tx: tx.clone(),
                block: trace.block,
            });
            flat.tx_of.push(ti);
        }
    }

    let mut taint_memo: HashMap<TaintTag, BTreeSet<u64>> = HashMap::new();
    let mut matches = BTreeSet::new();

    for pattern in patterns {
        let relations = &pattern.ast.relations;
        // Depth-first over strictly increasing record indices.
        let mut stack: Vec<usize> = Vec::new();
        let first_op = relations[0].src_opcode;
        for i0 in 0..flat.endpoints.len() {
            if flat.endpoints[i0].record.opcode != first_op {
                continue;
            }
            stack.push(i0);
            extend(
                pattern,
                traces,
                &flat,
                &mut taint_memo,
                &mut stack,
                &mut matches,
            );
            stack.pop();
        }
    }
    Ok(matches)
}

fn extend(
    pattern: &NamedPattern,
    traces: &[TransactionTrace],
    flat: &Flat,
    taint_memo: &mut HashMap<TaintTag, BTreeSet<u64>>,
    chosen: &mut Vec<usize>,
    matches: &mut BTreeSet<Match>,
) {
    let k = chosen.len() - 1;
    if k == pattern.ast.relations.len() {
        let last = &flat.endpoints[*chosen.last().unwrap()];
        matches.insert(Match {
            pattern: pattern.id,
            pattern_name: pattern.name.clone(),
            endpoints: chosen.iter().map(|&i| flat.endpoints[i].seq).collect(),
            tx_hash: last.tx.hash,
        });
        return;
    }
    let rel = &pattern.ast.relations[k];
    let src_idx = *chosen.last().unwrap();
    let src = &flat.endpoints[src_idx];
    for cand_idx in src_idx + 1..flat.endpoints.len() {
        let cand = &flat.endpoints[cand_idx];
        if cand.record.opcode != rel.dst_opcode {
            continue;
        }
        let related = match rel.kind {
            RelationKind::Follows => true,
            RelationKind::ControlFlow => {
                let tree = &flat.trees[flat.tx_of[src_idx]];
                flat.tx_of[src_idx] == flat.tx_of[cand_idx]
                    && tree.control_reaches(src.seq, cand.seq).unwrap_or(false)
            }
            RelationKind::DataFlow => {
                let tag = (pattern.id, k, src.seq);
                taint_memo
                    .entry(tag)
                    .or_insert_with(|| taint_reachable(traces, tag))
                    .contains(&cand.seq)
            }
        };
        if !related {
            continue;
        }
        if let Some(w) = &rel.where_clause {
            let bound: Vec<Endpoint> = chosen
                .iter()
                .map(|&i| flat.endpoints[i].clone())
                .collect();
            if !eval_where(w, &bound, cand) {
                continue;
            }
        }
        chosen.push(cand_idx);
        extend(pattern, traces, flat, taint_memo, chosen, matches);
        chosen.pop();
    }
}
