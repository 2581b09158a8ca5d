//! Byte-precise taint shadow machine.
//!
//! The machine replays a trace's instruction stream over shadow state: a
//! per-frame shadow stack (one tag set per byte of each word), per-frame
//! memory and calldata taint, and persistent storage taint keyed by
//! `(account, slot)`. Tags identify which pattern relation introduced the
//! taint and at which record, so one machine serves every pattern and
//! relation simultaneously.
//!
//! Propagation is deliberately conservative: arithmetic and logic unite
//! their operands' taint positionally, SHA3 smears the hashed region over
//! the whole result, and no taint is narrowed by masking. Storage taint is
//! not rolled back when a frame reverts; that can only over-approximate,
//! never miss, a real flow.

use crate::opcode::Opcode;
use crate::pattern::PatternId;
use crate::trace::TraceRecord;
use crate::word::{Address, Word};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

/// (pattern, relation index within the pattern, seq of the source record).
pub type TaintTag = (PatternId, usize, u64);

/// A byte's tag set. The set is shared copy-on-write: taint usually moves in
/// whole words whose 32 bytes point at one underlying set, so copying a word
/// bumps a few reference counts instead of duplicating the tags.
#[derive(Clone, Debug, Default)]
struct ByteTaint(Option<Arc<BTreeSet<TaintTag>>>);

impl ByteTaint {
    fn new() -> ByteTaint {
        ByteTaint(None)
    }

    fn contains(&self, tag: &TaintTag) -> bool {
        self.0.as_ref().is_some_and(|s| s.contains(tag))
    }

    fn insert(&mut self, tag: TaintTag) {
        match &mut self.0 {
            Some(set) => {
                if !set.contains(&tag) {
                    Arc::make_mut(set).insert(tag);
                }
            }
            None => self.0 = Some(Arc::new(BTreeSet::from([tag]))),
        }
    }

    fn extend(&mut self, other: ByteTaint) {
        let Some(theirs) = other.0 else { return };
        if theirs.is_empty() {
            return;
        }
        match &mut self.0 {
            None => self.0 = Some(theirs),
            Some(ours) if Arc::ptr_eq(ours, &theirs) => {}
            Some(ours) => {
                if ours.is_empty() {
                    *ours = theirs;
                } else {
                    Arc::make_mut(ours).extend(theirs.iter().cloned());
                }
            }
        }
    }

    fn iter(&self) -> impl Iterator<Item = &TaintTag> {
        self.0.iter().flat_map(|s| s.iter())
    }

    /// Identity of the underlying shared set, for memoized bulk updates.
    fn ptr_key(&self) -> *const BTreeSet<TaintTag> {
        self.0.as_ref().map_or(std::ptr::null(), Arc::as_ptr)
    }
}

/// Exactly 32 byte-level tag sets.
type WordTaint = Vec<ByteTaint>;

/// Inserts `tag` into every byte of the word. Bytes sharing one underlying
/// set are updated once and re-shared, so tagging a uniformly tainted word
/// costs one set copy rather than 32.
fn tag_word(word: &mut WordTaint, tag: TaintTag) {
    let mut memo: Vec<(*const BTreeSet<TaintTag>, ByteTaint)> = Vec::new();
    for b in word.iter_mut() {
        let key = b.ptr_key();
        if let Some((_, done)) = memo.iter().find(|(k, _)| *k == key) {
            *b = done.clone();
        } else {
            b.insert(tag);
            memo.push((key, b.clone()));
        }
    }
}

/// Shadow memory is capped; offsets beyond this are ignored (real traces
/// stay far below, and both users of the machine share the behavior).
const TAINT_MEMORY_CAP: u64 = 1 << 20;

fn clean_word() -> WordTaint {
    vec![ByteTaint::new(); 32]
}

#[derive(Clone, Copy, Debug)]
struct CallInfo {
    out_off: u64,
    out_size: u64,
}

#[derive(Debug, Default)]
struct FrameTaint {
    /// Bottom of stack first, aligned with the replayed machine stack.
    stack: Vec<WordTaint>,
    memory: Vec<ByteTaint>,
    calldata: Vec<ByteTaint>,
    /// Set while a call instruction of this frame is executing a callee.
    pending_call: Option<CallInfo>,
    /// Taint of the argument region of the most recent call instruction;
    /// becomes the callee frame's calldata taint.
    stashed_args: Vec<ByteTaint>,
}

impl FrameTaint {
    fn pop_word(&mut self) -> WordTaint {
        self.stack.pop().unwrap_or_else(clean_word)
    }

    fn mem_byte(&self, off: u64) -> ByteTaint {
        self.memory
            .get(off as usize)
            .cloned()
            .unwrap_or_default()
    }

    fn mem_set(&mut self, off: u64, taint: ByteTaint) {
        if off >= TAINT_MEMORY_CAP {
            return;
        }
        let off = off as usize;
        if self.memory.len() <= off {
            self.memory.resize(off + 1, ByteTaint::new());
        }
        self.memory[off] = taint;
    }

    fn calldata_byte(&self, off: u64) -> ByteTaint {
        self.calldata
            .get(off as usize)
            .cloned()
            .unwrap_or_default()
    }
}

#[derive(Debug, Default)]
pub struct TaintMachine {
    frames: Vec<FrameTaint>,
    storage: HashMap<(Address, Word), WordTaint>,
    /// Return-data taint of the most recently closed frame.
    last_return: Option<Vec<ByteTaint>>,
}

fn op_u64(record: &TraceRecord, idx: usize) -> u64 {
    record
        .stack
        .get(idx)
        .and_then(|w| w.to_u64())
        .unwrap_or(u64::MAX)
}

impl TaintMachine {
    pub fn new() -> TaintMachine {
        TaintMachine::default()
    }

    /// Clears all volatile (stack/memory/calldata) taint at a transaction
    /// boundary; storage taint persists. Idempotent.
    pub fn reset_volatile(&mut self) {
        self.frames.clear();
        self.last_return = None;
    }

    /// Aligns the frame stack with the record's depth: closes returned
    /// frames (propagating return-data taint into the caller's output
    /// region) and opens a new frame when the depth grew. Must be called
    /// once per record, before `taint_check`.
    pub fn begin_record(&mut self, record: &TraceRecord) {
        let target = record.depth as usize;
        while self.frames.len() > target {
            self.frames.pop();
            let ret = self.last_return.take();
            if let Some(parent) = self.frames.last_mut() {
                if let Some(info) = parent.pending_call.take() {
                    if let Some(ret) = ret {
                        let n = (info.out_size as usize).min(ret.len());
                        for (k, taint) in ret.into_iter().take(n).enumerate() {
                            parent.mem_set(info.out_off + k as u64, taint);
                        }
                    }
                }
            }
        }
        while self.frames.len() < target {
            // Derive the callee's calldata taint from the caller's input
            // region, stashed on the caller when its call record ran.
            let calldata = match self.frames.last() {
                Some(parent) => parent
                    .stashed_args
                    .clone(),
                None => Vec::new(),
            };
            self.frames.push(FrameTaint {
                calldata,
                ..FrameTaint::default()
            });
        }
    }

    /// Whether the record, as a data-flow sink, consumes the tag: any byte
    /// of its consumed operands is tagged, or — for SLOAD — the loaded slot
    /// is tagged. Call this before `propagate` for the same record.
    pub fn taint_check(&self, record: &TraceRecord, tag: &TaintTag) -> bool {
        let Some(frame) = self.frames.last() else {
            return false;
        };
        let arity = record.opcode.operand_arity();
        let len = frame.stack.len();
        for i in 0..arity.min(len) {
            let word = &frame.stack[len - 1 - i];
            if word.iter().any(|b| b.contains(tag)) {
                return true;
            }
        }
        if record.opcode == Opcode::SLOAD {
            if let Some(key) = record.stack.first() {
                if let Some(slot) = self.storage.get(&(record.address, *key)) {
                    if slot.iter().any(|b| b.contains(tag)) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Replays the record's effect on the shadow state.
    pub fn propagate(&mut self, record: &TraceRecord) {
        if self.frames.is_empty() {
            self.frames.push(FrameTaint::default());
        }
        let address = record.address;
        let op = record.opcode;
        let frame = self.frames.last_mut().expect("frame present");

        if op.is_push() {
            frame.stack.push(clean_word());
            return;
        }
        if op.is_dup() {
            let n = (op.0 - 0x80 + 1) as usize;
            let word = if frame.stack.len() >= n {
                frame.stack[frame.stack.len() - n].clone()
            } else {
                clean_word()
            };
            frame.stack.push(word);
            return;
        }
        if op.is_swap() {
            let n = (op.0 - 0x90 + 1) as usize;
            let len = frame.stack.len();
            if len >= n + 1 {
                frame.stack.swap(len - 1, len - 1 - n);
            }
            return;
        }

        match op {
            Opcode::ADD | Opcode::MUL | Opcode::SUB | Opcode::DIV | Opcode::LT | Opcode::GT
            | Opcode::EQ | Opcode::AND | Opcode::OR => {
                let a = frame.pop_word();
                let b = frame.pop_word();
                let mut out = a;
                for (o, bb) in out.iter_mut().zip(b) {
                    o.extend(bb);
                }
                frame.stack.push(out);
            }
            Opcode::ISZERO | Opcode::NOT => {
                let a = frame.pop_word();
                frame.stack.push(a);
            }
            Opcode::SHA3 => {
                let off = op_u64(record, 0);
                let size = op_u64(record, 1).min(TAINT_MEMORY_CAP);
                let a = frame.pop_word();
                let b = frame.pop_word();
                let mut union = ByteTaint::new();
                for w in [a, b] {
                    for byte in w {
                        union.extend(byte);
                    }
                }
                for k in 0..size {
                    union.extend(frame.mem_byte(off.saturating_add(k)));
                }
                frame.stack.push(vec![union; 32]);
            }
            Opcode::MLOAD => {
                let off = op_u64(record, 0);
                frame.pop_word();
                let word = (0..32)
                    .map(|k| frame.mem_byte(off.saturating_add(k)))
                    .collect();
                frame.stack.push(word);
            }
            Opcode::MSTORE => {
                let off = op_u64(record, 0);
                frame.pop_word();
                let value = frame.pop_word();
                for (k, taint) in value.into_iter().enumerate() {
                    frame.mem_set(off.saturating_add(k as u64), taint);
                }
            }
            Opcode::MSTORE8 => {
                let off = op_u64(record, 0);
                frame.pop_word();
                let value = frame.pop_word();
                frame.mem_set(off, value[31].clone());
            }
            Opcode::CALLDATALOAD => {
                let off = op_u64(record, 0);
                frame.pop_word();
                let word = (0..32)
                    .map(|k| frame.calldata_byte(off.saturating_add(k)))
                    .collect();
                frame.stack.push(word);
            }
            Opcode::CALLDATACOPY => {
                let dest = op_u64(record, 0);
                let off = op_u64(record, 1);
                let len = op_u64(record, 2).min(TAINT_MEMORY_CAP);
                for _ in 0..3 {
                    frame.pop_word();
                }
                for k in 0..len {
                    let taint = frame.calldata_byte(off.saturating_add(k));
                    frame.mem_set(dest.saturating_add(k), taint);
                }
            }
            Opcode::SLOAD => {
                let key = record.stack.first().copied().unwrap_or_default();
                frame.pop_word();
                let word = self
                    .storage
                    .get(&(address, key))
                    .cloned()
                    .unwrap_or_else(clean_word);
                self.frames.last_mut().unwrap().stack.push(word);
            }
            Opcode::SSTORE => {
                let key = record.stack.first().copied().unwrap_or_default();
                frame.pop_word();
                let value = frame.pop_word();
                self.storage.insert((address, key), value);
            }
            Opcode::CALL | Opcode::CALLCODE | Opcode::DELEGATECALL | Opcode::CREATE => {
                let (in_off, in_size, out_off, out_size) = match op {
                    Opcode::CALL | Opcode::CALLCODE => (
                        op_u64(record, 3),
                        op_u64(record, 4),
                        op_u64(record, 5),
                        op_u64(record, 6),
                    ),
                    Opcode::DELEGATECALL => (
                        op_u64(record, 2),
                        op_u64(record, 3),
                        op_u64(record, 4),
                        op_u64(record, 5),
                    ),
                    // CREATE: init code region feeds the child; no output.
                    _ => (op_u64(record, 1), op_u64(record, 2), 0, 0),
                };
                for _ in 0..op.operand_arity() {
                    frame.pop_word();
                }
                // Stash the argument region taint for the callee frame and
                // remember where return data lands.
                let in_size = in_size.min(TAINT_MEMORY_CAP);
                frame.stashed_args = (0..in_size)
                    .map(|k| frame.mem_byte(in_off.saturating_add(k)))
                    .collect();
                frame.pending_call = Some(CallInfo { out_off, out_size });
                // Status word pushed by the caller is clean.
                frame.stack.push(clean_word());
            }
            Opcode::RETURN => {
                let off = op_u64(record, 0);
                let size = op_u64(record, 1).min(TAINT_MEMORY_CAP);
                frame.pop_word();
                frame.pop_word();
                self.last_return = Some(
                    (0..size)
                        .map(|k| frame.mem_byte(off.saturating_add(k)))
                        .collect(),
                );
            }
            Opcode::REVERT => {
                frame.pop_word();
                frame.pop_word();
                self.last_return = None;
            }
            _ => {
                // Everything else: consume operands, push a clean result.
                for _ in 0..op.operand_arity() {
                    frame.pop_word();
                }
                if op.result_arity() == 1 {
                    frame.stack.push(clean_word());
                }
            }
        }
    }

    /// Marks the record as a data-flow source for `tag`: tags its pushed
    /// result, or the bytes it wrote (CALLDATACOPY's memory region, SSTORE's
    /// slot). Call after `propagate` for the same record.
    pub fn introduce(&mut self, record: &TraceRecord, tag: TaintTag) {
        match record.opcode {
            Opcode::CALLDATACOPY => {
                let dest = op_u64(record, 0);
                let len = op_u64(record, 2).min(TAINT_MEMORY_CAP);
                if let Some(frame) = self.frames.last_mut() {
                    for k in 0..len {
                        let mut taint = frame.mem_byte(dest.saturating_add(k));
                        taint.insert(tag);
                        frame.mem_set(dest.saturating_add(k), taint);
                    }
                }
            }
            Opcode::SSTORE => {
                let key = record.stack.first().copied().unwrap_or_default();
                let slot = self
                    .storage
                    .entry((record.address, key))
                    .or_insert_with(clean_word);
                tag_word(slot, tag);
            }
            op if op.result_arity() == 1 => {
                if let Some(word) = self.frames.last_mut().and_then(|f| f.stack.last_mut()) {
                    tag_word(word, tag);
                }
            }
            _ => {}
        }
    }

    /// Whether the tag survives in persistent (storage) taint; volatile-only
    /// tags die with the transaction.
    pub fn storage_has_tag(&self, tag: &TaintTag) -> bool {
        self.storage
            .values()
            .any(|w| w.iter().any(|b| b.contains(tag)))
    }

    /// Storage slots carrying any taint, for diagnostics.
    pub fn tainted_slots(&self) -> Vec<(Address, Word, usize)> {
        let mut out: Vec<_> = self
            .storage
            .iter()
            .filter_map(|((a, k), w)| {
                let tags: BTreeSet<&TaintTag> = w.iter().flat_map(ByteTaint::iter).collect();
                if tags.is_empty() {
                    None
                } else {
                    Some((*a, *k, tags.len()))
                }
            })
            .collect();
        out.sort_by_key(|(a, k, _)| (*a, *k));
        out
    }

    /// Persistent taint grouped by tag: (tag, account, slot, tainted bytes),
    /// in a stable order.
    pub fn storage_summary(&self) -> Vec<(TaintTag, Address, Word, usize)> {
        let mut out = Vec::new();
        for ((a, k), w) in &self.storage {
            let mut per_tag: BTreeMap<&TaintTag, usize> = BTreeMap::new();
            for byte in w {
                for tag in byte.iter() {
                    *per_tag.entry(tag).or_default() += 1;
                }
            }
            for (tag, n) in per_tag {
                out.push((tag.clone(), *a, *k, n));
            }
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::Hash32;

    fn pid(b: u8) -> PatternId {
        PatternId(Hash32([b; 32]))
    }

    fn rec(seq: u64, depth: u32, opcode: Opcode, stack: Vec<Word>) -> TraceRecord {
        TraceRecord {
            opcode,
            pc: seq,
            depth,
            address: Address([1; 20]),
            stack,
            result: if opcode.result_arity() == 1 {
                Some(Word::ZERO)
            } else {
                None
            },
            memory: Vec::new(),
            seq,
        }
    }

    fn step(m: &mut TaintMachine, r: &TraceRecord) {
        m.begin_record(r);
        m.propagate(r);
    }

    #[test]
    fn taint_flows_through_arithmetic_into_a_sink() {
        let mut m = TaintMachine::new();
        let tag = (pid(1), 0, 0);
        // CALLDATALOAD (source) -> PUSH -> ADD -> tainted operand at SSTORE.
        let load = rec(0, 1, Opcode::CALLDATALOAD, vec![Word::ZERO]);
        step(&mut m, &load);
        m.introduce(&load, tag);
        step(&mut m, &rec(1, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        let add = rec(2, 1, Opcode::ADD, vec![Word::from_u64(1), Word::from_u64(2)]);
        m.begin_record(&add);
        assert!(m.taint_check(&add, &tag), "operand is tainted");
        m.propagate(&add);
        let sstore = rec(3, 1, Opcode::SSTORE, vec![Word::from_u64(7), Word::from_u64(3)]);
        m.begin_record(&sstore);
        assert!(m.taint_check(&sstore, &tag), "ADD result keeps the taint");
    }

    #[test]
    fn memory_taint_is_byte_aligned() {
        let mut m = TaintMachine::new();
        let tag = (pid(1), 0, 0);
        // Taint a word, MSTORE it at 0, then MLOAD at 32: no overlap.
        let load = rec(0, 1, Opcode::CALLDATALOAD, vec![Word::ZERO]);
        step(&mut m, &load);
        m.introduce(&load, tag);
        step(&mut m, &rec(1, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        // Stack now: [tainted, offset]; MSTORE pops offset then value.
        step(&mut m, &rec(2, 1, Opcode::MSTORE, vec![Word::ZERO, Word::ZERO]));
        step(&mut m, &rec(3, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        let mload_far = rec(4, 1, Opcode::MLOAD, vec![Word::from_u64(32)]);
        step(&mut m, &mload_far);
        let probe = rec(5, 1, Opcode::SSTORE, vec![Word::ZERO, Word::ZERO]);
        m.begin_record(&probe);
        assert!(!m.taint_check(&probe, &tag), "disjoint region is clean");
        // Partial overlap: MLOAD at 16 picks up bytes 16..32 of the store.
        step(&mut m, &rec(6, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        let mload_mid = rec(7, 1, Opcode::MLOAD, vec![Word::from_u64(16)]);
        step(&mut m, &mload_mid);
        let probe = rec(8, 1, Opcode::SSTORE, vec![Word::ZERO, Word::ZERO]);
        m.begin_record(&probe);
        assert!(m.taint_check(&probe, &tag), "overlapping region is tainted");
    }

    #[test]
    fn storage_taint_survives_reset_volatile() {
        let mut m = TaintMachine::new();
        let tag = (pid(2), 1, 5);
        let sstore = rec(0, 1, Opcode::SSTORE, vec![Word::from_u64(3), Word::from_u64(9)]);
        step(&mut m, &sstore);
        m.introduce(&sstore, tag);
        assert!(m.storage_has_tag(&tag));
        m.reset_volatile();
        m.reset_volatile(); // idempotent
        assert!(m.storage_has_tag(&tag));
        // SLOAD of the same slot in the next transaction sees the tag...
        let sload = rec(1, 1, Opcode::SLOAD, vec![Word::from_u64(3)]);
        m.begin_record(&sload);
        assert!(m.taint_check(&sload, &tag));
        // ...and of another slot does not.
        let other = rec(2, 1, Opcode::SLOAD, vec![Word::from_u64(4)]);
        m.begin_record(&other);
        assert!(!m.taint_check(&other, &tag));
    }

    #[test]
    fn calldata_taint_crosses_call_frames() {
        let mut m = TaintMachine::new();
        let tag = (pid(3), 0, 0);
        // Parent: taint memory[0..32], CALL with args at [0..32).
        let load = rec(0, 1, Opcode::CALLDATALOAD, vec![Word::ZERO]);
        step(&mut m, &load);
        m.introduce(&load, tag);
        step(&mut m, &rec(1, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        step(&mut m, &rec(2, 1, Opcode::MSTORE, vec![Word::ZERO, Word::ZERO]));
        let call = rec(
            3,
            1,
            Opcode::CALL,
            vec![
                Word::from_u64(1000), // gas
                Word::from_u64(2),    // to
                Word::ZERO,           // value
                Word::ZERO,           // in offset
                Word::from_u64(32),   // in size
                Word::ZERO,           // out offset
                Word::ZERO,           // out size
            ],
        );
        step(&mut m, &call);
        // Child frame reads its calldata: tainted.
        let child_load = rec(4, 2, Opcode::CALLDATALOAD, vec![Word::ZERO]);
        step(&mut m, &child_load);
        let probe = rec(5, 2, Opcode::SSTORE, vec![Word::ZERO, Word::ZERO]);
        m.begin_record(&probe);
        assert!(m.taint_check(&probe, &tag), "call arguments carry taint");
    }

    #[test]
    fn return_data_taints_caller_output_region() {
        let mut m = TaintMachine::new();
        let tag = (pid(4), 0, 0);
        let call = rec(
            0,
            1,
            Opcode::CALL,
            vec![
                Word::from_u64(1000),
                Word::from_u64(2),
                Word::ZERO,
                Word::ZERO,
                Word::ZERO,
                Word::ZERO,          // out offset 0
                Word::from_u64(32),  // out size 32
            ],
        );
        step(&mut m, &call);
        // Child: taint a word, store it at 0, RETURN(0, 32).
        let load = rec(1, 2, Opcode::CALLDATALOAD, vec![Word::ZERO]);
        step(&mut m, &load);
        m.introduce(&load, tag);
        step(&mut m, &rec(2, 2, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        step(&mut m, &rec(3, 2, Opcode::MSTORE, vec![Word::ZERO, Word::ZERO]));
        step(&mut m, &rec(4, 2, Opcode::RETURN, vec![Word::ZERO, Word::from_u64(32)]));
        // Parent resumes: MLOAD of the output region is tainted.
        step(&mut m, &rec(5, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        let mload = rec(6, 1, Opcode::MLOAD, vec![Word::ZERO]);
        step(&mut m, &mload);
        let probe = rec(7, 1, Opcode::SSTORE, vec![Word::ZERO, Word::ZERO]);
        m.begin_record(&probe);
        assert!(m.taint_check(&probe, &tag));
    }

    #[test]
    fn revert_does_not_propagate_return_taint() {
        let mut m = TaintMachine::new();
        let tag = (pid(5), 0, 0);
        let call = rec(
            0,
            1,
            Opcode::CALL,
            vec![
                Word::from_u64(1000),
                Word::from_u64(2),
                Word::ZERO,
                Word::ZERO,
                Word::ZERO,
                Word::ZERO,
                Word::from_u64(32),
            ],
        );
        step(&mut m, &call);
        let load = rec(1, 2, Opcode::CALLDATALOAD, vec![Word::ZERO]);
        step(&mut m, &load);
        m.introduce(&load, tag);
        step(&mut m, &rec(2, 2, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        step(&mut m, &rec(3, 2, Opcode::MSTORE, vec![Word::ZERO, Word::ZERO]));
        step(&mut m, &rec(4, 2, Opcode::REVERT, vec![Word::ZERO, Word::from_u64(32)]));
        step(&mut m, &rec(5, 1, Opcode::from_mnemonic("PUSH1").unwrap(), vec![]));
        let mload = rec(6, 1, Opcode::MLOAD, vec![Word::ZERO]);
        step(&mut m, &mload);
        let probe = rec(7, 1, Opcode::SSTORE, vec![Word::ZERO, Word::ZERO]);
        m.begin_record(&probe);
        assert!(!m.taint_check(&probe, &tag));
    }
}
