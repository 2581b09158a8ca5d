//! Execution-trace model and the line-delimited JSON wire format.
//!
//! A trace is a sequence of transactions, each carrying its block context
//! and the instruction records observed while executing it. Records capture
//! pre-state: the operand slice of the stack (top first), a memory snapshot,
//! and — for opcodes that push exactly one result — the post-state result
//! word.

use crate::opcode::Opcode;
use crate::pattern::{AccessorKind, BlockField, MemArg, TxField};
use crate::word::{bytes_to_hex, parse_hex, Address, Hash32, Word};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use thiserror::Error;

/// Upper bound on a single memory-accessor read; reads larger than this are
/// rejected rather than materialized.
pub const MAX_MEMORY_READ: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub opcode: Opcode,
    pub pc: u64,
    /// Call depth, 1 for the outermost frame.
    pub depth: u32,
    /// The state address: the account whose storage SSTORE/SLOAD touch.
    /// Under DELEGATECALL/CALLCODE this stays the caller's address.
    pub address: Address,
    /// Consumed operands, top of stack first, captured before execution.
    pub stack: Vec<Word>,
    /// Post-state result, present exactly when the opcode's result arity is 1.
    pub result: Option<Word>,
    /// Pre-state memory snapshot of the executing frame.
    pub memory: Vec<u8>,
    /// Global position across the whole trace, strictly increasing.
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionContext {
    pub hash: Hash32,
    pub from: Address,
    pub to: Address,
    pub value: Word,
    pub gas_limit: u64,
    pub input: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockContext {
    pub number: u64,
    pub timestamp: u64,
    pub gas_used: u64,
    pub gas_limit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionTrace {
    pub tx: TransactionContext,
    pub block: BlockContext,
    pub records: Vec<TraceRecord>,
}

// ---------------------------------------------------------------------------
// Accessor evaluation
// ---------------------------------------------------------------------------

/// Value produced by an accessor: integers (words, counters, addresses and
/// hashes widened to unsigned integers) or raw memory bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Int(BigInt),
    Bytes(Vec<u8>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AccessError {
    #[error("stack index {index} out of range for {opcode} record with {len} operands")]
    StackOutOfRange {
        opcode: &'static str,
        index: u32,
        len: usize,
    },
    #[error("record for {0} carries no result word")]
    NoResult(&'static str),
    #[error("memory read of {size} bytes exceeds the {MAX_MEMORY_READ}-byte limit")]
    OversizeRead { size: u64 },
    #[error("memory argument does not fit in 64 bits")]
    MemArgOverflow,
}

fn stack_word(record: &TraceRecord, index: u32) -> Result<Word, AccessError> {
    record
        .stack
        .get(index as usize)
        .copied()
        .ok_or(AccessError::StackOutOfRange {
            opcode: record.opcode.mnemonic(),
            index,
            len: record.stack.len(),
        })
}

fn mem_arg_value(record: &TraceRecord, arg: &MemArg) -> Result<u64, AccessError> {
    match arg {
        MemArg::Literal(v) => Ok(*v),
        MemArg::Stack(i) => stack_word(record, *i)?
            .to_u64()
            .ok_or(AccessError::MemArgOverflow),
    }
}

/// Reads the pre-state region `[offset, offset+size)` of the record's memory
/// snapshot, zero-extended past the snapshot's end.
pub fn read_memory(record: &TraceRecord, offset: u64, size: u64) -> Result<Vec<u8>, AccessError> {
    if size > MAX_MEMORY_READ {
        return Err(AccessError::OversizeRead { size });
    }
    let mut out = vec![0u8; size as usize];
    let len = record.memory.len() as u64;
    if offset < len {
        let end = (offset + size).min(len);
        let n = (end - offset) as usize;
        out[..n].copy_from_slice(&record.memory[offset as usize..end as usize]);
    }
    Ok(out)
}

/// Evaluates an accessor against a record and its enclosing contexts. Pure:
/// no state beyond the arguments is consulted.
pub fn read_accessor(
    record: &TraceRecord,
    tx: &TransactionContext,
    block: &BlockContext,
    kind: &AccessorKind,
) -> Result<Value, AccessError> {
    let int = |v: BigInt| Ok(Value::Int(v));
    match kind {
        AccessorKind::Depth => int(BigInt::from(record.depth)),
        AccessorKind::Pc => int(BigInt::from(record.pc)),
        AccessorKind::Address => int(BigInt::from_bytes_be(
            num_bigint::Sign::Plus,
            &record.address.0,
        )),
        AccessorKind::Stack(i) => int(stack_word(record, *i)?.to_bigint()),
        AccessorKind::StackResult => {
            let w = record
                .result
                .ok_or(AccessError::NoResult(record.opcode.mnemonic()))?;
            int(w.to_bigint())
        }
        AccessorKind::Memory(off, size) => {
            let off = mem_arg_value(record, off)?;
            let size = mem_arg_value(record, size)?;
            Ok(Value::Bytes(read_memory(record, off, size)?))
        }
        AccessorKind::Transaction(f) => match f {
            TxField::Hash => int(BigInt::from_bytes_be(num_bigint::Sign::Plus, &tx.hash.0)),
            TxField::Value => int(tx.value.to_bigint()),
            TxField::From => int(BigInt::from_bytes_be(num_bigint::Sign::Plus, &tx.from.0)),
            TxField::To => int(BigInt::from_bytes_be(num_bigint::Sign::Plus, &tx.to.0)),
        },
        AccessorKind::Block(f) => match f {
            BlockField::Number => int(BigInt::from(block.number)),
            BlockField::GasUsed => int(BigInt::from(block.gas_used)),
            BlockField::GasLimit => int(BigInt::from(block.gas_limit)),
        },
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("line {line}: step record before any transaction header")]
    Order { line: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum WireLine {
    Tx(WireTx),
    Step(WireStep),
}

#[derive(Serialize, Deserialize)]
struct WireTx {
    hash: String,
    from: String,
    to: String,
    value: String,
    gas: u64,
    input: String,
    block: WireBlock,
    #[serde(default = "default_stack_order")]
    stack_order: String,
}

fn default_stack_order() -> String {
    "top_first".into()
}

#[derive(Serialize, Deserialize)]
struct WireBlock {
    number: u64,
    timestamp: u64,
    #[serde(rename = "gasUsed")]
    gas_used: u64,
    #[serde(rename = "gasLimit")]
    gas_limit: u64,
}

#[derive(Serialize, Deserialize)]
struct WireStep {
    op: String,
    pc: u64,
    depth: u32,
    address: String,
    stack: Vec<String>,
    result: Option<String>,
    memory: String,
}

fn format_err(line: usize, reason: impl Into<String>) -> IngestError {
    IngestError::Format {
        line,
        reason: reason.into(),
    }
}

fn parse_fixed<const N: usize>(line: usize, field: &str, s: &str) -> Result<[u8; N], IngestError> {
    let bytes =
        parse_hex(s).map_err(|e| format_err(line, format!("{field}: invalid hex: {e}")))?;
    if bytes.len() > N {
        return Err(format_err(line, format!("{field}: longer than {N} bytes")));
    }
    let mut out = [0u8; N];
    out[N - bytes.len()..].copy_from_slice(&bytes);
    Ok(out)
}

fn parse_word(line: usize, field: &str, s: &str) -> Result<Word, IngestError> {
    Ok(Word(parse_fixed::<32>(line, field, s)?))
}

/// Reads a line-delimited JSON trace: each transaction is a `tx` header
/// line followed by its `step` lines. Blank lines are ignored. Sequence
/// numbers are assigned globally in input order.
pub fn ingest_trace<R: BufRead>(reader: R) -> Result<Vec<TransactionTrace>, IngestError> {
    let mut traces: Vec<TransactionTrace> = Vec::new();
    let mut top_first = true;
    let mut seq = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let wire: WireLine = serde_json::from_str(trimmed)
            .map_err(|e| format_err(lineno, format!("invalid record: {e}")))?;
        match wire {
            WireLine::Tx(tx) => {
                top_first = match tx.stack_order.as_str() {
                    "top_first" => true,
                    "bottom_first" => false,
                    other => {
                        return Err(format_err(
                            lineno,
                            format!("stack_order must be top_first or bottom_first, got {other}"),
                        ))
                    }
                };
                traces.push(TransactionTrace {
                    tx: TransactionContext {
                        hash: Hash32(parse_fixed::<32>(lineno, "hash", &tx.hash)?),
                        from: Address(parse_fixed::<20>(lineno, "from", &tx.from)?),
                        to: Address(parse_fixed::<20>(lineno, "to", &tx.to)?),
                        value: parse_word(lineno, "value", &tx.value)?,
                        gas_limit: tx.gas,
                        input: parse_hex(&tx.input)
                            .map_err(|e| format_err(lineno, format!("input: invalid hex: {e}")))?,
                    },
                    block: BlockContext {
                        number: tx.block.number,
                        timestamp: tx.block.timestamp,
                        gas_used: tx.block.gas_used,
                        gas_limit: tx.block.gas_limit,
                    },
                    records: Vec::new(),
                });
            }
            WireLine::Step(step) => {
                let current = traces.last_mut().ok_or(IngestError::Order { line: lineno })?;
                let opcode = Opcode::from_mnemonic(&step.op)
                    .ok_or_else(|| format_err(lineno, format!("unknown opcode `{}`", step.op)))?;
                if step.depth == 0 {
                    return Err(format_err(lineno, "depth must be at least 1"));
                }
                let mut stack = step
                    .stack
                    .iter()
                    .map(|s| parse_word(lineno, "stack", s))
                    .collect::<Result<Vec<_>, _>>()?;
                if !top_first {
                    stack.reverse();
                }
                if stack.len() != opcode.operand_arity() {
                    return Err(format_err(
                        lineno,
                        format!(
                            "{} expects {} stack operands, got {}",
                            step.op,
                            opcode.operand_arity(),
                            stack.len()
                        ),
                    ));
                }
                // Records carry a result exactly when the opcode pushes a
                // single value; multi-result ops (DUP/SWAP) carry none.
                let result = match (&step.result, opcode.result_arity()) {
                    (Some(s), 1) => Some(parse_word(lineno, "result", s)?),
                    (None, 1) => {
                        return Err(format_err(
                            lineno,
                            format!("{} pushes a result but record carries none", step.op),
                        ))
                    }
                    (None, _) => None,
                    (Some(_), n) => {
                        return Err(format_err(
                            lineno,
                            format!("{} carries a result but pushes {n}", step.op),
                        ))
                    }
                };
                let memory = parse_hex(&step.memory)
                    .map_err(|e| format_err(lineno, format!("memory: invalid hex: {e}")))?;
                current.records.push(TraceRecord {
                    opcode,
                    pc: step.pc,
                    depth: step.depth,
                    address: Address(parse_fixed::<20>(lineno, "address", &step.address)?),
                    stack,
                    result,
                    memory,
                    seq,
                });
                seq += 1;
            }
        }
    }
    Ok(traces)
}

/// Serializes traces into the canonical wire form: `top_first` stack order,
/// lowercase minimal hex words, one JSON object per line.
pub fn export_trace(traces: &[TransactionTrace]) -> String {
    let mut out = String::new();
    for t in traces {
        let tx = WireLine::Tx(WireTx {
            hash: t.tx.hash.to_hex(),
            from: t.tx.from.to_hex(),
            to: t.tx.to.to_hex(),
            value: t.tx.value.to_hex(),
            gas: t.tx.gas_limit,
            input: bytes_to_hex(&t.tx.input),
            block: WireBlock {
                number: t.block.number,
                timestamp: t.block.timestamp,
                gas_used: t.block.gas_used,
                gas_limit: t.block.gas_limit,
            },
            stack_order: "top_first".into(),
        });
        out.push_str(&serde_json::to_string(&tx).expect("serialize"));
        out.push('\n');
        for r in &t.records {
            let step = WireLine::Step(WireStep {
                op: r.opcode.mnemonic().into(),
                pc: r.pc,
                depth: r.depth,
                address: r.address.to_hex(),
                stack: r.stack.iter().map(|w| w.to_hex()).collect(),
                result: r.result.map(|w| w.to_hex()),
                memory: bytes_to_hex(&r.memory),
            });
            out.push_str(&serde_json::to_string(&step).expect("serialize"));
            out.push('\n');
        }
    }
    out
}
