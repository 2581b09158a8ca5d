//! Random but well-formed transaction traces for differential testing.
//!
//! Records are generated against a small simulated machine so that every
//! invariant the ingester and call-tree builder enforce holds: depths only
//! grow by one directly after a call record, every record carries exactly
//! its opcode's operand arity, and a result word is present exactly when the
//! opcode pushes one. Values are drawn from a small pool so that equality
//! clauses in generated patterns actually fire.

use aegis_core::opcode::{pattern_opcode, Opcode, PATTERN_MNEMONICS};
use aegis_core::trace::{BlockContext, TraceRecord, TransactionContext, TransactionTrace};
use aegis_core::word::{keccak256, Address, Word};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const VALUE_POOL: [u64; 4] = [0, 1, 2, 5];
const ADDRESS_POOL: [Address; 3] = [
    Address([0xaa; 20]),
    Address([0xbb; 20]),
    Address([0xcc; 20]),
];

fn pool_word(rng: &mut ChaCha8Rng) -> Word {
    Word::from_u64(VALUE_POOL[rng.gen_range(0..VALUE_POOL.len())])
}

fn pool_address(rng: &mut ChaCha8Rng) -> Address {
    ADDRESS_POOL[rng.gen_range(0..ADDRESS_POOL.len())]
}

struct Frame {
    address: Address,
    /// Simulated operand-stack height, so drawn opcodes never underflow.
    stack_height: usize,
}

/// Generates 1..=3 transactions totalling at most `max_records` records.
pub fn random_traces(rng: &mut ChaCha8Rng, max_records: usize) -> Vec<TransactionTrace> {
    let opcodes: Vec<Opcode> = PATTERN_MNEMONICS
        .iter()
        .map(|m| pattern_opcode(m).expect("known mnemonic"))
        .collect();
    let tx_count = rng.gen_range(1..=3);
    let mut traces = Vec::with_capacity(tx_count);
    let mut seq = 0u64;
    let mut budget = max_records;
    for ti in 0..tx_count {
        let target = rng.gen_range(1..=budget.min(80).max(1));
        let mut records = Vec::with_capacity(target);
        let mut frames = vec![Frame {
            address: pool_address(rng),
            stack_height: 8,
        }];
        while records.len() < target {
            // Occasionally return from a nested frame; no record is emitted,
            // the next record simply appears one level up.
            if frames.len() > 1 && rng.gen_bool(0.18) {
                frames.pop();
                continue;
            }
            let height = frames.last().unwrap().stack_height;
            let candidates: Vec<Opcode> = opcodes
                .iter()
                .copied()
                .filter(|op| op.operand_arity() <= height)
                .collect();
            let op = candidates[rng.gen_range(0..candidates.len())];
            let depth = frames.len() as u32;
            let frame = frames.last_mut().unwrap();
            frame.stack_height = frame.stack_height - op.operand_arity() + op.result_arity();
            let record = TraceRecord {
                opcode: op,
                pc: rng.gen_range(0..8),
                depth,
                address: frame.address,
                stack: (0..op.operand_arity()).map(|_| pool_word(rng)).collect(),
                result: (op.result_arity() == 1).then(|| pool_word(rng)),
                memory: vec![0u8; rng.gen_range(0..3) * 32],
                seq,
            };
            seq += 1;
            records.push(record);
            if op.is_call() && frames.len() < 4 && rng.gen_bool(0.5) {
                let address = if op == Opcode::CALL || op == Opcode::CREATE {
                    pool_address(rng)
                } else {
                    // DELEGATECALL/CALLCODE run foreign code against the
                    // caller's own storage.
                    frames.last().unwrap().address
                };
                frames.push(Frame {
                    address,
                    stack_height: 8,
                });
            }
        }
        budget -= records.len();
        traces.push(TransactionTrace {
            tx: TransactionContext {
                hash: keccak256(&(ti as u64).to_be_bytes()),
                from: pool_address(rng),
                to: pool_address(rng),
                value: pool_word(rng),
                gas_limit: 100_000,
                input: Vec::new(),
            },
            block: BlockContext {
                number: rng.gen_range(1..=2),
                timestamp: 1_000 + ti as u64,
                gas_used: VALUE_POOL[rng.gen_range(0..VALUE_POOL.len())] * 100,
                gas_limit: 10_000,
            },
            records,
        });
        if budget == 0 {
            break;
        }
    }
    traces
}
