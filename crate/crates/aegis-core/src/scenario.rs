//! Deterministic demonstration scenarios.
//!
//! Each scenario assembles a handful of small contracts, runs a fixed
//! transaction sequence through the embedded interpreter and returns the
//! resulting traces. Attack scenarios come paired with benign twins that run
//! the same contracts innocently, so detection results can be checked for
//! both true positives and true negatives.

use std::collections::HashMap;

use crate::evm::{execute_transaction, TxRequest, TxStatus, World};
use crate::trace::{BlockContext, TransactionTrace};
use crate::word::{keccak256, Address, Hash32, Word};

const BANK_NO_LOCK: &str = include_str!("../fixtures/asm/bank_no_lock.asm");
const BANK_BUGGY_LOCK: &str = include_str!("../fixtures/asm/bank_buggy_lock.asm");
const BANK_SECURE_LOCK: &str = include_str!("../fixtures/asm/bank_secure_lock.asm");
const BANK_UNCONDITIONAL: &str = include_str!("../fixtures/asm/bank_unconditional.asm");
const ATTACKER_SAME: &str = include_str!("../fixtures/asm/attacker_same.asm");
const ATTACKER_CROSS: &str = include_str!("../fixtures/asm/attacker_cross.asm");
const PARITY_LIB: &str = include_str!("../fixtures/asm/parity_lib.asm");
const PARITY_WALLET: &str = include_str!("../fixtures/asm/parity_wallet.asm");
const PARITY_ORCH1: &str = include_str!("../fixtures/asm/parity_orch1.asm");
const PARITY_ORCH2: &str = include_str!("../fixtures/asm/parity_orch2.asm");
const OVERFLOW_ADD: &str = include_str!("../fixtures/asm/overflow_add.asm");
const OVERFLOW_MUL: &str = include_str!("../fixtures/asm/overflow_mul.asm");
const UNDERFLOW: &str = include_str!("../fixtures/asm/underflow.asm");
const TIMESTAMP_VULN: &str = include_str!("../fixtures/asm/timestamp_vuln.asm");
const MARKET: &str = include_str!("../fixtures/asm/market.asm");
const LOOP: &str = include_str!("../fixtures/asm/loop.asm");

/// Externally owned accounts used across the scenarios.
pub const DEPLOYER: Address = Address([0x11; 20]);
pub const USER1: Address = Address([0x22; 20]);
pub const ATTACKER: Address = Address([0x33; 20]);
pub const USER_A: Address = Address([0x44; 20]);
pub const USER_B: Address = Address([0x55; 20]);

const DEFAULT_GAS: u64 = 1_000_000;

/// A named transaction sequence plus the world state it left behind.
pub struct Scenario {
    pub name: String,
    pub description: &'static str,
    pub traces: Vec<TransactionTrace>,
    pub world: World,
}

/// Names of all registered scenarios, in a stable order.
pub fn scenario_names() -> &'static [&'static str] {
    &[
        "same_function_reentrancy",
        "same_function_reentrancy_benign",
        "cross_function_reentrancy",
        "cross_function_reentrancy_benign",
        "vuln_bank_no_lock_same",
        "vuln_bank_no_lock_cross",
        "vuln_bank_buggy_lock_same",
        "vuln_bank_buggy_lock_cross",
        "vuln_bank_secure_lock_same",
        "vuln_bank_secure_lock_cross",
        "unconditional_reentrancy",
        "unconditional_reentrancy_benign",
        "parity_hack_1",
        "parity_hack_1_single_tx",
        "parity_hack_2",
        "parity_hack_2_benign",
        "integer_overflow_add",
        "integer_overflow_add_benign",
        "integer_overflow_mul",
        "integer_overflow_mul_benign",
        "integer_underflow",
        "integer_underflow_benign",
        "timestamp_dependence",
        "timestamp_dependence_benign",
        "tx_order_dependency",
        "tx_order_dependency_benign",
        "perf_loop",
    ]
}

/// Builds a scenario by name.
pub fn build_scenario(name: &str) -> Option<Scenario> {
    let s = match name {
        "same_function_reentrancy" => bank_attack(name, BANK_NO_LOCK, ATTACKER_SAME),
        "same_function_reentrancy_benign" => bank_benign(name, BANK_NO_LOCK),
        "cross_function_reentrancy" => bank_attack(name, BANK_NO_LOCK, ATTACKER_CROSS),
        "cross_function_reentrancy_benign" => bank_benign(name, BANK_NO_LOCK),
        "vuln_bank_no_lock_same" => bank_attack(name, BANK_NO_LOCK, ATTACKER_SAME),
        "vuln_bank_no_lock_cross" => bank_attack(name, BANK_NO_LOCK, ATTACKER_CROSS),
        "vuln_bank_buggy_lock_same" => bank_attack(name, BANK_BUGGY_LOCK, ATTACKER_SAME),
        "vuln_bank_buggy_lock_cross" => bank_attack(name, BANK_BUGGY_LOCK, ATTACKER_CROSS),
        "vuln_bank_secure_lock_same" => bank_attack(name, BANK_SECURE_LOCK, ATTACKER_SAME),
        "vuln_bank_secure_lock_cross" => bank_attack(name, BANK_SECURE_LOCK, ATTACKER_CROSS),
        "unconditional_reentrancy" => bank_attack(name, BANK_UNCONDITIONAL, ATTACKER_SAME),
        "unconditional_reentrancy_benign" => bank_benign(name, BANK_UNCONDITIONAL),
        "parity_hack_1" => parity_hack_1(name),
        "parity_hack_1_single_tx" => parity_hack_1_single_tx(name),
        "parity_hack_2" => parity_hack_2(name),
        "parity_hack_2_benign" => parity_hack_2_benign(name),
        "integer_overflow_add" => {
            arith(name, OVERFLOW_ADD, Word([0xff; 32]))
        }
        "integer_overflow_add_benign" => arith(name, OVERFLOW_ADD, Word::from_u64(5)),
        "integer_overflow_mul" => {
            let mut x = [0u8; 32];
            x[0] = 0x80;
            arith(name, OVERFLOW_MUL, Word(x))
        }
        "integer_overflow_mul_benign" => arith(name, OVERFLOW_MUL, Word::from_u64(3)),
        "integer_underflow" => arith(name, UNDERFLOW, Word::from_u64(6)),
        "integer_underflow_benign" => arith(name, UNDERFLOW, Word::from_u64(3)),
        "timestamp_dependence" => timestamp(name, 2000),
        "timestamp_dependence_benign" => timestamp(name, 500),
        "tx_order_dependency" => market(name, 5, 5),
        "tx_order_dependency_benign" => market(name, 5, 6),
        "perf_loop" => build_loop_scenario(62, 3),
        _ => return None,
    };
    Some(s)
}

/// Long straight-line workload: `tx_count` transactions, each looping
/// `iterations` times over a storage counter (16 records per iteration plus
/// 9 of framing, so 62 iterations produce a 1001-record transaction).
pub fn build_loop_scenario(iterations: u64, tx_count: usize) -> Scenario {
    let mut b = Builder::new("perf_loop");
    let counter = b.deploy(LOOP, &[]);
    for i in 0..tx_count {
        let input = encode_words(&[Word::ZERO, Word::from_u64(iterations)]);
        b.send(USER1, counter, 0, input, 1 + i as u64, 1000);
    }
    b.finish("storage counter loop used for long-trace measurements")
}

// ---------------------------------------------------------------------------
// Scenario builders
// ---------------------------------------------------------------------------

fn bank_attack(name: &str, bank_asm: &str, attacker_asm: &str) -> Scenario {
    let mut b = Builder::new(name);
    let bank = b.deploy(bank_asm, &[]);
    let attacker = b.deploy(attacker_asm, &[("BANK", bank)]);
    b.world.fund(USER1, Word::from_u64(100));
    b.world.fund(ATTACKER, Word::from_u64(100));
    // An honest user seeds the bank, then the attacker deposits a little and
    // pulls its credit out through its reentrant fallback.
    b.send(USER1, bank, 20, encode_words(&[Word::from_u64(1)]), 1, 1000);
    b.send(ATTACKER, attacker, 5, encode_words(&[Word::from_u64(1)]), 2, 1010);
    b.finish("deposit/withdraw bank under a reentrancy attack")
}

fn bank_benign(name: &str, bank_asm: &str) -> Scenario {
    let mut b = Builder::new(name);
    let bank = b.deploy(bank_asm, &[]);
    b.world.fund(USER1, Word::from_u64(100));
    b.send(USER1, bank, 20, encode_words(&[Word::from_u64(1)]), 1, 1000);
    b.send(USER1, bank, 0, encode_words(&[Word::from_u64(2)]), 2, 1010);
    b.finish("honest deposit and withdrawal against the bank")
}

fn parity_hack_1(name: &str) -> Scenario {
    let mut b = Builder::new(name);
    let lib = b.deploy(PARITY_LIB, &[]);
    let wallet = b.deploy(PARITY_WALLET, &[("LIB", lib)]);
    b.world.fund(wallet, Word::from_u64(50));
    b.world.fund(ATTACKER, Word::from_u64(10));
    // Uninitialized wallet: anyone can claim ownership, then drain it in a
    // later transaction.
    let claim = encode_words(&[Word::from_u64(1), Word::from_address(ATTACKER)]);
    b.send(ATTACKER, wallet, 0, claim, 1, 1000);
    let drain = encode_words(&[
        Word::from_u64(2),
        Word::from_address(ATTACKER),
        Word::from_u64(5),
    ]);
    b.send(ATTACKER, wallet, 0, drain, 2, 1010);
    b.finish("wallet ownership takeover followed by a drain in a second transaction")
}

fn parity_hack_1_single_tx(name: &str) -> Scenario {
    let mut b = Builder::new(name);
    let lib = b.deploy(PARITY_LIB, &[]);
    let wallet = b.deploy(PARITY_WALLET, &[("LIB", lib)]);
    let orch = b.deploy(PARITY_ORCH1, &[("WALLET", wallet)]);
    b.world.fund(wallet, Word::from_u64(50));
    b.world.fund(ATTACKER, Word::from_u64(10));
    b.send(ATTACKER, orch, 0, Vec::new(), 1, 1000);
    b.finish("wallet initialization and spend fused into one transaction")
}

fn parity_hack_2(name: &str) -> Scenario {
    let mut b = Builder::new(name);
    let lib = b.deploy(PARITY_LIB, &[]);
    b.world.fund(lib, Word::from_u64(50));
    b.world.fund(ATTACKER, Word::from_u64(10));
    // Claim ownership of the bare library, then kill it.
    let claim = encode_words(&[Word::from_u64(1), Word::from_address(ATTACKER)]);
    b.send(ATTACKER, lib, 0, claim, 1, 1000);
    let kill = encode_words(&[Word::from_u64(3), Word::from_address(ATTACKER)]);
    b.send(ATTACKER, lib, 0, kill, 2, 1010);
    b.finish("library ownership takeover followed by selfdestruct in a second transaction")
}

fn parity_hack_2_benign(name: &str) -> Scenario {
    let mut b = Builder::new(name);
    let lib = b.deploy(PARITY_LIB, &[]);
    let orch = b.deploy(PARITY_ORCH2, &[("LIB", lib)]);
    b.world.fund(lib, Word::from_u64(10));
    b.world.fund(ATTACKER, Word::from_u64(10));
    b.send(ATTACKER, orch, 0, Vec::new(), 1, 1000);
    b.finish("library initialization and teardown within one transaction")
}

fn arith(name: &str, asm: &str, x: Word) -> Scenario {
    let mut b = Builder::new(name);
    let contract = b.deploy(asm, &[]);
    b.world.fund(contract, Word::from_u64(10));
    b.world.fund(ATTACKER, Word::from_u64(10));
    b.send(ATTACKER, contract, 0, encode_words(&[Word::ZERO, x]), 1, 1000);
    b.finish("caller-controlled arithmetic feeding a payout")
}

fn timestamp(name: &str, ts: u64) -> Scenario {
    let mut b = Builder::new(name);
    let contract = b.deploy(TIMESTAMP_VULN, &[]);
    b.world.fund(contract, Word::from_u64(10));
    b.world.fund(ATTACKER, Word::from_u64(10));
    b.send(ATTACKER, contract, 0, Vec::new(), 1, ts);
    b.finish("payout gated on the block timestamp")
}

fn market(name: &str, block_a: u64, block_b: u64) -> Scenario {
    let mut b = Builder::new(name);
    let market = b.deploy(MARKET, &[]);
    b.world.fund(USER_A, Word::from_u64(10));
    b.world.fund(USER_B, Word::from_u64(10));
    b.send(
        USER_A,
        market,
        0,
        encode_words(&[Word::from_u64(1), Word::from_u64(42)]),
        block_a,
        1000,
    );
    b.send(USER_B, market, 0, encode_words(&[Word::from_u64(2)]), block_b, 1000);
    b.finish("price update and purchase racing within (or across) blocks")
}

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

struct Builder {
    name: String,
    world: World,
    next_seq: u64,
    tx_index: u64,
    traces: Vec<TransactionTrace>,
}

impl Builder {
    fn new(name: &str) -> Builder {
        Builder {
            name: name.to_string(),
            world: World::default(),
            next_seq: 0,
            tx_index: 0,
            traces: Vec::new(),
        }
    }

    fn deploy(&mut self, asm: &str, subs: &[(&str, Address)]) -> Address {
        let mut map = HashMap::new();
        for (key, addr) in subs {
            map.insert(key.to_string(), format!("0x{}", hex_bytes(&addr.0)));
        }
        let code = crate::evm::asm::assemble(asm, &map)
            .unwrap_or_else(|e| panic!("scenario {}: bad fixture: {e}", self.name));
        self.world.deploy(DEPLOYER, code)
    }

    fn send(
        &mut self,
        from: Address,
        to: Address,
        value: u64,
        input: Vec<u8>,
        block_number: u64,
        timestamp: u64,
    ) {
        let mut preimage = self.name.as_bytes().to_vec();
        preimage.extend_from_slice(&from.0);
        preimage.extend_from_slice(&self.tx_index.to_be_bytes());
        let hash = Hash32(keccak256(&preimage).0);
        self.tx_index += 1;
        let req = TxRequest {
            hash,
            from,
            to,
            value: Word::from_u64(value),
            gas_limit: DEFAULT_GAS,
            input,
            block: BlockContext {
                number: block_number,
                timestamp,
                gas_used: 0,
                gas_limit: 30_000_000,
            },
        };
        let outcome = execute_transaction(&mut self.world, &req, &mut self.next_seq);
        assert_eq!(
            outcome.status,
            TxStatus::Success,
            "scenario {}: transaction {} failed at the interpreter level",
            self.name,
            self.tx_index - 1,
        );
        self.traces.push(outcome.trace);
    }

    fn finish(self, description: &'static str) -> Scenario {
        Scenario {
            name: self.name,
            description,
            traces: self.traces,
            world: self.world,
        }
    }
}

/// Concatenates 32-byte words into a calldata buffer; word 0 is the selector.
fn encode_words(words: &[Word]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 32);
    for w in words {
        out.extend_from_slice(&w.0);
    }
    out
}

fn hex_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
