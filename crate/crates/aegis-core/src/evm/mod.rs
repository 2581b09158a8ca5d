//! A deterministic mini-EVM sufficient to reproduce the exploit scenarios:
//! full recording of every executed instruction into the trace model, a flat
//! gas schedule, depth-journaled state, and the call family with EVM
//! delegation semantics.
//!
//! Intentional simplifications against mainnet semantics: gas costs are 1
//! per instruction (40 for the call family, 0 for STOP/RETURN/REVERT), calls
//! always forward all remaining gas, and there is no intrinsic transaction
//! cost. None of these affect which instructions execute in the scenarios.

pub mod asm;

use crate::opcode::Opcode;
use crate::trace::{BlockContext, TraceRecord, TransactionContext, TransactionTrace};
use crate::word::{keccak256, Address, Hash32, Word};
use std::collections::{HashMap, HashSet};

const CALL_GAS: u64 = 40;
const STEP_GAS: u64 = 1;
const MAX_DEPTH: u32 = 64;
const STACK_LIMIT: usize = 1024;
/// Memory offsets beyond this abort the frame instead of allocating.
const MEMORY_LIMIT: u64 = 1 << 32;

#[derive(Clone, Debug, Default)]
pub struct Account {
    pub balance: Word,
    pub code: Vec<u8>,
    pub storage: HashMap<Word, Word>,
    pub nonce: u64,
    pub killed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct World {
    pub accounts: HashMap<Address, Account>,
}

impl World {
    pub fn ensure(&mut self, addr: Address) -> &mut Account {
        self.accounts.entry(addr).or_default()
    }

    pub fn balance(&self, addr: Address) -> Word {
        self.accounts.get(&addr).map(|a| a.balance).unwrap_or(Word::ZERO)
    }

    pub fn storage_at(&self, addr: Address, key: Word) -> Word {
        self.accounts
            .get(&addr)
            .and_then(|a| a.storage.get(&key))
            .copied()
            .unwrap_or(Word::ZERO)
    }

    pub fn fund(&mut self, addr: Address, balance: Word) {
        self.ensure(addr).balance = balance;
    }

    /// Deploys code at a deterministic address derived from the deployer and
    /// its nonce, mirroring contract-address derivation.
    pub fn deploy(&mut self, deployer: Address, code: Vec<u8>) -> Address {
        let addr = self.next_address(deployer);
        self.ensure(deployer).nonce += 1;
        self.ensure(addr).code = code;
        addr
    }

    fn next_address(&mut self, creator: Address) -> Address {
        let nonce = self.ensure(creator).nonce;
        let mut buf = Vec::with_capacity(28);
        buf.extend_from_slice(&creator.0);
        buf.extend_from_slice(&nonce.to_be_bytes());
        let h = keccak256(&buf);
        let mut a = [0u8; 20];
        a.copy_from_slice(&h.0[12..]);
        Address(a)
    }
}

#[derive(Clone, Debug)]
pub struct TxRequest {
    pub hash: Hash32,
    pub from: Address,
    pub to: Address,
    pub value: Word,
    pub gas_limit: u64,
    pub input: Vec<u8>,
    pub block: BlockContext,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxStatus {
    Success,
    Reverted,
    OutOfGas,
}

#[derive(Clone, Debug)]
pub struct TxOutcome {
    pub status: TxStatus,
    pub gas_used: u64,
    pub trace: TransactionTrace,
}

#[derive(Clone, Debug)]
enum Failure {
    OutOfGas,
    StackUnderflow,
    StackOverflow,
    InvalidJump,
    InvalidOpcode,
    MemoryLimit,
    Reverted,
    BalanceOverdraft,
}

struct FrameResult {
    outcome: Result<Vec<u8>, Failure>,
    gas_left: u64,
}

struct CallParams {
    /// Account whose storage and balance the frame operates on; under
    /// DELEGATECALL/CALLCODE this differs from the account whose code runs.
    state_address: Address,
    caller: Address,
    value: Word,
    calldata: Vec<u8>,
    /// Value transfer applied on frame entry (inside the journal).
    transfer: Option<(Address, Address, Word)>,
}

struct TxEnv<'a> {
    block: &'a BlockContext,
    records: &'a mut Vec<TraceRecord>,
    next_seq: &'a mut u64,
}

fn valid_jumpdests(code: &[u8]) -> HashSet<u64> {
    let mut out = HashSet::new();
    let mut pc = 0usize;
    while pc < code.len() {
        let op = Opcode(code[pc]);
        if op == Opcode::JUMPDEST {
            out.insert(pc as u64);
        }
        pc += 1 + if op.is_push() { op.push_width() } else { 0 };
    }
    out
}

/// Executes a transaction against the world, appending every executed
/// instruction to the returned trace. A failed transaction leaves the world
/// unchanged but keeps the trace of what executed.
pub fn execute_transaction(world: &mut World, req: &TxRequest, next_seq: &mut u64) -> TxOutcome {
    let mut records = Vec::new();
    let mut env = TxEnv {
        block: &req.block,
        records: &mut records,
        next_seq,
    };
    let code = world
        .accounts
        .get(&req.to)
        .map(|a| a.code.clone())
        .unwrap_or_default();
    let params = CallParams {
        state_address: req.to,
        caller: req.from,
        value: req.value,
        calldata: req.input.clone(),
        transfer: Some((req.from, req.to, req.value)),
    };
    let result = run_frame(world, &mut env, params, code, 1, req.gas_limit);
    let status = match result.outcome {
        Ok(_) => TxStatus::Success,
        Err(Failure::OutOfGas) => TxStatus::OutOfGas,
        Err(_) => TxStatus::Reverted,
    };
    TxOutcome {
        status,
        gas_used: req.gas_limit - result.gas_left,
        trace: TransactionTrace {
            tx: TransactionContext {
                hash: req.hash,
                from: req.from,
                to: req.to,
                value: req.value,
                gas_limit: req.gas_limit,
                input: req.input.clone(),
            },
            block: req.block,
            records,
        },
    }
}

fn word_to_mem_offset(w: Word) -> Result<u64, Failure> {
    match w.to_u64() {
        Some(v) if v < MEMORY_LIMIT => Ok(v),
        _ => Err(Failure::MemoryLimit),
    }
}

fn expand(memory: &mut Vec<u8>, offset: u64, size: u64) -> Result<(), Failure> {
    if size == 0 {
        return Ok(());
    }
    let end = offset.checked_add(size).ok_or(Failure::MemoryLimit)?;
    if end > MEMORY_LIMIT {
        return Err(Failure::MemoryLimit);
    }
    // Word-aligned growth, as real memory expands in 32-byte increments.
    let aligned = (end + 31) / 32 * 32;
    if (memory.len() as u64) < aligned {
        memory.resize(aligned as usize, 0);
    }
    Ok(())
}

fn run_frame(
    world: &mut World,
    env: &mut TxEnv,
    params: CallParams,
    code: Vec<u8>,
    depth: u32,
    mut gas: u64,
) -> FrameResult {
    let snapshot = world.clone();
    let fail = |world: &mut World, f: Failure, gas_left: u64| {
        *world = snapshot.clone();
        FrameResult {
            outcome: Err(f),
            gas_left,
        }
    };

    if let Some((from, to, value)) = params.transfer {
        if !value.is_zero() {
            let from_balance = world.balance(from);
            if from_balance.to_biguint() < value.to_biguint() {
                return fail(world, Failure::BalanceOverdraft, gas);
            }
            world.ensure(from).balance = from_balance.wrapping_sub(value);
            let to_balance = world.balance(to);
            world.ensure(to).balance = to_balance.wrapping_add(value);
        }
    }
    if code.is_empty() {
        return FrameResult {
            outcome: Ok(Vec::new()),
            gas_left: gas,
        };
    }

    let jumpdests = valid_jumpdests(&code);
    let mut stack: Vec<Word> = Vec::new();
    let mut memory: Vec<u8> = Vec::new();
    let mut pc: u64 = 0;

    macro_rules! frame_fail {
        ($f:expr) => {
            return fail(world, $f, gas)
        };
    }

    loop {
        if pc as usize >= code.len() {
            // Running off the end behaves like STOP.
            return FrameResult {
                outcome: Ok(Vec::new()),
                gas_left: gas,
            };
        }
        let op = Opcode(code[pc as usize]);
        let Some(info) = op.info() else {
            frame_fail!(Failure::InvalidOpcode);
        };
        let cost = if info.is_call {
            CALL_GAS
        } else if matches!(op, Opcode::STOP | Opcode::RETURN | Opcode::REVERT) {
            0
        } else {
            STEP_GAS
        };
        if gas < cost {
            frame_fail!(Failure::OutOfGas);
        }
        gas -= cost;
        let arity = info.operands as usize;
        if stack.len() < arity {
            frame_fail!(Failure::StackUnderflow);
        }
        if stack.len() - arity + info.results as usize > STACK_LIMIT {
            frame_fail!(Failure::StackOverflow);
        }

        // Pre-state capture for the trace record.
        let operands: Vec<Word> = stack.iter().rev().take(arity).copied().collect();
        let mem_snapshot = memory.clone();
        let record_pc = pc;
        let emit = |env: &mut TxEnv, result: Option<Word>| -> usize {
            let seq = *env.next_seq;
            *env.next_seq += 1;
            env.records.push(TraceRecord {
                opcode: op,
                pc: record_pc,
                depth,
                address: params.state_address,
                stack: operands.clone(),
                result,
                memory: mem_snapshot.clone(),
                seq,
            });
            env.records.len() - 1
        };
        // Emits the record taking the result (if any) from the top of stack
        // after execution; used by every non-call opcode.
        macro_rules! finish {
            () => {{
                let result = if info.results == 1 {
                    Some(*stack.last().expect("result pushed"))
                } else {
                    None
                };
                emit(env, result);
            }};
        }

        let mut next_pc = pc + 1;
        match op {
            Opcode::STOP => {
                emit(env, None);
                return FrameResult {
                    outcome: Ok(Vec::new()),
                    gas_left: gas,
                };
            }
            Opcode::ADD | Opcode::MUL | Opcode::SUB | Opcode::DIV | Opcode::LT | Opcode::GT
            | Opcode::EQ | Opcode::AND | Opcode::OR => {
                let a = stack.pop().unwrap();
                let b = stack.pop().unwrap();
                let r = match op {
                    Opcode::ADD => a.wrapping_add(b),
                    Opcode::MUL => a.wrapping_mul(b),
                    Opcode::SUB => a.wrapping_sub(b),
                    Opcode::DIV => a.checked_div_evm(b),
                    Opcode::LT => Word::from_bool(a.to_biguint() < b.to_biguint()),
                    Opcode::GT => Word::from_bool(a.to_biguint() > b.to_biguint()),
                    Opcode::EQ => Word::from_bool(a == b),
                    Opcode::AND => a.bitand(b),
                    Opcode::OR => a.bitor(b),
                    _ => unreachable!(),
                };
                stack.push(r);
                finish!();
            }
            Opcode::ISZERO => {
                let a = stack.pop().unwrap();
                stack.push(Word::from_bool(a.is_zero()));
                finish!();
            }
            Opcode::NOT => {
                let a = stack.pop().unwrap();
                stack.push(a.bitnot());
                finish!();
            }
            Opcode::SHA3 => {
                let off = word_to_mem_offset(stack.pop().unwrap());
                let size = word_to_mem_offset(stack.pop().unwrap());
                let (off, size) = match (off, size) {
                    (Ok(o), Ok(s)) => (o, s),
                    _ => frame_fail!(Failure::MemoryLimit),
                };
                if expand(&mut memory, off, size).is_err() {
                    frame_fail!(Failure::MemoryLimit);
                }
                let h = keccak256(&memory[off as usize..(off + size) as usize]);
                stack.push(Word(h.0));
                finish!();
            }
            Opcode::ADDRESS => {
                stack.push(Word::from_address(params.state_address));
                finish!();
            }
            Opcode::BALANCE => {
                let a = stack.pop().unwrap().to_address();
                stack.push(world.balance(a));
                finish!();
            }
            Opcode::CALLER => {
                stack.push(Word::from_address(params.caller));
                finish!();
            }
            Opcode::CALLVALUE => {
                stack.push(params.value);
                finish!();
            }
            Opcode::CALLDATALOAD => {
                let i = stack.pop().unwrap();
                let mut out = [0u8; 32];
                if let Some(i) = i.to_u64() {
                    for (k, b) in out.iter_mut().enumerate() {
                        let idx = i as usize + k;
                        if idx < params.calldata.len() {
                            *b = params.calldata[idx];
                        }
                    }
                }
                stack.push(Word(out));
                finish!();
            }
            Opcode::CALLDATASIZE => {
                stack.push(Word::from_u64(params.calldata.len() as u64));
                finish!();
            }
            Opcode::CALLDATACOPY => {
                let dest = word_to_mem_offset(stack.pop().unwrap());
                let off = stack.pop().unwrap();
                let len = word_to_mem_offset(stack.pop().unwrap());
                let (dest, len) = match (dest, len) {
                    (Ok(d), Ok(l)) => (d, l),
                    _ => frame_fail!(Failure::MemoryLimit),
                };
                if expand(&mut memory, dest, len).is_err() {
                    frame_fail!(Failure::MemoryLimit);
                }
                for k in 0..len {
                    let src = off.to_u64().and_then(|o| o.checked_add(k));
                    memory[(dest + k) as usize] = src
                        .and_then(|s| params.calldata.get(s as usize))
                        .copied()
                        .unwrap_or(0);
                }
                finish!();
            }
            Opcode::TIMESTAMP => {
                stack.push(Word::from_u64(env.block.timestamp));
                finish!();
            }
            Opcode::NUMBER => {
                stack.push(Word::from_u64(env.block.number));
                finish!();
            }
            Opcode::POP => {
                stack.pop();
                finish!();
            }
            Opcode::MLOAD => {
                let off = match word_to_mem_offset(stack.pop().unwrap()) {
                    Ok(o) => o,
                    Err(f) => frame_fail!(f),
                };
                if expand(&mut memory, off, 32).is_err() {
                    frame_fail!(Failure::MemoryLimit);
                }
                let mut w = [0u8; 32];
                w.copy_from_slice(&memory[off as usize..off as usize + 32]);
                stack.push(Word(w));
                finish!();
            }
            Opcode::MSTORE | Opcode::MSTORE8 => {
                let off = match word_to_mem_offset(stack.pop().unwrap()) {
                    Ok(o) => o,
                    Err(f) => frame_fail!(f),
                };
                let v = stack.pop().unwrap();
                let size = if op == Opcode::MSTORE { 32 } else { 1 };
                if expand(&mut memory, off, size).is_err() {
                    frame_fail!(Failure::MemoryLimit);
                }
                if op == Opcode::MSTORE {
                    memory[off as usize..off as usize + 32].copy_from_slice(&v.0);
                } else {
                    memory[off as usize] = v.0[31];
                }
                finish!();
            }
            Opcode::SLOAD => {
                let k = stack.pop().unwrap();
                stack.push(world.storage_at(params.state_address, k));
                finish!();
            }
            Opcode::SSTORE => {
                let k = stack.pop().unwrap();
                let v = stack.pop().unwrap();
                world.ensure(params.state_address).storage.insert(k, v);
                finish!();
            }
            Opcode::JUMP => {
                let dest = stack.pop().unwrap();
                match dest.to_u64() {
                    Some(d) if jumpdests.contains(&d) => next_pc = d,
                    _ => frame_fail!(Failure::InvalidJump),
                }
                finish!();
            }
            Opcode::JUMPI => {
                let dest = stack.pop().unwrap();
                let cond = stack.pop().unwrap();
                if !cond.is_zero() {
                    match dest.to_u64() {
                        Some(d) if jumpdests.contains(&d) => next_pc = d,
                        _ => frame_fail!(Failure::InvalidJump),
                    }
                }
                finish!();
            }
            Opcode::PC => {
                stack.push(Word::from_u64(record_pc));
                finish!();
            }
            Opcode::GAS => {
                stack.push(Word::from_u64(gas));
                finish!();
            }
            Opcode::JUMPDEST => {
                finish!();
            }
            Opcode::RETURN | Opcode::REVERT => {
                let off = word_to_mem_offset(stack.pop().unwrap());
                let size = word_to_mem_offset(stack.pop().unwrap());
                let (off, size) = match (off, size) {
                    (Ok(o), Ok(s)) => (o, s),
                    _ => frame_fail!(Failure::MemoryLimit),
                };
                if expand(&mut memory, off, size).is_err() {
                    frame_fail!(Failure::MemoryLimit);
                }
                let data = memory[off as usize..(off + size) as usize].to_vec();
                emit(env, None);
                if op == Opcode::RETURN {
                    return FrameResult {
                        outcome: Ok(data),
                        gas_left: gas,
                    };
                }
                return fail(world, Failure::Reverted, gas);
            }
            Opcode::SELFDESTRUCT => {
                let beneficiary = stack.pop().unwrap().to_address();
                emit(env, None);
                let balance = world.balance(params.state_address);
                if beneficiary != params.state_address {
                    let b = world.balance(beneficiary);
                    world.ensure(beneficiary).balance = b.wrapping_add(balance);
                    world.ensure(params.state_address).balance = Word::ZERO;
                }
                world.ensure(params.state_address).killed = true;
                return FrameResult {
                    outcome: Ok(Vec::new()),
                    gas_left: gas,
                };
            }
            Opcode::CALL | Opcode::CALLCODE | Opcode::DELEGATECALL => {
                let _gas_arg = stack.pop().unwrap();
                let target = stack.pop().unwrap().to_address();
                let value = if op == Opcode::DELEGATECALL {
                    Word::ZERO
                } else {
                    stack.pop().unwrap()
                };
                let in_off = word_to_mem_offset(stack.pop().unwrap());
                let in_size = word_to_mem_offset(stack.pop().unwrap());
                let out_off = word_to_mem_offset(stack.pop().unwrap());
                let out_size = word_to_mem_offset(stack.pop().unwrap());
                let (in_off, in_size, out_off, out_size) =
                    match (in_off, in_size, out_off, out_size) {
                        (Ok(a), Ok(b), Ok(c), Ok(d)) => (a, b, c, d),
                        _ => frame_fail!(Failure::MemoryLimit),
                    };
                if expand(&mut memory, in_off, in_size).is_err()
                    || expand(&mut memory, out_off, out_size).is_err()
                {
                    frame_fail!(Failure::MemoryLimit);
                }
                let args = memory[in_off as usize..(in_off + in_size) as usize].to_vec();
                // The record goes in before the callee's records; its result
                // is patched once the call's status is known.
                let record_idx = emit(env, None);

                let target_account = world.accounts.get(&target);
                let target_killed = target_account.map(|a| a.killed).unwrap_or(false);
                let target_code = target_account
                    .map(|a| a.code.clone())
                    .unwrap_or_default();
                let balance_ok = op == Opcode::DELEGATECALL
                    || world.balance(params.state_address).to_biguint() >= value.to_biguint();

                let status = if depth >= MAX_DEPTH || target_killed || !balance_ok {
                    Word::ZERO
                } else if target_code.is_empty() && op == Opcode::CALL {
                    // Plain value transfer to an account without code.
                    if !value.is_zero() {
                        let from = params.state_address;
                        let fb = world.balance(from);
                        world.ensure(from).balance = fb.wrapping_sub(value);
                        let tb = world.balance(target);
                        world.ensure(target).balance = tb.wrapping_add(value);
                    }
                    Word::one()
                } else {
                    let child = match op {
                        Opcode::CALL => CallParams {
                            state_address: target,
                            caller: params.state_address,
                            value,
                            calldata: args,
                            transfer: Some((params.state_address, target, value)),
                                            },
                        Opcode::CALLCODE => CallParams {
                            state_address: params.state_address,
                            caller: params.state_address,
                            value,
                            calldata: args,
                            transfer: None,
                                            },
                        Opcode::DELEGATECALL => CallParams {
                            state_address: params.state_address,
                            caller: params.caller,
                            value: params.value,
                            calldata: args,
                            transfer: None,
                                            },
                        _ => unreachable!(),
                    };
                    let sub = run_frame(world, env, child, target_code, depth + 1, gas);
                    gas = sub.gas_left;
                    match sub.outcome {
                        Ok(ret) => {
                            let n = ret.len().min(out_size as usize);
                            memory[out_off as usize..out_off as usize + n]
                                .copy_from_slice(&ret[..n]);
                            Word::one()
                        }
                        Err(_) => Word::ZERO,
                    }
                };
                stack.push(status);
                env.records[record_idx].result = Some(status);
            }
            Opcode::CREATE => {
                let value = stack.pop().unwrap();
                let off = word_to_mem_offset(stack.pop().unwrap());
                let size = word_to_mem_offset(stack.pop().unwrap());
                let (off, size) = match (off, size) {
                    (Ok(o), Ok(s)) => (o, s),
                    _ => frame_fail!(Failure::MemoryLimit),
                };
                if expand(&mut memory, off, size).is_err() {
                    frame_fail!(Failure::MemoryLimit);
                }
                let init = memory[off as usize..(off + size) as usize].to_vec();
                let record_idx = emit(env, None);
                let result = if depth >= MAX_DEPTH
                    || world.balance(params.state_address).to_biguint() < value.to_biguint()
                {
                    Word::ZERO
                } else {
                    let new_addr = world.next_address(params.state_address);
                    world.ensure(params.state_address).nonce += 1;
                    let child = CallParams {
                        state_address: new_addr,
                        caller: params.state_address,
                        value,
                        calldata: Vec::new(),
                        transfer: Some((params.state_address, new_addr, value)),
                    };
                    let sub = run_frame(world, env, child, init, depth + 1, gas);
                    gas = sub.gas_left;
                    match sub.outcome {
                        Ok(code) => {
                            world.ensure(new_addr).code = code;
                            Word::from_address(new_addr)
                        }
                        Err(_) => Word::ZERO,
                    }
                };
                stack.push(result);
                env.records[record_idx].result = Some(result);
            }
            _ if op.is_push() => {
                let width = op.push_width();
                let mut w = [0u8; 32];
                for k in 0..width {
                    let idx = pc as usize + 1 + k;
                    if idx < code.len() {
                        w[32 - width + k] = code[idx];
                    }
                }
                stack.push(Word(w));
                next_pc = pc + 1 + width as u64;
                finish!();
            }
            _ if op.is_dup() => {
                let n = (op.0 - 0x80 + 1) as usize;
                let v = stack[stack.len() - n];
                stack.push(v);
                emit(env, None);
            }
            _ if op.is_swap() => {
                let n = (op.0 - 0x90 + 1) as usize;
                let top = stack.len() - 1;
                stack.swap(top, top - n);
                emit(env, None);
            }
            _ => frame_fail!(Failure::InvalidOpcode),
        }
        pc = next_pc;
    }
}
