//! A tiny harness that drives the taint shadow machine through the same
//! per-record phase order the match engine uses: align frames, check sinks,
//! replay effects, then introduce new sources.

use aegis_core::flow::{TaintMachine, TaintTag};
use aegis_core::opcode::Opcode;
use aegis_core::pattern::PatternId;
use aegis_core::trace::TraceRecord;
use aegis_core::word::{Address, Hash32, Word};

pub const ACCOUNT: Address = Address([0x77; 20]);

pub fn tag(byte: u8) -> TaintTag {
    (PatternId(Hash32([byte; 32])), 0, 0)
}

pub struct Driver {
    pub machine: TaintMachine,
    seq: u64,
}

impl Driver {
    pub fn new() -> Driver {
        Driver {
            machine: TaintMachine::new(),
            seq: 0,
        }
    }

    fn record(&mut self, opcode: Opcode, stack: Vec<Word>) -> TraceRecord {
        assert_eq!(stack.len(), opcode.operand_arity(), "{opcode} arity");
        let record = TraceRecord {
            opcode,
            pc: self.seq,
            depth: 1,
            address: ACCOUNT,
            stack,
            result: (opcode.result_arity() == 1).then(Word::one),
            memory: Vec::new(),
            seq: self.seq,
        };
        self.seq += 1;
        record
    }

    /// Executes one instruction with no sink check or source introduction.
    pub fn step(&mut self, opcode: Opcode, stack: Vec<Word>) {
        let r = self.record(opcode, stack);
        self.machine.begin_record(&r);
        self.machine.propagate(&r);
    }

    /// Executes one instruction and marks it as the source of `tag`.
    pub fn step_introduce(&mut self, opcode: Opcode, stack: Vec<Word>, tag: TaintTag) {
        let r = self.record(opcode, stack);
        self.machine.begin_record(&r);
        self.machine.propagate(&r);
        self.machine.introduce(&r, tag);
    }

    /// Executes one instruction, reporting whether it consumed `tag`.
    pub fn check(&mut self, opcode: Opcode, stack: Vec<Word>, tag: &TaintTag) -> bool {
        let r = self.record(opcode, stack);
        self.machine.begin_record(&r);
        let hit = self.machine.taint_check(&r, tag);
        self.machine.propagate(&r);
        hit
    }

    /// Loads 32 bytes of calldata and tags the pushed word, leaving a fully
    /// tainted word on top of the shadow stack.
    pub fn push_tainted(&mut self, tag: TaintTag) {
        self.step_introduce(Opcode::CALLDATALOAD, vec![Word::ZERO], tag);
    }

    /// Pushes a clean word (the shadow machine tracks taint, not values).
    pub fn push_clean(&mut self) {
        self.step(Opcode::from_mnemonic("PUSH1").unwrap(), Vec::new());
    }
}
