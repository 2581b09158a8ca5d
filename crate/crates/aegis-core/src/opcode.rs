//! Opcode registry: mnemonics, operand/result arities, and classification
//! flags shared by the pattern language, the trace model and the executor.

use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Opcode(pub u8);

#[derive(Clone, Copy, Debug)]
pub struct OpcodeInfo {
    pub byte: u8,
    pub mnemonic: &'static str,
    /// Stack words consumed.
    pub operands: u8,
    /// Stack words produced (0 or 1).
    pub results: u8,
    /// Whether the opcode reads or writes memory via stack arguments.
    pub touches_memory: bool,
    /// CALL / CALLCODE / DELEGATECALL / CREATE.
    pub is_call: bool,
}

macro_rules! opcodes {
    ($(($name:ident, $byte:expr, $ops:expr, $res:expr, $mem:expr, $call:expr)),+ $(,)?) => {
        impl Opcode {
            $(pub const $name: Opcode = Opcode($byte);)+

            pub fn info(self) -> Option<OpcodeInfo> {
                match self.0 {
                    $($byte => Some(OpcodeInfo {
                        byte: $byte,
                        mnemonic: stringify!($name),
                        operands: $ops,
                        results: $res,
                        touches_memory: $mem,
                        is_call: $call,
                    }),)+
                    b if (0x60..=0x7f).contains(&b) => Some(OpcodeInfo {
                        byte: b,
                        mnemonic: push_mnemonic(b),
                        operands: 0,
                        results: 1,
                        touches_memory: false,
                        is_call: false,
                    }),
                    b if (0x80..=0x8f).contains(&b) => Some(OpcodeInfo {
                        byte: b,
                        mnemonic: dup_mnemonic(b),
                        operands: b - 0x80 + 1,
                        results: b - 0x80 + 2,
                        touches_memory: false,
                        is_call: false,
                    }),
                    b if (0x90..=0x9f).contains(&b) => Some(OpcodeInfo {
                        byte: b,
                        mnemonic: swap_mnemonic(b),
                        operands: b - 0x90 + 2,
                        results: b - 0x90 + 2,
                        touches_memory: false,
                        is_call: false,
                    }),
                    _ => None,
                }
            }

            pub fn from_mnemonic(name: &str) -> Option<Opcode> {
                match name {
                    $(stringify!($name) => Some(Opcode($byte)),)+
                    _ => {
                        if let Some(n) = name.strip_prefix("PUSH") {
                            let n: u8 = n.parse().ok()?;
                            if (1..=32).contains(&n) { return Some(Opcode(0x60 + n - 1)); }
                        }
                        if let Some(n) = name.strip_prefix("DUP") {
                            let n: u8 = n.parse().ok()?;
                            if (1..=16).contains(&n) { return Some(Opcode(0x80 + n - 1)); }
                        }
                        if let Some(n) = name.strip_prefix("SWAP") {
                            let n: u8 = n.parse().ok()?;
                            if (1..=16).contains(&n) { return Some(Opcode(0x90 + n - 1)); }
                        }
                        None
                    }
                }
            }
        }
    };
}

opcodes! {
    (STOP,         0x00, 0, 0, false, false),
    (ADD,          0x01, 2, 1, false, false),
    (MUL,          0x02, 2, 1, false, false),
    (SUB,          0x03, 2, 1, false, false),
    (DIV,          0x04, 2, 1, false, false),
    (LT,           0x10, 2, 1, false, false),
    (GT,           0x11, 2, 1, false, false),
    (EQ,           0x14, 2, 1, false, false),
    (ISZERO,       0x15, 1, 1, false, false),
    (AND,          0x16, 2, 1, false, false),
    (OR,           0x17, 2, 1, false, false),
    (NOT,          0x19, 1, 1, false, false),
    (SHA3,         0x20, 2, 1, true,  false),
    (ADDRESS,      0x30, 0, 1, false, false),
    (BALANCE,      0x31, 1, 1, false, false),
    (CALLER,       0x33, 0, 1, false, false),
    (CALLVALUE,    0x34, 0, 1, false, false),
    (CALLDATALOAD, 0x35, 1, 1, false, false),
    (CALLDATASIZE, 0x36, 0, 1, false, false),
    (CALLDATACOPY, 0x37, 3, 0, true,  false),
    (TIMESTAMP,    0x42, 0, 1, false, false),
    (NUMBER,       0x43, 0, 1, false, false),
    (POP,          0x50, 1, 0, false, false),
    (MLOAD,        0x51, 1, 1, true,  false),
    (MSTORE,       0x52, 2, 0, true,  false),
    (MSTORE8,      0x53, 2, 0, true,  false),
    (SLOAD,        0x54, 1, 1, false, false),
    (SSTORE,       0x55, 2, 0, false, false),
    (JUMP,         0x56, 1, 0, false, false),
    (JUMPI,        0x57, 2, 0, false, false),
    (PC,           0x58, 0, 1, false, false),
    (GAS,          0x5a, 0, 1, false, false),
    (JUMPDEST,     0x5b, 0, 0, false, false),
    (CREATE,       0xf0, 3, 1, true,  true),
    (CALL,         0xf1, 7, 1, true,  true),
    (CALLCODE,     0xf2, 7, 1, true,  true),
    (RETURN,       0xf3, 2, 0, true,  false),
    (DELEGATECALL, 0xf4, 6, 1, true,  true),
    (REVERT,       0xfd, 2, 0, true,  false),
    (SELFDESTRUCT, 0xff, 1, 0, false, false),
}

static PUSH_NAMES: [&str; 32] = [
    "PUSH1", "PUSH2", "PUSH3", "PUSH4", "PUSH5", "PUSH6", "PUSH7", "PUSH8", "PUSH9", "PUSH10",
    "PUSH11", "PUSH12", "PUSH13", "PUSH14", "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19",
    "PUSH20", "PUSH21", "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
    "PUSH29", "PUSH30", "PUSH31", "PUSH32",
];
static DUP_NAMES: [&str; 16] = [
    "DUP1", "DUP2", "DUP3", "DUP4", "DUP5", "DUP6", "DUP7", "DUP8", "DUP9", "DUP10", "DUP11",
    "DUP12", "DUP13", "DUP14", "DUP15", "DUP16",
];
static SWAP_NAMES: [&str; 16] = [
    "SWAP1", "SWAP2", "SWAP3", "SWAP4", "SWAP5", "SWAP6", "SWAP7", "SWAP8", "SWAP9", "SWAP10",
    "SWAP11", "SWAP12", "SWAP13", "SWAP14", "SWAP15", "SWAP16",
];

fn push_mnemonic(byte: u8) -> &'static str {
    PUSH_NAMES[(byte - 0x60) as usize]
}

fn dup_mnemonic(byte: u8) -> &'static str {
    DUP_NAMES[(byte - 0x80) as usize]
}

fn swap_mnemonic(byte: u8) -> &'static str {
    SWAP_NAMES[(byte - 0x90) as usize]
}

impl Opcode {
    pub fn mnemonic(self) -> &'static str {
        self.info().map(|i| i.mnemonic).unwrap_or("INVALID")
    }

    pub fn operand_arity(self) -> usize {
        self.info().map(|i| i.operands as usize).unwrap_or(0)
    }

    pub fn result_arity(self) -> usize {
        self.info().map(|i| i.results as usize).unwrap_or(0)
    }

    pub fn touches_memory(self) -> bool {
        self.info().map(|i| i.touches_memory).unwrap_or(false)
    }

    pub fn is_call(self) -> bool {
        self.info().map(|i| i.is_call).unwrap_or(false)
    }

    pub fn is_push(self) -> bool {
        (0x60..=0x7f).contains(&self.0)
    }

    pub fn push_width(self) -> usize {
        debug_assert!(self.is_push());
        (self.0 - 0x60 + 1) as usize
    }

    pub fn is_dup(self) -> bool {
        (0x80..=0x8f).contains(&self.0)
    }

    pub fn is_swap(self) -> bool {
        (0x90..=0x9f).contains(&self.0)
    }
}

impl fmt::Debug for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mnemonic())
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mnemonic())
    }
}

/// Mnemonics allowed as pattern endpoints. Kept narrower than the full
/// executor set; extend here when a new pattern needs an opcode.
pub const PATTERN_MNEMONICS: &[&str] = &[
    "CALL",
    "CALLCODE",
    "DELEGATECALL",
    "CREATE",
    "SSTORE",
    "SLOAD",
    "JUMPI",
    "CALLDATALOAD",
    "CALLDATACOPY",
    "TIMESTAMP",
    "SELFDESTRUCT",
    "ADD",
    "SUB",
    "MUL",
];

pub fn pattern_opcode(name: &str) -> Option<Opcode> {
    if PATTERN_MNEMONICS.contains(&name) {
        Opcode::from_mnemonic(name)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arities() {
        assert_eq!(Opcode::CALL.operand_arity(), 7);
        assert_eq!(Opcode::DELEGATECALL.operand_arity(), 6);
        assert_eq!(Opcode::SSTORE.operand_arity(), 2);
        assert_eq!(Opcode::SSTORE.result_arity(), 0);
        assert_eq!(Opcode::SLOAD.result_arity(), 1);
        assert_eq!(Opcode::from_mnemonic("PUSH32"), Some(Opcode(0x7f)));
        assert_eq!(Opcode::from_mnemonic("DUP16"), Some(Opcode(0x8f)));
        assert_eq!(Opcode(0x8f).operand_arity(), 16);
        assert_eq!(Opcode::from_mnemonic("PUSH33"), None);
    }

    #[test]
    fn pattern_set_excludes_machine_only_ops() {
        assert!(pattern_opcode("CALL").is_some());
        assert!(pattern_opcode("MSTORE").is_none());
        assert!(pattern_opcode("CAL").is_none());
    }
}
