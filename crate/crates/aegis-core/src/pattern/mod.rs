//! Attack-pattern language: AST, parser, validator, canonical rendering and
//! content-addressed pattern ids.
//!
//! A pattern is a chain of opcode predicates joined by three relation kinds:
//! control flow (`=>`), data flow (`~>`) and follows (`->`). Adjacent
//! relations share their endpoint instruction instances, so a pattern with n
//! relations has n+1 endpoints. Optional `where` clauses constrain a
//! relation's (or a bracketed sub-chain's) endpoints via accessors over the
//! execution environment.

mod parser;

pub use parser::{parse_pattern, ParseError};

use crate::opcode::Opcode;
use crate::word::{keccak256, Hash32};
use num_bigint::BigInt;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelationKind {
    ControlFlow,
    DataFlow,
    Follows,
}

impl RelationKind {
    pub fn ascii(self) -> &'static str {
        match self {
            RelationKind::ControlFlow => "=>",
            RelationKind::DataFlow => "~>",
            RelationKind::Follows => "->",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Src,
    Dst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TxField {
    Hash,
    Value,
    From,
    To,
}

impl TxField {
    fn name(self) -> &'static str {
        match self {
            TxField::Hash => "hash",
            TxField::Value => "value",
            TxField::From => "from",
            TxField::To => "to",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockField {
    Number,
    GasUsed,
    GasLimit,
}

impl BlockField {
    fn name(self) -> &'static str {
        match self {
            BlockField::Number => "number",
            BlockField::GasUsed => "gasUsed",
            BlockField::GasLimit => "gasLimit",
        }
    }
}

/// Argument of a `memory(offset, size)` accessor: a literal or a stack slot
/// of the same endpoint. The built-in cross-function reentrancy pattern
/// passes stack values where the base grammar declares integers, so both
/// forms are accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MemArg {
    Literal(u64),
    Stack(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AccessorKind {
    Depth,
    Pc,
    Address,
    Stack(u32),
    StackResult,
    Memory(MemArg, MemArg),
    Transaction(TxField),
    Block(BlockField),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Accessor {
    pub side: Side,
    pub kind: AccessorKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn is_ordered(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Gt | CmpOp::Le | CmpOp::Ge)
    }
}

/// A comparison operand: literal integer, accessor, or arithmetic over both.
/// Arithmetic only appears inside comparison operands, never at the top of a
/// where clause.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Literal(BigInt),
    Accessor(Accessor),
    Arith {
        op: ArithOp,
        lhs: Box<Operand>,
        rhs: Box<Operand>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub lhs: Operand,
    pub op: CmpOp,
    pub rhs: Operand,
}

/// A conjunction of comparisons constraining two endpoints of the pattern.
/// `src_ep`/`dst_ep` are endpoint indices into the pattern's endpoint chain;
/// for a plain relation they are the relation's own endpoints, for a
/// bracketed sub-chain they span its first and last endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WhereClause {
    pub comparisons: Vec<Comparison>,
    pub src_ep: usize,
    pub dst_ep: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RelationNode {
    pub kind: RelationKind,
    pub src_opcode: Opcode,
    pub dst_opcode: Opcode,
    pub where_clause: Option<WhereClause>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatternAst {
    pub relations: Vec<RelationNode>,
}

impl PatternAst {
    /// Endpoint opcodes in chain order; endpoint k is relation k's source,
    /// the final endpoint is the last relation's destination.
    pub fn endpoints(&self) -> Vec<Opcode> {
        let mut eps: Vec<Opcode> = self.relations.iter().map(|r| r.src_opcode).collect();
        if let Some(last) = self.relations.last() {
            eps.push(last.dst_opcode);
        }
        eps
    }
}

/// 32-byte identity of a pattern: Keccak-256 of its canonical rendering.
/// Unicode and ASCII spellings of the same pattern share one id.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternId(pub Hash32);

impl fmt::Debug for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PatternId({})", self.0.to_hex())
    }
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.to_hex())
    }
}

impl serde::Serialize for PatternId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_hex())
    }
}

impl<'de> serde::Deserialize<'de> for PatternId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Hash32::from_hex(&s).map(PatternId).map_err(serde::de::Error::custom)
    }
}

pub fn pattern_id(ast: &PatternAst) -> PatternId {
    PatternId(keccak256(render_pattern(ast).as_bytes()))
}

// ---------------------------------------------------------------------------
// Canonical rendering
// ---------------------------------------------------------------------------

fn render_mem_arg(side: Side, arg: &MemArg, out: &mut String) {
    match arg {
        MemArg::Literal(v) => out.push_str(&v.to_string()),
        MemArg::Stack(i) => {
            out.push_str(side_name(side));
            out.push_str(".stack(");
            out.push_str(&i.to_string());
            out.push(')');
        }
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Src => "src",
        Side::Dst => "dst",
    }
}

fn render_accessor(a: &Accessor, out: &mut String) {
    out.push_str(side_name(a.side));
    out.push('.');
    match &a.kind {
        AccessorKind::Depth => out.push_str("depth"),
        AccessorKind::Pc => out.push_str("pc"),
        AccessorKind::Address => out.push_str("address"),
        AccessorKind::Stack(i) => {
            out.push_str("stack(");
            out.push_str(&i.to_string());
            out.push(')');
        }
        AccessorKind::StackResult => out.push_str("stack.result"),
        AccessorKind::Memory(off, size) => {
            out.push_str("memory(");
            render_mem_arg(a.side, off, out);
            out.push_str(", ");
            render_mem_arg(a.side, size, out);
            out.push(')');
        }
        AccessorKind::Transaction(f) => {
            out.push_str("transaction.");
            out.push_str(f.name());
        }
        AccessorKind::Block(f) => {
            out.push_str("block.");
            out.push_str(f.name());
        }
    }
}

fn render_operand(op: &Operand, out: &mut String) {
    match op {
        Operand::Literal(v) => out.push_str(&v.to_string()),
        Operand::Accessor(a) => render_accessor(a, out),
        Operand::Arith { op, lhs, rhs } => {
            out.push('(');
            render_operand(lhs, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            render_operand(rhs, out);
            out.push(')');
        }
    }
}

fn render_where(w: &WhereClause, out: &mut String) {
    out.push_str(" where ");
    for (i, c) in w.comparisons.iter().enumerate() {
        if i > 0 {
            out.push_str(" && ");
        }
        out.push('(');
        render_operand(&c.lhs, out);
        out.push(' ');
        out.push_str(c.op.symbol());
        out.push(' ');
        render_operand(&c.rhs, out);
        out.push(')');
    }
}

/// Deterministic ASCII rendering; `parse_pattern(render_pattern(a))` is
/// structurally equal to `a`. Bracketed sub-chains are re-emitted only when a
/// where clause spans more than one relation.
pub fn render_pattern(ast: &PatternAst) -> String {
    let eps = ast.endpoints();
    let n_rel = ast.relations.len();
    // Group spans (start_ep, end_ep, relation carrying the clause), for
    // clauses that do not bind a single relation's own endpoints.
    let mut groups: Vec<(usize, usize, usize)> = Vec::new();
    for (k, rel) in ast.relations.iter().enumerate() {
        if let Some(w) = &rel.where_clause {
            if !(w.src_ep == k && w.dst_ep == k + 1) {
                groups.push((w.src_ep, w.dst_ep, k));
            }
        }
    }
    let mut out = String::new();
    for (i, ep) in eps.iter().enumerate() {
        if i > 0 {
            out.push(' ');
            out.push_str(ast.relations[i - 1].kind.ascii());
            out.push(' ');
        }
        // Open brackets for groups starting here; outermost (largest span) first.
        let mut opens: Vec<&(usize, usize, usize)> =
            groups.iter().filter(|(s, _, _)| *s == i).collect();
        opens.sort_by_key(|(_, d, _)| std::cmp::Reverse(*d));
        for _ in &opens {
            out.push('(');
        }
        out.push_str("(opcode = ");
        out.push_str(ep.mnemonic());
        out.push(')');
        // Close brackets for groups ending here; innermost (largest start) first.
        let mut closes: Vec<&(usize, usize, usize)> =
            groups.iter().filter(|(_, d, _)| *d == i).collect();
        closes.sort_by_key(|(s, _, _)| std::cmp::Reverse(*s));
        for (_, _, k) in closes {
            out.push(')');
            render_where(ast.relations[*k].where_clause.as_ref().unwrap(), &mut out);
        }
        // Default-span where of the relation that just closed at this endpoint.
        if i > 0 && i <= n_rel {
            if let Some(w) = &ast.relations[i - 1].where_clause {
                if w.src_ep == i - 1 && w.dst_ep == i {
                    render_where(w, &mut out);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub relation_index: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum OperandTy {
    Int,
    Bytes,
}

/// Static checks beyond the grammar: stack indices within the endpoint
/// opcode's operand arity, memory accessors only on memory-touching opcodes,
/// memory values restricted to equality comparisons, stack.result only on
/// result-producing opcodes.
pub fn validate_pattern(ast: &PatternAst) -> ValidationReport {
    let eps = ast.endpoints();
    let mut findings = Vec::new();
    for (k, rel) in ast.relations.iter().enumerate() {
        let Some(w) = &rel.where_clause else { continue };
        let ep_for = |side: Side| match side {
            Side::Src => eps[w.src_ep],
            Side::Dst => eps[w.dst_ep],
        };
        for cmp in &w.comparisons {
            let lhs_ty = check_operand(&cmp.lhs, k, &ep_for, &mut findings, false);
            let rhs_ty = check_operand(&cmp.rhs, k, &ep_for, &mut findings, false);
            match (lhs_ty, rhs_ty) {
                (Some(OperandTy::Bytes), _) | (_, Some(OperandTy::Bytes)) => {
                    if cmp.op.is_ordered() {
                        findings.push(Finding {
                            relation_index: k,
                            message: "ordered comparison on memory value".into(),
                        });
                    }
                    if matches!(
                        (lhs_ty, rhs_ty),
                        (Some(OperandTy::Bytes), Some(OperandTy::Int))
                            | (Some(OperandTy::Int), Some(OperandTy::Bytes))
                    ) {
                        findings.push(Finding {
                            relation_index: k,
                            message: "memory value compared against integer value".into(),
                        });
                    }
                }
                _ => {}
            }
        }
    }
    ValidationReport { findings }
}

fn check_operand(
    op: &Operand,
    rel_idx: usize,
    ep_for: &dyn Fn(Side) -> Opcode,
    findings: &mut Vec<Finding>,
    in_arith: bool,
) -> Option<OperandTy> {
    match op {
        Operand::Literal(_) => Some(OperandTy::Int),
        Operand::Arith { lhs, rhs, .. } => {
            let l = check_operand(lhs, rel_idx, ep_for, findings, true);
            let r = check_operand(rhs, rel_idx, ep_for, findings, true);
            if l == Some(OperandTy::Bytes) || r == Some(OperandTy::Bytes) {
                findings.push(Finding {
                    relation_index: rel_idx,
                    message: "arithmetic on memory value".into(),
                });
            }
            Some(OperandTy::Int)
        }
        Operand::Accessor(a) => {
            let opcode = ep_for(a.side);
            match &a.kind {
                AccessorKind::Stack(i) => {
                    let arity = opcode.operand_arity();
                    if *i as usize >= arity {
                        findings.push(Finding {
                            relation_index: rel_idx,
                            message: format!(
                                "stack index {i} exceeds {} operand arity {arity}",
                                opcode.mnemonic()
                            ),
                        });
                    }
                    Some(OperandTy::Int)
                }
                AccessorKind::StackResult => {
                    if opcode.result_arity() == 0 {
                        findings.push(Finding {
                            relation_index: rel_idx,
                            message: format!(
                                "stack.result on {} which pushes no result",
                                opcode.mnemonic()
                            ),
                        });
                    }
                    Some(OperandTy::Int)
                }
                AccessorKind::Memory(off, size) => {
                    if !opcode.touches_memory() {
                        findings.push(Finding {
                            relation_index: rel_idx,
                            message: format!(
                                "memory accessor on {} which has no memory semantics",
                                opcode.mnemonic()
                            ),
                        });
                    }
                    for arg in [off, size] {
                        if let MemArg::Stack(i) = arg {
                            let arity = opcode.operand_arity();
                            if *i as usize >= arity {
                                findings.push(Finding {
                                    relation_index: rel_idx,
                                    message: format!(
                                        "stack index {i} exceeds {} operand arity {arity}",
                                        opcode.mnemonic()
                                    ),
                                });
                            }
                        }
                    }
                    if in_arith {
                        // reported by the Arith branch
                    }
                    Some(OperandTy::Bytes)
                }
                _ => Some(OperandTy::Int),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in corpus and pattern files
// ---------------------------------------------------------------------------

/// A named pattern as loaded from a `.pattern` file or the built-in corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedPattern {
    pub name: String,
    pub ast: PatternAst,
    pub id: PatternId,
    pub text: String,
}

/// Parses a pattern file: optional `#`-prefixed header lines (`# name: x`)
/// followed by one pattern.
pub fn parse_pattern_file(contents: &str, default_name: &str) -> Result<NamedPattern, ParseError> {
    let mut name = default_name.to_string();
    for line in contents.lines() {
        if let Some(rest) = line.trim().strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("name:") {
                name = v.trim().to_string();
            }
        }
    }
    let ast = parse_pattern(contents)?;
    let text = render_pattern(&ast);
    let id = pattern_id(&ast);
    Ok(NamedPattern { name, ast, id, text })
}

macro_rules! builtin {
    ($name:literal, $file:literal) => {
        ($name, include_str!(concat!("../../fixtures/patterns/", $file)))
    };
}

/// The shipped attack-pattern corpus: the twelve patterns covering the
/// reentrancy family, both Parity wallet hacks, integer bugs, timestamp
/// dependence and transaction order dependency.
pub const BUILTIN_PATTERN_SOURCES: [(&str, &str); 12] = [
    builtin!("same_function_reentrancy", "same_function_reentrancy.pattern"),
    builtin!("cross_function_reentrancy", "cross_function_reentrancy.pattern"),
    builtin!(
        "delegated_reentrancy_delegatecall",
        "delegated_reentrancy_delegatecall.pattern"
    ),
    builtin!("delegated_reentrancy_callcode", "delegated_reentrancy_callcode.pattern"),
    builtin!("create_based_reentrancy", "create_based_reentrancy.pattern"),
    builtin!("parity_wallet_hack_1", "parity_wallet_hack_1.pattern"),
    builtin!("parity_wallet_hack_2", "parity_wallet_hack_2.pattern"),
    builtin!("integer_overflow_add", "integer_overflow_add.pattern"),
    builtin!("integer_overflow_mul", "integer_overflow_mul.pattern"),
    builtin!("integer_underflow", "integer_underflow.pattern"),
    builtin!("timestamp_dependence", "timestamp_dependence.pattern"),
    builtin!("transaction_order_dependency", "transaction_order_dependency.pattern"),
];

pub fn builtin_patterns() -> Vec<NamedPattern> {
    BUILTIN_PATTERN_SOURCES
        .iter()
        .map(|(name, src)| {
            parse_pattern_file(src, name).unwrap_or_else(|e| panic!("builtin pattern {name}: {e}"))
        })
        .collect()
}

pub fn builtin_pattern(name: &str) -> Option<NamedPattern> {
    BUILTIN_PATTERN_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, src)| parse_pattern_file(src, n).expect("builtin pattern"))
}
