//! Proptest strategies producing random pattern ASTs.

use aegis_core::opcode::{pattern_opcode, Opcode, PATTERN_MNEMONICS};
use aegis_core::pattern::{
    Accessor, AccessorKind, ArithOp, BlockField, CmpOp, Comparison, MemArg, Operand, PatternAst,
    RelationKind, RelationNode, Side, TxField, WhereClause,
};
use num_bigint::BigInt;
use proptest::prelude::*;

pub fn any_pattern_opcode() -> impl Strategy<Value = Opcode> {
    (0..PATTERN_MNEMONICS.len())
        .prop_map(|i| pattern_opcode(PATTERN_MNEMONICS[i]).expect("known mnemonic"))
}

fn relation_kind() -> impl Strategy<Value = RelationKind> {
    prop_oneof![
        Just(RelationKind::ControlFlow),
        Just(RelationKind::DataFlow),
        Just(RelationKind::Follows),
    ]
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Src), Just(Side::Dst)]
}

fn mem_arg() -> impl Strategy<Value = MemArg> {
    prop_oneof![
        (0u64..1024).prop_map(MemArg::Literal),
        (0u32..7).prop_map(MemArg::Stack),
    ]
}

fn accessor_kind() -> impl Strategy<Value = AccessorKind> {
    prop_oneof![
        Just(AccessorKind::Depth),
        Just(AccessorKind::Pc),
        Just(AccessorKind::Address),
        (0u32..7).prop_map(AccessorKind::Stack),
        Just(AccessorKind::StackResult),
        (mem_arg(), mem_arg()).prop_map(|(a, b)| AccessorKind::Memory(a, b)),
        prop_oneof![
            Just(TxField::Hash),
            Just(TxField::Value),
            Just(TxField::From),
            Just(TxField::To)
        ]
        .prop_map(AccessorKind::Transaction),
        prop_oneof![
            Just(BlockField::Number),
            Just(BlockField::GasUsed),
            Just(BlockField::GasLimit)
        ]
        .prop_map(AccessorKind::Block),
    ]
}

fn operand() -> impl Strategy<Value = Operand> {
    let leaf = prop_oneof![
        any::<u128>().prop_map(|v| Operand::Literal(BigInt::from(v))),
        (side(), accessor_kind()).prop_map(|(side, kind)| Operand::Accessor(Accessor {
            side,
            kind
        })),
    ];
    leaf.prop_recursive(2, 8, 2, |inner| {
        (
            prop_oneof![
                Just(ArithOp::Add),
                Just(ArithOp::Sub),
                Just(ArithOp::Mul),
                Just(ArithOp::Div)
            ],
            inner.clone(),
            inner,
        )
            .prop_map(|(op, lhs, rhs)| Operand::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            })
    })
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop_oneof![
        Just(CmpOp::Lt),
        Just(CmpOp::Gt),
        Just(CmpOp::Le),
        Just(CmpOp::Ge),
        Just(CmpOp::Eq),
        Just(CmpOp::Ne),
    ]
}

fn comparison() -> impl Strategy<Value = Comparison> {
    (operand(), cmp_op(), operand()).prop_map(|(lhs, op, rhs)| Comparison { lhs, op, rhs })
}

/// A random pattern with 1..=4 relations. Where clauses use the relation's
/// own endpoints, or occasionally a wider bracketed span ending at the
/// relation's destination.
pub fn any_pattern() -> impl Strategy<Value = PatternAst> {
    (1usize..=4)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(any_pattern_opcode(), n + 1),
                proptest::collection::vec(relation_kind(), n),
                proptest::collection::vec(
                    proptest::option::weighted(
                        0.6,
                        (proptest::collection::vec(comparison(), 1..=3), 0usize..100),
                    ),
                    n,
                ),
            )
        })
        .prop_map(|(endpoints, kinds, wheres)| {
            // At most one clause gets a multi-relation bracketed span;
            // overlapping spans have no well-formed rendering.
            let mut grouped = false;
            let mut relations: Vec<RelationNode> = kinds
                .into_iter()
                .enumerate()
                .zip(wheres)
                .map(|((k, kind), w)| RelationNode {
                    kind,
                    src_opcode: endpoints[k],
                    dst_opcode: endpoints[k + 1],
                    where_clause: w.map(|(comparisons, span_seed)| {
                        let src_ep = if span_seed >= 75 && !grouped {
                            grouped = true;
                            span_seed % (k + 1)
                        } else {
                            k
                        };
                        WhereClause { comparisons, src_ep, dst_ep: k + 1 }
                    }),
                })
                .collect();
            // A where clause ending exactly where a bracketed group opens has
            // no place in the written form; drop it.
            let group_start = relations.iter().enumerate().find_map(|(k, r)| {
                r.where_clause
                    .as_ref()
                    .and_then(|w| (w.src_ep < k).then_some(w.src_ep))
            });
            if let Some(s) = group_start {
                if s >= 1 {
                    relations[s - 1].where_clause = None;
                }
            }
            PatternAst { relations }
        })
}

fn valid_accessor(op: Opcode, side: Side) -> BoxedStrategy<Operand> {
    let mut kinds = vec![
        AccessorKind::Depth,
        AccessorKind::Pc,
        AccessorKind::Address,
        AccessorKind::Transaction(TxField::Hash),
        AccessorKind::Transaction(TxField::Value),
        AccessorKind::Transaction(TxField::From),
        AccessorKind::Transaction(TxField::To),
        AccessorKind::Block(BlockField::Number),
        AccessorKind::Block(BlockField::GasUsed),
        AccessorKind::Block(BlockField::GasLimit),
    ];
    for i in 0..op.operand_arity() {
        kinds.push(AccessorKind::Stack(i as u32));
    }
    if op.result_arity() == 1 {
        kinds.push(AccessorKind::StackResult);
    }
    proptest::sample::select(kinds)
        .prop_map(move |kind| Operand::Accessor(Accessor { side, kind }))
        .boxed()
}

fn valid_comparison(src: Opcode, dst: Opcode) -> BoxedStrategy<Comparison> {
    // Literals come from the same small pool the trace generator draws its
    // values from, so comparisons actually hit both outcomes.
    let operand = prop_oneof![
        2 => proptest::sample::select(vec![0u64, 1, 2, 5])
            .prop_map(|v| Operand::Literal(BigInt::from(v))),
        3 => valid_accessor(src, Side::Src),
        3 => valid_accessor(dst, Side::Dst),
    ];
    (operand.clone(), cmp_op(), operand)
        .prop_map(|(lhs, op, rhs)| Comparison { lhs, op, rhs })
        .boxed()
}

/// A random pattern with 1..=3 relations that passes static validation:
/// stack indices stay within each endpoint's operand arity, `stack.result`
/// only appears on single-result opcodes, and memory accessors are not used.
pub fn valid_pattern() -> impl Strategy<Value = PatternAst> {
    (1usize..=3)
        .prop_flat_map(|n| {
            proptest::collection::vec(any_pattern_opcode(), n + 1).prop_flat_map(move |eps| {
                let rels: Vec<BoxedStrategy<RelationNode>> = (0..n)
                    .map(|k| {
                        let (src, dst) = (eps[k], eps[k + 1]);
                        (
                            relation_kind(),
                            proptest::option::weighted(
                                0.7,
                                proptest::collection::vec(valid_comparison(src, dst), 1..=2),
                            ),
                        )
                            .prop_map(move |(kind, comparisons)| RelationNode {
                                kind,
                                src_opcode: src,
                                dst_opcode: dst,
                                where_clause: comparisons.map(|comparisons| WhereClause {
                                    comparisons,
                                    src_ep: k,
                                    dst_ep: k + 1,
                                }),
                            })
                            .boxed()
                    })
                    .collect();
                rels
            })
        })
        .prop_map(|relations| PatternAst { relations })
}

/// Rewrites canonical ASCII pattern text into its Unicode spelling.
pub fn unicode_spelling(text: &str) -> String {
    text.replace("=>", "\u{21d2}") // ⇒
        .replace("~>", "\u{2933}") // ⤳
        .replace("->", "\u{2192}") // →
        .replace("&&", "\u{2227}") // ∧
        .replace("!=", "\u{2260}") // ≠
        .replace("<=", "\u{2264}") // ≤
        .replace(">=", "\u{2265}") // ≥
        .replace(" - ", " \u{2212} ") // −
        .replace(" * ", " \u{00b7} ") // ·
}
