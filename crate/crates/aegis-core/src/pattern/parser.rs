//! Lexer and recursive-descent parser for the attack-pattern language.
//!
//! Both the Unicode surface forms (`⇒ ⤳ → ∧ ≠ ≤ ≥ −`) and the ASCII forms
//! (`=> ~> -> && != <= >= -`) are accepted; `=` and `==` both mean equality.
//! `#` starts a comment running to end of line.

use super::*;
use crate::opcode::pattern_opcode;
use num_bigint::BigInt;
use num_traits::Num;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: expected {expected}, found {found}")]
    Syntax {
        line: u32,
        col: u32,
        expected: String,
        found: String,
    },
    #[error("unknown opcode `{name}` at line {line}, column {col}")]
    UnknownOpcode { name: String, line: u32, col: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Comma,
    Dot,
    Ident(String),
    Int(BigInt),
    Rel(RelationKind),
    Where,
    And,
    Cmp(CmpOp),
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Rel(k) => format!("`{}`", k.ascii()),
            Tok::Where => "`where`".into(),
            Tok::And => "`&&`".into(),
            Tok::Cmp(c) => format!("`{}`", c.symbol()),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, expected: &str, found: String) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            expected: expected.into(),
            found,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, u32, u32)>, ParseError> {
        let mut out = Vec::new();
        loop {
            // Skip whitespace and comments.
            loop {
                match self.chars.peek() {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('#') => {
                        while let Some(&c) = self.chars.peek() {
                            if c == '\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push((Tok::Eof, line, col));
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '+' => {
                    self.bump();
                    Tok::Plus
                }
                '*' | '·' => {
                    self.bump();
                    Tok::Star
                }
                '/' => {
                    self.bump();
                    Tok::Slash
                }
                '⇒' => {
                    self.bump();
                    Tok::Rel(RelationKind::ControlFlow)
                }
                '⤳' | '↝' => {
                    self.bump();
                    Tok::Rel(RelationKind::DataFlow)
                }
                '→' => {
                    self.bump();
                    Tok::Rel(RelationKind::Follows)
                }
                '∧' => {
                    self.bump();
                    Tok::And
                }
                '≠' => {
                    self.bump();
                    Tok::Cmp(CmpOp::Ne)
                }
                '≤' => {
                    self.bump();
                    Tok::Cmp(CmpOp::Le)
                }
                '≥' => {
                    self.bump();
                    Tok::Cmp(CmpOp::Ge)
                }
                '−' => {
                    self.bump();
                    Tok::Minus
                }
                '-' => {
                    self.bump();
                    if self.chars.peek() == Some(&'>') {
                        self.bump();
                        Tok::Rel(RelationKind::Follows)
                    } else {
                        Tok::Minus
                    }
                }
                '~' => {
                    self.bump();
                    if self.chars.peek() == Some(&'>') {
                        self.bump();
                        Tok::Rel(RelationKind::DataFlow)
                    } else {
                        return Err(self.err("`~>`", "`~`".into()));
                    }
                }
                '=' => {
                    self.bump();
                    match self.chars.peek() {
                        Some('>') => {
                            self.bump();
                            Tok::Rel(RelationKind::ControlFlow)
                        }
                        Some('=') => {
                            self.bump();
                            Tok::Cmp(CmpOp::Eq)
                        }
                        _ => Tok::Cmp(CmpOp::Eq),
                    }
                }
                '!' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Cmp(CmpOp::Ne)
                    } else {
                        return Err(self.err("`!=`", "`!`".into()));
                    }
                }
                '<' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Cmp(CmpOp::Le)
                    } else {
                        Tok::Cmp(CmpOp::Lt)
                    }
                }
                '>' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Cmp(CmpOp::Ge)
                    } else {
                        Tok::Cmp(CmpOp::Gt)
                    }
                }
                '&' => {
                    self.bump();
                    if self.chars.peek() == Some(&'&') {
                        self.bump();
                        Tok::And
                    } else {
                        return Err(self.err("`&&`", "`&`".into()));
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut s = String::new();
                    while let Some(&d) = self.chars.peek() {
                        if d.is_ascii_alphanumeric() {
                            s.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let value = if let Some(hex) = s.strip_prefix("0x").or(s.strip_prefix("0X")) {
                        BigInt::from_str_radix(hex, 16)
                    } else {
                        BigInt::from_str_radix(&s, 10)
                    }
                    .map_err(|_| ParseError::Syntax {
                        line,
                        col,
                        expected: "integer literal".into(),
                        found: format!("`{s}`"),
                    })?;
                    Tok::Int(value)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(&d) = self.chars.peek() {
                        if d.is_ascii_alphanumeric() || d == '_' {
                            s.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    match s.as_str() {
                        "where" => Tok::Where,
                        _ => Tok::Ident(s),
                    }
                }
                other => {
                    return Err(self.err("pattern token", format!("`{other}`")));
                }
            };
            out.push((tok, line, col));
        }
    }
}

/// A partially assembled chain during parsing: endpoint opcodes plus, for
/// each relation, its kind and any attached where clause (endpoint indices
/// local to this chain).
struct Chain {
    endpoints: Vec<Opcode>,
    relations: Vec<RelationNode>,
}

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn next(&mut self) -> (Tok, u32, u32) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> ParseError {
        let (tok, line, col) = &self.toks[self.pos];
        ParseError::Syntax {
            line: *line,
            col: *col,
            expected: expected.into(),
            found: tok.describe(),
        }
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<(), ParseError> {
        if self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == word => {
                self.next();
                Ok(())
            }
            _ => Err(self.err(&format!("`{word}`"))),
        }
    }

    // pattern := chain EOF
    fn parse(&mut self) -> Result<PatternAst, ParseError> {
        let chain = self.parse_chain()?;
        self.expect(&Tok::Eof, "end of pattern")?;
        if chain.relations.is_empty() {
            return Err(self.err("a relation (`=>`, `~>` or `->`)"));
        }
        Ok(PatternAst {
            relations: chain.relations,
        })
    }

    // chain := element (REL element)*
    fn parse_chain(&mut self) -> Result<Chain, ParseError> {
        let mut chain = self.parse_element()?;
        while let Tok::Rel(kind) = self.peek() {
            let kind = *kind;
            self.next();
            let rhs = self.parse_element()?;
            let rhs_is_single = rhs.endpoints.len() == 1;
            let offset = chain.endpoints.len();
            let src_ep = offset - 1;
            // The connecting relation's endpoint opcodes.
            let src_opcode = *chain.endpoints.last().unwrap();
            let dst_opcode = rhs.endpoints[0];
            chain.relations.push(RelationNode {
                kind,
                src_opcode,
                dst_opcode,
                where_clause: None,
            });
            chain.endpoints.extend(rhs.endpoints);
            for mut rel in rhs.relations {
                if let Some(w) = &mut rel.where_clause {
                    w.src_ep += offset;
                    w.dst_ep += offset;
                }
                chain.relations.push(rel);
            }
            // A where clause directly after a plain endpoint binds the
            // relation just formed. (Groups consume their own trailing
            // where inside parse_element.)
            if rhs_is_single && *self.peek() == Tok::Where {
                let w = self.parse_where(src_ep, src_ep + 1)?;
                let last = chain.relations.len() - 1;
                self.attach_where_chain(&mut chain, last, w)?;
            }
        }
        Ok(chain)
    }

    // element := '(' 'opcode' '=' IDENT ')'
    //          | '(' chain ')' [where]
    fn parse_element(&mut self) -> Result<Chain, ParseError> {
        self.expect(&Tok::LParen, "`(`")?;
        if matches!(self.peek(), Tok::Ident(s) if s == "opcode") {
            self.next();
            match self.peek() {
                Tok::Cmp(CmpOp::Eq) => {
                    self.next();
                }
                _ => return Err(self.err("`=`")),
            }
            let (tok, line, col) = self.next();
            let Tok::Ident(name) = tok else {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    expected: "opcode mnemonic".into(),
                    found: tok.describe(),
                });
            };
            let opcode = pattern_opcode(&name)
                .ok_or(ParseError::UnknownOpcode { name, line, col })?;
            self.expect(&Tok::RParen, "`)`")?;
            Ok(Chain {
                endpoints: vec![opcode],
                relations: Vec::new(),
            })
        } else if *self.peek() == Tok::LParen {
            let mut chain = self.parse_chain()?;
            self.expect(&Tok::RParen, "`)` closing bracketed sub-pattern")?;
            if *self.peek() == Tok::Where {
                if chain.relations.is_empty() {
                    return Err(self.err("a relation before `where`"));
                }
                let w = self.parse_where(0, chain.endpoints.len() - 1)?;
                let last = chain.relations.len() - 1;
                self.attach_where_chain(&mut chain, last, w)?;
            }
            Ok(chain)
        } else {
            Err(self.err("`opcode` or `(`"))
        }
    }

    fn parse_where(&mut self, src_ep: usize, dst_ep: usize) -> Result<WhereClause, ParseError> {
        self.expect(&Tok::Where, "`where`")?;
        let mut comparisons = vec![self.parse_comparison()?];
        while *self.peek() == Tok::And {
            self.next();
            comparisons.push(self.parse_comparison()?);
        }
        Ok(WhereClause {
            comparisons,
            src_ep,
            dst_ep,
        })
    }

    // comparison := '(' sum CMP sum ')'
    fn parse_comparison(&mut self) -> Result<Comparison, ParseError> {
        self.expect(&Tok::LParen, "`(` opening a comparison")?;
        let lhs = self.parse_sum()?;
        let op = match self.peek() {
            Tok::Cmp(c) => {
                let c = *c;
                self.next();
                c
            }
            _ => return Err(self.err("a comparison operator")),
        };
        let rhs = self.parse_sum()?;
        self.expect(&Tok::RParen, "`)` closing a comparison")?;
        Ok(Comparison { lhs, op, rhs })
    }

    fn parse_sum(&mut self) -> Result<Operand, ParseError> {
        let mut lhs = self.parse_product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => break,
            };
            self.next();
            let rhs = self.parse_product()?;
            lhs = Operand::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_product(&mut self) -> Result<Operand, ParseError> {
        let mut lhs = self.parse_atom()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.parse_atom()?;
            lhs = Operand::Arith {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn parse_atom(&mut self) -> Result<Operand, ParseError> {
        match self.peek() {
            Tok::Int(_) => {
                let (Tok::Int(v), _, _) = self.next() else {
                    unreachable!()
                };
                Ok(Operand::Literal(v))
            }
            Tok::LParen => {
                self.next();
                let inner = self.parse_sum()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(s) if s == "src" || s == "dst" => {
                Ok(Operand::Accessor(self.parse_accessor()?))
            }
            _ => Err(self.err("an integer, accessor or `(`")),
        }
    }

    // accessor := ('src'|'dst') '.' selector
    fn parse_accessor(&mut self) -> Result<Accessor, ParseError> {
        let side = match self.peek() {
            Tok::Ident(s) if s == "src" => Side::Src,
            Tok::Ident(s) if s == "dst" => Side::Dst,
            _ => return Err(self.err("`src` or `dst`")),
        };
        self.next();
        self.expect(&Tok::Dot, "`.`")?;
        let (tok, line, col) = self.next();
        let Tok::Ident(sel) = tok else {
            return Err(ParseError::Syntax {
                line,
                col,
                expected: "an accessor selector".into(),
                found: tok.describe(),
            });
        };
        let kind = match sel.as_str() {
            "depth" => AccessorKind::Depth,
            "pc" => AccessorKind::Pc,
            "address" => AccessorKind::Address,
            "stack" => {
                if *self.peek() == Tok::Dot && *self.peek2() == Tok::Ident("result".into()) {
                    self.next();
                    self.next();
                    AccessorKind::StackResult
                } else {
                    self.expect(&Tok::LParen, "`(`")?;
                    let idx = self.parse_small_int("stack index")?;
                    self.expect(&Tok::RParen, "`)`")?;
                    AccessorKind::Stack(idx as u32)
                }
            }
            "memory" => {
                self.expect(&Tok::LParen, "`(`")?;
                let off = self.parse_mem_arg(side)?;
                self.expect(&Tok::Comma, "`,`")?;
                let size = self.parse_mem_arg(side)?;
                self.expect(&Tok::RParen, "`)`")?;
                AccessorKind::Memory(off, size)
            }
            "transaction" => {
                self.expect(&Tok::Dot, "`.`")?;
                let f = self.parse_field_ident(&[
                    ("hash", TxField::Hash),
                    ("value", TxField::Value),
                    ("from", TxField::From),
                    ("to", TxField::To),
                ])?;
                AccessorKind::Transaction(f)
            }
            "block" => {
                self.expect(&Tok::Dot, "`.`")?;
                let f = self.parse_field_ident(&[
                    ("number", BlockField::Number),
                    ("gasUsed", BlockField::GasUsed),
                    ("gasLimit", BlockField::GasLimit),
                ])?;
                AccessorKind::Block(f)
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    expected:
                        "one of depth, pc, address, stack, memory, transaction, block".into(),
                    found: format!("`{other}`"),
                })
            }
        };
        Ok(Accessor { side, kind })
    }

    fn parse_field_ident<F: Copy>(&mut self, table: &[(&str, F)]) -> Result<F, ParseError> {
        let expected = table
            .iter()
            .map(|(n, _)| format!("`{n}`"))
            .collect::<Vec<_>>()
            .join(", ");
        match self.peek() {
            Tok::Ident(s) => {
                if let Some((_, f)) = table.iter().find(|(n, _)| n == s) {
                    let f = *f;
                    self.next();
                    Ok(f)
                } else {
                    Err(self.err(&format!("one of {expected}")))
                }
            }
            _ => Err(self.err(&format!("one of {expected}"))),
        }
    }

    fn parse_small_int(&mut self, what: &str) -> Result<u64, ParseError> {
        match self.peek() {
            Tok::Int(_) => {
                let (Tok::Int(v), line, col) = self.next() else {
                    unreachable!()
                };
                u64::try_from(&v).map_err(|_| ParseError::Syntax {
                    line,
                    col,
                    expected: format!("{what} fitting in 64 bits"),
                    found: format!("`{v}`"),
                })
            }
            _ => Err(self.err(what)),
        }
    }

    // mem_arg := INT | SIDE '.stack(' INT ')' where SIDE matches the accessor's side
    fn parse_mem_arg(&mut self, side: Side) -> Result<MemArg, ParseError> {
        match self.peek() {
            Tok::Int(_) => Ok(MemArg::Literal(self.parse_small_int("memory argument")?)),
            Tok::Ident(s) if s == "src" || s == "dst" => {
                let arg_side = if s == "src" { Side::Src } else { Side::Dst };
                if arg_side != side {
                    return Err(self.err("a stack accessor of the same endpoint"));
                }
                self.next();
                self.expect(&Tok::Dot, "`.`")?;
                self.expect_ident("stack")?;
                self.expect(&Tok::LParen, "`(`")?;
                let idx = self.parse_small_int("stack index")?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(MemArg::Stack(idx as u32))
            }
            _ => Err(self.err("an integer or stack accessor")),
        }
    }

    fn attach_where_chain(
        &self,
        chain: &mut Chain,
        rel_idx: usize,
        w: WhereClause,
    ) -> Result<(), ParseError> {
        match &mut chain.relations[rel_idx].where_clause {
            slot @ None => {
                *slot = Some(w);
                Ok(())
            }
            Some(existing) if existing.src_ep == w.src_ep && existing.dst_ep == w.dst_ep => {
                existing.comparisons.extend(w.comparisons);
                Ok(())
            }
            Some(_) => Err(self.err("a single where clause per relation span")),
        }
    }
}

/// Parses a pattern from its textual form. Accepts both Unicode and ASCII
/// relation/operator spellings and `#` comments.
pub fn parse_pattern(text: &str) -> Result<PatternAst, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    p.parse()
}
