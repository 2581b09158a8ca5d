//! A small two-pass assembler for the executor's opcode subset.
//!
//! Source format: one instruction per line, `;` comments, `label:`
//! definitions, `PUSH @label` (emitted as PUSH2), explicit `PUSHn` with a
//! hex or decimal immediate, and bare `PUSH` choosing the narrowest width.
//! `{NAME}` placeholders are substituted from the provided map before
//! immediates are parsed, so scenario builders can splice in addresses
//! known only after deployment.

use crate::opcode::Opcode;
use num_bigint::BigUint;
use num_traits::Num;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: unknown mnemonic `{name}`")]
    UnknownMnemonic { line: usize, name: String },
    #[error("line {line}: bad immediate `{text}`: {reason}")]
    BadImmediate {
        line: usize,
        text: String,
        reason: String,
    },
    #[error("line {line}: `{name}` takes no immediate")]
    UnexpectedImmediate { line: usize, name: String },
    #[error("line {line}: PUSH requires an immediate")]
    MissingImmediate { line: usize },
    #[error("line {line}: unknown label `{name}`")]
    UnknownLabel { line: usize, name: String },
    #[error("line {line}: duplicate label `{name}`")]
    DuplicateLabel { line: usize, name: String },
    #[error("line {line}: unknown placeholder `{{{name}}}`")]
    UnknownPlaceholder { line: usize, name: String },
}

enum Item {
    /// Fully resolved bytes (opcode byte plus any immediate).
    Bytes(Vec<u8>),
    /// PUSH2 of a label offset, resolved in the second pass.
    PushLabel { line: usize, name: String },
}

fn parse_immediate(line: usize, text: &str) -> Result<Vec<u8>, AsmError> {
    let bad = |reason: &str| AsmError::BadImmediate {
        line,
        text: text.into(),
        reason: reason.into(),
    };
    let value = if let Some(hex) = text.strip_prefix("0x").or(text.strip_prefix("0X")) {
        // Preserve the written width of hex immediates (e.g. a 20-byte
        // address with leading zero bytes).
        if hex.is_empty() || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(bad("not a hex string"));
        }
        let padded = if hex.len() % 2 == 1 {
            format!("0{hex}")
        } else {
            hex.to_string()
        };
        return (0..padded.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&padded[i..i + 2], 16).map_err(|_| bad("not hex")))
            .collect();
    } else {
        BigUint::from_str_radix(text, 10).map_err(|_| bad("not a decimal integer"))?
    };
    let bytes = value.to_bytes_be();
    Ok(if bytes == [0] { vec![0] } else { bytes })
}

/// Assembles source into bytecode. `subs` maps placeholder names used as
/// `{NAME}` immediates to their textual replacement (hex or decimal).
pub fn assemble(source: &str, subs: &HashMap<String, String>) -> Result<Vec<u8>, AsmError> {
    let mut items: Vec<Item> = Vec::new();
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut offset = 0usize;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split(';').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if let Some(name) = text.strip_suffix(':') {
            let name = name.trim().to_string();
            if labels.insert(name.clone(), offset).is_some() {
                return Err(AsmError::DuplicateLabel { line, name });
            }
            continue;
        }
        let mut parts = text.split_whitespace();
        let mnemonic = parts.next().unwrap();
        let arg = parts.next().map(|s| s.to_string());
        let arg = match arg {
            Some(a) => {
                if let Some(name) = a.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                    Some(
                        subs.get(name)
                            .ok_or_else(|| AsmError::UnknownPlaceholder {
                                line,
                                name: name.to_string(),
                            })?
                            .clone(),
                    )
                } else {
                    Some(a)
                }
            }
            None => None,
        };

        if mnemonic == "PUSH" {
            let arg = arg.ok_or(AsmError::MissingImmediate { line })?;
            if let Some(name) = arg.strip_prefix('@') {
                items.push(Item::PushLabel {
                    line,
                    name: name.to_string(),
                });
                offset += 3;
            } else {
                let bytes = parse_immediate(line, &arg)?;
                if bytes.len() > 32 {
                    return Err(AsmError::BadImmediate {
                        line,
                        text: arg,
                        reason: "wider than 32 bytes".into(),
                    });
                }
                let mut out = vec![0x60 + (bytes.len() as u8 - 1)];
                out.extend_from_slice(&bytes);
                offset += out.len();
                items.push(Item::Bytes(out));
            }
            continue;
        }

        let opcode =
            Opcode::from_mnemonic(mnemonic).ok_or_else(|| AsmError::UnknownMnemonic {
                line,
                name: mnemonic.to_string(),
            })?;
        if opcode.is_push() {
            let width = opcode.push_width();
            let arg = arg.ok_or(AsmError::MissingImmediate { line })?;
            if let Some(name) = arg.strip_prefix('@') {
                if width != 2 {
                    return Err(AsmError::BadImmediate {
                        line,
                        text: arg,
                        reason: "label immediates require PUSH2 or bare PUSH".into(),
                    });
                }
                items.push(Item::PushLabel {
                    line,
                    name: name.to_string(),
                });
                offset += 3;
            } else {
                let bytes = parse_immediate(line, &arg)?;
                if bytes.len() > width {
                    return Err(AsmError::BadImmediate {
                        line,
                        text: arg,
                        reason: format!("does not fit in {width} bytes"),
                    });
                }
                let mut out = vec![opcode.0];
                out.extend(std::iter::repeat(0).take(width - bytes.len()));
                out.extend_from_slice(&bytes);
                offset += out.len();
                items.push(Item::Bytes(out));
            }
        } else {
            if arg.is_some() {
                return Err(AsmError::UnexpectedImmediate {
                    line,
                    name: mnemonic.to_string(),
                });
            }
            items.push(Item::Bytes(vec![opcode.0]));
            offset += 1;
        }
    }

    let mut code = Vec::with_capacity(offset);
    for item in items {
        match item {
            Item::Bytes(b) => code.extend_from_slice(&b),
            Item::PushLabel { line, name } => {
                let target = *labels
                    .get(&name)
                    .ok_or_else(|| AsmError::UnknownLabel { line, name })?;
                code.push(0x61); // PUSH2
                code.push((target >> 8) as u8);
                code.push((target & 0xff) as u8);
            }
        }
    }
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asm(src: &str) -> Vec<u8> {
        assemble(src, &HashMap::new()).unwrap()
    }

    #[test]
    fn assembles_basic_program() {
        let code = asm("PUSH1 0x20\nPUSH1 5\nADD\nSTOP ; trailing comment\n");
        assert_eq!(code, vec![0x60, 0x20, 0x60, 0x05, 0x01, 0x00]);
    }

    #[test]
    fn labels_resolve_forward_and_backward() {
        let code = asm("start:\nPUSH @end\nJUMP\nend:\nJUMPDEST\nSTOP\n");
        // PUSH2 0x0004 JUMP JUMPDEST STOP
        assert_eq!(code, vec![0x61, 0x00, 0x04, 0x56, 0x5b, 0x00]);
    }

    #[test]
    fn placeholders_substitute() {
        let mut subs = HashMap::new();
        subs.insert("BANK".to_string(), format!("0x{}", "11".repeat(20)));
        let code = assemble("PUSH20 {BANK}\nSTOP\n", &subs).unwrap();
        assert_eq!(code[0], 0x73);
        assert_eq!(&code[1..21], &[0x11; 20]);
        assert!(matches!(
            assemble("PUSH20 {NOPE}\n", &subs),
            Err(AsmError::UnknownPlaceholder { .. })
        ));
    }

    #[test]
    fn width_checks() {
        assert!(matches!(
            assemble("PUSH1 0x1234\n", &HashMap::new()),
            Err(AsmError::BadImmediate { .. })
        ));
        // Explicit width pads on the left.
        assert_eq!(asm("PUSH2 1\n"), vec![0x61, 0x00, 0x01]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            assemble("STOP\nBLORP\n", &HashMap::new()),
            Err(AsmError::UnknownMnemonic {
                line: 2,
                name: "BLORP".into()
            })
        );
    }
}
