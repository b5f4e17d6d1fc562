//! Textual listing of an image and the assembler that reads it back.
//!
//! `assemble(&disassemble(&img)) == img` holds for every valid image: the
//! listing carries every table, and debug positions ride in `; @line:col`
//! comments.

use std::fmt::Write as _;

use super::image::{BytecodeImage, Constant, DebugEntry, FunctionEntry};
use super::opcode::Opcode;
use super::LangError;

pub fn disassemble(img: &BytecodeImage) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "; SWBC bytecode image");
    let _ = writeln!(out, ".version {}", img.version);
    let _ = writeln!(out, ".strings {}", img.strings.len());
    for (i, s) in img.strings.iter().enumerate() {
        let _ = writeln!(out, "  {i} {s:?}");
    }
    let _ = writeln!(out, ".constants {}", img.constants.len());
    for (i, c) in img.constants.iter().enumerate() {
        match c {
            Constant::Int(v) => {
                let _ = writeln!(out, "  {i} int {v}");
            }
            Constant::Float(v) => {
                let _ = writeln!(out, "  {i} float 0x{:016x} ; {v:?}", v.to_bits());
            }
        }
    }
    let _ = writeln!(out, ".functions {}", img.functions.len());
    for (i, f) in img.functions.iter().enumerate() {
        let _ = writeln!(
            out,
            "  {i} name={} offset={} params={} locals={} ; {:?}",
            f.name,
            f.offset,
            f.params,
            f.locals,
            img.function_name(i)
        );
    }
    let _ = writeln!(out, ".code {}", img.code.len());
    // Images reaching here were validated on load or built by the linker,
    // so decoding cannot fail; fall back to a raw dump just in case.
    let instrs = match img.instructions() {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(out, "; undecodable code section: {e}");
            return out;
        }
    };
    let mut debug = img.debug.iter().peekable();
    for ins in instrs {
        for (fi, f) in img.functions.iter().enumerate() {
            if f.offset == ins.offset {
                let _ = writeln!(out, "; function {:?}", img.function_name(fi));
            }
        }
        let mut line = format!("  {:08x} {}", ins.offset, ins.op.mnemonic());
        match ins.op.operand_count() {
            0 => {}
            1 if ins.op == Opcode::PushInt => {
                let _ = write!(line, " {}", ins.a as i32);
            }
            1 => {
                let _ = write!(line, " {}", ins.a);
            }
            _ => {
                let _ = write!(line, " {} {}", ins.a, ins.b);
            }
        }
        let mut notes = Vec::new();
        match ins.op {
            Opcode::PushStr | Opcode::GLoad | Opcode::GStore => {
                if let Some(s) = img.strings.get(ins.a as usize) {
                    notes.push(format!("{s:?}"));
                }
            }
            Opcode::PushConst => match img.constants.get(ins.a as usize) {
                Some(Constant::Int(v)) => notes.push(v.to_string()),
                Some(Constant::Float(v)) => notes.push(format!("{v:?}")),
                None => {}
            },
            Opcode::PushFn => notes.push(format!("{:?}", img.function_name(ins.a as usize))),
            _ => {}
        }
        while let Some(d) = debug.next_if(|d| d.offset <= ins.offset) {
            if d.offset == ins.offset {
                notes.push(format!("@{}:{}", d.line, d.col));
            }
        }
        if !notes.is_empty() {
            let _ = write!(line, " ; {}", notes.join(" "));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(".end\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Strings,
    Constants,
    Functions,
    Code,
    End,
}

/// Parses a listing produced by [`disassemble`] back into an image.
pub fn assemble(text: &str) -> Result<BytecodeImage, LangError> {
    let mut img = BytecodeImage::default();
    let mut section = Section::Header;
    let mut expected = [0usize; 3];
    let mut code_len = None;

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let err = |msg: &str| LangError::Asm {
            line: line_no,
            msg: msg.to_string(),
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        if let Some(directive) = trimmed.strip_prefix('.') {
            let mut parts = directive.split_whitespace();
            let name = parts.next().unwrap_or("");
            let arg = parts.next();
            let count = || -> Result<usize, LangError> {
                arg.and_then(|a| a.parse().ok())
                    .ok_or_else(|| err("directive needs a count"))
            };
            section = match name {
                "version" => {
                    img.version = arg
                        .and_then(|a| a.parse().ok())
                        .ok_or_else(|| err("bad version"))?;
                    Section::Header
                }
                "strings" => {
                    expected[0] = count()?;
                    Section::Strings
                }
                "constants" => {
                    expected[1] = count()?;
                    Section::Constants
                }
                "functions" => {
                    expected[2] = count()?;
                    Section::Functions
                }
                "code" => {
                    code_len = Some(count()?);
                    Section::Code
                }
                "end" => Section::End,
                other => return Err(err(&format!("unknown directive `.{other}`"))),
            };
            continue;
        }

        match section {
            Section::Header | Section::End => return Err(err("content outside of a section")),
            Section::Strings => {
                let (idx, rest) = split_index(trimmed).ok_or_else(|| err("bad string entry"))?;
                if idx != img.strings.len() {
                    return Err(err("string entries out of order"));
                }
                let (s, _) = parse_quoted(rest).ok_or_else(|| err("bad string literal"))?;
                img.strings.push(s);
            }
            Section::Constants => {
                let body = strip_comment(trimmed);
                let (idx, rest) = split_index(body).ok_or_else(|| err("bad constant entry"))?;
                if idx != img.constants.len() {
                    return Err(err("constant entries out of order"));
                }
                let mut parts = rest.split_whitespace();
                let c = match (parts.next(), parts.next()) {
                    (Some("int"), Some(v)) => {
                        Constant::Int(v.parse().map_err(|_| err("bad int constant"))?)
                    }
                    (Some("float"), Some(v)) => {
                        let hex = v.strip_prefix("0x").ok_or_else(|| err("float needs 0x bits"))?;
                        Constant::Float(f64::from_bits(
                            u64::from_str_radix(hex, 16).map_err(|_| err("bad float bits"))?,
                        ))
                    }
                    _ => return Err(err("constant must be `int` or `float`")),
                };
                img.constants.push(c);
            }
            Section::Functions => {
                let body = strip_comment(trimmed);
                let (idx, rest) = split_index(body).ok_or_else(|| err("bad function entry"))?;
                if idx != img.functions.len() {
                    return Err(err("function entries out of order"));
                }
                let mut f = FunctionEntry {
                    name: 0,
                    offset: 0,
                    params: 0,
                    locals: 0,
                };
                for kv in rest.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| err("expected key=value"))?;
                    let v: u32 = v.parse().map_err(|_| err("bad number"))?;
                    match k {
                        "name" => f.name = v,
                        "offset" => f.offset = v,
                        "params" => f.params = v,
                        "locals" => f.locals = v,
                        _ => return Err(err(&format!("unknown field `{k}`"))),
                    }
                }
                img.functions.push(f);
            }
            Section::Code => {
                let (body, comment) = match trimmed.split_once(';') {
                    Some((b, c)) => (b.trim(), Some(c)),
                    None => (trimmed, None),
                };
                let mut parts = body.split_whitespace();
                let offset_field = parts.next().ok_or_else(|| err("missing offset"))?;
                let offset = u32::from_str_radix(offset_field, 16).map_err(|_| err("bad offset"))?;
                if offset as usize != img.code.len() {
                    return Err(err(&format!(
                        "offset {offset:08x} does not match position {:08x}",
                        img.code.len()
                    )));
                }
                let mnemonic = parts.next().ok_or_else(|| err("missing mnemonic"))?;
                let op = Opcode::from_mnemonic(mnemonic)
                    .ok_or_else(|| err(&format!("unknown mnemonic `{mnemonic}`")))?;
                img.code.push(op as u8);
                for _ in 0..op.operand_count() {
                    let tok = parts.next().ok_or_else(|| err("missing operand"))?;
                    let v = if op == Opcode::PushInt {
                        tok.parse::<i32>().map_err(|_| err("bad operand"))? as u32
                    } else {
                        tok.parse::<u32>().map_err(|_| err("bad operand"))?
                    };
                    img.code.extend_from_slice(&v.to_le_bytes());
                }
                if parts.next().is_some() {
                    return Err(err("too many operands"));
                }
                if let Some(pos) = comment.and_then(debug_position) {
                    img.debug.push(DebugEntry {
                        offset,
                        line: pos.0,
                        col: pos.1,
                    });
                }
            }
        }
    }

    let counts = [
        img.strings.len(),
        img.constants.len(),
        img.functions.len(),
    ];
    for (name, (want, got)) in ["strings", "constants", "functions"]
        .iter()
        .zip(expected.iter().zip(counts))
    {
        if *want != got {
            return Err(LangError::Asm {
                line: 0,
                msg: format!("section .{name} declares {want} entries but has {got}"),
            });
        }
    }
    if code_len.is_some_and(|n| n != img.code.len()) {
        return Err(LangError::Asm {
            line: 0,
            msg: "code length does not match .code directive".into(),
        });
    }
    // Re-run load-time validation on the assembled result.
    BytecodeImage::from_bytes(&img.to_bytes())
}

fn split_index(s: &str) -> Option<(usize, &str)> {
    let (idx, rest) = s.split_once(char::is_whitespace)?;
    Some((idx.parse().ok()?, rest.trim_start()))
}

fn strip_comment(s: &str) -> &str {
    s.split_once(';').map_or(s, |(b, _)| b).trim()
}

fn debug_position(comment: &str) -> Option<(u32, u32)> {
    // Quoted notes may contain arbitrary text, so skip past them first.
    let mut rest = comment.trim();
    while rest.starts_with('"') {
        let (_, used) = parse_quoted(rest)?;
        rest = rest[used..].trim_start();
    }
    rest.split_whitespace().find_map(|tok| {
        let (l, c) = tok.strip_prefix('@')?.split_once(':')?;
        Some((l.parse().ok()?, c.parse().ok()?))
    })
}

/// Parses a string literal in Rust `{:?}` form; returns the value and the
/// number of bytes consumed.
fn parse_quoted(s: &str) -> Option<(String, usize)> {
    let mut chars = s.char_indices();
    if chars.next()?.1 != '"' {
        return None;
    }
    let mut out = String::new();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Some((out, i + 1)),
            '\\' => match chars.next()?.1 {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                'r' => out.push('\r'),
                '0' => out.push('\0'),
                '\\' => out.push('\\'),
                '"' => out.push('"'),
                '\'' => out.push('\''),
                'u' => {
                    if chars.next()?.1 != '{' {
                        return None;
                    }
                    let mut hex = String::new();
                    loop {
                        match chars.next()?.1 {
                            '}' => break,
                            h => hex.push(h),
                        }
                    }
                    out.push(char::from_u32(u32::from_str_radix(&hex, 16).ok()?)?);
                }
                _ => return None,
            },
            c => out.push(c),
        }
    }
    None
}
