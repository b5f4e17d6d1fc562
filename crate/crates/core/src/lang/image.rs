//! Linked bytecode image and its `.bo` byte layout.
//!
//! ```text
//! magic      "SWBC"
//! version    u16
//! strings    u32 count, then per string: u32 byte length, UTF-8 bytes
//! constants  u32 count, then per entry: u8 tag (0 int, 1 float), 8 bytes
//! functions  u32 count, then per entry: u32 name, u32 offset, u32 params, u32 locals
//! code       u32 byte length, instruction bytes
//! debug      u32 count, then per entry: u32 offset, u32 line, u32 col
//! ```
//!
//! All integers are little-endian. Function 0 is the entry point.

use super::opcode::Opcode;
use super::{LangError, SourcePos};

pub const IMAGE_MAGIC: &[u8; 4] = b"SWBC";
pub const IMAGE_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy)]
pub enum Constant {
    Int(i64),
    Float(f64),
}

impl PartialEq for Constant {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Int(a), Self::Int(b)) => a == b,
            (Self::Float(a), Self::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Constant {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionEntry {
    /// String-table index of the function's label.
    pub name: u32,
    pub offset: u32,
    pub params: u32,
    pub locals: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DebugEntry {
    pub offset: u32,
    pub line: u32,
    pub col: u32,
}

impl DebugEntry {
    pub fn pos(&self) -> SourcePos {
        SourcePos::new(self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BytecodeImage {
    pub version: u16,
    pub strings: Vec<String>,
    pub constants: Vec<Constant>,
    pub functions: Vec<FunctionEntry>,
    pub code: Vec<u8>,
    pub debug: Vec<DebugEntry>,
}

impl Default for BytecodeImage {
    fn default() -> Self {
        Self {
            version: IMAGE_VERSION,
            strings: Vec::new(),
            constants: Vec::new(),
            functions: Vec::new(),
            code: Vec::new(),
            debug: Vec::new(),
        }
    }
}

/// One decoded instruction with its byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawInstr {
    pub offset: u32,
    pub op: Opcode,
    pub a: u32,
    pub b: u32,
}

impl BytecodeImage {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.code.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        put_u32(&mut out, self.strings.len() as u32);
        for s in &self.strings {
            put_u32(&mut out, s.len() as u32);
            out.extend_from_slice(s.as_bytes());
        }
        put_u32(&mut out, self.constants.len() as u32);
        for c in &self.constants {
            match c {
                Constant::Int(v) => {
                    out.push(0);
                    out.extend_from_slice(&v.to_le_bytes());
                }
                Constant::Float(v) => {
                    out.push(1);
                    out.extend_from_slice(&v.to_bits().to_le_bytes());
                }
            }
        }
        put_u32(&mut out, self.functions.len() as u32);
        for f in &self.functions {
            for v in [f.name, f.offset, f.params, f.locals] {
                put_u32(&mut out, v);
            }
        }
        put_u32(&mut out, self.code.len() as u32);
        out.extend_from_slice(&self.code);
        put_u32(&mut out, self.debug.len() as u32);
        for d in &self.debug {
            for v in [d.offset, d.line, d.col] {
                put_u32(&mut out, v);
            }
        }
        out
    }

    /// Decodes and validates an image. Every operand must reference a valid
    /// table entry and every jump must land on an instruction boundary.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LangError> {
        let mut r = Reader { bytes, at: 0 };
        let magic = r.take(4)?;
        if magic != IMAGE_MAGIC {
            return Err(LangError::decode(0, "bad magic, not a bytecode image"));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != IMAGE_VERSION {
            return Err(LangError::Version {
                found: version,
                expected: IMAGE_VERSION,
            });
        }
        let n = r.u32()?;
        let mut strings = Vec::new();
        for _ in 0..n {
            let len = r.u32()? as usize;
            let at = r.at;
            let raw = r.take(len)?;
            let s = std::str::from_utf8(raw)
                .map_err(|_| LangError::decode(at, "string is not valid UTF-8"))?;
            strings.push(s.to_string());
        }
        let n = r.u32()?;
        let mut constants = Vec::new();
        for _ in 0..n {
            let at = r.at;
            let tag = r.take(1)?[0];
            let raw = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            constants.push(match tag {
                0 => Constant::Int(raw as i64),
                1 => Constant::Float(f64::from_bits(raw)),
                _ => return Err(LangError::decode(at, format!("unknown constant tag {tag}"))),
            });
        }
        let n = r.u32()?;
        let mut functions = Vec::new();
        for _ in 0..n {
            functions.push(FunctionEntry {
                name: r.u32()?,
                offset: r.u32()?,
                params: r.u32()?,
                locals: r.u32()?,
            });
        }
        let len = r.u32()? as usize;
        let code_start = r.at;
        let code = r.take(len)?.to_vec();
        let n = r.u32()?;
        let mut debug = Vec::new();
        for _ in 0..n {
            debug.push(DebugEntry {
                offset: r.u32()?,
                line: r.u32()?,
                col: r.u32()?,
            });
        }
        if r.at != bytes.len() {
            return Err(LangError::decode(r.at, "trailing bytes after debug section"));
        }
        let img = Self {
            version,
            strings,
            constants,
            functions,
            code,
            debug,
        };
        img.validate(code_start)?;
        Ok(img)
    }

    /// Decodes the instruction stream. `base` is added to offsets reported
    /// in errors so they point into the file.
    pub fn instructions_at(&self, base: usize) -> Result<Vec<RawInstr>, LangError> {
        let mut out = Vec::new();
        let mut at = 0usize;
        while at < self.code.len() {
            let op = Opcode::from_byte(self.code[at]).ok_or_else(|| {
                LangError::decode(base + at, format!("unknown opcode 0x{:02x}", self.code[at]))
            })?;
            if at + op.width() > self.code.len() {
                return Err(LangError::decode(
                    base + self.code.len(),
                    format!("truncated `{}` instruction", op.mnemonic()),
                ));
            }
            let operand = |k: usize| {
                let s = at + 1 + 4 * k;
                u32::from_le_bytes(self.code[s..s + 4].try_into().expect("4 bytes"))
            };
            let a = if op.operand_count() > 0 { operand(0) } else { 0 };
            let b = if op.operand_count() > 1 { operand(1) } else { 0 };
            out.push(RawInstr {
                offset: at as u32,
                op,
                a,
                b,
            });
            at += op.width();
        }
        Ok(out)
    }

    pub fn instructions(&self) -> Result<Vec<RawInstr>, LangError> {
        self.instructions_at(0)
    }

    fn validate(&self, code_start: usize) -> Result<(), LangError> {
        let instrs = self.instructions_at(code_start)?;
        let boundary = |off: u32| instrs.binary_search_by_key(&off, |i| i.offset).is_ok();
        for f in &self.functions {
            if f.name as usize >= self.strings.len() {
                return Err(LangError::decode(code_start, "function name out of range"));
            }
            if !boundary(f.offset) {
                return Err(LangError::decode(
                    code_start,
                    format!("function offset {} is not an instruction", f.offset),
                ));
            }
            if f.params > f.locals {
                return Err(LangError::decode(code_start, "function has fewer locals than params"));
            }
        }
        for ins in &instrs {
            let bad = |what: &str| {
                LangError::decode(
                    code_start + ins.offset as usize,
                    format!("`{}` {what} out of range", ins.op.mnemonic()),
                )
            };
            match ins.op {
                Opcode::PushConst if ins.a as usize >= self.constants.len() => {
                    return Err(bad("constant"))
                }
                Opcode::PushStr | Opcode::GLoad | Opcode::GStore
                    if ins.a as usize >= self.strings.len() =>
                {
                    return Err(bad("string"))
                }
                Opcode::PushFn if ins.a as usize >= self.functions.len() => {
                    return Err(bad("function"))
                }
                op if op.is_jump() && !boundary(ins.a) => return Err(bad("jump target")),
                _ => {}
            }
        }
        let mut last = None;
        for d in &self.debug {
            if last.is_some_and(|l| d.offset <= l) || !boundary(d.offset) {
                return Err(LangError::decode(
                    code_start,
                    format!("debug entry for offset {} is misplaced", d.offset),
                ));
            }
            last = Some(d.offset);
        }
        Ok(())
    }

    pub fn function_name(&self, index: usize) -> &str {
        self.functions
            .get(index)
            .and_then(|f| self.strings.get(f.name as usize))
            .map(String::as_str)
            .unwrap_or("?")
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LangError> {
        if self.bytes.len() - self.at < n {
            return Err(LangError::decode(
                self.bytes.len(),
                format!("truncated image, needed {n} more bytes at offset {}", self.at),
            ));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, LangError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_image_round_trips() {
        let img = BytecodeImage::default();
        let bytes = img.to_bytes();
        assert_eq!(&bytes[..4], b"SWBC");
        assert_eq!(BytecodeImage::from_bytes(&bytes).unwrap(), img);
    }

    #[test]
    fn truncated_image_reports_offset() {
        let img = crate::lang::compile_source("a = 1").unwrap();
        let bytes = img.to_bytes();
        let cut = &bytes[..bytes.len() - 3];
        match BytecodeImage::from_bytes(cut) {
            Err(LangError::Decode { offset, .. }) => assert_eq!(offset, cut.len()),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn version_and_magic_checked() {
        let mut bytes = BytecodeImage::default().to_bytes();
        bytes[4] = 9;
        assert!(matches!(
            BytecodeImage::from_bytes(&bytes),
            Err(LangError::Version { found: 9, .. })
        ));
        bytes[0] = b'X';
        assert!(matches!(
            BytecodeImage::from_bytes(&bytes),
            Err(LangError::Decode { offset: 0, .. })
        ));
    }

    #[test]
    fn bad_jump_target_rejected() {
        let mut img = BytecodeImage::default();
        img.strings.push("<main>".into());
        img.functions.push(FunctionEntry {
            name: 0,
            offset: 0,
            params: 0,
            locals: 0,
        });
        img.code = vec![Opcode::Jump as u8, 2, 0, 0, 0, Opcode::Ret as u8];
        assert!(BytecodeImage::from_bytes(&img.to_bytes()).is_err());
        img.code[1] = 5;
        assert!(BytecodeImage::from_bytes(&img.to_bytes()).is_ok());
    }
}
