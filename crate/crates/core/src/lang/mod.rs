//! Front end: lexer, parser, single-pass compiler, linker and the bytecode
//! image format with its textual listing.

pub mod ast;
pub mod compiler;
pub mod disasm;
pub mod image;
pub mod lexer;
pub mod link;
pub mod object;
pub mod opcode;
pub mod parser;

use std::fmt;

use thiserror::Error;

pub use ast::{Block, Expr, ExprKind, Stmt, StmtKind};
pub use compiler::compile;
pub use disasm::{assemble, disassemble};
pub use image::{BytecodeImage, Constant, DebugEntry, FunctionEntry, IMAGE_MAGIC, IMAGE_VERSION};
pub use lexer::{tokenize, Token, TokenKind};
pub use link::link;
pub use object::{ObjFunction, ObjInstr, ObjOp, ObjectUnit, Symbol, SymbolKind};
pub use opcode::Opcode;
pub use parser::parse;

/// 1-based line/column of a token in a script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SourcePos {
    pub line: u32,
    pub col: u32,
}

impl SourcePos {
    pub const fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Script text plus where it came from (file path or an inline tag).
#[derive(Debug, Clone)]
pub struct SourceScript {
    pub text: String,
    pub origin: String,
}

impl SourceScript {
    pub fn new(origin: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: origin.into(),
        }
    }

    pub fn inline(text: impl Into<String>) -> Self {
        Self::new("<inline>", text)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LangError {
    #[error("{pos}: lexical error: {msg}")]
    Lex { pos: SourcePos, msg: String },
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: SourcePos, msg: String },
    #[error("{pos}: compile error: {msg}")]
    Compile { pos: SourcePos, msg: String },
    #[error("link error: duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("link error: unresolved label `{0}`")]
    UnresolvedLabel(String),
    #[error("link error: {0}")]
    Link(String),
    #[error("image decode error at offset {offset}: {msg}")]
    Decode { offset: usize, msg: String },
    #[error("unsupported image version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("assembly error at line {line}: {msg}")]
    Asm { line: usize, msg: String },
}

impl LangError {
    pub(crate) fn lex(pos: SourcePos, msg: impl Into<String>) -> Self {
        Self::Lex {
            pos,
            msg: msg.into(),
        }
    }

    pub(crate) fn syntax(pos: SourcePos, msg: impl Into<String>) -> Self {
        Self::Syntax {
            pos,
            msg: msg.into(),
        }
    }

    pub(crate) fn compile(pos: SourcePos, msg: impl Into<String>) -> Self {
        Self::Compile {
            pos,
            msg: msg.into(),
        }
    }

    pub(crate) fn decode(offset: usize, msg: impl Into<String>) -> Self {
        Self::Decode {
            offset,
            msg: msg.into(),
        }
    }

    /// Source position for front-end errors.
    pub fn pos(&self) -> Option<SourcePos> {
        match self {
            Self::Lex { pos, .. } | Self::Syntax { pos, .. } | Self::Compile { pos, .. } => {
                Some(*pos)
            }
            _ => None,
        }
    }
}

/// Tokenize, parse and compile one script into an object unit.
pub fn compile_unit(script: &SourceScript) -> Result<ObjectUnit, LangError> {
    let tokens = tokenize(&script.text)?;
    let ast = parse(&tokens)?;
    compile(&ast, &script.origin)
}

/// Full pipeline for a single script: compile and link into an image.
pub fn compile_source(text: &str) -> Result<BytecodeImage, LangError> {
    let unit = compile_unit(&SourceScript::inline(text))?;
    link(&[unit])
}
