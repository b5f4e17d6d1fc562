//! In-memory object form emitted by the compiler and consumed by the linker.
//!
//! Jump targets are unit-local labels and function references are symbolic,
//! so units can be concatenated before any offsets exist.

use super::image::Constant;
use super::opcode::Opcode;
use super::SourcePos;

pub type LabelId = u32;

#[derive(Debug, Clone, PartialEq)]
pub enum ObjOp {
    /// Any operand-free instruction.
    Plain(Opcode),
    PushInt(i32),
    PushConst(Constant),
    PushStr(String),
    Jump(Opcode, LabelId),
    GLoad(String),
    GStore(String),
    LLoad { depth: u32, slot: u32 },
    LStore { depth: u32, slot: u32 },
    /// Closure over the function carrying this label.
    PushFn(String),
    Call(u32),
    MCall(u32),
    /// Marks a jump target; emits no code.
    Label(LabelId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjInstr {
    pub op: ObjOp,
    pub pos: Option<SourcePos>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjFunction {
    /// Link-time label. Named functions use their name; labels starting
    /// with `<` (the main chunk and lambdas) are private to their unit.
    pub label: String,
    pub params: u32,
    pub locals: u32,
    pub code: Vec<ObjInstr>,
}

impl ObjFunction {
    pub fn is_unit_local(&self) -> bool {
        is_local_label(&self.label)
    }
}

pub(crate) fn is_local_label(label: &str) -> bool {
    label.starts_with('<')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Global,
    Local,
    StringConst,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

/// One compiled script. `functions[0]` is the top-level chunk.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectUnit {
    pub origin: String,
    pub symbols: Vec<Symbol>,
    pub functions: Vec<ObjFunction>,
}

impl ObjectUnit {
    /// Instruction-to-position map over all functions, in emission order.
    pub fn debug_map(&self) -> impl Iterator<Item = (&str, usize, SourcePos)> + '_ {
        self.functions.iter().flat_map(|f| {
            f.code
                .iter()
                .enumerate()
                .filter_map(move |(i, ins)| ins.pos.map(|p| (f.label.as_str(), i, p)))
        })
    }
}
