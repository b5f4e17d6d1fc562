//! Instruction set shared by the linker, the loader and the listing tools.
//!
//! Every instruction is one opcode byte followed by zero, one or two 32-bit
//! little-endian operands.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    PushNil = 0x01,
    /// Push a signed 32-bit integer immediate.
    PushInt = 0x02,
    /// Push constant-pool entry.
    PushConst = 0x03,
    /// Push string-table entry.
    PushStr = 0x04,
    Pop = 0x05,
    Dup = 0x06,
    Add = 0x10,
    Sub = 0x11,
    Mul = 0x12,
    Div = 0x13,
    Mod = 0x14,
    Pow = 0x15,
    Neg = 0x16,
    Eq = 0x18,
    Neq = 0x19,
    Lt = 0x1a,
    Lte = 0x1b,
    Gt = 0x1c,
    Gte = 0x1d,
    Not = 0x1e,
    Jump = 0x20,
    /// Pop; jump when false.
    JumpZ = 0x21,
    /// Pop; jump when true.
    JumpNz = 0x22,
    GLoad = 0x30,
    GStore = 0x31,
    /// Operands: environment depth, slot.
    LLoad = 0x32,
    LStore = 0x33,
    PushTable = 0x40,
    /// `table key -> value`
    TGet = 0x41,
    /// `table key value ->`
    TPut = 0x42,
    /// Create a closure over the current environment.
    PushFn = 0x50,
    PushSelf = 0x51,
    /// `callee args.. -> result`
    Call = 0x60,
    /// `receiver callee args.. -> result`, binding `self`.
    MCall = 0x61,
    Ret = 0x62,
}

pub const ALL_OPCODES: &[Opcode] = &[
    Opcode::PushNil,
    Opcode::PushInt,
    Opcode::PushConst,
    Opcode::PushStr,
    Opcode::Pop,
    Opcode::Dup,
    Opcode::Add,
    Opcode::Sub,
    Opcode::Mul,
    Opcode::Div,
    Opcode::Mod,
    Opcode::Pow,
    Opcode::Neg,
    Opcode::Eq,
    Opcode::Neq,
    Opcode::Lt,
    Opcode::Lte,
    Opcode::Gt,
    Opcode::Gte,
    Opcode::Not,
    Opcode::Jump,
    Opcode::JumpZ,
    Opcode::JumpNz,
    Opcode::GLoad,
    Opcode::GStore,
    Opcode::LLoad,
    Opcode::LStore,
    Opcode::PushTable,
    Opcode::TGet,
    Opcode::TPut,
    Opcode::PushFn,
    Opcode::PushSelf,
    Opcode::Call,
    Opcode::MCall,
    Opcode::Ret,
];

impl Opcode {
    pub fn from_byte(b: u8) -> Option<Self> {
        ALL_OPCODES.iter().copied().find(|op| *op as u8 == b)
    }

    pub fn operand_count(self) -> usize {
        use Opcode::*;
        match self {
            PushInt | PushConst | PushStr | Jump | JumpZ | JumpNz | GLoad | GStore | PushFn
            | Call | MCall => 1,
            LLoad | LStore => 2,
            _ => 0,
        }
    }

    /// Encoded size in bytes.
    pub fn width(self) -> usize {
        1 + 4 * self.operand_count()
    }

    pub fn mnemonic(self) -> &'static str {
        use Opcode::*;
        match self {
            PushNil => "pushnil",
            PushInt => "pushi",
            PushConst => "pushk",
            PushStr => "pushs",
            Pop => "pop",
            Dup => "dup",
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Div => "div",
            Mod => "mod",
            Pow => "pow",
            Neg => "neg",
            Eq => "eq",
            Neq => "neq",
            Lt => "lt",
            Lte => "lte",
            Gt => "gt",
            Gte => "gte",
            Not => "not",
            Jump => "jump",
            JumpZ => "jumpz",
            JumpNz => "jumpnz",
            GLoad => "gload",
            GStore => "gstore",
            LLoad => "lload",
            LStore => "lstore",
            PushTable => "pusht",
            TGet => "tget",
            TPut => "tput",
            PushFn => "pushf",
            PushSelf => "pushself",
            Call => "call",
            MCall => "mcall",
            Ret => "ret",
        }
    }

    pub fn from_mnemonic(name: &str) -> Option<Self> {
        ALL_OPCODES.iter().copied().find(|op| op.mnemonic() == name)
    }

    pub fn is_jump(self) -> bool {
        matches!(self, Opcode::Jump | Opcode::JumpZ | Opcode::JumpNz)
    }
}
