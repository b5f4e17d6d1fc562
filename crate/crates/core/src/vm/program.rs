//! Decoded, immutable form of a bytecode image shared by every VM that runs it.

use crate::lang::{BytecodeImage, Constant, LangError, Opcode, SourcePos};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instr {
    pub op: Opcode,
    /// First operand. Jump targets are rewritten to instruction indices.
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Clone)]
pub struct FunctionInfo {
    pub name: String,
    pub entry: u32,
    pub params: u32,
    pub locals: u32,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub strings: Vec<String>,
    pub constants: Vec<Constant>,
    pub functions: Vec<FunctionInfo>,
    pub code: Vec<Instr>,
    /// Source position per instruction, from the nearest preceding debug entry.
    pub positions: Vec<Option<SourcePos>>,
}

impl Program {
    pub fn from_image(img: &BytecodeImage) -> Result<Self, LangError> {
        // Re-validate: images built in memory skip the checks done on load.
        let img = BytecodeImage::from_bytes(&img.to_bytes())?;
        let raw = img.instructions()?;
        let index_of = |offset: u32| {
            raw.binary_search_by_key(&offset, |i| i.offset)
                .expect("validated image has instruction boundaries") as u32
        };
        let code = raw
            .iter()
            .map(|r| Instr {
                op: r.op,
                a: if r.op.is_jump() { index_of(r.a) } else { r.a },
                b: r.b,
            })
            .collect();
        let functions = img
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| FunctionInfo {
                name: img.function_name(i).to_string(),
                entry: index_of(f.offset),
                params: f.params,
                locals: f.locals,
            })
            .collect();
        let mut positions = Vec::with_capacity(raw.len());
        let mut d = 0;
        let mut current = None;
        for r in &raw {
            while d < img.debug.len() && img.debug[d].offset <= r.offset {
                current = Some(img.debug[d].pos());
                d += 1;
            }
            positions.push(current);
        }
        Ok(Self {
            strings: img.strings,
            constants: img.constants,
            functions,
            code,
            positions,
        })
    }

    pub fn function_at(&self, pc: u32) -> Option<&FunctionInfo> {
        self.functions
            .iter()
            .filter(|f| f.entry <= pc)
            .max_by_key(|f| f.entry)
    }
}
