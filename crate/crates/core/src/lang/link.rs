//! Links object units into a [`BytecodeImage`].
//!
//! A single unit keeps its top-level chunk as the entry point. With several
//! units a synthetic entry function calls each unit's chunk in order.

use std::collections::HashMap;

use super::image::{BytecodeImage, Constant, DebugEntry, FunctionEntry, IMAGE_VERSION};
use super::object::{is_local_label, ObjFunction, ObjInstr, ObjOp, ObjectUnit};
use super::opcode::Opcode;
use super::LangError;

#[derive(Default)]
struct Pools {
    strings: Vec<String>,
    string_index: HashMap<String, u32>,
    constants: Vec<Constant>,
}

impl Pools {
    fn string(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.string_index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_string());
        self.string_index.insert(s.to_string(), i);
        i
    }

    fn constant(&mut self, c: Constant) -> u32 {
        match self.constants.iter().position(|k| *k == c) {
            Some(i) => i as u32,
            None => {
                self.constants.push(c);
                (self.constants.len() - 1) as u32
            }
        }
    }
}

/// A function placed in the final image, with labels already qualified.
struct Placed<'a> {
    label: String,
    unit: usize,
    func: std::borrow::Cow<'a, ObjFunction>,
}

pub fn link(units: &[ObjectUnit]) -> Result<BytecodeImage, LangError> {
    if units.is_empty() {
        return Ok(BytecodeImage::default());
    }
    let multi = units.len() > 1;
    let qualify = |label: &str, unit: usize| {
        if multi && is_local_label(label) {
            format!("{label}#{unit}")
        } else {
            label.to_string()
        }
    };

    let mut placed: Vec<Placed<'_>> = Vec::new();
    if multi {
        let mut code = Vec::new();
        for (u, unit) in units.iter().enumerate() {
            let Some(main) = unit.functions.first() else {
                continue;
            };
            code.push(ObjInstr {
                op: ObjOp::PushFn(qualify(&main.label, u)),
                pos: None,
            });
            code.push(ObjInstr {
                op: ObjOp::Call(0),
                pos: None,
            });
            code.push(ObjInstr {
                op: ObjOp::Plain(Opcode::Pop),
                pos: None,
            });
        }
        code.push(ObjInstr {
            op: ObjOp::Plain(Opcode::PushNil),
            pos: None,
        });
        code.push(ObjInstr {
            op: ObjOp::Plain(Opcode::Ret),
            pos: None,
        });
        placed.push(Placed {
            label: "<entry>".into(),
            unit: usize::MAX,
            func: std::borrow::Cow::Owned(ObjFunction {
                label: "<entry>".into(),
                params: 0,
                locals: 0,
                code,
            }),
        });
    }
    for (u, unit) in units.iter().enumerate() {
        for f in &unit.functions {
            placed.push(Placed {
                label: qualify(&f.label, u),
                unit: u,
                func: std::borrow::Cow::Borrowed(f),
            });
        }
    }

    let mut fn_index: HashMap<&str, u32> = HashMap::new();
    for (i, p) in placed.iter().enumerate() {
        if fn_index.insert(p.label.as_str(), i as u32).is_some() {
            return Err(LangError::DuplicateSymbol(p.label.clone()));
        }
    }

    // Layout pass: function offsets and label offsets.
    let mut offsets = Vec::with_capacity(placed.len());
    let mut label_offsets: Vec<HashMap<u32, u32>> = Vec::with_capacity(placed.len());
    let mut at = 0u32;
    for p in &placed {
        offsets.push(at);
        let mut labels = HashMap::new();
        for ins in &p.func.code {
            match &ins.op {
                ObjOp::Label(l) => {
                    if labels.insert(*l, at).is_some() {
                        return Err(LangError::Link(format!(
                            "label L{l} defined twice in `{}`",
                            p.label
                        )));
                    }
                }
                op => at += op_width(op) as u32,
            }
        }
        label_offsets.push(labels);
    }

    let mut pools = Pools::default();
    for p in &placed {
        pools.string(&p.label);
    }

    let mut code = Vec::with_capacity(at as usize);
    let mut debug = Vec::new();
    for (fi, p) in placed.iter().enumerate() {
        for ins in &p.func.code {
            if let ObjOp::Label(_) = ins.op {
                continue;
            }
            let offset = code.len() as u32;
            if let Some(pos) = ins.pos {
                debug.push(DebugEntry {
                    offset,
                    line: pos.line,
                    col: pos.col,
                });
            }
            let (op, operands): (Opcode, Vec<u32>) = match &ins.op {
                ObjOp::Plain(op) => (*op, vec![]),
                ObjOp::PushInt(v) => (Opcode::PushInt, vec![*v as u32]),
                ObjOp::PushConst(c) => (Opcode::PushConst, vec![pools.constant(*c)]),
                ObjOp::PushStr(s) => (Opcode::PushStr, vec![pools.string(s)]),
                ObjOp::GLoad(s) => (Opcode::GLoad, vec![pools.string(s)]),
                ObjOp::GStore(s) => (Opcode::GStore, vec![pools.string(s)]),
                ObjOp::LLoad { depth, slot } => (Opcode::LLoad, vec![*depth, *slot]),
                ObjOp::LStore { depth, slot } => (Opcode::LStore, vec![*depth, *slot]),
                ObjOp::Jump(op, l) => {
                    let target = label_offsets[fi].get(l).copied().ok_or_else(|| {
                        LangError::UnresolvedLabel(format!("{}:L{l}", p.label))
                    })?;
                    (*op, vec![target])
                }
                ObjOp::PushFn(label) => {
                    let key = if p.unit == usize::MAX {
                        label.clone()
                    } else {
                        qualify(label, p.unit)
                    };
                    let idx = fn_index
                        .get(key.as_str())
                        .copied()
                        .ok_or(LangError::UnresolvedLabel(label.clone()))?;
                    (Opcode::PushFn, vec![idx])
                }
                ObjOp::Call(n) => (Opcode::Call, vec![*n]),
                ObjOp::MCall(n) => (Opcode::MCall, vec![*n]),
                ObjOp::Label(_) => unreachable!(),
            };
            if op.operand_count() != operands.len() {
                return Err(LangError::Link(format!(
                    "`{}` expects {} operands",
                    op.mnemonic(),
                    op.operand_count()
                )));
            }
            code.push(op as u8);
            for v in operands {
                code.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    let functions = placed
        .iter()
        .zip(&offsets)
        .map(|(p, &offset)| FunctionEntry {
            name: pools.string_index[&p.label],
            offset,
            params: p.func.params,
            locals: p.func.locals,
        })
        .collect();

    Ok(BytecodeImage {
        version: IMAGE_VERSION,
        strings: pools.strings,
        constants: pools.constants,
        functions,
        code,
        debug,
    })
}

fn op_width(op: &ObjOp) -> usize {
    match op {
        ObjOp::Plain(o) => o.width(),
        ObjOp::Label(_) => 0,
        ObjOp::LLoad { .. } | ObjOp::LStore { .. } => 9,
        _ => 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{compile_unit, SourceScript};

    fn unit(src: &str) -> ObjectUnit {
        compile_unit(&SourceScript::inline(src)).unwrap()
    }

    #[test]
    fn single_unit_keeps_its_chunk_as_entry() {
        let img = link(&[unit("a = 1")]).unwrap();
        assert_eq!(img.function_name(0), "<main>");
        assert_eq!(img.functions.len(), 1);
        assert!(img.strings.contains(&"a".to_string()));
    }

    #[test]
    fn duplicate_named_function_across_units() {
        let err = link(&[unit("function f() {}"), unit("function f() {}")]).unwrap_err();
        assert_eq!(err, LangError::DuplicateSymbol("f".into()));
    }

    #[test]
    fn lambdas_in_different_units_do_not_clash() {
        let a = unit("g = function() { return 1 }");
        let img = link(&[a.clone(), a]).unwrap();
        assert_eq!(img.function_name(0), "<entry>");
        assert_eq!(img.functions.len(), 5);
    }

    #[test]
    fn unresolved_function_label() {
        let mut u = unit("a = 1");
        u.functions[0].code.insert(
            0,
            ObjInstr {
                op: ObjOp::PushFn("nowhere".into()),
                pos: None,
            },
        );
        assert_eq!(
            link(&[u]).unwrap_err(),
            LangError::UnresolvedLabel("nowhere".into())
        );
    }

    #[test]
    fn unresolved_jump_label() {
        let mut u = unit("a = 1");
        u.functions[0].code.insert(
            0,
            ObjInstr {
                op: ObjOp::Jump(Opcode::Jump, 99),
                pos: None,
            },
        );
        assert!(matches!(link(&[u]), Err(LangError::UnresolvedLabel(_))));
    }

    #[test]
    fn linking_is_deterministic() {
        let src = "function f(a) { return a * 2.5 }\nx = f(3)\nt = {a = 1, b = \"s\"}";
        let a = link(&[unit(src)]).unwrap().to_bytes();
        let b = link(&[unit(src)]).unwrap().to_bytes();
        assert_eq!(a, b);
    }
}
