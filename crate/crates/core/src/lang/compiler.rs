//! Single-pass code generation from the syntax tree to an [`ObjectUnit`].
//!
//! Names resolve to the innermost enclosing function that declared them with
//! `var` (or as a parameter) before the point of use; anything else is a
//! global, looked up by name at run time.

use super::ast::{BinOp, Block, Expr, ExprKind, Stmt, StmtKind};
use super::image::Constant;
use super::object::{LabelId, ObjFunction, ObjInstr, ObjOp, ObjectUnit, Symbol, SymbolKind};
use super::opcode::Opcode;
use super::{LangError, SourcePos};

struct FnCtx {
    label: String,
    params: u32,
    locals: Vec<String>,
    code: Vec<ObjInstr>,
    next_label: LabelId,
    is_main: bool,
}

impl FnCtx {
    fn new(label: String, params: &[String], is_main: bool) -> Self {
        Self {
            label,
            params: params.len() as u32,
            locals: params.to_vec(),
            code: Vec::new(),
            next_label: 0,
            is_main,
        }
    }

    fn slot_of(&self, name: &str) -> Option<u32> {
        self.locals.iter().position(|l| l == name).map(|i| i as u32)
    }
}

struct Compiler {
    scopes: Vec<FnCtx>,
    finished: Vec<ObjFunction>,
    symbols: Vec<Symbol>,
}

/// Compiles a parsed script. `origin` is carried into the unit for
/// diagnostics only.
pub fn compile(block: &Block, origin: &str) -> Result<ObjectUnit, LangError> {
    let mut c = Compiler {
        scopes: vec![FnCtx::new("<main>".into(), &[], true)],
        finished: Vec::new(),
        symbols: Vec::new(),
    };
    c.block(block)?;
    c.emit(ObjOp::Plain(Opcode::PushNil), None);
    c.emit(ObjOp::Plain(Opcode::Ret), None);
    let main = c.scopes.pop().expect("main scope");
    let mut functions = vec![ObjFunction {
        label: main.label,
        params: 0,
        locals: main.locals.len() as u32,
        code: main.code,
    }];
    functions.extend(c.finished);
    Ok(ObjectUnit {
        origin: origin.to_string(),
        symbols: c.symbols,
        functions,
    })
}

enum Resolved {
    Local { depth: u32, slot: u32 },
    Global,
}

impl Compiler {
    fn ctx(&mut self) -> &mut FnCtx {
        self.scopes.last_mut().expect("at least one scope")
    }

    fn emit(&mut self, op: ObjOp, pos: Option<SourcePos>) {
        self.ctx().code.push(ObjInstr { op, pos });
    }

    fn at(&mut self, op: ObjOp, pos: SourcePos) {
        self.emit(op, Some(pos));
    }

    fn new_label(&mut self) -> LabelId {
        let ctx = self.ctx();
        let l = ctx.next_label;
        ctx.next_label += 1;
        l
    }

    fn note_symbol(&mut self, name: &str, kind: SymbolKind) {
        if !self.symbols.iter().any(|s| s.name == name && s.kind == kind) {
            self.symbols.push(Symbol {
                name: name.to_string(),
                kind,
            });
        }
    }

    fn resolve(&self, name: &str) -> Resolved {
        let innermost = self.scopes.len() - 1;
        for (i, scope) in self.scopes.iter().enumerate().rev() {
            if let Some(slot) = scope.slot_of(name) {
                return Resolved::Local {
                    depth: (innermost - i) as u32,
                    slot,
                };
            }
        }
        Resolved::Global
    }

    fn in_function(&self) -> bool {
        !self.scopes.last().expect("scope").is_main
    }

    fn label_taken(&self, label: &str) -> bool {
        self.finished.iter().any(|f| f.label == label)
            || self.scopes.iter().any(|s| s.label == label)
    }

    fn block(&mut self, block: &Block) -> Result<(), LangError> {
        block.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), LangError> {
        let pos = stmt.pos;
        match &stmt.kind {
            StmtKind::Var { name, init } => {
                match init {
                    Some(e) => self.expr(e)?,
                    None => self.at(ObjOp::Plain(Opcode::PushNil), pos),
                }
                let ctx = self.ctx();
                let slot = match ctx.slot_of(name) {
                    Some(s) => s,
                    None => {
                        ctx.locals.push(name.clone());
                        (ctx.locals.len() - 1) as u32
                    }
                };
                self.note_symbol(name, SymbolKind::Local);
                self.at(ObjOp::LStore { depth: 0, slot }, pos);
            }
            StmtKind::Assign { target, value } => self.assign(target, value, pos)?,
            StmtKind::Call(e) => {
                self.expr(e)?;
                self.at(ObjOp::Plain(Opcode::Pop), pos);
            }
            StmtKind::If {
                cond,
                then,
                otherwise,
            } => {
                let else_l = self.new_label();
                self.expr(cond)?;
                self.at(ObjOp::Jump(Opcode::JumpZ, else_l), pos);
                self.stmt(then)?;
                match otherwise {
                    Some(other) => {
                        let end_l = self.new_label();
                        self.at(ObjOp::Jump(Opcode::Jump, end_l), pos);
                        self.emit(ObjOp::Label(else_l), None);
                        self.stmt(other)?;
                        self.emit(ObjOp::Label(end_l), None);
                    }
                    None => self.emit(ObjOp::Label(else_l), None),
                }
            }
            StmtKind::While { cond, body } => {
                let start = self.new_label();
                let end = self.new_label();
                self.emit(ObjOp::Label(start), None);
                self.expr(cond)?;
                self.at(ObjOp::Jump(Opcode::JumpZ, end), pos);
                self.stmt(body)?;
                self.at(ObjOp::Jump(Opcode::Jump, start), pos);
                self.emit(ObjOp::Label(end), None);
            }
            StmtKind::Function { name, params, body } => {
                if self.label_taken(name) {
                    return Err(LangError::compile(
                        pos,
                        format!("function `{name}` is defined more than once"),
                    ));
                }
                self.function(name.clone(), params, body)?;
                self.at(ObjOp::PushFn(name.clone()), pos);
                self.note_symbol(name, SymbolKind::Global);
                self.at(ObjOp::GStore(name.clone()), pos);
            }
            StmtKind::Return(value) => {
                if !self.in_function() {
                    return Err(LangError::compile(pos, "`return` outside of a function"));
                }
                match value {
                    Some(e) => self.expr(e)?,
                    None => self.at(ObjOp::Plain(Opcode::PushNil), pos),
                }
                self.at(ObjOp::Plain(Opcode::Ret), pos);
            }
            StmtKind::Block(b) => self.block(b)?,
        }
        Ok(())
    }

    fn assign(&mut self, target: &Expr, value: &Expr, pos: SourcePos) -> Result<(), LangError> {
        match &target.kind {
            ExprKind::Ident(name) => {
                self.expr(value)?;
                match self.resolve(name) {
                    Resolved::Local { depth, slot } => self.at(ObjOp::LStore { depth, slot }, pos),
                    Resolved::Global => {
                        self.note_symbol(name, SymbolKind::Global);
                        self.at(ObjOp::GStore(name.clone()), pos)
                    }
                }
            }
            ExprKind::Field(obj, key) => {
                self.expr(obj)?;
                self.push_str(key, target.pos);
                self.expr(value)?;
                self.at(ObjOp::Plain(Opcode::TPut), pos);
            }
            ExprKind::Index(obj, key) => {
                self.expr(obj)?;
                self.expr(key)?;
                self.expr(value)?;
                self.at(ObjOp::Plain(Opcode::TPut), pos);
            }
            _ => return Err(LangError::compile(pos, "invalid assignment target")),
        }
        Ok(())
    }

    fn function(&mut self, label: String, params: &[String], body: &Block) -> Result<(), LangError> {
        self.scopes.push(FnCtx::new(label, params, false));
        for p in params {
            self.note_symbol(p, SymbolKind::Local);
        }
        self.block(body)?;
        self.emit(ObjOp::Plain(Opcode::PushNil), None);
        self.emit(ObjOp::Plain(Opcode::Ret), None);
        let ctx = self.scopes.pop().expect("function scope");
        self.finished.push(ObjFunction {
            label: ctx.label,
            params: ctx.params,
            locals: ctx.locals.len() as u32,
            code: ctx.code,
        });
        Ok(())
    }

    fn push_str(&mut self, s: &str, pos: SourcePos) {
        self.note_symbol(s, SymbolKind::StringConst);
        self.at(ObjOp::PushStr(s.to_string()), pos);
    }

    fn expr(&mut self, e: &Expr) -> Result<(), LangError> {
        let pos = e.pos;
        match &e.kind {
            ExprKind::Nil => self.at(ObjOp::Plain(Opcode::PushNil), pos),
            ExprKind::Int(v) => match i32::try_from(*v) {
                Ok(small) => self.at(ObjOp::PushInt(small), pos),
                Err(_) => self.at(ObjOp::PushConst(Constant::Int(*v)), pos),
            },
            ExprKind::Float(v) => self.at(ObjOp::PushConst(Constant::Float(*v)), pos),
            ExprKind::Str(s) => self.push_str(s, pos),
            ExprKind::Ident(name) => match self.resolve(name) {
                Resolved::Local { depth, slot } => self.at(ObjOp::LLoad { depth, slot }, pos),
                Resolved::Global => {
                    self.note_symbol(name, SymbolKind::Global);
                    self.at(ObjOp::GLoad(name.clone()), pos)
                }
            },
            ExprKind::SelfRef => {
                if !self.in_function() {
                    return Err(LangError::compile(pos, "`self` used outside of a function"));
                }
                self.at(ObjOp::Plain(Opcode::PushSelf), pos);
            }
            ExprKind::Binary(op, a, b) => {
                self.expr(a)?;
                self.expr(b)?;
                let opcode = match op {
                    BinOp::Add => Opcode::Add,
                    BinOp::Sub => Opcode::Sub,
                    BinOp::Mul => Opcode::Mul,
                    BinOp::Div => Opcode::Div,
                    BinOp::Mod => Opcode::Mod,
                    BinOp::Pow => Opcode::Pow,
                    BinOp::Eq => Opcode::Eq,
                    BinOp::NotEq => Opcode::Neq,
                    BinOp::Lt => Opcode::Lt,
                    BinOp::LtEq => Opcode::Lte,
                    BinOp::Gt => Opcode::Gt,
                    BinOp::GtEq => Opcode::Gte,
                };
                self.at(ObjOp::Plain(opcode), pos);
            }
            ExprKind::Neg(a) => {
                self.expr(a)?;
                self.at(ObjOp::Plain(Opcode::Neg), pos);
            }
            ExprKind::Not(a) => {
                self.expr(a)?;
                self.at(ObjOp::Plain(Opcode::Not), pos);
            }
            ExprKind::And(a, b) => self.short_circuit(a, b, Opcode::JumpZ, pos)?,
            ExprKind::Or(a, b) => self.short_circuit(a, b, Opcode::JumpNz, pos)?,
            ExprKind::Table(fields) => {
                self.at(ObjOp::Plain(Opcode::PushTable), pos);
                for (key, value) in fields {
                    self.at(ObjOp::Plain(Opcode::Dup), value.pos);
                    self.push_str(key, value.pos);
                    self.expr(value)?;
                    self.at(ObjOp::Plain(Opcode::TPut), value.pos);
                }
            }
            ExprKind::Index(obj, key) => {
                self.expr(obj)?;
                self.expr(key)?;
                self.at(ObjOp::Plain(Opcode::TGet), pos);
            }
            ExprKind::Field(obj, key) => {
                self.expr(obj)?;
                self.push_str(key, pos);
                self.at(ObjOp::Plain(Opcode::TGet), pos);
            }
            ExprKind::Call(callee, args) => {
                self.expr(callee)?;
                for a in args {
                    self.expr(a)?;
                }
                self.at(ObjOp::Call(args.len() as u32), pos);
            }
            ExprKind::MethodCall {
                receiver,
                method,
                args,
            } => {
                self.expr(receiver)?;
                self.at(ObjOp::Plain(Opcode::Dup), pos);
                self.expr(method)?;
                self.at(ObjOp::Plain(Opcode::TGet), pos);
                for a in args {
                    self.expr(a)?;
                }
                self.at(ObjOp::MCall(args.len() as u32), pos);
            }
            ExprKind::Lambda { params, body } => {
                let mut label = format!("<lambda@{pos}>");
                let mut n = 1;
                while self.label_taken(&label) {
                    n += 1;
                    label = format!("<lambda@{pos}#{n}>");
                }
                self.function(label.clone(), params, body)?;
                self.at(ObjOp::PushFn(label), pos);
            }
        }
        Ok(())
    }

    /// `and`/`or` evaluate to integer 1 or 0. `exit_on` is the jump taken
    /// as soon as the outcome is decided.
    fn short_circuit(&mut self, a: &Expr, b: &Expr, exit_on: Opcode, pos: SourcePos) -> Result<(), LangError> {
        let decided = self.new_label();
        let end = self.new_label();
        self.expr(a)?;
        self.at(ObjOp::Jump(exit_on, decided), pos);
        self.expr(b)?;
        self.at(ObjOp::Jump(exit_on, decided), pos);
        let (fallthrough, early) = if exit_on == Opcode::JumpZ { (1, 0) } else { (0, 1) };
        self.at(ObjOp::PushInt(fallthrough), pos);
        self.at(ObjOp::Jump(Opcode::Jump, end), pos);
        self.emit(ObjOp::Label(decided), None);
        self.at(ObjOp::PushInt(early), pos);
        self.emit(ObjOp::Label(end), None);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{compile_unit, SourceScript};

    fn unit(src: &str) -> ObjectUnit {
        compile_unit(&SourceScript::inline(src)).unwrap()
    }

    fn unit_err(src: &str) -> LangError {
        compile_unit(&SourceScript::inline(src)).unwrap_err()
    }

    #[test]
    fn unknown_symbol_compiles_to_global_load() {
        let u = unit("aerial = swarm.create(1)\naerial.select(fly_to)");
        let main = &u.functions[0];
        assert!(main
            .code
            .iter()
            .any(|i| i.op == ObjOp::GLoad("fly_to".into())));
        assert!(u.symbols.contains(&Symbol {
            name: "fly_to".into(),
            kind: SymbolKind::Global
        }));
    }

    #[test]
    fn var_inside_function_is_a_local_slot() {
        let u = unit("function f() {\n var c = {}\n c.x = 1\n return c\n}");
        let f = u.functions.iter().find(|f| f.label == "f").unwrap();
        assert_eq!(f.locals, 1);
        assert!(f
            .code
            .iter()
            .any(|i| i.op == ObjOp::LStore { depth: 0, slot: 0 }));
        assert!(!f.code.iter().any(|i| i.op == ObjOp::GStore("c".into())));
    }

    #[test]
    fn enclosing_locals_resolve_by_depth() {
        let u = unit("function outer(a) {\n return function() { return a }\n}");
        let lambda = u.functions.iter().find(|f| f.label.starts_with("<lambda")).unwrap();
        assert!(lambda
            .code
            .iter()
            .any(|i| i.op == ObjOp::LLoad { depth: 1, slot: 0 }));
    }

    #[test]
    fn bare_assignment_inside_function_targets_global() {
        let u = unit("function f() { x = 1 }");
        let f = &u.functions[1];
        assert!(f.code.iter().any(|i| i.op == ObjOp::GStore("x".into())));
    }

    #[test]
    fn return_outside_function_rejected() {
        let err = unit_err("x = 1\nreturn x");
        assert_eq!(err.pos(), Some(SourcePos::new(2, 1)));
        assert!(matches!(err, LangError::Compile { .. }));
    }

    #[test]
    fn self_outside_function_rejected() {
        assert!(matches!(unit_err("x = self.a"), LangError::Compile { .. }));
        unit("t = {}\nt.m = function() { return self }");
    }

    #[test]
    fn duplicate_function_in_unit_rejected() {
        assert!(matches!(
            unit_err("function f() {}\nfunction f() {}"),
            LangError::Compile { .. }
        ));
    }

    #[test]
    fn large_and_float_literals_go_to_constant_pool() {
        let u = unit("a = 5000000000\nb = 2.5\nc = 7");
        let code: Vec<_> = u.functions[0].code.iter().map(|i| i.op.clone()).collect();
        assert!(code.contains(&ObjOp::PushConst(Constant::Int(5_000_000_000))));
        assert!(code.contains(&ObjOp::PushConst(Constant::Float(2.5))));
        assert!(code.contains(&ObjOp::PushInt(7)));
    }
}
