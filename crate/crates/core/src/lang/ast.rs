//! Syntax tree produced by the parser.

use super::SourcePos;

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: SourcePos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    /// `var name [= init]`
    Var { name: String, init: Option<Expr> },
    Assign { target: Expr, value: Expr },
    /// A call evaluated for its side effects.
    Call(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    While { cond: Expr, body: Box<Stmt> },
    /// `function name(params) { body }` binds a global.
    Function {
        name: String,
        params: Vec<String>,
        body: Block,
    },
    Return(Option<Expr>),
    Block(Block),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: SourcePos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Nil,
    Int(i64),
    Float(f64),
    Str(String),
    Ident(String),
    SelfRef,
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    /// `{k = v, ...}`
    Table(Vec<(String, Expr)>),
    /// `obj[key]`
    Index(Box<Expr>, Box<Expr>),
    /// `obj.name`
    Field(Box<Expr>, String),
    /// `f(args)` with no receiver.
    Call(Box<Expr>, Vec<Expr>),
    /// `obj.name(args)` or `obj[key](args)`; `self` is bound to `obj`.
    MethodCall {
        receiver: Box<Expr>,
        method: Box<Expr>,
        args: Vec<Expr>,
    },
    Lambda { params: Vec<String>, body: Block },
}

impl Expr {
    pub fn new(kind: ExprKind, pos: SourcePos) -> Self {
        Self { kind, pos }
    }

    pub fn is_call(&self) -> bool {
        matches!(self.kind, ExprKind::Call(..) | ExprKind::MethodCall { .. })
    }

    pub fn is_assignable(&self) -> bool {
        matches!(
            self.kind,
            ExprKind::Ident(_) | ExprKind::Field(..) | ExprKind::Index(..)
        )
    }
}
