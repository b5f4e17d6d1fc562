//! Recursive-descent parser.
//!
//! Precedence, loosest first: `or`, `and`, `not`, comparisons, `+ -`,
//! `* / %`, unary `-`, `^` (right associative), then postfix call, index
//! and field access. Statements end at a line break, `;`, `}`, `else` or
//! end of input.

use super::ast::{BinOp, Block, Expr, ExprKind, Stmt, StmtKind};
use super::lexer::{Token, TokenKind};
use super::{LangError, SourcePos};

struct Parser<'a> {
    tokens: &'a [Token],
    at: usize,
}

/// Parses a token stream into a top-level block.
pub fn parse(tokens: &[Token]) -> Result<Block, LangError> {
    let mut p = Parser { tokens, at: 0 };
    let mut block = Vec::new();
    loop {
        p.skip_semicolons();
        if p.peek().is_none() {
            break;
        }
        block.push(p.statement()?);
    }
    Ok(block)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.at)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn check(&self, kind: &TokenKind) -> bool {
        self.peek_kind() == Some(kind)
    }

    fn advance(&mut self) -> Option<&'a Token> {
        let t = self.tokens.get(self.at);
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.check(kind) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    /// Position of the next token, or just past the last one at EOF.
    fn here(&self) -> SourcePos {
        match self.peek() {
            Some(t) => t.pos,
            None => self
                .tokens
                .last()
                .map(|t| SourcePos::new(t.pos.line, t.pos.col + 1))
                .unwrap_or(SourcePos::new(1, 1)),
        }
    }

    fn unexpected(&self, expected: &str) -> LangError {
        let found = match self.peek() {
            Some(t) => t.kind.to_string(),
            None => "end of input".to_string(),
        };
        LangError::syntax(self.here(), format!("expected {expected}, found {found}"))
    }

    fn expect(&mut self, kind: &TokenKind) -> Result<&'a Token, LangError> {
        if self.check(kind) {
            Ok(self.advance().expect("checked"))
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    fn expect_ident(&mut self) -> Result<String, LangError> {
        match self.peek_kind() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.at += 1;
                Ok(name)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn skip_semicolons(&mut self) {
        while self.eat(&TokenKind::Semicolon) {}
    }

    /// After a simple statement the next token must sit on a new line or be
    /// one of the explicit terminators.
    fn end_of_statement(&mut self) -> Result<(), LangError> {
        match self.peek() {
            None => Ok(()),
            Some(t) if t.newline_before => Ok(()),
            Some(t) => match t.kind {
                TokenKind::Semicolon => {
                    self.skip_semicolons();
                    Ok(())
                }
                TokenKind::RBrace | TokenKind::Else => Ok(()),
                _ => Err(self.unexpected("end of statement")),
            },
        }
    }

    fn statement(&mut self) -> Result<Stmt, LangError> {
        let pos = self.here();
        let kind = match self.peek_kind() {
            Some(TokenKind::LBrace) => {
                return Ok(Stmt {
                    kind: StmtKind::Block(self.block()?),
                    pos,
                })
            }
            Some(TokenKind::If) => return self.if_statement(),
            Some(TokenKind::While) => {
                self.advance();
                self.expect(&TokenKind::LParen)?;
                let cond = self.expression()?;
                self.expect(&TokenKind::RParen)?;
                let body = Box::new(self.statement()?);
                return Ok(Stmt {
                    kind: StmtKind::While { cond, body },
                    pos,
                });
            }
            Some(TokenKind::Function) => {
                self.advance();
                let name = self.expect_ident()?;
                let params = self.params()?;
                let body = self.block()?;
                return Ok(Stmt {
                    kind: StmtKind::Function { name, params, body },
                    pos,
                });
            }
            Some(TokenKind::Var) => {
                self.advance();
                let name = self.expect_ident()?;
                let init = if self.eat(&TokenKind::Assign) {
                    Some(self.expression()?)
                } else {
                    None
                };
                StmtKind::Var { name, init }
            }
            Some(TokenKind::Return) => {
                self.advance();
                let ends = match self.peek() {
                    None => true,
                    Some(t) => {
                        t.newline_before
                            || matches!(
                                t.kind,
                                TokenKind::Semicolon | TokenKind::RBrace | TokenKind::Else
                            )
                    }
                };
                StmtKind::Return(if ends { None } else { Some(self.expression()?) })
            }
            Some(_) => {
                let target = self.expression()?;
                if self.check(&TokenKind::Assign) {
                    if !target.is_assignable() {
                        return Err(LangError::syntax(
                            self.here(),
                            "left-hand side of `=` is not assignable",
                        ));
                    }
                    self.advance();
                    let value = self.expression()?;
                    StmtKind::Assign { target, value }
                } else if target.is_call() {
                    StmtKind::Call(target)
                } else {
                    return Err(self.unexpected("`=` or a call"));
                }
            }
            None => return Err(self.unexpected("statement")),
        };
        self.end_of_statement()?;
        Ok(Stmt { kind, pos })
    }

    fn if_statement(&mut self) -> Result<Stmt, LangError> {
        let pos = self.here();
        self.expect(&TokenKind::If)?;
        self.expect(&TokenKind::LParen)?;
        let cond = self.expression()?;
        self.expect(&TokenKind::RParen)?;
        let then = Box::new(self.statement()?);
        let otherwise = if self.eat(&TokenKind::Else) {
            Some(Box::new(self.statement()?))
        } else {
            None
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then,
                otherwise,
            },
            pos,
        })
    }

    fn block(&mut self) -> Result<Block, LangError> {
        self.expect(&TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            self.skip_semicolons();
            if self.eat(&TokenKind::RBrace) {
                return Ok(stmts);
            }
            if self.peek().is_none() {
                return Err(self.unexpected("`}`"));
            }
            stmts.push(self.statement()?);
        }
    }

    fn params(&mut self) -> Result<Vec<String>, LangError> {
        self.expect(&TokenKind::LParen)?;
        let mut params = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(params);
        }
        loop {
            params.push(self.expect_ident()?);
            if self.eat(&TokenKind::RParen) {
                return Ok(params);
            }
            self.expect(&TokenKind::Comma)?;
        }
    }

    pub(crate) fn expression(&mut self) -> Result<Expr, LangError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.and_expr()?;
        while let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Or) {
            self.advance();
            let rhs = self.and_expr()?;
            lhs = Expr::new(ExprKind::Or(Box::new(lhs), Box::new(rhs)), t.pos);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.not_expr()?;
        while let Some(t) = self.peek().filter(|t| t.kind == TokenKind::And) {
            self.advance();
            let rhs = self.not_expr()?;
            lhs = Expr::new(ExprKind::And(Box::new(lhs), Box::new(rhs)), t.pos);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, LangError> {
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Not) {
            self.advance();
            let inner = self.not_expr()?;
            return Ok(Expr::new(ExprKind::Not(Box::new(inner)), t.pos));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.additive()?;
        loop {
            let Some(t) = self.peek() else { break };
            let op = match t.kind {
                TokenKind::EqEq => BinOp::Eq,
                TokenKind::NotEq => BinOp::NotEq,
                TokenKind::Lt => BinOp::Lt,
                TokenKind::LtEq => BinOp::LtEq,
                TokenKind::Gt => BinOp::Gt,
                TokenKind::GtEq => BinOp::GtEq,
                _ => break,
            };
            self.advance();
            let rhs = self.additive()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), t.pos);
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let Some(t) = self.peek() else { break };
            let op = match t.kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.multiplicative()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), t.pos);
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        loop {
            let Some(t) = self.peek() else { break };
            let op = match t.kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                TokenKind::Percent => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), t.pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Minus) {
            self.advance();
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), t.pos));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, LangError> {
        let base = self.postfix()?;
        if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Caret) {
            self.advance();
            // right associative; the exponent may carry its own sign
            let exp = self.unary()?;
            return Ok(Expr::new(
                ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)),
                t.pos,
            ));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, LangError> {
        let mut expr = self.primary()?;
        loop {
            let Some(t) = self.peek() else { break };
            match t.kind {
                TokenKind::Dot => {
                    self.advance();
                    let name_pos = self.here();
                    let name = self.expect_ident()?;
                    if self.peek().is_some_and(|n| n.kind == TokenKind::LParen && !n.newline_before) {
                        let args = self.args()?;
                        let method = Expr::new(ExprKind::Str(name), name_pos);
                        expr = Expr::new(
                            ExprKind::MethodCall {
                                receiver: Box::new(expr),
                                method: Box::new(method),
                                args,
                            },
                            t.pos,
                        );
                    } else {
                        expr = Expr::new(ExprKind::Field(Box::new(expr), name), t.pos);
                    }
                }
                // A bracket or paren on a fresh line starts a new statement.
                TokenKind::LBracket if !t.newline_before => {
                    self.advance();
                    let key = self.expression()?;
                    self.expect(&TokenKind::RBracket)?;
                    if self.peek().is_some_and(|n| n.kind == TokenKind::LParen && !n.newline_before) {
                        let args = self.args()?;
                        expr = Expr::new(
                            ExprKind::MethodCall {
                                receiver: Box::new(expr),
                                method: Box::new(key),
                                args,
                            },
                            t.pos,
                        );
                    } else {
                        expr = Expr::new(ExprKind::Index(Box::new(expr), Box::new(key)), t.pos);
                    }
                }
                TokenKind::LParen if !t.newline_before => {
                    let args = self.args()?;
                    expr = Expr::new(ExprKind::Call(Box::new(expr), args), t.pos);
                }
                _ => break,
            }
        }
        Ok(expr)
    }

    fn args(&mut self) -> Result<Vec<Expr>, LangError> {
        self.expect(&TokenKind::LParen)?;
        let mut args = Vec::new();
        if self.eat(&TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expression()?);
            if self.eat(&TokenKind::RParen) {
                return Ok(args);
            }
            self.expect(&TokenKind::Comma)?;
        }
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let Some(t) = self.peek() else {
            return Err(self.unexpected("expression"));
        };
        let pos = t.pos;
        let kind = match &t.kind {
            TokenKind::Nil => ExprKind::Nil,
            TokenKind::Int(v) => ExprKind::Int(*v),
            TokenKind::Float(v) => ExprKind::Float(*v),
            TokenKind::Str(s) => {
                // adjacent literals concatenate: "a" "b" == "ab"
                let mut s = s.clone();
                self.advance();
                while let Some(TokenKind::Str(more)) = self.peek_kind() {
                    s.push_str(more);
                    self.advance();
                }
                return Ok(Expr::new(ExprKind::Str(s), pos));
            }
            TokenKind::Ident(name) => ExprKind::Ident(name.clone()),
            TokenKind::SelfKw => ExprKind::SelfRef,
            TokenKind::LParen => {
                self.advance();
                let inner = self.expression()?;
                self.expect(&TokenKind::RParen)?;
                return Ok(inner);
            }
            TokenKind::LBrace => return self.table(),
            TokenKind::Function => {
                self.advance();
                let params = self.params()?;
                let body = self.block()?;
                return Ok(Expr::new(ExprKind::Lambda { params, body }, pos));
            }
            _ => return Err(self.unexpected("expression")),
        };
        self.advance();
        Ok(Expr::new(kind, pos))
    }

    fn table(&mut self) -> Result<Expr, LangError> {
        let pos = self.here();
        self.expect(&TokenKind::LBrace)?;
        let mut fields = Vec::new();
        loop {
            if self.eat(&TokenKind::RBrace) {
                break;
            }
            let key = self.expect_ident()?;
            self.expect(&TokenKind::Assign)?;
            let value = self.expression()?;
            fields.push((key, value));
            if self.eat(&TokenKind::RBrace) {
                break;
            }
            self.expect(&TokenKind::Comma)?;
        }
        Ok(Expr::new(ExprKind::Table(fields), pos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::lexer::tokenize;

    fn parse_src(src: &str) -> Block {
        parse(&tokenize(src).unwrap()).unwrap()
    }

    fn parse_err(src: &str) -> LangError {
        parse(&tokenize(src).unwrap()).unwrap_err()
    }

    /// Compact s-expression rendering used to compare tree shapes.
    fn sexpr(e: &Expr) -> String {
        match &e.kind {
            ExprKind::Nil => "nil".into(),
            ExprKind::Int(v) => v.to_string(),
            ExprKind::Float(v) => format!("{v:?}"),
            ExprKind::Str(s) => format!("{s:?}"),
            ExprKind::Ident(n) => n.clone(),
            ExprKind::SelfRef => "self".into(),
            ExprKind::Binary(op, a, b) => format!("({op:?} {} {})", sexpr(a), sexpr(b)),
            ExprKind::Neg(a) => format!("(neg {})", sexpr(a)),
            ExprKind::Not(a) => format!("(not {})", sexpr(a)),
            ExprKind::And(a, b) => format!("(and {} {})", sexpr(a), sexpr(b)),
            ExprKind::Or(a, b) => format!("(or {} {})", sexpr(a), sexpr(b)),
            ExprKind::Table(f) => format!(
                "{{{}}}",
                f.iter()
                    .map(|(k, v)| format!("{k}={}", sexpr(v)))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            ExprKind::Index(o, k) => format!("{}[{}]", sexpr(o), sexpr(k)),
            ExprKind::Field(o, k) => format!("{}.{k}", sexpr(o)),
            ExprKind::Call(f, a) => format!(
                "(call {}{})",
                sexpr(f),
                a.iter().map(|x| format!(" {}", sexpr(x))).collect::<String>()
            ),
            ExprKind::MethodCall {
                receiver,
                method,
                args,
            } => format!(
                "(mcall {} {}{})",
                sexpr(receiver),
                sexpr(method),
                args.iter().map(|x| format!(" {}", sexpr(x))).collect::<String>()
            ),
            ExprKind::Lambda { params, body } => {
                format!("(lambda ({}) #{})", params.join(" "), body.len())
            }
        }
    }

    fn expr(src: &str) -> String {
        let toks = tokenize(src).unwrap();
        let mut p = Parser {
            tokens: &toks,
            at: 0,
        };
        sexpr(&p.expression().unwrap())
    }

    #[test]
    fn if_listing_shape() {
        let block = parse_src("if(a == 10) i = 0");
        assert_eq!(block.len(), 1);
        let StmtKind::If {
            cond,
            then,
            otherwise,
        } = &block[0].kind
        else {
            panic!("expected if, got {:?}", block[0]);
        };
        assert_eq!(sexpr(cond), "(Eq a 10)");
        let StmtKind::Assign { target, value } = &then.kind else {
            panic!("expected assignment");
        };
        assert_eq!((sexpr(target), sexpr(value)), ("i".into(), "0".into()));
        assert!(otherwise.is_none());
    }

    #[test]
    fn method_lambda_referencing_self() {
        let block = parse_src("t.m = function(p) { return self.a + p }");
        let StmtKind::Assign { target, value } = &block[0].kind else {
            panic!()
        };
        assert_eq!(sexpr(target), "t.m");
        let ExprKind::Lambda { params, body } = &value.kind else {
            panic!()
        };
        assert_eq!(params, &["p".to_string()]);
        let StmtKind::Return(Some(ret)) = &body[0].kind else {
            panic!()
        };
        assert_eq!(sexpr(ret), "(Add self.a p)");
    }

    #[test]
    fn dangling_while_is_error() {
        let err = parse_err("while(");
        assert!(matches!(err, LangError::Syntax { .. }));
        assert!(err.to_string().contains("expected expression"), "{err}");
    }

    #[test]
    fn precedence() {
        assert_eq!(expr("2+3*4^2"), "(Add 2 (Mul 3 (Pow 4 2)))");
        assert_eq!(expr("2^3^2"), "(Pow 2 (Pow 3 2))");
        assert_eq!(expr("-x^2"), "(neg (Pow x 2))");
        assert_eq!(expr("a < b + 1"), "(Lt a (Add b 1))");
        assert_eq!(expr("not a == b"), "(not (Eq a b))");
        assert_eq!(expr("a or b and not c"), "(or a (and b (not c)))");
        assert_eq!(expr("a - b - c"), "(Sub (Sub a b) c)");
        assert_eq!(expr("-(e / d) * (x)"), "(Mul (neg (Div e d)) x)");
    }

    #[test]
    fn postfix_forms() {
        assert_eq!(expr("t[\"b\"]"), "t[\"b\"]");
        assert_eq!(expr("s.select(id % 2 == 0)"), "(mcall s \"select\" (Eq (Mod id 2) 0))");
        assert_eq!(expr("neighbors.get(rid).distance"), "(mcall neighbors \"get\" rid).distance");
        assert_eq!(expr("f(1, 2)(3)"), "(call (call f 1 2) 3)");
        assert_eq!(expr("{x=0, y=0,}"), "{x=0,y=0}");
        assert_eq!(expr("\"a\" \"b\""), "\"ab\"");
    }

    #[test]
    fn statements_split_on_newline_and_semicolon() {
        let block = parse_src("i = 0; while(i < a) i = i + 1\nx = 1");
        assert_eq!(block.len(), 3);
        assert!(matches!(block[1].kind, StmtKind::While { .. }));
        assert!(parse(&tokenize("a = 1 b = 2").unwrap()).is_err());
    }

    #[test]
    fn paren_on_next_line_starts_new_statement() {
        let block = parse_src("x = y\nf(1)");
        assert_eq!(block.len(), 2);
    }

    #[test]
    fn else_on_following_line() {
        let block = parse_src(
            "if(id == 0)\n  # source\n  mydist = 0.\nelse {\n  mydist = 5\n}\n",
        );
        let StmtKind::If { otherwise, .. } = &block[0].kind else {
            panic!()
        };
        assert!(matches!(otherwise.as_ref().unwrap().kind, StmtKind::Block(_)));
    }

    #[test]
    fn return_without_value() {
        let block = parse_src("function f() {\n return\n}");
        let StmtKind::Function { body, .. } = &block[0].kind else {
            panic!()
        };
        assert_eq!(body[0].kind, StmtKind::Return(None));
    }

    #[test]
    fn non_call_expression_statement_rejected() {
        let err = parse_err("a + 1");
        assert!(err.to_string().contains("`=` or a call"), "{err}");
        assert!(parse(&tokenize("f() = 3").unwrap()).is_err());
    }
}
