//! Tokenizer for swarm scripts.

use std::fmt;

use super::{LangError, SourcePos};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    // keywords
    Function,
    Return,
    If,
    Else,
    While,
    Var,
    Nil,
    And,
    Or,
    Not,
    SelfKw,
    // operators
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Caret,
    EqEq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Assign,
    // punctuation
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Dot,
    Comma,
    Semicolon,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use TokenKind::*;
        let s = match self {
            Ident(name) => return write!(f, "identifier `{name}`"),
            Int(v) => return write!(f, "integer {v}"),
            Float(v) => return write!(f, "float {v}"),
            Str(s) => return write!(f, "string {s:?}"),
            Function => "`function`",
            Return => "`return`",
            If => "`if`",
            Else => "`else`",
            While => "`while`",
            Var => "`var`",
            Nil => "`nil`",
            And => "`and`",
            Or => "`or`",
            Not => "`not`",
            SelfKw => "`self`",
            Plus => "`+`",
            Minus => "`-`",
            Star => "`*`",
            Slash => "`/`",
            Percent => "`%`",
            Caret => "`^`",
            EqEq => "`==`",
            NotEq => "`!=`",
            Lt => "`<`",
            LtEq => "`<=`",
            Gt => "`>`",
            GtEq => "`>=`",
            Assign => "`=`",
            LBrace => "`{`",
            RBrace => "`}`",
            LParen => "`(`",
            RParen => "`)`",
            LBracket => "`[`",
            RBracket => "`]`",
            Dot => "`.`",
            Comma => "`,`",
            Semicolon => "`;`",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: SourcePos,
    /// A line break separates this token from the previous one.
    pub newline_before: bool,
}

fn keyword(word: &str) -> Option<TokenKind> {
    Some(match word {
        "function" => TokenKind::Function,
        "return" => TokenKind::Return,
        "if" => TokenKind::If,
        "else" => TokenKind::Else,
        "while" => TokenKind::While,
        "var" => TokenKind::Var,
        "nil" => TokenKind::Nil,
        "and" => TokenKind::And,
        "or" => TokenKind::Or,
        "not" => TokenKind::Not,
        "self" => TokenKind::SelfKw,
        _ => return None,
    })
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Lexer<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> SourcePos {
        SourcePos::new(self.line, self.col)
    }
}

/// Splits `src` into tokens. Whitespace and `#` comments are dropped, but
/// line breaks are remembered on the following token since they terminate
/// statements.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    let mut lx = Lexer {
        chars: src.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut newline_before = false;

    while let Some(c) = lx.peek() {
        if c == '\n' {
            newline_before = true;
            lx.bump();
            continue;
        }
        if c.is_whitespace() {
            lx.bump();
            continue;
        }
        if c == '#' {
            while let Some(c) = lx.peek() {
                if c == '\n' {
                    break;
                }
                lx.bump();
            }
            continue;
        }

        let pos = lx.pos();
        let kind = if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(c) = lx.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(c);
                    lx.bump();
                } else {
                    break;
                }
            }
            keyword(&word).unwrap_or(TokenKind::Ident(word))
        } else if c.is_ascii_digit() {
            lex_number(&mut lx, pos)?
        } else if c == '"' {
            lex_string(&mut lx, pos)?
        } else {
            lx.bump();
            match c {
                '+' => TokenKind::Plus,
                '-' => TokenKind::Minus,
                '*' => TokenKind::Star,
                '/' => TokenKind::Slash,
                '%' => TokenKind::Percent,
                '^' => TokenKind::Caret,
                '{' => TokenKind::LBrace,
                '}' => TokenKind::RBrace,
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '[' => TokenKind::LBracket,
                ']' => TokenKind::RBracket,
                '.' => TokenKind::Dot,
                ',' => TokenKind::Comma,
                ';' => TokenKind::Semicolon,
                '=' | '!' | '<' | '>' => {
                    let eq = lx.peek() == Some('=');
                    if eq {
                        lx.bump();
                    }
                    match (c, eq) {
                        ('=', true) => TokenKind::EqEq,
                        ('=', false) => TokenKind::Assign,
                        ('!', true) => TokenKind::NotEq,
                        ('<', true) => TokenKind::LtEq,
                        ('<', false) => TokenKind::Lt,
                        ('>', true) => TokenKind::GtEq,
                        ('>', false) => TokenKind::Gt,
                        _ => return Err(LangError::lex(pos, "unexpected character `!`")),
                    }
                }
                other => {
                    return Err(LangError::lex(
                        pos,
                        format!("unexpected character `{other}`"),
                    ))
                }
            }
        };
        tokens.push(Token {
            kind,
            pos,
            newline_before,
        });
        newline_before = false;
    }
    Ok(tokens)
}

fn lex_number(lx: &mut Lexer<'_>, pos: SourcePos) -> Result<TokenKind, LangError> {
    let mut text = String::new();
    while let Some(c) = lx.peek() {
        if c.is_ascii_digit() {
            text.push(c);
            lx.bump();
        } else {
            break;
        }
    }
    // `50.` is a float; `t.5` never occurs since a digit cannot follow an
    // identifier dot, but `1.foo` keeps the dot as field access.
    let mut is_float = false;
    if lx.peek() == Some('.') {
        let mut ahead = lx.chars.clone();
        ahead.next();
        let next = ahead.peek().copied();
        if !matches!(next, Some(c) if c.is_ascii_alphabetic() || c == '_') {
            is_float = true;
            text.push('.');
            lx.bump();
            while let Some(c) = lx.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    lx.bump();
                } else {
                    break;
                }
            }
        }
    }
    if is_float {
        text.parse::<f64>()
            .map(TokenKind::Float)
            .map_err(|_| LangError::lex(pos, format!("malformed number `{text}`")))
    } else {
        text.parse::<i64>()
            .map(TokenKind::Int)
            .map_err(|_| LangError::lex(pos, format!("integer literal `{text}` out of range")))
    }
}

fn lex_string(lx: &mut Lexer<'_>, pos: SourcePos) -> Result<TokenKind, LangError> {
    lx.bump();
    let mut out = String::new();
    loop {
        match lx.bump() {
            None | Some('\n') => return Err(LangError::lex(pos, "unterminated string")),
            Some('"') => return Ok(TokenKind::Str(out)),
            Some('\\') => match lx.bump() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => {
                    return Err(LangError::lex(
                        pos,
                        format!("unsupported escape `\\{other}` in string"),
                    ))
                }
                None => return Err(LangError::lex(pos, "unterminated string")),
            },
            Some(c) => out.push(c),
        }
    }
}
